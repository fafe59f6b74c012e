#pragma once

// Verification suites run by `anosov verify`. Hard suites compare against fixed tolerances and
// decide the exit status; soft suites measure stability across L, sample size or depth and
// only annotate the report.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "anosov/measure.hpp"
#include "anosov/metric.hpp"
#include "anosov/orbit.hpp"
#include "anosov/sampling.hpp"
#include "anosov/schottky.hpp"

namespace anosov {

struct SuiteResult {
    std::string lemma_id;
    bool hard = true;
    bool ok = true;
    bool errored = false;
    std::vector<std::pair<std::string, double>> constants;
    std::vector<std::pair<std::string, std::string>> witnesses;
    std::string note;
    double seconds = 0;

    // pass / fail for hard suites, pass / warn for soft ones, error when the suite threw
    std::string status() const {
        if (errored) return "error";
        if (ok) return "pass";
        return hard ? "fail" : "warn";
    }
    bool fails_run() const { return hard && (errored || !ok); }

    void constant(const std::string& k, double v) { constants.emplace_back(k, v); }
    void witness(const std::string& k, const std::string& v) { witnesses.emplace_back(k, v); }
    // Records a check; the suite passes only if every check does.
    void check(bool cond, const std::string& what) {
        if (cond) return;
        ok = false;
        note += (note.empty() ? "" : "; ") + what;
    }
};

// Cartan vector as "(a, b, c)".
template <int D> std::string cartan_str(const CartanVector<D>& v) {
    std::ostringstream s;
    s.precision(6);
    s << "(";
    for (int i = 0; i < D; ++i) s << (i ? ", " : "") << v[i];
    s << ")";
    return s.str();
}

// Lazily built shared inputs: the orbit table, the limit map and the measure form.
template <int D> class SuiteContext {
public:
    SuiteContext(SchottkyPreset<D> preset, int max_len, unsigned long long seed)
        : preset_(std::move(preset)), L_(max_len), seed_(seed) {}

    std::optional<LinearForm<D>> psi;  // direction of the measure form; empty selects a tangent scan
    std::size_t depth = 32;            // boundary-word evaluation depth
    std::size_t sphere_cap = default_sphere_cap;
    unsigned threads = 0;

    const SchottkyPreset<D>& preset() const { return preset_; }
    int max_len() const { return L_; }
    unsigned long long seed() const { return seed_; }

    const OrbitTable<D>& table() {
        if (!table_) table_ = OrbitTable<D>::enumerate(preset_, L_, sphere_cap, threads);
        return *table_;
    }
    // The table at L - drop, for stability checks.
    OrbitTable<D> shorter(int drop = 2) {
        if (L_ - drop < 2) throw InsufficientDataError("stability checks need max length at least " + std::to_string(drop + 2));
        return table().truncated(L_ - drop);
    }
    const LimitMap<D>& zeta() {
        if (!zeta_) zeta_.emplace(preset_);
        return *zeta_;
    }
    int horizon() {
        if (!horizon_) horizon_ = flat_precision_horizon(table());
        return *horizon_;
    }

    // Independent stream per suite, fixed by the run seed.
    std::mt19937_64 rng(std::uint64_t salt) const {
        std::seed_seq s{static_cast<std::uint64_t>(seed_), salt};
        return std::mt19937_64(s);
    }

    std::vector<Word> boundary_words(std::size_t n, std::uint64_t salt, std::size_t len = 48) const {
        auto r = rng(salt);
        std::vector<Word> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(BoundaryWord::random(len, preset_.alphabet(), r).prefix);
        return out;
    }

    // Unit-norm direction of the measure form.
    const LinearForm<D>& measure_direction() {
        if (!direction_) {
            if (psi) direction_ = *psi * (1.0 / psi->norm());
            else direction_ = tangent_scan_direction(table());
        }
        return *direction_;
    }
    // Measure form on t: the direction scaled to the shell-balanced exponent of t.
    LinearForm<D> balanced(const OrbitTable<D>& t) {
        const auto& dir = measure_direction();
        return dir * shell_balanced_exponent(t, dir);
    }

    // Among unit forms <u, .> with u on the sampled limit cone, the one with the smallest
    // balanced exponent: the tangent direction of maximal growth.
    static LinearForm<D> tangent_scan_direction(const OrbitTable<D>& t) {
        auto cone = limit_cone_estimate(t, std::max(1, t.max_len() / 2));
        std::vector<CartanVector<D>> cand = cone.hull;
        Vec<D> c = Vec<D>::Zero();
        for (const auto& h : cone.hull) c += h.coords();
        cand.push_back(CartanVector<D>::project(c));
        for (std::size_t i = 0; i < cone.hull.size(); ++i)
            for (std::size_t j = i + 1; j < cone.hull.size(); ++j)
                cand.push_back(cone.hull[i] + cone.hull[j]);
        LinearForm<D> best;
        double best_s = std::numeric_limits<double>::infinity();
        for (const auto& u : cand) {
            if (!(u.norm() > 0)) continue;
            LinearForm<D> f(u.coords() / u.norm());
            double s = shell_balanced_exponent(t, f);
            if (s < best_s) {
                best_s = s;
                best = f;
            }
        }
        if (!std::isfinite(best_s)) throw InsufficientDataError("tangent scan found no usable direction");
        return best;
    }

private:
    SchottkyPreset<D> preset_;
    int L_;
    unsigned long long seed_;
    std::optional<OrbitTable<D>> table_;
    std::optional<LimitMap<D>> zeta_;
    std::optional<int> horizon_;
    std::optional<LinearForm<D>> direction_;
};

template <int D> struct SuiteSpec {
    std::string id;
    std::string group;  // identity, lemma or measure
    bool hard;
    std::function<void(SuiteContext<D>&, SuiteResult&)> run;
};

namespace suites {

inline constexpr double identity_tol = 1e-8;
inline constexpr int identity_instances = 1000;

// ---------------------------------------------------------------- identity suites

template <int D> void preset_integrity(SuiteContext<D>& ctx, SuiteResult& r) {
    try {
        validate_preset(ctx.preset());
    } catch (const PresetIntegrityError& e) {
        r.check(false, e.what());
        r.witness("reason", e.what());
        return;
    }
    auto c = check_preset(ctx.preset());
    r.constant("min_loxodromic_gap", c.min_loxodromic_gap);
    r.constant("min_regular_gap", c.min_regular_gap);
    r.constant("growth_ratio", c.growth_ratio);
    r.constant("letter_flag_margin", letter_flag_margin(ctx.preset().letters()));
    r.constant("check_length", ctx.preset().check_length);
}

template <int D> void inversion(SuiteContext<D>& ctx, SuiteResult& r) {
    auto rng = ctx.rng(101);
    double worst = 0;
    int at = 0;
    for (int t = 0; t < identity_instances; ++t) {
        auto g = random_loxodromic<D>(rng);
        auto gi = g.inverse();
        double e = std::max(max_abs(cartan_projection(gi) - cartan_projection(g).opposition()),
                            max_abs(jordan_projection(gi) - jordan_projection(g).opposition()));
        if (e > worst) worst = e, at = t;
    }
    r.constant("max_residual", worst);
    r.witness("instance", std::to_string(at));
    r.check(worst <= identity_tol, "mu or lambda inversion residual above tolerance");
}

template <int D> void sigma_cocycle(SuiteContext<D>& ctx, SuiteResult& r) {
    auto rng = ctx.rng(102);
    double worst = 0;
    int at = 0;
    for (int t = 0; t < identity_instances; ++t) {
        auto g1 = random_element<D>(rng), g2 = random_element<D>(rng);
        auto xi = random_flag<D>(rng);
        double e = max_abs(iwasawa_sigma(g1 * g2, xi) - iwasawa_sigma(g1, flag_action(g2, xi)) - iwasawa_sigma(g2, xi));
        if (e > worst) worst = e, at = t;
    }
    r.constant("max_residual", worst);
    r.witness("instance", std::to_string(at));
    r.check(worst <= identity_tol, "cocycle residual above tolerance");
}

template <int D> void busemann_identities(SuiteContext<D>& ctx, SuiteResult& r) {
    auto rng = ctx.rng(103);
    double cocycle = 0, invariance = 0, sigma = 0;
    const GroupElement<D> e;
    for (int t = 0; t < identity_instances; ++t) {
        auto xi = random_flag<D>(rng);
        auto g = random_element<D>(rng), h = random_element<D>(rng), q = random_element<D>(rng);
        cocycle = std::max(cocycle, max_abs(busemann(xi, g, h) + busemann(xi, h, q) - busemann(xi, g, q)));
        invariance = std::max(invariance, max_abs(busemann(flag_action(g, xi), g * h, g * q) - busemann(xi, h, q)));
        sigma = std::max(sigma, max_abs(busemann(xi, g, e) - iwasawa_sigma(g.inverse(), xi)));
    }
    r.constant("cocycle_residual", cocycle);
    r.constant("invariance_residual", invariance);
    r.constant("sigma_residual", sigma);
    r.check(std::max({cocycle, invariance, sigma}) <= identity_tol, "Busemann identity residual above tolerance");
}

template <int D> void fixed_points(SuiteContext<D>& ctx, SuiteResult& r) {
    auto rng = ctx.rng(104);
    double worst = 0;
    int at = 0;
    for (int t = 0; t < identity_instances; ++t) {
        auto g = random_loxodromic<D>(rng);
        auto p = random_element<D>(rng);
        auto lam = jordan_projection(g);
        double e = std::max({max_abs(busemann(attracting_flag(g), p, g * p) - lam),
                             max_abs(busemann(attracting_flag(g.inverse()), p, g * p) + jordan_projection(g.inverse())),
                             max_abs(iwasawa_sigma(g, attracting_flag(g)) - lam)});
        if (e > worst) worst = e, at = t;
    }
    r.constant("max_residual", worst);
    r.witness("instance", std::to_string(at));
    r.check(worst <= identity_tol, "fixed-point identity residual above tolerance");
}

template <int D> void gromov_two_path(SuiteContext<D>& ctx, SuiteResult& r) {
    auto rng = ctx.rng(105);
    double two_path = 0, symmetry = 0;
    int done = 0, skipped = 0;
    while (done < identity_instances) {
        FlagPair<D> p(random_flag<D>(rng), random_flag<D>(rng));
        if (p.transversality_margin < 1e-3) {
            ++skipped;
            continue;
        }
        auto a = gromov_product(p);
        two_path = std::max(two_path, max_abs(a - gromov_product_busemann(p)));
        symmetry = std::max(symmetry, max_abs(gromov_product(FlagPair<D>(p.eta, p.xi)) - a.opposition()));
        ++done;
    }
    double standard = max_abs(gromov_product(Flag<D>::standard(), Flag<D>::opposite_standard()));
    r.constant("two_path_residual", two_path);
    r.constant("symmetry_residual", symmetry);
    r.constant("standard_pair", standard);
    r.constant("skipped_near_tangent", skipped);
    r.check(two_path <= identity_tol, "two-path residual above tolerance");
    r.check(symmetry <= identity_tol, "i-symmetry residual above tolerance");
    r.check(standard <= identity_tol, "G(e+, e-) is not zero");
}

template <int D> void strong_positivity(SuiteContext<D>& ctx, SuiteResult& r) {
    auto rng = ctx.rng(106);
    std::vector<LinearForm<D>> forms;
    for (int k = 1; k < D; ++k) forms.push_back(LinearForm<D>::omega(k));
    forms.push_back(LinearForm<D>::two_rho());
    std::size_t violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    int at = 0;
    const int n = 10 * identity_instances;
    for (int t = 0; t < n; ++t) {
        auto p = random_element<D>(rng), q = random_element<D>(rng);
        auto xi = random_flag<D>(rng);
        auto b = busemann(xi, p, q);
        auto a = symmetric_distance(p, q), ai = symmetric_distance(q, p);
        for (const auto& psi : forms) {
            double excess = std::max(psi(b) - psi(a), -psi(ai) - psi(b));
            if (excess > 1e-9) ++violations;
            if (excess > worst) worst = excess, at = t;
        }
    }
    r.constant("violations", static_cast<double>(violations));
    r.constant("max_excess", worst);
    r.constant("instances", n);
    r.witness("instance", std::to_string(at));
    r.check(violations == 0, "strongly positive form exceeds the symmetric distance");
}

// ---------------------------------------------------------------- lemma suites

template <int D> void regularity(SuiteContext<D>& ctx, SuiteResult& r) {
    const auto& t = ctx.table();
    auto cone = limit_cone_estimate(t, 1);
    r.constant("wall_margin", cone.wall_margin);
    r.constant("inversion_defect", cone.inversion_defect);
    r.constant("regularity_margin", regularity_margin(t));
    r.constant("table_size", static_cast<double>(t.size()));
    r.check(cone.wall_margin > 0, "a direction touches a Weyl wall");
    r.check(cone.inversion_defect <= 1e-9, "direction cloud is not i-invariant");
}

template <int D> void word_length(SuiteContext<D>& ctx, SuiteResult& r) {
    auto a = word_length_bounds(ctx.table());
    auto b = word_length_bounds(ctx.shorter());
    r.constant("upper_ratio", a.upper_ratio);
    r.constant("lower_slope", a.lower.slope);
    r.constant("upper_drift", relative_drift(a.upper_ratio, b.upper_ratio));
    r.witness("upper", ctx.table().word(a.upper_witness).str());
    r.check(std::isfinite(a.upper_ratio), "no linear upper bound");
    r.check(a.lower.slope > 0, "minimal norm does not grow with length");
    r.check(relative_drift(a.upper_ratio, b.upper_ratio) < 0.1, "upper ratio drifts with L");
}

template <int D> void almost_additivity_suite(SuiteContext<D>& ctx, SuiteResult& r) {
    auto a = almost_additivity(ctx.table());
    auto b = almost_additivity(ctx.shorter());
    r.constant("max_defect", a.max_defect);
    r.constant("max_defect_shorter", b.max_defect);
    r.constant("growth", b.max_defect > 0 ? a.max_defect / b.max_defect - 1 : 0.0);
    r.witness("gamma", ctx.table().word(a.witness).str());
    r.witness("split", std::to_string(a.split));
    r.check(a.max_defect <= 1.05 * b.max_defect, "defect grows by 5% or more over two extra letters");
}

template <int D> std::vector<Flag<D>> limit_flags(SuiteContext<D>& ctx, std::size_t n, std::uint64_t salt) {
    std::vector<Flag<D>> flags;
    for (const auto& w : ctx.boundary_words(n, salt, 32)) flags.push_back(ctx.zeta()(w, 32));
    return flags;
}

template <int D> void busemann_strong(SuiteContext<D>& ctx, SuiteResult& r) {
    auto flags = limit_flags(ctx, 4, 201);
    auto rng = ctx.rng(202);
    for (int i = 0; i < 4; ++i) flags.push_back(random_flag<D>(rng));
    auto t = ctx.table().truncated(std::min(ctx.max_len(), 6));
    std::vector<LinearForm<D>> forms;
    for (int k = 1; k < D; ++k) forms.push_back(LinearForm<D>::omega(k));
    forms.push_back(LinearForm<D>::two_rho());
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& psi : forms) {
        auto b = busemann_bounds_check(t, psi, flags);
        worst = std::max({worst, b.c_upper, b.c_lower});
    }
    r.constant("max_defect", worst);
    r.check(worst <= identity_tol, "strongly positive form has a Busemann defect");
}

template <int D> void busemann_bounds(SuiteContext<D>& ctx, SuiteResult& r) {
    auto flags = limit_flags(ctx, 6, 203);
    auto psi = LinearForm<D>::alpha(1);
    auto a = busemann_bounds_check(ctx.table(), psi, flags);
    auto b = busemann_bounds_check(ctx.shorter(), psi, flags);
    double ca = std::max(a.c_upper, a.c_lower), cb = std::max(b.c_upper, b.c_lower);
    r.constant("c_upper", a.c_upper);
    r.constant("c_lower", a.c_lower);
    r.constant("c_shorter", cb);
    r.constant("strongly_positive", psi.is_strongly_positive() ? 1 : 0);
    r.witness("upper", ctx.table().word(a.upper_witness).str());
    r.witness("lower", ctx.table().word(a.lower_witness).str());
    r.check(std::isfinite(ca), "defect is not finite");
    r.check(ca <= 1.1 * cb + 1e-12, "fitted constant grows by 10% or more over two extra letters");
}

template <int D> void shadow_lemma(SuiteContext<D>& ctx, SuiteResult& r) {
    int h = ctx.horizon();
    auto r1 = ctx.rng(301), r2 = ctx.rng(301), r3 = ctx.rng(301);
    auto a = shadow_kappa_fit(ctx.table(), ctx.zeta(), 1.0, h, 200, ctx.depth, r1);
    auto b = shadow_kappa_fit(ctx.table(), ctx.zeta(), 1.0, h, 400, ctx.depth, r2);
    auto c = shadow_kappa_fit(ctx.table(), ctx.zeta(), 1.0, h, 800, ctx.depth, r3);
    r.constant("kappa", b.kappa);
    r.constant("kappa_200", a.kappa);
    r.constant("kappa_800", c.kappa);
    r.constant("members", static_cast<double>(b.members));
    r.constant("precision_horizon", h);
    r.witness("target", b.witness_target.str());
    r.witness("boundary_word", b.witness_word.str());
    r.check(relative_drift(a.kappa, b.kappa) < 0.1, "kappa drifts under doubling");
    r.check(c.kappa <= 2 * a.kappa, "a member violates the fitted bound with 2x slack");
    r.check(c.indeterminate == 0, "indeterminate shadow memberships");
}

template <int D> void shadow_transfer(SuiteContext<D>& ctx, SuiteResult& r) {
    int h = ctx.horizon();
    auto r1 = ctx.rng(302), r2 = ctx.rng(302);
    auto a = shadow_transfer_fit(ctx.table(), ctx.zeta(), 2, h, 200, 40, r1);
    auto b = shadow_transfer_fit(ctx.shorter(), ctx.zeta(), 2, h, 200, 40, r2);
    r.constant("c", a.c);
    r.constant("c_shorter", b.c);
    r.witness("target", a.witness_target.str());
    r.check(relative_drift(a.c, b.c) < 0.1, "transfer constant drifts with L");
}

template <int D> void morse(SuiteContext<D>& ctx, SuiteResult& r) {
    int h = ctx.horizon();
    if (h < 3) throw InsufficientDataError("precision horizon below 3");
    double shallow = 0, deep = 0;
    for (const auto& x : ctx.boundary_words(30, 303, static_cast<std::size_t>(h))) {
        std::vector<Word> ray;
        for (int n = 1; n <= h; ++n) ray.push_back(x.prefix(static_cast<std::size_t>(n)));
        deep = std::max(deep, morse_deviation(ray, ctx.table()));
        ray.pop_back();
        shallow = std::max(shallow, morse_deviation(ray, ctx.table()));
    }
    r.constant("deviation", deep);
    r.constant("deviation_shorter", shallow);
    r.constant("depth", h);
    r.check(deep < 1.1 * shallow + 1e-12, "deviation grows by 10% or more with one more letter");
}

template <int D> MetricSample<D> metric_sample(SuiteContext<D>& ctx, std::size_t n) {
    return limit_metric_sample(ctx.zeta(), ctx.boundary_words(n, 401), ctx.depth, LinearForm<D>::omega(1));
}

template <int D> void metric_construction(SuiteContext<D>& ctx, SuiteResult& r) {
    auto s = metric_sample(ctx, 200);
    auto tri = triangle_constant(s);
    double eps = 0.5 * max_admissible_eps(weak_constants(s));
    if (!std::isfinite(eps)) eps = 0.5;
    auto pm = power_metric(s, eps);
    auto rng = ctx.rng(402);
    std::uniform_int_distribution<std::size_t> c(0, s.size() - 1);
    std::uniform_real_distribution<double> lr(std::log(1e-4), 0.0);
    int certified = 0;
    for (int f = 0; f < 100; ++f) {
        std::vector<Ball> balls;
        for (int b = 0; b < 30; ++b) balls.push_back({c(rng), std::exp(lr(rng))});
        if (vitali_cover(balls, s, tri.n0()).certified) ++certified;
    }
    r.constant("triangle_n", tri.n);
    r.constant("n0", tri.n0());
    r.constant("eps", eps);
    r.constant("distortion", pm.distortion);
    r.constant("vitali_certified", certified);
    r.witness("triangle", std::to_string(tri.witness[0]) + "," + std::to_string(tri.witness[1]) + "," +
                              std::to_string(tri.witness[2]));
    r.check(std::isfinite(tri.n), "triangle constant is not finite");
    r.check(pm.distortion <= 2.0, "power metric distortion above 2");
    r.check(certified == 100, "a Vitali certificate failed");
}

template <int D> void weak_constants_suite(SuiteContext<D>& ctx, SuiteResult& r) {
    auto a = weak_constants(metric_sample(ctx, 200));
    auto b = weak_constants(metric_sample(ctx, 400));
    r.constant("c_sym", b.c_sym);
    r.constant("c_ultra", b.c_ultra);
    r.constant("c_sym_200", a.c_sym);
    r.constant("c_ultra_200", a.c_ultra);
    r.check(relative_drift(a.c_sym, b.c_sym) < 0.1, "symmetry constant drifts under doubling");
    r.check(relative_drift(a.c_ultra, b.c_ultra) < 0.1, "ultrametric constant drifts under doubling");
}

template <int D> void gromov_comparison(SuiteContext<D>& ctx, SuiteResult& r) {
    auto rng = ctx.rng(403);
    auto psi = LinearForm<D>::omega(1);
    auto pairs = sample_word_pairs(ctx.preset().alphabet(), 300, 12, 64, rng);
    auto a = gromov_comparison_fit(ctx.zeta(), psi, pairs, 32);
    auto b = gromov_comparison_fit(ctx.zeta(), psi, pairs, 64);
    r.constant("c1", b.c1);
    r.constant("c2", b.c2);
    r.constant("c1_depth32", a.c1);
    r.constant("c2_depth32", a.c2);
    r.witness("pair", pairs[b.witness].first.prefix(16).str() + "|" + pairs[b.witness].second.prefix(16).str());
    r.check(relative_drift(a.c1, b.c1) < 0.1 && relative_drift(a.c2, b.c2) < 0.1,
            "comparison constants drift when the depth doubles");
}

// ---------------------------------------------------------------- measure suites

template <int D> void conformality(SuiteContext<D>& ctx, SuiteResult& r) {
    const auto& t = ctx.table();
    auto ts = ctx.shorter();
    auto nu = build_ps(t, ctx.balanced(t));
    auto nus = build_ps(ts, ctx.balanced(ts));
    auto kernels = default_test_kernels(t.generators());
    double worst = 0;
    for (std::size_t i = t.shell_begin(1); i < t.shell_end(1); ++i) {
        double a = conformality_residual(nu, t.element(i), kernels).max;
        double b = conformality_residual(nus, t.element(i), kernels).max;
        worst = std::max(worst, a);
        r.constant("residual_" + t.word(i).str(), a);
        r.constant("residual_shorter_" + t.word(i).str(), b);
        r.check(a < b, "residual of " + t.word(i).str() + " does not decrease with L");
    }
    r.constant("max_residual", worst);
}

template <int D> std::pair<double, double> shadow_band(SuiteContext<D>& ctx, const OrbitTable<D>& t, double radius,
                                                       std::size_t& indeterminate) {
    auto nu = build_ps(t, ctx.balanced(t));
    int top = std::min(t.max_len() - 3, ctx.horizon());
    if (top < 1) throw InsufficientDataError("no shadow targets below L - 3 within the precision horizon");
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (int l = 1; l <= top; ++l) {
        std::size_t n = t.shell_end(l) - t.shell_begin(l);
        for (std::size_t k = 0; k < 2; ++k) {
            auto s = shadow_mass_ratio(nu, t.element(t.shell_begin(l) + (k * n) / 2), radius);
            indeterminate += s.indeterminate;
            lo = std::min(lo, s.ratio);
            hi = std::max(hi, s.ratio);
        }
    }
    return {lo, hi};
}

template <int D> void shadow_mass(SuiteContext<D>& ctx, SuiteResult& r) {
    std::size_t ind = 0;
    auto [lo, hi] = shadow_band(ctx, ctx.table(), 1.0, ind);
    auto ts = ctx.shorter();
    auto [los, his] = shadow_band(ctx, ts, 1.0, ind);
    double band = hi / lo, bands = his / los;
    r.constant("band_min", lo);
    r.constant("band_max", hi);
    r.constant("band_ratio", band);
    r.constant("band_ratio_shorter", bands);
    r.constant("indeterminate", static_cast<double>(ind));
    r.check(lo > 0 && band < 1e3, "shadow-mass band is not bounded by 1e3");
    r.check(relative_drift(band, bands) < 0.5, "shadow-mass band drifts with L");
}

template <int D> void poincare(SuiteContext<D>& ctx, SuiteResult& r) {
    const auto& t = ctx.table();
    auto psi = LinearForm<D>::omega(1);
    double delta = critical_exponent(t, CartanVector<D>::project(psi.coefficients())).value;
    int first = std::max(1, t.max_len() / 2);
    double at = shell_ratio(poincare_partial(t, psi, delta), first);
    double above = shell_ratio(poincare_partial(t, psi, 1.5 * delta), first);
    r.constant("critical_exponent", delta);
    r.constant("shell_ratio_tangent", at);
    r.constant("shell_ratio_1_5", above);
    r.check(above < 0.8, "shell subtotals do not decay above the tangent");
    r.check(at >= 0.9, "shell subtotals decay at the tangent");
}

}  // namespace suites

template <int D> const std::vector<SuiteSpec<D>>& suite_registry() {
    static const std::vector<SuiteSpec<D>> reg{
        {"preset-integrity", "identity", true, suites::preset_integrity<D>},
        {"identity.inversion", "identity", true, suites::inversion<D>},
        {"identity.sigma-cocycle", "identity", true, suites::sigma_cocycle<D>},
        {"identity.busemann", "identity", true, suites::busemann_identities<D>},
        {"identity.fixed-points", "identity", true, suites::fixed_points<D>},
        {"gromov.two-path", "identity", true, suites::gromov_two_path<D>},
        {"strong-positivity", "identity", true, suites::strong_positivity<D>},
        {"regularity", "lemma", true, suites::regularity<D>},
        {"word-length", "lemma", false, suites::word_length<D>},
        {"almost-additivity", "lemma", false, suites::almost_additivity_suite<D>},
        {"busemann-bounds.strongly-positive", "lemma", true, suites::busemann_strong<D>},
        {"busemann-bounds", "lemma", false, suites::busemann_bounds<D>},
        {"shadow-lemma", "lemma", false, suites::shadow_lemma<D>},
        {"shadow-transfer", "lemma", false, suites::shadow_transfer<D>},
        {"morse", "lemma", false, suites::morse<D>},
        {"metric-construction", "lemma", true, suites::metric_construction<D>},
        {"weak-constants", "lemma", false, suites::weak_constants_suite<D>},
        {"gromov-comparison", "lemma", false, suites::gromov_comparison<D>},
        {"conformality", "measure", false, suites::conformality<D>},
        {"shadow-mass", "measure", false, suites::shadow_mass<D>},
        {"poincare", "measure", false, suites::poincare<D>},
    };
    return reg;
}

// Comma-separated suite ids and groups; "all" selects everything. Registry order is kept.
template <int D> std::vector<const SuiteSpec<D>*> select_suites(const std::string& selection) {
    const auto& reg = suite_registry<D>();
    std::vector<char> on(reg.size(), 0);
    std::stringstream ss(selection.empty() ? "all" : selection);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        bool hit = false;
        for (std::size_t i = 0; i < reg.size(); ++i)
            if (tok == "all" || tok == reg[i].id || tok == reg[i].group) on[i] = 1, hit = true;
        if (!hit) throw InputError("unknown suite '" + tok + "'");
    }
    std::vector<const SuiteSpec<D>*> out;
    for (std::size_t i = 0; i < reg.size(); ++i)
        if (on[i]) out.push_back(&reg[i]);
    return out;
}

// Resource errors propagate; every other library error marks the suite as errored.
template <int D> SuiteResult run_suite(const SuiteSpec<D>& spec, SuiteContext<D>& ctx) {
    SuiteResult r;
    r.lemma_id = spec.id;
    r.hard = spec.hard;
    auto start = std::chrono::steady_clock::now();
    try {
        spec.run(ctx, r);
    } catch (const ResourceError&) {
        throw;
    } catch (const Error& e) {
        r.errored = true;
        r.ok = false;
        r.note = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace anosov
