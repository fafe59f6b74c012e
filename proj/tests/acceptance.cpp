// Acceptance run on the default preset: one PASS/FAIL line per criterion, exit 1 on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "anosov/anosov.hpp"
#include "oracles/upper_half_plane.hpp"

using namespace anosov;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool ok = false;
    std::string detail;
};

int failures = 0;

void report(int n, const std::string& what, const std::function<Outcome()>& body) {
    auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double s = std::chrono::duration<double>(Clock::now() - t0).count();
    if (!o.ok) ++failures;
    std::printf("%s criterion %d: %s [%s] (%.1f s)\n", o.ok ? "PASS" : "FAIL", n, what.c_str(), o.detail.c_str(), s);
    std::fflush(stdout);
}

std::string fmt(double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4g", x);
    return b;
}

std::string summary(const SuiteResult& r) {
    std::string s;
    for (const auto& [k, v] : r.constants) s += (s.empty() ? "" : ", ") + k + "=" + fmt(v);
    if (!r.note.empty()) s += "; " + r.note;
    return s;
}

template <int D> SuiteResult run(void (*f)(SuiteContext<D>&, SuiteResult&), SuiteContext<D>& ctx) {
    return run_suite<D>({"", "", true, f}, ctx);
}

Outcome suites_outcome(const std::vector<SuiteResult>& rs, double budget = -1) {
    Outcome o{true, ""};
    double total = 0;
    for (const auto& r : rs) {
        o.ok = o.ok && r.ok && !r.errored;
        total += r.seconds;
        o.detail += (o.detail.empty() ? "" : " | ") + summary(r);
    }
    if (budget > 0) {
        o.ok = o.ok && total < budget;
        o.detail += " | suite time " + fmt(total) + " s";
    }
    return o;
}

double line_to_boundary(const Flag<2>& f) { return f.frame()(0, 0) / f.frame()(1, 0); }

oracle::cplx point_of(const GroupElement<2>& g) {
    const auto& m = g.matrix();
    return oracle::mobius(m(0, 0), m(0, 1), m(1, 0), m(1, 1), {0.0, 1.0});
}

}  // namespace

int main() {
    const auto preset = make_schottky_preset<3>(PresetRecipe{}, "sl3_rank2");
    SuiteContext<3> ctx(preset, 12, 1);
    std::printf("preset %s, L = 12\n", preset.name.c_str());

    report(1, "algebraic identities, 1e3 instances each, residual <= 1e-8, under 30 s", [&] {
        return suites_outcome({run(suites::inversion<3>, ctx), run(suites::sigma_cocycle<3>, ctx),
                               run(suites::busemann_identities<3>, ctx), run(suites::fixed_points<3>, ctx)},
                              30);
    });

    report(2, "Gromov product two-path agreement, standard pair and i-symmetry",
           [&] { return suites_outcome({run(suites::gromov_two_path<3>, ctx)}); });

    report(3, "strong positivity of omega_k and 2 rho, 1e4 instances, under 60 s",
           [&] { return suites_outcome({run(suites::strong_positivity<3>, ctx)}, 60); });

    // Build the L = 12 table once; later criteria share it.
    auto t0 = Clock::now();
    const auto& t12 = ctx.table();
    std::printf("table: %zu elements in %.1f s\n", t12.size(),
                std::chrono::duration<double>(Clock::now() - t0).count());
    const auto t8 = t12.truncated(8);

    report(4, "almost-additivity defect at L = 12 exceeds L = 10 by under 5%",
           [&] { return suites_outcome({run(suites::almost_additivity_suite<3>, ctx)}); });

    report(5, "Busemann bound for alpha_1 at L = 12 within 10% of L = 10", [&] {
        auto r = run(suites::busemann_bounds<3>, ctx);
        auto o = suites_outcome({r});
        bool weak = !LinearForm<3>::alpha(1).is_strongly_positive();
        o.ok = o.ok && weak;
        return o;
    });

    report(6, "shadow lemma kappa stable under doubling samples, no violation with 2x slack",
           [&] { return suites_outcome({run(suites::shadow_lemma<3>, ctx)}); });

    report(7, "metric construction: finite N, distortion <= 2, 100 Vitali families",
           [&] { return suites_outcome({run(suites::metric_construction<3>, ctx)}); });

    report(8, "Gromov comparison constants stable when the depth doubles",
           [&] { return suites_outcome({run(suites::gromov_comparison<3>, ctx)}); });

    report(9, "measure: conformality residual decreases from L = 8 to L = 12, shadow-mass band bounded and stable", [&] {
        Outcome o{true, ""};
        auto nu12 = build_ps(t12, ctx.balanced(t12));
        auto nu8 = build_ps(t8, ctx.balanced(t8));
        auto kernels = default_test_kernels(t12.generators());
        for (std::size_t i = t12.shell_begin(1); i < t12.shell_end(1); ++i) {
            double a = conformality_residual(nu12, t12.element(i), kernels).max;
            double b = conformality_residual(nu8, t12.element(i), kernels).max;
            o.ok = o.ok && a < b;
            o.detail += t12.word(i).str() + ": " + fmt(a) + " < " + fmt(b) + ", ";
        }
        std::size_t ind = 0;
        auto [lo12, hi12] = suites::shadow_band(ctx, t12, 1.0, ind);
        auto [lo8, hi8] = suites::shadow_band(ctx, t8, 1.0, ind);
        double b12 = hi12 / lo12, b8 = hi8 / lo8;
        o.ok = o.ok && lo12 > 0 && lo8 > 0 && b12 < 1e3 && b8 < 1e3 && relative_drift(b12, b8) < 0.5 && ind == 0;
        o.detail += "band L=12 " + fmt(b12) + ", L=8 " + fmt(b8) + ", indeterminate " + std::to_string(ind);
        return o;
    });

    report(10, "wall margin positive for every gamma != e, direction cloud i-invariant",
           [&] { return suites_outcome({run(suites::regularity<3>, ctx)}); });

    report(11, "Poincare shells decay at 1.5x the tangent and not at the tangent",
           [&] { return suites_outcome({run(suites::poincare<3>, ctx)}); });

    report(12, "essential value certificate for a generator power, eps = 0.5, depth <= 12, re-verified", [&] {
        auto nu = build_ps(t12, ctx.balanced(t12));
        double n0 = triangle_constant(limit_metric_sample(ctx.zeta(), ctx.boundary_words(100, 501), ctx.depth, nu.psi)).n0();
        Word g0 = Word::letter(0);
        while (nu.psi(jordan_projection(evaluate(t12.generators(), g0))) < 1 + std::log(3 * n0)) g0 = g0 * Word::letter(0);
        EssentialOptions o;
        o.n0 = n0;
        o.max_conjugator_len = 12;
        auto cert = essential_value_search(t12, nu, g0, 0.5, AtomSet<3>{}, o);
        EssentialOptions refined = o;
        refined.opt = o.opt.refined();
        bool again = verify_certificate(t12, nu, cert, AtomSet<3>{}, refined);
        return Outcome{cert.found && cert.conjugator.size() <= 12 && again,
                       "gamma0=" + g0.str() + ", conjugator=" + cert.conjugator.str() + ", N0=" + fmt(n0) +
                           ", deviation=" + fmt(cert.max_busemann_deviation) + ", refined " + (again ? "ok" : "fails")};
    });

    report(13, "rank one: G, beta and d_{psi,p} match the upper half-plane within 1e-7", [&] {
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> scale(0.2, 3.0);
        double worst = 0;
        int done = 0;
        while (done < 1000) {
            auto xi = random_flag<2>(rng), eta = random_flag<2>(rng);
            double a = line_to_boundary(xi), b = line_to_boundary(eta);
            if (std::abs(a - b) < 1e-3 || std::abs(a) > 1e3 || std::abs(b) > 1e3) continue;
            auto p = random_element<2>(rng), q = random_element<2>(rng);
            double ref = oracle::gromov_product(a, b, {0.0, 1.0});
            auto G = gromov_product(xi, eta);
            worst = std::max({worst, std::abs(G[0] - ref), std::abs(G[1] + ref)});
            auto beta = busemann(xi, p, q);
            worst = std::max(worst, std::abs(beta[0] - 0.5 * oracle::busemann(a, point_of(p), point_of(q))));
            double c = scale(rng);
            double dref = std::exp(-c * oracle::gromov_product(a, b, point_of(p)));
            double d = virtual_distance(xi, eta, LinearForm<2>::omega(1) * c, p);
            worst = std::max(worst, std::abs(d - dref) / std::max(1.0, dref));
            ++done;
        }
        return Outcome{worst <= 1e-7, "max residual " + fmt(worst)};
    });

    report(14, "Myrberg score at L = 12 at least the L = 8 score, tol 0.05, 100 targets", [&] {
        auto rng = ctx.rng(601);
        const Alphabet ab = preset.alphabet();
        auto xi0 = attracting_flag(evaluate(t12.generators(), BoundaryWord::random(9, ab, rng).prefix));
        std::vector<FlagPair<3>> targets;
        while (targets.size() < 100) {
            FlagPair<3> p(ctx.zeta()(BoundaryWord::random(32, ab, rng), 32), ctx.zeta()(BoundaryWord::random(32, ab, rng), 32));
            if (p.transversal()) targets.push_back(p);
        }
        double s12 = myrberg_score(xi0, t12, targets, 0.05).score;
        double s8 = myrberg_score(xi0, t8, targets, 0.05).score;
        return Outcome{s12 >= s8, "L=12 " + fmt(s12) + ", L=8 " + fmt(s8)};
    });

    std::printf("%s: %d of 14 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
