#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <memory>
#include <thread>
#include <vector>

#include "anosov/lie.hpp"
#include "anosov/schottky.hpp"
#include "anosov/stats.hpp"
#include "anosov/word.hpp"

namespace anosov {

inline constexpr std::size_t default_sphere_cap = 2'000'000;

template <int D> struct OrbitEntry {
    Word word;
    GroupElement<D> matrix;
    CartanVector<D> mu;
    CartanVector<D> lam;
    Flag<D> flag_plus;
    int word_len = 0;
};

// Ball of radius L in the free group together with mu, lambda and the kappa_1 flag
// of every element. Entries are stored in length-lexicographic order in flat arrays;
// words are recovered from the index on demand.
template <int D> class OrbitTable {
    struct Storage {
        SchottkyPreset<D> preset;
        std::vector<GroupElement<D>> gens;
        BallIndexer index{2, 0};
        std::vector<Mat<D>> matrix;
        std::vector<CartanVector<D>> mu, lam;
        std::vector<Flag<D>> flag;
        std::vector<std::uint8_t> len;
        std::vector<std::uint32_t> inverse;
    };

public:
    static OrbitTable enumerate(const SchottkyPreset<D>& preset, int L, std::size_t cap = default_sphere_cap,
                                unsigned threads = 0);

    int max_len() const { return L_; }
    std::size_t size() const { return s_->index.offset(L_ + 1); }
    const SchottkyPreset<D>& preset() const { return s_->preset; }
    const std::vector<GroupElement<D>>& generators() const { return s_->gens; }
    const BallIndexer& indexer() const { return s_->index; }
    int rank() const { return s_->preset.rank(); }

    Word word(std::size_t i) const { return s_->index.unrank(i); }
    int length(std::size_t i) const { return s_->len[i]; }
    const Mat<D>& matrix(std::size_t i) const { return s_->matrix[i]; }
    GroupElement<D> element(std::size_t i) const {
        return GroupElement<D>::trusted(s_->matrix[i], s_->matrix[s_->inverse[i]]);
    }
    const CartanVector<D>& mu(std::size_t i) const { return s_->mu[i]; }
    const CartanVector<D>& lam(std::size_t i) const { return s_->lam[i]; }
    const Flag<D>& flag(std::size_t i) const { return s_->flag[i]; }
    std::size_t inverse_index(std::size_t i) const { return s_->inverse[i]; }
    std::size_t index_of(const Word& w) const {
        if (static_cast<int>(w.size()) > L_) throw InputError("word is outside the table");
        return s_->index.rank_of(w);
    }
    std::size_t shell_begin(int l) const { return s_->index.offset(l); }
    std::size_t shell_end(int l) const { return s_->index.offset(l + 1); }

    OrbitEntry<D> entry(std::size_t i) const {
        return OrbitEntry<D>{word(i), element(i), mu(i), lam(i), flag(i), length(i)};
    }

    // The sub-ball of radius L' <= L, sharing storage.
    OrbitTable truncated(int L) const {
        if (L < 0 || L > L_) throw InputError("truncation radius outside the table");
        OrbitTable t = *this;
        t.L_ = L;
        return t;
    }

private:
    std::shared_ptr<const Storage> s_;
    int L_ = 0;
};

namespace detail {

template <int D> struct EntryData {
    CartanVector<D> mu, lam;
    Flag<D> flag;
};

// lambda is only read here for cyclically reduced words; conjugates are filled in later.
template <int D> EntryData<D> entry_data(const ExteriorTrack<D>& t, bool with_lambda) {
    return EntryData<D>{cartan_projection(t), with_lambda ? jordan_projection(t) : CartanVector<D>(),
                        cartan_attracting_flag(t)};
}

// Index of the cyclically reduced core u of w = v u v^{-1}.
inline std::size_t cyclic_core(const BallIndexer& index, const Word& w) {
    const auto& ls = w.letters();
    std::size_t a = 0, b = ls.size();
    while (b - a >= 2 && ls[a] == inverse_letter(ls[b - 1])) {
        ++a;
        --b;
    }
    return index.rank_of(std::span<const Letter>(ls.data() + a, b - a));
}

}  // namespace detail

template <int D>
OrbitTable<D> OrbitTable<D>::enumerate(const SchottkyPreset<D>& preset, int L, std::size_t cap, unsigned threads) {
    if (L < 1) throw InputError("max word length must be at least 1");
    auto st = std::make_shared<Storage>();
    st->preset = preset;
    st->gens = preset.letters();
    const int r = preset.rank();
    BallIndexer probe(r, 0);
    if (static_cast<double>(probe.sphere(1)) * std::pow(2.0 * r - 1.0, L - 1) > static_cast<double>(cap))
        throw ResourceError("sphere of radius " + std::to_string(L) + " exceeds the enumeration cap");
    st->index = BallIndexer(r, L);
    const std::size_t n = st->index.size();
    st->matrix.resize(n);
    st->mu.resize(n);
    st->lam.resize(n);
    st->flag.resize(n);
    st->len.resize(n);
    st->inverse.resize(n);

    const std::size_t branch = static_cast<std::size_t>(2 * r - 1);
    std::vector<ExteriorTrack<D>> gen_tracks;
    for (const auto& g : st->gens) gen_tracks.push_back(ExteriorTrack<D>::of(g));

    st->matrix[0] = Mat<D>::Identity();
    {
        auto t = ExteriorTrack<D>::identity();
        auto e = detail::entry_data(t, true);
        st->mu[0] = e.mu;
        st->lam[0] = e.lam;
        st->flag[0] = Flag<D>();
        st->len[0] = 0;
    }

    // Depth-first over the subtree of one first letter; every index is written once.
    auto shard = [&](Letter first) -> std::string {
        struct Frame {
            ExteriorTrack<D> track;
            std::size_t code;
            Letter last;
        };
        std::vector<Frame> stack;
        std::string failure;
        // eigenvalues of a long conjugate v u v^{-1} are badly conditioned, so lambda
        // is computed on cyclically reduced words only
        auto visit = [&](const ExteriorTrack<D>& track, std::size_t code, int depth, Letter last) {
            std::size_t idx = st->index.offset(depth) + code;
            bool cyclic = depth == 1 || last != inverse_letter(first);
            auto e = detail::entry_data(track, cyclic);
            if (cyclic && failure.empty() && !is_loxodromic(e.lam)) failure = st->index.unrank(idx).str();
            st->matrix[idx] = track.direct;
            st->mu[idx] = e.mu;
            st->lam[idx] = e.lam;
            st->flag[idx] = e.flag;
            st->len[idx] = static_cast<std::uint8_t>(depth);
        };
        // iterative DFS: frames hold the track of the word of length (stack index + 1)
        std::vector<std::size_t> next_digit;
        stack.push_back(Frame{gen_tracks[first], first, first});
        next_digit.push_back(0);
        visit(stack.back().track, first, 1, first);
        while (!stack.empty()) {
            int depth = static_cast<int>(stack.size());
            if (depth == L || next_digit.back() == branch) {
                stack.pop_back();
                next_digit.pop_back();
                continue;
            }
            std::size_t d = next_digit.back()++;
            Letter forbidden = inverse_letter(stack.back().last);
            Letter l = static_cast<Letter>(d >= forbidden ? d + 1 : d);
            std::size_t code = stack.back().code * branch + d;
            Frame f{stack.back().track.then(gen_tracks[l]), code, l};
            stack.push_back(std::move(f));
            next_digit.push_back(0);
            visit(stack.back().track, code, depth + 1, l);
        }
        return failure;
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::string> failures(static_cast<std::size_t>(2 * r));
    if (threads <= 1) {
        for (int l = 0; l < 2 * r; ++l) failures[l] = shard(static_cast<Letter>(l));
    } else {
        std::vector<std::future<std::string>> jobs;
        for (int l = 0; l < 2 * r; ++l)
            jobs.push_back(std::async(std::launch::async, shard, static_cast<Letter>(l)));
        for (int l = 0; l < 2 * r; ++l) failures[l] = jobs[l].get();
    }
    for (const auto& f : failures)
        if (!f.empty()) throw PresetIntegrityError("non-loxodromic word in orbit table: " + f);

    st->inverse[0] = 0;
    for (std::size_t i = 1; i < n; ++i) {
        Word w = st->index.unrank(i);
        st->inverse[i] = static_cast<std::uint32_t>(st->index.rank_of(w.inverse()));
        if (w.size() >= 2 && w[0] == inverse_letter(w.back())) st->lam[i] = st->lam[detail::cyclic_core(st->index, w)];
    }

    OrbitTable t;
    t.s_ = st;
    t.L_ = L;
    return t;
}

template <int D>
OrbitTable<D> enumerate_ball(const SchottkyPreset<D>& preset, int L, std::size_t cap = default_sphere_cap) {
    return OrbitTable<D>::enumerate(preset, L, cap);
}

// ---------------------------------------------------------------- limit cone

template <int D> struct ConeEstimate {
    std::vector<CartanVector<D>> mu_directions;
    std::vector<CartanVector<D>> lam_directions;
    std::vector<CartanVector<D>> hull;  // extreme rays of the lambda and mu directions
    double wall_margin = 0;             // min simple root over all directions
    double inversion_defect = 0;        // max |dir(x(g^-1)) - i dir(x(g))| over the table
};

namespace detail {

// Extreme rays of a cloud of unit vectors in a (D-1)-dimensional space.
template <int D> std::vector<CartanVector<D>> cone_extreme_rays(const std::vector<CartanVector<D>>& dirs) {
    if (dirs.empty()) return {};
    Vec<D> c = Vec<D>::Zero();
    for (const auto& v : dirs) c += v.coords();
    if (c.norm() == 0) return {dirs.front()};
    c.normalize();
    // orthonormal basis of the trace-zero complement of c
    Eigen::Matrix<double, D, D> basis = Mat<D>::Zero();
    basis.col(0) = Vec<D>::Ones().normalized();
    basis.col(1) = c;
    Eigen::HouseholderQR<Mat<D>> qr(basis);
    Mat<D> q = qr.householderQ();
    const int m = D - 2;
    std::vector<std::size_t> picks;
    if (m == 0) return {dirs.front()};
    auto gnomonic = [&](const Vec<D>& v) {
        VecX p(m);
        double h = v.dot(c);
        for (int j = 0; j < m; ++j) p(j) = v.dot(q.col(j + 2)) / h;
        return p;
    };
    std::vector<VecX> pts;
    for (const auto& v : dirs) pts.push_back(gnomonic(v.coords()));
    // support points over a fixed set of directions: exact for m = 1
    int probes = m == 1 ? 2 : 64 * m;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (int t = 0; t < probes; ++t) {
        VecX u(m);
        if (m == 1) u(0) = t == 0 ? 1.0 : -1.0;
        else
            for (int j = 0; j < m; ++j) u(j) = nd(rng);
        std::size_t best = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (pts[i].dot(u) > pts[best].dot(u)) best = i;
        picks.push_back(best);
    }
    std::sort(picks.begin(), picks.end());
    picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    std::vector<CartanVector<D>> out;
    for (auto i : picks) out.push_back(dirs[i]);
    return out;
}

}  // namespace detail

template <int D> ConeEstimate<D> limit_cone_estimate(const OrbitTable<D>& table, int min_len) {
    if (min_len < 1) throw InputError("min_len must be at least 1");
    ConeEstimate<D> out;
    out.wall_margin = std::numeric_limits<double>::infinity();
    std::vector<CartanVector<D>> all;
    for (std::size_t i = table.shell_begin(std::min(min_len, table.max_len() + 1)); i < table.size(); ++i) {
        CartanVector<D> m = table.mu(i) * (1.0 / table.mu(i).norm());
        CartanVector<D> l = table.lam(i) * (1.0 / table.lam(i).norm());
        out.mu_directions.push_back(m);
        out.lam_directions.push_back(l);
        out.wall_margin = std::min({out.wall_margin, m.min_simple_root(), l.min_simple_root()});
        std::size_t j = table.inverse_index(i);
        CartanVector<D> mj = table.mu(j) * (1.0 / table.mu(j).norm());
        CartanVector<D> lj = table.lam(j) * (1.0 / table.lam(j).norm());
        out.inversion_defect = std::max(
            {out.inversion_defect, (mj - m.opposition()).norm(), (lj - l.opposition()).norm()});
    }
    if (out.mu_directions.empty()) throw InputError("no directions left after the length filter");
    all = out.mu_directions;
    all.insert(all.end(), out.lam_directions.begin(), out.lam_directions.end());
    out.hull = detail::cone_extreme_rays(all);
    return out;
}

// ---------------------------------------------------------------- counting estimators

struct GrowthEstimate {
    double value = 0;         // OLS slope of log N(T) against T on the top of the range
    double stderr_value = 0;  // standard error of that slope
    double upper = 0;         // max over the range of log N(T) / T
    std::size_t count = 0;    // points counted up to T_max
    double t_max = 0;
    std::vector<std::pair<double, double>> curve;  // (T, N(T))
};

namespace detail {

// Slope of log #{x <= T} over T in [(1 - top) T_max, T_max].
inline GrowthEstimate counting_slope(std::vector<double> values, double t_max, double top = 0.6, int grid = 40) {
    GrowthEstimate out;
    out.t_max = t_max;
    std::sort(values.begin(), values.end());
    out.count = static_cast<std::size_t>(std::upper_bound(values.begin(), values.end(), t_max) - values.begin());
    if (out.count == 0) {
        out.value = out.upper = -std::numeric_limits<double>::infinity();
        return out;
    }
    if (out.count < 10) throw InsufficientDataError("fewer than 10 orbit points in range");
    std::vector<double> xs, ys;
    out.upper = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid; ++k) {
        double T = t_max * ((1.0 - top) + top * k / (grid - 1.0));
        auto n = static_cast<double>(std::upper_bound(values.begin(), values.end(), T) - values.begin());
        out.curve.emplace_back(T, n);
        if (n <= 0) continue;
        xs.push_back(T);
        ys.push_back(std::log(n));
        out.upper = std::max(out.upper, std::log(n) / T);
    }
    if (xs.size() < 3) throw InsufficientDataError("counting curve is empty on the fit range");
    auto f = ols(xs, ys);
    out.value = f.slope;
    out.stderr_value = f.stderr_slope;
    return out;
}

}  // namespace detail

// Exponential growth rate of #{gamma : mu(gamma) in cone(u, theta), ||mu|| <= T}.
// T_max is the smallest ||mu|| on the outermost shell, beyond which counts are incomplete.
template <int D> GrowthEstimate growth_indicator_estimate(const OrbitTable<D>& table, const CartanVector<D>& u,
                                                          double theta) {
    if (!(theta > 0)) throw InputError("cone half-angle must be positive");
    if (!u.in_positive_chamber(1e-12) || std::abs(u.norm() - 1.0) > 1e-9)
        throw InputError("direction must be a unit vector in the positive chamber");
    double t_max = std::numeric_limits<double>::infinity();
    for (std::size_t i = table.shell_begin(table.max_len()); i < table.size(); ++i)
        t_max = std::min(t_max, table.mu(i).norm());
    std::vector<double> values;
    const double c = std::cos(theta);
    for (std::size_t i = 1; i < table.size(); ++i) {
        double n = table.mu(i).norm();
        if (table.mu(i).dot(u) >= c * n) values.push_back(n);
    }
    return detail::counting_slope(std::move(values), t_max);
}

struct PoincareSeries {
    double total = 0;
    std::vector<double> shells;  // subtotal per word length
    int overflow_shell = -1;     // first shell where a term overflowed, -1 if none
};

// sum over the table of exp(-s psi(mu(gamma))), with per-shell subtotals.
template <int D> PoincareSeries poincare_partial(const OrbitTable<D>& table, const LinearForm<D>& psi, double s) {
    PoincareSeries out;
    out.shells.assign(static_cast<std::size_t>(table.max_len()) + 1, 0.0);
    for (int l = 0; l <= table.max_len(); ++l) {
        double sub = 0;
        for (std::size_t i = table.shell_begin(l); i < table.shell_end(l); ++i) sub += std::exp(-s * psi(table.mu(i)));
        out.shells[l] = sub;
        if (!std::isfinite(sub) && out.overflow_shell < 0) out.overflow_shell = l;
        out.total += sub;
    }
    if (out.overflow_shell >= 0) out.total = std::numeric_limits<double>::infinity();
    return out;
}

// Geometric ratio of shell subtotals fitted on shells first..last.
inline double shell_ratio(const PoincareSeries& p, int first) {
    std::vector<double> xs, ys;
    for (std::size_t l = static_cast<std::size_t>(std::max(first, 1)); l < p.shells.size(); ++l) {
        xs.push_back(static_cast<double>(l));
        ys.push_back(std::log(p.shells[l]));
    }
    return std::exp(ols(xs, ys).slope);
}

struct CriticalExponent {
    GrowthEstimate fit;
    double value = 0;
    PoincareSeries below;  // at 0.9 * value
    PoincareSeries above;  // at 1.1 * value
};

// Abscissa of convergence of sum exp(-s <w, mu(gamma)>), from the counting function.
template <int D> CriticalExponent critical_exponent(const OrbitTable<D>& table, const CartanVector<D>& w) {
    double t_max = std::numeric_limits<double>::infinity();
    std::vector<double> values;
    values.reserve(table.size());
    for (std::size_t i = 1; i < table.size(); ++i) {
        double v = w.dot(table.mu(i));
        if (!(v > 0)) throw DomainError("w is not positive on the sampled cone");
        values.push_back(v);
        if (table.length(i) == table.max_len()) t_max = std::min(t_max, v);
    }
    CriticalExponent out;
    out.fit = detail::counting_slope(std::move(values), t_max);
    out.value = out.fit.value;
    LinearForm<D> psi(w.coords());
    out.below = poincare_partial(table, psi, 0.9 * out.value);
    out.above = poincare_partial(table, psi, 1.1 * out.value);
    return out;
}

// Scale s at which the shell subtotals of sum exp(-s psi(mu(gamma))) neither grow nor decay on
// shells first..L (first < 0 selects L / 2). The conformality defect of the truncated orbital
// measure is first order in the fitted shell ratio minus one, so measures are built at this scale.
template <int D> double shell_balanced_exponent(const OrbitTable<D>& table, const LinearForm<D>& psi, int first = -1) {
    if (first < 0) first = std::max(1, table.max_len() / 2);
    if (table.max_len() - std::max(first, 1) < 1) throw InsufficientDataError("need at least two shells");
    for (std::size_t i = 1; i < table.size(); ++i)
        if (!(psi(table.mu(i)) > 0)) throw DomainError("psi is not positive on the sampled cone");
    auto ratio = [&](double s) { return shell_ratio(poincare_partial(table, psi, s), first); };
    double lo = 0, hi = 1;
    while (ratio(hi) > 1) {
        lo = hi;
        hi *= 2;
        if (hi > 1e6) throw DomainError("shell subtotals do not decay");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (ratio(mid) > 1 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------- regularity and additivity

// min over gamma with |gamma| >= L/2 of min_i alpha_i(mu) / ||mu||.
template <int D> double regularity_margin(const OrbitTable<D>& table) {
    double m = std::numeric_limits<double>::infinity();
    int floor_len = std::max(1, (table.max_len() + 1) / 2);
    for (std::size_t i = table.shell_begin(floor_len); i < table.size(); ++i)
        m = std::min(m, table.mu(i).min_simple_root() / table.mu(i).norm());
    return m;
}

struct AdditivityDefect {
    double max_defect = 0;
    std::size_t witness = 0;  // table index of gamma
    int split = 0;            // |gamma_1|
};

// max ||mu(g1 g2) - mu(g1) - mu(g2)|| over all splits without cancellation.
template <int D> AdditivityDefect almost_additivity(const OrbitTable<D>& table) {
    AdditivityDefect out;
    const auto& idx = table.indexer();
    for (std::size_t i = table.shell_begin(2); i < table.size(); ++i) {
        const Word w = table.word(i);
        const auto& ls = w.letters();
        for (std::size_t k = 1; k < ls.size(); ++k) {
            std::size_t a = idx.rank_of(std::span<const Letter>(ls.data(), k));
            std::size_t b = idx.rank_of(std::span<const Letter>(ls.data() + k, ls.size() - k));
            double d = (table.mu(i) - table.mu(a) - table.mu(b)).norm();
            if (d > out.max_defect) {
                out.max_defect = d;
                out.witness = i;
                out.split = static_cast<int>(k);
            }
        }
    }
    return out;
}

struct WordLengthBounds {
    double upper_ratio = 0;        // max ||mu|| / |gamma|
    std::size_t upper_witness = 0;
    LineFit lower;                 // OLS of min_{|gamma| = n} ||mu|| against n
};

template <int D> WordLengthBounds word_length_bounds(const OrbitTable<D>& table) {
    WordLengthBounds out;
    std::vector<double> xs, ys;
    for (int l = 1; l <= table.max_len(); ++l) {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t i = table.shell_begin(l); i < table.shell_end(l); ++i) {
            double n = table.mu(i).norm();
            lo = std::min(lo, n);
            if (n / l > out.upper_ratio) {
                out.upper_ratio = n / l;
                out.upper_witness = i;
            }
        }
        xs.push_back(l);
        ys.push_back(lo);
    }
    if (xs.size() >= 2) out.lower = ols(xs, ys);
    return out;
}

}  // namespace anosov
