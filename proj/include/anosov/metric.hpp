#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "anosov/lie.hpp"
#include "anosov/orbit.hpp"
#include "anosov/schottky.hpp"
#include "anosov/stats.hpp"
#include "anosov/word.hpp"

namespace anosov {

// ---------------------------------------------------------------- psi-Gromov products

// [xi, eta]_{psi, p} = psi(G(g^{-1} xi, g^{-1} eta)) for p = g o.
template <int D>
double psi_gromov(const Flag<D>& xi, const Flag<D>& eta, const LinearForm<D>& psi, const GroupElement<D>& p) {
    GroupElement<D> gi = p.inverse();
    return psi(gromov_product(flag_action(gi, xi), flag_action(gi, eta)));
}

template <int D> bool same_flag(const Flag<D>& a, const Flag<D>& b, double tol = 1e-12) {
    return chordal_distance(a, b) <= tol;
}

// d_{psi, p}(xi, eta) = exp(-[xi, eta]_{psi, p}), zero on the diagonal.
template <int D>
double virtual_distance(const Flag<D>& xi, const Flag<D>& eta, const LinearForm<D>& psi, const GroupElement<D>& p) {
    if (same_flag(xi, eta)) return 0.0;
    return std::exp(-psi_gromov(xi, eta, psi, p));
}

template <int D> struct MetricSample {
    std::vector<Flag<D>> points;
    LinearForm<D> psi;
    GroupElement<D> basepoint;
    MatX products;     // [xi_i, xi_j], +inf on the diagonal
    MatX pair_values;  // d_{psi, p}(xi_i, xi_j)

    std::size_t size() const { return points.size(); }
};

template <int D>
MetricSample<D> make_metric_sample(std::vector<Flag<D>> points, const LinearForm<D>& psi,
                                   const GroupElement<D>& p = GroupElement<D>()) {
    MetricSample<D> s;
    s.points = std::move(points);
    s.psi = psi;
    s.basepoint = p;
    const auto n = static_cast<Eigen::Index>(s.points.size());
    s.products = MatX::Constant(n, n, std::numeric_limits<double>::infinity());
    s.pair_values = MatX::Zero(n, n);
    std::vector<Flag<D>> moved;
    GroupElement<D> gi = p.inverse();
    for (const auto& f : s.points) moved.push_back(flag_action(gi, f));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            double v = psi(gromov_product(moved[i], moved[j]));
            s.products(i, j) = v;
            s.pair_values(i, j) = std::exp(-v);
        }
    return s;
}

// Sample of limit flags zeta(x) based at o. Products go through the common-prefix split of
// the boundary words, which stays accurate when flags are exponentially close.
template <int D>
MetricSample<D> limit_metric_sample(const LimitMap<D>& zeta, const std::vector<Word>& words, std::size_t depth,
                                    const LinearForm<D>& psi) {
    MetricSample<D> s;
    s.psi = psi;
    std::vector<typename LimitMap<D>::Track> tracks;
    for (const auto& w : words) {
        tracks.push_back(zeta.track(w, depth));
        s.points.push_back(tracks.back().suffix[0]);
    }
    const auto n = static_cast<Eigen::Index>(words.size());
    s.products = MatX::Constant(n, n, std::numeric_limits<double>::infinity());
    s.pair_values = MatX::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            double v = psi(LimitMap<D>::gromov(tracks[i], tracks[j]));
            s.products(i, j) = v;
            s.pair_values(i, j) = std::exp(-v);
        }
    return s;
}

struct WeakConstants {
    double c_sym = 0;
    double c_ultra = 0;
    std::array<std::size_t, 2> sym_witness{};
    std::array<std::size_t, 3> ultra_witness{};
};

// Largest defects of [x, y] >= [y, x] - C and [x, z] >= min([x, y], [y, z]) - C.
template <int D> WeakConstants weak_constants(const MetricSample<D>& s) {
    if (s.size() < 2) throw InputError("weak constants need at least two points");
    WeakConstants out;
    const auto n = static_cast<std::size_t>(s.size());
    const MatX& g = s.products;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double d = g(j, i) - g(i, j);
            if (d > out.c_sym) {
                out.c_sym = d;
                out.sym_witness = {i, j};
            }
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i || k == j) continue;
                double d = std::min(g(i, j), g(j, k)) - g(i, k);
                if (d > out.c_ultra) {
                    out.c_ultra = d;
                    out.ultra_witness = {i, j, k};
                }
            }
        }
    return out;
}

struct TriangleConstant {
    double n = 1;
    std::array<std::size_t, 3> witness{};
    double n0() const { return n * n * n; }
};

// Smallest N >= 1 with d(x, z) <= N (d(x, y) + d(y, z)) and d(x, y) <= N d(y, x) on the sample.
template <int D> TriangleConstant triangle_constant(const MetricSample<D>& s) {
    TriangleConstant out;
    const auto n = static_cast<std::size_t>(s.size());
    const MatX& d = s.pair_values;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            if (i == k) continue;
            if (d(k, i) > 0 && d(i, k) / d(k, i) > out.n) {
                out.n = d(i, k) / d(k, i);
                out.witness = {i, k, k};
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i || j == k) continue;
                double r = d(i, k) / (d(i, j) + d(j, k));
                if (r > out.n) {
                    out.n = r;
                    out.witness = {i, j, k};
                }
            }
        }
    return out;
}

struct PowerMetric {
    double eps = 0;
    double max_admissible_eps = 0;
    MatX table;             // chain infimum of d^eps, directed
    double distortion = 1;  // max over pairs of d^eps / d_eps (d_eps <= d^eps always)
    std::array<std::size_t, 2> witness{};
};

// Admissible exponents satisfy exp(eps C) < sqrt 2 with C = max(C_sym, C_ultra).
inline double max_admissible_eps(const WeakConstants& w) {
    double c = std::max(w.c_sym, w.c_ultra);
    return c > 0 ? std::log(std::sqrt(2.0)) / c : std::numeric_limits<double>::infinity();
}

template <int D> PowerMetric power_metric(const MetricSample<D>& s, double eps) {
    PowerMetric out;
    out.eps = eps;
    out.max_admissible_eps = max_admissible_eps(weak_constants(s));
    if (!(eps > 0) || !(eps < out.max_admissible_eps))
        throw ConditionError("exponent outside the admissible range", out.max_admissible_eps);
    const auto n = static_cast<Eigen::Index>(s.size());
    MatX direct = s.pair_values.array().pow(eps).matrix();
    for (Eigen::Index i = 0; i < n; ++i) direct(i, i) = 0.0;
    out.table = direct;
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) out.table(i, j) = std::min(out.table(i, j), out.table(i, k) + out.table(k, j));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j || out.table(i, j) <= 0) continue;
            double r = direct(i, j) / out.table(i, j);
            if (r > out.distortion) {
                out.distortion = r;
                out.witness = {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
            }
        }
    return out;
}

// ---------------------------------------------------------------- shadows in the flag variety

template <int D> struct ShadowSpec {
    GroupElement<D> p;
    GroupElement<D> q;
    double r = 1;
};

enum class ShadowStatus { member, non_member, indeterminate };

inline const char* to_string(ShadowStatus s) {
    switch (s) {
        case ShadowStatus::member: return "member";
        case ShadowStatus::non_member: return "non-member";
        default: return "indeterminate";
    }
}

struct OptimizerOptions {
    int max_iter = 500;
    double tol = 1e-10;
    bool stop_below_radius = true;

    OptimizerOptions refined() const { return OptimizerOptions{2 * max_iter, 0.5 * tol, stop_below_radius}; }
};

template <int D> struct FlatMinimum {
    CartanVector<D> v;
    double value = 0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

// Coweight h_i with alpha_j(h_i) = delta_ij; the positive chamber is their nonnegative span.
template <int D> Vec<D> coweight(int i) {
    Vec<D> h = Vec<D>::Zero();
    h.head(i).setOnes();
    h.array() -= static_cast<double>(i) / D;
    return h;
}

// Signed permutation frames of the Weyl group, as (frame, permutation) pairs.
template <int D> const std::vector<std::pair<Mat<D>, std::array<int, D>>>& weyl_frames() {
    static const auto frames = [] {
        std::vector<std::pair<Mat<D>, std::array<int, D>>> out;
        std::array<int, D> perm;
        std::iota(perm.begin(), perm.end(), 0);
        do {
            Mat<D> p = Mat<D>::Zero();
            for (int j = 0; j < D; ++j) p(perm[j], j) = 1.0;
            if (p.determinant() < 0) p.col(0) *= -1.0;
            out.emplace_back(p, perm);
        } while (std::next_permutation(perm.begin(), perm.end()));
        return out;
    }();
    return frames;
}

}  // namespace detail

// Lower bound for min over v in the positive chamber of || a(h exp(v) o, q) ||. Iwasawa
// projections are dominated by the Cartan projection, so for each Weyl flag w e+ one has
// f(v) >= || v - c_w || with c_w = -w sigma(q^{-1} h, w e+).
template <int D> double flat_distance_lower_bound(const GroupElement<D>& h, const GroupElement<D>& q) {
    const Mat<D> m = q.inverse_matrix() * h.matrix();
    std::vector<CartanVector<D>> c;
    double out = 0;
    for (const auto& [frame, perm] : detail::weyl_frames<D>()) {
        Vec<D> s = log_r_diagonal<D>(m * frame);
        Vec<D> v;
        for (int j = 0; j < D; ++j) v(perm[j]) = -s(j);
        c.push_back(CartanVector<D>::project(v));
        out = std::max(out, c.back().distance_to_chamber());
    }
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) out = std::max(out, 0.5 * (c[i] - c[j]).norm());
    return out;
}

// min over v in the positive chamber of || a(h exp(v) o, q) ||, by projected coordinate
// descent in coweight coordinates from the warm start v0.
template <int D>
FlatMinimum<D> flat_distance_minimize(const GroupElement<D>& h, const GroupElement<D>& q, const CartanVector<D>& v0,
                                      const OptimizerOptions& opt, double stop_radius = -1) {
    const GroupElement<D> m = q.inverse() * h;
    Eigen::Matrix<double, D, D - 1> H;
    for (int i = 1; i < D; ++i) H.col(i - 1) = detail::coweight<D>(i);
    auto f = [&](const Eigen::Matrix<double, D - 1, 1>& t) {
        return cartan_projection(m * GroupElement<D>::diagonal(H * t)).norm();
    };
    Eigen::Matrix<double, D - 1, 1> t, step;
    CartanVector<D> start = v0.chamber_projection();
    for (int i = 1; i < D; ++i) t(i - 1) = std::max(0.0, start.simple_root(i));
    step.setConstant(0.5);
    FlatMinimum<D> out;
    double best = f(t);
    const double step_floor = std::sqrt(opt.tol);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (stop_radius > 0 && best < stop_radius) break;
        if (step.maxCoeff() < step_floor) {
            out.converged = true;
            break;
        }
        for (int i = 0; i < D - 1; ++i) {
            bool moved = false;
            for (double dir : {1.0, -1.0}) {
                auto trial = t;
                trial(i) = std::max(0.0, t(i) + dir * step(i));
                if (trial(i) == t(i)) continue;
                double val = f(trial);
                if (val < best - 1e-15) {
                    best = val;
                    t = trial;
                    moved = true;
                    break;
                }
            }
            step(i) = moved ? std::min(2.0 * step(i), 8.0) : 0.5 * step(i);
        }
    }
    out.v = CartanVector<D>::project(H * t);
    out.value = best;
    out.iterations = it;
    return out;
}

// k in SO(D) with p k e+ = xi, so that the chamber p k A+ o points at xi from p.
template <int D> GroupElement<D> chamber_toward(const Flag<D>& xi, const GroupElement<D>& p) {
    Mat<D> k = flag_action(p.inverse(), xi).frame();
    if (k.determinant() < 0) k.col(D - 1) *= -1.0;
    return p * GroupElement<D>::trusted(k, k.transpose());
}

template <int D> struct ShadowResult {
    ShadowStatus status = ShadowStatus::indeterminate;
    CartanVector<D> witness;
    double distance = 0;  // best value of the flat distance found
    int iterations = 0;
    bool certified = false;  // exclusion certified by the lower bound
};

// Is xi in O_r(p, q)? Exclusion is certified without optimization when the Weyl-flag lower
// bound on the flat distance already reaches r.
template <int D>
ShadowResult<D> shadow_membership(const Flag<D>& xi, const ShadowSpec<D>& spec, const OptimizerOptions& opt = {}) {
    if (!(spec.r > 0)) throw InputError("shadow radius must be positive");
    ShadowResult<D> out;
    CartanVector<D> b = busemann(xi, spec.p, spec.q);
    GroupElement<D> h = chamber_toward(xi, spec.p);
    double lower = b.distance_to_chamber();
    if (lower < spec.r) lower = flat_distance_lower_bound(h, spec.q);
    if (lower >= spec.r) {
        out.status = ShadowStatus::non_member;
        out.certified = true;
        out.distance = lower;
        out.witness = b.chamber_projection();
        return out;
    }
    auto m = flat_distance_minimize(h, spec.q, b, opt, opt.stop_below_radius ? spec.r : -1);
    out.witness = m.v;
    out.distance = m.value;
    out.iterations = m.iterations;
    if (m.value < spec.r) out.status = ShadowStatus::member;
    else out.status = m.converged ? ShadowStatus::non_member : ShadowStatus::indeterminate;
    return out;
}

// Smallest r with xi in O_r(p, q), i.e. the distance from q to the chamber at p pointing at xi.
template <int D>
FlatMinimum<D> shadow_radius(const Flag<D>& xi, const GroupElement<D>& p, const GroupElement<D>& q,
                             const OptimizerOptions& opt = {}) {
    return flat_distance_minimize(chamber_toward(xi, p), q, busemann(xi, p, q), opt);
}

// ||beta_xi(p, q) - a(p, q)|| / r, bounded by kappa on shadow members.
template <int D> double shadow_kappa_ratio(const Flag<D>& xi, const ShadowSpec<D>& spec) {
    return (busemann(xi, spec.p, spec.q) - symmetric_distance(spec.p, spec.q)).norm() / spec.r;
}

// Flat distances from gamma o to chambers are computed from absolute flag frames, so their
// rounding error grows like exp(2 ||mu(gamma)||) times machine precision. Returns the largest
// length n such that, on sampled elements of every length up to n, the distance from gamma o
// to the chamber pointing at kappa_1(gamma) (zero exactly) evaluates below tol.
template <int D>
int flat_precision_horizon(const OrbitTable<D>& table, double tol = 1e-3, std::size_t per_shell = 8) {
    const GroupElement<D> e;
    for (int n = 1; n <= table.max_len(); ++n) {
        std::size_t count = table.shell_end(n) - table.shell_begin(n);
        std::size_t stride = std::max<std::size_t>(1, count / per_shell);
        for (std::size_t i = table.shell_begin(n); i < table.shell_end(n); i += stride) {
            GroupElement<D> q = table.element(i);
            GroupElement<D> h = chamber_toward(table.flag(i), e);
            double err = cartan_projection(q.inverse() * h * GroupElement<D>::diagonal(table.mu(i).coords())).norm();
            if (!(err < tol)) return n - 1;
        }
    }
    return table.max_len();
}

struct KappaFit {
    double kappa = 0;  // max of shadow_kappa_ratio over members
    std::size_t tested = 0;
    std::size_t members = 0;
    std::size_t indeterminate = 0;
    Word witness_target;
    Word witness_word;
};

// Shadows O_r(o, gamma o) for table elements of length 1..max_len, probed by limit flags of
// boundary words that follow gamma for a random number of letters.
template <int D, class Rng>
KappaFit shadow_kappa_fit(const OrbitTable<D>& table, const LimitMap<D>& zeta, double r, int max_len,
                          std::size_t samples, std::size_t depth, Rng& rng, const OptimizerOptions& opt = {}) {
    KappaFit out;
    const Alphabet ab(table.rank());
    const GroupElement<D> e;
    max_len = std::min(max_len, table.max_len());
    if (max_len < 1) throw InputError("shadow targets need max_len >= 1");
    std::uniform_int_distribution<std::size_t> pick(table.shell_begin(1), table.shell_end(max_len) - 1);
    for (; out.tested < samples; ++out.tested) {
        std::size_t gi = pick(rng);
        Word g = table.word(gi);
        std::uniform_int_distribution<std::size_t> keep(0, g.size());
        auto x = BoundaryWord::extend(g.prefix(keep(rng)), depth, ab, rng);
        Flag<D> xi = zeta(x, depth);
        ShadowSpec<D> spec{e, table.element(gi), r};
        auto res = shadow_membership(xi, spec, opt);
        if (res.status == ShadowStatus::indeterminate) ++out.indeterminate;
        if (res.status != ShadowStatus::member) continue;
        ++out.members;
        double k = shadow_kappa_ratio(xi, spec);
        if (k > out.kappa) {
            out.kappa = k;
            out.witness_target = g;
            out.witness_word = x.prefix;
        }
    }
    return out;
}

// ---------------------------------------------------------------- shadows to shadows

struct ShadowTransfer {
    double c = 0;  // max over samples of r(zeta x) / R
    std::size_t samples = 0;
    Word witness_target;
    std::size_t indeterminate = 0;
};

// For boundary words x in the word shadow O_R(e, gamma), the smallest r with zeta(x) in
// O_r(o, gamma o), divided by R. Targets gamma are table elements of length <= max_len.
template <int D, class Rng>
ShadowTransfer shadow_transfer_fit(const OrbitTable<D>& table, const LimitMap<D>& zeta, std::size_t R, int max_len,
                                   std::size_t samples, std::size_t depth, Rng& rng,
                                   const OptimizerOptions& opt = {}) {
    if (R == 0) throw InputError("word shadow radius must be positive");
    ShadowTransfer out;
    const Alphabet ab(table.rank());
    const GroupElement<D> e;
    max_len = std::min(max_len, table.max_len());
    std::uniform_int_distribution<std::size_t> pick(table.shell_begin(1), table.shell_end(max_len) - 1);
    std::uniform_int_distribution<std::size_t> back(0, R);
    while (out.samples < samples) {
        std::size_t gi = pick(rng);
        Word g = table.word(gi);
        std::size_t cut = std::min(back(rng), g.size());
        auto x = BoundaryWord::extend(g.prefix(g.size() - cut), depth, ab, rng);
        if (!word_shadow_membership(x, Word(), g, R)) continue;
        auto m = shadow_radius(zeta(x, depth), e, table.element(gi), opt);
        if (!m.converged) ++out.indeterminate;
        double c = m.value / static_cast<double>(R);
        if (c > out.c) {
            out.c = c;
            out.witness_target = g;
        }
        ++out.samples;
    }
    return out;
}

// ---------------------------------------------------------------- Morse deviation

// max over the ray of the distance from gamma_k o to the chamber k A+ o pointing at the
// kappa_1 flag of the deepest prefix.
template <int D> double morse_deviation(const std::vector<Word>& ray, const OrbitTable<D>& table,
                                        const OptimizerOptions& opt = {}) {
    if (ray.empty()) throw InputError("empty ray");
    for (std::size_t k = 1; k < ray.size(); ++k)
        if (ray[k].size() != ray[k - 1].size() + 1 || ray[k].prefix(ray[k - 1].size()) != ray[k - 1])
            throw InputError("ray is not a geodesic");
    const Flag<D>& xi = table.flag(table.index_of(ray.back()));
    GroupElement<D> e;
    GroupElement<D> h = chamber_toward(xi, e);
    double dev = 0;
    for (const Word& w : ray) {
        std::size_t i = table.index_of(w);
        GroupElement<D> q = table.element(i);
        auto m = flat_distance_minimize(h, q, busemann(xi, e, q), opt);
        dev = std::max(dev, m.value);
    }
    return dev;
}

// ---------------------------------------------------------------- Busemann bounds

struct BusemannBounds {
    double c_upper = -std::numeric_limits<double>::infinity();  // max psi(beta) - psi(a(gamma o, o))
    double c_lower = -std::numeric_limits<double>::infinity();  // max -psi(a(o, gamma o)) - psi(beta)
    std::size_t upper_witness = 0, lower_witness = 0;           // table index of gamma
    std::size_t upper_flag = 0, lower_flag = 0;
    std::size_t pairs = 0;
};

// Defects of -psi(a(p, gamma p)) - C <= psi(beta_xi(gamma p, p)) <= psi(a(gamma p, p)) + C with p = o,
// over every gamma in the table and every flag. beta_xi(gamma o, o) = sigma(gamma^{-1}, xi) is
// accumulated along the tree so each pair costs one small QR.
template <int D>
BusemannBounds busemann_bounds_check(const OrbitTable<D>& table, const LinearForm<D>& psi,
                                     const std::vector<Flag<D>>& flags) {
    for (std::size_t i = 1; i < table.size(); ++i)
        if (!(psi(table.mu(i)) > 0)) throw DomainError("psi is not positive on the sampled cone");
    BusemannBounds out;
    const auto& gens = table.generators();
    const auto& idx = table.indexer();
    const int L = table.max_len();
    const std::size_t branch = static_cast<std::size_t>(2 * table.rank() - 1);
    for (std::size_t fi = 0; fi < flags.size(); ++fi) {
        // frame j: flag w^{-1} xi and sigma(w^{-1}, xi) for the word w of length j + 1
        struct Frame {
            Flag<D> flag;
            CartanVector<D> sigma;
            std::size_t index;
            Letter last;
            std::size_t next = 0;
        };
        std::vector<Frame> stack;
        auto push = [&](const Frame* parent, Letter l, std::size_t index) {
            const Flag<D>& base = parent ? parent->flag : flags[fi];
            Mat<D> q;
            CartanVector<D> s =
                CartanVector<D>::project(log_r_diagonal<D>(gens[inverse_letter(l)].matrix() * base.frame(), &q));
            Frame f{Flag<D>(q), parent ? parent->sigma + s : s, index, l};
            double b = psi(f.sigma);
            double up = b - psi(table.mu(table.inverse_index(index)));
            double lo = -psi(table.mu(index)) - b;
            ++out.pairs;
            if (up > out.c_upper) {
                out.c_upper = up;
                out.upper_witness = index;
                out.upper_flag = fi;
            }
            if (lo > out.c_lower) {
                out.c_lower = lo;
                out.lower_witness = index;
                out.lower_flag = fi;
            }
            stack.push_back(std::move(f));
        };
        for (int first = 0; first < 2 * table.rank(); ++first) {
            push(nullptr, static_cast<Letter>(first), idx.offset(1) + first);
            while (!stack.empty()) {
                Frame& top = stack.back();
                if (static_cast<int>(stack.size()) == L || top.next == branch) {
                    stack.pop_back();
                    continue;
                }
                std::size_t d = top.next++;
                Letter forbidden = inverse_letter(top.last);
                Letter l = static_cast<Letter>(d >= forbidden ? d + 1 : d);
                std::size_t depth = stack.size();
                std::size_t code = (top.index - idx.offset(static_cast<int>(depth))) * branch + d;
                Frame parent = top;
                push(&parent, l, idx.offset(static_cast<int>(depth) + 1) + code);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- covering lemma

struct Ball {
    std::size_t center = 0;  // index into the sample
    double radius = 0;
};

struct VitaliCover {
    std::vector<std::size_t> selected;  // indices into the input ball list
    double dilation = 0;                // 3 N0
    bool certified = true;
    std::size_t uncovered_point = 0;
    std::size_t uncovered_ball = 0;
};

// Greedy disjoint subfamily by decreasing radius, balls taken as subsets of the sample.
// Certifies that the 3 N0 dilates of the survivors contain every sampled point of every input ball.
template <int D> VitaliCover vitali_cover(const std::vector<Ball>& balls, const MetricSample<D>& s,
                                          double n0 = -1) {
    if (n0 < 0) n0 = triangle_constant(s).n0();
    VitaliCover out;
    out.dilation = 3.0 * n0;
    const auto n = static_cast<std::size_t>(s.size());
    const MatX& d = s.pair_values;
    auto members = [&](const Ball& b) {
        std::vector<std::size_t> m;
        for (std::size_t j = 0; j < n; ++j)
            if (d(static_cast<Eigen::Index>(b.center), static_cast<Eigen::Index>(j)) < b.radius) m.push_back(j);
        return m;
    };
    std::vector<std::size_t> order(balls.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return balls[a].radius > balls[b].radius; });
    std::vector<char> taken(n, 0);
    for (auto bi : order) {
        auto m = members(balls[bi]);
        bool disjoint = std::none_of(m.begin(), m.end(), [&](std::size_t j) { return taken[j]; });
        if (!disjoint) continue;
        out.selected.push_back(bi);
        for (auto j : m) taken[j] = 1;
    }
    std::sort(out.selected.begin(), out.selected.end());
    for (std::size_t bi = 0; bi < balls.size() && out.certified; ++bi) {
        for (std::size_t j : members(balls[bi])) {
            bool covered = false;
            for (auto si : out.selected) {
                const Ball& b = balls[si];
                if (d(static_cast<Eigen::Index>(b.center), static_cast<Eigen::Index>(j)) < out.dilation * b.radius) {
                    covered = true;
                    break;
                }
            }
            if (!covered) {
                out.certified = false;
                out.uncovered_point = j;
                out.uncovered_ball = bi;
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- Gromov product comparison

struct ComparisonFit {
    double c1 = 1;
    double c2 = 0;
    std::size_t witness = 0;  // pair index attaining c2
    std::size_t pairs = 0;
};

// Affine envelope c1^{-1} (x|y) - c2 <= psi(G(zeta x, zeta y)) <= c1 (x|y) + c2 over word pairs.
template <int D>
ComparisonFit gromov_comparison_fit(const LimitMap<D>& zeta, const LinearForm<D>& psi,
                                    const std::vector<std::pair<Word, Word>>& pairs, std::size_t depth) {
    std::vector<double> xs, ys;
    for (const auto& [x, y] : pairs) {
        if (x == y) continue;
        xs.push_back(static_cast<double>(word_gromov_product(x, y)));
        ys.push_back(psi(zeta.gromov(x, y, depth)));
    }
    ComparisonFit out;
    out.pairs = xs.size();
    if (xs.empty()) throw InsufficientDataError("no distinct pairs");
    // per-level extremes
    std::map<int, std::pair<double, double>> levels;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto [it, fresh] = levels.try_emplace(static_cast<int>(xs[i]), ys[i], ys[i]);
        if (!fresh) {
            it->second.first = std::min(it->second.first, ys[i]);
            it->second.second = std::max(it->second.second, ys[i]);
        }
    }
    if (levels.size() >= 2) {
        std::vector<double> lx, lmin, lmax;
        for (const auto& [k, v] : levels) {
            lx.push_back(k);
            lmin.push_back(v.first);
            lmax.push_back(v.second);
        }
        double smax = ols(lx, lmax).slope, smin = ols(lx, lmin).slope;
        out.c1 = std::max(1.0, smax);
        if (smin > 0) out.c1 = std::max(out.c1, 1.0 / smin);
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double defect = std::max(ys[i] - out.c1 * xs[i], xs[i] / out.c1 - ys[i]);
        if (defect > out.c2) {
            out.c2 = defect;
            out.witness = i;
        }
    }
    return out;
}

// Random pairs (x, y) of boundary words whose common prefix length is spread over 0..max_common.
template <class Rng>
std::vector<std::pair<Word, Word>> sample_word_pairs(const Alphabet& ab, std::size_t count, std::size_t max_common,
                                                     std::size_t depth, Rng& rng) {
    std::vector<std::pair<Word, Word>> out;
    std::uniform_int_distribution<std::size_t> pick(0, max_common);
    while (out.size() < count) {
        auto x = BoundaryWord::random(depth, ab, rng).prefix;
        std::size_t c = pick(rng);
        auto y = BoundaryWord::extend(x.prefix(c), depth, ab, rng).prefix;
        if (word_gromov_product(x, y) != c) continue;
        out.emplace_back(x, y);
    }
    return out;
}

// ---------------------------------------------------------------- further lemma checks

// sup ||H(g)|| / ||mu(g)|| for g = k exp(v) with the Iwasawa A-part H.
template <int D, class Rng> double kak_iwasawa_ratio(std::size_t samples, double r, Rng& rng) {
    double out = 0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t s = 0; s < samples; ++s) {
        Vec<D> v;
        for (int i = 0; i < D; ++i) v(i) = u(rng);
        std::sort(v.data(), v.data() + D, std::greater<double>());
        CartanVector<D> a = CartanVector<D>::project(v);
        if (a.norm() == 0) continue;
        a = a * (r * u(rng) / a.norm());
        Mat<D> k = random_rotation<D>(rng);
        GroupElement<D> g = GroupElement<D>::diagonal(a.coords()) * GroupElement<D>::trusted(k, k.transpose());
        auto h = iwasawa_sigma(g, Flag<D>());
        out = std::max(out, h.norm() / std::max(a.norm(), 1e-300));
    }
    return out;
}

struct DecompositionDefect {
    double busemann = 0;  // max ||beta_xi(gamma o, o) + mu(g1) - mu(g2^{-1})||
    double distance = 0;  // max ||a(gamma o, o) - mu(g1^{-1}) - mu(g2^{-1})||
    std::size_t pairs = 0;
};

// Tree split gamma = g1 g2 at the projection of the boundary word x onto [e, gamma].
template <int D>
DecompositionDefect decomposition_defect(const OrbitTable<D>& table, const LimitMap<D>& zeta,
                                         const std::vector<Word>& boundary, std::size_t depth,
                                         const std::vector<std::size_t>& gammas) {
    DecompositionDefect out;
    for (const Word& x : boundary) {
        auto track = zeta.track(x, depth);
        for (std::size_t gi : gammas) {
            Word g = table.word(gi);
            std::size_t c = std::min(word_gromov_product(x, g), g.size());
            if (c >= track.word.size()) throw InputError("boundary word shorter than the target");
            std::size_t i1 = table.index_of(g.prefix(c));
            std::size_t i2 = table.index_of(g.suffix_from(c));
            // beta_xi(gamma o, o) = sigma(gamma^{-1}, xi) = sigma(g2^{-1}, eta) - sigma(g1, eta) with
            // eta = zeta(x_c x_{c+1} ...); neither term cancels letters, so no rounding error is expanded
            const Flag<D>& eta = track.suffix[c];
            CartanVector<D> b = zeta.sigma(g.suffix_from(c).inverse(), eta) - track.sigma[c];
            out.busemann = std::max(out.busemann, (b + table.mu(i1) - table.mu(table.inverse_index(i2))).norm());
            CartanVector<D> a = table.mu(table.inverse_index(gi));
            out.distance = std::max(
                out.distance,
                (a - table.mu(table.inverse_index(i1)) - table.mu(table.inverse_index(i2))).norm());
            ++out.pairs;
        }
    }
    return out;
}

}  // namespace anosov
