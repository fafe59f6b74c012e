#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "anosov/lie.hpp"
#include "anosov/metric.hpp"
#include "anosov/orbit.hpp"
#include "anosov/stats.hpp"
#include "anosov/word.hpp"

namespace anosov {

inline constexpr std::size_t no_source = std::numeric_limits<std::size_t>::max();

template <int D> struct Atom {
    Flag<D> flag;
    double weight = 0;
    std::size_t source = no_source;  // table index of the orbit element, if any
};

template <int D> struct DiscreteMeasure {
    std::vector<Atom<D>> atoms;
    double total = 0;
    LinearForm<D> psi;
    int max_len = 0;
    int floor = 0;
    std::string preset;

    std::size_t size() const { return atoms.size(); }

    void normalize() {
        if (!(total > 0)) throw PrecisionError("measure has no mass");
        for (auto& a : atoms) a.weight /= total;
        total = 1.0;
    }

    template <class Pred> double mass_where(Pred&& pred) const {
        double m = 0;
        for (const auto& a : atoms)
            if (pred(a.flag)) m += a.weight;
        return m;
    }
};

// Truncated orbital sum: atoms kappa_1(gamma) with weight exp(-psi(mu(gamma))) for
// shell_floor <= |gamma| <= L, normalized. shell_floor < 0 selects max(1, L / 2).
template <int D>
DiscreteMeasure<D> build_ps(const OrbitTable<D>& table, const LinearForm<D>& psi, int shell_floor = -1) {
    const int L = table.max_len();
    if (shell_floor < 0) shell_floor = std::max(1, L / 2);
    if (shell_floor < 1) throw InputError("shell floor must be at least 1");
    if (shell_floor > L) throw InsufficientDataError("no orbit elements above the shell floor");
    DiscreteMeasure<D> nu;
    nu.psi = psi;
    nu.max_len = L;
    nu.floor = shell_floor;
    nu.preset = table.preset().name;
    for (std::size_t i = table.shell_begin(1); i < table.size(); ++i)
        if (!(psi(table.mu(i)) > 0)) throw DomainError("psi is not positive on the sampled cone");
    nu.atoms.reserve(table.size() - table.shell_begin(shell_floor));
    for (std::size_t i = table.shell_begin(shell_floor); i < table.size(); ++i) {
        double w = std::exp(-psi(table.mu(i)));
        nu.atoms.push_back({table.flag(i), w, i});
        nu.total += w;
    }
    if (!(nu.total > 0) || !std::isfinite(nu.total)) throw PrecisionError("every atom weight underflowed");
    nu.normalize();
    return nu;
}

// K-invariant probability m_o approximated by n atoms k e+ with Haar-random k.
template <int D, class Rng> DiscreteMeasure<D> uniform_measure(std::size_t n, Rng& rng) {
    if (n == 0) throw InputError("uniform measure needs atoms");
    DiscreteMeasure<D> m;
    for (std::size_t i = 0; i < n; ++i) m.atoms.push_back({Flag<D>(random_rotation<D>(rng)), 1.0, no_source});
    m.total = static_cast<double>(n);
    m.normalize();
    return m;
}

// ---------------------------------------------------------------- conformality

// Gaussian bump exp(-d^2 / 2h^2) in chordal distance; an infinite bandwidth is f = 1.
template <int D> struct TestKernel {
    Flag<D> center;
    double bandwidth = std::numeric_limits<double>::infinity();

    double operator()(const Flag<D>& xi) const {
        if (std::isinf(bandwidth)) return 1.0;
        double d = chordal_distance(center, xi) / bandwidth;
        return std::exp(-0.5 * d * d);
    }
};

// Bumps at the letter attracting flags for each bandwidth, plus the constant function.
template <int D>
std::vector<TestKernel<D>> default_test_kernels(const std::vector<GroupElement<D>>& gens,
                                                const std::vector<double>& bandwidths = {0.05, 0.2, 0.5}) {
    std::vector<TestKernel<D>> out;
    for (const auto& y : letter_attracting_flags(gens))
        for (double h : bandwidths) out.push_back({y, h});
    out.push_back({Flag<D>(), std::numeric_limits<double>::infinity()});
    return out;
}

struct ConformalityResidual {
    std::vector<double> bandwidths;  // ascending, infinity last
    std::vector<double> residuals;   // max over kernels of that bandwidth
    double max = 0;
    double mass_defect = 0;  // |nu(exp(psi(beta(o, gamma o)))) - 1|
};

// |int f d(gamma_* nu) - int f exp(psi(beta_xi(o, gamma o))) d nu| for each test function.
template <int D>
ConformalityResidual conformality_residual(const DiscreteMeasure<D>& nu, const GroupElement<D>& gamma,
                                           const std::vector<TestKernel<D>>& kernels) {
    const GroupElement<D> e;
    std::vector<double> lhs(kernels.size(), 0.0), rhs(kernels.size(), 0.0);
    double jac_total = 0;
    for (const auto& a : nu.atoms) {
        Flag<D> moved = flag_action(gamma, a.flag);
        double jac = std::exp(nu.psi(busemann(a.flag, e, gamma)));
        jac_total += a.weight * jac;
        for (std::size_t k = 0; k < kernels.size(); ++k) {
            lhs[k] += a.weight * kernels[k](moved);
            rhs[k] += a.weight * jac * kernels[k](a.flag);
        }
    }
    ConformalityResidual out;
    out.mass_defect = std::abs(jac_total - nu.total);
    for (std::size_t k = 0; k < kernels.size(); ++k) {
        double r = std::abs(lhs[k] - rhs[k]);
        double h = kernels[k].bandwidth;
        auto it = std::find(out.bandwidths.begin(), out.bandwidths.end(), h);
        if (it == out.bandwidths.end()) {
            out.bandwidths.push_back(h);
            out.residuals.push_back(r);
        } else {
            auto& slot = out.residuals[static_cast<std::size_t>(it - out.bandwidths.begin())];
            slot = std::max(slot, r);
        }
        out.max = std::max(out.max, r);
    }
    return out;
}

// ---------------------------------------------------------------- shadows

struct ShadowMass {
    double ratio = 0;  // nu(O_r(o, gamma o)) exp(psi(mu(gamma)))
    double mass = 0;
    std::size_t members = 0;
    std::size_t indeterminate = 0;
    bool warning = false;  // more than 1% of atoms indeterminate
};

template <int D>
ShadowMass shadow_mass_ratio(const DiscreteMeasure<D>& nu, const GroupElement<D>& gamma, double r,
                             const OptimizerOptions& opt = {}) {
    ShadowSpec<D> spec{GroupElement<D>(), gamma, r};
    ShadowMass out;
    for (const auto& a : nu.atoms) {
        auto res = shadow_membership(a.flag, spec, opt);
        if (res.status == ShadowStatus::member) {
            out.mass += a.weight;
            ++out.members;
        } else if (res.status == ShadowStatus::indeterminate) {
            ++out.indeterminate;
        }
    }
    out.ratio = out.mass * std::exp(nu.psi(cartan_projection(gamma)));
    out.warning = out.indeterminate * 100 > nu.size();
    return out;
}

// ---------------------------------------------------------------- BMS, BR and hat densities

// Radon-Nikodym factor exp(psi(G(xi, eta))) of the BMS measure at a Hopf point.
template <int D> double bms_density(const HopfPoint<D>& point, const LinearForm<D>& psi) {
    return std::exp(psi(gromov_product(point.xi, point.eta)));
}

struct BrDensity {
    double factor = 1;      // exp(psi(b)) for g = k exp(b) n
    double nu_weight = 0;   // weight of the nearest atom to k e+, 0 if none within tolerance
    double nearest = 0;     // chordal distance to that atom
};

template <int D>
BrDensity br_density(const GroupElement<D>& g, const LinearForm<D>& psi, const DiscreteMeasure<D>& nu,
                     double tol = 1e-2) {
    auto kan = iwasawa_decomposition(g);
    BrDensity out;
    out.factor = std::exp(psi(kan.sigma));
    Flag<D> k(kan.k);
    out.nearest = std::numeric_limits<double>::infinity();
    double w = 0;
    for (const auto& a : nu.atoms) {
        double d = chordal_distance(k, a.flag);
        if (d < out.nearest) {
            out.nearest = d;
            w = a.weight;
        }
    }
    out.nu_weight = out.nearest <= tol ? w : 0.0;
    return out;
}

namespace detail {

// int over the box sum_i t_i h_i, t in [lo, hi], of exp(psi(b)) dt, with h_i the coweights.
template <int D>
double exp_form_box_integral(const LinearForm<D>& psi, const Eigen::Matrix<double, D - 1, 1>& lo,
                             const Eigen::Matrix<double, D - 1, 1>& hi) {
    double out = 1.0;
    for (int i = 0; i < D - 1; ++i) {
        double c = psi(CartanVector<D>::project(coweight<D>(i + 1)));
        out *= std::abs(c) < 1e-14 ? hi(i) - lo(i) : (std::exp(c * hi(i)) - std::exp(c * lo(i))) / c;
    }
    return out;
}

}  // namespace detail

// Mass of nu_hat = nu x exp(psi(b)) db on F x W against the mass of gamma_* nu_hat on the image
// gamma(F x W) = {(gamma xi, b + sigma(gamma, xi))}. The transported atoms carry the Jacobian
// exp(-psi(sigma(gamma, xi))); the relative difference is returned.
template <int D>
double hat_transport_defect(const DiscreteMeasure<D>& nu, const GroupElement<D>& gamma,
                            const Eigen::Matrix<double, D - 1, 1>& lo, const Eigen::Matrix<double, D - 1, 1>& hi) {
    double before = nu.total * detail::exp_form_box_integral(nu.psi, lo, hi);
    double after = 0;
    for (const auto& a : nu.atoms) {
        CartanVector<D> s = iwasawa_sigma(gamma, a.flag);
        double moved = a.weight * std::exp(-nu.psi(s));
        Eigen::Matrix<double, D - 1, 1> shift;
        for (int i = 0; i < D - 1; ++i) shift(i) = s.simple_root(i + 1);
        after += moved * detail::exp_form_box_integral(nu.psi, lo + shift, hi + shift);
    }
    return relative_drift(before, after);
}

// ---------------------------------------------------------------- essential values

// d_{psi, o}(xi, eta) from the pairing minors, so that nearby flags give small distances
// instead of a transversality error.
template <int D> double psi_distance(const Flag<D>& xi, const Flag<D>& eta, const LinearForm<D>& psi) {
    auto m = pairing_minors(xi, eta);
    auto a = psi.weight_coordinates();
    double log_d = 0;
    for (int k = 0; k < D - 1; ++k) log_d += a(k) * std::log(std::max(m[k], 1e-300));
    return std::exp(log_d);
}

// B = supp(nu), or supp(nu) intersected with a shadow O_r(p, q).
template <int D> struct AtomSet {
    std::optional<ShadowSpec<D>> shadow;

    bool contains(const Flag<D>& xi, const OptimizerOptions& opt) const {
        if (!shadow) return true;
        return shadow_membership(xi, *shadow, opt).status == ShadowStatus::member;
    }
};

struct EssentialOptions {
    double r = 1.0;               // ball scale
    double n0 = 1.0;              // triangle constant N0 of the virtual metric
    int max_conjugator_len = -1;  // default: the whole table
    OptimizerOptions opt;
};

struct EssentialValueCertificate {
    bool found = false;
    Word gamma0;
    Word conjugator;
    std::vector<double> target;  // lambda(gamma0)
    double epsilon = 0;
    double set_mass = 0;
    double max_busemann_deviation = 0;
    double ball_radius = 0;
    std::size_t atoms = 0;
    std::size_t conjugators_tried = 0;
    double best_deviation = std::numeric_limits<double>::infinity();  // smallest radius-test deviation seen
};

namespace detail {

struct EssentialProbe {
    bool radius_ok = false;
    double radius_deviation = 0;
    double set_mass = 0;
    double max_deviation = 0;
    std::size_t atoms = 0;
};

// With h = gamma gamma0 gamma^{-1}: radius condition on B_o(gamma xi0, 3 N0 rho), then the
// witness set B cap h^{-1} B cap D(gamma xi0, rho) cap {|beta_xi(h^{-1} o, o) - v| < eps}.
template <int D>
EssentialProbe essential_probe(const DiscreteMeasure<D>& nu, const GroupElement<D>& gamma, const GroupElement<D>& g0,
                               const Flag<D>& xi0, const CartanVector<D>& v, double eps, double rho, double n0,
                               const AtomSet<D>& B, const OptimizerOptions& opt) {
    EssentialProbe out;
    const GroupElement<D> e;
    const GroupElement<D> h = gamma * g0 * gamma.inverse();
    const GroupElement<D> hi = h.inverse();
    const Flag<D> center = flag_action(gamma, xi0);
    const double outer = 3.0 * n0 * rho;
    for (const auto& a : nu.atoms) {
        double d = psi_distance(center, a.flag, nu.psi);
        if (d >= outer) continue;
        double dev = std::max((busemann(a.flag, e, h) - v).norm(), (busemann(a.flag, e, hi) + v).norm());
        out.radius_deviation = std::max(out.radius_deviation, dev);
    }
    out.radius_ok = out.radius_deviation < eps;
    if (!out.radius_ok) return out;
    for (const auto& a : nu.atoms) {
        if (psi_distance(center, a.flag, nu.psi) >= rho) continue;
        double dev = (busemann(a.flag, hi, e) - v).norm();
        if (dev >= eps) continue;
        if (!B.contains(a.flag, opt) || !B.contains(flag_action(h, a.flag), opt)) continue;
        out.set_mass += a.weight;
        out.max_deviation = std::max(out.max_deviation, dev);
        ++out.atoms;
    }
    return out;
}

}  // namespace detail

// Search over conjugators gamma of the table in increasing psi(mu(gamma)) for a witness that
// v = lambda(gamma0) is an essential value at scale eps.
template <int D>
EssentialValueCertificate essential_value_search(const OrbitTable<D>& table, const DiscreteMeasure<D>& nu,
                                                 const Word& gamma0, double eps, const AtomSet<D>& B = {},
                                                 const EssentialOptions& o = {}) {
    if (!(eps > 0)) throw InputError("epsilon must be positive");
    const auto& gens = table.generators();
    GroupElement<D> g0 = evaluate(gens, gamma0);
    CartanVector<D> v = jordan_projection(g0);
    if (!is_loxodromic(v)) throw LoxodromyError("gamma0 is not loxodromic");
    Flag<D> xi0 = attracting_flag(g0);
    EssentialValueCertificate cert;
    cert.gamma0 = gamma0;
    cert.target.assign(v.coords().data(), v.coords().data() + D);
    cert.epsilon = eps;
    int maxlen = o.max_conjugator_len < 0 ? table.max_len() : std::min(o.max_conjugator_len, table.max_len());
    std::vector<std::size_t> order(table.shell_end(maxlen));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return nu.psi(table.mu(a)) < nu.psi(table.mu(b)); });
    for (std::size_t gi : order) {
        ++cert.conjugators_tried;
        const CartanVector<D>& a = table.mu(gi);
        double rho = o.r / (3.0 * o.n0) * std::exp(-nu.psi(a + a.opposition()));
        auto p = detail::essential_probe(nu, table.element(gi), g0, xi0, v, eps, rho, o.n0, B, o.opt);
        cert.best_deviation = std::min(cert.best_deviation, p.radius_deviation);
        if (p.radius_ok && p.set_mass > 0) {
            cert.found = true;
            cert.conjugator = table.word(gi);
            cert.set_mass = p.set_mass;
            cert.max_busemann_deviation = p.max_deviation;
            cert.ball_radius = rho;
            cert.atoms = p.atoms;
            return cert;
        }
    }
    return cert;
}

// Recomputes the witness set of a certificate, typically with refined optimizer options.
template <int D>
bool verify_certificate(const OrbitTable<D>& table, const DiscreteMeasure<D>& nu,
                        const EssentialValueCertificate& cert, const AtomSet<D>& B, const EssentialOptions& o) {
    if (!cert.found) return false;
    const auto& gens = table.generators();
    GroupElement<D> g0 = evaluate(gens, cert.gamma0);
    CartanVector<D> v = jordan_projection(g0);
    for (int i = 0; i < D; ++i)
        if (std::abs(v[i] - cert.target[static_cast<std::size_t>(i)]) > tol::geometric) return false;
    GroupElement<D> gamma = evaluate(gens, cert.conjugator);
    auto p = detail::essential_probe(nu, gamma, g0, attracting_flag(g0), v, cert.epsilon, cert.ball_radius, o.n0, B,
                                     o.opt);
    return p.radius_ok && p.set_mass > 0 && p.max_deviation < cert.epsilon;
}

// ---------------------------------------------------------------- Myrberg score

struct MyrbergScore {
    double score = 0;
    std::vector<std::size_t> witness;  // table index per target, no_source if none
};

// Fraction of targets (xi, eta) with some gamma in the table such that kappa_1(gamma) is
// within tol of xi and gamma xi0 is within tol of eta.
template <int D>
MyrbergScore myrberg_score(const Flag<D>& xi0, const OrbitTable<D>& table, const std::vector<FlagPair<D>>& targets,
                           double tol) {
    MyrbergScore out;
    out.witness.assign(targets.size(), no_source);
    if (targets.empty()) return out;
    std::vector<Flag<D>> moved(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) moved[i] = Flag<D>(table.matrix(i) * xi0.frame());
    std::size_t hits = 0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (chordal_distance(table.flag(i), targets[t].xi) < tol && chordal_distance(moved[i], targets[t].eta) < tol) {
                out.witness[t] = i;
                ++hits;
                break;
            }
        }
    }
    out.score = static_cast<double>(hits) / static_cast<double>(targets.size());
    return out;
}

// ---------------------------------------------------------------- mutual singularity

struct SingularityScale {
    double scale = 0;
    std::size_t cells = 0;
    double correlation = 0;
};

// Correlation of the cell masses of nu1 and nu2 over a Voronoi partition of the flag variety
// by round(1 / scale) random-rotation centers, for each scale.
template <int D, class Rng>
std::vector<SingularityScale> mutual_singularity_diagnostic(const DiscreteMeasure<D>& nu1,
                                                            const DiscreteMeasure<D>& nu2,
                                                            const std::vector<double>& scales, Rng& rng) {
    std::vector<SingularityScale> out;
    for (double s : scales) {
        if (!(s > 0)) throw InputError("scales must be positive");
        SingularityScale row;
        row.scale = s;
        row.cells = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(1.0 / s)));
        std::vector<Flag<D>> centers;
        for (std::size_t c = 0; c < row.cells; ++c) centers.emplace_back(random_rotation<D>(rng));
        auto cell_masses = [&](const DiscreteMeasure<D>& nu) {
            std::vector<double> m(row.cells, 0.0);
            for (const auto& a : nu.atoms) {
                std::size_t best = 0;
                double bd = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < centers.size(); ++c) {
                    double d = chordal_distance(centers[c], a.flag);
                    if (d < bd) {
                        bd = d;
                        best = c;
                    }
                }
                m[best] += a.weight;
            }
            return m;
        };
        row.correlation = pearson(cell_masses(nu1), cell_masses(nu2));
        out.push_back(row);
    }
    return out;
}

}  // namespace anosov
