#include <gtest/gtest.h>

#include <cmath>

#include "anosov/orbit.hpp"
#include "support.hpp"

using namespace anosov;

namespace {

const OrbitTable<3>& table8() {
    static const auto t = OrbitTable<3>::enumerate(support::preset3(), 8);
    return t;
}

std::size_t tree_count(int r, int L) {
    std::size_t n = 1, sphere = 2 * r;
    for (int l = 1; l <= L; ++l, sphere *= 2 * r - 1) n += sphere;
    return n;
}

CartanVector<3> unit(const Vec<3>& v) {
    auto c = CartanVector<3>::project(v);
    return c * (1.0 / c.norm());
}

}  // namespace

TEST(Enumerate, CountsMatchTree) {
    EXPECT_EQ(OrbitTable<3>::enumerate(support::preset3(), 1).size(), 5u);
    EXPECT_EQ(OrbitTable<3>::enumerate(support::preset3(), 3).size(), 53u);
    for (int L = 1; L <= 6; ++L) EXPECT_EQ(OrbitTable<3>::enumerate(support::preset3(), L).size(), tree_count(2, L));
}

TEST(Enumerate, ClosedUnderInverse) {
    const auto& t = table8();
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::size_t j = t.inverse_index(i);
        ASSERT_EQ(t.word(j), t.word(i).inverse());
        ASSERT_EQ(t.inverse_index(j), i);
        ASSERT_LE((t.mu(j) - t.mu(i).opposition()).norm(), 1e-8 * (1 + t.mu(i).norm()));
    }
}

TEST(Enumerate, EntryInvariants) {
    const auto& t = table8();
    const auto gens = support::preset3().letters();
    for (std::size_t i = 0; i < t.size(); i += 97) {
        auto e = t.entry(i);
        EXPECT_EQ(static_cast<std::size_t>(e.word_len), e.word.size());
        EXPECT_TRUE(e.mu.in_positive_chamber(1e-9));
        EXPECT_TRUE(e.lam.in_positive_chamber(1e-9));
        Mat<3> m = evaluate(gens, e.word).matrix();
        EXPECT_LE((m - e.matrix.matrix()).norm(), 1e-9 * m.norm());
    }
}

TEST(Enumerate, DeterministicAcrossThreadCounts) {
    auto a = OrbitTable<3>::enumerate(support::preset3(), 6, default_sphere_cap, 1);
    auto b = OrbitTable<3>::enumerate(support::preset3(), 6, default_sphere_cap, 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a.mu(i).coords(), b.mu(i).coords());
        ASSERT_EQ(a.lam(i).coords(), b.lam(i).coords());
        ASSERT_EQ(a.flag(i).frame(), b.flag(i).frame());
    }
}

TEST(Enumerate, Errors) {
    EXPECT_THROW(OrbitTable<3>::enumerate(support::preset3(), 0), InputError);
    EXPECT_THROW(OrbitTable<3>::enumerate(support::preset3(), 6, 100), ResourceError);
    auto bad = support::preset3();
    support::Rng rng(3);
    bad.raw[1] = random_rotation<3>(rng);
    EXPECT_THROW(OrbitTable<3>::enumerate(bad, 3), PresetIntegrityError);
}

TEST(Enumerate, TruncationSharesPrefix) {
    const auto& t = table8();
    auto s = t.truncated(5);
    EXPECT_EQ(s.size(), tree_count(2, 5));
    for (std::size_t i = 0; i < s.size(); i += 13) EXPECT_EQ(s.mu(i).coords(), t.mu(i).coords());
    EXPECT_THROW(t.truncated(9), InputError);
}

TEST(LimitCone, CyclicDegeneratesToRay) {
    auto t = OrbitTable<3>::enumerate(support::cyclic_preset<3>(), 10);
    auto c = limit_cone_estimate(t, 1);
    auto ray = c.lam_directions.front();
    for (const auto& d : c.lam_directions) EXPECT_LE((d - ray).norm(), 1e-9);
    for (const auto& d : c.mu_directions) EXPECT_LE((d - ray).norm(), 1e-9);
    for (const auto& d : c.hull) EXPECT_LE((d - ray).norm(), 1e-9);
}

TEST(LimitCone, PresetInsideOpenChamber) {
    auto c = limit_cone_estimate(table8(), 4);
    EXPECT_GT(c.wall_margin, 0.0);
    EXPECT_LE(c.inversion_defect, 1e-9);
    EXPECT_FALSE(c.hull.empty());
}

TEST(LimitCone, Errors) {
    EXPECT_THROW(limit_cone_estimate(table8(), 0), InputError);
    EXPECT_THROW(limit_cone_estimate(table8(), 9), InputError);
}

TEST(Growth, EmptyConeIsMinusInfinity) {
    auto wall = unit(Vec<3>(1, 1, -2));
    auto g = growth_indicator_estimate(table8(), wall, 0.01);
    EXPECT_EQ(g.count, 0u);
    EXPECT_TRUE(std::isinf(g.value) && g.value < 0);
}

TEST(Growth, MonotoneInAperture) {
    auto u = unit(Vec<3>(1, 0, -1));
    double prev = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
    for (double th : {0.01, 0.02, 0.05, 0.2}) {
        auto g = growth_indicator_estimate(table8(), u, th);
        EXPECT_GE(g.upper, prev);
        EXPECT_GE(g.count, count);
        prev = g.upper;
        count = g.count;
    }
}

TEST(Growth, PositiveAtCenterAndConcaveAcrossHull) {
    const auto& t = table8();
    auto c = limit_cone_estimate(t, 4);
    ASSERT_GE(c.hull.size(), 2u);
    auto u1 = c.hull.front(), u2 = c.hull.back();
    auto mid = unit(u1.coords() + u2.coords());
    auto g1 = growth_indicator_estimate(t, u1, 0.02);
    auto g2 = growth_indicator_estimate(t, u2, 0.02);
    auto gm = growth_indicator_estimate(t, mid, 0.02);
    EXPECT_GT(gm.value, 0.0);
    EXPECT_GE(gm.value, std::min(g1.value, g2.value) - 2 * std::max(g1.stderr_value, g2.stderr_value));
}

TEST(Growth, Errors) {
    auto u = unit(Vec<3>(1, 0, -1));
    EXPECT_THROW(growth_indicator_estimate(table8(), u, 0.0), InputError);
    EXPECT_THROW(growth_indicator_estimate(table8(), u * 2.0, 0.1), InputError);
    EXPECT_THROW(growth_indicator_estimate(table8(), u.opposition() * -1.0, 0.1), InputError);
    EXPECT_THROW(growth_indicator_estimate(table8().truncated(1), u, 0.2), InsufficientDataError);
}

TEST(CriticalExponent, OrthogonalFormRejected) {
    auto t = OrbitTable<3>::enumerate(support::cyclic_preset<3>(), 6);
    EXPECT_THROW(critical_exponent(t, CartanVector<3>::project(Vec<3>(1, -2, 1))), DomainError);
}

TEST(CriticalExponent, ScalesInversely) {
    auto w = CartanVector<3>::project(Vec<3>(1, 0, -1));
    double d1 = critical_exponent(table8(), w).value;
    // powers of two keep the counting grid bit-exact
    for (double c : {0.5, 4.0}) EXPECT_NEAR(critical_exponent(table8(), w * c).value, d1 / c, 1e-12 * d1);
}

// #sphere(l) = 4 3^{l-1} and <w, mu> >= l m - (l - 1) R_w give delta_w <= log 3 / (m - R_w),
// with m the least letter value and R_w the superadditivity defect of <w, mu> on the table.
TEST(CriticalExponent, FreeGroupCountingBound) {
    const auto& t = table8();
    const auto& idx = t.indexer();
    for (auto psi : {LinearForm<3>::omega(1), LinearForm<3>::two_rho(), LinearForm<3>::from({0.5, 0.1, -0.6})}) {
        auto w = CartanVector<3>::project(psi.coefficients());
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = t.shell_begin(1); i < t.shell_end(1); ++i) m = std::min(m, psi(t.mu(i)));
        double R = 0;
        for (std::size_t i = t.shell_begin(2); i < t.size(); ++i) {
            const auto ls = t.word(i).letters();
            for (std::size_t k = 1; k < ls.size(); ++k) {
                std::size_t a = idx.rank_of(std::span<const Letter>(ls.data(), k));
                std::size_t b = idx.rank_of(std::span<const Letter>(ls.data() + k, ls.size() - k));
                R = std::max(R, psi(t.mu(a)) + psi(t.mu(b)) - psi(t.mu(i)));
            }
        }
        ASSERT_GT(m, R);
        double bound = std::log(3.0) / (m - R);
        auto ce = critical_exponent(t, w);
        EXPECT_LE(ce.value, bound);
        // partial sums just above the bound decay shell by shell
        auto above = poincare_partial(t, psi, 1.05 * bound);
        for (std::size_t l = 2; l < above.shells.size(); ++l) EXPECT_LT(above.shells[l], above.shells[l - 1]);
    }
}

TEST(Poincare, IdentityOnly) {
    auto p = poincare_partial(table8().truncated(0), LinearForm<3>::omega(1), 1.0);
    EXPECT_EQ(p.total, 1.0);
}

TEST(Poincare, DichotomyAroundTangent) {
    auto psi = LinearForm<3>::omega(1);
    double delta = critical_exponent(table8(), CartanVector<3>::project(psi.coefficients())).value;
    auto far = poincare_partial(table8(), psi, 10 * delta);
    for (std::size_t l = 2; l < far.shells.size(); ++l) EXPECT_LT(far.shells[l], 0.5 * far.shells[l - 1]);
    EXPECT_LT(shell_ratio(poincare_partial(table8(), psi, 1.5 * delta), 4), 0.8);
    EXPECT_GE(shell_ratio(poincare_partial(table8(), psi, delta), 4), 0.9);
}

TEST(Poincare, OverflowSentinel) {
    auto p = poincare_partial(table8(), LinearForm<3>::omega(1), -500.0);
    EXPECT_TRUE(std::isinf(p.total));
    EXPECT_GE(p.overflow_shell, 1);
}

TEST(Poincare, BalancedExponentHasUnitShellRatio) {
    auto psi = LinearForm<3>::omega(1);
    double s = shell_balanced_exponent(table8(), psi);
    EXPECT_NEAR(shell_ratio(poincare_partial(table8(), psi, s), 4), 1.0, 1e-9);
    EXPECT_THROW(shell_balanced_exponent(table8(), psi * -1.0), DomainError);
}

TEST(Regularity, CyclicMarginIsLambdaGap) {
    auto t = OrbitTable<3>::enumerate(support::cyclic_preset<3>(), 6);
    auto lam = t.lam(1);
    EXPECT_NEAR(regularity_margin(t), lam.min_simple_root() / lam.norm(), 1e-12);
}

TEST(Regularity, PresetMarginPositiveAndInversionInvariant) {
    const auto& t = table8();
    double m = regularity_margin(t);
    EXPECT_GT(m, 0.0);
    double mi = std::numeric_limits<double>::infinity();
    for (std::size_t i = t.shell_begin(4); i < t.size(); ++i) {
        const auto& v = t.mu(t.inverse_index(i));
        mi = std::min(mi, v.min_simple_root() / v.norm());
    }
    EXPECT_NEAR(m, mi, 1e-12);
}

TEST(Additivity, DefectBoundedInLength) {
    double d8 = almost_additivity(table8()).max_defect;
    double d6 = almost_additivity(table8().truncated(6)).max_defect;
    EXPECT_LT(relative_drift(d6, d8), 0.05);
}

TEST(WordLength, LinearBounds) {
    auto b = word_length_bounds(table8());
    EXPECT_TRUE(std::isfinite(b.upper_ratio));
    EXPECT_LE(table8().length(b.upper_witness), 3);
    EXPECT_GT(b.lower.slope, 0.0);
}
