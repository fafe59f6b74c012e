#include <gtest/gtest.h>

#include <cmath>

#include "anosov/measure.hpp"
#include "support.hpp"

using namespace anosov;

namespace {

const OrbitTable<3>& table10() {
    static const auto t = OrbitTable<3>::enumerate(support::preset3(), 10);
    return t;
}

const LinearForm<3> kCenter = LinearForm<3>::from({1, 0, -1});

LinearForm<3> balanced(const OrbitTable<3>& t, const LinearForm<3>& psi = kCenter) {
    return psi * shell_balanced_exponent(t, psi);
}

std::vector<std::size_t> shadow_targets(const OrbitTable<3>& t, int max_len, std::size_t per_shell) {
    std::vector<std::size_t> out;
    for (int l = 1; l <= max_len; ++l) {
        std::size_t n = t.shell_end(l) - t.shell_begin(l);
        for (std::size_t k = 0; k < per_shell; ++k) out.push_back(t.shell_begin(l) + (k * n) / per_shell);
    }
    return out;
}

}  // namespace

TEST(BuildPs, Errors) {
    auto t = table10().truncated(4);
    EXPECT_THROW(build_ps(t.truncated(0), kCenter), InsufficientDataError);
    EXPECT_THROW(build_ps(t, kCenter, 0), InputError);
    EXPECT_THROW(build_ps(t, kCenter, 5), InsufficientDataError);
    EXPECT_THROW(build_ps(t, kCenter * -1.0), DomainError);
    EXPECT_THROW(build_ps(t, kCenter * 1e4), PrecisionError);
}

TEST(BuildPs, NormalizedAndAboveFloor) {
    auto t = table10().truncated(6);
    auto nu = build_ps(t, balanced(t));
    EXPECT_EQ(nu.floor, 3);
    EXPECT_EQ(nu.size(), t.size() - t.shell_begin(3));
    double total = 0;
    for (const auto& a : nu.atoms) {
        total += a.weight;
        EXPECT_GE(t.length(a.source), nu.floor);
        EXPECT_EQ(a.flag.frame(), t.flag(a.source).frame());
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_EQ(nu.total, 1.0);
}

TEST(BuildPs, Deterministic) {
    auto t = table10().truncated(7);
    auto a = build_ps(t, balanced(t)), b = build_ps(t, balanced(t));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a.atoms[i].weight, b.atoms[i].weight);
        ASSERT_EQ(a.atoms[i].flag.frame(), b.atoms[i].flag.frame());
    }
}

TEST(BuildPs, CyclicAtomsAccumulateOnFixedFlags) {
    auto preset = support::cyclic_preset<3>();
    auto t = OrbitTable<3>::enumerate(preset, 12);
    auto g = preset.letters()[0];
    Flag<3> plus = attracting_flag(g), minus = attracting_flag(g.inverse());
    auto nu = build_ps(t, kCenter);
    for (const auto& a : nu.atoms)
        EXPECT_LE(std::min(chordal_distance(a.flag, plus), chordal_distance(a.flag, minus)), 1e-3);
}

TEST(Conformality, IdentityHasNoResidual) {
    auto t = table10().truncated(6);
    auto nu = build_ps(t, balanced(t));
    auto r = conformality_residual(nu, GroupElement<3>(), default_test_kernels(t.generators()));
    // exact up to the rounding of the normalized weights
    EXPECT_LE(r.max, 1e-14);
    EXPECT_LE(r.mass_defect, 1e-14);
}

TEST(Conformality, ConstantFunctionIsMassDefect) {
    auto t = table10().truncated(6);
    auto nu = build_ps(t, balanced(t));
    auto r = conformality_residual(nu, t.element(1), default_test_kernels(t.generators()));
    ASSERT_TRUE(std::isinf(r.bandwidths.back()));
    EXPECT_NEAR(r.residuals.back(), r.mass_defect, 1e-14);
    EXPECT_EQ(r.bandwidths.size(), 4u);
}

TEST(Conformality, ResidualDecreasesWithLength) {
    auto t8 = table10().truncated(8);
    auto nu8 = build_ps(t8, balanced(t8));
    auto nu10 = build_ps(table10(), balanced(table10()));
    auto kernels = default_test_kernels(table10().generators());
    for (std::size_t i = table10().shell_begin(1); i < table10().shell_end(1); ++i) {
        double r8 = conformality_residual(nu8, table10().element(i), kernels).max;
        double r10 = conformality_residual(nu10, table10().element(i), kernels).max;
        EXPECT_LT(r10, r8) << table10().word(i).str();
    }
}

TEST(ShadowMass, IdentityCarriesFullMass) {
    auto t = table10().truncated(6);
    auto nu = build_ps(t, balanced(t));
    auto s = shadow_mass_ratio(nu, GroupElement<3>(), 2.0);
    EXPECT_NEAR(s.ratio, 1.0, 1e-12);
    EXPECT_EQ(s.members, nu.size());
    EXPECT_FALSE(s.warning);
}

TEST(ShadowMass, BandBoundedAndStable) {
    int horizon = flat_precision_horizon(table10());
    auto band = [&](const OrbitTable<3>& t, const LinearForm<3>& psi, bool invert) {
        auto nu = build_ps(t, balanced(t, psi));
        double lo = std::numeric_limits<double>::infinity(), hi = 0;
        for (auto i : shadow_targets(t, std::min(t.max_len() - 3, horizon), 2)) {
            auto s = shadow_mass_ratio(nu, t.element(invert ? t.inverse_index(i) : i), 1.0);
            EXPECT_EQ(s.indeterminate, 0u);
            lo = std::min(lo, s.ratio);
            hi = std::max(hi, s.ratio);
        }
        return std::pair{lo, hi};
    };
    auto t8 = table10().truncated(8);
    auto [lo8, hi8] = band(t8, kCenter, false);
    auto [lo10, hi10] = band(table10(), kCenter, false);
    ASSERT_GT(lo8, 0.0);
    EXPECT_LT(hi10 / lo10, 1e3);
    EXPECT_LT(hi8 / lo8, 1e3);
    EXPECT_LT(relative_drift(hi8 / lo8, hi10 / lo10), 0.5);
    // gamma -> gamma^{-1} with psi -> psi o i: same band, up to truncation
    auto psi = LinearForm<3>::from({0.7, 0.1, -0.8});
    auto [a, b] = band(table10(), psi, false);
    auto [c, d] = band(table10(), psi.opposition(), true);
    EXPECT_LT(relative_drift(a, c), 1e-3);
    EXPECT_LT(relative_drift(b, d), 1e-3);
}

TEST(Bms, Examples) {
    auto pair = visual_flags(GroupElement<3>());
    EXPECT_NEAR(bms_density(HopfPoint<3>{pair.xi, pair.eta, {}}, kCenter), 1.0, 1e-12);
}

TEST(Bms, CocycleCorrectedInvariance) {
    support::Rng rng(1);
    auto psi = LinearForm<3>::from({0.4, 0.3, -0.7});
    for (int t = 0; t < 500; ++t) {
        auto xi = support::random_flag<3>(rng), eta = support::random_flag<3>(rng);
        auto g = support::random_element<3>(rng);
        double before = bms_density(HopfPoint<3>{xi, eta, {}}, psi);
        double after = bms_density(HopfPoint<3>{flag_action(g, xi), flag_action(g, eta), {}}, psi);
        double transport = std::exp(-psi(iwasawa_sigma(g, xi) + iwasawa_sigma(g, eta).opposition()));
        ASSERT_NEAR(after * transport, before, 1e-8 * before);
        double swapped = bms_density(HopfPoint<3>{eta, xi, {}}, psi.opposition());
        ASSERT_NEAR(swapped, before, 1e-9 * before);
    }
}

TEST(Br, FactorExamples) {
    support::Rng rng(2);
    auto psi = LinearForm<3>::from({0.4, 0.3, -0.7});
    auto t = table10().truncated(5);
    auto nu = build_ps(t, balanced(t));
    Mat<3> n = Mat<3>::Identity();
    n(0, 1) = 0.7;
    n(0, 2) = -1.2;
    n(1, 2) = 2.5;
    EXPECT_NEAR(br_density(GroupElement<3>(n), psi, nu).factor, 1.0, 1e-12);
    Vec<3> b(0.9, 0.2, -1.1);
    EXPECT_NEAR(br_density(GroupElement<3>::diagonal(b), psi, nu).factor, std::exp(psi(CartanVector<3>::project(b))),
                1e-12);
    for (int k = 0; k < 50; ++k) {
        auto g = support::random_element<3>(rng);
        double f = br_density(g, psi, nu).factor;
        EXPECT_NEAR(br_density(g * GroupElement<3>(n), psi, nu).factor, f, 1e-9 * f);
    }
}

TEST(Br, NearestAtomWeight) {
    auto t = table10().truncated(5);
    auto nu = build_ps(t, balanced(t));
    const auto& atom = nu.atoms[17];
    Mat<3> k = atom.flag.frame();
    if (k.determinant() < 0) k.col(2) *= -1.0;
    auto r = br_density(GroupElement<3>::trusted(k, k.transpose()), kCenter, nu);
    EXPECT_LE(r.nearest, 1e-12);
    EXPECT_GT(r.nu_weight, 0.0);
}

TEST(HatMeasure, TransportPreservesMass) {
    auto t = table10().truncated(7);
    auto nu = build_ps(t, balanced(t));
    Eigen::Vector2d lo(-1.0, -0.5), hi(0.7, 1.3);
    for (std::size_t i = 1; i < t.shell_end(2); ++i) EXPECT_LE(hat_transport_defect(nu, t.element(i), lo, hi), 1e-8);
}

TEST(PsiDistance, MatchesVirtualDistance) {
    support::Rng rng(3);
    for (int t = 0; t < 300; ++t) {
        auto xi = support::random_flag<3>(rng), eta = support::random_flag<3>(rng);
        double d = virtual_distance(xi, eta, kCenter, GroupElement<3>());
        ASSERT_NEAR(psi_distance(xi, eta, kCenter), d, 1e-10 * d);
    }
    Flag<3> f;
    EXPECT_EQ(psi_distance(f, f, kCenter), 0.0);
}

namespace {

struct EssentialSetup {
    OrbitTable<3> table;
    DiscreteMeasure<3> nu;
    double n0;
    Word gamma0;
};

const EssentialSetup& essential_setup() {
    static const EssentialSetup s = [] {
        auto t = table10().truncated(8);
        auto psi = balanced(t);
        auto nu = build_ps(t, psi);
        LimitMap<3> zeta(support::preset3());
        support::Rng rng(4);
        std::vector<Word> words;
        for (int i = 0; i < 100; ++i) words.push_back(BoundaryWord::random(48, Alphabet(2), rng).prefix);
        double n0 = triangle_constant(limit_metric_sample(zeta, words, 32, psi)).n0();
        // smallest power of the first generator meeting the hypothesis on lambda
        Word g0 = Word::letter(0);
        while (psi(jordan_projection(evaluate(t.generators(), g0))) < 1 + std::log(3 * n0)) g0 = g0 * Word::letter(0);
        return EssentialSetup{t, nu, n0, g0};
    }();
    return s;
}

}  // namespace

TEST(Essential, CertificateFoundAndReverified) {
    const auto& s = essential_setup();
    EssentialOptions o;
    o.n0 = s.n0;
    auto cert = essential_value_search(s.table, s.nu, s.gamma0, 0.5, AtomSet<3>{}, o);
    ASSERT_TRUE(cert.found);
    EXPECT_GT(cert.set_mass, 0.0);
    EXPECT_LT(cert.max_busemann_deviation, cert.epsilon);
    auto lam = jordan_projection(evaluate(s.table.generators(), s.gamma0));
    for (int i = 0; i < 3; ++i) EXPECT_EQ(cert.target[static_cast<std::size_t>(i)], lam[i]);
    EssentialOptions refined = o;
    refined.opt = o.opt.refined();
    EXPECT_TRUE(verify_certificate(s.table, s.nu, cert, AtomSet<3>{}, refined));
    // a certificate for a different target does not verify
    auto forged = cert;
    forged.target[0] += 0.1;
    EXPECT_FALSE(verify_certificate(s.table, s.nu, forged, AtomSet<3>{}, refined));
}

TEST(Essential, Errors) {
    const auto& s = essential_setup();
    EXPECT_THROW(essential_value_search(s.table, s.nu, s.gamma0, 0.0), InputError);
    EXPECT_THROW(essential_value_search(s.table, s.nu, Word(), 0.5), LoxodromyError);
}

TEST(Myrberg, ConstructedTargetsScoreOne) {
    auto t = table10().truncated(5);
    auto xi0 = attracting_flag(evaluate(t.generators(), Word::letter(2)));
    std::vector<FlagPair<3>> targets;
    for (std::size_t i = 1; i < t.size(); i += 11) targets.emplace_back(t.flag(i), flag_action(t.element(i), xi0));
    EXPECT_EQ(myrberg_score(xi0, t, targets, 1e-9).score, 1.0);
    EXPECT_EQ(myrberg_score(xi0, t, targets, 0.0).score, 0.0);
    EXPECT_EQ(myrberg_score(xi0, t, {}, 0.1).score, 0.0);
}

TEST(Myrberg, ScoreGrowsWithLength) {
    LimitMap<3> zeta(support::preset3());
    support::Rng rng(5);
    Alphabet ab(2);
    auto xi0 = attracting_flag(evaluate(table10().generators(), BoundaryWord::random(9, ab, rng).prefix));
    std::vector<FlagPair<3>> targets;
    while (targets.size() < 100) {
        FlagPair<3> p(zeta(BoundaryWord::random(32, ab, rng), 32), zeta(BoundaryWord::random(32, ab, rng), 32));
        if (p.transversal()) targets.push_back(p);
    }
    double prev = -1;
    for (int L : {6, 8, 10}) {
        double s = myrberg_score(xi0, table10().truncated(L), targets, 0.05).score;
        EXPECT_GE(s, prev);
        prev = s;
    }
}

TEST(MutualSingularity, IdenticalMeasuresCorrelate) {
    auto t = table10().truncated(6);
    auto nu = build_ps(t, balanced(t));
    support::Rng rng(6);
    auto rows = mutual_singularity_diagnostic(nu, nu, {0.5, 0.1, 0.02}, rng);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1].cells, 10u);
    for (const auto& r : rows)
        if (r.cells > 1) EXPECT_NEAR(r.correlation, 1.0, 1e-12);
}

TEST(MutualSingularity, IndependentUniformAtomsDecorrelate) {
    support::Rng rng(7);
    auto a = uniform_measure<3>(200, rng), b = uniform_measure<3>(200, rng);
    auto rows = mutual_singularity_diagnostic(a, b, {1e-3}, rng);
    EXPECT_LT(std::abs(rows[0].correlation), 0.3);
    EXPECT_THROW(mutual_singularity_diagnostic(a, b, {0.0}, rng), InputError);
}
