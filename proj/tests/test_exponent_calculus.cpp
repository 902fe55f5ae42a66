#include <gtest/gtest.h>

#include <cmath>

#include "plap/exponent_calculus.hpp"
#include "test_support.hpp"

using namespace plap;
using plap::testing_support::sample_admissible;

namespace {

bool has_violation(const CompatibilityReport& rep, const std::string& tag) {
    return std::find(rep.violations.begin(), rep.violations.end(), tag) != rep.violations.end();
}

}  // namespace

TEST(Compatibility, HeatCaseBands) {
    const auto rep = check_compatibility(RawParams{2.0, 2, 8.0, 8.0});
    EXPECT_TRUE(rep.admissible);
    EXPECT_DOUBLE_EQ(rep.minimal_integrability, 0.25);
    EXPECT_DOUBLE_EQ(rep.holder_band, 0.5);
}

TEST(Compatibility, SingularLowerBand) {
    const auto rep = check_compatibility(RawParams{1.5, 2, 8.0, 8.0});
    EXPECT_TRUE(rep.admissible);
    EXPECT_DOUBLE_EQ(rep.lower_band, 0.4375);
    EXPECT_LE(rep.lower_band, rep.holder_band);
}

TEST(Compatibility, QAtDimensionIsRejected) {
    const auto rep = check_compatibility(RawParams{2.0, 2, 2.0, 8.0});
    EXPECT_FALSE(rep.admissible);
    EXPECT_TRUE(has_violation(rep, violation::q_gt_n));
}

TEST(Compatibility, SingularWithBoundedSourceIsRejected) {
    const auto rep = check_compatibility(RawParams{1.5, 2, infinity, infinity});
    EXPECT_FALSE(rep.admissible);
    EXPECT_TRUE(has_violation(rep, violation::lower));
}

TEST(ProblemParams, AlphaHRequiredAwayFromTwo) {
    EXPECT_THROW(ProblemParams::make(3.0, 2, 8.0, 8.0), DomainError);
    EXPECT_NO_THROW(ProblemParams::make(2.0, 2, 8.0, 8.0));
    EXPECT_THROW(ProblemParams::make(3.0, 2, 8.0, 8.0, 0.0), DomainError);
}

TEST(SharpExponents, HeatCase) {
    const auto e = sharp_exponents(ProblemParams::make(2.0, 2, 8.0, 8.0, 1.0));
    EXPECT_NEAR(e.alpha, 0.5, 1e-15);
}

TEST(SharpExponents, BoundedSourceDegenerate) {
    const auto e = sharp_exponents(ProblemParams::make(3.0, 2, infinity, infinity, 1.0));
    EXPECT_NEAR(e.alpha_hat, 0.5, 1e-15);
}

TEST(SharpExponents, SpaceOnlyIntegrability) {
    const auto e = sharp_exponents(ProblemParams::make(3.0, 3, 6.0, infinity, 1.0));
    EXPECT_NEAR(e.alpha_hat, 0.25, 1e-15);
}

TEST(SharpExponents, CappedByHomogeneousExponent) {
    const auto e = sharp_exponents(ProblemParams::make(3.0, 2, infinity, infinity, 0.3));
    EXPECT_DOUBLE_EQ(e.alpha, 0.3);
    EXPECT_TRUE(e.attained_by_homogeneous);
    EXPECT_LT(e.alpha_strict(), 0.3);
}

TEST(SharpExponents, InadmissibleThrows) {
    EXPECT_THROW(sharp_exponents(ProblemParams::make(1.5, 2, infinity, infinity, 1.0)), DomainError);
}

TEST(SharpExponentsProperty, DenominatorIdentity) {
    for (const auto& pp : sample_admissible(2000, 11)) {
        const auto e = sharp_exponents(pp);
        EXPECT_NEAR(e.denominator, e.denominator_expanded, 1e-12 * std::max(1.0, e.denominator));
        EXPECT_GT(e.denominator, 0.0);
    }
}

TEST(SharpExponentsProperty, MonotoneInIntegrability) {
    for (const auto& pp : sample_admissible(500, 12)) {
        const double a = sharp_exponents(pp).alpha_hat;
        const double q = pp.q().is_finite() ? pp.q().value() : 1e300;
        const double r = pp.r().is_finite() ? pp.r().value() : 1e300;
        // Larger q or r can leave the region through the lower band; only
        // admissible neighbours are compared.
        for (const auto& [nq, nr] : {std::pair<ExtendedReal, ExtendedReal>{2.0 * q, pp.r()}, {pp.q(), 2.0 * r}}) {
            if ((nq.is_finite() && !pp.q().is_finite()) || (nr.is_finite() && !pp.r().is_finite())) continue;
            if (!check_compatibility(RawParams{pp.p(), pp.n(), nq, nr}).admissible) continue;
            EXPECT_GE(sharp_exponents(pp.with_integrability(nq, nr)).alpha_hat, a - 1e-15);
        }
    }
}

TEST(SharpExponentsProperty, BoundedSourceLimit) {
    for (double p : {2.0, 2.5, 3.0, 4.0}) {
        const auto pp = ProblemParams::make(p, 2, 1e9, 1e9, 1.0);
        EXPECT_NEAR(sharp_exponents(pp).alpha_hat, 1.0 / (p - 1.0), 1e-7);
    }
}

TEST(SharpExponentsProperty, HeatFormula) {
    for (const auto& pp0 : sample_admissible(500, 13)) {
        const auto raw = RawParams{2.0, pp0.n(), pp0.q(), pp0.r()};
        if (!check_compatibility(raw).admissible) continue;
        const auto pp = ProblemParams::make(2.0, pp0.n(), pp0.q(), pp0.r());
        EXPECT_NEAR(sharp_exponents(pp).alpha_hat, 1.0 - pp.holder_band(), 1e-15);
    }
}

TEST(SharpExponentsProperty, SigmaIsOneExactlyForNonDegenerate) {
    for (const auto& pp : sample_admissible(2000, 14)) {
        const auto e = sharp_exponents(pp);
        if (pp.p() <= 2.0) {
            EXPECT_EQ(e.sigma, 1.0);
        } else {
            EXPECT_GT(e.sigma, 1.0);
        }
    }
}

TEST(Theta, HeatIsTwo) {
    const auto pp = ProblemParams::make(2.0, 2, 8.0, 8.0);
    for (double g : {0.0, 0.3, 5.0}) {
        for (double base : {0.01, 0.25, 0.9}) EXPECT_DOUBLE_EQ(theta(pp, g, base), 2.0);
    }
}

TEST(Theta, ZeroGradient) {
    const auto pp = ProblemParams::make(3.0, 3, 6.0, infinity, 1.0);
    EXPECT_NEAR(theta(pp, 0.0, 0.2), 2.0 - 0.25, 1e-14);
}

TEST(Theta, DegenerateValue) {
    const auto pp = ProblemParams::make(3.0, 3, 6.0, infinity, 1.0);
    const double expected = 2.0 - std::log(std::pow(0.1, 0.25) + 0.05) / std::log(0.1);
    EXPECT_NEAR(theta(pp, 0.05, 0.1), expected, 1e-14);
    EXPECT_NEAR(theta(pp, 0.05, 0.1), 1.787, 5e-4);
}

TEST(Theta, RejectsBadBase) {
    const auto pp = ProblemParams::make(2.0, 2, 8.0, 8.0);
    EXPECT_THROW(theta(pp, 0.1, 1.0), DomainError);
    EXPECT_THROW(theta(pp, -0.1, 0.5), DomainError);
}

TEST(ThetaProperty, MonotoneInGradient) {
    for (const auto& pp : sample_admissible(300, 15)) {
        double prev = theta(pp, 0.0, 0.25);
        for (int i = 1; i <= 20; ++i) {
            const double cur = theta(pp, 0.05 * i, 0.25);
            if (pp.p() < 2.0) EXPECT_LE(cur, prev + 1e-14);
            if (pp.p() > 2.0) EXPECT_GE(cur, prev - 1e-14);
            if (pp.p() == 2.0) EXPECT_EQ(cur, prev);
            prev = cur;
        }
    }
}

// Only gradients with rho^alpha + g <= 1 are covered: beyond that the
// logarithm changes sign and the product drops below 2.
TEST(ThetaProperty, CorrectedProductAtLeastTwoInSmallGradientRegime) {
    for (const auto& pp : sample_admissible(2000, 16)) {
        const auto e = sharp_exponents(pp);
        for (double rho : {0.125, 0.25}) {
            for (int i = 0; i <= 20; ++i) {
                const double g = 0.05 * i;
                if (std::pow(rho, e.alpha) + g > 1.0) continue;
                EXPECT_GE(e.sigma * theta(pp, g, rho), 2.0 - 1e-12);
            }
        }
    }
}

TEST(ThetaBounds, HeatCollapses) {
    const auto b = theta_bounds(ProblemParams::make(2.0, 2, 8.0, 8.0));
    EXPECT_EQ(b.lower, 2.0);
    EXPECT_EQ(b.upper, 2.0);
    EXPECT_FALSE(b.degenerate_closed_form);
}

TEST(ThetaBounds, DegenerateClosedFormAgrees) {
    const auto b = theta_bounds(ProblemParams::make(4.0, 2, 8.0, 8.0, 1.0));
    const double ah = 0.5 / 2.75;
    EXPECT_NEAR(b.lower, 2.0 - 2.0 * ah, 1e-12);
    EXPECT_NEAR(b.lower, 1.636, 1e-3);
    ASSERT_TRUE(b.degenerate_closed_form);
    EXPECT_NEAR(*b.degenerate_closed_form, b.lower, 1e-12);
}

TEST(ThetaBoundsProperty, SingularWithinTwoAndThree) {
    for (const auto& pp : sample_admissible(3000, 17, 2.0)) {
        const auto b = theta_bounds(pp);
        EXPECT_GE(b.lower, 2.0);
        EXPECT_LE(b.upper, 3.0 + 1e-12);
    }
}

TEST(KappaMu, HeatBoundedSource) {
    const auto km = kappa_mu(ProblemParams::make(2.0, 2, infinity, infinity), 1.0, 0.1, 0.0, 0.0);
    EXPECT_DOUBLE_EQ(km.kappa, 3.0);
    EXPECT_EQ(km.mu_max, 1.0);
}

TEST(KappaMu, DegenerateValueOnBorderline) {
    // n/q + 2/r = 1 here, so only the bare formula applies.
    const RawParams raw{3.0, 3, 6.0, 4.0};
    EXPECT_FALSE(check_compatibility(raw).admissible);
    EXPECT_NEAR(kappa_formula(raw, 0.5), 1.625, 1e-15);
    EXPECT_THROW(kappa_mu(ProblemParams::make(3.0, 3, 6.0, 4.0, 1.0), 0.5, 0.1, 0.0, 0.0), DomainError);
}

TEST(KappaMu, RearrangedFormExceedsBySOverR) {
    const auto km = kappa_mu(ProblemParams::make(3.0, 3, 8.0, 5.0, 1.0), 0.5, 0.1, 0.0, 0.0);
    EXPECT_NEAR(km.kappa, kappa_formula(RawParams{3.0, 3, 8.0, 5.0}, 0.5), 1e-15);
    EXPECT_NEAR(km.kappa_rearranged - km.kappa, 0.5 / 5.0, 1e-15);
}

TEST(KappaMu, ThreeTermMinimum) {
    // p = 2, n = 1, q = inf, r = 3 gives kappa = 2 at s = 1.
    const auto pp = ProblemParams::make(2.0, 1, infinity, 3.0);
    const auto km = kappa_mu(pp, 1.0, 1.0, 4.0, 16.0);
    EXPECT_NEAR(km.kappa, 2.0, 1e-15);
    EXPECT_NEAR(km.mu_max, 0.25, 1e-15);
}

TEST(KappaMuProperty, Positive) {
    for (const auto& pp : sample_admissible(2000, 18)) {
        for (double s : {0.01, 0.5, 1.0, 3.0}) EXPECT_GT(kappa_mu(pp, s, 0.1, 1.0, 1.0).kappa, 0.0);
    }
}

TEST(EpsilonLayers, DegenerateSweepVanishes) {
    const auto pp = ProblemParams::make(3.0, 2, 8.0, 8.0, 1.0);
    double prev = 1.0;
    double prev_closed = 1.0;
    for (double eps : {0.3, 0.1, 0.03, 0.01, 0.001}) {
        const auto rep = epsilon_layers(pp, LayerBranch::degenerate, 0.5, eps);
        EXPECT_NEAR(pp.n() / rep.q + 2.0 / rep.r, 1.0 - eps, 1e-12);
        const double oracle = eps / ((pp.p() - 1.0) * (1.0 - 1.0 / rep.r) + 1.0 / rep.r);
        EXPECT_NEAR(rep.alpha_eps, oracle, 1e-12);
        EXPECT_LT(rep.alpha_eps, prev);
        ASSERT_TRUE(rep.closed_form);
        EXPECT_LT(*rep.closed_form, prev_closed);
        prev = rep.alpha_eps;
        prev_closed = *rep.closed_form;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(EpsilonLayers, SingularSweepReachesHomogeneousExponent) {
    const auto pp = ProblemParams::make(1.5, 1, infinity, 4.0, 0.9);
    double prev = 0.0;
    for (double eps : {0.2, 0.1, 0.05, 0.01, 0.001}) {
        const auto rep = epsilon_layers(pp, LayerBranch::singular, 0.5, eps);
        ASSERT_TRUE(rep.varsigma);
        EXPECT_NEAR(*rep.varsigma, eps, 1e-12);
        EXPECT_GE(rep.alpha_eps, prev - 1e-15);
        prev = rep.alpha_eps;
    }
    EXPECT_DOUBLE_EQ(prev, 0.9);
}

TEST(EpsilonLayers, SingularBranchNeedsSingularP) {
    const auto pp = ProblemParams::make(3.0, 2, 8.0, 8.0, 1.0);
    EXPECT_THROW(epsilon_layers(pp, LayerBranch::singular, 0.5, 0.1), DomainError);
}

TEST(AdmissibleRegion, ClassificationMatchesCompatibility) {
    const auto scan = admissible_region(1.5, 2, 12);
    ASSERT_EQ(scan.samples.size(), 144u);
    for (const auto& s : scan.samples) {
        EXPECT_EQ(s.report.admissible, check_compatibility(RawParams{1.5, 2, s.q, s.r}).admissible);
    }
}

TEST(AdmissibleRegion, LowerCurveOnlyBelowTwo) {
    EXPECT_TRUE(admissible_region(2.0, 2, 10).lower_curve.empty());
    EXPECT_TRUE(admissible_region(3.0, 2, 10).lower_curve.empty());
    EXPECT_FALSE(admissible_region(1.5, 2, 10).lower_curve.empty());
}

TEST(AdmissibleRegion, SingularContainsModeratePoint) {
    const auto scan = admissible_region(1.5, 2, 20);
    std::size_t admissible = 0;
    for (const auto& s : scan.samples) admissible += s.report.admissible;
    EXPECT_GT(admissible, 0u);
    EXPECT_TRUE(check_compatibility(RawParams{1.5, 2, 8.0, 8.0}).admissible);
}

TEST(AdmissibleRegion, CsvHeader) {
    const auto csv = region_csv(admissible_region(2.0, 1, 3));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "q,r,n_over_q_plus_2_over_r,admissible,violation");
}
