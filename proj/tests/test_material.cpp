#include <doctest.h>

#include <cmath>

#include "chb/material.hpp"
#include "test_support.hpp"

using namespace chb;

namespace {

// Central finite difference of a scalar function of one coordinate.
template <typename F>
double central_fd(F f, double h) {
    return (f(h) - f(-h)) / (2.0 * h);
}

bool close_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * (1.0 + std::abs(a)); }

}  // namespace

TEST_SUITE("material") {

TEST_CASE("interpolation weight: clamped cubic values and derivatives") {
    CHECK(pi_interp(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(pi_interp(-1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pi_interp(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pi_interp(-2.5) == 0.0);
    CHECK(pi_interp(7.0) == 1.0);
    CHECK(pi_interp(0.5) == doctest::Approx(0.25 * (2.0 + 1.5 - 0.125)).epsilon(1e-15));

    CHECK(pi_interp_d1(0.0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(pi_interp_d1(1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pi_interp_d1(-1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pi_interp_d1(-3.0) == 0.0);
    CHECK(pi_interp_d1(3.0) == 0.0);
    CHECK(pi_interp_d2(0.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pi_interp_d2(0.5) == doctest::Approx(-0.75).epsilon(1e-15));
    CHECK(pi_interp_d2(-0.5) == doctest::Approx(0.75).epsilon(1e-15));

    // first derivative matches a finite difference away from the junctions
    for (double x : {-0.9, -0.4, 0.0, 0.3, 0.8}) {
        const double fd = central_fd([&](double h) { return pi_interp(x + h); }, 1e-6);
        CHECK(pi_interp_d1(x) == doctest::Approx(fd).epsilon(1e-8));
    }
}

TEST_CASE("coefficients hit the phase endpoint tables and clamp beyond them") {
    const MaterialParams p;  // reference two-phase set
    const Coeffs cm = coeffs_at(-1.0, p);
    CHECK(cm.kappa == 1.0);
    CHECK(cm.M == 1.0);
    CHECK(cm.alpha == 1.0);
    CHECK(cm.C(0, 0) == 4.0);
    CHECK(cm.C(0, 1) == 2.0);
    CHECK(cm.C(2, 2) == 8.0);
    CHECK(cm.Cnu(0, 0) == 1.0);
    CHECK(cm.Cnu(2, 2) == 2.0);

    const Coeffs cp = coeffs_at(1.0, p);
    CHECK(cp.kappa == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(cp.M == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(cp.alpha == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(cp.C(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cp.C(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(cp.C(2, 2) == doctest::Approx(2.0).epsilon(1e-15));

    // clamped outside [-1, 1]
    const Coeffs far = coeffs_at(-9.0, p);
    CHECK(far.kappa == cm.kappa);
    CHECK(far.C(2, 2) == cm.C(2, 2));
    const Coeffs far2 = coeffs_at(9.0, p);
    CHECK(far2.M == cp.M);

    // midpoint: pi(0) = 1/2 -> arithmetic mean of the endpoint tables
    const Coeffs mid = coeffs_at(0.0, p);
    CHECK(mid.kappa == doctest::Approx(0.55).epsilon(1e-15));
    CHECK(mid.M == doctest::Approx(0.55).epsilon(1e-15));
    CHECK(mid.alpha == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(mid.C(0, 0) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(mid.C(0, 1) == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(mid.C(2, 2) == doctest::Approx(5.0).epsilon(1e-15));

    // affine in the weight: value at pi = w equals (1-w)*table(-1) + w*table(+1)
    for (double phi : {-0.7, -0.2, 0.4, 0.9}) {
        const double w = pi_interp(phi);
        const Coeffs c = coeffs_at(phi, p);
        CHECK(c.kappa == doctest::Approx((1 - w) * 1.0 + w * 0.1).epsilon(1e-14));
        CHECK(c.alpha == doctest::Approx((1 - w) * 1.0 + w * 0.5).epsilon(1e-14));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(c.C(i, j) ==
                      doctest::Approx((1 - w) * p.C_m1(i, j) + w * p.C_p1(i, j)).epsilon(1e-14));
    }
}

TEST_CASE("coefficient derivatives follow the interpolation weight") {
    const MaterialParams p;
    const CoeffDerivs d0 = coeff_derivs_at(0.0, p);
    CHECK(d0.dM == doctest::Approx(0.75 * (0.1 - 1.0)).epsilon(1e-14));
    CHECK(d0.dalpha == doctest::Approx(0.75 * (0.5 - 1.0)).epsilon(1e-14));
    CHECK(d0.d2M == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(d0.dC(0, 0) == doctest::Approx(0.75 * (1.0 - 4.0)).epsilon(1e-14));

    const CoeffDerivs dh = coeff_derivs_at(0.5, p);
    CHECK(dh.d2M == doctest::Approx(-0.75 * (0.1 - 1.0)).epsilon(1e-14));
    CHECK(dh.d2alpha == doctest::Approx(-0.75 * (0.5 - 1.0)).epsilon(1e-14));

    // flat outside the transition band
    const CoeffDerivs dout = coeff_derivs_at(1.5, p);
    CHECK(dout.dM == 0.0);
    CHECK(dout.d2C(1, 1) == 0.0);
}

TEST_CASE("double-well potential and its convex-concave split") {
    const PotentialSplit pot = PotentialSplit::quartic_double_well();
    CHECK(pot.psi(0.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(pot.psi(1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pot.psi(-1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pot.psi(2.0) == doctest::Approx(2.25).epsilon(1e-15));

    // split derivative recombines to psi' = x^3 - x
    for (double x = -2.0; x <= 2.0; x += 0.125) {
        CHECK(pot.dpsi_vex(x) + pot.dpsi_cav(x) ==
              doctest::Approx(x * x * x - x).epsilon(1e-14));
        CHECK(pot.d2psi_vex(x) == doctest::Approx(3.0 * x * x).epsilon(1e-14));
    }
    CHECK(pot.dpsi_vex(2.0) == 8.0);
    CHECK(pot.dpsi_cav(2.0) == -2.0);

    const MaterialParams p;
    CHECK(psi_terms(2.0, 2.0, p) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(psi_terms(1.0, -1.0, p) == doctest::Approx(2.0).epsilon(1e-15));  // 1 + 1

    // the split's stability inequality:
    //   psi(b) - psi(a) <= (dpsi_vex(b) + dpsi_cav(a)) (b - a)
    for (int i = 0; i < 200; ++i) {
        const double a = testsupport::uniform(-1.5, 1.5);
        const double b = testsupport::uniform(-1.5, 1.5);
        const double lhs = pot.psi(b) - pot.psi(a);
        const double rhs = (pot.dpsi_vex(b) + pot.dpsi_cav(a)) * (b - a);
        CHECK(lhs <= rhs + 1e-12 * (1.0 + std::abs(rhs)));
    }
}

TEST_CASE("mobility law") {
    MobilitySpec constant;
    CHECK(constant(0.0) == 1.0);
    CHECK(constant(17.0) == 1.0);
    CHECK_FALSE(constant.phi_dependent());
    constant.value = 0.3;
    CHECK(constant(-2.0) == 0.3);

    MobilitySpec degen;
    degen.kind = MobilitySpec::Kind::Degenerate;
    CHECK(degen.phi_dependent());
    CHECK(degen(1.0) == doctest::Approx(1e-14).epsilon(1e-15));
    CHECK(degen(-1.0) == doctest::Approx(1e-14).epsilon(1e-15));
    CHECK(degen(0.0) == doctest::Approx(1.0 / 16.0 + 1e-14).epsilon(1e-15));
    CHECK(degen(0.5) == doctest::Approx((1.0 / 16.0) * 0.5625 + 1e-14).epsilon(1e-14));

    MaterialParams p;
    CHECK(mobility_at(0.2, p) == 1.0);
    p.mobility = degen;
    CHECK(mobility_at(1.0, p) == doctest::Approx(1e-14).epsilon(1e-15));
}

TEST_CASE("source terms and body force") {
    SourceSpec zero;
    CHECK(zero.is_zero());
    CHECK(zero.eval(0.3, {1.0, 2.0, 3.0}, 4.0) == 0.0);

    SourceSpec c;
    c.kind = SourceSpec::Kind::Constant;
    c.value = 2.0;
    CHECK_FALSE(c.is_zero());
    CHECK(c.eval(-0.5, {0, 0, 0}, 9.0) == 2.0);
    c.value = 0.0;
    CHECK(c.is_zero());

    SourceSpec logi;
    logi.kind = SourceSpec::Kind::LogisticPhi;
    logi.value = 2.5;
    CHECK(logi.eval(0.0, {0, 0, 0}, 0.0) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(logi.eval(1.0, {0, 0, 0}, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(logi.eval(-1.0, {0, 0, 0}, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(logi.eval(0.5, {0, 0, 0}, 0.0) == doctest::Approx(2.5 * 0.75).epsilon(1e-15));

    BodyForceSpec f0;
    CHECK(f0.is_zero());
    CHECK(f0.eval(0.2, 0.7, 1.0) == std::array<double, 2>{0.0, 0.0});
    BodyForceSpec fc;
    fc.kind = BodyForceSpec::Kind::Constant;
    fc.value = {3.0, -1.0};
    CHECK_FALSE(fc.is_zero());
    CHECK(fc.eval(0.0, 0.0, 5.0) == std::array<double, 2>{3.0, -1.0});

    MaterialParams p;
    p.source_r = logi;
    p.source_s = c;  // value 0 -> zero
    const std::array<double, 2> rs = sources_at(0.0, {0, 0, 0}, 0.0, p);
    CHECK(rs[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(rs[1] == 0.0);
}

TEST_CASE("voigt matrix algebra and definiteness probes") {
    const Voigt3x3 a = Voigt3x3::from_rows({1, 2, 0}, {2, 1, 0}, {0, 0, 1});
    const Voigt3 v = a.apply({1.0, 1.0, 0.0});
    CHECK(v[0] == 3.0);
    CHECK(v[1] == 3.0);
    CHECK(v[2] == 0.0);
    CHECK(a.quad({1.0, 1.0, 0.0}) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(a.quad({1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(a.symmetric());
    CHECK_FALSE(a.positive_definite());  // eigenvalues 3, -1, 1
    CHECK_FALSE(a.positive_semidefinite());

    const MaterialParams p;
    CHECK(p.C_m1.positive_definite());
    CHECK(p.C_p1.positive_definite());
    CHECK(p.Cnu_m1.positive_definite());
    CHECK(Voigt3x3::zero().positive_semidefinite());
    CHECK_FALSE(Voigt3x3::zero().positive_definite());

    Voigt3x3 asym = Voigt3x3::zero();
    asym(0, 1) = 1.0;
    CHECK_FALSE(asym.symmetric());

    const Voigt3x3 sum = a + a;
    CHECK(sum(0, 1) == 4.0);
    const Voigt3x3 diff = a - a;
    CHECK(diff(2, 2) == 0.0);
    const Voigt3x3 sc = 2.5 * a;
    CHECK(sc(1, 0) == 5.0);
}

TEST_CASE("eigenstrain evaluations") {
    MaterialParams p;  // scale 0.3, shift 0
    const Voigt3 t = eigenstrain_voigt(0.5, p);
    CHECK(t[0] == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(t[1] == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(t[2] == 0.0);

    p.eigenstrain = {0.15, -1.0};
    const Voigt3 t2 = eigenstrain_voigt(1.0, p);
    CHECK(t2[0] == doctest::Approx(0.3).epsilon(1e-15));
    const Voigt3 t3 = eigenstrain_voigt(-1.0, p);
    CHECK(t3[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("reduced energy density: frozen closed-form values") {
    {
        MaterialParams p;
        p.eigenstrain.scale = 0.0;  // no swelling
        // phi = 1, strain = 0, theta = 1: only the fluid term M(1)/2 * 1^2
        CHECK(reduced_energy(1.0, {0, 0, 0}, 1.0, p) == doctest::Approx(0.05).epsilon(1e-14));
    }
    {
        const MaterialParams p;  // scale 0.3: T(1) = (0.3, 0.3, 0)
        // strain equal to the eigenstrain kills the elastic part;
        // G = theta - alpha(1) * tr(strain) = 1.3 - 0.5 * 0.6 = 1
        CHECK(reduced_energy(1.0, {0.3, 0.3, 0.0}, 1.3, p) ==
              doctest::Approx(0.05).epsilon(1e-14));
    }
    {
        const MaterialParams p;
        // phi = -1: C = C(-1), T = (-0.3,-0.3,0), alpha = 1, M = 1
        // strain (0.1, -0.2, 0.3): R = (0.4, -0.1 + 0.2... ) compute directly:
        const Voigt3 eps{0.1, -0.2, 0.3};
        const Voigt3 r{0.4, 0.1, 0.3};  // eps - T
        // R^T C R with C(-1) = [[4,2,0],[2,4,0],[0,0,8]]:
        // = 4*.16 + 4*.01 + 8*.09 + 2*2*(.4*.1) = .64+.04+.72+.16 = 1.56
        const double g = 2.0 - 1.0 * (0.1 - 0.2);  // theta=2, tr eps = -0.1 -> 2.1
        const double expect = 1.56 + 0.5 * g * g;
        CHECK(reduced_energy(-1.0, eps, 2.0, p) == doctest::Approx(expect).epsilon(1e-14));
        (void)r;
    }
}

TEST_CASE("analytic first derivatives match central differences at random states") {
    const MaterialParams p;
    const double h = 1e-5, tol = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        // stay clear of the C^1 junctions of the interpolation weight
        double phi = testsupport::uniform(-0.94, 0.94);
        if (std::abs(phi - 1.0) < 0.05 || std::abs(phi + 1.0) < 0.05)
            phi = 0.5 * phi;
        const Voigt3 eps{testsupport::uniform(-0.5, 0.5), testsupport::uniform(-0.5, 0.5),
                         testsupport::uniform(-0.5, 0.5)};
        const double theta = testsupport::uniform(-1.0, 1.0);

        const double dphi_fd = central_fd(
            [&](double d) { return reduced_energy(phi + d, eps, theta, p); }, h);
        CHECK(close_rel(wtilde_phi(phi, eps, theta, p), dphi_fd, tol));

        const Voigt3 deps = wtilde_strain(phi, eps, theta, p);
        for (int c = 0; c < 3; ++c) {
            const double fd = central_fd(
                [&](double d) {
                    Voigt3 e = eps;
                    e[c] += d;
                    return reduced_energy(phi, e, theta, p);
                },
                h);
            CHECK(close_rel(deps[c], fd, tol));
        }

        const double dth_fd = central_fd(
            [&](double d) { return reduced_energy(phi, eps, theta + d, p); }, h);
        CHECK(close_rel(wtilde_theta(phi, eps, theta, p), dth_fd, tol));
    }
}

TEST_CASE("analytic second derivatives match central differences of the first") {
    const MaterialParams p;
    const double h = 1e-5, tol = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        double phi = testsupport::uniform(-0.94, 0.94);
        if (std::abs(phi - 1.0) < 0.05 || std::abs(phi + 1.0) < 0.05)
            phi = 0.5 * phi;
        const Voigt3 eps{testsupport::uniform(-0.5, 0.5), testsupport::uniform(-0.5, 0.5),
                         testsupport::uniform(-0.5, 0.5)};
        const double theta = testsupport::uniform(-1.0, 1.0);

        const double dpp_fd =
            central_fd([&](double d) { return wtilde_phi(phi + d, eps, theta, p); }, h);
        CHECK(close_rel(wtilde_phi_phi(phi, eps, theta, p), dpp_fd, tol));

        const Voigt3 dpe = wtilde_phi_strain(phi, eps, theta, p);
        for (int c = 0; c < 3; ++c) {
            const double fd = central_fd(
                [&](double d) {
                    Voigt3 e = eps;
                    e[c] += d;
                    return wtilde_phi(phi, e, theta, p);
                },
                h);
            CHECK(close_rel(dpe[c], fd, tol));
        }

        const double dpt_fd =
            central_fd([&](double d) { return wtilde_phi(phi, eps, theta + d, p); }, h);
        CHECK(close_rel(wtilde_phi_theta(phi, eps, theta, p), dpt_fd, tol));
    }
}

TEST_CASE("gauss rule on [0,1]: known nodes, positivity, exact degrees") {
    const GaussRule01& g1 = gauss_rule_01(1);
    REQUIRE(g1.nodes.size() == 1);
    CHECK(g1.nodes[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g1.weights[0] == doctest::Approx(1.0).epsilon(1e-15));

    const GaussRule01& g2 = gauss_rule_01(2);
    REQUIRE(g2.nodes.size() == 2);
    CHECK(g2.nodes[0] == doctest::Approx((1.0 - 1.0 / std::sqrt(3.0)) / 2.0).epsilon(1e-14));
    CHECK(g2.nodes[1] == doctest::Approx((1.0 + 1.0 / std::sqrt(3.0)) / 2.0).epsilon(1e-14));
    CHECK(g2.weights[0] == doctest::Approx(0.5).epsilon(1e-14));

    for (int n = 1; n <= 12; ++n) {
        const GaussRule01& g = gauss_rule_01(n);
        REQUIRE(static_cast<int>(g.nodes.size()) == n);
        double wsum = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK(g.weights[i] > 0.0);
            if (i) CHECK(g.nodes[i] > g.nodes[i - 1]);
            CHECK(g.nodes[i] > 0.0);
            CHECK(g.nodes[i] < 1.0);
            wsum += g.weights[i];
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
        // exact for monomials up to degree 2n-1: integral of s^k is 1/(k+1)
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += g.weights[i] * std::pow(g.nodes[i], k);
            CHECK(acc == doctest::Approx(1.0 / (k + 1.0)).epsilon(1e-13));
        }
    }

    // n = 4 is NOT exact at degree 8 (the leading quadrature error survives)
    const GaussRule01& g4 = gauss_rule_01(4);
    double acc8 = 0.0;
    for (size_t i = 0; i < g4.nodes.size(); ++i)
        acc8 += g4.weights[i] * std::pow(g4.nodes[i], 8);
    const double err8 = std::abs(acc8 - 1.0 / 9.0);
    CHECK(err8 > 1e-6);
    CHECK(err8 < 1e-4);

    CHECK_THROWS_AS(gauss_rule_01(0), std::invalid_argument);
    CHECK_THROWS_AS(gauss_rule_01(33), std::invalid_argument);
}

TEST_CASE("time average with 4 gauss points is exact for a degree-5 path integrand") {
    // constant C and constant M but phi-dependent alpha: the integrand along
    // the straight path is a degree-5 polynomial in the path parameter.
    MaterialParams p;
    p.C_m1 = p.C_p1;
    p.M_m1 = p.M_p1 = 0.7;

    const double phi_old = -0.7, phi_new = 0.85;
    const Voigt3 eps{0.2, -0.1, 0.3};
    const double theta = 0.4;

    // independent oracle: 7-point closed Newton-Cotes on [0,1] (equispaced
    // nodes, rational weights), exact for polynomials of degree <= 7
    const double nc7[7] = {41.0 / 840.0, 216.0 / 840.0, 27.0 / 840.0, 272.0 / 840.0,
                           27.0 / 840.0, 216.0 / 840.0, 41.0 / 840.0};
    std::vector<double> samples(7);
    double exact = 0.0;
    for (int i = 0; i < 7; ++i) {
        const double s = i / 6.0;
        samples[i] = wtilde_phi(phi_old + s * (phi_new - phi_old), eps, theta, p);
        exact += nc7[i] * samples[i];
    }

    // degree probe via interpolation: the leading (degree-6) coefficient of the
    // interpolating polynomial through the samples vanishes
    testsupport::Dense vand = testsupport::dense_zero(7, 7);
    for (int i = 0; i < 7; ++i)
        for (int k = 0; k < 7; ++k) vand[i][k] = std::pow(i / 6.0, k);
    const std::vector<double> coef = testsupport::dense_solve(vand, samples);
    double coef_scale = 0.0;
    for (double c : coef) coef_scale = std::max(coef_scale, std::abs(c));
    CHECK(std::abs(coef[6]) < 1e-9 * (1.0 + coef_scale));

    const double avg = time_avg_wtilde_phi(phi_old, phi_new, eps, theta, 4, p);
    CHECK(avg == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("time average with 5 gauss points integrates the full degree-8 integrand") {
    const MaterialParams p;  // phi-dependent M, alpha, C: path degree 8
    const double phi_old = -0.6, phi_new = 0.9;
    const Voigt3 eps{0.15, -0.25, 0.2};
    const double theta = -0.8;

    // 9-point closed Newton-Cotes on [0,1]: exact for degree <= 9
    const double nc9_num[9] = {989.0,  5888.0, -928.0, 10496.0, -4540.0,
                               10496.0, -928.0, 5888.0, 989.0};
    double exact = 0.0;
    for (int i = 0; i < 9; ++i)
        exact += nc9_num[i] / 28350.0 *
                 wtilde_phi(phi_old + (i / 8.0) * (phi_new - phi_old), eps, theta, p);

    const double avg5 = time_avg_wtilde_phi(phi_old, phi_new, eps, theta, 5, p);
    CHECK(avg5 == doctest::Approx(exact).epsilon(1e-12));
    // 4 points miss the degree-8 tail but only barely
    const double avg4 = time_avg_wtilde_phi(phi_old, phi_new, eps, theta, 4, p);
    CHECK(std::abs(avg4 - exact) < 1e-5 * (1.0 + std::abs(exact)));
}

TEST_CASE("time-average derivatives match central differences") {
    const MaterialParams p;
    const double h = 1e-6, tol = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        const double phi_old = testsupport::uniform(-0.9, 0.9);
        const double phi_new = testsupport::uniform(-0.9, 0.9);
        const Voigt3 eps{testsupport::uniform(-0.5, 0.5), testsupport::uniform(-0.5, 0.5),
                         testsupport::uniform(-0.5, 0.5)};
        const double theta = testsupport::uniform(-1.0, 1.0);

        const double dnew_fd = central_fd(
            [&](double d) {
                return time_avg_wtilde_phi(phi_old, phi_new + d, eps, theta, 4, p);
            },
            h);
        CHECK(close_rel(time_avg_wtilde_phi_dnew(phi_old, phi_new, eps, theta, 4, p), dnew_fd,
                        tol));

        const Voigt3 ds = time_avg_wtilde_phi_dstrain(phi_old, phi_new, eps, theta, 4, p);
        for (int c = 0; c < 3; ++c) {
            const double fd = central_fd(
                [&](double d) {
                    Voigt3 e = eps;
                    e[c] += d;
                    return time_avg_wtilde_phi(phi_old, phi_new, e, theta, 4, p);
                },
                h);
            CHECK(close_rel(ds[c], fd, tol));
        }

        const double dth_fd = central_fd(
            [&](double d) {
                return time_avg_wtilde_phi(phi_old, phi_new, eps, theta + d, 4, p);
            },
            h);
        CHECK(close_rel(time_avg_wtilde_phi_dtheta(phi_old, phi_new, eps, theta, 4, p), dth_fd,
                        tol));
    }
}

TEST_CASE("time average degenerates to the pointwise derivative on a still path") {
    const MaterialParams p;
    const Voigt3 eps{0.1, 0.2, -0.3};
    const double avg = time_avg_wtilde_phi(0.4, 0.4, eps, 0.7, 4, p);
    CHECK(avg == doctest::Approx(wtilde_phi(0.4, eps, 0.7, p)).epsilon(1e-14));
}

TEST_CASE("material validation: hard violations throw, soft ones warn") {
    MaterialParams p;
    CHECK(validate_material(p, false).empty());

    MaterialParams chl = p;
    const std::vector<std::string> w1 = validate_material(chl, true);
    REQUIRE(w1.size() == 1);
    CHECK(w1[0].find("chl") != std::string::npos);

    MaterialParams degen = p;
    degen.mobility.kind = MobilitySpec::Kind::Degenerate;
    const std::vector<std::string> w2 = validate_material(degen, false);
    REQUIRE(w2.size() == 1);
    CHECK(w2[0].find("degenerate mobility") != std::string::npos);

    MaterialParams novisc = p;
    novisc.Cnu_m1 = Voigt3x3::zero();
    novisc.Cnu_p1 = Voigt3x3::zero();
    const std::vector<std::string> w3 = validate_material(novisc, false);
    CHECK(w3.size() == 2);  // one per endpoint matrix
    CHECK(w3[0].find("not positive definite") != std::string::npos);

    MaterialParams bad = p;
    bad.gamma = 0.0;
    CHECK_THROWS_AS(validate_material(bad, false), std::invalid_argument);
    bad = p;
    bad.kappa_p1 = -1.0;
    CHECK_THROWS_AS(validate_material(bad, false), std::invalid_argument);
    bad = p;
    bad.M_p1 = 0.0;
    CHECK_THROWS_AS(validate_material(bad, false), std::invalid_argument);
    CHECK_NOTHROW(validate_material(bad, true));  // M ignored in chl mode
    bad = p;
    bad.C_m1(0, 1) = 99.0;  // asymmetric
    CHECK_THROWS_AS(validate_material(bad, false), std::invalid_argument);
    bad = p;
    bad.C_p1 = Voigt3x3::from_rows({1, 2, 0}, {2, 1, 0}, {0, 0, 1});  // indefinite
    CHECK_THROWS_AS(validate_material(bad, false), std::invalid_argument);
    bad = p;
    bad.Cnu_m1 = Voigt3x3::from_rows({-1, 0, 0}, {0, 1, 0}, {0, 0, 1});
    CHECK_THROWS_AS(validate_material(bad, false), std::invalid_argument);
    bad = p;
    bad.mobility.value = 0.0;
    CHECK_THROWS_AS(validate_material(bad, false), std::invalid_argument);
    bad = p;
    bad.potential.dpsi_vex = nullptr;
    CHECK_THROWS_AS(validate_material(bad, false), std::invalid_argument);
}

}  // TEST_SUITE
