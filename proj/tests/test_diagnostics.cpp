#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "chb/assembly.hpp"
#include "chb/diagnostics.hpp"
#include "chb/fespace.hpp"
#include "chb/material.hpp"
#include "chb/mesh.hpp"
#include "chb/scheme.hpp"
#include "chb/state.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace chb;
using testsupport::Dense;

namespace {

MeshPtr lattice(int level) { return share(build_unit_square_mesh(level)); }

State zero_state(const MeshPtr& mesh, double phi_value = 0.0) {
    State s;
    s.t = 0.0;
    s.phi = ScalarField(mesh, phi_value);
    s.u = VectorField(mesh);
    s.theta = ScalarField(mesh);
    return s;
}

ScalarField random_mean_free(const MeshPtr& mesh) {
    ScalarField v(mesh);
    for (double& x : v.values) x = testsupport::uniform(-1.0, 1.0);
    // the unit square has area 1, so shifting by the mass zeroes the mean
    const double m = mass_of(v);
    for (double& x : v.values) x -= m;
    return v;
}

// largest value of the mobility over the mesh: on each cell the phase field is
// linear, and the quartic mobility attains its maximum over an interval at an
// endpoint or at the interior critical point phi = 0
double mobility_sup(const SimplicialMesh& mesh, const ScalarField& phi, const MobilitySpec& m) {
    if (!m.phi_dependent()) return m.value;
    double sup = 0.0;
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        double lo = phi.values[mesh.cells[cell][0]], hi = lo;
        for (int i = 1; i < 3; ++i) {
            lo = std::min(lo, phi.values[mesh.cells[cell][i]]);
            hi = std::max(hi, phi.values[mesh.cells[cell][i]]);
        }
        sup = std::max({sup, m(lo), m(hi)});
        if (lo <= 0.0 && 0.0 <= hi) sup = std::max(sup, m(0.0));
    }
    return sup;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("energy of constant states matches hand-computed values") {
    const MeshPtr mesh = lattice(2);
    MaterialParams params;

    SUBCASE("pure mixed phase carries only the potential") {
        const State s = zero_state(mesh, 0.0);
        const EnergyBreakdown e = energy(s, params);
        CHECK(e.interface == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(e.potential == doctest::Approx(0.25).epsilon(1e-13));
        CHECK(e.elastic == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(e.fluid == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(e.total() == doctest::Approx(0.25).epsilon(1e-13));
    }

    SUBCASE("unrelaxed eigenstrain of a pure phase is elastic energy") {
        // phi = 1, u = 0: the stress-free strain is 0.3*(1,1,0) and the
        // energy is (0.3,0.3,0) : C(1) : (0.3,0.3,0) = 0.27
        const State s = zero_state(mesh, 1.0);
        const EnergyBreakdown e = energy(s, params);
        CHECK(e.potential == doctest::Approx(0.0).epsilon(1e-13));
        CHECK(e.elastic == doctest::Approx(0.27).epsilon(1e-12));
        CHECK(e.fluid == doctest::Approx(0.0).epsilon(1e-14));
    }

    SUBCASE("fluid content of the stiff phase stores compression energy") {
        State s = zero_state(mesh, -1.0);
        s.theta = ScalarField(mesh, 0.5);
        const EnergyBreakdown e = energy(s, params);
        // eigenstrain -0.3*(1,1,0) against C(-1) gives 1.08, content 0.125
        CHECK(e.elastic == doctest::Approx(1.08).epsilon(1e-12));
        CHECK(e.fluid == doctest::Approx(0.125).epsilon(1e-13));
        CHECK(e.total() == doctest::Approx(1.205).epsilon(1e-12));
    }

    SUBCASE("uniaxial stretch against the blended midpoint material") {
        // phi = 0: C(0) = [[2.5,1.25,0],[1.25,2.5,0],[0,0,5]], alpha = 0.75,
        // M = 0.55; u = (x,0) has strain (1,0,0) and trace 1, theta = 2
        State s = zero_state(mesh, 0.0);
        for (int v = 0; v < mesh->n_vertices(); ++v)
            s.u.values[2 * v] = mesh->vertices[v][0];
        s.theta = ScalarField(mesh, 2.0);
        const EnergyBreakdown e = energy(s, params);
        CHECK(e.elastic == doctest::Approx(2.5).epsilon(1e-12));
        CHECK(e.fluid == doctest::Approx(0.55 / 2.0 * 1.25 * 1.25).epsilon(1e-12));
        CHECK(e.total() == doctest::Approx(3.1796875).epsilon(1e-12));
    }
}

TEST_CASE("energy of a linear phase profile integrates the blend exactly") {
    // phi(x,y) = x: interface gamma/2, potential int (1-x^2)^2/4 = 2/15,
    // elastic int 0.09 x^2 (12 - 9 pi(x)) = 0.106875 against the pi-blended
    // tensor, fluid int M(pi(x))/2 y^2 = 43/960 -- all are polynomial
    // integrands within reach of the default quadrature
    const MeshPtr mesh = lattice(3);
    MaterialParams params;
    State s = zero_state(mesh);
    s.phi = interpolate_nodal([](double x, double) { return x; }, mesh);
    s.theta = interpolate_nodal([](double, double y) { return y; }, mesh);
    const EnergyBreakdown e = energy(s, params);
    CHECK(e.interface == doctest::Approx(0.5e-4).epsilon(1e-13));
    CHECK(e.potential == doctest::Approx(2.0 / 15.0).epsilon(1e-13));
    CHECK(e.elastic == doctest::Approx(0.106875).epsilon(1e-12));
    CHECK(e.fluid == doctest::Approx(43.0 / 960.0).epsilon(1e-12));
}

TEST_CASE("energy matches a dense quadrature walk on random fields") {
    const MeshPtr mesh = lattice(2);
    MaterialParams params;
    const int degree = 6;

    State s = zero_state(mesh);
    for (double& v : s.phi.values) v = testsupport::uniform(-1.2, 1.2);
    for (double& v : s.theta.values) v = testsupport::uniform(-1.0, 1.0);
    for (double& v : s.u.values) v = testsupport::uniform(-0.2, 0.2);

    const CellStrainField eps = strain(s.u);
    const QuadRule& rule = quad_rule_for_degree(degree);
    double interface = 0.0, potential = 0.0, elastic = 0.0, fluid = 0.0;
    for (int cell = 0; cell < mesh->n_cells(); ++cell) {
        const CellGeometry g = cell_geometry(*mesh, cell);
        const auto& vx = mesh->cells[cell];
        double gx = 0.0, gy = 0.0;
        for (int i = 0; i < 3; ++i) {
            gx += s.phi.values[vx[i]] * g.grad[i][0];
            gy += s.phi.values[vx[i]] * g.grad[i][1];
        }
        interface += params.gamma / 2.0 * g.area * (gx * gx + gy * gy);
        for (int q = 0; q < rule.n_points(); ++q) {
            const QuadPoint qp = testsupport::quad_point_at(*mesh, cell, rule.bary[q]);
            const double w = rule.weights[q] * g.area;
            const double ph = s.phi.eval(cell, rule.bary[q]);
            const Coeffs co = coeffs_at(ph, params);
            potential += w * params.potential.psi(ph);
            const Voigt3 t = eigenstrain_voigt(ph, params);
            const Voigt3 r{eps.voigt[cell][0] - t[0], eps.voigt[cell][1] - t[1],
                           eps.voigt[cell][2] - t[2]};
            elastic += w * co.C.quad(r);
            const double trace = eps.voigt[cell][0] + eps.voigt[cell][1];
            const double content = s.theta.eval(cell, rule.bary[q]) - co.alpha * trace;
            fluid += w * co.M / 2.0 * content * content;
            (void)qp;
        }
    }
    const EnergyBreakdown e = energy(s, params, degree);
    CHECK(e.interface == doctest::Approx(interface).epsilon(1e-12));
    CHECK(e.potential == doctest::Approx(potential).epsilon(1e-12));
    CHECK(e.elastic == doctest::Approx(elastic).epsilon(1e-12));
    CHECK(e.fluid == doctest::Approx(fluid).epsilon(1e-12));
}

TEST_CASE("dissipation rate adds its three weighted seminorms") {
    // phi = 0 fixes the weights: mobility 1, Cnu(0) with block [[1,.5],[.5,1]]
    // and shear 2, kappa(0) = 0.55; mu = x and p = x contribute their unit
    // gradients, du = (x,y) has strain (1,1,0) against Cnu giving 3
    const MeshPtr mesh = lattice(2);
    MaterialParams params;
    const ScalarField phi(mesh, 0.0);
    const ScalarField mu = interpolate_nodal([](double x, double) { return x; }, mesh);
    const ScalarField p = mu;
    VectorField du(mesh);
    for (int v = 0; v < mesh->n_vertices(); ++v) {
        du.values[2 * v] = mesh->vertices[v][0];
        du.values[2 * v + 1] = mesh->vertices[v][1];
    }
    CHECK(dissipation_rate(phi, mu, du, p, params) == doctest::Approx(4.55).epsilon(1e-12));

    SUBCASE("each contribution can be isolated") {
        const ScalarField zero(mesh);
        const VectorField zero_u(mesh);
        CHECK(dissipation_rate(phi, mu, zero_u, zero, params) ==
              doctest::Approx(1.0).epsilon(1e-12));
        CHECK(dissipation_rate(phi, zero, du, zero, params) ==
              doctest::Approx(3.0).epsilon(1e-12));
        CHECK(dissipation_rate(phi, zero, zero_u, p, params) ==
              doctest::Approx(0.55).epsilon(1e-12));
    }

    SUBCASE("degenerate mobility reweights the chemical term") {
        MaterialParams degen = params;
        degen.mobility = MobilitySpec{MobilitySpec::Kind::Degenerate};
        const VectorField zero_u(mesh);
        const ScalarField zero(mesh);
        // m(0) = 1/16 + 1e-14
        CHECK(dissipation_rate(phi, mu, zero_u, zero, degen) ==
              doctest::Approx(1.0 / 16.0 + 1e-14).epsilon(1e-12));
    }
}

TEST_CASE("production rate pairs sources with their conjugate fields") {
    const MeshPtr mesh = lattice(2);
    const ScalarField mu(mesh, 1.0);
    const ScalarField p = interpolate_nodal([](double x, double) { return x; }, mesh);
    VectorField du(mesh);
    for (int v = 0; v < mesh->n_vertices(); ++v) du.values[2 * v] = 2.0;

    const auto one = [](const QuadPoint&) { return 1.0; };
    const auto zero = [](const QuadPoint&) { return 0.0; };
    const auto f = [](const QuadPoint&) { return std::array<double, 2>{1.0, 0.0}; };
    const auto f0 = [](const QuadPoint&) { return std::array<double, 2>{0.0, 0.0}; };

    CHECK(production_rate(*mesh, one, one, f, mu, du, p) == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(production_rate(*mesh, one, zero, f0, mu, du, p) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(production_rate(*mesh, zero, one, f0, mu, du, p) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(production_rate(*mesh, zero, zero, f, mu, du, p) ==
          doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("energy inequality residual is the signed balance gap") {
    CHECK(energy_inequality_residual(1.0, 2.0, 0.1, 3.0, 1.0) ==
          doctest::Approx(-0.8).epsilon(1e-15));
    CHECK(energy_inequality_residual(2.0, 2.0, 0.5, 0.0, 4.0) ==
          doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("weighted inverse laplacian solves the gauged dual problem") {
    const MeshPtr mesh = lattice(2);
    MaterialParams params;
    const ScalarField phi = interpolate_nodal(
        [](double x, double y) { return 0.5 * std::sin(2.0 * M_PI * x) * std::cos(M_PI * y); },
        mesh);
    const ScalarField v = random_mean_free(mesh);

    const ScalarField z = weighted_inverse_laplacian(v, phi, params);
    CHECK(std::abs(mass_of(z)) <= 1e-9);

    // the multiplier vanishes for compatible data, so K_m z = M v exactly
    const Dense k_m = testsupport::dense_weighted_stiffness(
        *mesh, [&](const QuadPoint& qp) { return params.mobility(phi.eval(qp.cell, qp.bary)); },
        6);
    const Dense m_plain =
        testsupport::dense_weighted_mass(*mesh, [](const QuadPoint&) { return 1.0; }, 2);
    const std::vector<double> lhs = testsupport::dense_apply(k_m, z.values);
    const std::vector<double> rhs = testsupport::dense_apply(m_plain, v.values);
    double scale = 1.0;
    for (double r : rhs) scale = std::max(scale, std::abs(r));
    for (size_t i = 0; i < lhs.size(); ++i) CHECK(std::abs(lhs[i] - rhs[i]) <= 1e-10 * scale);

    SUBCASE("the induced norm squares to the duality pairing") {
        const double norm = h_minus1_m_norm(v, phi, params);
        CHECK(norm * norm == doctest::Approx(dot(z.values, rhs)).epsilon(1e-10));
    }

    SUBCASE("the solve is linear and the norm homogeneous") {
        ScalarField v2 = v;
        for (double& x : v2.values) x *= -3.0;
        const ScalarField z2 = weighted_inverse_laplacian(v2, phi, params);
        for (size_t i = 0; i < z.values.size(); ++i)
            CHECK(z2.values[i] == doctest::Approx(-3.0 * z.values[i]).epsilon(1e-9));
        CHECK(h_minus1_m_norm(v2, phi, params) ==
              doctest::Approx(3.0 * h_minus1_m_norm(v, phi, params)).epsilon(1e-10));
    }

    SUBCASE("fields with nonzero mean are rejected") {
        const ScalarField ones(mesh, 1.0);
        CHECK_THROWS_AS(weighted_inverse_laplacian(ones, phi, params), std::invalid_argument);
        CHECK_THROWS_AS(h_minus1_m_norm(ones, phi, params), std::invalid_argument);
    }
}

TEST_CASE("interpolation inequality bounds the mass norm by its neighbours") {
    // || v ||_0^2 <= sup(sqrt m) * || v ||_{-1,m} * || grad v ||_0 for every
    // mean-free nodal field; exercised with a constant and a degenerate
    // mobility on three refinement levels
    MaterialParams constant_m;
    MaterialParams degenerate_m;
    degenerate_m.mobility = MobilitySpec{MobilitySpec::Kind::Degenerate};
    degenerate_m.mobility.floor = 0.01;

    for (int level = 2; level <= 4; ++level) {
        const MeshPtr mesh = lattice(level);
        const ScalarField phi = interpolate_nodal(
            [](double x, double y) {
                return 0.9 * std::sin(2.0 * M_PI * x) * std::sin(M_PI * y);
            },
            mesh);
        const CsrMatrix mass = assemble_mass(*mesh);
        const CsrMatrix stiff = assemble_stiffness(*mesh, 1.0);
        const int fields = 34;  // ~100 trials across the three levels
        for (int trial = 0; trial < fields; ++trial) {
            const ScalarField v = random_mean_free(mesh);
            for (const MaterialParams* params : {&constant_m, &degenerate_m}) {
                const double l2_sq = dot(v.values, mass.apply(v.values));
                const double h1 = std::sqrt(dot(v.values, stiff.apply(v.values)));
                const double dual = h_minus1_m_norm(v, phi, *params);
                const double sup = mobility_sup(*mesh, phi, params->mobility);
                CHECK(l2_sq <= std::sqrt(sup) * dual * h1 * (1.0 + 1e-12));
            }
        }
    }
}

TEST_CASE("step records from a run close the energy balance") {
    // a short run with sources on: the recorded residual must stay at the
    // solver floor and reproduce E_new - E_old + tau (D - P)
    const MeshPtr mesh = lattice(2);
    State state;
    state.t = 0.0;
    state.phi = interpolate_nodal(
        [](double x, double y) {
            return -0.1 + 0.01 * std::sin(2.0 * M_PI * x) * std::sin(2.0 * M_PI * y);
        },
        mesh);
    state.u = VectorField(mesh);
    state.theta = ScalarField(mesh);
    MaterialParams params;
    params.source_r = SourceSpec{SourceSpec::Kind::Constant, 0.1};
    SchemeConfig cfg;
    cfg.tau = 1e-5;

    double e_prev = energy(state, params).total();
    RunSinks sinks;
    sinks.on_step = [&](int, const StepResult& sr) {
        const double expected = energy_inequality_residual(
            sr.record.energy.total(), e_prev, cfg.tau, sr.record.dissipation,
            sr.record.production);
        CHECK(sr.record.energy_residual == doctest::Approx(expected).epsilon(1e-12));
        CHECK(sr.record.energy_residual <= kEnergyResidualTol * (1.0 + std::abs(e_prev)));
        e_prev = sr.record.energy.total();
    };
    run(state, params, cfg, 5 * cfg.tau, sinks);
}

}  // TEST_SUITE
