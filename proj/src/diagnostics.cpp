#include "chb/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include "chb/sparse.hpp"

namespace chb {

EnergyBreakdown energy(const State& state, const MaterialParams& params, int degree) {
    const SimplicialMesh& mesh = *state.phi.mesh;
    const CellStrainField eps = strain(state.u);
    EnergyBreakdown e;
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const auto g = state.phi.gradient(cell);
        e.interface += 0.5 * params.gamma * cell_geometry(mesh, cell).area *
                       (g[0] * g[0] + g[1] * g[1]);
    }
    e.potential = integrate(
        mesh,
        [&](const QuadPoint& qp) { return params.potential.psi(state.phi.eval(qp.cell, qp.bary)); },
        degree);
    e.elastic = integrate(
        mesh,
        [&](const QuadPoint& qp) {
            const double phi = state.phi.eval(qp.cell, qp.bary);
            const Coeffs c = coeffs_at(phi, params);
            const Voigt3 T = eigenstrain_voigt(phi, params);
            const Voigt3& s = eps.voigt[qp.cell];
            const Voigt3 R{s[0] - T[0], s[1] - T[1], s[2] - T[2]};
            return c.C.quad(R);
        },
        degree);
    e.fluid = integrate(
        mesh,
        [&](const QuadPoint& qp) {
            const double phi = state.phi.eval(qp.cell, qp.bary);
            const Coeffs c = coeffs_at(phi, params);
            const double G =
                state.theta.eval(qp.cell, qp.bary) - c.alpha * eps.div(qp.cell);
            return 0.5 * c.M * G * G;
        },
        degree);
    return e;
}

double dissipation_rate(const ScalarField& phi_old, const ScalarField& mu,
                        const VectorField& du_dt, const ScalarField& p,
                        const MaterialParams& params, int degree) {
    const SimplicialMesh& mesh = *phi_old.mesh;
    const CellStrainField eps_rate = strain(du_dt);
    std::vector<std::array<double, 2>> grad_mu(mesh.n_cells()), grad_p(mesh.n_cells());
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        grad_mu[cell] = mu.gradient(cell);
        grad_p[cell] = p.gradient(cell);
    }
    return integrate(
        mesh,
        [&](const QuadPoint& qp) {
            const double phi = phi_old.eval(qp.cell, qp.bary);
            const Coeffs c = coeffs_at(phi, params);
            const double m = params.mobility(phi);
            const auto& gm = grad_mu[qp.cell];
            const auto& gp = grad_p[qp.cell];
            return m * (gm[0] * gm[0] + gm[1] * gm[1]) +
                   c.Cnu.quad(eps_rate.voigt[qp.cell]) +
                   c.kappa * (gp[0] * gp[0] + gp[1] * gp[1]);
        },
        degree);
}

double production_rate(const SimplicialMesh& mesh, const ScalarPointFn& r_density,
                       const ScalarPointFn& s_density, const VectorPointFn& f_density,
                       const ScalarField& mu, const VectorField& du_dt, const ScalarField& p,
                       int degree) {
    return integrate(
        mesh,
        [&](const QuadPoint& qp) {
            const auto f = f_density(qp);
            const auto v = du_dt.eval(qp.cell, qp.bary);
            return r_density(qp) * mu.eval(qp.cell, qp.bary) + f[0] * v[0] + f[1] * v[1] +
                   s_density(qp) * p.eval(qp.cell, qp.bary);
        },
        degree);
}

double energy_inequality_residual(double energy_new, double energy_old, double tau,
                                  double dissipation, double production) {
    return energy_new - energy_old + tau * (dissipation - production);
}

namespace {

CsrMatrix weighted_stiffness(const ScalarField& phi_old, const MaterialParams& params,
                             int degree) {
    return assemble_stiffness(
        *phi_old.mesh,
        [&](const QuadPoint& qp) { return params.mobility(phi_old.eval(qp.cell, qp.bary)); },
        degree);
}

}  // namespace

ScalarField weighted_inverse_laplacian(const ScalarField& v, const ScalarField& phi_old,
                                       const MaterialParams& params, int degree) {
    const SimplicialMesh& mesh = *v.mesh;
    const int n = mesh.n_vertices();
    const CsrMatrix M = assemble_mass(mesh);
    const std::vector<double> rhs_m = M.apply(v.values);

    double integral = 0.0, l2 = 0.0;
    for (int i = 0; i < n; ++i) integral += rhs_m[i];
    for (int i = 0; i < n; ++i) l2 += rhs_m[i] * v.values[i];
    l2 = std::sqrt(std::max(0.0, l2));
    if (std::abs(integral) > 1e-9 * std::max(1.0, l2))
        throw std::invalid_argument(
            "weighted_inverse_laplacian: field is not mean-free (integral " +
            std::to_string(integral) + ")");

    const CsrMatrix K = weighted_stiffness(phi_old, params, degree);
    const std::vector<double> lumped = M.apply(std::vector<double>(n, 1.0));

    // [K c; c^T 0][z; lambda] = [Mv; 0] imposes the zero-mean gauge exactly.
    std::vector<Triplet> t;
    t.reserve(K.values.size() + 2 * n);
    for (int r = 0; r < n; ++r)
        for (int k = K.row_offset[r]; k < K.row_offset[r + 1]; ++k)
            t.push_back({r, K.col_index[k], K.values[k]});
    for (int i = 0; i < n; ++i) {
        t.push_back({i, n, lumped[i]});
        t.push_back({n, i, lumped[i]});
    }
    const CsrMatrix A = CsrMatrix::from_triplets(n + 1, n + 1, std::move(t));
    std::vector<double> rhs = rhs_m;
    rhs.push_back(0.0);
    const std::vector<double> sol = solve_general(A, rhs);

    ScalarField z(v.mesh);
    for (int i = 0; i < n; ++i) z.values[i] = sol[i];
    return z;
}

double h_minus1_m_norm(const ScalarField& v, const ScalarField& phi_old,
                       const MaterialParams& params, int degree) {
    const ScalarField z = weighted_inverse_laplacian(v, phi_old, params, degree);
    const CsrMatrix K = weighted_stiffness(phi_old, params, degree);
    const std::vector<double> Kz = K.apply(z.values);
    double q = 0.0;
    for (size_t i = 0; i < Kz.size(); ++i) q += z.values[i] * Kz[i];
    return std::sqrt(std::max(0.0, q));
}

}  // namespace chb
