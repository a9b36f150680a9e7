#pragma once

#include "chb/assembly.hpp"
#include "chb/material.hpp"
#include "chb/state.hpp"

namespace chb {

struct EnergyBreakdown {
    double interface = 0.0;  // gamma/2 |grad phi|^2
    double potential = 0.0;  // int psi(phi)
    double elastic = 0.0;    // int (eps-T)^T C (eps-T)
    double fluid = 0.0;      // int M/2 (theta - alpha tr eps)^2

    double total() const { return interface + potential + elastic + fluid; }
};

struct StepRecord {
    double t = 0.0;
    EnergyBreakdown energy;
    double dissipation = 0.0;
    double production = 0.0;
    double energy_residual = 0.0;  // E_new - E_old + tau*(D - P), <= 0 up to solver error
    double mass_residual_phi = 0.0;
    double mass_residual_theta = 0.0;
    int newton_iters = 0;
    double linear_residual = 0.0;  // max-norm residual of the linear solve
};

EnergyBreakdown energy(const State& state, const MaterialParams& params,
                       int degree = kDefaultQuadDegree);

// <m(phi_old) grad mu, grad mu> + <Cnu(phi_old) strain(du_dt), strain(du_dt)>
// + <kappa(phi_old) grad p, grad p>
double dissipation_rate(const ScalarField& phi_old, const ScalarField& mu,
                        const VectorField& du_dt, const ScalarField& p,
                        const MaterialParams& params, int degree = kDefaultQuadDegree);

// <r, mu> + <f, du_dt> + <s, p> with densities evaluated pointwise exactly as
// the scheme assembles them.
double production_rate(const SimplicialMesh& mesh, const ScalarPointFn& r_density,
                       const ScalarPointFn& s_density, const VectorPointFn& f_density,
                       const ScalarField& mu, const VectorField& du_dt, const ScalarField& p,
                       int degree = kDefaultQuadDegree);

double energy_inequality_residual(double energy_new, double energy_old, double tau,
                                  double dissipation, double production);

// z with <m(phi_old) grad z, grad w> = <v, w> for all w and int z = 0, the
// gauge imposed through a Lagrange multiplier row. v must be mean-free.
ScalarField weighted_inverse_laplacian(const ScalarField& v, const ScalarField& phi_old,
                                       const MaterialParams& params,
                                       int degree = kDefaultQuadDegree);

// ||v||_{-1,m} = sqrt(<m grad z, grad z>) with z as above.
double h_minus1_m_norm(const ScalarField& v, const ScalarField& phi_old,
                       const MaterialParams& params, int degree = kDefaultQuadDegree);

}  // namespace chb
