#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "chb/diagnostics.hpp"
#include "chb/material.hpp"
#include "chb/state.hpp"

namespace chb {

// Structure-check thresholds: per-step/cumulative mass-balance residuals
// relative to (1 + |initial mass|), per-step energy-inequality residual
// relative to (1 + |E^n|).
constexpr double kMassResidualTol = 1e-11;
constexpr double kEnergyResidualTol = 1e-8;

struct SchemeConfig {
    double tau = 1e-5;
    double newton_tol = 1e-10;   // absolute l2 norm of the stacked residual
    int newton_max_iter = 30;
    int time_avg_points = 4;     // Gauss points along the phi path
    int quad_degree = 6;
    bool chl_mode = false;       // force compressibility to zero (p = 0)
    int monolithic_dof_cap = 2000;
};

struct NewtonFailure : std::runtime_error {
    std::vector<double> residual_history;
    NewtonFailure(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), residual_history(std::move(history)) {}
};

struct PoroResult {
    VectorField u;
    ScalarField theta, p;
    double linear_residual = 0.0;
};

struct CHResult {
    ScalarField phi, mu;
    int newton_iters = 0;
    std::vector<double> residual_history;
};

struct StepResult {
    State state;
    StepAux aux;
    StepRecord record;
};

// Linear poro-elastic update with all coefficients frozen at phi^n: solves
// for (u,theta,p) at t^n + tau, f sampled at the new time, s at the old data.
PoroResult poroelastic_step(const State& state, const MaterialParams& params,
                            const SchemeConfig& config);

// Implicit phase-field update given the already-computed (u,theta): Newton on
// (phi, mu) with the convex part and the path-averaged coupling implicit.
CHResult cahn_hilliard_step(const State& state, const VectorField& u_new,
                            const ScalarField& theta_new, const MaterialParams& params,
                            const SchemeConfig& config,
                            const std::optional<ScalarField>& mu_warm_start = std::nullopt);

// One full decoupled step plus its balance diagnostics.
StepResult step(const State& state, const MaterialParams& params, const SchemeConfig& config,
                const std::optional<ScalarField>& mu_warm_start = std::nullopt);

// One step of the coupled five-field problem, solved by a single Newton
// iteration on (phi, mu, u, theta, p); agrees with step() because the
// (u,theta,p) equations do not involve (phi, mu). Guarded by a dof cap.
StepResult solve_monolithic(const State& state, const MaterialParams& params,
                            const SchemeConfig& config);

struct RunSinks {
    std::function<void(int step_index, const StepResult&)> on_step;  // optional
};

struct RunSummary {
    int n_steps = 0;
    double tau = 0.0, T = 0.0;
    double mass0_phi = 0.0, mass0_theta = 0.0;
    double worst_mass_residual_phi = 0.0;    // max per-step |balance defect|
    double worst_mass_residual_theta = 0.0;
    double cumulative_mass_residual_phi = 0.0;
    double cumulative_mass_residual_theta = 0.0;
    double worst_energy_residual = 0.0;      // max residual / (1 + |E^n|)
    double max_energy_increase = 0.0;        // max (E^{n+1}-E^n) / (1 + |E^n|)
    bool sources_zero = true;
    double uniqueness_ratio = 0.0;           // h_max^(2d) / tau, informational
    int max_newton_iters = 0;
    State final_state;
    StepAux final_aux;

    bool structure_ok() const;
};

// March n = T/tau steps (T must be an integer multiple of tau) streaming each
// StepResult to the sinks; mu is warm-started across steps.
RunSummary run(const State& initial, const MaterialParams& params, const SchemeConfig& config,
               double T, const RunSinks& sinks = {});

// Integral of a nodal field against 1 (exact for P1).
double mass_of(const ScalarField& f);

}  // namespace chb
