#pragma once

#include <functional>
#include <string>
#include <vector>

#include "chb/config.hpp"
#include "chb/scheme.hpp"

namespace chb {

// Squared-norm gaps between a run and the run on the once-refined mesh,
// coarse side prolonged: H1 for phi, mu, p; L2 for the strain tensor and
// theta. eoc entries are log2(previous/current), NaN on the first row.
struct ConvergenceRow {
    int k = 0;
    double e_total = 0.0, e_phi = 0.0, e_mu = 0.0, e_u = 0.0, e_p = 0.0, e_theta = 0.0;
    double eoc_total = 0.0, eoc_phi = 0.0, eoc_mu = 0.0, eoc_u = 0.0, eoc_p = 0.0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    std::string error;         // nonempty if a run failed; rows hold the finished part
    bool structure_ok = true;  // balance checks of every completed run

    std::string formatted() const;
    std::string csv() const;
};

// Smooth-initial-data refinement study: one run per level in
// [level_min, level_max + 1] on a nested mesh chain, then one row per
// consecutive pair. All runs share tau, T, the material set and the scheme.
ConvergenceReport run_convergence(int level_min, int level_max, double tau, double T,
                                  const MaterialParams& params, const SchemeConfig& scheme);

struct ExperimentOutcome {
    RunSummary summary;
    std::vector<StepRecord> records;
    std::vector<std::string> warnings;
    bool structure_ok = false;
    std::string output_dir;
};

// Runs the configured trajectory, writing the per-step CSV and VTK snapshots
// (stride multiples, requested times mapped to the nearest step, first and
// last step) into the resolved output directory. `on_step` may observe every
// accepted step.
ExperimentOutcome run_named_experiment(
    const ExperimentConfig& config,
    const std::function<void(int, const StepResult&)>& on_step = {});

struct CompareOutcome {
    double max_diff_final = 0.0;    // max nodal |phi gap| at T
    double max_diff_overall = 0.0;  // max over all steps
    bool structure_ok = false;      // both runs
    std::string output_dir;
    std::vector<std::string> warnings;
};

// Runs the config twice from identical data, compressibility on and forced to
// zero; writes nodal |phi_A - phi_B| snapshot fields and the per-step
// max-difference series.
CompareOutcome compare_chb_chl(const ExperimentConfig& config);

// Edge-connected components among cells whose vertex-average phi is positive.
int count_positive_components(const ScalarField& phi);

State initial_state(const ExperimentConfig& config, const MeshPtr& mesh);

}  // namespace chb
