#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "chb/material.hpp"
#include "chb/scheme.hpp"

namespace chb {

// Initial phase field. Displacement and fluid content always start at zero.
struct InitialSpec {
    enum class Kind { Uniform, Sine, Bubbles } kind = Kind::Uniform;
    double value = 0.0;                    // Uniform
    double base = -0.1, amplitude = 0.01;  // Sine: base + a sin(2 pi x) sin(2 pi y)
    double width = 0.005, radius = 0.15;   // Bubbles
    std::vector<std::array<double, 2>> centers;

    // Bubbles: (n-1) - sum_i tanh(((x-xi)^2 + (y-yi)^2 - radius^2) / width)
    std::function<double(double, double)> function() const;
};

struct ExperimentConfig {
    std::string preset = "custom";  // convergence | lshape | tumour | custom
    int level = 4;
    double tau = 1e-5;
    double T = 0.01;
    std::string output_dir;             // empty: <CHB_OUT or "out">/<preset>
    int snapshot_stride = 0;            // every N steps; 0 disables
    std::vector<double> snapshot_times; // mapped to the nearest step time
    bool chl_mode = false;
    InitialSpec initial_phi;
    MaterialParams material;
    SchemeConfig scheme;  // scheme.tau and scheme.chl_mode mirror the fields above
};

// Built-in parameter sets; throws std::invalid_argument on an unknown name.
ExperimentConfig preset_config(const std::string& name);

// Parse a JSON document. The "preset" key selects the defaults; every other
// key overrides one field. Unknown keys anywhere are an error.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig parse_config_file(const std::string& path);

// Fully-resolved canonical form; parse(serialize(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& config);

// config.output_dir if set, else "$CHB_OUT/<preset>" or "out/<preset>".
std::string resolve_output_dir(const ExperimentConfig& config);

}  // namespace chb
