#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "chb/config.hpp"
#include "chb/experiments.hpp"

namespace {

// "2..5" or a single level
bool parse_levels(const std::string& text, int& lo, int& hi) {
    const auto pos = text.find("..");
    try {
        if (pos == std::string::npos) {
            lo = hi = std::stoi(text);
        } else {
            lo = std::stoi(text.substr(0, pos));
            hi = std::stoi(text.substr(pos + 2));
        }
    } catch (const std::exception&) {
        return false;
    }
    return lo >= 1 && hi >= lo;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const std::string& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int cmd_converge(const std::string& levels_text, double tau, double T,
                 const std::string& out_dir) {
    int lo = 0, hi = 0;
    if (!parse_levels(levels_text, lo, hi)) {
        std::fprintf(stderr, "error: --levels expects 'a..b' with 1 <= a <= b, got '%s'\n",
                     levels_text.c_str());
        return 1;
    }
    std::string dir = out_dir;
    if (dir.empty()) {
        const char* root = std::getenv("CHB_OUT");
        dir = std::string(root && *root ? root : "out") + "/convergence";
    }
    std::filesystem::create_directories(dir);

    const chb::MaterialParams params;  // reference two-phase set
    const chb::SchemeConfig scheme;
    const chb::ConvergenceReport report = chb::run_convergence(lo, hi, tau, T, params, scheme);

    std::fputs(report.formatted().c_str(), stdout);
    std::ofstream csv(dir + "/convergence.csv");
    csv << report.csv();
    std::fprintf(stdout, "report written to %s/convergence.csv\n", dir.c_str());
    if (!report.error.empty()) {
        std::fprintf(stderr, "error: %s\n", report.error.c_str());
        return 1;
    }
    if (!report.structure_ok) {
        std::fprintf(stderr, "error: structure-preservation checks failed\n");
        return 1;
    }
    return 0;
}

int cmd_run(const std::string& config_path) {
    const chb::ExperimentConfig config = chb::parse_config_file(config_path);
    const chb::ExperimentOutcome out = chb::run_named_experiment(config);
    print_warnings(out.warnings);
    const chb::RunSummary& s = out.summary;
    std::printf("%s: %d steps of tau=%g on level %d -> %s\n", config.preset.c_str(), s.n_steps,
                s.tau, config.level, out.output_dir.c_str());
    std::printf("mass residual      phi %.3e (cumulative %.3e), theta %.3e (cumulative %.3e)\n",
                s.worst_mass_residual_phi, s.cumulative_mass_residual_phi,
                s.worst_mass_residual_theta, s.cumulative_mass_residual_theta);
    std::printf("energy residual    %.3e%s\n", s.worst_energy_residual,
                s.sources_zero ? "" : "  (sources active)");
    if (s.sources_zero) std::printf("max energy rise    %.3e\n", s.max_energy_increase);
    std::printf("structure checks   %s\n", out.structure_ok ? "passed" : "FAILED");
    return out.structure_ok ? 0 : 1;
}

int cmd_compare(const std::string& config_path) {
    const chb::ExperimentConfig config = chb::parse_config_file(config_path);
    const chb::CompareOutcome out = chb::compare_chb_chl(config);
    print_warnings(out.warnings);
    std::printf("compare: max |phi gap| %.6e at T, %.6e overall -> %s\n", out.max_diff_final,
                out.max_diff_overall, out.output_dir.c_str());
    std::printf("structure checks   %s\n", out.structure_ok ? "passed" : "FAILED");
    return out.structure_ok ? 0 : 1;
}

int cmd_preset(const std::string& name) {
    std::fputs(chb::serialize_config(chb::preset_config(name)).c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phase-field poro-elasticity simulator"};
    app.require_subcommand(1);

    std::string levels = "2..5", out_dir;
    double tau = 1e-5, T = 0.01;
    CLI::App* converge = app.add_subcommand(
        "converge", "Refinement study with smooth initial data; prints the error table");
    converge->add_option("--levels", levels, "Level range 'a..b'")->capture_default_str();
    converge->add_option("--tau", tau, "Time-step size")->capture_default_str();
    converge->add_option("--T", T, "Final time")->capture_default_str();
    converge->add_option("--out", out_dir, "Output directory (default $CHB_OUT or ./out)");

    std::string run_config, compare_config, preset_name;
    CLI::App* run_cmd = app.add_subcommand("run", "Run one configured experiment");
    run_cmd->add_option("config", run_config, "JSON config file")->required();
    CLI::App* compare_cmd = app.add_subcommand(
        "compare-chl", "Run a config with compressibility on and off and diff the phase field");
    compare_cmd->add_option("config", compare_config, "JSON config file")->required();
    CLI::App* preset_cmd =
        app.add_subcommand("preset", "Print a built-in config (convergence|lshape|tumour|custom)");
    preset_cmd->add_option("name", preset_name, "Preset name")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (converge->parsed()) return cmd_converge(levels, tau, T, out_dir);
        if (run_cmd->parsed()) return cmd_run(run_config);
        if (compare_cmd->parsed()) return cmd_compare(compare_config);
        if (preset_cmd->parsed()) return cmd_preset(preset_name);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
