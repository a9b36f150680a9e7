#include "chb/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "chb/assembly.hpp"
#include "chb/io.hpp"

namespace chb {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct PairErrors {
    double phi, mu, u, p, theta;
    double total() const { return phi + mu + u + p + theta; }
};

// Coarse final fields prolonged to the fine mesh, gaps measured there.
PairErrors pair_errors(const RunSummary& coarse, const RunSummary& fine,
                       const MeshPtr& fine_mesh) {
    const CsrMatrix M = assemble_mass(*fine_mesh);
    const CsrMatrix K = assemble_stiffness(*fine_mesh);
    auto h1_sq = [&](const ScalarField& a, const ScalarField& b) {
        std::vector<double> w(a.values.size());
        for (size_t i = 0; i < w.size(); ++i) w[i] = a.values[i] - b.values[i];
        return dot(w, M.apply(w)) + dot(w, K.apply(w));
    };
    auto l2_sq = [&](const ScalarField& a, const ScalarField& b) {
        std::vector<double> w(a.values.size());
        for (size_t i = 0; i < w.size(); ++i) w[i] = a.values[i] - b.values[i];
        return dot(w, M.apply(w));
    };

    PairErrors e;
    e.phi = h1_sq(prolong(coarse.final_state.phi, fine_mesh), fine.final_state.phi);
    e.mu = h1_sq(prolong(coarse.final_aux.mu, fine_mesh), fine.final_aux.mu);
    e.p = h1_sq(prolong(coarse.final_aux.p, fine_mesh), fine.final_aux.p);
    e.theta = l2_sq(prolong(coarse.final_state.theta, fine_mesh), fine.final_state.theta);

    const CellStrainField ec = strain(prolong(coarse.final_state.u, fine_mesh));
    const CellStrainField ef = strain(fine.final_state.u);
    double eu = 0.0;
    for (int c = 0; c < fine_mesh->n_cells(); ++c) {
        const double d0 = ec.voigt[c][0] - ef.voigt[c][0];
        const double d1 = ec.voigt[c][1] - ef.voigt[c][1];
        const double d2 = ec.voigt[c][2] - ef.voigt[c][2];
        // tensor norm: the Voigt shear slot carries twice the off-diagonal
        eu += cell_geometry(*fine_mesh, c).area * (d0 * d0 + d1 * d1 + 0.5 * d2 * d2);
    }
    e.u = eu;
    return e;
}

std::string eoc_str(double v) {
    if (std::isnan(v)) return "  --";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%4.2f", v);
    return buf;
}

std::set<int> snapshot_steps(const ExperimentConfig& c, int n_steps) {
    std::set<int> s{0, n_steps};
    if (c.snapshot_stride > 0)
        for (int i = 0; i <= n_steps; i += c.snapshot_stride) s.insert(i);
    for (double t : c.snapshot_times) {
        long long i = std::llround(t / c.tau);
        s.insert(static_cast<int>(std::clamp(i, 0LL, static_cast<long long>(n_steps))));
    }
    return s;
}

std::string snapshot_path(const std::string& dir, const char* stem, int step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%06d.vtk", stem, step);
    return dir + "/" + buf;
}

void write_state_snapshot(const std::string& dir, int step, const State& state,
                          const StepAux* aux) {
    VtkFields fields;
    fields.scalars.push_back({"phi", &state.phi});
    if (aux) fields.scalars.push_back({"mu", &aux->mu});
    fields.scalars.push_back({"theta", &state.theta});
    if (aux) fields.scalars.push_back({"p", &aux->p});
    fields.vectors.push_back({"u", &state.u});
    write_vtk(*state.phi.mesh, fields, snapshot_path(dir, "state", step));
}

int checked_step_count(double T, double tau) {
    const long long n = std::llround(T / tau);
    if (n < 1 || std::abs(n * tau - T) > 1e-8 * std::max(1.0, T))
        throw std::invalid_argument("experiment: T must be an integer multiple of tau");
    return static_cast<int>(n);
}

}  // namespace

State initial_state(const ExperimentConfig& config, const MeshPtr& mesh) {
    State s;
    s.t = 0.0;
    s.phi = interpolate_nodal(config.initial_phi.function(), mesh);
    s.u = VectorField(mesh);
    s.theta = ScalarField(mesh);
    return s;
}

ConvergenceReport run_convergence(int level_min, int level_max, double tau, double T,
                                  const MaterialParams& params, const SchemeConfig& scheme) {
    if (level_min < 1 || level_max < level_min || level_max > 11)
        throw std::invalid_argument("converge: need 1 <= level_min <= level_max <= 11");
    SchemeConfig cfg = scheme;
    cfg.tau = tau;

    ExperimentConfig data = preset_config("convergence");  // smooth sine initial field

    // nested chain so the coarse solution injects exactly into the fine space
    std::vector<MeshPtr> meshes;
    meshes.push_back(share(build_unit_square_mesh(level_min)));
    for (int l = level_min; l <= level_max; ++l)
        meshes.push_back(share(refine_uniform(*meshes.back())));

    ConvergenceReport report;
    std::vector<RunSummary> runs;
    for (size_t i = 0; i < meshes.size(); ++i) {
        try {
            runs.push_back(run(initial_state(data, meshes[i]), params, cfg, T));
            report.structure_ok = report.structure_ok && runs.back().structure_ok();
        } catch (const std::exception& e) {
            report.error = "level " + std::to_string(level_min + static_cast<int>(i)) + ": " +
                           e.what();
            report.structure_ok = false;
            break;
        }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    PairErrors prev{};
    for (size_t i = 0; i + 1 < runs.size(); ++i) {
        const PairErrors e = pair_errors(runs[i], runs[i + 1], meshes[i + 1]);
        ConvergenceRow row;
        row.k = level_min + static_cast<int>(i);
        row.e_total = e.total();
        row.e_phi = e.phi;
        row.e_mu = e.mu;
        row.e_u = e.u;
        row.e_p = e.p;
        row.e_theta = e.theta;
        if (i == 0) {
            row.eoc_total = row.eoc_phi = row.eoc_mu = row.eoc_u = row.eoc_p = nan;
        } else {
            row.eoc_total = std::log2(prev.total() / e.total());
            row.eoc_phi = std::log2(prev.phi / e.phi);
            row.eoc_mu = std::log2(prev.mu / e.mu);
            row.eoc_u = std::log2(prev.u / e.u);
            row.eoc_p = std::log2(prev.p / e.p);
        }
        prev = e;
        report.rows.push_back(row);
    }
    return report;
}

std::string ConvergenceReport::formatted() const {
    std::string out =
        "  k      e_h       eoc     e_phi     eoc      e_mu     eoc       e_u     eoc       "
        "e_p     eoc\n";
    char line[256];
    for (const ConvergenceRow& r : rows) {
        std::snprintf(line, sizeof line,
                      "%3d  %9.3e  %s  %9.3e  %s  %9.3e  %s  %9.3e  %s  %9.3e  %s\n", r.k,
                      r.e_total, eoc_str(r.eoc_total).c_str(), r.e_phi,
                      eoc_str(r.eoc_phi).c_str(), r.e_mu, eoc_str(r.eoc_mu).c_str(), r.e_u,
                      eoc_str(r.eoc_u).c_str(), r.e_p, eoc_str(r.eoc_p).c_str());
        out += line;
    }
    if (!error.empty()) out += "aborted: " + error + "\n";
    return out;
}

std::string ConvergenceReport::csv() const {
    std::string out = "k,e_h,eoc,e_phi,eoc_phi,e_mu,eoc_mu,e_u,eoc_u,e_p,eoc_p\n";
    char line[512];
    auto num = [](double v) {
        if (std::isnan(v)) return std::string();
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const ConvergenceRow& r : rows) {
        std::snprintf(line, sizeof line, "%d,%.17g,%s,%.17g,%s,%.17g,%s,%.17g,%s,%.17g,%s\n",
                      r.k, r.e_total, num(r.eoc_total).c_str(), r.e_phi,
                      num(r.eoc_phi).c_str(), r.e_mu, num(r.eoc_mu).c_str(), r.e_u,
                      num(r.eoc_u).c_str(), r.e_p, num(r.eoc_p).c_str());
        out += line;
    }
    return out;
}

ExperimentOutcome run_named_experiment(
    const ExperimentConfig& config, const std::function<void(int, const StepResult&)>& on_step) {
    ExperimentOutcome out;
    out.warnings = validate_material(config.material, config.chl_mode);
    out.output_dir = resolve_output_dir(config);
    std::filesystem::create_directories(out.output_dir);

    const MeshPtr mesh = share(build_unit_square_mesh(config.level));
    const State s0 = initial_state(config, mesh);
    const int n_steps = checked_step_count(config.T, config.tau);
    const std::set<int> snaps = snapshot_steps(config, n_steps);

    {
        std::ofstream cfg_out(out.output_dir + "/config.json");
        cfg_out << serialize_config(config);
    }
    if (snaps.count(0)) write_state_snapshot(out.output_dir, 0, s0, nullptr);

    out.records.reserve(n_steps);
    RunSinks sinks;
    sinks.on_step = [&](int i, const StepResult& sr) {
        out.records.push_back(sr.record);
        if (snaps.count(i + 1)) write_state_snapshot(out.output_dir, i + 1, sr.state, &sr.aux);
        if (on_step) on_step(i, sr);
    };
    try {
        out.summary = run(s0, config.material, config.scheme, config.T, sinks);
        out.structure_ok = out.summary.structure_ok();
    } catch (...) {
        write_csv(out.records, out.output_dir + "/timeseries.csv");  // keep partial output
        throw;
    }
    write_csv(out.records, out.output_dir + "/timeseries.csv");
    return out;
}

CompareOutcome compare_chb_chl(const ExperimentConfig& config) {
    CompareOutcome out;
    out.output_dir = resolve_output_dir(config);
    std::filesystem::create_directories(out.output_dir);

    const MeshPtr mesh = share(build_unit_square_mesh(config.level));
    const State s0 = initial_state(config, mesh);
    const int n_steps = checked_step_count(config.T, config.tau);
    const std::set<int> snaps = snapshot_steps(config, n_steps);
    const int n = mesh->n_vertices();

    ExperimentConfig base = config;
    base.chl_mode = false;
    base.scheme.chl_mode = false;
    ExperimentConfig reduced = config;
    reduced.chl_mode = true;
    reduced.scheme.chl_mode = true;
    out.warnings = validate_material(base.material, false);
    for (const std::string& w : validate_material(reduced.material, true))
        out.warnings.push_back("[reduced] " + w);

    std::vector<std::vector<double>> phi_a(n_steps + 1);
    phi_a[0] = s0.phi.values;
    RunSinks collect;
    collect.on_step = [&](int i, const StepResult& sr) { phi_a[i + 1] = sr.state.phi.values; };
    const RunSummary run_a = run(s0, base.material, base.scheme, base.T, collect);

    std::vector<double> max_diff(n_steps + 1, 0.0);
    ScalarField diff(mesh);
    if (snaps.count(0)) {
        VtkFields fields;
        fields.scalars.push_back({"phi_diff", &diff});
        write_vtk(*mesh, fields, snapshot_path(out.output_dir, "diff", 0));
    }
    RunSinks compare;
    compare.on_step = [&](int i, const StepResult& sr) {
        double worst = 0.0;
        for (int v = 0; v < n; ++v)
            worst = std::max(worst, std::abs(phi_a[i + 1][v] - sr.state.phi.values[v]));
        max_diff[i + 1] = worst;
        if (snaps.count(i + 1)) {
            for (int v = 0; v < n; ++v)
                diff.values[v] = std::abs(phi_a[i + 1][v] - sr.state.phi.values[v]);
            VtkFields fields;
            fields.scalars.push_back({"phi_diff", &diff});
            write_vtk(*mesh, fields, snapshot_path(out.output_dir, "diff", i + 1));
        }
    };
    const RunSummary run_b = run(s0, reduced.material, reduced.scheme, reduced.T, compare);

    std::ofstream series(out.output_dir + "/diff_timeseries.csv");
    series << "t,max_abs_phi_diff\n";
    char line[80];
    for (int i = 0; i <= n_steps; ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g\n", i * config.tau, max_diff[i]);
        series << line;
    }
    out.max_diff_final = max_diff[n_steps];
    out.max_diff_overall = *std::max_element(max_diff.begin(), max_diff.end());
    out.structure_ok = run_a.structure_ok() && run_b.structure_ok();
    return out;
}

int count_positive_components(const ScalarField& phi) {
    const SimplicialMesh& mesh = *phi.mesh;
    const int m = mesh.n_cells();
    std::vector<char> positive(m, 0);
    for (int c = 0; c < m; ++c) {
        const auto& v = mesh.cells[c];
        positive[c] =
            (phi.values[v[0]] + phi.values[v[1]] + phi.values[v[2]]) / 3.0 > 0.0 ? 1 : 0;
    }
    // cell adjacency through shared edges
    std::map<std::pair<int, int>, int> edge_owner;
    std::vector<std::vector<int>> neighbors(m);
    for (int c = 0; c < m; ++c) {
        for (int e = 0; e < 3; ++e) {
            int a = mesh.cells[c][e], b = mesh.cells[c][(e + 1) % 3];
            if (a > b) std::swap(a, b);
            auto [it, inserted] = edge_owner.try_emplace({a, b}, c);
            if (!inserted) {
                neighbors[c].push_back(it->second);
                neighbors[it->second].push_back(c);
            }
        }
    }
    int components = 0;
    std::vector<char> seen(m, 0);
    std::vector<int> stack;
    for (int c = 0; c < m; ++c) {
        if (!positive[c] || seen[c]) continue;
        ++components;
        stack.push_back(c);
        seen[c] = 1;
        while (!stack.empty()) {
            const int cur = stack.back();
            stack.pop_back();
            for (int nb : neighbors[cur])
                if (positive[nb] && !seen[nb]) {
                    seen[nb] = 1;
                    stack.push_back(nb);
                }
        }
    }
    return components;
}

}  // namespace chb
