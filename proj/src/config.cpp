#include "chb/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace chb {

using json = nlohmann::ordered_json;

std::function<double(double, double)> InitialSpec::function() const {
    switch (kind) {
        case Kind::Uniform: {
            const double v = value;
            return [v](double, double) { return v; };
        }
        case Kind::Sine: {
            const double b = base, a = amplitude;
            return [b, a](double x, double y) {
                return b + a * std::sin(2.0 * M_PI * x) * std::sin(2.0 * M_PI * y);
            };
        }
        case Kind::Bubbles: {
            if (centers.empty())
                throw std::invalid_argument("initial: bubbles spec needs at least one center");
            const auto cs = centers;
            const double w = width, r = radius;
            return [cs, w, r](double x, double y) {
                double phi = static_cast<double>(cs.size()) - 1.0;
                for (const auto& c : cs) {
                    const double b = (x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]) - r * r;
                    phi -= std::tanh(b / w);
                }
                return phi;
            };
        }
    }
    throw std::logic_error("initial: unhandled kind");
}

namespace {

// ------------------------------------------------------------- presets

ExperimentConfig make_convergence() {
    ExperimentConfig c;
    c.preset = "convergence";
    c.level = 4;
    c.tau = 1e-5;
    c.T = 0.01;
    c.initial_phi.kind = InitialSpec::Kind::Sine;
    c.initial_phi.base = -0.1;
    c.initial_phi.amplitude = 0.01;
    return c;  // reference material set, no sources
}

ExperimentConfig make_lshape() {
    ExperimentConfig c;
    c.preset = "lshape";
    c.level = 7;
    c.tau = 1e-3;
    c.T = 2.0;
    c.snapshot_times = {0.0, 0.02, 0.06, 2.0};
    c.initial_phi.kind = InitialSpec::Kind::Bubbles;
    c.initial_phi.width = 0.005;
    c.initial_phi.radius = 0.15;
    c.initial_phi.centers = {{0.3, 0.3}, {0.3, 0.7}, {0.7, 0.3}};
    return c;
}

ExperimentConfig make_tumour() {
    ExperimentConfig c;
    c.preset = "tumour";
    c.level = 7;
    c.tau = 1e-3;
    c.T = 1.0;
    c.snapshot_times = {0.0, 0.5, 0.75, 1.0};
    c.initial_phi.kind = InitialSpec::Kind::Bubbles;
    c.initial_phi.width = 0.005;
    c.initial_phi.radius = 0.15;
    c.initial_phi.centers = {{0.5, 0.5}};
    MaterialParams& m = c.material;
    m.C_m1 = Voigt3x3::from_rows({6, 4, 0}, {4, 6, 0}, {0, 0, 1});
    m.C_p1 = Voigt3x3::from_rows({1.55, 0.38, 0}, {0.38, 1.55, 0}, {0, 0, 0.58});
    m.Cnu_m1 = Voigt3x3::zero();
    m.Cnu_p1 = Voigt3x3::zero();
    m.eigenstrain = {0.15, -1.0};  // 0.15 (phi + 1) I
    m.mobility.kind = MobilitySpec::Kind::Degenerate;
    m.mobility.floor = 1e-14;
    m.mobility.scale = 1.0 / 16.0;
    m.source_r.kind = SourceSpec::Kind::LogisticPhi;
    m.source_r.value = 2.5;
    return c;
}

ExperimentConfig make_custom() {
    ExperimentConfig c;
    c.preset = "custom";
    return c;
}

// ------------------------------------------------------- schema helpers

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object())
        throw std::invalid_argument("config: '" + where + "' must be an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
}

double get_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw std::invalid_argument("config: '" + where + "' must be a number");
    return v.get<double>();
}

int get_int(const json& v, const std::string& where) {
    if (!v.is_number_integer())
        throw std::invalid_argument("config: '" + where + "' must be an integer");
    return v.get<int>();
}

std::string get_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw std::invalid_argument("config: '" + where + "' must be a string");
    return v.get<std::string>();
}

bool get_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw std::invalid_argument("config: '" + where + "' must be a bool");
    return v.get<bool>();
}

std::array<double, 2> get_pair(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2)
        throw std::invalid_argument("config: '" + where + "' must be an array of two numbers");
    return {get_number(v[0], where), get_number(v[1], where)};
}

Voigt3x3 get_matrix(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3)
        throw std::invalid_argument("config: '" + where + "' must be a 3x3 array");
    Voigt3x3 m{};
    for (int i = 0; i < 3; ++i) {
        if (!v[i].is_array() || v[i].size() != 3)
            throw std::invalid_argument("config: '" + where + "' must be a 3x3 array");
        for (int j = 0; j < 3; ++j) m.a[3 * i + j] = get_number(v[i][j], where);
    }
    return m;
}

void parse_initial(const json& obj, InitialSpec& spec) {
    check_keys(obj, "initial", {"kind", "value", "base", "amplitude", "width", "radius",
                                "centers"});
    if (obj.contains("kind")) {
        const std::string k = get_string(obj["kind"], "initial.kind");
        if (k == "uniform")
            spec.kind = InitialSpec::Kind::Uniform;
        else if (k == "sine")
            spec.kind = InitialSpec::Kind::Sine;
        else if (k == "bubbles")
            spec.kind = InitialSpec::Kind::Bubbles;
        else
            throw std::invalid_argument("config: initial.kind '" + k +
                                        "' is not uniform|sine|bubbles");
    }
    if (obj.contains("value")) spec.value = get_number(obj["value"], "initial.value");
    if (obj.contains("base")) spec.base = get_number(obj["base"], "initial.base");
    if (obj.contains("amplitude"))
        spec.amplitude = get_number(obj["amplitude"], "initial.amplitude");
    if (obj.contains("width")) spec.width = get_number(obj["width"], "initial.width");
    if (obj.contains("radius")) spec.radius = get_number(obj["radius"], "initial.radius");
    if (obj.contains("centers")) {
        if (!obj["centers"].is_array())
            throw std::invalid_argument("config: initial.centers must be an array of [x, y]");
        spec.centers.clear();
        for (const auto& c : obj["centers"]) spec.centers.push_back(get_pair(c, "centers[i]"));
    }
}

void parse_mobility(const json& obj, MobilitySpec& spec) {
    check_keys(obj, "material.mobility", {"kind", "value", "floor", "scale"});
    if (obj.contains("kind")) {
        const std::string k = get_string(obj["kind"], "mobility.kind");
        if (k == "constant")
            spec.kind = MobilitySpec::Kind::Constant;
        else if (k == "degenerate")
            spec.kind = MobilitySpec::Kind::Degenerate;
        else
            throw std::invalid_argument("config: mobility.kind '" + k +
                                        "' is not constant|degenerate");
    }
    if (obj.contains("value")) spec.value = get_number(obj["value"], "mobility.value");
    if (obj.contains("floor")) spec.floor = get_number(obj["floor"], "mobility.floor");
    if (obj.contains("scale")) spec.scale = get_number(obj["scale"], "mobility.scale");
}

void parse_source(const json& obj, const std::string& where, SourceSpec& spec) {
    check_keys(obj, where, {"kind", "value"});
    if (obj.contains("kind")) {
        const std::string k = get_string(obj["kind"], where + ".kind");
        if (k == "zero")
            spec.kind = SourceSpec::Kind::Zero;
        else if (k == "constant")
            spec.kind = SourceSpec::Kind::Constant;
        else if (k == "logistic")
            spec.kind = SourceSpec::Kind::LogisticPhi;
        else
            throw std::invalid_argument("config: " + where + ".kind '" + k +
                                        "' is not zero|constant|logistic");
    }
    if (obj.contains("value")) spec.value = get_number(obj["value"], where + ".value");
}

void parse_body_force(const json& obj, BodyForceSpec& spec) {
    check_keys(obj, "material.body_force", {"kind", "value"});
    if (obj.contains("kind")) {
        const std::string k = get_string(obj["kind"], "body_force.kind");
        if (k == "zero")
            spec.kind = BodyForceSpec::Kind::Zero;
        else if (k == "constant")
            spec.kind = BodyForceSpec::Kind::Constant;
        else
            throw std::invalid_argument("config: body_force.kind '" + k +
                                        "' is not zero|constant");
    }
    if (obj.contains("value")) spec.value = get_pair(obj["value"], "body_force.value");
}

void parse_material(const json& obj, MaterialParams& m) {
    check_keys(obj, "material",
               {"gamma", "kappa", "M", "alpha", "C_minus", "C_plus", "Cnu_minus", "Cnu_plus",
                "eigenstrain", "mobility", "source_r", "source_s", "body_force"});
    if (obj.contains("gamma")) m.gamma = get_number(obj["gamma"], "material.gamma");
    if (obj.contains("kappa")) {
        const auto v = get_pair(obj["kappa"], "material.kappa");
        m.kappa_m1 = v[0];
        m.kappa_p1 = v[1];
    }
    if (obj.contains("M")) {
        const auto v = get_pair(obj["M"], "material.M");
        m.M_m1 = v[0];
        m.M_p1 = v[1];
    }
    if (obj.contains("alpha")) {
        const auto v = get_pair(obj["alpha"], "material.alpha");
        m.alpha_m1 = v[0];
        m.alpha_p1 = v[1];
    }
    if (obj.contains("C_minus")) m.C_m1 = get_matrix(obj["C_minus"], "material.C_minus");
    if (obj.contains("C_plus")) m.C_p1 = get_matrix(obj["C_plus"], "material.C_plus");
    if (obj.contains("Cnu_minus")) m.Cnu_m1 = get_matrix(obj["Cnu_minus"], "material.Cnu_minus");
    if (obj.contains("Cnu_plus")) m.Cnu_p1 = get_matrix(obj["Cnu_plus"], "material.Cnu_plus");
    if (obj.contains("eigenstrain")) {
        check_keys(obj["eigenstrain"], "material.eigenstrain", {"scale", "shift"});
        if (obj["eigenstrain"].contains("scale"))
            m.eigenstrain.scale = get_number(obj["eigenstrain"]["scale"], "eigenstrain.scale");
        if (obj["eigenstrain"].contains("shift"))
            m.eigenstrain.shift = get_number(obj["eigenstrain"]["shift"], "eigenstrain.shift");
    }
    if (obj.contains("mobility")) parse_mobility(obj["mobility"], m.mobility);
    if (obj.contains("source_r")) parse_source(obj["source_r"], "material.source_r", m.source_r);
    if (obj.contains("source_s")) parse_source(obj["source_s"], "material.source_s", m.source_s);
    if (obj.contains("body_force")) parse_body_force(obj["body_force"], m.body_force);
}

void parse_scheme(const json& obj, SchemeConfig& s) {
    check_keys(obj, "scheme",
               {"newton_tol", "newton_max_iter", "time_avg_points", "quad_degree"});
    if (obj.contains("newton_tol"))
        s.newton_tol = get_number(obj["newton_tol"], "scheme.newton_tol");
    if (obj.contains("newton_max_iter"))
        s.newton_max_iter = get_int(obj["newton_max_iter"], "scheme.newton_max_iter");
    if (obj.contains("time_avg_points"))
        s.time_avg_points = get_int(obj["time_avg_points"], "scheme.time_avg_points");
    if (obj.contains("quad_degree"))
        s.quad_degree = get_int(obj["quad_degree"], "scheme.quad_degree");
}

json matrix_json(const Voigt3x3& m) {
    json rows = json::array();
    for (int i = 0; i < 3; ++i) rows.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
    return rows;
}

}  // namespace

ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig c;
    if (name == "convergence") {
        c = make_convergence();
    } else if (name == "lshape") {
        c = make_lshape();
    } else if (name == "tumour") {
        c = make_tumour();
    } else if (name == "custom") {
        c = make_custom();
    } else {
        throw std::invalid_argument("config: unknown preset '" + name +
                                    "' (convergence|lshape|tumour|custom)");
    }
    // Invariant of ExperimentConfig: the scheme mirrors the top-level step size
    // and model-reduction flag.
    c.scheme.tau = c.tau;
    c.scheme.chl_mode = c.chl_mode;
    return c;
}

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    check_keys(doc, "config",
               {"preset", "level", "tau", "T", "output_dir", "snapshot_stride",
                "snapshot_times", "chl_mode", "initial", "material", "scheme"});

    ExperimentConfig c = doc.contains("preset")
                             ? preset_config(get_string(doc["preset"], "preset"))
                             : make_custom();
    if (doc.contains("level")) c.level = get_int(doc["level"], "level");
    if (c.level < 1 || c.level > 12)
        throw std::invalid_argument("config: level must be in [1, 12]");
    if (doc.contains("tau")) c.tau = get_number(doc["tau"], "tau");
    if (doc.contains("T")) c.T = get_number(doc["T"], "T");
    if (!(c.tau > 0.0) || !(c.T > 0.0))
        throw std::invalid_argument("config: tau and T must be positive");
    if (doc.contains("output_dir")) c.output_dir = get_string(doc["output_dir"], "output_dir");
    if (doc.contains("snapshot_stride")) {
        c.snapshot_stride = get_int(doc["snapshot_stride"], "snapshot_stride");
        if (c.snapshot_stride < 0)
            throw std::invalid_argument("config: snapshot_stride must be >= 0");
    }
    if (doc.contains("snapshot_times")) {
        if (!doc["snapshot_times"].is_array())
            throw std::invalid_argument("config: snapshot_times must be an array");
        c.snapshot_times.clear();
        for (const auto& t : doc["snapshot_times"])
            c.snapshot_times.push_back(get_number(t, "snapshot_times[i]"));
    }
    if (doc.contains("chl_mode")) c.chl_mode = get_bool(doc["chl_mode"], "chl_mode");
    if (doc.contains("initial")) parse_initial(doc["initial"], c.initial_phi);
    if (doc.contains("material")) parse_material(doc["material"], c.material);
    if (doc.contains("scheme")) parse_scheme(doc["scheme"], c.scheme);
    if (c.initial_phi.kind == InitialSpec::Kind::Bubbles && c.initial_phi.centers.empty())
        throw std::invalid_argument("config: initial: bubbles spec needs at least one center");
    c.scheme.tau = c.tau;
    c.scheme.chl_mode = c.chl_mode;
    return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot read '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    json doc;
    doc["preset"] = c.preset;
    doc["level"] = c.level;
    doc["tau"] = c.tau;
    doc["T"] = c.T;
    doc["output_dir"] = c.output_dir;
    doc["snapshot_stride"] = c.snapshot_stride;
    doc["snapshot_times"] = c.snapshot_times;
    doc["chl_mode"] = c.chl_mode;

    json init;
    switch (c.initial_phi.kind) {
        case InitialSpec::Kind::Uniform:
            init["kind"] = "uniform";
            init["value"] = c.initial_phi.value;
            break;
        case InitialSpec::Kind::Sine:
            init["kind"] = "sine";
            init["base"] = c.initial_phi.base;
            init["amplitude"] = c.initial_phi.amplitude;
            break;
        case InitialSpec::Kind::Bubbles:
            init["kind"] = "bubbles";
            init["width"] = c.initial_phi.width;
            init["radius"] = c.initial_phi.radius;
            init["centers"] = json::array();
            for (const auto& p : c.initial_phi.centers)
                init["centers"].push_back(json::array({p[0], p[1]}));
            break;
    }
    doc["initial"] = init;

    const MaterialParams& m = c.material;
    json mat;
    mat["gamma"] = m.gamma;
    mat["kappa"] = json::array({m.kappa_m1, m.kappa_p1});
    mat["M"] = json::array({m.M_m1, m.M_p1});
    mat["alpha"] = json::array({m.alpha_m1, m.alpha_p1});
    mat["C_minus"] = matrix_json(m.C_m1);
    mat["C_plus"] = matrix_json(m.C_p1);
    mat["Cnu_minus"] = matrix_json(m.Cnu_m1);
    mat["Cnu_plus"] = matrix_json(m.Cnu_p1);
    mat["eigenstrain"] = {{"scale", m.eigenstrain.scale}, {"shift", m.eigenstrain.shift}};
    json mob;
    mob["kind"] = m.mobility.kind == MobilitySpec::Kind::Constant ? "constant" : "degenerate";
    if (m.mobility.kind == MobilitySpec::Kind::Constant) {
        mob["value"] = m.mobility.value;
    } else {
        mob["floor"] = m.mobility.floor;
        mob["scale"] = m.mobility.scale;
    }
    mat["mobility"] = mob;
    auto source_json = [](const SourceSpec& s) {
        json j;
        switch (s.kind) {
            case SourceSpec::Kind::Zero:
                j["kind"] = "zero";
                break;
            case SourceSpec::Kind::Constant:
                j["kind"] = "constant";
                j["value"] = s.value;
                break;
            case SourceSpec::Kind::LogisticPhi:
                j["kind"] = "logistic";
                j["value"] = s.value;
                break;
        }
        return j;
    };
    mat["source_r"] = source_json(m.source_r);
    mat["source_s"] = source_json(m.source_s);
    json bf;
    bf["kind"] = m.body_force.kind == BodyForceSpec::Kind::Zero ? "zero" : "constant";
    if (m.body_force.kind == BodyForceSpec::Kind::Constant)
        bf["value"] = json::array({m.body_force.value[0], m.body_force.value[1]});
    mat["body_force"] = bf;
    doc["material"] = mat;

    doc["scheme"] = {{"newton_tol", c.scheme.newton_tol},
                     {"newton_max_iter", c.scheme.newton_max_iter},
                     {"time_avg_points", c.scheme.time_avg_points},
                     {"quad_degree", c.scheme.quad_degree}};
    return doc.dump(2) + "\n";
}

std::string resolve_output_dir(const ExperimentConfig& c) {
    if (!c.output_dir.empty()) return c.output_dir;
    const char* root = std::getenv("CHB_OUT");
    return std::string(root && *root ? root : "out") + "/" + c.preset;
}

}  // namespace chb
