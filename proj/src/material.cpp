#include "chb/material.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace chb {

// ---------------------------------------------------------------- Voigt3x3

Voigt3 Voigt3x3::apply(const Voigt3& v) const {
    return {a[0] * v[0] + a[1] * v[1] + a[2] * v[2],
            a[3] * v[0] + a[4] * v[1] + a[5] * v[2],
            a[6] * v[0] + a[7] * v[1] + a[8] * v[2]};
}

double Voigt3x3::quad(const Voigt3& u, const Voigt3& v) const {
    const Voigt3 av = apply(v);
    return u[0] * av[0] + u[1] * av[1] + u[2] * av[2];
}

bool Voigt3x3::symmetric(double tol) const {
    return std::abs(a[1] - a[3]) <= tol && std::abs(a[2] - a[6]) <= tol &&
           std::abs(a[5] - a[7]) <= tol;
}

namespace {
// LDL^T pivots of a symmetric 3x3; no pivoting needed for the definiteness test.
std::array<double, 3> ldlt_pivots(const Voigt3x3& m) {
    const double d0 = m(0, 0);
    const double l10 = d0 != 0.0 ? m(1, 0) / d0 : 0.0;
    const double l20 = d0 != 0.0 ? m(2, 0) / d0 : 0.0;
    const double d1 = m(1, 1) - l10 * l10 * d0;
    const double l21 = d1 != 0.0 ? (m(2, 1) - l20 * l10 * d0) / d1 : 0.0;
    const double d2 = m(2, 2) - l20 * l20 * d0 - l21 * l21 * d1;
    return {d0, d1, d2};
}
}  // namespace

bool Voigt3x3::positive_definite(double tol) const {
    const auto d = ldlt_pivots(*this);
    return d[0] > tol && d[1] > tol && d[2] > tol;
}

bool Voigt3x3::positive_semidefinite(double tol) const {
    // scale-aware: eigenvalues of a PSD matrix may round to small negatives
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    const double floor = -tol * std::max(1.0, scale);
    const auto d = ldlt_pivots(*this);
    return d[0] >= floor && d[1] >= floor && d[2] >= floor;
}

Voigt3x3 Voigt3x3::from_rows(const std::array<double, 3>& r0, const std::array<double, 3>& r1,
                             const std::array<double, 3>& r2) {
    Voigt3x3 m;
    for (int j = 0; j < 3; ++j) {
        m.a[j] = r0[j];
        m.a[3 + j] = r1[j];
        m.a[6 + j] = r2[j];
    }
    return m;
}

Voigt3x3 operator+(const Voigt3x3& x, const Voigt3x3& y) {
    Voigt3x3 r;
    for (int i = 0; i < 9; ++i) r.a[i] = x.a[i] + y.a[i];
    return r;
}

Voigt3x3 operator-(const Voigt3x3& x, const Voigt3x3& y) {
    Voigt3x3 r;
    for (int i = 0; i < 9; ++i) r.a[i] = x.a[i] - y.a[i];
    return r;
}

Voigt3x3 operator*(double s, const Voigt3x3& x) {
    Voigt3x3 r;
    for (int i = 0; i < 9; ++i) r.a[i] = s * x.a[i];
    return r;
}

// ------------------------------------------------------------------ specs

PotentialSplit PotentialSplit::quartic_double_well() {
    PotentialSplit s;
    s.psi = [](double x) {
        const double q = 1.0 - x * x;
        return 0.25 * q * q;
    };
    s.dpsi_vex = [](double x) { return x * x * x; };
    s.dpsi_cav = [](double x) { return -x; };
    s.d2psi_vex = [](double x) { return 3.0 * x * x; };
    return s;
}

double MobilitySpec::operator()(double phi) const {
    if (kind == Kind::Constant) return value;
    const double q = phi * phi - 1.0;
    return floor + scale * q * q;
}

double SourceSpec::eval(double phi, const Voigt3&, double) const {
    switch (kind) {
        case Kind::Zero: return 0.0;
        case Kind::Constant: return value;
        case Kind::LogisticPhi: return value * (1.0 - phi * phi);
    }
    return 0.0;
}

std::array<double, 2> BodyForceSpec::eval(double, double, double) const {
    return kind == Kind::Zero ? std::array<double, 2>{0.0, 0.0} : value;
}

bool BodyForceSpec::is_zero() const {
    return kind == Kind::Zero || (value[0] == 0.0 && value[1] == 0.0);
}

MaterialParams::MaterialParams() {
    C_m1 = Voigt3x3::from_rows({4, 2, 0}, {2, 4, 0}, {0, 0, 8});
    C_p1 = Voigt3x3::from_rows({1, 0.5, 0}, {0.5, 1, 0}, {0, 0, 2});
    Cnu_m1 = Voigt3x3::from_rows({1, 0.5, 0}, {0.5, 1, 0}, {0, 0, 2});
    Cnu_p1 = Cnu_m1;
}

// --------------------------------------------------------- interpolation

double pi_interp(double phi) {
    if (phi <= -1.0) return 0.0;
    if (phi >= 1.0) return 1.0;
    return 0.25 * (2.0 + 3.0 * phi - phi * phi * phi);
}

double pi_interp_d1(double phi) {
    if (phi <= -1.0 || phi >= 1.0) return 0.0;
    return 0.25 * (3.0 - 3.0 * phi * phi);
}

double pi_interp_d2(double phi) {
    if (phi <= -1.0 || phi >= 1.0) return 0.0;
    return -1.5 * phi;
}

Coeffs coeffs_at(double phi, const MaterialParams& p) {
    const double w = pi_interp(phi);
    Coeffs c;
    c.kappa = p.kappa_m1 + w * (p.kappa_p1 - p.kappa_m1);
    c.M = p.M_m1 + w * (p.M_p1 - p.M_m1);
    c.alpha = p.alpha_m1 + w * (p.alpha_p1 - p.alpha_m1);
    c.C = p.C_m1 + w * (p.C_p1 - p.C_m1);
    c.Cnu = p.Cnu_m1 + w * (p.Cnu_p1 - p.Cnu_m1);
    return c;
}

CoeffDerivs coeff_derivs_at(double phi, const MaterialParams& p) {
    const double w1 = pi_interp_d1(phi);
    const double w2 = pi_interp_d2(phi);
    CoeffDerivs d;
    d.dM = w1 * (p.M_p1 - p.M_m1);
    d.dalpha = w1 * (p.alpha_p1 - p.alpha_m1);
    d.d2M = w2 * (p.M_p1 - p.M_m1);
    d.d2alpha = w2 * (p.alpha_p1 - p.alpha_m1);
    d.dC = w1 * (p.C_p1 - p.C_m1);
    d.d2C = w2 * (p.C_p1 - p.C_m1);
    return d;
}

double mobility_at(double phi, const MaterialParams& p) { return p.mobility(phi); }

double psi_terms(double phi_new, double phi_old, const MaterialParams& p) {
    return p.potential.dpsi_vex(phi_new) + p.potential.dpsi_cav(phi_old);
}

Voigt3 eigenstrain_voigt(double phi, const MaterialParams& p) {
    const double t = p.eigenstrain.scale * (phi - p.eigenstrain.shift);
    return {t, t, 0.0};
}

// --------------------------------------------------------- reduced energy

namespace {

struct WtContext {
    Voigt3 R;        // strain-type residual eps - T(phi)
    Voigt3 dT;       // strain-type d/dphi of eigenstrain
    double tr_eps;   // trace of the strain
    double G;        // theta - alpha(phi) * tr_eps
    Coeffs c;
    CoeffDerivs d;
};

WtContext wt_context(double phi, const Voigt3& strain, double theta, const MaterialParams& p) {
    WtContext k;
    k.c = coeffs_at(phi, p);
    k.d = coeff_derivs_at(phi, p);
    const Voigt3 T = eigenstrain_voigt(phi, p);
    k.R = {strain[0] - T[0], strain[1] - T[1], strain[2] - T[2]};
    k.dT = {p.eigenstrain.scale, p.eigenstrain.scale, 0.0};
    k.tr_eps = strain[0] + strain[1];
    k.G = theta - k.c.alpha * k.tr_eps;
    return k;
}

}  // namespace

double reduced_energy(double phi, const Voigt3& strain, double theta, const MaterialParams& p) {
    const WtContext k = wt_context(phi, strain, theta, p);
    return k.c.C.quad(k.R) + 0.5 * k.c.M * k.G * k.G;
}

double wtilde_phi(double phi, const Voigt3& strain, double theta, const MaterialParams& p) {
    const WtContext k = wt_context(phi, strain, theta, p);
    const double elastic = -2.0 * k.c.C.quad(k.dT, k.R) + k.d.dC.quad(k.R);
    const double fluid = 0.5 * k.d.dM * k.G * k.G - k.c.M * k.G * k.d.dalpha * k.tr_eps;
    return elastic + fluid;
}

Voigt3 wtilde_strain(double phi, const Voigt3& strain, double theta, const MaterialParams& p) {
    const WtContext k = wt_context(phi, strain, theta, p);
    const Voigt3 s = k.c.C.apply(k.R);
    const double coupling = k.c.M * k.c.alpha * k.G;
    return {2.0 * s[0] - coupling, 2.0 * s[1] - coupling, 2.0 * s[2]};
}

double wtilde_theta(double phi, const Voigt3& strain, double theta, const MaterialParams& p) {
    const WtContext k = wt_context(phi, strain, theta, p);
    return k.c.M * k.G;
}

double wtilde_phi_phi(double phi, const Voigt3& strain, double theta, const MaterialParams& p) {
    const WtContext k = wt_context(phi, strain, theta, p);
    const double elastic = -4.0 * k.d.dC.quad(k.dT, k.R) + 2.0 * k.c.C.quad(k.dT, k.dT) +
                           k.d.d2C.quad(k.R);
    const double fluid = 0.5 * k.d.d2M * k.G * k.G -
                         2.0 * k.d.dM * k.G * k.d.dalpha * k.tr_eps +
                         k.c.M * k.d.dalpha * k.d.dalpha * k.tr_eps * k.tr_eps -
                         k.c.M * k.G * k.d.d2alpha * k.tr_eps;
    return elastic + fluid;
}

Voigt3 wtilde_phi_strain(double phi, const Voigt3& strain, double theta,
                         const MaterialParams& p) {
    const WtContext k = wt_context(phi, strain, theta, p);
    const Voigt3 a = k.c.C.apply(k.dT);
    const Voigt3 b = k.d.dC.apply(k.R);
    const double coupling =
        -k.d.dM * k.c.alpha * k.G - k.c.M * k.d.dalpha * (k.G - k.c.alpha * k.tr_eps);
    return {-2.0 * a[0] + 2.0 * b[0] + coupling, -2.0 * a[1] + 2.0 * b[1] + coupling,
            -2.0 * a[2] + 2.0 * b[2]};
}

double wtilde_phi_theta(double phi, const Voigt3& strain, double theta,
                        const MaterialParams& p) {
    const WtContext k = wt_context(phi, strain, theta, p);
    return k.d.dM * k.G - k.c.M * k.d.dalpha * k.tr_eps;
}

// -------------------------------------------------------------- averages

const GaussRule01& gauss_rule_01(int n_points) {
    if (n_points < 1 || n_points > 32)
        throw std::invalid_argument("gauss_rule_01: point count out of range [1,32]");
    static std::map<int, GaussRule01> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n_points);
    if (it != cache.end()) return it->second;

    // Newton on Legendre P_n over [-1,1], then map to [0,1].
    GaussRule01 rule;
    const int n = n_points;
    for (int i = 1; i <= n; ++i) {
        double x = std::cos(M_PI * (i - 0.25) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            const double dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        const double dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes.push_back(0.5 * (1.0 - x));  // descending cos -> ascending node
        rule.weights.push_back(0.5 * w);
    }
    // cos ordering above already yields ascending nodes on [0,1]
    return cache.emplace(n_points, std::move(rule)).first->second;
}

double time_avg_wtilde_phi(double phi_old, double phi_new, const Voigt3& strain, double theta,
                           int quad_points, const MaterialParams& p) {
    const GaussRule01& g = gauss_rule_01(quad_points);
    double acc = 0.0;
    for (size_t q = 0; q < g.nodes.size(); ++q) {
        const double phi_s = phi_old + g.nodes[q] * (phi_new - phi_old);
        acc += g.weights[q] * wtilde_phi(phi_s, strain, theta, p);
    }
    return acc;
}

double time_avg_wtilde_phi_dnew(double phi_old, double phi_new, const Voigt3& strain,
                                double theta, int quad_points, const MaterialParams& p) {
    const GaussRule01& g = gauss_rule_01(quad_points);
    double acc = 0.0;
    for (size_t q = 0; q < g.nodes.size(); ++q) {
        const double s = g.nodes[q];
        const double phi_s = phi_old + s * (phi_new - phi_old);
        acc += g.weights[q] * s * wtilde_phi_phi(phi_s, strain, theta, p);
    }
    return acc;
}

Voigt3 time_avg_wtilde_phi_dstrain(double phi_old, double phi_new, const Voigt3& strain,
                                   double theta, int quad_points, const MaterialParams& p) {
    const GaussRule01& g = gauss_rule_01(quad_points);
    Voigt3 acc{0.0, 0.0, 0.0};
    for (size_t q = 0; q < g.nodes.size(); ++q) {
        const double phi_s = phi_old + g.nodes[q] * (phi_new - phi_old);
        const Voigt3 v = wtilde_phi_strain(phi_s, strain, theta, p);
        for (int i = 0; i < 3; ++i) acc[i] += g.weights[q] * v[i];
    }
    return acc;
}

double time_avg_wtilde_phi_dtheta(double phi_old, double phi_new, const Voigt3& strain,
                                  double theta, int quad_points, const MaterialParams& p) {
    const GaussRule01& g = gauss_rule_01(quad_points);
    double acc = 0.0;
    for (size_t q = 0; q < g.nodes.size(); ++q) {
        const double phi_s = phi_old + g.nodes[q] * (phi_new - phi_old);
        acc += g.weights[q] * wtilde_phi_theta(phi_s, strain, theta, p);
    }
    return acc;
}

std::array<double, 2> sources_at(double phi, const Voigt3& strain, double theta,
                                 const MaterialParams& p) {
    return {p.source_r.eval(phi, strain, theta), p.source_s.eval(phi, strain, theta)};
}

// ------------------------------------------------------------- validation

std::vector<std::string> validate_material(const MaterialParams& p, bool chl_mode) {
    std::vector<std::string> warnings;
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw std::invalid_argument("validate_material: " + what);
    };
    require(p.gamma > 0.0, "gamma must be positive");
    require(p.kappa_m1 > 0.0 && p.kappa_p1 > 0.0, "permeability endpoints must be positive");
    require(p.alpha_m1 > 0.0 && p.alpha_p1 > 0.0, "Biot-Willis endpoints must be positive");
    if (chl_mode) {
        warnings.push_back("chl mode: compressibility forced to zero, pressure is identically 0");
    } else {
        require(p.M_m1 > 0.0 && p.M_p1 > 0.0, "compressibility endpoints must be positive");
    }
    for (const auto* m : {&p.C_m1, &p.C_p1}) {
        require(m->symmetric(), "stiffness matrices must be symmetric");
        require(m->positive_definite(), "stiffness matrices must be positive definite");
    }
    for (const auto* m : {&p.Cnu_m1, &p.Cnu_p1}) {
        require(m->symmetric(), "viscosity matrices must be symmetric");
        require(m->positive_semidefinite(), "viscosity matrices must be positive semidefinite");
        if (!m->positive_definite(1e-14))
            warnings.push_back("viscosity matrix is not positive definite (zero allowed); "
                               "the corresponding dissipation term may vanish");
    }
    if (p.mobility.kind == MobilitySpec::Kind::Constant) {
        require(p.mobility.value > 0.0, "constant mobility must be positive");
    } else {
        require(p.mobility.floor >= 0.0 && p.mobility.scale > 0.0,
                "degenerate mobility needs floor >= 0 and scale > 0");
        warnings.push_back("degenerate mobility: uniqueness/solvability bounds do not apply");
    }
    require(static_cast<bool>(p.potential.psi) && static_cast<bool>(p.potential.dpsi_vex) &&
                static_cast<bool>(p.potential.dpsi_cav) && static_cast<bool>(p.potential.d2psi_vex),
            "potential split callables must all be set");
    return warnings;
}

}  // namespace chb
