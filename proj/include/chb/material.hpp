#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace chb {

// Voigt conventions: strain-type vectors are (e11, e22, 2*e12), stress-type
// vectors are (s11, s22, s12); their dot product equals the tensor
// contraction. A 3x3 Voigt matrix maps strain-type to stress-type, and
// eps^T C eps is the elastic quadratic form.
using Voigt3 = std::array<double, 3>;

struct Voigt3x3 {
    std::array<double, 9> a{};  // row-major

    double& operator()(int i, int j) { return a[3 * i + j]; }
    double operator()(int i, int j) const { return a[3 * i + j]; }
    Voigt3 apply(const Voigt3& v) const;
    double quad(const Voigt3& v) const { return quad(v, v); }
    double quad(const Voigt3& u, const Voigt3& v) const;  // u^T A v
    bool symmetric(double tol = 1e-12) const;
    bool positive_definite(double tol = 0.0) const;  // pivoted LDL^T test
    bool positive_semidefinite(double tol = 1e-12) const;

    static Voigt3x3 zero() { return {}; }
    static Voigt3x3 from_rows(const std::array<double, 3>& r0, const std::array<double, 3>& r1,
                              const std::array<double, 3>& r2);
};

Voigt3x3 operator+(const Voigt3x3& x, const Voigt3x3& y);
Voigt3x3 operator-(const Voigt3x3& x, const Voigt3x3& y);
Voigt3x3 operator*(double s, const Voigt3x3& x);

// Double-well potential with a convex-concave split:
// psi(x) = psi_vex(x) + psi_cav(x), dpsi_vex convex part derivative evaluated
// implicitly in time, dpsi_cav concave part derivative evaluated explicitly.
struct PotentialSplit {
    std::function<double(double)> psi;
    std::function<double(double)> dpsi_vex;
    std::function<double(double)> dpsi_cav;
    std::function<double(double)> d2psi_vex;

    // psi = 1/4 (1-x^2)^2, dpsi_vex = x^3, dpsi_cav = -x
    static PotentialSplit quartic_double_well();
};

struct MobilitySpec {
    enum class Kind { Constant, Degenerate } kind = Kind::Constant;
    double value = 1.0;                       // Constant
    double floor = 1e-14, scale = 1.0 / 16.0; // Degenerate: floor + scale*(x^2-1)^2

    double operator()(double phi) const;
    bool phi_dependent() const { return kind == Kind::Degenerate; }
};

struct SourceSpec {
    enum class Kind { Zero, Constant, LogisticPhi } kind = Kind::Zero;
    double value = 0.0;  // Constant: the value; LogisticPhi: amplitude of (1-phi^2)

    double eval(double phi, const Voigt3& strain, double theta) const;
    bool is_zero() const { return kind == Kind::Zero || value == 0.0; }
};

struct BodyForceSpec {
    enum class Kind { Zero, Constant } kind = Kind::Zero;
    std::array<double, 2> value{0.0, 0.0};

    std::array<double, 2> eval(double x, double y, double t) const;
    bool is_zero() const;
};

// Swelling eigenstrain T(phi) = scale*(phi - shift)*I.
struct EigenstrainSpec {
    double scale = 0.3;
    double shift = 0.0;
};

// Phase-dependent coefficients interpolate affinely between their values at
// phi = -1 ("_m1") and phi = +1 ("_p1") through the clamped cubic pi.
struct MaterialParams {
    double gamma = 1e-4;
    EigenstrainSpec eigenstrain{};
    double kappa_m1 = 1.0, kappa_p1 = 0.1;
    double M_m1 = 1.0, M_p1 = 0.1;
    double alpha_m1 = 1.0, alpha_p1 = 0.5;
    Voigt3x3 C_m1, C_p1;
    Voigt3x3 Cnu_m1, Cnu_p1;
    MobilitySpec mobility{};
    PotentialSplit potential = PotentialSplit::quartic_double_well();
    SourceSpec source_r{}, source_s{};
    BodyForceSpec body_force{};

    MaterialParams();  // defaults: the reference two-phase parameter set
};

struct Coeffs {
    double kappa, M, alpha;
    Voigt3x3 C, Cnu;
};

// First and second phi-derivatives of the interpolated coefficients.
struct CoeffDerivs {
    double dM, dalpha;
    double d2M, d2alpha;
    Voigt3x3 dC, d2C;
};

// C^1 interpolation weight: 0 below -1, 1 above 1, 1/4 (2 + 3x - x^3) between.
double pi_interp(double phi);
double pi_interp_d1(double phi);
double pi_interp_d2(double phi);

Coeffs coeffs_at(double phi, const MaterialParams& p);
CoeffDerivs coeff_derivs_at(double phi, const MaterialParams& p);

double mobility_at(double phi, const MaterialParams& p);

// Split potential derivative: dpsi_vex(phi_new) + dpsi_cav(phi_old).
double psi_terms(double phi_new, double phi_old, const MaterialParams& p);

Voigt3 eigenstrain_voigt(double phi, const MaterialParams& p);  // strain-type

// Reduced energy density
//   W~(phi, eps, theta) = (eps-T)^T C(phi) (eps-T) + M(phi)/2 (theta - alpha(phi) tr eps)^2
// (no 1/2 on the elastic part) and its analytic partial derivatives.
double reduced_energy(double phi, const Voigt3& strain, double theta, const MaterialParams& p);
double wtilde_phi(double phi, const Voigt3& strain, double theta, const MaterialParams& p);
Voigt3 wtilde_strain(double phi, const Voigt3& strain, double theta,
                     const MaterialParams& p);  // stress-type
double wtilde_theta(double phi, const Voigt3& strain, double theta, const MaterialParams& p);

// Second derivatives used by Newton solvers.
double wtilde_phi_phi(double phi, const Voigt3& strain, double theta, const MaterialParams& p);
Voigt3 wtilde_phi_strain(double phi, const Voigt3& strain, double theta,
                         const MaterialParams& p);  // stress-type
double wtilde_phi_theta(double phi, const Voigt3& strain, double theta, const MaterialParams& p);

// Gauss-Legendre rule on [0,1]; nodes ascending, weights positive, sum 1.
struct GaussRule01 {
    std::vector<double> nodes, weights;
};
const GaussRule01& gauss_rule_01(int n_points);

// Average of wtilde_phi along the segment phi_old -> phi_new (n-point Gauss),
// and its derivatives with respect to phi_new, strain and theta.
double time_avg_wtilde_phi(double phi_old, double phi_new, const Voigt3& strain, double theta,
                           int quad_points, const MaterialParams& p);
double time_avg_wtilde_phi_dnew(double phi_old, double phi_new, const Voigt3& strain,
                                double theta, int quad_points, const MaterialParams& p);
Voigt3 time_avg_wtilde_phi_dstrain(double phi_old, double phi_new, const Voigt3& strain,
                                   double theta, int quad_points, const MaterialParams& p);
double time_avg_wtilde_phi_dtheta(double phi_old, double phi_new, const Voigt3& strain,
                                  double theta, int quad_points, const MaterialParams& p);

// (r, s) at a state point per the configured source specs.
std::array<double, 2> sources_at(double phi, const Voigt3& strain, double theta,
                                 const MaterialParams& p);

// Hard violations throw std::invalid_argument; soft ones (zero viscosity,
// degenerate mobility, zero compressibility in chl mode) come back as
// warnings for the caller to log.
std::vector<std::string> validate_material(const MaterialParams& p, bool chl_mode);

}  // namespace chb
