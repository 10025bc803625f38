#include "rotortrap/model.hpp"
#include "rotortrap/errors.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <sstream>

namespace rotortrap {

double TrapDrive::voltage(double t) const { return v0 * std::cos(omega_d * t); }

namespace {

[[noreturn]] void fail_constraint(const std::string& what) {
    throw ConstraintViolation("constraint violated: " + what);
}

std::string num(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

} // namespace

TrapDrive validate_trap(const TrapDrive& raw) {
    if (!(raw.v0 > 0.0)) fail_constraint("V0 > 0 (got " + num(raw.v0) + ")");
    if (!(raw.omega_d > 0.0)) fail_constraint("omega_d > 0 (got " + num(raw.omega_d) + ")");
    if (!(raw.ell0 > 0.0)) fail_constraint("ell0 > 0 (got " + num(raw.ell0) + ")");
    const double sum = raw.ax + raw.ay + raw.az;
    if (std::abs(sum) > 1e-12)
        fail_constraint("a_x + a_y + a_z = 0 within 1e-12 (got " + num(sum) + ")");
    if (!(raw.ax < raw.az)) fail_constraint("a_x < a_z (got a_x=" + num(raw.ax) + ", a_z=" + num(raw.az) + ")");
    if (!(raw.az < 0.0)) fail_constraint("a_z < 0 (got " + num(raw.az) + ")");
    if (!(raw.ay > 0.0)) fail_constraint("a_y > 0 (got " + num(raw.ay) + ")");
    return raw;
}

RigidBody validate_body(const RigidBody& raw) {
    if (!(raw.I1 > 0.0 && raw.I2 > 0.0 && raw.I3 > 0.0))
        fail_constraint("all principal moments of inertia positive");
    const double qscale = std::abs(raw.Q1) + std::abs(raw.Q2) + std::abs(raw.Q3);
    const double trace = raw.Q1 + raw.Q2 + raw.Q3;
    if (qscale > 0.0 && std::abs(trace) > 1e-12 * qscale)
        fail_constraint("quadrupole trace Q1+Q2+Q3 = 0 within 1e-12 relative (got " +
                        num(trace / qscale) + " relative)");
    if (!(raw.mass > 0.0)) fail_constraint("mass > 0");
    if (raw.gamma0 < 0.0) fail_constraint("gamma0 >= 0");
    return raw;
}

namespace {

// Ring-resolved conductor-equilibrium surface charge on the spheroid
// x²/as² + y²/as² + z²/c². The density is proportional to the distance from
// the center to the tangent plane, sigma(r) ∝ 1/sqrt(rho²/as⁴ + z²/c⁴);
// the azimuthal integral is analytic, so the quadrature runs over u = z/c.
struct RingIntegrand {
    double as, c; // semi-axes
    int moment;   // 0: total charge, 2: ∫z² dq, 4: ∫(x²+y²) dq (per unit sigma0)

    double operator()(double u) const {
        const double z = c * u;
        const double rho2 = as * as * (1.0 - u * u);
        const double rho = std::sqrt(std::max(rho2, 0.0));
        // dA = 2π rho ds, ds = sqrt(1 + (d rho/dz)²) dz;
        // rho drho/dz = -as² z / c², so rho ds = sqrt(rho² + (as²z/c²)²) dz.
        const double rho_ds = std::sqrt(rho2 + std::pow(as * as * z / (c * c), 2));
        const double inv_d = std::sqrt(rho2 / std::pow(as, 4) + z * z / std::pow(c, 4));
        if (inv_d == 0.0) return 0.0; // sphere pole limit handled by continuity
        const double dq = rho_ds / inv_d; // ∝ sigma dA per dz, up to constants
        switch (moment) {
            case 0: return dq;
            case 2: return z * z * dq;
            default: return rho * rho * dq; // full ring: ∫(x²+y²) = rho² per unit charge
        }
    }
};

double integrate_ring(const RingIntegrand& f, double rel_tol) {
    struct Ctx { const RingIntegrand* f; };
    Ctx ctx{&f};
    gsl_function gf;
    gf.function = [](double u, void* p) { return (*static_cast<Ctx*>(p)->f)(u); };
    gf.params = &ctx;

    std::unique_ptr<gsl_integration_workspace, decltype(&gsl_integration_workspace_free)>
        ws(gsl_integration_workspace_alloc(2048), gsl_integration_workspace_free);
    double result = 0.0, abserr = 0.0;
    gsl_error_handler_t* old = gsl_set_error_handler_off();
    int status = gsl_integration_qag(&gf, -1.0, 1.0, 0.0, rel_tol, 2048,
                                     GSL_INTEG_GAUSS61, ws.get(), &result, &abserr);
    gsl_set_error_handler(old);
    if (status != GSL_SUCCESS || (result != 0.0 && std::abs(abserr / result) > rel_tol))
        throw QuadratureFailure("spheroid surface quadrature did not converge to " +
                                num(rel_tol) + " relative");
    return result;
}

} // namespace

SpheroidQuadrupole spheroid_quadrupole(const SpheroidSpec& spec) {
    if (!(spec.a_minor > 0.0) || !(spec.a_minor <= spec.b_major))
        throw ConstraintViolation("constraint violated: 0 < a_minor <= b_major");

    const double as = spec.a_minor / 2.0;
    const double c = spec.b_major / 2.0;
    const double rel_tol = 1e-10; // headroom below the 1e-8 convergence contract

    const double norm = integrate_ring({as, c, 0}, rel_tol);
    const double z2 = spec.q_tot * integrate_ring({as, c, 2}, rel_tol) / norm;
    const double t2 = spec.q_tot * integrate_ring({as, c, 4}, rel_tol) / norm;

    // Q_ij = ∫ dq (3 x_i x_j − r² δ_ij); axisymmetry gives ∫x² = ∫y² = t2/2.
    SpheroidQuadrupole out;
    out.Q3 = 2.0 * z2 - t2;
    out.Q1 = out.Q2 = -out.Q3 / 2.0;
    out.deltaQ_quadrature = std::abs(out.Q2 - out.Q3);

    const double b = spec.b_major, a = spec.a_minor;
    out.deltaQ_approx = spec.q_tot * b * b * (1.0 + 2.0 * a * a / (b * b)) / 4.0;
    return out;
}

RigidBody body_from_spheroid(const SpheroidSpec& spec, double gamma0, DeltaQModel dq) {
    const SpheroidQuadrupole quad = spheroid_quadrupole(spec);
    const double as = spec.a_minor / 2.0;
    const double c = spec.b_major / 2.0;
    const double mass = spec.density * 4.0 / 3.0 * constants::pi * as * as * c;

    RigidBody body;
    body.mass = mass;
    body.q_tot = spec.q_tot;
    body.I1 = body.I2 = mass * (as * as + c * c) / 5.0;
    body.I3 = 2.0 * mass * as * as / 5.0;
    body.gamma0 = gamma0;

    if (dq == DeltaQModel::SurfaceQuadrature) {
        body.Q1 = quad.Q1;
        body.Q2 = quad.Q2;
        body.Q3 = quad.Q3;
    } else {
        // Rescale the quadrature shape (Q1 = Q2 = −Q3/2) so |Q2 − Q3| equals
        // the closed-form estimate; |Q2 − Q3| = (3/2)|Q3|.
        const double sign = (quad.Q3 >= 0.0) ? 1.0 : -1.0;
        body.Q3 = sign * 2.0 / 3.0 * std::abs(quad.deltaQ_approx);
        body.Q1 = body.Q2 = -body.Q3 / 2.0;
    }
    return validate_body(body);
}

PendulumOmega pendulum_omega0(const TrapDrive& trap, const RigidBody& body) {
    const double product = trap.v0 * (trap.ax - trap.ay) * (body.Q2 - body.Q3);
    PendulumOmega out;
    out.standard_orientation = product > 0.0;
    out.omega0 = std::sqrt(std::abs(product) / (3.0 * trap.ell0 * trap.ell0 * body.I1));
    return out;
}

} // namespace rotortrap
