#include "rotortrap/floquet.hpp"

#include "rotortrap/errors.hpp"
#include "rotortrap/ode.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace rotortrap {

namespace {

using State2 = std::array<double, 2>;

OdeSettings monodromy_tolerances() {
    OdeSettings s;
    s.rel_tol = 1e-12;
    s.abs_tol = 1e-14;
    return s;
}

} // namespace

Eigen::Matrix2d monodromy(const PeriodicLinearSystem& sys) {
    if (!(sys.period > 0.0)) throw ConstraintViolation("period must be positive");
    if (!sys.coeff) throw ConstraintViolation("coefficient function must be set");

    auto rhs = [&sys](const State2& x, State2& dxdt, double t) {
        const Eigen::Matrix2d A = sys.coeff(t);
        dxdt[0] = A(0, 0) * x[0] + A(0, 1) * x[1];
        dxdt[1] = A(1, 0) * x[0] + A(1, 1) * x[1];
    };

    Eigen::Matrix2d M;
    for (int col = 0; col < 2; ++col) {
        State2 x{col == 0 ? 1.0 : 0.0, col == 0 ? 0.0 : 1.0};
        const State2 xT = integrate_to(rhs, x, 0.0, sys.period, monodromy_tolerances());
        M(0, col) = xT[0];
        M(1, col) = xT[1];
    }
    return M;
}

double spectral_radius(const Eigen::Matrix2d& m) {
    const double tr = m.trace();
    const double det = m.determinant();
    const double disc = tr * tr - 4.0 * det;
    if (disc < 0.0) return std::sqrt(std::abs(det)); // complex pair, |lambda|^2 = det
    const double root = std::sqrt(disc);
    return std::max(std::abs(0.5 * (tr + root)), std::abs(0.5 * (tr - root)));
}

bool is_stable(const PeriodicLinearSystem& sys) {
    return spectral_radius(monodromy(sys)) <= 1.0 + 1e-9;
}

double mathieu_boundary_q(double a, double damping) {
    if (a < -1.0 || a > 1.0)
        throw ConstraintViolation("mathieu_boundary_q expects a in [-1, 1]");
    auto stable_at = [a, damping](double q) {
        PeriodicLinearSystem sys;
        sys.period = constants::pi; // cos(2 tau) has period pi
        sys.coeff = [a, damping, q](double tau) {
            Eigen::Matrix2d A;
            A << 0.0, 1.0, -(a - 2.0 * q * std::cos(2.0 * tau)), -damping;
            return A;
        };
        return is_stable(sys);
    };

    const double q_max = 10.0;
    const double dq = 0.02;
    bool prev = stable_at(0.0);
    double q_prev = 0.0;
    double q_change = -1.0;
    for (double q = dq; q <= q_max + 1e-12; q += dq) {
        const bool cur = stable_at(q);
        if (cur != prev) {
            q_change = q;
            break;
        }
        prev = cur;
        q_prev = q;
    }
    if (q_change < 0.0)
        throw BoundaryNotFound("no stability change for q in [0, 10]");

    double lo = q_prev, hi = q_change;
    const bool lo_stable = prev;
    while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        if (stable_at(mid) == lo_stable) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

bool pendulum_instability(const TrapDrive& trap, const RigidBody& body) {
    validate_trap(trap);
    validate_body(body);
    const double w0sq = std::pow(pendulum_omega0(trap, body).omega0, 2);
    const double gamma0 = body.gamma0;
    const double omega_d = trap.omega_d;
    PeriodicLinearSystem sys;
    sys.period = trap.drive_period();
    sys.coeff = [w0sq, gamma0, omega_d](double t) {
        Eigen::Matrix2d A;
        A << 0.0, 1.0, -2.0 * w0sq * std::cos(omega_d * t), -gamma0;
        return A;
    };
    return !is_stable(sys);
}

double pendulum_instability_boundary(const TrapDrive& trap, const RigidBody& body,
                                     double omega_lo, double omega_hi, double rel_tol) {
    if (!(omega_lo > 0.0) || !(omega_hi > omega_lo))
        throw ConstraintViolation("boundary search requires 0 < omega_lo < omega_hi");
    auto unstable_at = [&](double omega) {
        TrapDrive t = trap;
        t.omega_d = omega;
        return pendulum_instability(t, body);
    };
    const bool lo_unstable = unstable_at(omega_lo);
    const bool hi_unstable = unstable_at(omega_hi);
    if (lo_unstable == hi_unstable) return std::numeric_limits<double>::quiet_NaN();
    double lo = omega_lo, hi = omega_hi;
    while (hi - lo > rel_tol * hi) {
        const double mid = std::sqrt(lo * hi);
        if (unstable_at(mid) == lo_unstable) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace rotortrap
