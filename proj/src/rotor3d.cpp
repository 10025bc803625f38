#include "rotortrap/rotor3d.hpp"

#include "rotortrap/errors.hpp"
#include "rotortrap/floquet.hpp"
#include "rotortrap/ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace rotortrap {

namespace {

Eigen::Matrix3d rot_z(double angle) {
    Eigen::Matrix3d R;
    const double c = std::cos(angle), s = std::sin(angle);
    R << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    return R;
}

Eigen::Matrix3d rot_y(double angle) {
    Eigen::Matrix3d R;
    const double c = std::cos(angle), s = std::sin(angle);
    R << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
    return R;
}

} // namespace

Orientation Orientation::from_quaternion(const Eigen::Quaterniond& q) {
    Orientation o;
    o.q_ = q.normalized();
    return o;
}

Orientation Orientation::from_euler_zyz(double alpha, double beta, double gamma) {
    Orientation o;
    o.q_ = Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitZ()) *
           Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitY()) *
           Eigen::AngleAxisd(gamma, Eigen::Vector3d::UnitZ());
    o.q_.normalize();
    return o;
}

Orientation Orientation::from_matrix(const Eigen::Matrix3d& R) {
    Orientation o;
    o.q_ = Eigen::Quaterniond(R).normalized();
    return o;
}

EulerZyz Orientation::euler_zyz() const {
    const Eigen::Matrix3d R = matrix();
    EulerZyz e;
    const double s_beta = std::hypot(R(0, 2), R(1, 2));
    e.beta = std::atan2(s_beta, R(2, 2));
    if (s_beta >= 1e-8) {
        e.alpha = std::atan2(R(1, 2), R(0, 2));
        e.gamma = std::atan2(R(2, 1), -R(2, 0));
    } else {
        e.gamma = 0.0;
        if (R(2, 2) > 0.0) {
            e.beta = 0.0;
            e.alpha = std::atan2(R(1, 0), R(0, 0));
        } else {
            e.beta = constants::pi;
            e.alpha = std::atan2(-R(0, 1), -R(0, 0));
        }
    }
    return e;
}

Eigen::Matrix3d rotation_matrix(double alpha, double beta, double gamma) {
    return rot_z(alpha) * rot_y(beta) * rot_z(gamma);
}

Eigen::Vector3d euler_rates_to_body_omega(double alpha_dot, double beta_dot,
                                          double gamma_dot, double beta, double gamma) {
    const double sb = std::sin(beta), cb = std::cos(beta);
    const double sg = std::sin(gamma), cg = std::cos(gamma);
    return Eigen::Vector3d(-alpha_dot * sb * cg + beta_dot * sg,
                           alpha_dot * sb * sg + beta_dot * cg,
                           alpha_dot * cb + gamma_dot);
}

namespace {

double drive_voltage(const TrapDrive& trap, double t, DriveMode mode) {
    return mode == DriveMode::Oscillating ? trap.voltage(t) : trap.v0;
}

Eigen::Vector3d torque_from_matrix(const Eigen::Matrix3d& R, const TrapDrive& trap,
                                   const RigidBody& body, double voltage) {
    const Eigen::Vector3d q_diag(body.Q1, body.Q2, body.Q3);
    const Eigen::Matrix3d Q_lab = R * q_diag.asDiagonal() * R.transpose();
    const Eigen::Vector3d a(trap.ax, trap.ay, trap.az);
    Eigen::Vector3d N = Eigen::Vector3d::Zero();
    for (int j = 0; j < 3; ++j)
        N += a[j] * Eigen::Vector3d::Unit(j).cross(Q_lab.col(j));
    return (2.0 * voltage / (3.0 * trap.ell0 * trap.ell0)) * N;
}

} // namespace

double potential_energy(const Orientation& orientation, const TrapDrive& trap,
                        const RigidBody& body, double t) {
    const Eigen::Matrix3d R = orientation.matrix();
    const Eigen::Vector3d q_diag(body.Q1, body.Q2, body.Q3);
    const Eigen::Matrix3d Q_lab = R * q_diag.asDiagonal() * R.transpose();
    const double trace = trap.ax * Q_lab(0, 0) + trap.ay * Q_lab(1, 1) + trap.az * Q_lab(2, 2);
    return trap.voltage(t) / (3.0 * trap.ell0 * trap.ell0) * trace;
}

Eigen::Vector3d torque(const Orientation& orientation, const TrapDrive& trap,
                       const RigidBody& body, double t) {
    return torque_from_matrix(orientation.matrix(), trap, body, trap.voltage(t));
}

BodyState Trajectory3D::back() const {
    if (t.empty()) throw WindowOutOfRange("empty trajectory");
    BodyState s;
    s.orientation = Orientation::from_quaternion(q.back());
    s.omega_body = omega_body.back();
    s.t = t.back();
    return s;
}

namespace {

// State layout: {qw, qx, qy, qz, w1, w2, w3}.
using State7 = std::array<double, 7>;

struct RigidRhs {
    TrapDrive trap;
    RigidBody body;
    DriveMode mode;
    double norm_gain; // pulls the quaternion back to unit norm off-manifold

    void operator()(const State7& x, State7& dxdt, double t) const {
        Eigen::Quaterniond q(x[0], x[1], x[2], x[3]);
        const double n2 = q.squaredNorm();
        const Eigen::Quaterniond qn = q.normalized();
        const Eigen::Vector3d w(x[4], x[5], x[6]);

        const Eigen::Matrix3d R = qn.toRotationMatrix();
        const Eigen::Vector3d N_lab =
            torque_from_matrix(R, trap, body, drive_voltage(trap, t, mode));
        const Eigen::Vector3d N_body = R.transpose() * N_lab;

        const Eigen::Vector3d I(body.I1, body.I2, body.I3);
        const Eigen::Vector3d L = I.cwiseProduct(w);
        const Eigen::Vector3d w_dot =
            (N_body - w.cross(L) - body.gamma0 * L).cwiseQuotient(I);

        // dq/dt = (1/2) q * (0, w_body), plus a norm-stabilizing term.
        const Eigen::Quaterniond w_quat(0.0, w.x(), w.y(), w.z());
        Eigen::Quaterniond q_dot = q * w_quat;
        const double half = 0.5;
        const double stab = norm_gain * (1.0 - n2);
        dxdt[0] = half * q_dot.w() + stab * x[0];
        dxdt[1] = half * q_dot.x() + stab * x[1];
        dxdt[2] = half * q_dot.y() + stab * x[2];
        dxdt[3] = half * q_dot.z() + stab * x[3];
        dxdt[4] = w_dot.x();
        dxdt[5] = w_dot.y();
        dxdt[6] = w_dot.z();
    }
};

} // namespace

Trajectory3D integrate_rigid(const TrapDrive& trap, const RigidBody& body,
                             const BodyState& state0, double t_end, double dt_max,
                             double dt_sample, DriveMode mode) {
    validate_trap(trap);
    validate_body(body);
    const double T_drive = trap.drive_period();
    if (!(dt_max > 0.0) || dt_max > T_drive / 200.0 * (1.0 + 1e-12))
        throw ConstraintViolation("dt_max must be positive and at most T_drive/200");
    if (!(t_end > 0.0)) throw ConstraintViolation("integration span must be positive");
    if (dt_sample <= 0.0) dt_sample = T_drive / 64.0;

    RigidRhs rhs{trap, body, mode, trap.omega_d};
    OdeSettings settings;
    settings.rel_tol = 1e-12;
    settings.abs_tol = 1e-14;
    settings.max_dt = dt_max;

    const auto n_samples =
        static_cast<std::size_t>(std::floor(t_end / dt_sample * (1.0 + 1e-12))) + 1;
    Trajectory3D traj;
    traj.t.reserve(n_samples);
    traj.q.reserve(n_samples);
    traj.omega_body.reserve(n_samples);

    const Eigen::Quaterniond q0 = state0.orientation.quaternion();
    State7 x0{q0.w(), q0.x(), q0.y(), q0.z(),
              state0.omega_body.x(), state0.omega_body.y(), state0.omega_body.z()};
    integrate_sampled(
        rhs, x0, state0.t, dt_sample, n_samples,
        [&traj](const State7& x, double t) {
            Eigen::Quaterniond q(x[0], x[1], x[2], x[3]);
            q.normalize();
            traj.t.push_back(t);
            traj.q.push_back(q);
            traj.omega_body.emplace_back(x[4], x[5], x[6]);
        },
        settings);
    return traj;
}

EquilibriumSet equilibria(const TrapDrive& trap, const RigidBody& body) {
    validate_trap(trap);
    validate_body(body);

    const std::array<double, 3> Q{body.Q1, body.Q2, body.Q3};
    const std::array<double, 3> I{body.I1, body.I2, body.I3};
    const std::array<double, 3> a{trap.ax, trap.ay, trap.az};

    double q_scale = 0.0;
    for (double v : Q) q_scale = std::max(q_scale, std::abs(v));
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            if (std::abs(Q[i] - Q[j]) <= 1e-12 * q_scale)
                throw DegenerateSpectrum("quadrupole eigenvalues coincide; "
                                         "equilibria form a continuum");
            if (std::abs(a[i] - a[j]) <= 1e-12)
                throw DegenerateSpectrum("trap coefficients coincide; "
                                         "equilibria form a continuum");
        }

    // All six assignments of body principal axes to lab axes.
    const std::array<std::array<int, 3>, 6> perms{{
        {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

    EquilibriumSet set;
    set.entries.reserve(6);
    for (const auto& sigma : perms) {
        // sigma[m] = lab axis that body axis m points along.
        Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
        for (int m = 0; m < 3; ++m) R(sigma[m], m) = 1.0;
        if (R.determinant() < 0.0) R.col(2) *= -1.0; // keep it a proper rotation

        std::array<int, 3> inv{}; // inv[n] = body axis along lab axis n
        for (int m = 0; m < 3; ++m) inv[sigma[m]] = m;

        Equilibrium eq;
        eq.orientation = Orientation::from_matrix(R);
        eq.stable = true;
        for (int n = 0; n < 3; ++n) {
            const int i = (n + 1) % 3, j = (n + 2) % 3;
            // Rotation by theta about lab axis n mixes lab axes i and j:
            // U(theta) = V(t)/(3 l0^2) [const + (a_i-a_j)(Qb_i-Qb_j)/2 cos 2theta],
            // giving theta'' + gamma0 theta' + G cos(Omega_d t) theta = 0.
            const double G = -2.0 * trap.v0 * (a[i] - a[j]) * (Q[inv[i]] - Q[inv[j]]) /
                             (3.0 * trap.ell0 * trap.ell0 * I[inv[n]]);
            eq.mode_q[n] = 2.0 * std::abs(G) / (trap.omega_d * trap.omega_d);
            eq.secular_freq[n] = std::abs(G) / trap.omega_d;

            PeriodicLinearSystem sys;
            sys.period = trap.drive_period();
            const double gamma0 = body.gamma0;
            const double omega_d = trap.omega_d;
            sys.coeff = [G, gamma0, omega_d](double t) {
                Eigen::Matrix2d A;
                A << 0.0, 1.0, -G * std::cos(omega_d * t), -gamma0;
                return A;
            };
            eq.mode_stable[n] = is_stable(sys);
            eq.stable = eq.stable && eq.mode_stable[n];
        }
        set.entries.push_back(eq);
    }
    return set;
}

LibrationFrequencies libration_frequencies(const TrapDrive& trap, const RigidBody& body) {
    validate_trap(trap);
    validate_body(body);
    LibrationFrequencies out;
    const double pref = 2.0 * trap.v0 / (3.0 * trap.ell0 * trap.ell0 * trap.omega_d);
    out.omega_alpha = pref / body.I1 * std::abs((trap.ax - trap.ay) * (body.Q2 - body.Q3));
    out.omega_beta = pref / body.I2 * std::abs((trap.ax - trap.az) * (body.Q1 - body.Q3));
    out.omega_gamma = pref / body.I3 * std::abs((trap.ay - trap.az) * (body.Q1 - body.Q2));

    const std::array<double, 3> Q{body.Q1, body.Q2, body.Q3};
    const std::array<double, 3> I{body.I1, body.I2, body.I3};
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                worst = std::max(worst, trap.v0 * std::abs(Q[i] - Q[j]) /
                                            (I[k] * trap.omega_d * trap.omega_d *
                                             trap.ell0 * trap.ell0));
    out.validity_parameter = worst;
    out.valid = worst < 0.1;
    return out;
}

RotatingFrameFrequencies rotating_frame_frequencies(const TrapDrive& trap,
                                                    const RigidBody& body,
                                                    double omega_d) {
    validate_trap(trap);
    validate_body(body);
    if (!(omega_d > 0.0)) throw ConstraintViolation("omega_d must be positive");
    TrapDrive t = trap;
    t.omega_d = omega_d;

    RotatingFrameFrequencies out;
    const PendulumOmega pw = pendulum_omega0(t, body);
    out.alpha.omega = pw.omega0;
    // The co-rotating alpha fixed point exists only while the dissipative tilt
    // gamma0 Omega_d / 2 stays below the potential amplitude omega0^2 / 2.
    out.alpha.unstable = body.gamma0 * omega_d > pw.omega0 * pw.omega0;

    const double half = 0.5 * omega_d;
    const double gyro = half * half;
    const double pot = t.v0 * (trap.ax - trap.ay) / (6.0 * trap.ell0 * trap.ell0);

    const double beta_sq = (body.I1 / body.I2) * gyro + pot * (body.Q1 - body.Q3) / body.I2;
    if (beta_sq >= 0.0) out.beta.omega = std::sqrt(beta_sq);
    else out.beta.unstable = true;

    const double gamma_sq = (body.I1 / body.I3) * (body.I1 / body.I2 - 1.0) * gyro +
                            pot * (body.Q2 - body.Q1) / body.I3;
    if (gamma_sq >= 0.0) out.gamma.omega = std::sqrt(gamma_sq);
    else out.gamma.unstable = true;
    return out;
}

PotentialDecomposition corotating_potential_decomposition(const Orientation& orientation,
                                                          const TrapDrive& trap,
                                                          const RigidBody& body) {
    const EulerZyz e = orientation.euler_zyz();
    const double cb = std::cos(e.beta), sb = std::sin(e.beta);
    const double cg = std::cos(e.gamma), sg = std::sin(e.gamma);
    const double c2a = std::cos(2.0 * e.alpha), s2a = std::sin(2.0 * e.alpha);
    const double cb2 = cb * cb, sb2 = sb * sb, cg2 = cg * cg, sg2 = sg * sg;

    const double bracket = body.Q1 * (cb2 * cg2 - sg2) + body.Q2 * (cb2 * sg2 - cg2) +
                           body.Q3 * sb2;
    const double cross = (body.Q2 - body.Q1) * cb * std::sin(2.0 * e.gamma);

    const double l0sq = trap.ell0 * trap.ell0;
    const double axy = trap.ax - trap.ay;

    PotentialDecomposition out;
    out.U0 = trap.v0 / (12.0 * l0sq) * axy * (bracket * c2a + cross * s2a);
    out.u1 = trap.v0 / (3.0 * l0sq) *
             (trap.az * (body.Q3 * cb2 + (body.Q1 * cg2 + body.Q2 * sg2) * sb2) +
              0.5 * (trap.ax + trap.ay) *
                  ((body.Q1 * sg2 + body.Q2 * cg2) + body.Q3 * sb2 +
                   (body.Q1 * cg2 + body.Q2 * sg2) * cb2));
    out.u2 = out.U0;
    out.u3 = -trap.v0 / (12.0 * l0sq) * axy * (bracket * s2a - cross * c2a);
    return out;
}

ComFrequencies com_secular_frequencies(const TrapDrive& trap, double charge, double mass) {
    validate_trap(trap);
    if (!(mass > 0.0)) throw ConstraintViolation("mass must be positive");
    ComFrequencies out;
    const std::array<double, 3> a{trap.ax, trap.ay, trap.az};
    out.valid = true;
    for (int u = 0; u < 3; ++u) {
        const double q_u = 4.0 * std::abs(charge * trap.v0 * a[u]) /
                           (mass * trap.ell0 * trap.ell0 * trap.omega_d * trap.omega_d);
        out.q_param[u] = q_u;
        out.omega[u] = q_u * trap.omega_d / (2.0 * std::sqrt(2.0));
        if (q_u >= 0.4) out.valid = false;
    }
    return out;
}

} // namespace rotortrap
