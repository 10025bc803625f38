#include "rotortrap/rotor1d.hpp"

#include "rotortrap/errors.hpp"
#include "rotortrap/floquet.hpp"
#include "rotortrap/ode.hpp"
#include "rotortrap/parallel.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace rotortrap {

namespace {

using State2 = std::array<double, 2>; // {alpha, alpha_dot}

struct DrivenPendulum {
    double omega0_sq;
    double gamma0;
    double omega_d;

    void operator()(const State2& x, State2& dxdt, double t) const {
        dxdt[0] = x[1];
        dxdt[1] = -gamma0 * x[1] - omega0_sq * std::cos(omega_d * t) * std::sin(2.0 * x[0]);
    }
};

struct CorotatingPendulum {
    double omega0_sq;
    double gamma0;
    double omega_d;

    void operator()(const State2& x, State2& dxdt, double /*t*/) const {
        dxdt[0] = x[1];
        dxdt[1] = -gamma0 * x[1] - 0.5 * omega0_sq * std::sin(2.0 * x[0]) -
                  0.5 * gamma0 * omega_d;
    }
};

template <typename System>
Trajectory1D run_sampled(System sys, const PendulumState& state0, double t_end,
                         double dt_sample, const OdeSettings& settings) {
    if (!(t_end > 0.0)) throw ConstraintViolation("integration span must be positive");
    if (!(dt_sample > 0.0)) throw ConstraintViolation("sample spacing must be positive");
    const auto n_samples =
        static_cast<std::size_t>(std::floor(t_end / dt_sample * (1.0 + 1e-12))) + 1;
    Trajectory1D traj;
    traj.t.reserve(n_samples);
    traj.alpha.reserve(n_samples);
    traj.alpha_dot.reserve(n_samples);
    State2 x0{state0.alpha, state0.alpha_dot};
    integrate_sampled(
        sys, x0, state0.t, dt_sample, n_samples,
        [&traj](const State2& x, double t) {
            traj.t.push_back(t);
            traj.alpha.push_back(x[0]);
            traj.alpha_dot.push_back(x[1]);
        },
        settings);
    return traj;
}

} // namespace

PendulumState Trajectory1D::back() const {
    if (t.empty()) throw WindowOutOfRange("empty trajectory");
    return PendulumState{alpha.back(), alpha_dot.back(), t.back()};
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Librating: return "librating";
        case Regime::RotationLockedPositive: return "rotation_locked_positive";
        case Regime::RotationLockedNegative: return "rotation_locked_negative";
        case Regime::Unclassified: return "unclassified";
    }
    return "unclassified";
}

Trajectory1D integrate_pendulum(const TrapDrive& trap, const RigidBody& body,
                                const PendulumState& state0, double t_end,
                                double dt_max, double dt_sample) {
    validate_trap(trap);
    validate_body(body);
    const double T_drive = trap.drive_period();
    if (!(dt_max > 0.0) || dt_max > T_drive / 200.0 * (1.0 + 1e-12))
        throw ConstraintViolation("dt_max must be positive and at most T_drive/200");
    if (dt_sample <= 0.0) dt_sample = T_drive / 64.0;

    const PendulumOmega pw = pendulum_omega0(trap, body);
    DrivenPendulum sys{pw.omega0 * pw.omega0, body.gamma0, trap.omega_d};
    OdeSettings settings;
    settings.rel_tol = 1e-10;
    settings.abs_tol = 1e-12;
    settings.max_dt = dt_max;
    return run_sampled(sys, state0, t_end, dt_sample, settings);
}

double eta_rot(const Trajectory1D& traj, double t0, double T, double omega_d) {
    if (traj.size() < 2) throw WindowOutOfRange("trajectory too short for eta_rot");
    if (!(T > 0.0)) throw WindowOutOfRange("averaging window must be positive");
    const double t_begin = traj.t.front();
    const double t_final = traj.t.back();
    const double slack = 1e-9 * (t_final - t_begin);
    if (t0 < t_begin - slack || t0 + T > t_final + slack)
        throw WindowOutOfRange("eta_rot window [t0, t0+T] not covered by trajectory");

    const double dt = (t_final - t_begin) / static_cast<double>(traj.size() - 1);
    auto alpha_at = [&](double t) {
        double s = (t - t_begin) / dt;
        if (s < 0.0) s = 0.0;
        const double s_max = static_cast<double>(traj.size() - 1);
        if (s > s_max) s = s_max;
        const auto i = static_cast<std::size_t>(std::floor(s));
        if (i + 1 >= traj.size()) return traj.alpha.back();
        const double frac = s - static_cast<double>(i);
        return traj.alpha[i] + frac * (traj.alpha[i + 1] - traj.alpha[i]);
    };
    return 2.0 * (alpha_at(t0 + T) - alpha_at(t0)) / (T * omega_d);
}

namespace {

struct DwellResult {
    RegimeLabel label;
    PendulumState final_state;
};

// Integrate one dwell (transient + averaging window) at the current drive
// frequency and classify the response.
DwellResult dwell(const TrapDrive& trap, const RigidBody& body,
                  const PendulumState& state0, const ClassifySettings& settings) {
    const double T_drive = trap.drive_period();
    const double span = (settings.transient_periods + settings.window_periods) * T_drive;
    const Trajectory1D traj =
        integrate_pendulum(trap, body, state0, span, T_drive / 200.0);
    const double eta = eta_rot(traj, state0.t + settings.transient_periods * T_drive,
                               settings.window_periods * T_drive, trap.omega_d);
    RegimeLabel label;
    label.eta = eta;
    if (std::abs(eta) < settings.eta_tol) label.regime = Regime::Librating;
    else if (std::abs(eta - 1.0) < settings.eta_tol) label.regime = Regime::RotationLockedPositive;
    else if (std::abs(eta + 1.0) < settings.eta_tol) label.regime = Regime::RotationLockedNegative;
    else label.regime = Regime::Unclassified;
    return DwellResult{label, traj.back()};
}

bool is_locked(Regime r) {
    return r == Regime::RotationLockedPositive || r == Regime::RotationLockedNegative;
}

// A damped librating state decays towards an equilibrium orientation; once it
// is numerically indistinguishable from the fixed point it can no longer seed
// the parametric instability a real particle's residual motion would trigger.
// Re-seed a small offset from the nearest equilibrium (multiples of pi) when
// the carried state has collapsed below the floor.
void apply_amplitude_floor(PendulumState& state, double floor_rad, double omega_d) {
    const double d = std::remainder(state.alpha, constants::pi);
    if (std::abs(d) < floor_rad && std::abs(state.alpha_dot) < floor_rad * omega_d)
        state.alpha += floor_rad - d;
}

} // namespace

RegimeLabel classify_regime(const TrapDrive& trap, const RigidBody& body,
                            const PendulumState& state0, const ClassifySettings& settings) {
    return dwell(trap, body, state0, settings).label;
}

SweepResult sweep_hysteresis(const TrapDrive& trap0, const RigidBody& body, double v0,
                             double omega_lo, double omega_hi, const SweepSettings& settings) {
    if (!(omega_lo > 0.0) || !(omega_hi > omega_lo))
        throw ConstraintViolation("sweep requires 0 < omega_lo < omega_hi");
    TrapDrive trap = trap0;
    trap.v0 = v0;
    validate_trap(trap);
    validate_body(body);

    double factor = 1.0 - settings.step_rel;
    if (settings.n_steps > 0)
        factor = std::pow(omega_lo / omega_hi,
                          1.0 / static_cast<double>(settings.n_steps));
    if (!(factor > 0.0) || !(factor < 1.0))
        throw ConstraintViolation("sweep step must shrink the frequency (0 < factor < 1)");

    // Carried state plus the drive phase it last evolved under.  Keeping
    // cos(omega_d t) continuous across frequency switches mimics a physical
    // sweep; a discontinuous phase jump can kick a locked state out of its
    // basin near the boundary and bias the measured transition.
    struct Carried {
        PendulumState state;
        double phase = 0.0;
    };

    // Classify one dwell at the given frequency starting from `c`; the carried
    // state and drive phase are updated in place.
    auto dwell_at = [&](double omega, Carried& c) {
        TrapDrive t = trap;
        t.omega_d = omega;
        c.state.t = c.phase / omega;
        apply_amplitude_floor(c.state, settings.amplitude_floor, omega);
        DwellResult r = dwell(t, body, c.state, settings.classify);
        c.phase = std::fmod(omega * r.final_state.t, 2.0 * constants::pi);
        c.state = r.final_state;
        return r.label;
    };

    // Bisect a classification change inside (omega_a, omega_b), replaying each
    // probe from the saved pre-transition state.
    auto refine = [&](double omega_unlocked, double omega_locked, const Carried& seed) {
        double a = omega_unlocked;
        double b = omega_locked;
        while (std::abs(a - b) > settings.refine_rel * std::max(a, b)) {
            const double mid = std::sqrt(a * b);
            Carried probe = seed;
            const RegimeLabel label = dwell_at(mid, probe);
            if (is_locked(label.regime)) b = mid;
            else a = mid;
        }
        return 0.5 * (a + b);
    };

    SweepResult result;

    // ---- downward leg: librating branch until it rotation-locks ----
    Carried carry;
    carry.state.alpha = settings.seed_amplitude;
    carry.state.alpha_dot = 0.0;
    carry.state.t = 0.0;

    double omega = omega_hi;
    double prev_omega = 0.0;
    Carried prev_carry; // state carried into the most recent dwell
    bool found_lr = false;
    Carried locked_carry;
    double locked_omega = 0.0;

    while (omega >= omega_lo * (1.0 - 1e-12)) {
        const Carried entering = carry;
        const RegimeLabel label = dwell_at(omega, carry);
        if (is_locked(label.regime)) {
            if (prev_omega == 0.0)
                throw BoundaryNotFound(
                    "response already rotation-locked at the top of the sweep range");
            result.omega_lr = refine(prev_omega, omega, prev_carry);
            found_lr = true;
            locked_carry = carry;
            locked_omega = omega;
            break;
        }
        prev_omega = omega;
        prev_carry = entering;
        omega *= factor;
    }
    if (!found_lr)
        throw BoundaryNotFound("no libration -> rotation transition inside the sweep range");

    // ---- upward leg: locked branch until it decays back to libration ----
    omega = locked_omega / factor;
    prev_omega = locked_omega;
    carry = locked_carry;
    bool found_rl = false;
    while (omega <= omega_hi * (1.0 + 1e-12)) {
        const Carried entering = carry;
        const RegimeLabel label = dwell_at(omega, carry);
        if (!is_locked(label.regime)) {
            result.omega_rl = refine(omega, prev_omega, entering);
            found_rl = true;
            break;
        }
        prev_omega = omega;
        omega /= factor;
    }
    if (!found_rl)
        throw BoundaryNotFound("no rotation -> libration transition inside the sweep range");

    return result;
}

PhaseDiagram phase_diagram(const TrapDrive& trap, const RigidBody& body,
                           const std::vector<double>& v0_grid,
                           const PhaseDiagramSettings& settings) {
    const std::size_t n = v0_grid.size();
    PhaseDiagram diagram;
    diagram.v0_grid = v0_grid;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    diagram.omega_lr.assign(n, nan);
    diagram.omega_rl.assign(n, nan);
    diagram.omega_floquet.assign(n, nan);
    diagram.errors.assign(n, "");

    parallel_for(n, settings.jobs, [&](std::size_t i) {
        TrapDrive t = trap;
        t.v0 = v0_grid[i];
        try {
            const double w0 = pendulum_omega0(t, body).omega0;
            const double lo = settings.range_lo_omega0 * w0;
            const double hi = settings.range_hi_omega0 * w0;
            const SweepResult sweep =
                sweep_hysteresis(trap, body, v0_grid[i], lo, hi, settings.sweep);
            diagram.omega_lr[i] = sweep.omega_lr;
            diagram.omega_rl[i] = sweep.omega_rl;
            if (settings.with_floquet_boundary)
                diagram.omega_floquet[i] =
                    pendulum_instability_boundary(t, body, lo, hi,
                                                  settings.sweep.refine_rel);
        } catch (const Error& e) {
            diagram.errors[i] = e.what();
        }
    });
    return diagram;
}

Trajectory1D integrate_corotating(const TrapDrive& trap, const RigidBody& body,
                                  const PendulumState& state0, double t_end,
                                  double dt_sample) {
    validate_trap(trap);
    validate_body(body);
    const PendulumOmega pw = pendulum_omega0(trap, body);
    if (dt_sample <= 0.0) {
        const double fastest = std::max(pw.omega0, 1e-3 * trap.omega_d);
        dt_sample = 2.0 * constants::pi / fastest / 64.0;
    }
    CorotatingPendulum sys{pw.omega0 * pw.omega0, body.gamma0, trap.omega_d};
    OdeSettings settings;
    settings.rel_tol = 1e-10;
    settings.abs_tol = 1e-12;
    return run_sampled(sys, state0, t_end, dt_sample, settings);
}

bool corotating_valid(const TrapDrive& trap, const RigidBody& body) {
    return pendulum_omega0(trap, body).omega0 * 5.0 <= trap.omega_d;
}

OmegaMax omega_max(double omega0, double gamma0) {
    if (!(omega0 >= 0.0) || !(gamma0 >= 0.0))
        throw ConstraintViolation("omega_max requires nonnegative omega0 and gamma0");
    if (gamma0 == 0.0) return OmegaMax{std::numeric_limits<double>::infinity(), true};
    return OmegaMax{omega0 * omega0 / gamma0, false};
}

} // namespace rotortrap
