#pragma once

// Reduced planar rotational dynamics of the trapped particle: the long axis
// angle alpha obeys a parametrically driven, damped pendulum equation
//
//   alpha'' + gamma0 alpha' + omega0^2 cos(Omega_d t) sin(2 alpha) = 0.
//
// This module integrates that equation, classifies librating vs
// rotation-locked responses through the order parameter eta_rot, sweeps the
// drive frequency to locate the hysteretic transition boundaries, and solves
// the cycle-averaged (co-rotating) secular equation.

#include "rotortrap/model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace rotortrap {

struct PendulumState {
    double alpha = 0.0;     // rad, unwrapped (no modular reduction)
    double alpha_dot = 0.0; // rad/s
    double t = 0.0;         // s
};

// Uniformly sampled time series (alpha unwrapped).
struct Trajectory1D {
    std::vector<double> t;         // s
    std::vector<double> alpha;     // rad
    std::vector<double> alpha_dot; // rad/s

    std::size_t size() const { return t.size(); }
    PendulumState back() const;
};

enum class Regime { Librating, RotationLockedPositive, RotationLockedNegative, Unclassified };

struct RegimeLabel {
    Regime regime = Regime::Unclassified;
    double eta = 0.0; // measured order parameter
};

const char* regime_name(Regime r);

// Integrate the driven pendulum from state0.t to state0.t + t_end.
// dt_max caps the internal step (required: dt_max <= T_drive/200);
// dt_sample sets the output spacing (0 -> T_drive/64).
Trajectory1D integrate_pendulum(const TrapDrive& trap, const RigidBody& body,
                                const PendulumState& state0, double t_end,
                                double dt_max, double dt_sample = 0.0);

// Order parameter eta = 2 (alpha(t0+T) - alpha(t0)) / (T Omega_d).
// Throws WindowOutOfRange if [t0, t0+T] is not covered by the trajectory.
double eta_rot(const Trajectory1D& traj, double t0, double T, double omega_d);

struct ClassifySettings {
    double transient_periods = 50.0; // drive periods discarded before the window
    double window_periods = 100.0;   // averaging window length in drive periods
    double eta_tol = 0.1;            // dead band around 0 and +/-1
};

// Integrate past the transient, measure eta over the averaging window, and
// threshold it: |eta| < tol -> Librating; |eta -/+ 1| < tol -> locked
// positive/negative; anything else -> Unclassified.
RegimeLabel classify_regime(const TrapDrive& trap, const RigidBody& body,
                            const PendulumState& state0,
                            const ClassifySettings& settings = {});

struct SweepSettings {
    ClassifySettings classify;
    double step_rel = 0.01;            // coarse geometric step in Omega_d
    double refine_rel = 1e-3;          // bisection target (relative)
    double seed_amplitude = 5e-3;      // rad, initial libration offset
    double amplitude_floor = 1e-4;     // rad, re-seed threshold for decayed libration
    std::size_t n_steps = 0;           // >0 overrides step_rel: steps spanning the range
};

struct SweepResult {
    double omega_lr = 0.0; // rad/s: librating branch destabilizes below this drive
    double omega_rl = 0.0; // rad/s: locked branch decays above this drive
};

// Quasi-adiabatic frequency ramp at fixed voltage v0.  Starting librating at
// omega_hi, the drive frequency is stepped downward, carrying the final state
// of each dwell into the next, until the response rotation-locks (boundary
// omega_lr, bisection-refined).  The ramp then reverses, stepping upward from
// the locked state until it decays back to libration (omega_rl).
SweepResult sweep_hysteresis(const TrapDrive& trap, const RigidBody& body,
                             double v0, double omega_lo, double omega_hi,
                             const SweepSettings& settings = {});

struct PhaseDiagram {
    std::vector<double> v0_grid;       // V
    std::vector<double> omega_lr;      // rad/s (NaN where the sweep failed)
    std::vector<double> omega_rl;      // rad/s (NaN where the sweep failed)
    std::vector<double> omega_floquet; // rad/s linear-instability boundary (NaN if absent)
    std::vector<std::string> errors;   // per-point message, empty if the sweep succeeded
};

struct PhaseDiagramSettings {
    SweepSettings sweep;
    // Sweep range per grid point, as multiples of the small-oscillation
    // parametric resonance frequency 2*f0(V0)... expressed via omega0:
    double range_lo_omega0 = 0.8; // omega_lo = range_lo_omega0 * omega0(V0)
    double range_hi_omega0 = 4.5; // omega_hi = range_hi_omega0 * omega0(V0)
    bool with_floquet_boundary = true;
    std::size_t jobs = 0; // 0 -> ROTORTRAP_JOBS or hardware concurrency
};

// Maps sweep_hysteresis over the voltage grid (parallel over grid points,
// deterministic ordering).  Per-point failures are recorded in `errors` and
// the corresponding boundaries set to NaN; the diagram is still returned.
PhaseDiagram phase_diagram(const TrapDrive& trap, const RigidBody& body,
                           const std::vector<double>& v0_grid,
                           const PhaseDiagramSettings& settings = {});

// Cycle-averaged secular equation in the frame co-rotating at Omega_d/2:
//   alpha'' + gamma0 alpha' + (omega0^2/2) sin(2 alpha) = -gamma0 Omega_d / 2.
Trajectory1D integrate_corotating(const TrapDrive& trap, const RigidBody& body,
                                  const PendulumState& state0, double t_end,
                                  double dt_sample = 0.0);

// The averaging underlying integrate_corotating assumes Omega_d >> omega0.
bool corotating_valid(const TrapDrive& trap, const RigidBody& body);

struct OmegaMax {
    double value = 0.0; // rad/s
    bool unbounded = false;
};

// Dissipation bound on sustainable locked rotation: Omega_max = omega0^2/gamma0.
// gamma0 = 0 has no bound and is reported as unbounded.
OmegaMax omega_max(double omega0, double gamma0);

} // namespace rotortrap
