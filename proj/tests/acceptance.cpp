// Acceptance suite: ten numbered end-to-end criteria, each printing one
// "CRITERION n: PASS|FAIL" line followed by its individual checks and any
// analysis notes.  Run with --criterion N for a single criterion (the ctest
// entries do this) or with no argument for all ten.  Exit code 0 iff every
// selected criterion passed.

#include "rotortrap/floquet.hpp"
#include "rotortrap/manifest.hpp"
#include "rotortrap/model.hpp"
#include "rotortrap/nvspin.hpp"
#include "rotortrap/reconstruct.hpp"
#include "rotortrap/rng.hpp"
#include "rotortrap/rotor1d.hpp"
#include "rotortrap/rotor3d.hpp"
#include "rotortrap/signal.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rotortrap;

namespace {

constexpr double kTwoPi = 2.0 * constants::pi;

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return std::string(buf);
}

struct Report {
    std::vector<std::pair<bool, std::string>> rows;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& text) { rows.emplace_back(ok, text); }
    void note(const std::string& text) { notes.push_back(text); }
    bool pass() const {
        for (const auto& [ok, text] : rows)
            if (!ok) return false;
        return true;
    }
};

void print_report(int n, const Report& r) {
    std::printf("CRITERION %d: %s\n", n, r.pass() ? "PASS" : "FAIL");
    for (const auto& [ok, text] : r.rows)
        std::printf("  [%s] %s\n", ok ? "ok" : "FAIL", text.c_str());
    for (const auto& text : r.notes) std::printf("  note: %s\n", text.c_str());
    std::fflush(stdout);
}

// ------------------------------------------------------------- fixtures

TrapDrive reference_trap(double v0, double f_drive_hz) {
    TrapDrive trap;
    trap.v0 = v0;
    trap.omega_d = kTwoPi * f_drive_hz;
    trap.ell0 = 30e-6;
    trap.ax = -0.045;
    trap.ay = 0.058;
    trap.az = -0.013;
    return validate_trap(trap);
}

RigidBody reference_spheroid(double gamma0) {
    SpheroidSpec spec;
    spec.a_minor = 4e-6;
    spec.b_major = 15e-6;
    spec.q_tot = 2500.0 * constants::elementary_charge_c;
    spec.density = 2200.0;
    return body_from_spheroid(spec, gamma0);
}

// Fully tri-axial particle (distinct inertia and quadrupole eigenvalues) for
// tests that need all three angular modes to be non-degenerate.
RigidBody triaxial_body(double gamma0) {
    RigidBody b;
    b.I1 = 3.4e-24;
    b.I2 = 3.3e-24;
    b.I3 = 1.2e-24;
    b.Q1 = -0.8e-26;
    b.Q2 = -1.2e-26;
    b.Q3 = 2.0e-26;
    b.q_tot = 2500.0 * constants::elementary_charge_c;
    b.mass = 2.7646e-13;
    b.gamma0 = gamma0;
    return validate_body(b);
}

// --------------------------------------------------------------- numerics

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

struct LinFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    LinFit f;
    const double den = n * sxx - sx * sx;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double ybar = sy / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double fit = f.intercept + f.slope * x[i];
        ss_res += (y[i] - fit) * (y[i] - fit);
        ss_tot += (y[i] - ybar) * (y[i] - ybar);
    }
    f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
    return f;
}

// Oscillation frequency from interpolated zero crossings of the mean-removed
// series: crossing times regress linearly on crossing index with slope = half
// a period.  Returns 0 when fewer than six crossings are present.
double crossing_frequency(const std::vector<double>& t, const std::vector<double>& y_in) {
    std::vector<double> y = y_in;
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) /
                        static_cast<double>(y.size());
    for (double& v : y) v -= mean;
    std::vector<double> tc;
    for (std::size_t i = 0; i + 1 < y.size(); ++i) {
        if ((y[i] < 0.0 && y[i + 1] >= 0.0) || (y[i] > 0.0 && y[i + 1] <= 0.0)) {
            const double dy = y[i + 1] - y[i];
            if (dy == 0.0) continue;
            tc.push_back(t[i] - y[i] * (t[i + 1] - t[i]) / dy);
        }
    }
    if (tc.size() < 6) return 0.0;
    std::vector<double> idx(tc.size());
    std::iota(idx.begin(), idx.end(), 0.0);
    const LinFit f = linear_fit(idx, tc);
    return f.slope > 0 ? 1.0 / (2.0 * f.slope) : 0.0;
}

// Boxcar average over each full drive period (expects an integer number of
// samples per period); kills the drive-harmonic micromotion so the slow
// secular motion can be measured cleanly.
void per_period_means(const std::vector<double>& t, const std::vector<double>& y,
                      std::size_t samples_per_period, std::vector<double>& tb,
                      std::vector<double>& yb) {
    tb.clear();
    yb.clear();
    const std::size_t n_periods = y.size() / samples_per_period;
    for (std::size_t k = 0; k < n_periods; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < samples_per_period; ++j)
            acc += y[k * samples_per_period + j];
        yb.push_back(acc / static_cast<double>(samples_per_period));
        tb.push_back(t[k * samples_per_period + samples_per_period / 2]);
    }
}

std::vector<double> euler_series(const Trajectory3D& traj, int which) {
    std::vector<double> out(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const EulerZyz e = Orientation::from_quaternion(traj.q[i]).euler_zyz();
        out[i] = which == 0 ? e.alpha : (which == 1 ? e.beta : e.gamma);
    }
    return out;
}

// ------------------------------------------------------------ criterion 1

Report criterion1() {
    Report r;
    const double t0 = now_s();
    const double q = mathieu_boundary_q(0.0);
    const double dt = now_s() - t0;
    r.check(std::abs(q - 0.908) <= 0.005,
            fmt("first parametric instability boundary q_c = %.5f within 0.908 +/- 0.005", q));
    r.check(dt < 10.0, fmt("runtime %.2f s < 10 s", dt));
    return r;
}

// ------------------------------------------------------------ criterion 2

Report criterion2() {
    Report r;
    const double t0 = now_s();
    const TrapDrive trap = reference_trap(590.0, 3800.0);
    const RigidBody body = reference_spheroid(kTwoPi * 1000.0);
    const std::vector<double> grid = linspace(400.0, 2000.0, 10);

    PhaseDiagramSettings ps;
    ps.with_floquet_boundary = false;
    const PhaseDiagram pd = phase_diagram(trap, body, grid, ps);

    bool complete = true;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!pd.errors[i].empty() || !std::isfinite(pd.omega_lr[i]) ||
            !std::isfinite(pd.omega_rl[i]))
            complete = false;
    r.check(complete, "hysteresis sweep completed at all 10 voltages");
    if (!complete) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (!pd.errors[i].empty())
                r.note(fmt("V0 = %.0f V: %s", grid[i], pd.errors[i].c_str()));
        return r;
    }

    std::vector<double> f_lr(grid.size()), f_rl(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        f_lr[i] = pd.omega_lr[i] / kTwoPi;
        f_rl[i] = pd.omega_rl[i] / kTwoPi;
    }

    double min_gap = 1e300;
    for (std::size_t i = 0; i < grid.size(); ++i)
        min_gap = std::min(min_gap, f_rl[i] - f_lr[i]);
    r.check(min_gap >= 0.0,
            fmt("upper boundary >= lower boundary at every V0 (minimum width %.0f Hz)",
                min_gap));

    const LinFit fit_lr = linear_fit(grid, f_lr);
    const LinFit fit_rl = linear_fit(grid, f_rl);
    r.check(fit_lr.r2 > 0.9,
            fmt("lower boundary linear in V0: R^2 = %.4f > 0.9 (slope %.2f Hz/V)",
                fit_lr.r2, fit_lr.slope));
    r.check(fit_rl.r2 > 0.9,
            fmt("upper boundary linear in V0: R^2 = %.4f > 0.9 (slope %.2f Hz/V)",
                fit_rl.r2, fit_rl.slope));

    double best_dev = 1e300;
    double best_v0 = 0.0, best_f = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double dev = std::abs(f_lr[i] - 4400.0) / 4400.0;
        if (dev < best_dev) {
            best_dev = dev;
            best_v0 = grid[i];
            best_f = f_lr[i];
        }
    }
    r.check(best_dev <= 0.15,
            fmt("lower boundary reaches 4.4 kHz band: %.0f Hz at V0 = %.0f V (%.1f%% off)",
                best_f, best_v0, 100.0 * best_dev));

    double worst_ratio = 1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        TrapDrive t = trap;
        t.v0 = grid[i];
        const double f_bound = pendulum_omega0(t, body).omega0 *
                               pendulum_omega0(t, body).omega0 / body.gamma0 / kTwoPi;
        const double ratio = f_rl[i] / f_bound;
        if (std::abs(std::log(ratio)) > std::abs(std::log(worst_ratio))) worst_ratio = ratio;
    }
    r.check(worst_ratio >= 0.5 && worst_ratio <= 2.0,
            fmt("upper boundary tracks the dissipation bound omega0^2/gamma0 at every V0 "
                "(ratio furthest from 1: %.3f, required within factor 2)",
                worst_ratio));

    const double dt = now_s() - t0;
    r.check(dt < 600.0, fmt("runtime %.1f s < 600 s (parallel over grid points)", dt));
    return r;
}

// ------------------------------------------------------------ criterion 3

Report criterion3() {
    Report r;
    const RigidBody body = reference_spheroid(kTwoPi * 1000.0);

    {
        const TrapDrive trap = reference_trap(590.0, 4800.0);
        PendulumState s0;
        s0.alpha = 5e-3;
        const RegimeLabel lab = classify_regime(trap, body, s0);
        r.check(lab.regime == Regime::Librating && std::abs(lab.eta) < 0.02,
                fmt("librating response at 4.8 kHz drive: eta = %.2e (|eta| < 0.02)",
                    lab.eta));
    }
    const TrapDrive trap = reference_trap(590.0, 3500.0);
    {
        PendulumState s0;
        s0.alpha_dot = trap.omega_d / 2.0;
        const RegimeLabel lab = classify_regime(trap, body, s0);
        r.check(lab.regime == Regime::RotationLockedPositive && std::abs(lab.eta - 1.0) < 0.02,
                fmt("locked response at 3.5 kHz drive: eta = %.6f (|eta - 1| < 0.02)",
                    lab.eta));
    }
    {
        PendulumState s0;
        s0.alpha_dot = -trap.omega_d / 2.0;
        const RegimeLabel lab = classify_regime(trap, body, s0);
        r.check(lab.regime == Regime::RotationLockedNegative && std::abs(lab.eta + 1.0) < 0.02,
                fmt("sign-flipped start locks with eta = %.6f (|eta + 1| < 0.02)", lab.eta));
    }
    {
        const double T = trap.drive_period();
        PendulumState s0;
        s0.alpha_dot = trap.omega_d / 2.0;
        const Trajectory1D traj =
            integrate_pendulum(trap, body, s0, 300.0 * T, T / 256.0, T / 64.0);
        const std::size_t stride = 128; // two drive periods at T/64 sampling
        const std::size_t start = 200 * 64;
        double worst = 0.0;
        for (std::size_t i = start; i + stride < traj.size(); ++i)
            worst = std::max(worst,
                             std::abs(traj.alpha[i + stride] - traj.alpha[i] - kTwoPi));
        r.check(worst < 1e-3,
                fmt("locked orbit advances 2 pi per two drive periods over the last 100 "
                    "periods: max deviation %.2e rad < 1e-3",
                    worst));
    }
    return r;
}

// ------------------------------------------------------------ criterion 4

Report criterion4() {
    Report r;
    const double t0 = now_s();

    { // Torque-free conservation: zero quadrupole, zero damping.
        RigidBody body;
        body.I1 = 3.3e-24;
        body.I2 = 2.8e-24;
        body.I3 = 1.1e-24;
        body.q_tot = 2500.0 * constants::elementary_charge_c;
        body.mass = 2.7646e-13;
        body = validate_body(body);
        const TrapDrive trap = reference_trap(590.0, 2000.0);

        BodyState s0;
        s0.omega_body = Eigen::Vector3d(kTwoPi * 900.0, kTwoPi * 300.0, kTwoPi * 1600.0);
        const double t_spin = kTwoPi / s0.omega_body.norm();
        const double t_end = 1e4 * t_spin;
        const Trajectory3D traj = integrate_rigid(trap, body, s0, t_end,
                                                  trap.drive_period() / 200.0, t_end / 4096.0);

        const Eigen::Vector3d I(body.I1, body.I2, body.I3);
        double e0 = 0.0, l0 = 0.0, de = 0.0, dl = 0.0;
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const Eigen::Vector3d w = traj.omega_body[i];
            const double e = 0.5 * w.dot(I.cwiseProduct(w));
            const double l = (traj.q[i] * I.cwiseProduct(w).eval()).norm();
            if (i == 0) {
                e0 = e;
                l0 = l;
            } else {
                de = std::max(de, std::abs(e - e0) / std::abs(e0));
                dl = std::max(dl, std::abs(l - l0) / l0);
            }
        }
        r.check(dl <= 1e-9,
                fmt("torque-free |L| conserved to %.2e relative over 1e4 revolutions "
                    "(tolerance 1e-9)",
                    dl));
        r.check(de <= 1e-8,
                fmt("torque-free energy conserved to %.2e relative (tolerance 1e-8)", de));
    }

    { // Torque equals the (negative) finite-difference gradient of the potential.
        const TrapDrive trap = reference_trap(590.0, 3800.0);
        const RigidBody body = triaxial_body(0.0);
        SplitMix64 rng(20260814ull);
        const double eps = 1e-6;
        const double nscale = 2.0 * trap.v0 / (3.0 * trap.ell0 * trap.ell0) * 0.058 *
                              (std::abs(body.Q1) + std::abs(body.Q2) + std::abs(body.Q3));
        double worst = 0.0;
        for (int s = 0; s < 100; ++s) {
            Eigen::Quaterniond q(rng.next_normal(), rng.next_normal(), rng.next_normal(),
                                 rng.next_normal());
            q.normalize();
            const Orientation o = Orientation::from_quaternion(q);
            const double t = rng.next_uniform() * trap.drive_period();
            const Eigen::Vector3d n = torque(o, trap, body, t);
            Eigen::Vector3d n_fd;
            for (int i = 0; i < 3; ++i) {
                Eigen::Vector3d axis = Eigen::Vector3d::Zero();
                axis[i] = 1.0;
                const Eigen::Quaterniond rot_p(Eigen::AngleAxisd(eps, axis));
                const Eigen::Quaterniond rot_m(Eigen::AngleAxisd(-eps, axis));
                const double up = potential_energy(
                    Orientation::from_quaternion(rot_p * q), trap, body, t);
                const double um = potential_energy(
                    Orientation::from_quaternion(rot_m * q), trap, body, t);
                n_fd[i] = -(up - um) / (2.0 * eps);
            }
            const double den = std::max({n.norm(), n_fd.norm(), 1e-3 * nscale});
            worst = std::max(worst, (n - n_fd).norm() / den);
        }
        r.check(worst <= 1e-6,
                fmt("torque matches -grad U (finite differences, 100 random orientations "
                    "and drive phases): max relative deviation %.2e <= 1e-6",
                    worst));
    }

    { // Planar initial data: full rigid solver reproduces the reduced model.
      // Deeply stable libration (parametric q ~ 0.17), so integrator roundoff
      // is not amplified by orbit sensitivity over the comparison window.
        const TrapDrive trap = reference_trap(590.0, 8000.0);
        const RigidBody body = triaxial_body(kTwoPi * 1000.0);
        const double T = trap.drive_period();
        const double alpha0 = 0.1;

        BodyState s3;
        s3.orientation = Orientation::from_euler_zyz(alpha0, constants::pi / 2.0, 0.0);
        const Trajectory3D t3 =
            integrate_rigid(trap, body, s3, 20.0 * T, T / 400.0, T / 64.0);

        PendulumState s1;
        s1.alpha = alpha0;
        const Trajectory1D t1 = integrate_pendulum(trap, body, s1, 20.0 * T, T / 400.0, T / 64.0);

        const std::size_t n = std::min(t3.size(), t1.size());
        double worst = 0.0, beta_dev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const EulerZyz e = Orientation::from_quaternion(t3.q[i]).euler_zyz();
            worst = std::max(worst, std::abs(std::remainder(e.alpha - t1.alpha[i], kTwoPi)));
            beta_dev = std::max(beta_dev, std::abs(e.beta - constants::pi / 2.0));
        }
        r.check(worst <= 1e-6,
                fmt("planar rigid-body motion matches the reduced pendulum over 20 drive "
                    "periods: max |alpha_3d - alpha_1d| = %.2e rad <= 1e-6",
                    worst));
        r.note(fmt("out-of-plane leakage max |beta - pi/2| = %.2e rad", beta_dev));
    }

    const double dt = now_s() - t0;
    r.check(dt < 600.0, fmt("runtime %.1f s < 600 s", dt));
    return r;
}

// ------------------------------------------------------------ criterion 5

// Measures one small-oscillation frequency of the librating state: perturb a
// single Euler angle, integrate, average out the drive micromotion, count
// zero crossings of the secular series.
double measured_libration_mode(const TrapDrive& trap, const RigidBody& body, int which,
                               double perturbation, double f_expected) {
    const double T = trap.drive_period();
    BodyState s0;
    EulerZyz e0;
    e0.beta = constants::pi / 2.0;
    if (which == 0) e0.alpha = perturbation;
    if (which == 1) e0.beta += perturbation;
    if (which == 2) e0.gamma = perturbation;
    s0.orientation = Orientation::from_euler_zyz(e0.alpha, e0.beta, e0.gamma);

    const double n_cycles = 5.5;
    const double t_end = std::ceil(n_cycles / f_expected / T) * T;
    const Trajectory3D traj = integrate_rigid(trap, body, s0, t_end, T / 200.0, T / 8.0);

    const std::vector<double> angle = euler_series(traj, which);
    std::vector<double> tb, yb;
    per_period_means(traj.t, angle, 8, tb, yb);
    return crossing_frequency(tb, yb);
}

Report criterion5() {
    Report r;
    const double t0 = now_s();

    { // Librating closed forms in their validity window.
        const TrapDrive trap = reference_trap(590.0, 105000.0);
        const RigidBody body = triaxial_body(0.0);
        const LibrationFrequencies lib = libration_frequencies(trap, body);
        r.check(lib.validity_parameter <= 0.05,
                fmt("closed-form validity parameter %.4f <= 0.05 at 105 kHz drive",
                    lib.validity_parameter));

        const char* names[3] = {"alpha", "beta", "gamma"};
        const double printed[3] = {lib.omega_alpha / kTwoPi, lib.omega_beta / kTwoPi,
                                   lib.omega_gamma / kTwoPi};
        const double perturb[3] = {3e-3, 2e-3, 2e-3};
        double ratios[3] = {0, 0, 0};
        for (int k = 0; k < 3; ++k) {
            const double f_meas =
                measured_libration_mode(trap, body, k, perturb[k], printed[k] * 0.7);
            ratios[k] = f_meas / printed[k];
            r.check(std::abs(ratios[k] - 1.0) <= 0.05,
                    fmt("libration %s mode: measured %.2f Hz vs closed form %.2f Hz "
                        "(ratio %.4f, required within 5%%)",
                        names[k], f_meas, printed[k], ratios[k]));
        }
        r.note(fmt("measured/closed-form = %.4f / %.4f / %.4f for alpha/beta/gamma: all "
                   "three sit at 1/sqrt(2) = 0.7071",
                   ratios[0], ratios[1], ratios[2]));
        r.note("the closed forms evaluate the parametric stiffness k as k/Omega_d, while "
               "the time-averaged secular frequency of x'' + k cos(Omega_d t) x = 0 is "
               "k/(sqrt(2) Omega_d); the 5% window is therefore unattainable at any "
               "drive frequency inside the validity window");
    }

    { // Rotating-frame modes in the gyroscopically stabilized locked state.
        const double fd = 30000.0;
        const TrapDrive trap = reference_trap(590.0, fd);
        const double T = trap.drive_period();
        const double h = trap.omega_d / 2.0;

        // (a) Tilt mode of the locked spheroid.
        {
            const RigidBody body = reference_spheroid(0.0);
            const RotatingFrameFrequencies w =
                rotating_frame_frequencies(trap, body, trap.omega_d);
            const double pot = trap.v0 * (trap.ax - trap.ay) / (6.0 * trap.ell0 * trap.ell0);
            const double gyro_fraction =
                (body.I1 / body.I2) * h * h /
                ((body.I1 / body.I2) * h * h + pot * (body.Q1 - body.Q3) / body.I2);

            BodyState s0;
            const double beta0 = constants::pi / 2.0 + 2e-3;
            s0.orientation = Orientation::from_euler_zyz(0.0, beta0, 0.0);
            s0.omega_body = euler_rates_to_body_omega(h, 0.0, 0.0, beta0, 0.0);
            const Trajectory3D traj =
                integrate_rigid(trap, body, s0, 60.0 * T, T / 200.0, T / 64.0);

            std::vector<double> beta = euler_series(traj, 1);
            const std::size_t i0 = 10 * 64;
            const double f_meas =
                crossing_frequency({traj.t.begin() + i0, traj.t.end()},
                                   {beta.begin() + i0, beta.end()});
            const double f_printed = w.beta.omega / kTwoPi;
            r.check(!w.beta.unstable && std::abs(f_meas / f_printed - 1.0) <= 0.05,
                    fmt("locked spheroid tilt mode: measured %.1f Hz vs closed form %.1f Hz "
                        "(ratio %.4f, gyroscopic share of the stiffness %.1f%%)",
                        f_meas, f_printed, f_meas / f_printed, 100.0 * gyro_fraction));
        }

        // (b) Roll mode: symmetric inertia but asymmetric charge (Q1 != Q2), so
        // the roll restoring force survives while the spin axis stays put.
        {
            RigidBody body;
            body.I1 = 3.4e-24;
            body.I2 = 3.4e-24;
            body.I3 = 0.068e-24;
            body.Q1 = -0.8e-26;
            body.Q2 = -1.2e-26;
            body.Q3 = 2.0e-26;
            body.q_tot = 2500.0 * constants::elementary_charge_c;
            body.mass = 2.7646e-13;
            body = validate_body(body);
            const RotatingFrameFrequencies w =
                rotating_frame_frequencies(trap, body, trap.omega_d);

            BodyState s0;
            const double gamma0_angle = 2e-3;
            s0.orientation =
                Orientation::from_euler_zyz(0.0, constants::pi / 2.0, gamma0_angle);
            s0.omega_body =
                euler_rates_to_body_omega(h, 0.0, 0.0, constants::pi / 2.0, gamma0_angle);
            const Trajectory3D traj =
                integrate_rigid(trap, body, s0, 380.0 * T, T / 200.0, T / 64.0);

            std::vector<double> gam = euler_series(traj, 2);
            const std::size_t i0 = 10 * 64;
            const double f_meas =
                crossing_frequency({traj.t.begin() + i0, traj.t.end()},
                                   {gam.begin() + i0, gam.end()});
            const double f_printed = w.gamma.omega / kTwoPi;
            r.check(!w.gamma.unstable && std::abs(f_meas / f_printed - 1.0) <= 0.05,
                    fmt("locked roll mode: measured %.1f Hz vs closed form %.1f Hz "
                        "(ratio %.4f)",
                        f_meas, f_printed, f_meas / f_printed));
        }
    }

    { // Exact scaling of the closed forms under drive doubling.
        const RigidBody body = triaxial_body(0.0);
        const TrapDrive base = reference_trap(590.0, 40000.0);
        TrapDrive v2 = base;
        v2.v0 *= 2.0;
        TrapDrive w2 = base;
        w2.omega_d *= 2.0;
        TrapDrive b2 = v2;
        b2.omega_d *= 2.0;
        const LibrationFrequencies l0 = libration_frequencies(base, body);
        const LibrationFrequencies lv = libration_frequencies(v2, body);
        const LibrationFrequencies lw = libration_frequencies(w2, body);
        const LibrationFrequencies lb = libration_frequencies(b2, body);
        const std::array<double, 3> f0{l0.omega_alpha, l0.omega_beta, l0.omega_gamma};
        const std::array<double, 3> fv{lv.omega_alpha, lv.omega_beta, lv.omega_gamma};
        const std::array<double, 3> fw{lw.omega_alpha, lw.omega_beta, lw.omega_gamma};
        const std::array<double, 3> fb{lb.omega_alpha, lb.omega_beta, lb.omega_gamma};
        double dv = 0, dw = 0, db = 0;
        for (int k = 0; k < 3; ++k) {
            dv = std::max(dv, std::abs(fv[k] / (2.0 * f0[k]) - 1.0));
            dw = std::max(dw, std::abs(fw[k] / (0.5 * f0[k]) - 1.0));
            db = std::max(db, std::abs(fb[k] / f0[k] - 1.0));
        }
        r.check(dv <= 1e-12,
                fmt("doubling V0 doubles all three closed forms (max rel dev %.1e)", dv));
        r.check(dw <= 1e-12,
                fmt("doubling Omega_d halves all three closed forms (max rel dev %.1e)", dw));
        r.check(db <= 1e-12,
                fmt("joint doubling leaves all three invariant (max rel dev %.1e)", db));
    }

    const double dt = now_s() - t0;
    r.check(dt < 600.0, fmt("runtime %.1f s < 600 s", dt));
    return r;
}

// ------------------------------------------------------------ criterion 6

Report criterion6() {
    Report r;
    const TrapDrive trap = reference_trap(590.0, 3800.0);
    const RigidBody body = triaxial_body(kTwoPi * 1000.0);
    const double u_scale = trap.v0 / (3.0 * trap.ell0 * trap.ell0) *
                           (std::abs(trap.ax) + std::abs(trap.ay) + std::abs(trap.az)) *
                           (std::abs(body.Q1) + std::abs(body.Q2) + std::abs(body.Q3));
    SplitMix64 rng(424242ull);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s) {
        Eigen::Quaterniond q(rng.next_normal(), rng.next_normal(), rng.next_normal(),
                             rng.next_normal());
        q.normalize();
        const Orientation corot = Orientation::from_quaternion(q);
        const double t = rng.next_uniform() * 2.0 * trap.drive_period();

        const PotentialDecomposition d = corotating_potential_decomposition(corot, trap, body);
        const Eigen::Quaterniond spin(
            Eigen::AngleAxisd(trap.omega_d * t / 2.0, Eigen::Vector3d::UnitZ()));
        const Orientation lab = Orientation::from_quaternion(spin * q);
        const double direct = potential_energy(lab, trap, body, t);
        const double series = d.U0 + d.u1 * std::cos(trap.omega_d * t) +
                              d.u2 * std::cos(2.0 * trap.omega_d * t) +
                              d.u3 * std::sin(2.0 * trap.omega_d * t);
        const double den = std::max(std::abs(direct), 1e-3 * u_scale);
        worst = std::max(worst, std::abs(direct - series) / den);
    }
    r.check(worst <= 1e-10,
            fmt("co-rotating decomposition U0 + u1 cos + u2 cos2 + u3 sin2 reproduces the "
                "direct potential at 1000 random orientations/times: max relative "
                "deviation %.2e <= 1e-10",
                worst));
    return r;
}

// ------------------------------------------------------------ criterion 7

Report criterion7() {
    Report r;
    const RigidBody body = reference_spheroid(kTwoPi * 1000.0);

    auto planar_signal = [](const Trajectory1D& traj, std::size_t i0) {
        std::vector<double> s(traj.size() - i0);
        for (std::size_t i = i0; i < traj.size(); ++i) {
            const double c = std::cos(traj.alpha[i]);
            s[i - i0] = c * c;
        }
        return s;
    };

    { // Rotation-locked trajectory.
        const TrapDrive trap = reference_trap(590.0, 3500.0);
        const double T = trap.drive_period();
        PendulumState s0;
        s0.alpha_dot = trap.omega_d / 2.0;
        const Trajectory1D traj =
            integrate_pendulum(trap, body, s0, 768.0 * T, T / 256.0, T / 64.0);
        const std::vector<double> sig = planar_signal(traj, 256 * 64);
        const double fs = 64.0 * 3500.0;
        const Psd sp = psd(sig, fs, 8192, 0.5);

        double mean = std::accumulate(sig.begin(), sig.end(), 0.0) /
                      static_cast<double>(sig.size());
        double var = 0.0;
        for (double v : sig) var += (v - mean) * (v - mean);
        var /= static_cast<double>(sig.size());
        const double df = sp.freq_hz[1] - sp.freq_hz[0];
        double sum_p = std::accumulate(sp.power.begin(), sp.power.end(), 0.0) * df;
        r.check(std::abs(sum_p / var - 1.0) <= 0.01,
                fmt("Parseval: sum(PSD) * df matches signal variance to %.3f%% (< 1%%)",
                    100.0 * std::abs(sum_p / var - 1.0)));

        const PsdClassification cls = classify_psd(sp, trap.omega_d);
        const double f_half = trap.omega_d / (2.0 * kTwoPi);
        const double f_dom = cls.peaks.empty() ? 0.0 : cls.peaks[0].freq_hz;
        r.check(std::abs(f_dom - f_half) <= sp.rbw_hz,
                fmt("locked spectrum dominant peak at f_d/2 = %.0f Hz within one rbw "
                    "(%.1f Hz): measured dominant %.0f Hz",
                    f_half, sp.rbw_hz, f_dom));
        std::string tops;
        for (std::size_t i = 0; i < cls.peaks.size() && i < 3; ++i)
            tops += fmt("%s%.0f Hz (%.0f dB)", i ? ", " : "", cls.peaks[i].freq_hz,
                        cls.peaks[i].power_db);
        r.note("locked detection lines sit at odd multiples of f_d: " + tops +
               "; the projection-squared signal is invariant under the half-period map "
               "alpha -> alpha + pi of the locked orbit, so its true period is one drive "
               "period and a half-harmonic cannot appear (an end-asymmetric detection, "
               "asymmetry > 0, restores the f_d/2 line)");
    }

    { // Librating partner at the same voltage.
        const TrapDrive trap = reference_trap(590.0, 4800.0);
        const double T = trap.drive_period();
        PendulumState s0;
        s0.alpha = 5e-3;
        const Trajectory1D traj =
            integrate_pendulum(trap, body, s0, 768.0 * T, T / 256.0, T / 64.0);
        const std::vector<double> sig = planar_signal(traj, 256 * 64);
        double mean = std::accumulate(sig.begin(), sig.end(), 0.0) /
                      static_cast<double>(sig.size());
        double var = 0.0;
        for (double v : sig) var += (v - mean) * (v - mean);
        var /= static_cast<double>(sig.size());

        bool has_half = false, has_drive = false;
        if (var > 1e-20) {
            const Psd sp = psd(sig, 64.0 * 4800.0, 8192, 0.5);
            const PsdClassification cls = classify_psd(sp, trap.omega_d);
            has_half = cls.has_half_harmonic;
            for (const PsdPeak& p : cls.peaks)
                if (std::abs(p.freq_hz - 4800.0) <= sp.rbw_hz) has_drive = true;
        }
        r.check(!has_half,
                fmt("librating spectrum has no f_d/2 component (settled signal variance "
                    "%.1e)",
                    var));
        r.check(has_drive,
                "librating spectrum shows the exact-f_d micromotion line");
        r.note("the damped librating branch relaxes to its fixed point, so the settled "
               "orientation signal is constant and carries no exact-f_d line; that line "
               "belongs to center-of-mass micromotion (outside the rotational model) or "
               "to undamped residual libration, whose O(amplitude^2) f_d line the unit "
               "tests demonstrate");
    }
    return r;
}

// ------------------------------------------------------------ criterion 8

Report criterion8() {
    Report r;
    const double t0 = now_s();
    const NvModel model = NvModel::standard();
    const double D = model.d_splitting_hz;
    const double ge = model.gamma_e_hz_per_t;

    { // Zero field: both transitions at the zero-field splitting.
        const TransitionPair tp =
            transition_frequencies(Eigen::Vector3d::Zero(), model.axes0[0], model);
        const double dev = std::max(std::abs(tp.f_minus - D), std::abs(tp.f_plus - D));
        r.check(dev <= 1e-9 * D,
                fmt("B = 0: both transitions at D (max deviation %.2e Hz)", dev));
    }
    { // Field along the class axis: exact Zeeman split.
        const Eigen::Vector3d b = 0.010 * model.axes0[0];
        const TransitionPair tp = transition_frequencies(b, model.axes0[0], model);
        const double dev = std::max(std::abs(tp.f_minus - (D - ge * 0.010)),
                                    std::abs(tp.f_plus - (D + ge * 0.010))) /
                           D;
        r.check(dev <= 1e-9,
                fmt("B parallel to the axis at 10 mT: transitions at D -/+ gamma_e B to "
                    "%.1e relative (tolerance 1e-9)",
                    dev));
    }
    { // Generic static field: eight resolved dips.
        const Eigen::Vector3d b = 0.010 * Eigen::Vector3d(0.36, 0.48, 0.80);
        const std::vector<double> grid = linspace(2.4e9, 3.3e9, 1801);
        const std::vector<double> pl =
            odmr_spectrum_static(Orientation(), b, model, grid);
        double max_depth = 0.0;
        for (double v : pl) max_depth = std::max(max_depth, 1.0 - v);
        int dips = 0;
        for (std::size_t i = 1; i + 1 < pl.size(); ++i) {
            const double d = 1.0 - pl[i];
            if (d >= 0.25 * max_depth && pl[i] < pl[i - 1] && pl[i] <= pl[i + 1]) ++dips;
        }
        r.check(dips == 8,
                fmt("static spectrum in a generic 10 mT field resolves %d dips "
                    "(expected 8 = 4 classes x 2 transitions)",
                    dips));
    }
    { // Continuous ODMR of the rotating host: two bands.
        RotationModel rot;
        rot.axis = Eigen::Vector3d::UnitZ();
        rot.omega_rot = kTwoPi * 1900.0;
        const Eigen::Vector3d b =
            0.010 * Eigen::Vector3d(std::sqrt(2.0 / 3.0), 0.0, 1.0 / std::sqrt(3.0));
        const std::vector<double> grid = linspace(2.4e9, 3.3e9, 901);
        const std::vector<double> pl =
            odmr_continuous_rotating(rot, b, model, grid, 2048);

        double max_depth = 0.0;
        for (double v : pl) max_depth = std::max(max_depth, 1.0 - v);
        const double thr = 0.10 * max_depth;
        std::vector<std::pair<double, double>> bands;
        bool in_band = false;
        double lo = 0.0, hi = 0.0;
        int gap = 0;
        for (std::size_t i = 0; i < pl.size(); ++i) {
            if (1.0 - pl[i] >= thr) {
                if (!in_band) {
                    in_band = true;
                    lo = grid[i];
                }
                hi = grid[i];
                gap = 0;
            } else if (in_band && ++gap > 10) {
                bands.emplace_back(lo, hi);
                in_band = false;
            }
        }
        if (in_band) bands.emplace_back(lo, hi);
        r.check(bands.size() == 2,
                fmt("rotating-host continuous spectrum forms %zu bands (expected 2)",
                    bands.size()));
        if (bands.size() == 2) {
            const double tol = 50e6;
            r.check(std::abs(bands[0].first - 2.45e9) <= tol,
                    fmt("lower band low edge %.3f GHz within 50 MHz of 2.45 GHz",
                        bands[0].first / 1e9));
            r.check(std::abs(bands[0].second - 2.90e9) <= tol,
                    fmt("lower band high edge %.3f GHz within 50 MHz of 2.90 GHz",
                        bands[0].second / 1e9));
            r.check(std::abs(bands[1].first - 2.90e9) <= tol,
                    fmt("upper band low edge %.3f GHz within 50 MHz of 2.90 GHz",
                        bands[1].first / 1e9));
            r.check(std::abs(bands[1].second - 3.25e9) <= tol,
                    fmt("upper band high edge %.3f GHz within 50 MHz of 3.25 GHz",
                        bands[1].second / 1e9));
        }
        r.note("at 10 mT the Zeeman reach is gamma_e |B| = 280 MHz, so the band extremes "
               "are D -/+ 280 MHz = 2.59 / 3.15 GHz: the inner (2.9 GHz) edges are met "
               "but the outer 2.45 / 3.25 GHz targets are out of reach at this field; "
               "no single field magnitude meets all four edges, because the outer "
               "targets need gamma_e |B| >= 370 MHz (|B| >= 13.2 mT) while the upper "
               "band's inner edge, set by the perpendicular-field transition "
               "f+ = D + (sqrt(D^2 + 4 (gamma_e B)^2) - D), already exceeds "
               "2.95 GHz there (it stays below 2.95 GHz only for |B| <= 12.2 mT); "
               "the trade-off is demonstrated in the unit tests");
    }
    const double dt = now_s() - t0;
    r.check(dt < 30.0, fmt("runtime %.1f s < 30 s", dt));
    return r;
}

// ------------------------------------------------------------ criterion 9

Report criterion9() {
    Report r;
    const double t0 = now_s();
    const NvModel model = NvModel::standard();
    const Eigen::Vector3d truth = Eigen::Vector3d(0.25, -0.1, 0.96).normalized();
    const double omega_rot = kTwoPi * 1900.0;

    RotationModel rot;
    rot.axis = truth;
    rot.omega_rot = omega_rot;
    rot.orientation0 = Orientation::from_euler_zyz(0.4, 0.7, -0.3);
    rot.phase = 0.5;
    const double T = rot.rotation_period();

    std::vector<double> delays(48);
    for (std::size_t i = 0; i < delays.size(); ++i)
        delays[i] = T * static_cast<double>(i) / 48.0;
    const std::vector<double> grid = linspace(2.91e9, 3.2e9, 1601);
    const Eigen::Vector3d b1 = 0.010 * Eigen::Vector3d::UnitX();
    const Eigen::Vector3d b2 = 0.010 * Eigen::Vector3d::UnitY();

    const StroboMap map1 = strobe_map(rot, b1, model, delays, grid, 0.005 * T, "b1");
    const StroboMap map2 = strobe_map(rot, b2, model, delays, grid, 0.005 * T, "b2");
    const ResonanceTraces tr1 = extract_resonances(map1, 4);
    const ResonanceTraces tr2 = extract_resonances(map2, 4);

    auto axis_error_mrad = [&truth](const FitResult& f) {
        const double c = std::clamp(f.axis.dot(truth), -1.0, 1.0);
        return 1e3 * std::acos(c);
    };

    int null_two_field = 0;
    {
        const FitResult fit = fit_rotation(tr1, b1, tr2, b2, model, omega_rot);
        null_two_field = fit.null_modes;
        const double err = axis_error_mrad(fit);
        r.check(fit.converged && err < 1.0,
                fmt("noiseless two-field reconstruction: axis error %.3f mrad < 1 mrad "
                    "(residual %.0f Hz rms)",
                    err, fit.residual_rms_hz));
    }
    {
        ResonanceTraces n1 = tr1, n2 = tr2;
        SplitMix64 rng(12345ull);
        for (ResonanceTraces* tr : {&n1, &n2})
            for (auto& column : tr->lines)
                for (ResonanceLine& line : column) {
                    line.center_hz += 0.5e6 * rng.next_normal();
                    line.sigma_hz = 0.5e6;
                }
        const FitResult fit = fit_rotation(n1, b1, n2, b2, model, omega_rot);
        const double err = axis_error_mrad(fit);
        r.check(fit.converged && err < 10.0,
                fmt("0.5 MHz line-center noise (seed 12345): axis error %.3f mrad < 10 mrad",
                    err));
    }
    {
        const FitResult fit =
            fit_rotation(tr1, b1, ResonanceTraces{}, Eigen::Vector3d::UnitY(), model,
                         omega_rot);
        r.check(fit.null_modes > null_two_field,
                fmt("single-field fit reports the unconstrained mode: %d near-null "
                    "Jacobian directions vs %d with two fields (divergent directions are "
                    "excluded from the covariance and counted instead)",
                    fit.null_modes, null_two_field));

        // Identify the flat direction: rotating the fitted axis and initial
        // orientation jointly about the field leaves every class angle -- and
        // hence every predicted line center -- unchanged.
        RotationModel fitted;
        fitted.axis = fit.axis;
        fitted.omega_rot = omega_rot;
        fitted.orientation0 = fit.orientation0;
        fitted.phase = fit.phase;
        const Eigen::Vector3d bhat = b1.normalized();
        const Eigen::Quaterniond g(Eigen::AngleAxisd(0.2, bhat));
        RotationModel spun = fitted;
        spun.axis = g * fitted.axis;
        spun.orientation0 =
            Orientation::from_quaternion(g * fitted.orientation0.quaternion());
        double worst = 0.0;
        for (int i = 0; i < 16; ++i) {
            const double t = T * static_cast<double>(i) / 16.0;
            for (int k = 0; k < 4; ++k)
                worst = std::max(worst,
                                 std::abs(std::cos(theta_angle(fitted, k, bhat, t, model)) -
                                          std::cos(theta_angle(spun, k, bhat, t, model))));
        }
        r.check(worst <= 1e-12,
                fmt("the flat family is rotation about B: spinning the fitted solution "
                    "0.2 rad about the field changes no class angle (max |delta cos "
                    "theta| = %.1e)",
                    worst));
        r.note("with a single field the fit cannot distinguish solution orbits related "
               "by rotation about B, so the recovered axis is only meaningful up to "
               "that rotation; the two-field fit removes the degeneracy");
    }
    const double dt = now_s() - t0;
    r.check(dt < 120.0, fmt("runtime %.1f s < 120 s", dt));
    return r;
}

// ----------------------------------------------------------- criterion 10

#ifndef ROTORTRAP_CLI_PATH
#define ROTORTRAP_CLI_PATH "rotortrap"
#endif

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + ROTORTRAP_CLI_PATH + "\" " + args +
                            " > \"" + log.string() + "\" 2>&1";
    return std::system(cmd.c_str());
}

// All regular files under dir (relative path -> content hash), *.log excluded.
std::map<std::string, std::string> hash_dir(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() == ".log") continue;
        out[fs::relative(entry.path(), dir).string()] =
            sha256_file_hex(entry.path().string());
    }
    return out;
}

Report criterion10() {
    Report r;
    const fs::path base = fs::temp_directory_path() / "rotortrap_acceptance_c10";
    std::error_code ec;
    fs::remove_all(base, ec);
    fs::create_directories(base);

    struct Run {
        std::string name;
        std::string args;       // shared arguments (no -o, no --jobs)
        std::string jobs_a;     // per-run extras, may differ only in --jobs
        std::string jobs_b;
    };

    const std::string pend_a = (base / "simulate-pendulum_a").string();
    std::vector<Run> runs{
        {"simulate-pendulum",
         "simulate-pendulum --set pendulum.t_end_periods=128 "
         "--set classify.transient_periods=20 --set classify.window_periods=40",
         "", ""},
        {"phase-diagram",
         "phase-diagram --set phase.n_v0=2 --set phase.v0_min_volts=500 "
         "--set phase.v0_max_volts=650",
         "--jobs 7", "--jobs 2"},
        {"simulate-3d", "simulate-3d --set rigid.t_end_periods=24", "", ""},
        {"psd", "psd -i \"" + pend_a + "/trajectory.csv\" --psd-segments 2", "", ""},
        {"odmr", "odmr --set odmr.n_freq=801 --set odmr.n_time_samples=256", "", ""},
        {"strobe",
         "strobe --set strobe.n_freq=801 --set strobe.pl_noise_sigma=0.002 --seed 777",
         "", ""},
        {"fit",
         "fit --map1 \"" + (base / "strobe_a" / "strobe_b1.csv").string() +
             "\" --map2 \"" + (base / "strobe_a" / "strobe_b2.csv").string() + "\"",
         "--jobs 7", "--jobs 3"},
    };

    bool all_exit_zero = true;
    for (const Run& run : runs) {
        bool identical = true;
        std::array<std::map<std::string, std::string>, 2> hashes;
        for (int pass = 0; pass < 2; ++pass) {
            const fs::path dir = base / (run.name + (pass == 0 ? "_a" : "_b"));
            fs::create_directories(dir);
            const std::string extra = pass == 0 ? run.jobs_a : run.jobs_b;
            const int rc = run_cli(run.args + " -o \"" + dir.string() + "\" " + extra,
                                   dir / "run.log");
            if (rc != 0) all_exit_zero = false;
            hashes[static_cast<std::size_t>(pass)] = hash_dir(dir);
        }
        identical = hashes[0] == hashes[1] && !hashes[0].empty();
        std::string label = run.name;
        if (!run.jobs_a.empty())
            label += fmt(" (%s vs %s)", run.jobs_a.c_str(), run.jobs_b.c_str());
        r.check(identical, fmt("%s: %zu output files byte-identical on rerun",
                               label.c_str(), hashes[0].size()));
    }
    r.check(all_exit_zero, "every invocation exited 0");
    r.note("reruns use identical configurations; the phase-diagram and fit pairs also "
           "change --jobs to show thread-count independence; hashes cover CSVs, text "
           "reports, sidecars, and manifests");
    return r;
}

} // namespace

int main(int argc, char** argv) {
    int which = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc)
            which = std::atoi(argv[++i]);
        else if (!arg.empty() && arg[0] != '-')
            which = std::atoi(arg.c_str());
    }

    using CriterionFn = Report (*)();
    const std::array<CriterionFn, 10> table{criterion1, criterion2, criterion3,
                                            criterion4, criterion5, criterion6,
                                            criterion7, criterion8, criterion9,
                                            criterion10};

    bool all_pass = true;
    for (int n = 1; n <= 10; ++n) {
        if (which != 0 && which != n) continue;
        Report rep;
        try {
            rep = table[static_cast<std::size_t>(n - 1)]();
        } catch (const std::exception& e) {
            rep.check(false, fmt("unhandled exception: %s", e.what()));
        }
        print_report(n, rep);
        all_pass = all_pass && rep.pass();
    }
    return all_pass ? 0 : 1;
}
