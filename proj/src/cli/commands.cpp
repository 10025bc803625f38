#include "commands.hpp"

#include "rotortrap/config.hpp"
#include "rotortrap/csvio.hpp"
#include "rotortrap/errors.hpp"
#include "rotortrap/floquet.hpp"
#include "rotortrap/manifest.hpp"
#include "rotortrap/nvspin.hpp"
#include "rotortrap/parallel.hpp"
#include "rotortrap/reconstruct.hpp"
#include "rotortrap/rng.hpp"
#include "rotortrap/rotor1d.hpp"
#include "rotortrap/rotor3d.hpp"
#include "rotortrap/signal.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace rotortrap::cli {

namespace {

constexpr const char* kVersion = "1.0.0";

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir = ".";
    long long seed = 0;
    std::size_t jobs = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path,
                    "Configuration file (key = value; omitted -> built-in defaults)");
    cmd->add_option("--set", o.overrides,
                    "Override a configuration key (KEY=VALUE, repeatable)");
    cmd->add_option("-o,--output", o.output_dir, "Output directory")
        ->capture_default_str();
    cmd->add_option("--seed", o.seed, "64-bit seed for stochastic steps")
        ->capture_default_str();
    cmd->add_option("--jobs", o.jobs,
                    "Worker threads (0 = ROTORTRAP_JOBS or hardware concurrency)");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

Config load_config(const CommonOpts& o) {
    Config cfg = o.config_path.empty()
                     ? Config::parse_text(default_config_text(), "<defaults>")
                     : Config::parse_file(o.config_path);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        const std::string key = trim(kv.substr(0, eq));
        const std::string value = trim(kv.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        cfg.set(key, value);
    }
    return cfg;
}

// Materialize a default into the config so the manifest records every value
// the command actually used.
double resolve(Config& cfg, const std::string& key, double fallback) {
    if (!cfg.has(key)) cfg.set(key, format_double(fallback));
    return cfg.get_double(key);
}

long long resolve_int(Config& cfg, const std::string& key, long long fallback) {
    if (!cfg.has(key)) cfg.set(key, std::to_string(fallback));
    return cfg.get_int(key);
}

std::string resolve_string(Config& cfg, const std::string& key, const std::string& fallback) {
    if (!cfg.has(key)) cfg.set(key, fallback);
    return cfg.get_string(key);
}

std::string out_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

Manifest base_manifest(const std::string& command, const Config& cfg, const CommonOpts& o) {
    Manifest m;
    m.add("command", command);
    m.add("version", std::string(kVersion));
    m.add("seed", static_cast<long long>(o.seed));
    for (const auto& [k, v] : cfg.entries()) m.add("config." + k, v);
    return m;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 0) throw ConfigError("grid size must be positive");
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

ClassifySettings classify_from_config(Config& cfg) {
    ClassifySettings cs;
    cs.transient_periods = resolve(cfg, "classify.transient_periods", cs.transient_periods);
    cs.window_periods = resolve(cfg, "classify.window_periods", cs.window_periods);
    cs.eta_tol = resolve(cfg, "classify.eta_tol", cs.eta_tol);
    return cs;
}

NvModel nv_from_config(Config& cfg) {
    NvModel model = NvModel::standard();
    model.d_splitting_hz = resolve(cfg, "nv.d_splitting_ghz",
                                   model.d_splitting_hz / 1e9) * 1e9;
    model.gamma_e_hz_per_t = resolve(cfg, "nv.gamma_e_ghz_per_t",
                                     model.gamma_e_hz_per_t / 1e9) * 1e9;
    model.linewidth_sigma_hz =
        resolve(cfg, "nv.linewidth_fwhm_mhz", 6.5) * 1e6 * constants::fwhm_to_sigma;
    model.contrast = resolve(cfg, "nv.contrast", model.contrast);
    validate_nv(model);
    return model;
}

RotationModel rotation_from_config(Config& cfg) {
    RotationModel rot;
    Eigen::Vector3d axis(resolve(cfg, "rotation.axis_x", 0.0),
                         resolve(cfg, "rotation.axis_y", 0.0),
                         resolve(cfg, "rotation.axis_z", 1.0));
    if (axis.norm() < 1e-12) throw ConfigError("rotation.axis_* must not be all zero");
    rot.axis = axis.normalized();
    const double f_rot_default = cfg.get_double("trap.freq_hz", 3800.0) / 2.0;
    rot.omega_rot = 2.0 * constants::pi * resolve(cfg, "rotation.f_rot_hz", f_rot_default);
    if (!(rot.omega_rot > 0.0)) throw ConfigError("rotation.f_rot_hz must be positive");
    rot.orientation0 = Orientation::from_euler_zyz(resolve(cfg, "rotation.alpha0_rad", 0.0),
                                                   resolve(cfg, "rotation.beta0_rad", 0.0),
                                                   resolve(cfg, "rotation.gamma0_rad", 0.0));
    rot.phase = resolve(cfg, "rotation.phase_rad", 0.0);
    return rot;
}

std::vector<double> frequency_grid(Config& cfg, const std::string& prefix,
                                   double lo_default_ghz, double hi_default_ghz) {
    const double lo = resolve(cfg, prefix + ".f_min_ghz", lo_default_ghz) * 1e9;
    const double hi = resolve(cfg, prefix + ".f_max_ghz", hi_default_ghz) * 1e9;
    const long long n = resolve_int(cfg, prefix + ".n_freq", 1601);
    if (!(hi > lo)) throw ConfigError(prefix + ".f_max_ghz must exceed " + prefix + ".f_min_ghz");
    if (n < 2) throw ConfigError(prefix + ".n_freq must be at least 2");
    return linspace(lo, hi, static_cast<std::size_t>(n));
}

// ------------------------------------------------------------------ commands

void cmd_simulate_pendulum(const CommonOpts& o) {
    Config cfg = load_config(o);
    const ResolvedSetup setup = setup_from_config(cfg);
    const double T = setup.trap.drive_period();

    PendulumState s0;
    s0.alpha = resolve(cfg, "pendulum.alpha0_rad", 5e-3);
    s0.alpha_dot = resolve(cfg, "pendulum.alpha_dot0_rad_s", 0.0);
    const double t_end = resolve(cfg, "pendulum.t_end_periods", 200.0) * T;
    const double dt_max = resolve(cfg, "pendulum.dt_max_periods", 1.0 / 256.0) * T;
    const double dt_sample = resolve(cfg, "pendulum.dt_sample_periods", 1.0 / 64.0) * T;
    const ClassifySettings cs = classify_from_config(cfg);

    const Trajectory1D traj =
        integrate_pendulum(setup.trap, setup.body, s0, t_end, dt_max, dt_sample);
    CsvWriter csv({"t_s", "alpha_rad", "alpha_dot_rad_s"});
    for (std::size_t i = 0; i < traj.size(); ++i)
        csv.add_row(std::vector<double>{traj.t[i], traj.alpha[i], traj.alpha_dot[i]});
    csv.write_file(out_path(o.output_dir, "trajectory.csv"));

    const RegimeLabel label = classify_regime(setup.trap, setup.body, s0, cs);
    const PendulumOmega po = pendulum_omega0(setup.trap, setup.body);
    const OmegaMax om = omega_max(po.omega0, setup.body.gamma0);

    std::string rep;
    rep += "regime = " + std::string(regime_name(label.regime)) + "\n";
    rep += "eta = " + format_double(label.eta) + "\n";
    rep += "omega0_rad_s = " + format_double(po.omega0) + "\n";
    rep += "f0_hz = " + format_double(po.omega0 / (2.0 * constants::pi)) + "\n";
    rep += "standard_orientation = " + std::string(po.standard_orientation ? "1" : "0") + "\n";
    rep += "omega_max_unbounded = " + std::string(om.unbounded ? "1" : "0") + "\n";
    if (!om.unbounded) {
        rep += "omega_max_rad_s = " + format_double(om.value) + "\n";
        rep += "f_max_hz = " + format_double(om.value / (2.0 * constants::pi)) + "\n";
    }
    rep += "corotating_valid = " +
           std::string(corotating_valid(setup.trap, setup.body) ? "1" : "0") + "\n";
    write_text_file(out_path(o.output_dir, "regime.txt"), rep);

    Manifest m = base_manifest("simulate-pendulum", cfg, o);
    m.add("result.regime", std::string(regime_name(label.regime)));
    m.add("result.eta", label.eta);
    m.add_output(o.output_dir, "trajectory.csv");
    m.add_output(o.output_dir, "regime.txt");
    m.write_file(out_path(o.output_dir, "manifest.txt"));
}

void cmd_phase_diagram(const CommonOpts& o) {
    Config cfg = load_config(o);
    const ResolvedSetup setup = setup_from_config(cfg);

    const double v0_min = resolve(cfg, "phase.v0_min_volts", 400.0);
    const double v0_max = resolve(cfg, "phase.v0_max_volts", 2000.0);
    const long long n_v0 = resolve_int(cfg, "phase.n_v0", 10);
    if (n_v0 < 1) throw ConfigError("phase.n_v0 must be at least 1");
    const std::vector<double> grid = linspace(v0_min, v0_max, static_cast<std::size_t>(n_v0));

    PhaseDiagramSettings ps;
    ps.jobs = o.jobs;
    ps.range_lo_omega0 = resolve(cfg, "phase.range_lo", ps.range_lo_omega0);
    ps.range_hi_omega0 = resolve(cfg, "phase.range_hi", ps.range_hi_omega0);
    ps.with_floquet_boundary = resolve_int(cfg, "phase.floquet_boundary", 1) != 0;
    ps.sweep.classify = classify_from_config(cfg);
    ps.sweep.step_rel = resolve(cfg, "phase.step_rel", ps.sweep.step_rel);
    ps.sweep.refine_rel = resolve(cfg, "phase.refine_rel", ps.sweep.refine_rel);
    ps.sweep.n_steps = static_cast<std::size_t>(resolve_int(cfg, "phase.n_steps", 0));
    ps.sweep.seed_amplitude = resolve(cfg, "phase.seed_amplitude_rad", ps.sweep.seed_amplitude);
    ps.sweep.amplitude_floor = resolve(cfg, "phase.amplitude_floor_rad", ps.sweep.amplitude_floor);

    const PhaseDiagram pd = phase_diagram(setup.trap, setup.body, grid, ps);

    const double twopi = 2.0 * constants::pi;
    CsvWriter csv({"v0_volts", "f_lr_hz", "f_rl_hz", "f_floquet_hz"});
    for (std::size_t i = 0; i < pd.v0_grid.size(); ++i)
        csv.add_row(std::vector<double>{pd.v0_grid[i], pd.omega_lr[i] / twopi,
                                        pd.omega_rl[i] / twopi, pd.omega_floquet[i] / twopi});
    csv.write_file(out_path(o.output_dir, "phase_diagram.csv"));

    Manifest m = base_manifest("phase-diagram", cfg, o);
    std::size_t n_failed = 0;
    for (std::size_t i = 0; i < pd.errors.size(); ++i)
        if (!pd.errors[i].empty()) {
            ++n_failed;
            m.add("point." + std::to_string(i) + ".error", pd.errors[i]);
        }
    m.add("result.points_failed", static_cast<long long>(n_failed));
    m.add_output(o.output_dir, "phase_diagram.csv");

    // Linear-stability grid of the aligned solution for overlaying the
    // parametric-instability region.
    const long long nf = resolve_int(cfg, "phase.floquet_grid_n_freq", 33);
    if (nf >= 2) {
        auto omega0_at = [&](double v) {
            TrapDrive t = setup.trap;
            t.v0 = v;
            return pendulum_omega0(t, setup.body).omega0;
        };
        const double f_lo = ps.range_lo_omega0 * omega0_at(v0_min) / twopi;
        const double f_hi = ps.range_hi_omega0 * omega0_at(v0_max) / twopi;
        const std::vector<double> freqs = linspace(f_lo, f_hi, static_cast<std::size_t>(nf));
        CsvWriter fg({"v0_volts", "f_hz", "stable_bool"});
        std::vector<std::vector<int>> stable(grid.size(),
                                             std::vector<int>(freqs.size(), 0));
        parallel_for(grid.size(), o.jobs, [&](std::size_t i) {
            TrapDrive t = setup.trap;
            t.v0 = grid[i];
            for (std::size_t j = 0; j < freqs.size(); ++j) {
                t.omega_d = twopi * freqs[j];
                stable[i][j] = pendulum_instability(t, setup.body) ? 0 : 1;
            }
        });
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (std::size_t j = 0; j < freqs.size(); ++j)
                fg.add_row(std::vector<double>{grid[i], freqs[j],
                                               static_cast<double>(stable[i][j])});
        fg.write_file(out_path(o.output_dir, "floquet_grid.csv"));
        m.add_output(o.output_dir, "floquet_grid.csv");
    }

    m.write_file(out_path(o.output_dir, "manifest.txt"));
}

void cmd_simulate_3d(const CommonOpts& o) {
    Config cfg = load_config(o);
    const ResolvedSetup setup = setup_from_config(cfg);
    const double T = setup.trap.drive_period();
    const double twopi = 2.0 * constants::pi;

    BodyState s0;
    s0.orientation = Orientation::from_euler_zyz(
        resolve(cfg, "rigid.alpha0_rad", 5e-3),
        resolve(cfg, "rigid.beta0_rad", constants::pi / 2.0),
        resolve(cfg, "rigid.gamma0_rad", 0.0));
    s0.omega_body = Eigen::Vector3d(resolve(cfg, "rigid.w1_rad_s", 0.0),
                                    resolve(cfg, "rigid.w2_rad_s", 0.0),
                                    resolve(cfg, "rigid.w3_rad_s", 0.0));
    const double t_end = resolve(cfg, "rigid.t_end_periods", 100.0) * T;
    const double dt_max = resolve(cfg, "rigid.dt_max_periods", 1.0 / 256.0) * T;
    const double dt_sample = resolve(cfg, "rigid.dt_sample_periods", 1.0 / 64.0) * T;
    const std::string drive = resolve_string(cfg, "rigid.drive", "oscillating");
    DriveMode mode;
    if (drive == "oscillating") mode = DriveMode::Oscillating;
    else if (drive == "frozen") mode = DriveMode::FrozenAtPeak;
    else throw ConfigError("rigid.drive must be 'oscillating' or 'frozen'");

    const Trajectory3D traj =
        integrate_rigid(setup.trap, setup.body, s0, t_end, dt_max, dt_sample, mode);
    CsvWriter csv({"t_s", "qw", "qx", "qy", "qz", "alpha_rad", "beta_rad", "gamma_rad",
                   "w1", "w2", "w3"});
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const Eigen::Quaterniond& q = traj.q[i];
        const EulerZyz e = Orientation::from_quaternion(q).euler_zyz();
        csv.add_row(std::vector<double>{traj.t[i], q.w(), q.x(), q.y(), q.z(), e.alpha,
                                        e.beta, e.gamma, traj.omega_body[i].x(),
                                        traj.omega_body[i].y(), traj.omega_body[i].z()});
    }
    csv.write_file(out_path(o.output_dir, "trajectory3d.csv"));

    // Secular-frequency report for both regimes, the center-of-mass modes,
    // and the parametric stability of the six aligned configurations.
    std::string rep;
    const LibrationFrequencies lib = libration_frequencies(setup.trap, setup.body);
    rep += "libration.omega_alpha_rad_s = " + format_double(lib.omega_alpha) + "\n";
    rep += "libration.omega_beta_rad_s = " + format_double(lib.omega_beta) + "\n";
    rep += "libration.omega_gamma_rad_s = " + format_double(lib.omega_gamma) + "\n";
    rep += "libration.f_alpha_hz = " + format_double(lib.omega_alpha / twopi) + "\n";
    rep += "libration.f_beta_hz = " + format_double(lib.omega_beta / twopi) + "\n";
    rep += "libration.f_gamma_hz = " + format_double(lib.omega_gamma / twopi) + "\n";
    rep += "libration.validity_parameter = " + format_double(lib.validity_parameter) + "\n";
    rep += "libration.valid = " + std::string(lib.valid ? "1" : "0") + "\n";
    const RotatingFrameFrequencies rf =
        rotating_frame_frequencies(setup.trap, setup.body, setup.trap.omega_d);
    auto rot_mode = [&rep, twopi](const char* name, const RotatingMode& mode_s) {
        rep += std::string("rotating.") + name +
               ".unstable = " + (mode_s.unstable ? "1" : "0") + "\n";
        rep += std::string("rotating.") + name +
               ".omega_rad_s = " + format_double(mode_s.omega) + "\n";
        rep += std::string("rotating.") + name +
               ".f_hz = " + format_double(mode_s.omega / twopi) + "\n";
    };
    rot_mode("alpha", rf.alpha);
    rot_mode("beta", rf.beta);
    rot_mode("gamma", rf.gamma);
    if (setup.body.mass > 0.0 && setup.body.q_tot != 0.0) {
        const ComFrequencies com =
            com_secular_frequencies(setup.trap, setup.body.q_tot, setup.body.mass);
        const char* axes = "xyz";
        for (int u = 0; u < 3; ++u) {
            rep += std::string("com.f_") + axes[u] +
                   "_hz = " + format_double(com.omega[static_cast<std::size_t>(u)] / twopi) +
                   "\n";
            rep += std::string("com.q_") + axes[u] +
                   " = " + format_double(com.q_param[static_cast<std::size_t>(u)]) + "\n";
        }
        rep += "com.valid = " + std::string(com.valid ? "1" : "0") + "\n";
    } else {
        rep += "com.skipped = body has no charge or mass specified\n";
    }
    try {
        const EquilibriumSet eq = equilibria(setup.trap, setup.body);
        for (std::size_t k = 0; k < eq.entries.size(); ++k) {
            const Equilibrium& e = eq.entries[k];
            const EulerZyz ang = e.orientation.euler_zyz();
            const std::string p = "equilibrium." + std::to_string(k) + ".";
            rep += p + "alpha_rad = " + format_double(ang.alpha) + "\n";
            rep += p + "beta_rad = " + format_double(ang.beta) + "\n";
            rep += p + "gamma_rad = " + format_double(ang.gamma) + "\n";
            rep += p + "stable = " + std::string(e.stable ? "1" : "0") + "\n";
            for (int u = 0; u < 3; ++u) {
                rep += p + "mode_q_" + std::to_string(u) + " = " +
                       format_double(e.mode_q[static_cast<std::size_t>(u)]) + "\n";
                rep += p + "f_secular_" + std::to_string(u) + "_hz = " +
                       format_double(e.secular_freq[static_cast<std::size_t>(u)] / twopi) +
                       "\n";
            }
        }
    } catch (const DegenerateSpectrum& e) {
        rep += std::string("equilibria.error = ") + e.what() + "\n";
    }
    write_text_file(out_path(o.output_dir, "modes.txt"), rep);

    Manifest m = base_manifest("simulate-3d", cfg, o);
    m.add_output(o.output_dir, "trajectory3d.csv");
    m.add_output(o.output_dir, "modes.txt");
    m.write_file(out_path(o.output_dir, "manifest.txt"));
}

void cmd_psd(const CommonOpts& o, const std::string& input, long long segments,
             double overlap) {
    Config cfg = load_config(o);
    const ResolvedSetup setup = setup_from_config(cfg);
    Eigen::Vector3d axis(resolve(cfg, "detect.axis_x", 1.0),
                         resolve(cfg, "detect.axis_y", 0.0),
                         resolve(cfg, "detect.axis_z", 0.0));
    if (axis.norm() < 1e-12) throw ConfigError("detect.axis_* must not be all zero");
    axis.normalize();
    const double asymmetry = resolve(cfg, "detect.asymmetry", 0.0);

    const CsvTable table = read_csv(input);
    const std::size_t tcol = table.column("t_s");
    std::vector<double> t(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) t[i] = std::stod(table.rows[i][tcol]);
    if (t.size() < 16) throw InsufficientData(input + ": too few samples for a PSD");
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i)
        if (std::abs(t[i] - t[i - 1] - dt) > 1e-6 * dt)
            throw ConstraintViolation(input + ": trajectory must be uniformly sampled");

    std::vector<double> signal(t.size());
    const bool is_3d =
        std::find(table.header.begin(), table.header.end(), "qw") != table.header.end();
    if (is_3d) {
        Trajectory3D traj;
        traj.t = t;
        const std::size_t cw = table.column("qw"), cx = table.column("qx"),
                          cy = table.column("qy"), cz = table.column("qz");
        traj.q.reserve(t.size());
        traj.omega_body.assign(t.size(), Eigen::Vector3d::Zero());
        for (const auto& row : table.rows)
            traj.q.emplace_back(std::stod(row[cw]), std::stod(row[cx]), std::stod(row[cy]),
                                std::stod(row[cz]));
        signal = detection_signal(traj, axis, asymmetry);
    } else {
        // Planar trajectory: the long axis sweeps the xy-plane at angle alpha.
        const std::size_t ca = table.column("alpha_rad");
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const double a = std::stod(table.rows[i][ca]);
            const double proj = axis.x() * std::cos(a) + axis.y() * std::sin(a);
            signal[i] = proj * proj + asymmetry * proj;
        }
    }

    if (segments < 1) throw ConfigError("--psd-segments must be at least 1");
    const std::size_t seg_len = signal.size() / static_cast<std::size_t>(segments);
    const Psd spectrum = psd(signal, 1.0 / dt, seg_len, overlap);

    CsvWriter csv({"f_hz", "power_db"});
    for (std::size_t i = 0; i < spectrum.freq_hz.size(); ++i)
        csv.add_row(std::vector<double>{
            spectrum.freq_hz[i], 10.0 * std::log10(std::max(spectrum.power[i], 1e-300))});
    csv.write_file(out_path(o.output_dir, "psd.csv"));

    const double threshold_db = resolve(cfg, "psd.threshold_db", 10.0);
    const double dynamic_range_db = resolve(cfg, "psd.dynamic_range_db", 80.0);
    const PsdClassification cls =
        classify_psd(spectrum, setup.trap.omega_d, threshold_db, dynamic_range_db);
    std::string rep;
    rep += "has_half_harmonic = " + std::string(cls.has_half_harmonic ? "1" : "0") + "\n";
    rep += "f_half_hz = " +
           format_double(setup.trap.omega_d / (4.0 * constants::pi)) + "\n";
    rep += "rbw_hz = " + format_double(spectrum.rbw_hz) + "\n";
    rep += "sample_rate_hz = " + format_double(spectrum.sample_rate_hz) + "\n";
    rep += "n_peaks = " + std::to_string(cls.peaks.size()) + "\n";
    for (std::size_t i = 0; i < cls.peaks.size() && i < 10; ++i) {
        rep += "peak." + std::to_string(i) +
               ".f_hz = " + format_double(cls.peaks[i].freq_hz) + "\n";
        rep += "peak." + std::to_string(i) +
               ".power_db = " + format_double(cls.peaks[i].power_db) + "\n";
    }
    write_text_file(out_path(o.output_dir, "classification.txt"), rep);

    Manifest m = base_manifest("psd", cfg, o);
    m.add("input", input);
    m.add("psd_segments", segments);
    m.add("psd_overlap", overlap);
    m.add("result.has_half_harmonic", std::string(cls.has_half_harmonic ? "1" : "0"));
    m.add_output(o.output_dir, "psd.csv");
    m.add_output(o.output_dir, "classification.txt");
    m.write_file(out_path(o.output_dir, "manifest.txt"));
}

void cmd_odmr(const CommonOpts& o) {
    Config cfg = load_config(o);
    const NvModel model = nv_from_config(cfg);
    const RotationModel rot = rotation_from_config(cfg);
    const Eigen::Vector3d b_lab(resolve(cfg, "nv.b_x_mt", 10.0) * 1e-3,
                                resolve(cfg, "nv.b_y_mt", 0.0) * 1e-3,
                                resolve(cfg, "nv.b_z_mt", 0.0) * 1e-3);
    const std::vector<double> grid = frequency_grid(cfg, "odmr", 2.5, 3.3);
    const std::string mode = resolve_string(cfg, "odmr.mode", "continuous");

    std::vector<double> pl;
    if (mode == "continuous") {
        const long long n_samples = resolve_int(cfg, "odmr.n_time_samples", 512);
        if (n_samples < 1) throw ConfigError("odmr.n_time_samples must be positive");
        pl = odmr_continuous_rotating(rot, b_lab, model, grid,
                                      static_cast<std::size_t>(n_samples));
    } else if (mode == "static") {
        pl = odmr_spectrum_static(rot.orientation_at(0.0), b_lab, model, grid);
    } else {
        throw ConfigError("odmr.mode must be 'continuous' or 'static'");
    }

    CsvWriter csv({"f_hz", "pl_normalized"});
    for (std::size_t i = 0; i < grid.size(); ++i)
        csv.add_row(std::vector<double>{grid[i], pl[i]});
    csv.write_file(out_path(o.output_dir, "odmr.csv"));

    Manifest m = base_manifest("odmr", cfg, o);
    m.add_output(o.output_dir, "odmr.csv");
    m.write_file(out_path(o.output_dir, "manifest.txt"));
}

void cmd_strobe(const CommonOpts& o) {
    Config cfg = load_config(o);
    const NvModel model = nv_from_config(cfg);
    const RotationModel rot = rotation_from_config(cfg);
    // Default window covers the upper transition branch only, so every delay
    // column holds at most one line per axis class (the fit's protocol).
    const std::vector<double> grid = frequency_grid(cfg, "strobe", 2.91, 3.2);

    const long long n_delays = resolve_int(cfg, "strobe.n_delays", 48);
    if (n_delays < 2) throw ConfigError("strobe.n_delays must be at least 2");
    const double t_rot = rot.rotation_period();
    std::vector<double> delays(static_cast<std::size_t>(n_delays));
    for (std::size_t i = 0; i < delays.size(); ++i)
        delays[i] = t_rot * static_cast<double>(i) / static_cast<double>(n_delays);
    const double tau = resolve(cfg, "strobe.tau_over_trot", 0.005) * t_rot;
    const double noise = resolve(cfg, "strobe.pl_noise_sigma", 0.0);

    const std::array<Eigen::Vector3d, 2> fields{
        Eigen::Vector3d(resolve(cfg, "field1.b_x_mt", 10.0) * 1e-3,
                        resolve(cfg, "field1.b_y_mt", 0.0) * 1e-3,
                        resolve(cfg, "field1.b_z_mt", 0.0) * 1e-3),
        Eigen::Vector3d(resolve(cfg, "field2.b_x_mt", 0.0) * 1e-3,
                        resolve(cfg, "field2.b_y_mt", 10.0) * 1e-3,
                        resolve(cfg, "field2.b_z_mt", 0.0) * 1e-3)};

    Manifest m = base_manifest("strobe", cfg, o);
    for (int k = 0; k < 2; ++k) {
        const std::string label = "b" + std::to_string(k + 1);
        StroboMap map = strobe_map(rot, fields[static_cast<std::size_t>(k)], model, delays,
                                   grid, tau, label);
        if (noise > 0.0) {
            SplitMix64 rng(static_cast<std::uint64_t>(o.seed) ^
                           (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(k + 1)));
            for (auto& col : map.pl)
                for (double& v : col) v = std::max(0.0, v + noise * rng.next_normal());
        }
        const std::vector<std::pair<std::string, std::string>> extra{
            {"d_splitting_hz", format_double(model.d_splitting_hz)},
            {"gamma_e_hz_per_t", format_double(model.gamma_e_hz_per_t)},
            {"linewidth_sigma_hz", format_double(model.linewidth_sigma_hz)},
            {"contrast", format_double(model.contrast)},
            {"f_rot_hz", format_double(rot.omega_rot / (2.0 * constants::pi))},
            {"seed", std::to_string(o.seed)},
            {"pl_noise_sigma", format_double(noise)},
        };
        const std::string csv_name = "strobe_" + label + ".csv";
        const std::string meta_name = "strobe_" + label + ".meta";
        write_strobe_map(map, out_path(o.output_dir, csv_name),
                         out_path(o.output_dir, meta_name), extra);
        m.add_output(o.output_dir, csv_name);
        m.add_output(o.output_dir, meta_name);
    }
    m.write_file(out_path(o.output_dir, "manifest.txt"));
}

std::string default_sidecar(const std::string& map_path) {
    std::filesystem::path p(map_path);
    p.replace_extension(".meta");
    return p.string();
}

void cmd_fit(const CommonOpts& o, const std::string& map1, std::string sidecar1,
             const std::string& map2, std::string sidecar2) {
    Config cfg = load_config(o);
    if (sidecar1.empty()) sidecar1 = default_sidecar(map1);
    const StroboMap m1 = read_strobe_map(map1, sidecar1);
    StroboMap m2;
    if (!map2.empty()) {
        if (sidecar2.empty()) sidecar2 = default_sidecar(map2);
        m2 = read_strobe_map(map2, sidecar2);
    }

    // The synthesis model recorded in the sidecar takes precedence over the
    // config; explicit nv.* keys still win over both.
    const Config side = Config::parse_file(sidecar1);
    NvModel model = NvModel::standard();
    model.d_splitting_hz = cfg.has("nv.d_splitting_ghz")
                               ? resolve(cfg, "nv.d_splitting_ghz", 0.0) * 1e9
                               : side.get_double("d_splitting_hz", model.d_splitting_hz);
    model.gamma_e_hz_per_t = cfg.has("nv.gamma_e_ghz_per_t")
                                 ? resolve(cfg, "nv.gamma_e_ghz_per_t", 0.0) * 1e9
                                 : side.get_double("gamma_e_hz_per_t", model.gamma_e_hz_per_t);
    model.linewidth_sigma_hz =
        cfg.has("nv.linewidth_fwhm_mhz")
            ? resolve(cfg, "nv.linewidth_fwhm_mhz", 0.0) * 1e6 * constants::fwhm_to_sigma
            : side.get_double("linewidth_sigma_hz", model.linewidth_sigma_hz);
    model.contrast = cfg.has("nv.contrast") ? resolve(cfg, "nv.contrast", 0.0)
                                            : side.get_double("contrast", model.contrast);
    validate_nv(model);

    double f_rot;
    if (cfg.has("rotation.f_rot_hz")) f_rot = cfg.get_double("rotation.f_rot_hz");
    else if (side.has("f_rot_hz")) f_rot = side.get_double("f_rot_hz");
    else f_rot = cfg.get_double("trap.freq_hz", 3800.0) / 2.0;
    cfg.set("rotation.f_rot_hz", format_double(f_rot));
    const double omega_rot = 2.0 * constants::pi * f_rot;

    const long long n_lines = resolve_int(cfg, "fit.n_lines", 4);
    const double prominence = resolve(cfg, "fit.prominence", 0.0);
    FitSettings fs;
    fs.n_starts = static_cast<int>(resolve_int(cfg, "fit.n_starts", fs.n_starts));
    fs.max_iterations =
        static_cast<int>(resolve_int(cfg, "fit.max_iterations", fs.max_iterations));
    fs.screen_iterations =
        static_cast<int>(resolve_int(cfg, "fit.screen_iterations", fs.screen_iterations));
    fs.jobs = o.jobs;

    const ResonanceTraces tr1 =
        extract_resonances(m1, static_cast<std::size_t>(n_lines), prominence);
    ResonanceTraces tr2;
    if (!map2.empty())
        tr2 = extract_resonances(m2, static_cast<std::size_t>(n_lines), prominence);

    const FitResult fr = fit_rotation(tr1, m1.b_lab, tr2, m2.b_lab, model, omega_rot, fs);

    std::string rep;
    rep += "converged = " + std::string(fr.converged ? "1" : "0") + "\n";
    rep += "iterations = " + std::to_string(fr.iterations) + "\n";
    rep += "best_start = " + std::to_string(fr.best_start) + "\n";
    rep += "axis_x = " + format_double(fr.axis.x()) + "\n";
    rep += "axis_y = " + format_double(fr.axis.y()) + "\n";
    rep += "axis_z = " + format_double(fr.axis.z()) + "\n";
    rep += "axis_theta_rad = " + format_double(fr.axis_theta) + "\n";
    rep += "axis_phi_rad = " + format_double(fr.axis_phi) + "\n";
    rep += "phase_rad = " + format_double(fr.phase) + "\n";
    const Eigen::Quaterniond q0 = fr.orientation0.quaternion();
    rep += "orientation0_qw = " + format_double(q0.w()) + "\n";
    rep += "orientation0_qx = " + format_double(q0.x()) + "\n";
    rep += "orientation0_qy = " + format_double(q0.y()) + "\n";
    rep += "orientation0_qz = " + format_double(q0.z()) + "\n";
    const EulerZyz e0 = fr.orientation0.euler_zyz();
    rep += "orientation0_alpha_rad = " + format_double(e0.alpha) + "\n";
    rep += "orientation0_beta_rad = " + format_double(e0.beta) + "\n";
    rep += "orientation0_gamma_rad = " + format_double(e0.gamma) + "\n";
    rep += "residual_rms_hz = " + format_double(fr.residual_rms_hz) + "\n";
    rep += "null_modes = " + std::to_string(fr.null_modes) + "\n";
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            rep += "covariance." + std::to_string(i) + "." + std::to_string(j) + " = " +
                   format_double(fr.covariance(i, j)) + "\n";
    write_text_file(out_path(o.output_dir, "fit_report.txt"), rep);

    // Fitted vs measured line centers per delay per field.
    RotationModel rot;
    rot.axis = fr.axis;
    rot.omega_rot = omega_rot;
    rot.orientation0 = fr.orientation0;
    rot.phase = fr.phase;
    CsvWriter lines({"field_label", "delta_t_s", "track", "nv_class", "branch",
                     "measured_hz", "sigma_hz", "fitted_hz", "residual_hz"});
    const std::array<const StroboMap*, 2> maps{&m1, &m2};
    const std::array<const ResonanceTraces*, 2> trs{&tr1, &tr2};
    for (std::size_t d = 0; d < (map2.empty() ? std::size_t{1} : std::size_t{2}); ++d) {
        const ClassAssignment asg = class_assignment(*trs[d]);
        const int branch = fr.branch_of_dataset[d];
        for (std::size_t c = 0; c < trs[d]->lines.size(); ++c) {
            const Orientation ori = rot.orientation_at(trs[d]->delays_s[c]);
            for (std::size_t l = 0; l < trs[d]->lines[c].size(); ++l) {
                const ResonanceLine& line = trs[d]->lines[c][l];
                const int track = asg.track_of_line[c][l];
                const int cls = fr.class_of_line[d][c][l];
                const Eigen::Vector3d axis_lab =
                    ori.quaternion() * model.axes0[static_cast<std::size_t>(cls)];
                const TransitionPair pair =
                    transition_frequencies(maps[d]->b_lab, axis_lab, model);
                const double fitted = branch < 0 ? pair.f_minus : pair.f_plus;
                lines.add_row(std::vector<std::string>{
                    maps[d]->field_label, format_double(trs[d]->delays_s[c]),
                    std::to_string(track), std::to_string(cls), std::to_string(branch),
                    format_double(line.center_hz), format_double(line.sigma_hz),
                    format_double(fitted), format_double(line.center_hz - fitted)});
            }
        }
    }
    lines.write_file(out_path(o.output_dir, "fit_lines.csv"));

    Manifest m = base_manifest("fit", cfg, o);
    m.add("input.map1", map1);
    m.add("input.sidecar1", sidecar1);
    if (!map2.empty()) {
        m.add("input.map2", map2);
        m.add("input.sidecar2", sidecar2);
    }
    m.add("result.converged", std::string(fr.converged ? "1" : "0"));
    m.add("result.residual_rms_hz", fr.residual_rms_hz);
    m.add("result.null_modes", static_cast<long long>(fr.null_modes));
    m.add_output(o.output_dir, "fit_report.txt");
    m.add_output(o.output_dir, "fit_lines.csv");
    m.write_file(out_path(o.output_dir, "manifest.txt"));
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"Rotational dynamics of charged particles in an AC quadrupole trap: "
                 "simulation, spectral analysis, NV spin readout, and reconstruction"};
    app.set_version_flag("--version", std::string("rotortrap ") + kVersion);
    app.require_subcommand(1);

    CommonOpts o_pend;
    CLI::App* c_pend = app.add_subcommand(
        "simulate-pendulum", "Integrate the reduced planar rotor and classify its regime");
    add_common(c_pend, o_pend);
    c_pend->callback([&] { cmd_simulate_pendulum(o_pend); });

    CommonOpts o_phase;
    CLI::App* c_phase = app.add_subcommand(
        "phase-diagram", "Hysteretic transition boundaries over a drive-voltage grid");
    add_common(c_phase, o_phase);
    c_phase->callback([&] { cmd_phase_diagram(o_phase); });

    CommonOpts o_3d;
    CLI::App* c_3d = app.add_subcommand(
        "simulate-3d", "Integrate the full rigid-body dynamics and report secular modes");
    add_common(c_3d, o_3d);
    c_3d->callback([&] { cmd_simulate_3d(o_3d); });

    CommonOpts o_psd;
    std::string psd_input;
    long long psd_segments = 8;
    double psd_overlap = 0.5;
    CLI::App* c_psd = app.add_subcommand(
        "psd", "Welch power spectral density and regime classification of a trajectory");
    add_common(c_psd, o_psd);
    c_psd->add_option("-i,--input", psd_input, "Trajectory CSV (planar or rigid-body)")
        ->required();
    c_psd->add_option("--psd-segments", psd_segments, "Number of Welch segments")
        ->capture_default_str();
    c_psd->add_option("--psd-overlap", psd_overlap, "Segment overlap fraction in [0, 1)")
        ->capture_default_str();
    c_psd->callback([&] { cmd_psd(o_psd, psd_input, psd_segments, psd_overlap); });

    CommonOpts o_odmr;
    CLI::App* c_odmr = app.add_subcommand(
        "odmr", "Continuous or static ODMR spectrum of the rotating NV ensemble");
    add_common(c_odmr, o_odmr);
    c_odmr->callback([&] { cmd_odmr(o_odmr); });

    CommonOpts o_strobe;
    CLI::App* c_strobe = app.add_subcommand(
        "strobe", "Stroboscopic ODMR maps for two probe fields");
    add_common(c_strobe, o_strobe);
    c_strobe->callback([&] { cmd_strobe(o_strobe); });

    CommonOpts o_fit;
    std::string fit_map1, fit_sidecar1, fit_map2, fit_sidecar2;
    CLI::App* c_fit = app.add_subcommand(
        "fit", "Reconstruct the rotation model from stroboscopic ODMR maps");
    add_common(c_fit, o_fit);
    c_fit->add_option("--map1", fit_map1, "First strobe map CSV")->required();
    c_fit->add_option("--sidecar1", fit_sidecar1,
                      "First sidecar (default: map path with .meta extension)");
    c_fit->add_option("--map2", fit_map2, "Second strobe map CSV (optional)");
    c_fit->add_option("--sidecar2", fit_sidecar2,
                      "Second sidecar (default: map path with .meta extension)");
    c_fit->callback([&] { cmd_fit(o_fit, fit_map1, fit_sidecar1, fit_map2, fit_sidecar2); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    return 0;
}

} // namespace rotortrap::cli
