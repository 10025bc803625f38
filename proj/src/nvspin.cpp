#include "rotortrap/nvspin.hpp"

#include "rotortrap/config.hpp"
#include "rotortrap/csvio.hpp"
#include "rotortrap/errors.hpp"

#include <algorithm>
#include <cmath>

namespace rotortrap {

NvModel NvModel::standard() {
    NvModel m;
    const double s = 1.0 / std::sqrt(3.0);
    m.axes0 = {Eigen::Vector3d(1, 1, 1) * s, Eigen::Vector3d(1, -1, -1) * s,
               Eigen::Vector3d(-1, 1, -1) * s, Eigen::Vector3d(-1, -1, 1) * s};
    return m;
}

void validate_nv(const NvModel& model) {
    if (!(model.d_splitting_hz > 0.0))
        throw ConstraintViolation("zero-field splitting must be positive");
    if (!(model.gamma_e_hz_per_t > 0.0))
        throw ConstraintViolation("gyromagnetic ratio must be positive");
    if (!(model.linewidth_sigma_hz > 0.0))
        throw ConstraintViolation("linewidth must be positive");
    if (!(model.contrast > 0.0) || !(model.contrast < 1.0))
        throw ConstraintViolation("contrast must lie in (0, 1)");
    const double third = 1.0 / 3.0;
    for (int i = 0; i < 4; ++i) {
        if (std::abs(model.axes0[i].norm() - 1.0) > 1e-9)
            throw ConstraintViolation("NV class axes must be unit vectors");
        for (int j = i + 1; j < 4; ++j) {
            const double c = model.axes0[i].dot(model.axes0[j]);
            if (std::abs(std::abs(c) - third) > 1e-9)
                throw ConstraintViolation(
                    "NV class axes must form the tetrahedral [111] family");
        }
    }
}

namespace {

// Eigen-decomposition of the 3x3 spin Hamiltonian.  The closed-form solver is
// used first; if its residual is poor (ill-conditioned characteristic cubic)
// the iterative solver takes over.
void solve_hamiltonian(const Eigen::Matrix3d& H, Eigen::Vector3d& evals,
                       Eigen::Matrix3d& evecs) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
    solver.computeDirect(H);
    const double scale = std::max(H.norm(), 1.0);
    const double residual =
        (H * solver.eigenvectors() -
         solver.eigenvectors() * solver.eigenvalues().asDiagonal())
            .norm();
    if (!(residual <= 1e-9 * scale)) solver.compute(H);
    evals = solver.eigenvalues();
    evecs = solver.eigenvectors();
}

} // namespace

TransitionPair transition_frequencies(const Eigen::Vector3d& b_lab,
                                      const Eigen::Vector3d& axis, const NvModel& model) {
    if (std::abs(axis.norm() - 1.0) > 1e-9)
        throw ConstraintViolation("NV axis must be a unit vector");
    if (!(b_lab.norm() < 0.3))
        throw ConstraintViolation("field magnitude must stay below 0.3 T "
                                  "(ground-state model validity)");

    const double b_par = b_lab.dot(axis);
    const double b_perp = (b_lab - b_par * axis).norm();
    const double zp = model.gamma_e_hz_per_t * b_par;
    const double zx = model.gamma_e_hz_per_t * b_perp / std::sqrt(2.0);
    const double D = model.d_splitting_hz;

    // Basis |+1>, |0>, |-1>; Sz = diag(1, 0, -1), Sx = ((0,1,0),(1,0,1),(0,1,0))/sqrt(2).
    Eigen::Matrix3d H;
    H << D + zp, zx, 0.0,
         zx, 0.0, zx,
         0.0, zx, D - zp;

    Eigen::Vector3d evals;
    Eigen::Matrix3d evecs;
    solve_hamiltonian(H, evals, evecs);

    // The 0-character state carries the largest |0> (middle-row) weight.
    int k0 = 0;
    double best = -1.0;
    for (int k = 0; k < 3; ++k) {
        const double w = std::abs(evecs(1, k));
        if (w > best) {
            best = w;
            k0 = k;
        }
    }
    std::array<double, 2> others{};
    int m = 0;
    for (int k = 0; k < 3; ++k)
        if (k != k0) others[m++] = evals(k) - evals(k0);
    TransitionPair out;
    out.f_minus = std::min(others[0], others[1]);
    out.f_plus = std::max(others[0], others[1]);
    return out;
}

Orientation RotationModel::orientation_at(double t) const {
    const double angle =
        std::fmod(omega_rot * t + phase, 2.0 * constants::pi);
    const Eigen::Quaterniond spin(Eigen::AngleAxisd(angle, axis.normalized()));
    return Orientation::from_quaternion(spin * orientation0.quaternion());
}

double RotationModel::rotation_period() const {
    if (!(omega_rot > 0.0)) throw ConstraintViolation("omega_rot must be positive");
    return 2.0 * constants::pi / omega_rot;
}

double theta_angle(const RotationModel& rot, int class_index, const Eigen::Vector3d& b_dir,
                   double t, const NvModel& model) {
    if (class_index < 0 || class_index >= 4)
        throw ConstraintViolation("NV class index must be 0..3");
    if (std::abs(b_dir.norm() - 1.0) > 1e-9)
        throw ConstraintViolation("field direction must be a unit vector");
    const Eigen::Vector3d axis_lab =
        rot.orientation_at(t).quaternion() * model.axes0[static_cast<std::size_t>(class_index)];
    double c = axis_lab.dot(b_dir);
    if (std::abs(c) > 1.0 + 1e-9)
        throw NumericalError("cos(theta) out of range; inputs are not unit vectors");
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

ThetaSinusoid fit_theta_sinusoid(const std::vector<double>& t,
                                 const std::vector<double>& cos_theta, double omega_rot) {
    if (t.size() != cos_theta.size() || t.size() < 3)
        throw InsufficientData("sinusoid fit needs at least 3 matched samples");
    Eigen::MatrixXd X(t.size(), 3);
    Eigen::VectorXd y(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        X(static_cast<Eigen::Index>(i), 0) = 1.0;
        X(static_cast<Eigen::Index>(i), 1) = std::cos(omega_rot * t[i]);
        X(static_cast<Eigen::Index>(i), 2) = std::sin(omega_rot * t[i]);
        y(static_cast<Eigen::Index>(i)) = cos_theta[i];
    }
    const Eigen::Vector3d beta =
        X.colPivHouseholderQr().solve(y);
    ThetaSinusoid out;
    out.a = beta(0);
    out.b = std::hypot(beta(1), beta(2));
    out.phi = std::atan2(-beta(2), beta(1));
    return out;
}

std::vector<double> odmr_spectrum_static(const Orientation& orientation,
                                         const Eigen::Vector3d& b_lab, const NvModel& model,
                                         const std::vector<double>& freq_grid_hz) {
    validate_nv(model);
    std::array<TransitionPair, 4> lines;
    for (int i = 0; i < 4; ++i) {
        const Eigen::Vector3d axis_lab =
            orientation.quaternion() * model.axes0[static_cast<std::size_t>(i)];
        lines[static_cast<std::size_t>(i)] =
            transition_frequencies(b_lab, axis_lab, model);
    }
    const double inv_two_sigma_sq =
        1.0 / (2.0 * model.linewidth_sigma_hz * model.linewidth_sigma_hz);
    std::vector<double> pl;
    pl.reserve(freq_grid_hz.size());
    for (double f : freq_grid_hz) {
        double dip = 0.0;
        for (const auto& pair : lines) {
            const double dm = f - pair.f_minus;
            const double dp = f - pair.f_plus;
            dip += std::exp(-dm * dm * inv_two_sigma_sq);
            dip += std::exp(-dp * dp * inv_two_sigma_sq);
        }
        pl.push_back(std::max(0.0, 1.0 - model.contrast * dip));
    }
    return pl;
}

std::vector<double> odmr_continuous_rotating(const RotationModel& rot,
                                             const Eigen::Vector3d& b_lab,
                                             const NvModel& model,
                                             const std::vector<double>& freq_grid_hz,
                                             std::size_t n_samples) {
    if (n_samples < 256) n_samples = 256;
    const double period = rot.rotation_period();
    std::vector<double> acc(freq_grid_hz.size(), 0.0);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const double t = period * static_cast<double>(k) / static_cast<double>(n_samples);
        const std::vector<double> pl =
            odmr_spectrum_static(rot.orientation_at(t), b_lab, model, freq_grid_hz);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += pl[i];
    }
    for (double& v : acc) v /= static_cast<double>(n_samples);
    return acc;
}

StroboMap strobe_map(const RotationModel& rot, const Eigen::Vector3d& b_lab,
                     const NvModel& model, const std::vector<double>& delays_s,
                     const std::vector<double>& freq_grid_hz, double tau_s,
                     const std::string& field_label) {
    const double period = rot.rotation_period();
    if (!(tau_s >= 0.0) || tau_s > 0.01 * period)
        throw PulseTooLong("strobe pulse must satisfy tau <= 0.01 T_rot");
    StroboMap map;
    map.delays_s = delays_s;
    map.freq_hz = freq_grid_hz;
    map.tau_s = tau_s;
    map.field_label = field_label;
    map.b_lab = b_lab;
    map.pl.reserve(delays_s.size());
    for (double dt : delays_s)
        map.pl.push_back(
            odmr_spectrum_static(rot.orientation_at(dt), b_lab, model, freq_grid_hz));
    return map;
}

void write_strobe_map(const StroboMap& map, const std::string& csv_path,
                      const std::string& sidecar_path,
                      const std::vector<std::pair<std::string, std::string>>& extra) {
    std::vector<std::string> header;
    header.reserve(map.freq_hz.size() + 1);
    header.emplace_back("delta_t_s");
    for (double f : map.freq_hz) header.push_back(format_double(f));
    CsvWriter csv(header);
    for (std::size_t r = 0; r < map.delays_s.size(); ++r) {
        std::vector<double> row;
        row.reserve(map.freq_hz.size() + 1);
        row.push_back(map.delays_s[r]);
        row.insert(row.end(), map.pl[r].begin(), map.pl[r].end());
        csv.add_row(row);
    }
    csv.write_file(csv_path);

    std::string side;
    side += "field_label = " + (map.field_label.empty() ? "unnamed" : map.field_label) + "\n";
    side += "b_x_t = " + format_double(map.b_lab.x()) + "\n";
    side += "b_y_t = " + format_double(map.b_lab.y()) + "\n";
    side += "b_z_t = " + format_double(map.b_lab.z()) + "\n";
    side += "tau_s = " + format_double(map.tau_s) + "\n";
    for (const auto& [k, v] : extra) side += k + " = " + v + "\n";
    write_text_file(sidecar_path, side);
}

StroboMap read_strobe_map(const std::string& csv_path, const std::string& sidecar_path) {
    const CsvTable table = read_csv(csv_path);
    if (table.header.size() < 2 || table.header[0] != "delta_t_s")
        throw ConfigError(csv_path + ": not a strobe map (expected delta_t_s header)");
    StroboMap map;
    map.freq_hz.reserve(table.header.size() - 1);
    for (std::size_t c = 1; c < table.header.size(); ++c)
        map.freq_hz.push_back(std::stod(table.header[c]));
    for (const auto& row : table.rows) {
        map.delays_s.push_back(std::stod(row[0]));
        std::vector<double> pl;
        pl.reserve(row.size() - 1);
        for (std::size_t c = 1; c < row.size(); ++c) pl.push_back(std::stod(row[c]));
        map.pl.push_back(std::move(pl));
    }
    const Config side = Config::parse_file(sidecar_path);
    map.field_label = side.get_string("field_label", "");
    map.b_lab = Eigen::Vector3d(side.get_double("b_x_t"), side.get_double("b_y_t"),
                                side.get_double("b_z_t"));
    map.tau_s = side.get_double("tau_s", 0.0);
    return map;
}

} // namespace rotortrap
