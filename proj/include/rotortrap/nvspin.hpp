#pragma once

// Spin-1 model of an NV- ensemble in a rotating diamond: ground-state
// Hamiltonians of the four [111] axis classes, magnetic-resonance transition
// frequencies, the cone-angle sinusoid of each class under rotation,
// continuous ODMR of a rotating host, and stroboscopic ODMR map synthesis.

#include "rotortrap/rotor3d.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace rotortrap {

struct NvModel {
    double d_splitting_hz = constants::nv_zero_field_splitting_hz;
    double gamma_e_hz_per_t = constants::nv_gamma_e_hz_per_t;
    std::array<Eigen::Vector3d, 4> axes0{}; // class axes in the body frame
    double linewidth_sigma_hz = 6.5e6 * constants::fwhm_to_sigma;
    double contrast = 0.02; // PL dip depth per class per transition

    // The four [111]-family directions (1,1,1), (1,-1,-1), (-1,1,-1),
    // (-1,-1,1), normalized.
    static NvModel standard();
};

// Unit axes, pairwise angles arccos(1/3) or its supplement, contrast in (0,1).
void validate_nv(const NvModel& model);

struct TransitionPair {
    double f_minus = 0.0; // Hz, lower 0 -> (-1)-character transition
    double f_plus = 0.0;  // Hz, upper 0 -> (+1)-character transition
};

// Exact eigenstructure of H = D Sz^2 + gamma_e (B_par Sz + B_perp Sx) in the
// class frame; returns the two transitions out of the 0-character state,
// sorted f_minus <= f_plus.  Requires |B| < 0.3 T.
TransitionPair transition_frequencies(const Eigen::Vector3d& b_lab,
                                      const Eigen::Vector3d& axis, const NvModel& model);

struct RotationModel {
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ(); // lab frame, unit
    double omega_rot = 0.0;                          // rad/s (locked: Omega_d/2)
    Orientation orientation0;                        // body -> lab at t = 0
    double phase = 0.0;                              // rad, added to omega_rot * t

    // orientation(t) = AxisRotation(axis, omega_rot t + phase) * orientation0.
    Orientation orientation_at(double t) const;
    double rotation_period() const; // 2 pi / omega_rot
};

// Angle between rotated class axis and the field direction at time t.
double theta_angle(const RotationModel& rot, int class_index,
                   const Eigen::Vector3d& b_dir, double t, const NvModel& model);

struct ThetaSinusoid {
    double a = 0.0;   // offset
    double b = 0.0;   // amplitude, >= 0
    double phi = 0.0; // rad
};

// Linear least squares of cos(theta) samples against
// {1, cos(omega_rot t), sin(omega_rot t)}: cos(theta) = a + b cos(w t + phi).
ThetaSinusoid fit_theta_sinusoid(const std::vector<double>& t,
                                 const std::vector<double>& cos_theta, double omega_rot);

// PL(f) = 1 - sum over 4 classes x 2 transitions of
// contrast * exp(-(f - f_t)^2 / (2 sigma^2)), clamped at 0.
std::vector<double> odmr_spectrum_static(const Orientation& orientation,
                                         const Eigen::Vector3d& b_lab, const NvModel& model,
                                         const std::vector<double>& freq_grid_hz);

// Time average of the static spectrum over one rotation period (uniform
// quadrature with at least 256 samples).
std::vector<double> odmr_continuous_rotating(const RotationModel& rot,
                                             const Eigen::Vector3d& b_lab,
                                             const NvModel& model,
                                             const std::vector<double>& freq_grid_hz,
                                             std::size_t n_samples = 256);

struct StroboMap {
    std::vector<double> delays_s;        // in [0, T_rot]
    std::vector<double> freq_hz;
    std::vector<std::vector<double>> pl; // [delay][freq], normalized
    double tau_s = 0.0;                  // pulse duration (recorded only)
    std::string field_label;
    Eigen::Vector3d b_lab = Eigen::Vector3d::Zero();
};

// One static spectrum per stroboscopic delay, at orientation(delay).  The
// pulse duration tau must satisfy tau <= 0.01 T_rot (else PulseTooLong).
StroboMap strobe_map(const RotationModel& rot, const Eigen::Vector3d& b_lab,
                     const NvModel& model, const std::vector<double>& delays_s,
                     const std::vector<double>& freq_grid_hz, double tau_s,
                     const std::string& field_label = "");

// CSV layout: header "delta_t_s, <f0>, <f1>, ..."; one row per delay.  The
// sidecar is a key = value file recording the field vector and pulse
// duration; extra entries (model constants, seed) are appended verbatim.
void write_strobe_map(const StroboMap& map, const std::string& csv_path,
                      const std::string& sidecar_path,
                      const std::vector<std::pair<std::string, std::string>>& extra = {});
StroboMap read_strobe_map(const std::string& csv_path, const std::string& sidecar_path);

} // namespace rotortrap
