#pragma once

// Inverse problem: extract resonance-line traces from stroboscopic ODMR maps
// and fit a single-axis rotation model jointly to two maps taken with
// non-parallel magnetic fields.

#include "rotortrap/nvspin.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace rotortrap {

struct ResonanceLine {
    double center_hz = 0.0;
    double sigma_hz = 0.0; // 1-sigma center uncertainty, > 0
};

struct ResonanceTraces {
    std::vector<double> delays_s;
    std::vector<std::vector<ResonanceLine>> lines; // per delay, sorted by center
    std::vector<bool> too_few;                     // column had < n_lines dips

    bool empty() const { return delays_s.empty(); }
};

// Per delay column, detects up to n_lines local PL minima whose dip depth
// exceeds the prominence threshold (0 -> auto: a quarter of the deepest dip in
// the map) and refines each center by a local Gaussian least-squares fit.
// Columns with fewer than n_lines dips are flagged, not fatal.
ResonanceTraces extract_resonances(const StroboMap& map, std::size_t n_lines,
                                   double prominence = 0.0);

struct ClassAssignment {
    std::size_t n_tracks = 0;
    // track_of_line[column][line index] = track id (-1 when unmatched).
    std::vector<std::vector<int>> track_of_line;
    bool ambiguous = false;                      // some crossing was within noise
    std::vector<std::size_t> ambiguous_columns;
};

// Associates lines across adjacent delay columns by continuity (best
// assignment over permutations per transition).  Crossings decided within the
// joint center uncertainty are flagged ambiguous; the rotation fit re-matches
// tracks to NV classes per start, so every hypothesis is explored there.
ClassAssignment class_assignment(const ResonanceTraces& traces);

struct FitResult {
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ(); // unit
    double axis_theta = 0.0;  // polar angle of axis (rad)
    double axis_phi = 0.0;    // azimuth of axis (rad)
    Orientation orientation0; // at the canonical phase reference
    double phase = 0.0;       // rad
    double residual_rms_hz = 0.0;
    Eigen::Matrix<double, 6, 6> covariance = Eigen::Matrix<double, 6, 6>::Zero();
    int null_modes = 0;       // near-null directions of the final Jacobian
    bool converged = false;
    int iterations = 0;       // of the winning start
    int best_start = -1;
    // Winning line interpretation: class_of_line[dataset][column][line] is the
    // NV axis class (0..3) each measured line was matched to at the solution;
    // branch_of_dataset[dataset] is -1 (lower) or +1 (upper transition).
    std::vector<std::vector<std::vector<int>>> class_of_line;
    std::vector<int> branch_of_dataset;
};

struct FitSettings {
    int n_starts = 32;       // deterministic multi-start grid
    int max_iterations = 200;
    int screen_iterations = 40; // phase-one budget before the best starts continue
    std::size_t jobs = 0;
};

// Least-squares fit of (axis, initial orientation, phase) such that the model
// transition frequencies reproduce the measured line centers in both datasets
// (weights 1/sigma^2).  Each delay column's lines are matched injectively to
// the four axis classes (single transition branch per dataset, inferred from
// the median line center); the matching is re-derived as the parameters move,
// so trace crossings need not be resolved in advance.  traces2 may be empty
// (single-field fit); then one extra unconstrained mode -- rotation of the
// solution about the field -- is expected and reported via null_modes.
// Throws DegenerateGeometry when both fields are used but are within 10
// degrees of parallel, and NonConvergence when no start reaches a stationary
// point.
FitResult fit_rotation(const ResonanceTraces& traces1, const Eigen::Vector3d& b1,
                       const ResonanceTraces& traces2, const Eigen::Vector3d& b2,
                       const NvModel& model, double omega_rot,
                       const FitSettings& settings = {});

} // namespace rotortrap
