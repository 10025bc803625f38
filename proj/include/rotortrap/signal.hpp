#pragma once

// Synthetic detection signal from an orientation trajectory, Welch PSD
// estimation, and spectral-peak classification of the rotational regimes.

#include "rotortrap/rotor3d.hpp"

#include <cstddef>
#include <vector>

namespace rotortrap {

// Light-detection model: s(t) = (axis . n3(t))^2 + asymmetry * (axis . n3(t)),
// where n3 is the particle's long (body z) axis in the lab frame.  The
// default asymmetry = 0 keeps the shadow symmetry n3 -> -n3 exact; a nonzero
// value models end-asymmetric particles whose two ends scatter differently.
std::vector<double> detection_signal(const Trajectory3D& traj,
                                     const Eigen::Vector3d& axis,
                                     double asymmetry = 0.0);

struct Psd {
    std::vector<double> freq_hz; // strictly increasing, one-sided
    std::vector<double> power;   // signal^2 / Hz
    double rbw_hz = 0.0;         // resolution bandwidth (window ENBW)
    double sample_rate_hz = 0.0;
};

// Welch averaged periodogram: periodic Hann window, per-segment mean removal,
// one-sided normalization such that sum(power) * df matches the time-domain
// variance (Parseval within 1%).  overlap is the segment overlap fraction.
Psd psd(const std::vector<double>& series, double sample_rate_hz,
        std::size_t segment_length, double overlap = 0.5);

struct PsdPeak {
    double freq_hz = 0.0;
    double power = 0.0;
    double power_db = 0.0;
};

struct PsdClassification {
    bool has_half_harmonic = false; // peak within one rbw of (Omega_d/2)/2pi
    std::vector<PsdPeak> peaks;     // sorted by descending power
};

// Detects local maxima exceeding the median floor by threshold_db (ignoring
// anything more than dynamic_range_db below the strongest bin) and reports
// whether one of them sits at half the drive frequency.  Requires the PSD
// resolution to be finer than (Omega_d/2pi)/20.
PsdClassification classify_psd(const Psd& spectrum, double omega_d,
                               double threshold_db = 10.0,
                               double dynamic_range_db = 80.0);

} // namespace rotortrap
