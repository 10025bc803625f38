#include "rotortrap/signal.hpp"

#include "rotortrap/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace rotortrap {

std::vector<double> detection_signal(const Trajectory3D& traj, const Eigen::Vector3d& axis,
                                     double asymmetry) {
    if (std::abs(axis.norm() - 1.0) > 1e-9)
        throw ConstraintViolation("detection axis must be a unit vector");
    std::vector<double> s;
    s.reserve(traj.size());
    for (const auto& q : traj.q) {
        const Eigen::Vector3d n3 = q * Eigen::Vector3d::UnitZ();
        const double p = axis.dot(n3);
        s.push_back(p * p + asymmetry * p);
    }
    return s;
}

namespace {

// FFTW plan creation is not thread-safe; executions of distinct plans are.
std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

Psd psd(const std::vector<double>& series, double sample_rate_hz,
        std::size_t segment_length, double overlap) {
    const std::size_t n = series.size();
    const std::size_t seg = segment_length;
    if (seg < 8) throw InsufficientData("psd segment length must be at least 8");
    if (seg > n) throw InsufficientData("psd segment length exceeds series length");
    if (!(sample_rate_hz > 0.0)) throw ConstraintViolation("sample rate must be positive");
    if (!(overlap >= 0.0) || !(overlap < 1.0))
        throw ConstraintViolation("overlap fraction must be in [0, 1)");

    std::size_t hop = static_cast<std::size_t>(std::lround(seg * (1.0 - overlap)));
    if (hop == 0) hop = 1;

    // Periodic Hann window.
    std::vector<double> window(seg);
    double win_sum = 0.0, win_sq_sum = 0.0;
    for (std::size_t i = 0; i < seg; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * constants::pi * static_cast<double>(i) /
                                          static_cast<double>(seg)));
        win_sum += window[i];
        win_sq_sum += window[i] * window[i];
    }

    const std::size_t n_bins = seg / 2 + 1;
    std::vector<double> in(seg);
    std::vector<fftw_complex> out(n_bins);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(seg), in.data(), out.data(),
                                    FFTW_ESTIMATE);
    }
    if (!plan) throw NumericalError("fftw plan creation failed");

    std::vector<double> acc(n_bins, 0.0);
    std::size_t n_segments = 0;
    for (std::size_t start = 0; start + seg <= n; start += hop) {
        double mean = 0.0;
        for (std::size_t i = 0; i < seg; ++i) mean += series[start + i];
        mean /= static_cast<double>(seg);
        for (std::size_t i = 0; i < seg; ++i)
            in[i] = (series[start + i] - mean) * window[i];
        fftw_execute(plan);
        for (std::size_t k = 0; k < n_bins; ++k)
            acc[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
        ++n_segments;
    }
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }
    if (n_segments == 0) throw InsufficientData("no complete psd segment");

    Psd result;
    result.sample_rate_hz = sample_rate_hz;
    result.rbw_hz = sample_rate_hz * win_sq_sum / (win_sum * win_sum);
    result.freq_hz.resize(n_bins);
    result.power.resize(n_bins);
    const double norm = 1.0 / (sample_rate_hz * win_sq_sum * static_cast<double>(n_segments));
    for (std::size_t k = 0; k < n_bins; ++k) {
        result.freq_hz[k] =
            static_cast<double>(k) * sample_rate_hz / static_cast<double>(seg);
        const bool interior = k != 0 && !(seg % 2 == 0 && k == n_bins - 1);
        result.power[k] = (interior ? 2.0 : 1.0) * acc[k] * norm;
    }
    return result;
}

PsdClassification classify_psd(const Psd& spectrum, double omega_d, double threshold_db,
                               double dynamic_range_db) {
    if (spectrum.freq_hz.size() < 8) throw InsufficientData("psd too short to classify");
    if (!(omega_d > 0.0)) throw ConstraintViolation("omega_d must be positive");
    const double f_drive = omega_d / (2.0 * constants::pi);
    if (!(spectrum.rbw_hz < f_drive / 20.0))
        throw ConstraintViolation(
            "psd resolution bandwidth must be finer than the drive frequency / 20");

    const std::size_t n = spectrum.power.size();
    auto to_db = [](double p) { return 10.0 * std::log10(std::max(p, 1e-300)); };

    // Median floor over the non-DC bins.
    std::vector<double> db(n);
    for (std::size_t i = 0; i < n; ++i) db[i] = to_db(spectrum.power[i]);
    std::vector<double> sorted(db.begin() + 1, db.end());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median_db = sorted[sorted.size() / 2];
    const double max_db = *std::max_element(db.begin() + 1, db.end());
    const double floor_db = std::max(median_db + threshold_db, max_db - dynamic_range_db);

    PsdClassification out;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (spectrum.power[i] <= spectrum.power[i - 1] ||
            spectrum.power[i] < spectrum.power[i + 1])
            continue;
        if (db[i] < floor_db) continue;
        out.peaks.push_back(PsdPeak{spectrum.freq_hz[i], spectrum.power[i], db[i]});
    }
    std::sort(out.peaks.begin(), out.peaks.end(),
              [](const PsdPeak& a, const PsdPeak& b) {
                  if (a.power != b.power) return a.power > b.power;
                  return a.freq_hz < b.freq_hz;
              });
    const double f_half = 0.5 * f_drive;
    for (const auto& p : out.peaks)
        if (std::abs(p.freq_hz - f_half) <= spectrum.rbw_hz) {
            out.has_half_harmonic = true;
            break;
        }
    return out;
}

} // namespace rotortrap
