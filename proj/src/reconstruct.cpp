#include "rotortrap/reconstruct.hpp"

#include "rotortrap/errors.hpp"
#include "rotortrap/parallel.hpp"
#include "rotortrap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rotortrap {

namespace {

// ---------------------------------------------------------------- extraction

struct ColumnFit {
    std::vector<double> center;       // per dip
    std::vector<double> sigma_center; // per dip, statistical only
    std::vector<double> width;        // per dip, fitted Gaussian sigma
    bool ok = false;
};

// Joint least-squares fit of p(f) = b - sum_k A_k exp(-(f-c_k)^2 / (2 s_k^2))
// over a whole column.  Fitting all dips together keeps overlapping lines
// from biasing each other's centers.
ColumnFit fit_column_dips(const std::vector<double>& f, const std::vector<double>& p,
                          const std::vector<double>& c0, const std::vector<double>& a0,
                          const std::vector<double>& s0) {
    ColumnFit out;
    const std::size_t m = f.size();
    const std::size_t nd = c0.size();
    const std::size_t np = 1 + 3 * nd; // b, then (A_k, c_k, s_k)
    if (m < np + 2) return out;

    Eigen::VectorXd x(np);
    x(0) = 1.0;
    for (std::size_t k = 0; k < nd; ++k) {
        x(1 + 3 * k) = a0[k];
        x(2 + 3 * k) = c0[k];
        x(3 + 3 * k) = s0[k];
    }

    auto residuals = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r) {
        for (std::size_t i = 0; i < m; ++i) {
            double model = v(0);
            for (std::size_t k = 0; k < nd; ++k) {
                const double d = f[i] - v(2 + 3 * k);
                const double s = v(3 + 3 * k);
                model -= v(1 + 3 * k) * std::exp(-d * d / (2.0 * s * s));
            }
            r(static_cast<Eigen::Index>(i)) = p[i] - model;
        }
    };
    auto jacobian = [&](const Eigen::VectorXd& v, Eigen::MatrixXd& J) {
        for (std::size_t i = 0; i < m; ++i) {
            J(static_cast<Eigen::Index>(i), 0) = -1.0;
            for (std::size_t k = 0; k < nd; ++k) {
                const double d = f[i] - v(2 + 3 * k);
                const double s = v(3 + 3 * k);
                const double e = std::exp(-d * d / (2.0 * s * s));
                J(static_cast<Eigen::Index>(i), 1 + 3 * static_cast<Eigen::Index>(k)) = e;
                J(static_cast<Eigen::Index>(i), 2 + 3 * static_cast<Eigen::Index>(k)) =
                    v(1 + 3 * k) * e * d / (s * s);
                J(static_cast<Eigen::Index>(i), 3 + 3 * static_cast<Eigen::Index>(k)) =
                    v(1 + 3 * k) * e * d * d / (s * s * s);
            }
        }
    };

    Eigen::VectorXd r(m), r_try(m);
    Eigen::MatrixXd J(m, np);
    residuals(x, r);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    for (int iter = 0; iter < 100; ++iter) {
        jacobian(x, J);
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        bool stepped = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd M = JtJ;
            for (std::size_t k = 0; k < np; ++k)
                M(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) +=
                    lambda * std::max(JtJ(static_cast<Eigen::Index>(k),
                                          static_cast<Eigen::Index>(k)),
                                      1e-30);
            const Eigen::VectorXd step = M.ldlt().solve(g);
            const Eigen::VectorXd x_try = x - step;
            bool feasible = true;
            for (std::size_t k = 0; k < nd; ++k)
                feasible = feasible && x_try(1 + 3 * k) > 0.0 && x_try(3 + 3 * k) > 0.0;
            if (!feasible) {
                lambda *= 10.0;
                continue;
            }
            residuals(x_try, r_try);
            const double cost_try = r_try.squaredNorm();
            if (cost_try < cost) {
                const double rel = (cost - cost_try) / std::max(cost, 1e-300);
                x = x_try;
                r = r_try;
                cost = cost_try;
                lambda = std::max(lambda * 0.3, 1e-14);
                stepped = true;
                if (rel < 1e-14) iter = 100; // converged
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) break;
    }

    for (std::size_t k = 0; k < nd; ++k)
        if (!std::isfinite(x(2 + 3 * k)) || !(x(3 + 3 * k) > 0.0)) return out;

    // Statistical center uncertainties from the local quadratic model.
    const double dof = static_cast<double>(m) - static_cast<double>(np);
    const double sigma_n_sq = dof > 0.0 ? cost / dof : 0.0;
    jacobian(x, J);
    const Eigen::MatrixXd cov =
        (J.transpose() * J).completeOrthogonalDecomposition().pseudoInverse();
    out.center.resize(nd);
    out.sigma_center.resize(nd);
    out.width.resize(nd);
    for (std::size_t k = 0; k < nd; ++k) {
        out.center[k] = x(2 + 3 * k);
        const double var = cov(2 + 3 * static_cast<Eigen::Index>(k),
                               2 + 3 * static_cast<Eigen::Index>(k)) *
                           sigma_n_sq;
        out.sigma_center[k] = std::sqrt(std::max(var, 0.0));
        out.width[k] = x(3 + 3 * k);
    }
    out.ok = true;
    return out;
}

// ------------------------------------------------------------------ matching

// Minimum-cost assignment of current-column lines to tracks (brute force over
// permutations; at most 4 tracks).  Returns (assignment, best cost, runner-up).
struct MatchResult {
    std::vector<int> track_of_line; // per line
    double best_cost = 0.0;
    double second_cost = std::numeric_limits<double>::infinity();
};

MatchResult match_to_tracks(const std::vector<double>& track_centers,
                            const std::vector<ResonanceLine>& lines) {
    const std::size_t n_tracks = track_centers.size();
    const std::size_t n_used = std::min(lines.size(), n_tracks);
    std::vector<int> perm(n_tracks);
    std::iota(perm.begin(), perm.end(), 0);
    MatchResult out;
    out.best_cost = std::numeric_limits<double>::infinity();
    std::vector<int> cur;
    do {
        // line i (sorted) goes to track perm[i]; extra tracks stay unmatched.
        // Different permutations with the same line -> track prefix describe
        // the same assignment and must not register as a distinct runner-up.
        cur.assign(perm.begin(), perm.begin() + static_cast<long>(n_used));
        double cost = 0.0;
        for (std::size_t i = 0; i < n_used; ++i)
            cost += std::abs(lines[i].center_hz -
                             track_centers[static_cast<std::size_t>(perm[i])]);
        if (cost < out.best_cost) {
            out.second_cost = out.best_cost;
            out.best_cost = cost;
            out.track_of_line = cur;
        } else if (cost < out.second_cost && cur != out.track_of_line) {
            out.second_cost = cost;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

// ----------------------------------------------------------------- fit model

Eigen::Vector3d spherical_axis(double theta, double phi) {
    return Eigen::Vector3d(std::sin(theta) * std::cos(phi),
                           std::sin(theta) * std::sin(phi), std::cos(theta));
}

Orientation orientation_from_rotvec(const Eigen::Vector3d& r) {
    const double angle = r.norm();
    if (angle < 1e-300) return Orientation();
    return Orientation::from_quaternion(
        Eigen::Quaterniond(Eigen::AngleAxisd(angle, r / angle)));
}

struct Dataset {
    const ResonanceTraces* traces = nullptr;
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    int branch = -1; // -1 -> f_minus, +1 -> f_plus, for every line in the set
    std::size_t n_residuals = 0;
};

// class_of_line[dataset][column][line] (injective per column).
using Matching = std::vector<std::vector<std::vector<int>>>;

struct FitProblem {
    std::vector<Dataset> data;
    const NvModel* model = nullptr;
    double omega_rot = 0.0;
    std::size_t n_residuals = 0;

    RotationModel rotation(const Eigen::Matrix<double, 6, 1>& x) const {
        RotationModel rot;
        rot.axis = spherical_axis(x(0), x(1));
        rot.omega_rot = omega_rot;
        rot.orientation0 = orientation_from_rotvec(Eigen::Vector3d(x(2), x(3), x(4)));
        rot.phase = x(5);
        return rot;
    }

    // Branch-selected predicted line center per (dataset, column, class).
    void predict(const Eigen::Matrix<double, 6, 1>& x,
                 std::vector<std::vector<std::array<double, 4>>>& out) const {
        const RotationModel rot = rotation(x);
        out.resize(data.size());
        for (std::size_t d = 0; d < data.size(); ++d) {
            const auto& ds = data[d];
            out[d].resize(ds.traces->delays_s.size());
            for (std::size_t c = 0; c < ds.traces->delays_s.size(); ++c) {
                const Orientation o = rot.orientation_at(ds.traces->delays_s[c]);
                for (int cls = 0; cls < 4; ++cls) {
                    const Eigen::Vector3d axis_lab =
                        o.quaternion() * model->axes0[static_cast<std::size_t>(cls)];
                    const TransitionPair pair =
                        transition_frequencies(ds.b, axis_lab, *model);
                    out[d][c][static_cast<std::size_t>(cls)] =
                        ds.branch < 0 ? pair.f_minus : pair.f_plus;
                }
            }
        }
    }

    // Weighted residual vector under a frozen line -> class matching.
    void residuals(const Eigen::Matrix<double, 6, 1>& x, const Matching& matching,
                   Eigen::VectorXd& r) const {
        std::vector<std::vector<std::array<double, 4>>> pred;
        predict(x, pred);
        Eigen::Index k = 0;
        for (std::size_t d = 0; d < data.size(); ++d) {
            const auto& ds = data[d];
            for (std::size_t c = 0; c < ds.traces->lines.size(); ++c)
                for (std::size_t l = 0; l < ds.traces->lines[c].size(); ++l) {
                    const int cls = matching[d][c][l];
                    const auto& line = ds.traces->lines[c][l];
                    r(k++) = (line.center_hz -
                              pred[d][c][static_cast<std::size_t>(cls)]) /
                             line.sigma_hz;
                }
        }
    }

    // Minimum-cost injective matching of each column's lines to the four
    // classes at the current parameters (brute force, at most 4! per column).
    Matching best_matching(const Eigen::Matrix<double, 6, 1>& x) const {
        std::vector<std::vector<std::array<double, 4>>> pred;
        predict(x, pred);
        Matching matching(data.size());
        for (std::size_t d = 0; d < data.size(); ++d) {
            const auto& ds = data[d];
            matching[d].resize(ds.traces->lines.size());
            for (std::size_t c = 0; c < ds.traces->lines.size(); ++c) {
                const auto& lines = ds.traces->lines[c];
                const std::size_t n = lines.size();
                if (n == 0) continue;
                std::array<int, 4> perm{0, 1, 2, 3};
                double best = std::numeric_limits<double>::infinity();
                std::vector<int> best_prefix(n, 0);
                do {
                    double cost = 0.0;
                    for (std::size_t l = 0; l < n; ++l) {
                        const double w =
                            (lines[l].center_hz -
                             pred[d][c][static_cast<std::size_t>(perm[l])]) /
                            lines[l].sigma_hz;
                        cost += w * w;
                    }
                    if (cost < best) {
                        best = cost;
                        best_prefix.assign(perm.begin(),
                                           perm.begin() + static_cast<long>(n));
                    }
                } while (std::next_permutation(perm.begin(), perm.end()));
                matching[d][c] = std::move(best_prefix);
            }
        }
        return matching;
    }
};

struct StartResult {
    double cost = std::numeric_limits<double>::infinity();
    Eigen::Matrix<double, 6, 1> x = Eigen::Matrix<double, 6, 1>::Zero();
    Matching matching;
    bool converged = false;
    int iterations = 0;
};

// Levenberg-Marquardt descent with the line -> class matching refreshed after
// every accepted step (re-matching at fixed parameters never increases the
// cost, so descent stays monotone).
StartResult run_start(const FitProblem& prob, Eigen::Matrix<double, 6, 1> x,
                      int max_iterations) {
    StartResult res;
    const Eigen::Index m = static_cast<Eigen::Index>(prob.n_residuals);
    Eigen::VectorXd r(m), r_try(m);
    Eigen::MatrixXd J(m, 6);

    Matching matching = prob.best_matching(x);
    prob.residuals(x, matching, r);
    double cost = r.squaredNorm();
    double lambda = 1e-3;

    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        // Central-difference Jacobian of the weighted residuals.
        for (int p = 0; p < 6; ++p) {
            const double h = 1e-6;
            Eigen::Matrix<double, 6, 1> xp = x, xm = x;
            xp(p) += h;
            xm(p) -= h;
            Eigen::VectorXd rp(m), rm(m);
            prob.residuals(xp, matching, rp);
            prob.residuals(xm, matching, rm);
            J.col(p) = (rp - rm) / (2.0 * h);
        }
        const Eigen::Matrix<double, 6, 6> JtJ = J.transpose() * J;
        const Eigen::Matrix<double, 6, 1> g = J.transpose() * r;
        if (g.norm() < 1e-10 * std::max(1.0, cost)) {
            res.converged = true;
            break;
        }
        bool stepped = false;
        bool small_step = false;
        for (int tries = 0; tries < 15; ++tries) {
            Eigen::Matrix<double, 6, 6> M = JtJ;
            for (int k = 0; k < 6; ++k) M(k, k) += lambda * std::max(JtJ(k, k), 1e-12);
            const Eigen::Matrix<double, 6, 1> step = M.ldlt().solve(g);
            const Eigen::Matrix<double, 6, 1> x_try = x - step;
            prob.residuals(x_try, matching, r_try);
            const double cost_try = r_try.squaredNorm();
            if (cost_try < cost) {
                const double rel = (cost - cost_try) / std::max(cost, 1e-300);
                x = x_try;
                r = r_try;
                cost = cost_try;
                lambda = std::max(lambda * 0.3, 1e-14);
                stepped = true;
                small_step = rel < 1e-12 || step.norm() < 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            res.converged = true; // no descent direction left at this damping
            break;
        }
        Matching rematched = prob.best_matching(x);
        if (rematched != matching) {
            matching = std::move(rematched);
            prob.residuals(x, matching, r);
            cost = r.squaredNorm();
        } else if (small_step) {
            res.converged = true;
            ++iter;
            break;
        }
    }
    res.iterations = iter;
    res.cost = cost;
    res.x = x;
    res.matching = std::move(matching);
    return res;
}

} // namespace

ResonanceTraces extract_resonances(const StroboMap& map, std::size_t n_lines,
                                   double prominence) {
    if (n_lines < 1) throw ConstraintViolation("n_lines must be at least 1");
    if (map.freq_hz.size() < 8) throw InsufficientData("strobe map frequency grid too small");
    const std::size_t nf = map.freq_hz.size();

    if (prominence <= 0.0) {
        double deepest = 0.0;
        for (const auto& col : map.pl)
            for (double p : col) deepest = std::max(deepest, 1.0 - p);
        prominence = 0.25 * deepest;
        if (prominence <= 0.0)
            throw InsufficientData("strobe map contains no dips");
    }

    ResonanceTraces traces;
    traces.delays_s = map.delays_s;
    traces.lines.resize(map.delays_s.size());
    traces.too_few.assign(map.delays_s.size(), false);

    const double df = map.freq_hz[1] - map.freq_hz[0];
    // Fitted widths per line, aligned with traces.lines; NaN when the joint
    // fit fell back to the grid minimum.
    std::vector<std::vector<double>> widths(map.delays_s.size());

    for (std::size_t col = 0; col < map.pl.size(); ++col) {
        const std::vector<double>& p = map.pl[col];
        // Candidate minima by depth.
        std::vector<std::size_t> minima;
        for (std::size_t i = 1; i + 1 < nf; ++i) {
            if (p[i] < p[i - 1] && p[i] <= p[i + 1] && (1.0 - p[i]) >= prominence)
                minima.push_back(i);
        }
        std::sort(minima.begin(), minima.end(),
                  [&p](std::size_t a, std::size_t b) { return p[a] < p[b]; });
        if (minima.size() > n_lines) minima.resize(n_lines);
        std::sort(minima.begin(), minima.end());
        if (minima.empty()) {
            traces.too_few[col] = true;
            continue;
        }

        std::vector<double> c0, a0, s0;
        for (std::size_t idx : minima) {
            const double depth = 1.0 - p[idx];
            // Half width at half depth, in bins.
            std::size_t left = idx, right = idx;
            while (left > 0 && p[left] < 1.0 - 0.5 * depth) --left;
            while (right + 1 < nf && p[right] < 1.0 - 0.5 * depth) ++right;
            const std::size_t hwhm =
                std::max<std::size_t>(1, std::max(idx - left, right - idx));
            c0.push_back(map.freq_hz[idx]);
            a0.push_back(depth);
            s0.push_back(static_cast<double>(hwhm) * df / 1.17741);
        }
        const ColumnFit fit = fit_column_dips(map.freq_hz, p, c0, a0, s0);

        for (std::size_t k = 0; k < minima.size(); ++k) {
            ResonanceLine line;
            double width = std::numeric_limits<double>::quiet_NaN();
            if (fit.ok && fit.center[k] >= map.freq_hz.front() &&
                fit.center[k] <= map.freq_hz.back()) {
                line.center_hz = fit.center[k];
                line.sigma_hz = std::max(fit.sigma_center[k], 1.0);
                width = fit.width[k];
            } else {
                line.center_hz = map.freq_hz[minima[k]];
                line.sigma_hz = std::max(df, 1.0);
            }
            traces.lines[col].push_back(line);
            widths[col].push_back(width);
        }
        // Keep lines (and their widths) sorted by center frequency.
        std::vector<std::size_t> order(traces.lines[col].size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return traces.lines[col][a].center_hz < traces.lines[col][b].center_hz;
        });
        std::vector<ResonanceLine> sorted_lines;
        std::vector<double> sorted_widths;
        for (std::size_t i : order) {
            sorted_lines.push_back(traces.lines[col][i]);
            sorted_widths.push_back(widths[col][i]);
        }
        traces.lines[col] = std::move(sorted_lines);
        widths[col] = std::move(sorted_widths);
        if (traces.lines[col].size() < n_lines) traces.too_few[col] = true;
    }

    // An unresolved pair of overlapping dips fits as a single Gaussian whose
    // width exceeds the instrument linewidth; the excess width is then the
    // scale of the center ambiguity.  Calibrate the linewidth as the median
    // fitted width across the map and widen sigma accordingly.
    std::vector<double> all_widths;
    for (const auto& col : widths)
        for (double w : col)
            if (std::isfinite(w)) all_widths.push_back(w);
    if (all_widths.size() >= 4) {
        std::nth_element(all_widths.begin(), all_widths.begin() + all_widths.size() / 2,
                         all_widths.end());
        const double w_med = all_widths[all_widths.size() / 2];
        for (std::size_t col = 0; col < traces.lines.size(); ++col) {
            for (std::size_t l = 0; l < traces.lines[col].size(); ++l) {
                const double w = widths[col][l];
                if (!std::isfinite(w)) continue;
                const double excess_sq = w * w - 1.1025 * w_med * w_med; // (1.05 w_med)^2
                if (excess_sq > 0.0)
                    traces.lines[col][l].sigma_hz = std::max(
                        traces.lines[col][l].sigma_hz, std::sqrt(excess_sq));
            }
        }
    }
    return traces;
}

ClassAssignment class_assignment(const ResonanceTraces& traces) {
    ClassAssignment out;
    out.track_of_line.resize(traces.lines.size());
    if (traces.lines.empty()) return out;

    // Anchor on the column with the most lines (first such column).
    std::size_t anchor = 0;
    for (std::size_t c = 1; c < traces.lines.size(); ++c)
        if (traces.lines[c].size() > traces.lines[anchor].size()) anchor = c;
    out.n_tracks = traces.lines[anchor].size();
    if (out.n_tracks == 0) return out;
    if (out.n_tracks > 4)
        throw ConstraintViolation(
            "at most 4 resonance tracks are supported; restrict the frequency grid "
            "to a single transition branch");

    std::vector<double> track_centers(out.n_tracks);
    for (std::size_t t = 0; t < out.n_tracks; ++t)
        track_centers[t] = traces.lines[anchor][t].center_hz;

    auto process = [&](std::size_t col) {
        const auto& lines = traces.lines[col];
        MatchResult match = match_to_tracks(track_centers, lines);
        out.track_of_line[col].assign(lines.size(), -1);
        double joint_sigma = 0.0;
        for (std::size_t l = 0; l < lines.size(); ++l) {
            if (l < match.track_of_line.size())
                out.track_of_line[col][l] = match.track_of_line[l];
            joint_sigma += lines[l].sigma_hz;
        }
        if (std::isfinite(match.second_cost) &&
            match.second_cost - match.best_cost < joint_sigma) {
            out.ambiguous = true;
            out.ambiguous_columns.push_back(col);
        }
        for (std::size_t l = 0; l < lines.size(); ++l)
            if (out.track_of_line[col][l] >= 0)
                track_centers[static_cast<std::size_t>(out.track_of_line[col][l])] =
                    lines[l].center_hz;
    };

    // Sweep outward from the anchor so continuity is respected on both sides.
    for (std::size_t c = anchor; c < traces.lines.size(); ++c) process(c);
    for (std::size_t t = 0; t < out.n_tracks; ++t)
        track_centers[t] = traces.lines[anchor][t].center_hz;
    for (std::size_t c = anchor; c-- > 0;) process(c);

    std::sort(out.ambiguous_columns.begin(), out.ambiguous_columns.end());
    return out;
}

FitResult fit_rotation(const ResonanceTraces& traces1, const Eigen::Vector3d& b1,
                       const ResonanceTraces& traces2, const Eigen::Vector3d& b2,
                       const NvModel& model, double omega_rot, const FitSettings& settings) {
    validate_nv(model);
    if (traces1.empty()) throw InsufficientData("first trace set is empty");
    if (!(omega_rot > 0.0)) throw ConstraintViolation("omega_rot must be positive");

    const bool two_fields = !traces2.empty();
    if (two_fields) {
        const double cosang = std::abs(b1.normalized().dot(b2.normalized()));
        if (cosang > std::cos(10.0 * constants::pi / 180.0))
            throw DegenerateGeometry(
                "fit fields must differ by more than 10 degrees "
                "(a single field leaves rotation about it unconstrained)");
    }

    FitProblem prob;
    prob.model = &model;
    prob.omega_rot = omega_rot;
    auto add_dataset = [&prob, &model](const ResonanceTraces& tr, const Eigen::Vector3d& b) {
        Dataset ds;
        ds.traces = &tr;
        ds.b = b;
        std::vector<double> centers;
        for (std::size_t c = 0; c < tr.lines.size(); ++c) {
            if (tr.lines[c].size() > 4)
                throw ConstraintViolation(
                    "a delay column holds more than 4 lines; restrict the frequency "
                    "window to a single transition branch");
            for (const auto& line : tr.lines[c]) {
                centers.push_back(line.center_hz);
                ++ds.n_residuals;
            }
        }
        if (!centers.empty()) {
            // Branch for the whole dataset: the median line center falls on
            // one side of the zero-field splitting for a single-branch window.
            std::nth_element(centers.begin(), centers.begin() + centers.size() / 2,
                             centers.end());
            ds.branch = centers[centers.size() / 2] > model.d_splitting_hz ? +1 : -1;
        }
        prob.n_residuals += ds.n_residuals;
        prob.data.push_back(std::move(ds));
    };
    add_dataset(traces1, b1);
    if (two_fields) add_dataset(traces2, b2);
    if (prob.n_residuals < 8)
        throw InsufficientData("too few resonance lines to constrain the rotation model");

    // Deterministic multi-starts: Fibonacci-sphere axes, hashed orientations.
    // All starts first run a short screening phase; the most promising eighth
    // continue to the full iteration budget.
    const int n_starts = std::max(settings.n_starts, 1);
    std::vector<StartResult> results(static_cast<std::size_t>(n_starts));
    const double golden = constants::pi * (3.0 - std::sqrt(5.0));
    const int screen_iters =
        std::clamp(settings.screen_iterations, 1, settings.max_iterations);
    parallel_for(static_cast<std::size_t>(n_starts), settings.jobs, [&](std::size_t k) {
        Eigen::Matrix<double, 6, 1> x0;
        const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) /
                                   static_cast<double>(n_starts);
        x0(0) = std::acos(std::clamp(z, -1.0, 1.0));
        x0(1) = std::fmod(static_cast<double>(k) * golden, 2.0 * constants::pi);
        SplitMix64 rng(0x9d2c5680cafe0000ull + k);
        Eigen::Vector3d dir(rng.next_normal(), rng.next_normal(), rng.next_normal());
        if (dir.norm() < 1e-12) dir = Eigen::Vector3d::UnitX();
        dir.normalize();
        const double angle = rng.next_uniform() * constants::pi;
        x0(2) = dir.x() * angle;
        x0(3) = dir.y() * angle;
        x0(4) = dir.z() * angle;
        x0(5) = rng.next_uniform() * 2.0 * constants::pi;
        results[k] = run_start(prob, x0, screen_iters);
    });

    std::vector<std::size_t> order(results.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&results](std::size_t a, std::size_t b) {
        if (results[a].cost != results[b].cost) return results[a].cost < results[b].cost;
        return a < b;
    });
    const std::size_t n_continue =
        std::max<std::size_t>(1, results.size() / 8);
    if (settings.max_iterations > screen_iters) {
        parallel_for(n_continue, settings.jobs, [&](std::size_t i) {
            const std::size_t k = order[i];
            const int used = results[k].iterations;
            StartResult cont =
                run_start(prob, results[k].x,
                          std::max(1, settings.max_iterations - used));
            cont.iterations += used;
            results[k] = std::move(cont);
        });
    }

    std::size_t best = 0;
    for (std::size_t k = 1; k < results.size(); ++k)
        if (results[k].cost < results[best].cost) best = k;
    const StartResult& win = results[best];
    if (!std::isfinite(win.cost))
        throw NonConvergence("all fit starts failed");
    bool any_converged = false;
    for (const auto& r : results) any_converged = any_converged || r.converged;
    if (!any_converged)
        throw NonConvergence("no fit start reached a stationary point");

    // ---- canonical gauge: phase referenced to the class-1 theta maximum ----
    RotationModel rot = prob.rotation(win.x);
    rot.axis.normalize();
    const Eigen::Vector3d b_dir = b1.normalized();
    const double period = rot.rotation_period();
    auto theta1 = [&](double dt) { return theta_angle(rot, 0, b_dir, dt, model); };
    const int n_grid = 4096;
    double best_dt = 0.0, best_theta = -1.0;
    for (int i = 0; i < n_grid; ++i) {
        const double dt = period * static_cast<double>(i) / n_grid;
        const double th = theta1(dt);
        if (th > best_theta + 1e-15) {
            best_theta = th;
            best_dt = dt;
        }
    }
    {
        // Golden-section refinement on the bracketing interval.
        const double step = period / n_grid;
        double a = best_dt - step, b = best_dt + step;
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        double c = b - gr * (b - a), d = a + gr * (b - a);
        for (int it = 0; it < 60; ++it) {
            if (theta1(c) > theta1(d)) b = d;
            else a = c;
            c = b - gr * (b - a);
            d = a + gr * (b - a);
        }
        best_dt = 0.5 * (a + b);
        if (best_dt < 0.0) best_dt += period;
    }

    FitResult out;
    out.axis = rot.axis;
    out.axis_theta = std::acos(std::clamp(rot.axis.z(), -1.0, 1.0));
    out.axis_phi = std::atan2(rot.axis.y(), rot.axis.x());
    out.orientation0 = rot.orientation_at(best_dt);
    double phase = -omega_rot * best_dt;
    phase = std::remainder(phase, 2.0 * constants::pi);
    out.phase = phase;
    out.converged = win.converged;
    out.iterations = win.iterations;
    out.best_start = static_cast<int>(best);
    out.class_of_line = win.matching;
    for (const auto& ds : prob.data) out.branch_of_dataset.push_back(ds.branch);

    // Residual RMS in Hz (unweighted) plus covariance of the 6 parameters.
    Eigen::VectorXd r(static_cast<Eigen::Index>(prob.n_residuals));
    prob.residuals(win.x, win.matching, r);
    double ss_hz = 0.0;
    {
        Eigen::Index k = 0;
        for (const auto& ds : prob.data)
            for (std::size_t c = 0; c < ds.traces->lines.size(); ++c)
                for (std::size_t l = 0; l < ds.traces->lines[c].size(); ++l) {
                    const double hz = r(k) * ds.traces->lines[c][l].sigma_hz;
                    ss_hz += hz * hz;
                    ++k;
                }
    }
    out.residual_rms_hz = std::sqrt(ss_hz / static_cast<double>(prob.n_residuals));

    Eigen::MatrixXd J(static_cast<Eigen::Index>(prob.n_residuals), 6);
    for (int p = 0; p < 6; ++p) {
        const double h = 1e-6;
        Eigen::Matrix<double, 6, 1> xp = win.x, xm = win.x;
        xp(p) += h;
        xm(p) -= h;
        Eigen::VectorXd rp(static_cast<Eigen::Index>(prob.n_residuals));
        Eigen::VectorXd rm(static_cast<Eigen::Index>(prob.n_residuals));
        prob.residuals(xp, win.matching, rp);
        prob.residuals(xm, win.matching, rm);
        J.col(p) = (rp - rm) / (2.0 * h);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double s_max = sv(0);
    int null_modes = 0;
    Eigen::Matrix<double, 6, 6> inv_sq = Eigen::Matrix<double, 6, 6>::Zero();
    for (int i = 0; i < 6; ++i) {
        if (sv(i) < 1e-8 * s_max) {
            ++null_modes;
            continue;
        }
        inv_sq(i, i) = 1.0 / (sv(i) * sv(i));
    }
    out.null_modes = null_modes;
    const double dof =
        std::max(1.0, static_cast<double>(prob.n_residuals) - (6.0 - null_modes));
    const double sigma_sq = win.cost / dof;
    out.covariance = svd.matrixV() * inv_sq * svd.matrixV().transpose() * sigma_sq;
    return out;
}

} // namespace rotortrap
