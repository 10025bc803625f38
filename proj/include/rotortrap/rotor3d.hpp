#pragma once

// Full rigid-body rotational dynamics of the charged particle in the
// quadrupole trap: orientation kinematics (zy'z'' Euler convention backed by
// a unit quaternion), the quadrupole potential and torque, Euler equations
// with isotropic damping, equilibrium enumeration, secular frequencies in the
// librating and rotation-locked regimes, the co-rotating decomposition of the
// potential, and center-of-mass secular frequencies.

#include "rotortrap/model.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <vector>

namespace rotortrap {

struct EulerZyz {
    double alpha = 0.0; // rad, in (-pi, pi]
    double beta = 0.0;  // rad, in [0, pi]
    double gamma = 0.0; // rad, in (-pi, pi]
};

// Rigid-body orientation (body -> lab).  Stored as a unit quaternion; the
// zy'z'' Euler angles used for reporting are derived on demand.
class Orientation {
public:
    Orientation() : q_(Eigen::Quaterniond::Identity()) {}

    static Orientation from_quaternion(const Eigen::Quaterniond& q);
    static Orientation from_euler_zyz(double alpha, double beta, double gamma);
    static Orientation from_matrix(const Eigen::Matrix3d& R);

    const Eigen::Quaterniond& quaternion() const { return q_; }
    Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }

    // Euler extraction: beta in [0, pi]; at |sin beta| < 1e-8 the alpha/gamma
    // split is degenerate and is fixed deterministically by setting gamma = 0.
    EulerZyz euler_zyz() const;

private:
    Eigen::Quaterniond q_;
};

// R(alpha, beta, gamma) = Rz(alpha) Ry(beta) Rz(gamma).
Eigen::Matrix3d rotation_matrix(double alpha, double beta, double gamma);

// Body-frame angular velocity for given Euler angle rates.
Eigen::Vector3d euler_rates_to_body_omega(double alpha_dot, double beta_dot,
                                          double gamma_dot, double beta, double gamma);

struct BodyState {
    Orientation orientation;
    Eigen::Vector3d omega_body = Eigen::Vector3d::Zero(); // rad/s
    double t = 0.0;                                       // s
};

// U = V(t)/(3 ell0^2) Tr[R Q0 R^T A], Q0 = diag(Q1,Q2,Q3), A = diag(ax,ay,az).
double potential_energy(const Orientation& orientation, const TrapDrive& trap,
                        const RigidBody& body, double t);

// Lab-frame torque N = (2 V(t)/3 ell0^2) sum_j a_j e_j x (Q_lab e_j).
Eigen::Vector3d torque(const Orientation& orientation, const TrapDrive& trap,
                       const RigidBody& body, double t);

enum class DriveMode {
    Oscillating, // V(t) = V0 cos(Omega_d t)
    FrozenAtPeak // V(t) = V0 (static potential, e.g. conservation checks)
};

struct Trajectory3D {
    std::vector<double> t;
    std::vector<Eigen::Quaterniond> q;          // body -> lab
    std::vector<Eigen::Vector3d> omega_body;    // rad/s

    std::size_t size() const { return t.size(); }
    BodyState back() const;
};

// Integrate the Euler equations (body frame, damping torque -gamma0 L) coupled
// to quaternion kinematics.  dt_max caps the internal step (required:
// dt_max <= T_drive/200); dt_sample sets the output spacing (0 -> T_drive/64).
Trajectory3D integrate_rigid(const TrapDrive& trap, const RigidBody& body,
                             const BodyState& state0, double t_end, double dt_max,
                             double dt_sample = 0.0,
                             DriveMode mode = DriveMode::Oscillating);

struct Equilibrium {
    Orientation orientation;
    // Small-rotation modes about the lab x, y, z axes:
    std::array<double, 3> mode_q{};            // parametric stability parameter |q|
    std::array<double, 3> secular_freq{};      // rad/s local secular frequency
    std::array<bool, 3> mode_stable{};
    bool stable = false;                       // all three modes stable
};

struct EquilibriumSet {
    std::vector<Equilibrium> entries; // exactly six
};

// Enumerates the six axis-permutation orientations (every principal axis along
// every lab axis, proper rotations) and evaluates their parametric stability.
// Throws DegenerateSpectrum when Q eigenvalues (or trap coefficients) coincide,
// since the equilibria degenerate into continua.
EquilibriumSet equilibria(const TrapDrive& trap, const RigidBody& body);

struct LibrationFrequencies {
    double omega_alpha = 0.0; // rad/s
    double omega_beta = 0.0;  // rad/s
    double omega_gamma = 0.0; // rad/s
    double validity_parameter = 0.0; // max_{i,j,k} V0 |Qi-Qj| / (Ik Omega_d^2 ell0^2)
    bool valid = false;              // validity_parameter < 0.1
};

// Secular libration frequencies about the equilibrium alpha=0, beta=pi/2,
// gamma=0 in the librating regime (closed forms, drive-averaged convention).
LibrationFrequencies libration_frequencies(const TrapDrive& trap, const RigidBody& body);

struct RotatingMode {
    double omega = 0.0; // rad/s, 0 when unstable
    bool unstable = false;
};

struct RotatingFrameFrequencies {
    RotatingMode alpha; // in-plane angle relative to the co-rotating frame
    RotatingMode beta;  // long-axis tilt out of the xy-plane
    RotatingMode gamma; // roll about the long axis
};

// Oscillation frequencies of small deviations about steady rotation-locked
// motion (long axis in the xy-plane, spinning at Omega_d/2).  The beta and
// gamma modes contain gyroscopic terms proportional to (Omega_d/2)^2; a
// negative radicand marks the mode unstable.
RotatingFrameFrequencies rotating_frame_frequencies(const TrapDrive& trap,
                                                    const RigidBody& body,
                                                    double omega_d);

struct PotentialDecomposition {
    double U0 = 0.0; // time-independent term (J)
    double u1 = 0.0; // coefficient of cos(Omega_d t)
    double u2 = 0.0; // coefficient of cos(2 Omega_d t)
    double u3 = 0.0; // coefficient of sin(2 Omega_d t)
};

// Decomposition of the potential in the frame co-rotating at Omega_d/2:
// substituting alpha -> alpha + Omega_d t/2 into the lab potential gives
// U = U0 + u1 cos(Omega_d t) + u2 cos(2 Omega_d t) + u3 sin(2 Omega_d t).
PotentialDecomposition corotating_potential_decomposition(const Orientation& orientation,
                                                          const TrapDrive& trap,
                                                          const RigidBody& body);

struct ComFrequencies {
    std::array<double, 3> omega{};   // rad/s secular frequencies (x, y, z)
    std::array<double, 3> q_param{}; // Mathieu stability parameters
    bool valid = false;              // all q_u < 0.4
};

// Lowest-order center-of-mass secular frequencies
// omega_u = q_u Omega_d / (2 sqrt(2)), q_u = 4 |q V0 a_u| / (m ell0^2 Omega_d^2).
ComFrequencies com_secular_frequencies(const TrapDrive& trap, double charge, double mass);

} // namespace rotortrap
