#pragma once

// Floquet (monodromy-matrix) stability analysis for linear systems with
// periodic coefficients, and the Mathieu-type linear instability boundary of
// the driven pendulum equation.

#include "rotortrap/model.hpp"

#include <Eigen/Dense>

#include <functional>

namespace rotortrap {

struct PeriodicLinearSystem {
    double period = 0.0;                            // s
    std::function<Eigen::Matrix2d(double)> coeff;   // t -> A(t) for x' = A(t) x
};

// State-transition matrix over one period: columns are the period-advanced
// images of the canonical basis vectors, integrated at 1e-12 local tolerance.
Eigen::Matrix2d monodromy(const PeriodicLinearSystem& sys);

double spectral_radius(const Eigen::Matrix2d& m);

// Stable iff the spectral radius of the monodromy matrix is <= 1 + 1e-9
// (slack absorbs integration error for marginal multipliers on the unit circle).
bool is_stable(const PeriodicLinearSystem& sys);

// First stability boundary in q of u'' + damping u' + (a - 2q cos 2tau) u = 0,
// located by scanning q upward from 0 and bisecting the first stability change
// to 1e-4 in q.  Throws BoundaryNotFound if no change occurs in the scan range.
double mathieu_boundary_q(double a, double damping = 0.0);

// Linear instability of the equilibrium orientation: linearizes the driven
// pendulum about alpha = 0 (delta'' + gamma0 delta' + 2 omega0^2 cos(Omega_d t)
// delta = 0) and returns true when the monodromy is unstable.
bool pendulum_instability(const TrapDrive& trap, const RigidBody& body);

// Drive frequency at which pendulum_instability switches inside
// [omega_lo, omega_hi], bisected to rel_tol; NaN if both ends agree.
double pendulum_instability_boundary(const TrapDrive& trap, const RigidBody& body,
                                     double omega_lo, double omega_hi,
                                     double rel_tol = 1e-3);

} // namespace rotortrap
