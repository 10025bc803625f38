#pragma once

#include "rotortrap/constants.hpp"

namespace rotortrap {

// AC quadrupole drive V(r,t) = V0 cos(omega_d t)/ell0^2 * (a_x x^2 + a_y y^2 + a_z z^2).
// Geometry coefficients satisfy a_x + a_y + a_z = 0 and a_x < a_z < 0 < a_y.
struct TrapDrive {
    double v0 = 0.0;      // V
    double omega_d = 0.0; // rad/s
    double ell0 = 0.0;    // m
    double ax = 0.0;
    double ay = 0.0;
    double az = 0.0;

    double drive_period() const { return 2.0 * constants::pi / omega_d; }
    double voltage(double t) const;
};

// Returns the input if every TrapDrive invariant holds; throws ConstraintViolation
// naming the first failed invariant otherwise.
TrapDrive validate_trap(const TrapDrive& raw);

// Rigid particle reduced to its principal inertia and charge-quadrupole
// eigenvalues. The dipole moment is identically zero by construction (the
// only multipole coupling rotation to the trap is the quadrupole).
struct RigidBody {
    double I1 = 0.0, I2 = 0.0, I3 = 0.0; // kg m^2, principal moments
    double Q1 = 0.0, Q2 = 0.0, Q3 = 0.0; // C m^2, traceless quadrupole eigenvalues
    double q_tot = 0.0;                  // C
    double mass = 0.0;                   // kg
    double gamma0 = 0.0;                 // rad/s, isotropic angular damping rate
};

RigidBody validate_body(const RigidBody& raw);

// Prolate spheroid with full axis lengths: b_major = length along the symmetry
// axis, a_minor = diameter across it.
struct SpheroidSpec {
    double a_minor = 0.0; // m
    double b_major = 0.0; // m
    double q_tot = 0.0;   // C
    double density = constants::default_density_kg_m3; // kg/m^3
};

// Quadrupole eigenvalues of the charged spheroid. (Q1, Q2, Q3) come from
// numerical surface quadrature of Q_ij = ∫ dq (3 x_i x_j − r² δ_ij) with the
// charge spread over the surface in conductor equilibrium (charge per unit
// length along the symmetry axis is uniform; this is the distribution whose
// small-a/b limit reproduces the closed-form estimate below). Axis 3 is the
// symmetry axis and carries the distinguished (non-degenerate) eigenvalue.
// deltaQ_approx is the independent closed-form estimate
// q_tot b²(1 + 2a²/b²)/4 with b, a the full axis lengths.
struct SpheroidQuadrupole {
    double Q1 = 0.0, Q2 = 0.0, Q3 = 0.0; // C m^2
    double deltaQ_approx = 0.0;          // C m^2
    double deltaQ_quadrature = 0.0;      // C m^2, |Q2 − Q3| from the quadrature
};

SpheroidQuadrupole spheroid_quadrupole(const SpheroidSpec& spec);

// Which ΔQ estimate fixes the quadrupole scale of a body built from a spheroid.
enum class DeltaQModel {
    ClosedFormEstimate, // q b²(1+2a²/b²)/4 — matches the phase-boundary scale
    SurfaceQuadrature,  // conductor-distribution quadrature value
};

// Uniform-density solid spheroid inertia (I1 = I2 = M(a_s² + b_s²)/5,
// I3 = 2 M a_s²/5 with semi-axes) plus the quadrupole above.
RigidBody body_from_spheroid(const SpheroidSpec& spec, double gamma0,
                             DeltaQModel dq = DeltaQModel::ClosedFormEstimate);

// Parametric-pendulum frequency scale:
// omega0 = sqrt(|V0 (a_x − a_y)(Q2 − Q3)| / (3 ell0² I1)).
// standard_orientation is true when V0(a_x−a_y)(Q2−Q3) > 0, the convention in
// which alpha = 0 is the librating equilibrium; false means the roles of the
// alpha = 0 and alpha = π/2 equilibria are swapped.
struct PendulumOmega {
    double omega0 = 0.0; // rad/s
    bool standard_orientation = true;
};

PendulumOmega pendulum_omega0(const TrapDrive& trap, const RigidBody& body);

} // namespace rotortrap
