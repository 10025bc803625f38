#pragma once

// Shared reference configurations for the unit-test suites.  The numbers
// mirror default_config_text(): a 4 x 15 um silica spheroid carrying 2500 e
// in a 30 um trap with the asymmetric geometry coefficients below.

#include "rotortrap/constants.hpp"
#include "rotortrap/model.hpp"

namespace testfix {

inline constexpr double kPi = rotortrap::constants::pi;
inline constexpr double kTwoPi = 2.0 * kPi;

inline rotortrap::TrapDrive reference_trap(double v0 = 590.0,
                                           double f_drive_hz = 3800.0) {
    rotortrap::TrapDrive trap;
    trap.v0 = v0;
    trap.omega_d = kTwoPi * f_drive_hz;
    trap.ell0 = 30e-6;
    trap.ax = -0.045;
    trap.ay = 0.058;
    trap.az = -0.013;
    return rotortrap::validate_trap(trap);
}

inline rotortrap::SpheroidSpec reference_spec() {
    rotortrap::SpheroidSpec spec;
    spec.a_minor = 4e-6;
    spec.b_major = 15e-6;
    spec.q_tot = 2500.0 * rotortrap::constants::elementary_charge_c;
    spec.density = 2200.0;
    return spec;
}

inline rotortrap::RigidBody reference_spheroid(double gamma0_rad_s = kTwoPi * 1000.0) {
    return rotortrap::body_from_spheroid(reference_spec(), gamma0_rad_s);
}

// Fully tri-axial particle: all inertia moments and all quadrupole
// eigenvalues distinct, so no continuous symmetry survives.
inline rotortrap::RigidBody triaxial_body(double gamma0_rad_s = 0.0) {
    rotortrap::RigidBody body;
    body.I1 = 3.4e-24;
    body.I2 = 3.3e-24;
    body.I3 = 1.2e-24;
    body.Q1 = -0.8e-26;
    body.Q2 = -1.2e-26;
    body.Q3 = 2.0e-26;
    body.q_tot = 2500.0 * rotortrap::constants::elementary_charge_c;
    body.mass = 2.7646e-13;
    body.gamma0 = gamma0_rad_s;
    return rotortrap::validate_body(body);
}

} // namespace testfix
