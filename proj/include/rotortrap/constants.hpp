#pragma once

namespace rotortrap::constants {

inline constexpr double pi = 3.14159265358979323846;

inline constexpr double elementary_charge_c = 1.602176634e-19; // C, exact SI

// NV ground-state spin constants. The gyromagnetic ratio is the standard
// NV electron value (implementer-supplied; not a fitted quantity here).
inline constexpr double nv_zero_field_splitting_hz = 2.87e9;
inline constexpr double nv_gamma_e_hz_per_t = 28.024e9;

// Default particle material density (fused silica).
inline constexpr double default_density_kg_m3 = 2200.0;

inline constexpr double fwhm_to_sigma = 0.4246609001440095; // 1/(2*sqrt(2*ln 2))

} // namespace rotortrap::constants
