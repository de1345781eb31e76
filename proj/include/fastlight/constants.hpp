#pragma once

#include <numbers>

namespace fastlight {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = std::numbers::pi;

/// Rb D1 probe wavelength and the matching optical carrier.
inline constexpr double kDefaultWavelength = 795e-9;
inline constexpr double kDefaultCarrier = kSpeedOfLight / kDefaultWavelength;

/// Vapor cell length.
inline constexpr double kDefaultCellLength = 0.017;

/// Largest small-signal intensity gain |H|^2 the transfer function may reach
/// anywhere on a detuning grid.
inline constexpr double kMaxIntensityGain = 1e6;

/// |chi| above which n = 1 + chi/2 is reported as degraded.
inline constexpr double kWeakMediumLimit = 0.1;

/// Intensity FWHM to amplitude 1/e half-width conversions for Gaussians.
/// Intensity I(t) = exp(-4 ln2 t^2 / fwhm^2).
inline constexpr double kLn2 = std::numbers::ln2;

}  // namespace fastlight
