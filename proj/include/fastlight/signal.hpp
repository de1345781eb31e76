#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "fastlight/medium.hpp"

namespace fastlight {

/// Uniform sampling of the time axis: t_i = start + i * step.
struct TimeGrid {
  double start = 0.0;
  double step = 1e-9;
  std::size_t count = 0;

  /// Grid of `count` samples spanning `window` seconds, centered on t = 0.
  static TimeGrid centered(double window, std::size_t count);

  double time(std::size_t i) const noexcept { return start + step * static_cast<double>(i); }
  double duration() const noexcept { return step * static_cast<double>(count); }
  double end() const noexcept { return time(count - 1); }

  /// Highest representable detuning, 1 / (2 step).
  double nyquist() const noexcept { return 0.5 / step; }
  double frequency_step() const noexcept { return 1.0 / duration(); }

  /// Throws ConfigError unless step > 0 and count >= 4.
  void validate() const;

  bool operator==(const TimeGrid&) const = default;
};

/// Complex temporal envelope sampled on a TimeGrid (sqrt(W)-scaled a.u.).
struct Envelope {
  TimeGrid grid;
  std::vector<Complex> samples;

  std::vector<double> intensity() const;

  /// sum |s|^2 * step.
  double energy() const;
};

/// Unitary DFT of an envelope under the exp(-i 2 pi d t) convention. Bin k
/// sits at detuning detuning_axis(grid)[k] (natural FFT ordering).
struct Spectrum {
  TimeGrid grid;
  std::vector<Complex> bins;

  /// sum |X|^2 * step; equals the envelope energy (Parseval).
  double energy() const;
};

/// Detuning of each spectral bin: k / T for k < N/2, (k - N) / T above.
std::vector<double> detuning_axis(const TimeGrid& grid);

/// Gaussian of intensity FWHM `fwhm` and peak intensity peak_amplitude^2,
/// real and unchirped. Throws ConfigError for fwhm <= 0, a center off the
/// grid, or a window shorter than 8 fwhm; NumericalGuardError when the pulse
/// support (intensity above 1e-12 of peak) is clipped by the grid.
Envelope make_gaussian(const TimeGrid& grid, double fwhm, double center,
                       double peak_amplitude);

Spectrum to_spectrum(const Envelope& env);
Envelope from_spectrum(const Spectrum& spec);

/// Smallest grid step that keeps every line (center +/- 4 halfwidths) below
/// the Nyquist detuning; infinite for vacuum.
double required_step(const MediumModel& model);

/// Output = H(d) * input spectrum. A vacuum model returns the input unchanged.
/// Throws NumericalGuardError when the grid is too coarse for the medium (the
/// message names the required step) or the transfer function guard trips.
Envelope propagate(const Envelope& env, const MediumModel& model);

/// Options for the front (signal velocity) probe.
struct FrontProbeOptions {
  double fwhm = 200e-9;        // body of the probe pulse
  double rise_time = 50e-9;    // C-infinity switch-on ramp duration
  std::size_t samples = 1u << 14;  // samples covering the unpadded window
  std::size_t padding = 8;     // total window = padding x unpadded window
  double threshold = 1e-6;     // relative amplitude that counts as "nonzero"
};

struct FrontReport {
  double turn_on = 0.0;
  /// First time the output amplitude exceeds threshold x its peak.
  double earliest_nonzero = 0.0;
  /// max |out(t)| for t < turn_on, relative to max |out|.
  double pre_front_ratio = 0.0;
  /// Peak advancement of the switched probe relative to its vacuum copy.
  double peak_advancement = 0.0;
  bool front_preserved = false;
};

/// Sends an envelope that is identically zero before `turn_on` and switches on
/// through a smooth but nonanalytic ramp, then checks that nothing leaves the
/// medium before the switch-on even when the peak is advanced.
FrontReport front_probe(const MediumModel& model, double turn_on,
                        const FrontProbeOptions& options = {});

/// Linear interpolation of sampled values at time t; zero outside the grid.
double interpolate_linear(std::span<const double> values, const TimeGrid& grid, double t);

// Envelope CSV formats. Two columns: time_s,intensity. Three columns:
// time_s,re,im. Both carry a header row.
void write_intensity_csv(const std::filesystem::path& path, const Envelope& env);
void write_complex_csv(const std::filesystem::path& path, const Envelope& env);

/// Reads either format; intensity files load as real amplitudes sqrt(I).
/// Throws ConfigError on malformed rows or a non-uniform time column.
Envelope read_envelope_csv(const std::filesystem::path& path);

}  // namespace fastlight
