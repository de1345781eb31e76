#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "fastlight/medium.hpp"
#include "fastlight/metrics.hpp"
#include "fastlight/signal.hpp"

namespace fastlight {

/// A Gaussian probe on its default time grid.
struct PulseSetup {
  double fwhm = 200e-9;
  double window_fwhm = 8.0;          // window = window_fwhm * fwhm
  std::size_t samples = 1u << 14;

  TimeGrid grid() const;
  Envelope reference() const;  // unit peak amplitude, centered at t = 0
};

/// Propagates the setup's Gaussian through `model` and compares it with the
/// vacuum reference.
PulseComparison measure_pulse(const MediumModel& model, const PulseSetup& setup,
                              const AnalyzeOptions& options = {});

/// Parametric line sets the calibration can search.
enum class LineFamily {
  /// Broad gain line with the probe on its blue wing plus a narrow absorption
  /// notch at the probe frequency.
  NotchedWing,
  /// One gain line with the probe on its blue wing.
  Wing,
};

std::string to_string(LineFamily family);
LineFamily line_family_from_string(const std::string& name);

/// Searched halfwidths used when CalibrationOptions::halfwidths is empty.
std::vector<double> default_halfwidths(LineFamily family);

struct CalibrationTargets {
  double peak_gain = 2.0;       // output/reference peak intensity, > 0
  double advancement = 50e-9;   // s
  double pulse_fwhm = 200e-9;   // s
  double length = kDefaultCellLength;
  double carrier_frequency = kDefaultCarrier;
};

struct CalibrationOptions {
  LineFamily family = LineFamily::NotchedWing;
  /// Halfwidths tried in order for the searched line (the notch for
  /// NotchedWing, the single line for Wing); the first that converges wins.
  /// Empty selects the family default.
  std::vector<double> halfwidths;
  double wing_halfwidth = 30e6;  // NotchedWing only
  double wing_offset = -15e6;    // NotchedWing only: wing center below the probe
  double tolerance = 0.02;       // relative, on gain and advancement
  int max_evaluations = 400;     // per halfwidth
  PulseSetup pulse;              // fwhm is overwritten by the targets
};

struct CalibrationResult {
  MediumModel model;
  /// Detuning of the probe carrier within the model's frame. Lines are stored
  /// relative to the probe, so this is zero.
  double operating_detuning = 0.0;
  double measured_gain = 0.0;
  double measured_advancement = 0.0;
  double residual = 0.0;
  double searched_halfwidth = 0.0;
  int evaluations = 0;
};

/// Fits a line set so that the simulated pulse shows the target peak gain and
/// peak advancement within options.tolerance. Derivative-free 2-D search
/// (log gain of the gain line x depth of the notch, or log gain x probe
/// offset for Wing) for each candidate halfwidth. Throws CalibrationError with
/// the best residual seen when no halfwidth converges.
CalibrationResult calibrate(const CalibrationTargets& targets,
                            const CalibrationOptions& options = {});

/// Builds a family member from its two search coordinates.
MediumModel family_model(LineFamily family, const std::array<double, 2>& x, double halfwidth,
                         const CalibrationTargets& targets, const CalibrationOptions& options);

namespace detail {

struct SimplexResult {
  std::array<double, 2> x{};
  double value = 0.0;
  int evaluations = 0;
};

/// Nelder-Mead on R^2. Stops after max_evaluations, when the simplex values
/// agree to f_tolerance, or as soon as `done(value)` returns true.
SimplexResult nelder_mead(const std::function<double(const std::array<double, 2>&)>& f,
                          std::array<double, 2> start, std::array<double, 2> step,
                          int max_evaluations, double f_tolerance,
                          const std::function<bool(double)>& done = {});

}  // namespace detail

}  // namespace fastlight
