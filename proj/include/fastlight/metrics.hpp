#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>

#include "fastlight/signal.hpp"

namespace fastlight {

struct AnalyzeOptions {
  /// A local maximum after the fall crossing above this fraction of the peak
  /// counts as trailing-edge ringing.
  double ringing_fraction = 0.05;
  /// A secondary local maximum above this fraction of the peak makes the peak
  /// choice ambiguous.
  double multimodal_fraction = 0.9;
};

/// Timing summary of one intensity profile.
struct PulseMetrics {
  double peak_time = 0.0;
  double peak_intensity = 0.0;
  double fwhm = 0.0;
  double rise_cross = 0.0;
  double fall_cross = 0.0;
  double cog_time = 0.0;  // intensity center of gravity
  /// Largest local maximum after the fall crossing, relative to the peak.
  double trailing_ringing = 0.0;
  bool ringing = false;
  bool multimodal = false;
};

/// Peak by quadratic interpolation through the discrete maximum (the earliest
/// one on ties); half-maximum crossings by linear interpolation against the
/// interpolated peak. Throws NumericalGuardError when the profile has no
/// usable peak or a half-maximum crossing falls off the grid.
PulseMetrics analyze(std::span<const double> intensity, const TimeGrid& grid,
                     const AnalyzeOptions& options = {});
PulseMetrics analyze(const Envelope& env, const AnalyzeOptions& options = {});

/// reference.peak_time - output.peak_time; positive when the output is early.
double advancement(const PulseMetrics& reference, const PulseMetrics& output);

/// D = sqrt( integral | p_out(t) - p_ref(t + shift) | dt ) with p the
/// intensity profiles normalized to unit time integral and `shift` the peak
/// advancement of the output. Reference values between samples are linearly
/// interpolated and vanish off the grid. 0 <= D <= sqrt(2). Throws ConfigError
/// for mismatched grids and NumericalGuardError for zero-energy profiles.
double distortion(std::span<const double> reference, std::span<const double> output,
                  const TimeGrid& grid, double shift);
double distortion(const Envelope& reference, const Envelope& output, double shift);

/// Edge advancements of a pulse narrowed by beta about its peak:
/// rise = T - tau + tau/beta, fall = T + tau - tau/beta.
struct EdgeAdvancements {
  double rise = 0.0;
  double fall = 0.0;
};
EdgeAdvancements predicted_edges(double peak_advancement, double tau_a, double beta);

/// Inverse of predicted_edges, one factor per edge. An edge whose geometry
/// does not describe narrowing (denominator <= 0) yields std::nullopt.
struct NarrowingFactors {
  std::optional<double> beta_up;
  std::optional<double> beta_down;
};
NarrowingFactors narrowing_factors(double rise_advancement, double fall_advancement,
                                   double peak_advancement, double tau_a);

/// Peak and edge comparison between a reference and an advanced pulse.
struct EdgeReport {
  double peak_advancement = 0.0;
  double rise_advancement = 0.0;
  double fall_advancement = 0.0;
  double tau_a = 0.0;  // reference half width at half maximum
  std::optional<double> beta_up;
  std::optional<double> beta_down;
};
EdgeReport edge_report(const PulseMetrics& reference, const PulseMetrics& output);

/// Everything measured for a reference/output pulse pair.
struct PulseComparison {
  PulseMetrics reference;
  PulseMetrics output;
  EdgeReport edges;
  double peak_gain = 0.0;  // output peak intensity / reference peak intensity
  double distortion = 0.0;
};
PulseComparison compare(std::span<const double> reference, std::span<const double> output,
                        const TimeGrid& grid, const AnalyzeOptions& options = {});
PulseComparison compare(const Envelope& reference, const Envelope& output,
                        const AnalyzeOptions& options = {});

/// Flat key=value report, seconds with ns convenience keys, one item per line.
std::string format_report(const PulseComparison& cmp);

/// CSV header and row for the same data.
std::string report_csv_header();
std::string report_csv_row(const PulseComparison& cmp);

}  // namespace fastlight
