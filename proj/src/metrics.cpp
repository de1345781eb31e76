#include "fastlight/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "fastlight/error.hpp"

namespace fastlight {

namespace {

bool is_local_max(std::span<const double> v, std::size_t j) {
  return j > 0 && j + 1 < v.size() && v[j] > v[j - 1] && v[j] >= v[j + 1];
}

std::vector<double> normalized_profile(std::span<const double> intensity, double step) {
  double sum = 0.0;
  for (double v : intensity) {
    if (!std::isfinite(v) || v < 0.0) throw NumericalGuardError("invalid intensity sample");
    sum += v;
  }
  const double area = sum * step;
  if (!(area > 0.0)) throw NumericalGuardError("distortion needs pulses with nonzero energy");
  std::vector<double> p(intensity.begin(), intensity.end());
  for (double& v : p) v /= area;
  return p;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "undefined"; }

}  // namespace

PulseMetrics analyze(std::span<const double> v, const TimeGrid& grid,
                     const AnalyzeOptions& options) {
  if (v.size() != grid.count || v.size() < 3) {
    throw ConfigError("intensity profile does not match its time grid");
  }
  const auto it = std::max_element(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(it - v.begin());
  const double floor = 10.0 * std::numeric_limits<double>::min();
  if (!std::isfinite(*it) || !(*it > floor)) {
    throw NumericalGuardError("pulse has no peak above the numerical floor");
  }
  if (k == 0 || k + 1 == v.size()) {
    throw NumericalGuardError("pulse peak sits on the edge of the time grid");
  }

  PulseMetrics m;
  const double a = v[k - 1], b = v[k], c = v[k + 1];
  const double den = a - 2.0 * b + c;
  const double offset = den != 0.0 ? 0.5 * (a - c) / den : 0.0;
  m.peak_time = grid.time(k) + offset * grid.step;
  m.peak_intensity = b - 0.25 * (a - c) * offset;

  const double half = 0.5 * m.peak_intensity;
  std::size_t rise_below = k;
  while (rise_below > 0 && !(v[rise_below - 1] < half)) --rise_below;
  if (rise_below == 0) throw NumericalGuardError("rising half-maximum crossing is off the grid");
  {
    const std::size_t j = rise_below - 1;  // v[j] < half <= v[j + 1]
    m.rise_cross = grid.time(j) + (half - v[j]) / (v[j + 1] - v[j]) * grid.step;
  }
  std::size_t fall_below = k;
  while (fall_below < v.size() && !(v[fall_below] < half)) ++fall_below;
  if (fall_below == v.size()) throw NumericalGuardError("falling half-maximum crossing is off the grid");
  {
    const std::size_t j = fall_below;  // v[j - 1] >= half > v[j]
    m.fall_cross = grid.time(j - 1) + (v[j - 1] - half) / (v[j - 1] - v[j]) * grid.step;
  }
  m.fwhm = m.fall_cross - m.rise_cross;

  double weight = 0.0, moment = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    weight += v[i];
    moment += v[i] * grid.time(i);
  }
  m.cog_time = moment / weight;

  for (std::size_t j = fall_below; j + 1 < v.size(); ++j) {
    if (is_local_max(v, j)) m.trailing_ringing = std::max(m.trailing_ringing, v[j] / m.peak_intensity);
  }
  m.ringing = m.trailing_ringing > options.ringing_fraction;
  for (std::size_t j = 1; j + 1 < v.size(); ++j) {
    if (j != k && is_local_max(v, j) && v[j] > options.multimodal_fraction * m.peak_intensity) {
      m.multimodal = true;
      break;
    }
  }
  return m;
}

PulseMetrics analyze(const Envelope& env, const AnalyzeOptions& options) {
  const auto intensity = env.intensity();
  return analyze(intensity, env.grid, options);
}

double advancement(const PulseMetrics& reference, const PulseMetrics& output) {
  return reference.peak_time - output.peak_time;
}

double distortion(std::span<const double> reference, std::span<const double> output,
                  const TimeGrid& grid, double shift) {
  if (reference.size() != output.size() || reference.size() != grid.count) {
    throw ConfigError("distortion needs both pulses on the same time grid");
  }
  const auto p_ref = normalized_profile(reference, grid.step);
  const auto p_out = normalized_profile(output, grid.step);
  // Work in sample index space so that a zero shift reads the reference exactly.
  const double di = shift / grid.step;
  const double last = static_cast<double>(p_ref.size() - 1);
  double integral = 0.0;
  for (std::size_t i = 0; i < p_out.size(); ++i) {
    const double x = static_cast<double>(i) + di;
    double shifted = 0.0;
    if (x >= 0.0 && x <= last) {
      const auto j = static_cast<std::size_t>(x);
      const double f = x - static_cast<double>(j);
      shifted = j + 1 < p_ref.size() ? p_ref[j] + f * (p_ref[j + 1] - p_ref[j]) : p_ref[j];
    }
    integral += std::abs(p_out[i] - shifted);
  }
  return std::sqrt(integral * grid.step);
}

double distortion(const Envelope& reference, const Envelope& output, double shift) {
  if (!(reference.grid == output.grid)) {
    throw ConfigError("distortion needs both pulses on the same time grid");
  }
  const auto r = reference.intensity();
  const auto o = output.intensity();
  return distortion(r, o, reference.grid, shift);
}

EdgeAdvancements predicted_edges(double peak_advancement, double tau_a, double beta) {
  if (!(beta > 0.0) || !(tau_a > 0.0)) {
    throw ConfigError("predicted_edges needs beta > 0 and tau_a > 0");
  }
  return {peak_advancement - tau_a + tau_a / beta, peak_advancement + tau_a - tau_a / beta};
}

NarrowingFactors narrowing_factors(double rise_advancement, double fall_advancement,
                                   double peak_advancement, double tau_a) {
  NarrowingFactors out;
  const double up_den = rise_advancement - peak_advancement + tau_a;
  const double down_den = peak_advancement + tau_a - fall_advancement;
  if (up_den > 0.0) out.beta_up = tau_a / up_den;
  if (down_den > 0.0) out.beta_down = tau_a / down_den;
  return out;
}

EdgeReport edge_report(const PulseMetrics& reference, const PulseMetrics& output) {
  EdgeReport r;
  r.peak_advancement = advancement(reference, output);
  r.rise_advancement = reference.rise_cross - output.rise_cross;
  r.fall_advancement = reference.fall_cross - output.fall_cross;
  r.tau_a = 0.5 * reference.fwhm;
  const auto betas =
      narrowing_factors(r.rise_advancement, r.fall_advancement, r.peak_advancement, r.tau_a);
  r.beta_up = betas.beta_up;
  r.beta_down = betas.beta_down;
  return r;
}

PulseComparison compare(std::span<const double> reference, std::span<const double> output,
                        const TimeGrid& grid, const AnalyzeOptions& options) {
  PulseComparison cmp;
  cmp.reference = analyze(reference, grid, options);
  cmp.output = analyze(output, grid, options);
  cmp.edges = edge_report(cmp.reference, cmp.output);
  cmp.peak_gain = cmp.output.peak_intensity / cmp.reference.peak_intensity;
  cmp.distortion = distortion(reference, output, grid, cmp.edges.peak_advancement);
  return cmp;
}

PulseComparison compare(const Envelope& reference, const Envelope& output,
                        const AnalyzeOptions& options) {
  if (!(reference.grid == output.grid)) {
    throw ConfigError("compare needs both pulses on the same time grid");
  }
  const auto r = reference.intensity();
  const auto o = output.intensity();
  return compare(r, o, reference.grid, options);
}

std::string format_report(const PulseComparison& cmp) {
  std::ostringstream os;
  const auto line = [&os](const char* key, double seconds) {
    os << key << "_s=" << fmt(seconds) << '\n' << key << "_ns=" << fmt(seconds * 1e9) << '\n';
  };
  line("reference_peak_time", cmp.reference.peak_time);
  line("output_peak_time", cmp.output.peak_time);
  line("reference_fwhm", cmp.reference.fwhm);
  line("output_fwhm", cmp.output.fwhm);
  line("peak_advancement", cmp.edges.peak_advancement);
  line("rise_advancement", cmp.edges.rise_advancement);
  line("fall_advancement", cmp.edges.fall_advancement);
  line("tau_a", cmp.edges.tau_a);
  line("output_cog_time", cmp.output.cog_time);
  os << "peak_gain=" << fmt(cmp.peak_gain) << '\n';
  os << "distortion=" << fmt(cmp.distortion) << '\n';
  os << "beta_up=" << fmt_opt(cmp.edges.beta_up) << '\n';
  os << "beta_down=" << fmt_opt(cmp.edges.beta_down) << '\n';
  os << "trailing_ringing=" << fmt(cmp.output.trailing_ringing) << '\n';
  os << "ringing=" << (cmp.output.ringing ? "true" : "false") << '\n';
  os << "multimodal=" << (cmp.output.multimodal ? "true" : "false") << '\n';
  return os.str();
}

std::string report_csv_header() {
  return "peak_advancement_s,peak_advancement_ns,rise_advancement_s,fall_advancement_s,"
         "tau_a_s,peak_gain,distortion,beta_up,beta_down,ringing,multimodal";
}

std::string report_csv_row(const PulseComparison& cmp) {
  std::ostringstream os;
  os << fmt(cmp.edges.peak_advancement) << ',' << fmt(cmp.edges.peak_advancement * 1e9) << ','
     << fmt(cmp.edges.rise_advancement) << ',' << fmt(cmp.edges.fall_advancement) << ','
     << fmt(cmp.edges.tau_a) << ',' << fmt(cmp.peak_gain) << ',' << fmt(cmp.distortion) << ','
     << fmt_opt(cmp.edges.beta_up) << ',' << fmt_opt(cmp.edges.beta_down) << ','
     << (cmp.output.ringing ? 1 : 0) << ',' << (cmp.output.multimodal ? 1 : 0);
  return os.str();
}

}  // namespace fastlight
