#include "fastlight/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "fastlight/error.hpp"

namespace fastlight {

namespace {

// One transform object per thread: Eigen caches twiddles inside it.
Eigen::FFT<double>& thread_fft() {
  thread_local Eigen::FFT<double> fft = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::Unscaled);
    return f;
  }();
  return fft;
}

// exp(-1/u) based C-infinity step from 0 (u <= 0) to 1 (u >= 1). Every
// derivative vanishes at u = 0, so the switch-on is smooth but not analytic.
double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / u);
  const double b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

double quadratic_peak_time(std::span<const double> v, const TimeGrid& grid) {
  const auto it = std::max_element(v.begin(), v.end());
  auto k = static_cast<std::size_t>(it - v.begin());
  double offset = 0.0;
  if (k > 0 && k + 1 < v.size()) {
    const double a = v[k - 1], b = v[k], c = v[k + 1];
    const double den = a - 2.0 * b + c;
    if (den != 0.0) offset = 0.5 * (a - c) / den;
  }
  return grid.time(k) + offset * grid.step;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

TimeGrid TimeGrid::centered(double window, std::size_t count) {
  if (!(window > 0.0) || count < 4) {
    throw ConfigError("time grid needs a positive window and at least 4 samples");
  }
  TimeGrid g;
  g.step = window / static_cast<double>(count);
  g.start = -0.5 * window;
  g.count = count;
  return g;
}

void TimeGrid::validate() const {
  if (!(step > 0.0) || !std::isfinite(step) || !std::isfinite(start)) {
    throw ConfigError("time grid step must be finite and > 0");
  }
  if (count < 4) throw ConfigError("time grid needs at least 4 samples");
}

std::vector<double> Envelope::intensity() const {
  std::vector<double> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(),
                 [](const Complex& s) { return std::norm(s); });
  return out;
}

double Envelope::energy() const {
  double sum = 0.0;
  for (const auto& s : samples) sum += std::norm(s);
  return sum * grid.step;
}

double Spectrum::energy() const {
  double sum = 0.0;
  for (const auto& b : bins) sum += std::norm(b);
  return sum * grid.step;
}

std::vector<double> detuning_axis(const TimeGrid& grid) {
  const std::size_t n = grid.count;
  const double df = grid.frequency_step();
  std::vector<double> axis(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<double>(k);
    axis[k] = (k < (n + 1) / 2) ? kk * df : (kk - static_cast<double>(n)) * df;
  }
  return axis;
}

Envelope make_gaussian(const TimeGrid& grid, double fwhm, double center,
                       double peak_amplitude) {
  grid.validate();
  if (!(fwhm > 0.0) || !std::isfinite(fwhm)) throw ConfigError("pulse FWHM must be > 0");
  if (center < grid.start || center > grid.end()) {
    throw ConfigError("pulse center lies outside the time grid");
  }
  if (grid.duration() < 8.0 * fwhm * (1.0 - 1e-12)) {
    throw ConfigError("time window must span at least 8 pulse FWHM");
  }
  // Intensity exp(-4 ln2 t^2 / w^2) drops to 1e-12 at |t| = w sqrt(3 ln10 / ln2).
  const double support = fwhm * std::sqrt(3.0 * std::log(10.0) / kLn2);
  if (center - support < grid.start || center + support > grid.end()) {
    throw NumericalGuardError("Gaussian pulse support is clipped by the time grid");
  }
  Envelope env{grid, std::vector<Complex>(grid.count)};
  const double a = 2.0 * kLn2 / (fwhm * fwhm);  // amplitude exponent
  for (std::size_t i = 0; i < grid.count; ++i) {
    const double t = grid.time(i) - center;
    env.samples[i] = peak_amplitude * std::exp(-a * t * t);
  }
  return env;
}

Spectrum to_spectrum(const Envelope& env) {
  env.grid.validate();
  Spectrum spec{env.grid, {}};
  // Bin k collects exp(+i 2 pi k n / N) so that it represents detuning +k/T.
  thread_fft().inv(spec.bins, env.samples);
  const double scale = 1.0 / std::sqrt(static_cast<double>(env.samples.size()));
  for (auto& b : spec.bins) b *= scale;
  return spec;
}

Envelope from_spectrum(const Spectrum& spec) {
  Envelope env{spec.grid, {}};
  thread_fft().fwd(env.samples, spec.bins);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.bins.size()));
  for (auto& s : env.samples) s *= scale;
  return env;
}

double required_step(const MediumModel& model) {
  double reach = 0.0;
  for (const auto& line : model.lines()) {
    reach = std::max(reach, std::abs(line.center_offset) + 4.0 * line.halfwidth);
  }
  if (reach == 0.0) return std::numeric_limits<double>::infinity();
  return 0.5 / reach;
}

Envelope propagate(const Envelope& env, const MediumModel& model) {
  if (model.is_vacuum()) return env;
  const double needed = required_step(model);
  if (env.grid.step > needed) {
    std::ostringstream os;
    os << "time step " << env.grid.step << " s is too coarse for the medium lines; "
       << "required step <= " << needed << " s";
    throw NumericalGuardError(os.str());
  }
  Spectrum spec = to_spectrum(env);
  const auto axis = detuning_axis(env.grid);
  const auto h = transfer_function(model, axis);
  for (std::size_t k = 0; k < spec.bins.size(); ++k) spec.bins[k] *= h[k];
  return from_spectrum(spec);
}

FrontReport front_probe(const MediumModel& model, double turn_on,
                        const FrontProbeOptions& options) {
  if (options.padding < 8) throw ConfigError("front probe needs at least 8x zero padding");
  const double base_window = 8.0 * options.fwhm;
  const double body_center = turn_on + options.fwhm;
  TimeGrid grid = TimeGrid::centered(base_window * static_cast<double>(options.padding),
                                     options.samples * options.padding);
  grid.start += body_center;

  Envelope input{grid, std::vector<Complex>(grid.count)};
  const double a = 2.0 * kLn2 / (options.fwhm * options.fwhm);
  for (std::size_t i = 0; i < grid.count; ++i) {
    const double t = grid.time(i);
    const double ramp = smooth_step((t - turn_on) / options.rise_time);
    if (ramp == 0.0) continue;
    const double dt = t - body_center;
    input.samples[i] = ramp * std::exp(-a * dt * dt);
  }

  const Envelope output = propagate(input, model);
  std::vector<double> amp(grid.count);
  for (std::size_t i = 0; i < grid.count; ++i) amp[i] = std::abs(output.samples[i]);
  const double peak = *std::max_element(amp.begin(), amp.end());

  FrontReport report;
  report.turn_on = turn_on;
  report.earliest_nonzero = grid.end();
  for (std::size_t i = 0; i < grid.count; ++i) {
    if (amp[i] > options.threshold * peak) {
      report.earliest_nonzero = grid.time(i);
      break;
    }
  }
  double pre = 0.0;
  for (std::size_t i = 0; i < grid.count && grid.time(i) < turn_on; ++i) {
    pre = std::max(pre, amp[i]);
  }
  report.pre_front_ratio = peak > 0.0 ? pre / peak : 0.0;
  report.front_preserved = report.pre_front_ratio <= options.threshold;
  report.peak_advancement =
      quadratic_peak_time(input.intensity(), grid) - quadratic_peak_time(output.intensity(), grid);
  return report;
}

double interpolate_linear(std::span<const double> values, const TimeGrid& grid, double t) {
  const double x = (t - grid.start) / grid.step;
  if (!(x >= 0.0) || x > static_cast<double>(values.size() - 1)) return 0.0;
  const auto i = static_cast<std::size_t>(x);
  if (i + 1 >= values.size()) return values.back();
  const double f = x - static_cast<double>(i);
  return values[i] + f * (values[i + 1] - values[i]);
}

void write_intensity_csv(const std::filesystem::path& path, const Envelope& env) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "time_s,intensity\n";
  for (std::size_t i = 0; i < env.samples.size(); ++i) {
    out << format_double(env.grid.time(i)) << ',' << format_double(std::norm(env.samples[i]))
        << '\n';
  }
}

void write_complex_csv(const std::filesystem::path& path, const Envelope& env) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "time_s,re,im\n";
  for (std::size_t i = 0; i < env.samples.size(); ++i) {
    out << format_double(env.grid.time(i)) << ',' << format_double(env.samples[i].real())
        << ',' << format_double(env.samples[i].imag()) << '\n';
  }
}

Envelope read_envelope_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  std::vector<double> times;
  std::vector<Complex> samples;
  std::size_t columns = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        numeric = false;
        break;
      }
      fields.push_back(v);
    }
    if (!numeric) {
      if (lineno == 1) continue;  // header
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (columns == 0) columns = fields.size();
    if (fields.size() != columns || (columns != 2 && columns != 3)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 2 or 3 columns consistently");
    }
    times.push_back(fields[0]);
    if (columns == 2) {
      if (fields[1] < 0.0) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": negative intensity");
      }
      samples.emplace_back(std::sqrt(fields[1]), 0.0);
    } else {
      samples.emplace_back(fields[1], fields[2]);
    }
  }
  if (times.size() < 4) throw ConfigError(path.string() + ": fewer than 4 samples");
  TimeGrid grid;
  grid.start = times.front();
  grid.count = times.size();
  grid.step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - grid.time(i)) > 1e-6 * grid.step) {
      throw ConfigError(path.string() + ": time column is not uniformly sampled");
    }
  }
  grid.validate();
  return Envelope{grid, std::move(samples)};
}

}  // namespace fastlight
