#include "fastlight/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "fastlight/error.hpp"

namespace fastlight {

namespace {

constexpr double kPenalty = 1e6;

double max_log_gain() { return std::log(kMaxIntensityGain) * (1.0 - 1e-9); }

// Narrow-band advancement per neper of line-center log gain for a line whose
// center sits `x` Hz below/above the probe: gamma (x^2 - gamma^2) / (4 pi (x^2 + gamma^2)^2).
double advance_per_log_gain(double x, double gamma) {
  const double x2 = x * x, g2 = gamma * gamma;
  return gamma * (x2 - g2) / (4.0 * kPi * (x2 + g2) * (x2 + g2));
}

// Fraction of the line-center log gain seen at distance x.
double gain_fraction(double x, double gamma) {
  const double g2 = gamma * gamma;
  return g2 / (x * x + g2);
}

std::array<double, 2> initial_guess(LineFamily family, double halfwidth,
                                    const CalibrationTargets& t,
                                    const CalibrationOptions& o) {
  const double log_g = std::log(t.peak_gain);
  if (family == LineFamily::NotchedWing) {
    // ln g = w Gb - a ; A = aw Gb + a / (4 pi gamma)
    const double d = -o.wing_offset;
    const double w = gain_fraction(d, o.wing_halfwidth);
    const double aw = advance_per_log_gain(d, o.wing_halfwidth);
    const double an = 1.0 / (4.0 * kPi * halfwidth);
    const double det = w * an + aw;
    double gb = (log_g * an + t.advancement) / det;
    double alpha = (w * t.advancement - aw * log_g) / det;
    gb = std::clamp(gb, 0.0, max_log_gain());
    alpha = std::max(alpha, 0.0);
    return {gb, alpha};
  }
  // Single line: A = ln g (1 - 2u) / (4 pi gamma), u the gain fraction at the probe.
  double u = 0.5;
  if (log_g > 0.0) u = 0.5 * (1.0 - 4.0 * kPi * halfwidth * t.advancement / log_g);
  u = std::clamp(u, 0.02, 1.0);
  const double g = std::clamp(log_g / u, 0.0, max_log_gain());
  return {g, std::sqrt(1.0 / u - 1.0)};
}

}  // namespace

std::vector<double> default_halfwidths(LineFamily family) {
  if (family == LineFamily::NotchedWing) return {2.5e6, 3.0e6, 2.0e6, 1.5e6, 1.0e6};
  return {1.0e6, 0.8e6, 1.2e6, 0.6e6, 1.5e6, 2.0e6};
}

TimeGrid PulseSetup::grid() const {
  return TimeGrid::centered(window_fwhm * fwhm, samples);
}

Envelope PulseSetup::reference() const { return make_gaussian(grid(), fwhm, 0.0, 1.0); }

PulseComparison measure_pulse(const MediumModel& model, const PulseSetup& setup,
                              const AnalyzeOptions& options) {
  const Envelope ref = setup.reference();
  const Envelope out = propagate(ref, model);
  return compare(ref, out, options);
}

std::string to_string(LineFamily family) {
  return family == LineFamily::NotchedWing ? "notched-wing" : "wing";
}

LineFamily line_family_from_string(const std::string& name) {
  if (name == "notched-wing") return LineFamily::NotchedWing;
  if (name == "wing") return LineFamily::Wing;
  throw ConfigError("unknown line family '" + name + "' (expected notched-wing or wing)");
}

MediumModel family_model(LineFamily family, const std::array<double, 2>& x, double halfwidth,
                         const CalibrationTargets& targets, const CalibrationOptions& options) {
  MediumModel unit = MediumModel::vacuum(targets.length, targets.carrier_frequency);
  std::vector<LorentzianLine> lines;
  if (family == LineFamily::NotchedWing) {
    lines.push_back({options.wing_offset, options.wing_halfwidth,
                     unit.strength_for_log_gain(x[0])});
    lines.push_back({0.0, halfwidth, -unit.strength_for_log_gain(x[1])});
  } else {
    lines.push_back({-x[1] * halfwidth, halfwidth, unit.strength_for_log_gain(x[0])});
  }
  return MediumModel(std::move(lines), targets.length, targets.carrier_frequency);
}

CalibrationResult calibrate(const CalibrationTargets& targets,
                            const CalibrationOptions& options) {
  if (!(targets.peak_gain > 0.0) || !std::isfinite(targets.advancement) ||
      !(targets.pulse_fwhm > 0.0)) {
    throw ConfigError("calibration targets need peak_gain > 0, finite advancement, fwhm > 0");
  }
  PulseSetup setup = options.pulse;
  setup.fwhm = targets.pulse_fwhm;
  const Envelope ref = setup.reference();
  const PulseMetrics ref_metrics = analyze(ref);
  const double adv_scale = std::max(std::abs(targets.advancement), 0.01 * targets.pulse_fwhm);
  const double log_target = std::log(targets.peak_gain);

  auto halfwidths = options.halfwidths.empty() ? default_halfwidths(options.family)
                                               : options.halfwidths;
  double best_residual = std::numeric_limits<double>::infinity();
  int total_evaluations = 0;

  for (double halfwidth : halfwidths) {
    struct Hit {
      std::array<double, 2> x;
      double gain, adv, residual;
    };
    std::optional<Hit> inside;  // best point within tolerance
    std::optional<Hit> tight;   // point well inside tolerance: stop early

    auto objective = [&](const std::array<double, 2>& x) -> double {
      const double upper0 = max_log_gain();
      const double upper1 = options.family == LineFamily::NotchedWing ? 40.0 : 50.0;
      if (x[0] < 0.0 || x[1] < 0.0 || x[0] > upper0 || x[1] > upper1) return kPenalty;
      double gain = 0.0, adv = 0.0;
      bool ambiguous = false;
      try {
        const MediumModel model = family_model(options.family, x, halfwidth, targets, options);
        const Envelope out = propagate(ref, model);
        const PulseMetrics m = analyze(out);
        gain = m.peak_intensity / ref_metrics.peak_intensity;
        adv = advancement(ref_metrics, m);
        ambiguous = m.multimodal;
      } catch (const NumericalGuardError&) {
        return kPenalty;
      }
      const double eg = std::log(gain) - log_target;
      const double ea = (adv - targets.advancement) / adv_scale;
      const double r = eg * eg + ea * ea;
      // A split output has no well-defined peak; never accept it as a fit.
      const bool ok = !ambiguous && std::abs(gain / targets.peak_gain - 1.0) <= options.tolerance &&
                      std::abs(adv - targets.advancement) <= options.tolerance * adv_scale;
      if (ok && (!inside || r < inside->residual)) inside = Hit{x, gain, adv, r};
      const double tight_tol = 0.1 * options.tolerance;
      if (!ambiguous && std::abs(gain / targets.peak_gain - 1.0) <= tight_tol &&
          std::abs(adv - targets.advancement) <= tight_tol * adv_scale) {
        tight = Hit{x, gain, adv, r};
      }
      return r;
    };

    const auto start = initial_guess(options.family, halfwidth, targets, options);
    const std::array<double, 2> step{std::max(0.25, 0.2 * start[0]),
                                     std::max(0.25, 0.2 * start[1])};
    const auto result = detail::nelder_mead(objective, start, step, options.max_evaluations,
                                            1e-16, [&](double) { return tight.has_value(); });
    total_evaluations += result.evaluations;
    best_residual = std::min(best_residual, result.value);

    const std::optional<Hit>& chosen = tight ? tight : inside;
    if (chosen) {
      CalibrationResult out{family_model(options.family, chosen->x, halfwidth, targets, options)};
      out.measured_gain = chosen->gain;
      out.measured_advancement = chosen->adv;
      out.residual = chosen->residual;
      out.searched_halfwidth = halfwidth;
      out.evaluations = total_evaluations;
      return out;
    }
  }
  std::ostringstream os;
  os << "calibration did not reach gain " << targets.peak_gain << " and advancement "
     << targets.advancement * 1e9 << " ns within " << options.tolerance * 100
     << " %; best residual " << best_residual;
  throw CalibrationError(os.str(), best_residual);
}

namespace detail {

SimplexResult nelder_mead(const std::function<double(const std::array<double, 2>&)>& f,
                          std::array<double, 2> start, std::array<double, 2> step,
                          int max_evaluations, double f_tolerance,
                          const std::function<bool(double)>& done) {
  using Point = std::array<double, 2>;
  struct Vertex {
    Point x;
    double v;
  };
  int evals = 0;
  auto eval = [&](const Point& x) {
    ++evals;
    return f(x);
  };
  auto stop = [&](double v) { return done && done(v); };

  std::array<Vertex, 3> s{Vertex{start, eval(start)},
                          Vertex{{start[0] + step[0], start[1]}, 0.0},
                          Vertex{{start[0], start[1] + step[1]}, 0.0}};
  s[1].v = eval(s[1].x);
  s[2].v = eval(s[2].x);

  auto lerp = [](const Point& a, const Point& b, double t) {
    return Point{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
  };

  while (evals < max_evaluations) {
    std::sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.v < b.v; });
    if (stop(s[0].v) || std::abs(s[2].v - s[0].v) <= f_tolerance) break;
    const Point centroid{0.5 * (s[0].x[0] + s[1].x[0]), 0.5 * (s[0].x[1] + s[1].x[1])};

    const Point xr = lerp(centroid, s[2].x, -1.0);
    const double vr = eval(xr);
    if (vr < s[0].v) {
      const Point xe = lerp(centroid, s[2].x, -2.0);
      const double ve = eval(xe);
      s[2] = ve < vr ? Vertex{xe, ve} : Vertex{xr, vr};
    } else if (vr < s[1].v) {
      s[2] = Vertex{xr, vr};
    } else {
      const bool outside = vr < s[2].v;
      const Point xc = outside ? lerp(centroid, s[2].x, -0.5) : lerp(centroid, s[2].x, 0.5);
      const double vc = eval(xc);
      if (vc < std::min(vr, s[2].v)) {
        s[2] = Vertex{xc, vc};
      } else {
        for (std::size_t i = 1; i < 3; ++i) {
          s[i].x = lerp(s[0].x, s[i].x, 0.5);
          s[i].v = eval(s[i].x);
        }
      }
    }
  }
  const auto best = std::min_element(s.begin(), s.end(),
                                     [](const Vertex& a, const Vertex& b) { return a.v < b.v; });
  return SimplexResult{best->x, best->v, evals};
}

}  // namespace detail

}  // namespace fastlight
