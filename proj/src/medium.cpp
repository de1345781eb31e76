#include "fastlight/medium.hpp"

#include <cmath>
#include <sstream>

#include "fastlight/error.hpp"

namespace fastlight {

namespace {

void check_line(const LorentzianLine& line) {
  if (!(line.halfwidth > 0.0) || !std::isfinite(line.halfwidth)) {
    std::ostringstream os;
    os << "Lorentzian halfwidth must be finite and > 0, got " << line.halfwidth;
    throw ConfigError(os.str());
  }
  if (!std::isfinite(line.strength) || !std::isfinite(line.center_offset)) {
    throw ConfigError("Lorentzian strength and center offset must be finite");
  }
}

// Propagation constant 2 pi nu / c at absolute frequency nu0 + d.
double wavenumber(const MediumModel& model, double detuning) {
  return 2.0 * kPi * (model.carrier_frequency() + detuning) / kSpeedOfLight;
}

}  // namespace

MediumModel::MediumModel() : MediumModel({}, kDefaultCellLength, kDefaultCarrier) {}

MediumModel::MediumModel(std::vector<LorentzianLine> lines, double length,
                         double carrier_frequency)
    : lines_(std::move(lines)), length_(length), carrier_(carrier_frequency) {
  if (!(length_ > 0.0) || !std::isfinite(length_)) {
    throw ConfigError("medium length must be finite and > 0");
  }
  if (!(carrier_ > 0.0) || !std::isfinite(carrier_)) {
    throw ConfigError("carrier frequency must be finite and > 0");
  }
  for (const auto& line : lines_) check_line(line);
}

MediumModel MediumModel::vacuum(double length, double carrier_frequency) {
  return MediumModel({}, length, carrier_frequency);
}

MediumModel MediumModel::modulated(double strength_factor, double detuning_shift) const {
  std::vector<LorentzianLine> out = lines_;
  for (auto& line : out) {
    line.strength *= strength_factor;
    line.center_offset += detuning_shift;
  }
  return MediumModel(std::move(out), length_, carrier_);
}

double MediumModel::log_gain_for_strength(double strength) const noexcept {
  return 2.0 * kPi * carrier_ * strength * length_ / kSpeedOfLight;
}

double MediumModel::strength_for_log_gain(double log_gain) const noexcept {
  return log_gain * kSpeedOfLight / (2.0 * kPi * carrier_ * length_);
}

Complex susceptibility(const MediumModel& model, double detuning) {
  Complex chi{0.0, 0.0};
  for (const auto& line : model.lines()) {
    chi += line.strength * line.halfwidth /
           Complex(detuning - line.center_offset, line.halfwidth);
  }
  return chi;
}

Complex susceptibility_slope(const MediumModel& model, double detuning) {
  Complex slope{0.0, 0.0};
  for (const auto& line : model.lines()) {
    const Complex denom(detuning - line.center_offset, line.halfwidth);
    slope -= line.strength * line.halfwidth / (denom * denom);
  }
  return slope;
}

Complex refractive_index(const MediumModel& model, double detuning) {
  return 1.0 + 0.5 * susceptibility(model, detuning);
}

double group_index(const MediumModel& model, double detuning) {
  const double nu = model.carrier_frequency() + detuning;
  const Complex n = refractive_index(model, detuning);
  const Complex dn = 0.5 * susceptibility_slope(model, detuning);
  return n.real() + nu * dn.real();
}

double group_velocity(const MediumModel& model, double detuning) {
  const double ng = group_index(model, detuning);
  if (ng == 0.0) {
    throw UndefinedVelocityError("group index is zero; group velocity undefined");
  }
  return kSpeedOfLight / ng;
}

double advancement(const MediumModel& model, double detuning) {
  return advancement_for_group_index(group_index(model, detuning), model.length());
}

Complex transfer_at(const MediumModel& model, double detuning) {
  if (model.is_vacuum()) return {1.0, 0.0};
  const Complex n_minus_1 = 0.5 * susceptibility(model, detuning);
  return std::exp(Complex(0.0, wavenumber(model, detuning) * model.length()) * n_minus_1);
}

double intensity_gain(const MediumModel& model, double detuning) {
  return std::norm(transfer_at(model, detuning));
}

std::vector<Complex> transfer_function(const MediumModel& model,
                                       std::span<const double> detunings) {
  std::vector<Complex> h;
  h.reserve(detunings.size());
  for (double d : detunings) {
    if (!std::isfinite(d)) throw NumericalGuardError("non-finite detuning on grid");
    // log |H|^2 = -k L Im(chi); test it before exponentiating.
    const double log_gain =
        -wavenumber(model, d) * model.length() * susceptibility(model, d).imag();
    if (log_gain > std::log(kMaxIntensityGain)) {
      std::ostringstream os;
      os << "small-signal intensity gain exp(" << log_gain << ") at detuning " << d
         << " Hz exceeds the " << kMaxIntensityGain << " guard";
      throw NumericalGuardError(os.str());
    }
    h.push_back(transfer_at(model, d));
  }
  return h;
}

DispersionSample sample(const MediumModel& model, double detuning) {
  DispersionSample s;
  s.detuning = detuning;
  s.susceptibility = susceptibility(model, detuning);
  s.index = 1.0 + 0.5 * s.susceptibility;
  s.group_index = group_index(model, detuning);
  s.intensity_gain = intensity_gain(model, detuning);
  s.advancement = advancement_for_group_index(s.group_index, model.length());
  s.weak_medium_degraded = std::abs(s.susceptibility) > kWeakMediumLimit;
  return s;
}

double advancement_for_group_index(double group_index, double length) {
  return (1.0 - group_index) * length / kSpeedOfLight;
}

double group_index_for_advancement(double advancement, double length) {
  return 1.0 - advancement * kSpeedOfLight / length;
}

}  // namespace fastlight
