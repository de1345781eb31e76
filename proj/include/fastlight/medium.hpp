#pragma once

#include <complex>
#include <span>
#include <vector>

#include "fastlight/constants.hpp"

namespace fastlight {

using Complex = std::complex<double>;

/// One Lorentzian line of the phenomenological medium.
///
/// All frequencies are offsets from the envelope carrier in Hz. A positive
/// strength is gain, a negative strength is absorption.
struct LorentzianLine {
  double center_offset = 0.0;  // Hz
  double halfwidth = 1.0;      // HWHM, Hz, > 0
  double strength = 0.0;       // dimensionless susceptibility scale

  bool operator==(const LorentzianLine&) const = default;
};

/// A set of Lorentzian lines over a propagation length.
///
/// Sign and phase convention, fixed everywhere in the library: envelopes carry
/// exp(-i 2 pi nu t), so a spectral component picks up exp(+i k L) and a
/// causal susceptibility has its poles in the lower half of the complex
/// detuning plane. Each line contributes
///
///     chi_j(d) = s_j * g_j / ((d - d_j) + i g_j)
///
/// which is -i s_j at line center: positive s_j amplifies.
class MediumModel {
 public:
  /// Vacuum over the default cell.
  MediumModel();
  MediumModel(std::vector<LorentzianLine> lines, double length = kDefaultCellLength,
              double carrier_frequency = kDefaultCarrier);

  static MediumModel vacuum(double length = kDefaultCellLength,
                            double carrier_frequency = kDefaultCarrier);

  const std::vector<LorentzianLine>& lines() const noexcept { return lines_; }
  double length() const noexcept { return length_; }
  double carrier_frequency() const noexcept { return carrier_; }
  double wavelength() const noexcept { return kSpeedOfLight / carrier_; }
  bool is_vacuum() const noexcept { return lines_.empty(); }

  /// Copy with every strength multiplied by `strength_factor` and every line
  /// center moved by `detuning_shift` Hz. Used for per-pixel media and sweeps.
  MediumModel modulated(double strength_factor, double detuning_shift) const;

  /// Log intensity gain at line center for a given strength over this model's
  /// length: 2 pi nu0 s L / c. Inverse of strength_for_log_gain.
  double log_gain_for_strength(double strength) const noexcept;
  double strength_for_log_gain(double log_gain) const noexcept;

  bool operator==(const MediumModel&) const = default;

 private:
  std::vector<LorentzianLine> lines_;
  double length_;
  double carrier_;
};

/// Everything the medium says about one detuning.
struct DispersionSample {
  double detuning = 0.0;
  Complex susceptibility{};
  Complex index{1.0, 0.0};
  double group_index = 1.0;
  double intensity_gain = 1.0;
  double advancement = 0.0;  // s, positive = earlier than vacuum
  bool weak_medium_degraded = false;  // |chi| > kWeakMediumLimit
};

Complex susceptibility(const MediumModel& model, double detuning);

/// d chi / d detuning, analytic.
Complex susceptibility_slope(const MediumModel& model, double detuning);

/// n = 1 + chi / 2 (weak-medium linearization).
Complex refractive_index(const MediumModel& model, double detuning);

/// Re[n + nu dn/dnu] with nu the absolute optical frequency.
double group_index(const MediumModel& model, double detuning);

/// c / n_g. Throws UndefinedVelocityError when n_g == 0.
double group_velocity(const MediumModel& model, double detuning);

/// (1 - n_g) L / c.
double advancement(const MediumModel& model, double detuning);

/// exp(i (2 pi (nu0 + d) / c) (n(d) - 1) L), without the gain guard.
Complex transfer_at(const MediumModel& model, double detuning);

/// |H(d)|^2.
double intensity_gain(const MediumModel& model, double detuning);

/// H on a detuning grid. Throws NumericalGuardError when |H|^2 anywhere on the
/// grid exceeds kMaxIntensityGain, or when the grid holds non-finite values.
std::vector<Complex> transfer_function(const MediumModel& model,
                                       std::span<const double> detunings);

DispersionSample sample(const MediumModel& model, double detuning);

/// Relations between advancement and group index over a length L.
double advancement_for_group_index(double group_index, double length);
double group_index_for_advancement(double advancement, double length);

}  // namespace fastlight
