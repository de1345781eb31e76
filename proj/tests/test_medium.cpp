#include <doctest.h>

#include <cmath>
#include <random>

#include "fastlight/error.hpp"
#include "fastlight/medium.hpp"

using namespace fastlight;

namespace {

// Fourth-order central difference of Re n - 1 = Re chi / 2, which avoids
// cancelling against the leading 1.
double re_n_slope(const MediumModel& m, double d, double h) {
  auto f = [&](double x) { return 0.5 * susceptibility(m, x).real(); };
  return (8.0 * (f(d + h) - f(d - h)) - (f(d + 2 * h) - f(d - 2 * h))) / (12.0 * h);
}

}  // namespace

TEST_CASE("vacuum is inert") {
  const MediumModel v = MediumModel::vacuum();
  CHECK(v.is_vacuum());
  CHECK(susceptibility(v, 1e6) == Complex(0.0, 0.0));
  CHECK(group_index(v, 0.0) == doctest::Approx(1.0));
  CHECK(advancement(v, 0.0) == doctest::Approx(0.0));
  CHECK(transfer_at(v, 3e6) == Complex(1.0, 0.0));
}

TEST_CASE("line-center gain follows the strength") {
  const double s = 2e-5;
  const MediumModel m({{0.0, 1e6, s}});
  const double expected = std::exp(2.0 * kPi * m.carrier_frequency() * s * m.length() / kSpeedOfLight);
  CHECK(intensity_gain(m, 0.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(m.log_gain_for_strength(s) == doctest::Approx(std::log(expected)));
  CHECK(m.strength_for_log_gain(std::log(expected)) == doctest::Approx(s));
  // negative strength absorbs
  const MediumModel a({{0.0, 1e6, -s}});
  CHECK(intensity_gain(a, 0.0) == doctest::Approx(1.0 / expected).epsilon(1e-12));
}

TEST_CASE("susceptibility at line center is -i s") {
  const MediumModel m({{2e6, 5e5, 3e-5}});
  const Complex chi = susceptibility(m, 2e6);
  CHECK(chi.real() == doctest::Approx(0.0));
  CHECK(chi.imag() == doctest::Approx(-3e-5));
}

TEST_CASE("group index matches finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> off(-20e6, 20e6), hw(0.5e6, 10e6), st(-4e-5, 4e-5), det(-10e6, 10e6);
  for (int k = 0; k < 200; ++k) {
    std::vector<LorentzianLine> lines{{off(rng), hw(rng), st(rng)}};
    if (k % 2) lines.push_back({off(rng), hw(rng), st(rng)});
    const MediumModel m(lines);
    double gmin = 1e300;
    for (const auto& l : lines) gmin = std::min(gmin, l.halfwidth);
    const double d = det(rng);
    const double nu = m.carrier_frequency() + d;
    const double fd = refractive_index(m, d).real() + nu * re_n_slope(m, d, 1e-2 * gmin);
    CHECK(std::abs(group_index(m, d) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("advancement and group index conversions") {
  const double L = 0.017;
  const double a = 50e-9;
  const double ng = group_index_for_advancement(a, L);
  CHECK(ng == doctest::Approx(1.0 - a * kSpeedOfLight / L));
  CHECK(advancement_for_group_index(ng, L) == doctest::Approx(a));
  const MediumModel m({{-15e6, 30e6, 3e-5}, {0.0, 3e6, -2e-5}});
  CHECK(advancement(m, 0.0) == doctest::Approx((1.0 - group_index(m, 0.0)) * L / kSpeedOfLight));
}

TEST_CASE("group index is linear in strength and crosses zero") {
  // Absorption notch depth tuned so n_g crosses zero at the probe.
  const double g = 3e6;
  const MediumModel unit({{0.0, g, -1e-6}});
  const double slope = group_index(unit, 0.0) - 1.0;  // linear in strength
  const MediumModel m({{0.0, g, -1e-6 * (-1.0 / slope)}});
  const double ng = group_index(m, 0.0);
  CHECK(std::abs(ng) < 1e-9);
  if (ng == 0.0) {
    CHECK_THROWS_AS(group_velocity(m, 0.0), UndefinedVelocityError);
  } else {
    CHECK(std::abs(group_velocity(m, 0.0)) > 1e3 * kSpeedOfLight);
  }
  const MediumModel flat({{0.0, g, 0.0}});
  CHECK(group_velocity(flat, 0.0) == doctest::Approx(kSpeedOfLight));
}

TEST_CASE("invalid media are rejected") {
  CHECK_THROWS_AS(MediumModel({{0.0, 0.0, 1e-5}}), ConfigError);
  CHECK_THROWS_AS(MediumModel({{0.0, 1e6, 1e-5}}, -1.0), ConfigError);
  CHECK_THROWS_AS(MediumModel({{0.0, 1e6, NAN}}), ConfigError);
}

TEST_CASE("transfer function gain guard") {
  const MediumModel unit = MediumModel::vacuum();
  const MediumModel hot({{0.0, 1e6, unit.strength_for_log_gain(std::log(2e6))}});
  std::vector<double> axis{-1e6, 0.0, 1e6};
  CHECK_THROWS_AS(transfer_function(hot, axis), NumericalGuardError);
  const MediumModel ok({{0.0, 1e6, unit.strength_for_log_gain(std::log(5e5))}});
  CHECK_NOTHROW(transfer_function(ok, axis));
}

TEST_CASE("modulated scales strengths and shifts centers") {
  const MediumModel m({{1e6, 2e6, 1e-5}});
  const MediumModel k = m.modulated(0.5, 3e6);
  CHECK(k.lines()[0].strength == doctest::Approx(0.5e-5));
  CHECK(k.lines()[0].center_offset == doctest::Approx(4e6));
  CHECK(k.lines()[0].halfwidth == doctest::Approx(2e6));
}
