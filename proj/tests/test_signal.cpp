#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "fastlight/error.hpp"
#include "fastlight/signal.hpp"

using namespace fastlight;

namespace {

const MediumModel kFastMedium({{-15e6, 30e6, 3.33284787e-05}, {0.0, 3e6, -2.47330764e-05}});

// Width at half maximum of a sampled curve, by linear interpolation.
double half_width(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > y[k]) k = i;
  }
  const double h = 0.5 * y[k];
  std::size_t a = k, b = k;
  while (a > 0 && y[a - 1] >= h) --a;
  while (b + 1 < y.size() && y[b + 1] >= h) ++b;
  const double left = x[a - 1] + (h - y[a - 1]) / (y[a] - y[a - 1]) * (x[a] - x[a - 1]);
  const double right = x[b] + (y[b] - h) / (y[b] - y[b + 1]) * (x[b + 1] - x[b]);
  return right - left;
}

}  // namespace

TEST_CASE("gaussian energy matches the closed form") {
  const double w = 200e-9;
  const TimeGrid g = TimeGrid::centered(8 * w, 1u << 14);
  const Envelope e = make_gaussian(g, w, 0.0, 1.5);
  // integral of a^2 exp(-4 ln2 t^2 / w^2)
  const double exact = 1.5 * 1.5 * w * std::sqrt(kPi / (4.0 * kLn2));
  CHECK(e.energy() == doctest::Approx(exact).epsilon(1e-10));
}

TEST_CASE("gaussian intensity FWHM is as requested") {
  const double w = 200e-9;
  const TimeGrid g = TimeGrid::centered(8 * w, 1u << 14);
  const Envelope e = make_gaussian(g, w, 10e-9, 1.0);
  std::vector<double> t(g.count);
  for (std::size_t i = 0; i < g.count; ++i) t[i] = g.time(i);
  CHECK(half_width(t, e.intensity()) == doctest::Approx(w).epsilon(1e-5));
}

TEST_CASE("time-bandwidth product of a 200 ns gaussian") {
  const double w = 200e-9;
  const TimeGrid g = TimeGrid::centered(64 * w, 1u << 16);
  const Spectrum s = to_spectrum(make_gaussian(g, w, 0.0, 1.0));
  auto axis = detuning_axis(g);
  // reorder to ascending detuning
  const std::size_t n = axis.size(), h = n / 2;
  std::vector<double> x(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = (i + h) % n;
    x[i] = axis[k];
    p[i] = std::norm(s.bins[k]);
  }
  const double bw = half_width(x, p);
  CHECK(bw * w == doctest::Approx(2.0 * kLn2 / kPi).epsilon(1e-3));
  CHECK(bw == doctest::Approx(2.2e6).epsilon(0.01));
}

TEST_CASE("spectrum round trip and Parseval") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const TimeGrid g{0.0, 1e-9, 1000};
  Envelope e{g, std::vector<Complex>(g.count)};
  for (auto& v : e.samples) v = {n(rng), n(rng)};
  const Spectrum s = to_spectrum(e);
  CHECK(s.energy() == doctest::Approx(e.energy()).epsilon(1e-12));
  const Envelope back = from_spectrum(s);
  for (std::size_t i = 0; i < g.count; ++i) CHECK(std::abs(back.samples[i] - e.samples[i]) < 1e-12);
}

TEST_CASE("spectrum bin sign convention") {
  // exp(-i 2 pi d t) with d = 3 bins lands in bin 3.
  const TimeGrid g{0.0, 1e-9, 64};
  Envelope e{g, std::vector<Complex>(g.count)};
  const double d = 3.0 / g.duration();
  for (std::size_t i = 0; i < g.count; ++i) e.samples[i] = std::exp(Complex(0.0, -2.0 * kPi * d * g.time(i)));
  const Spectrum s = to_spectrum(e);
  CHECK(std::abs(s.bins[3]) == doctest::Approx(std::sqrt(64.0)));
  CHECK(detuning_axis(g)[3] == doctest::Approx(d));
  CHECK(detuning_axis(g)[63] == doctest::Approx(-1.0 / g.duration()));
}

TEST_CASE("propagation is linear") {
  const TimeGrid g = TimeGrid::centered(1.6e-6, 4096);
  const Envelope a = make_gaussian(g, 200e-9, -50e-9, 1.0);
  const Envelope b = make_gaussian(g, 150e-9, 80e-9, 0.7);
  Envelope sum{g, std::vector<Complex>(g.count)};
  const Complex ca(0.3, 0.2), cb(-1.1, 0.5);
  for (std::size_t i = 0; i < g.count; ++i) sum.samples[i] = ca * a.samples[i] + cb * b.samples[i];
  const Envelope pa = propagate(a, kFastMedium), pb = propagate(b, kFastMedium);
  const Envelope ps = propagate(sum, kFastMedium);
  double peak = 0.0;
  for (auto v : ps.samples) peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i < g.count; ++i) {
    CHECK(std::abs(ps.samples[i] - (ca * pa.samples[i] + cb * pb.samples[i])) < 1e-12 * peak);
  }
}

TEST_CASE("vacuum propagation is the identity") {
  const TimeGrid g = TimeGrid::centered(1.6e-6, 1024);
  const Envelope a = make_gaussian(g, 200e-9, 0.0, 1.0);
  CHECK(propagate(a, MediumModel::vacuum()).samples == a.samples);
}

TEST_CASE("coarse grids and clipped pulses are rejected") {
  const TimeGrid coarse = TimeGrid::centered(1.6e-6, 64);
  const Envelope a = make_gaussian(coarse, 200e-9, 0.0, 1.0);
  try {
    propagate(a, kFastMedium);
    FAIL("expected a guard");
  } catch (const NumericalGuardError& e) {
    CHECK(std::string(e.what()).find("required step") != std::string::npos);
  }
  const TimeGrid g = TimeGrid::centered(1.6e-6, 1024);
  CHECK_THROWS_AS(make_gaussian(g, 0.0, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_gaussian(g, 400e-9, 0.0, 1.0), ConfigError);  // window < 8 fwhm
  CHECK_THROWS_AS(make_gaussian(g, 200e-9, 700e-9, 1.0), NumericalGuardError);
  CHECK(required_step(kFastMedium) == doctest::Approx(0.5 / 135e6));
}

TEST_CASE("a long pulse advances by the continuous-wave amount") {
  const double w = 2e-6;
  const TimeGrid g = TimeGrid::centered(8 * w, 1u << 14);
  const Envelope in = make_gaussian(g, w, 0.0, 1.0);
  const Envelope out = propagate(in, kFastMedium);
  const auto io = in.intensity(), oo = out.intensity();
  const auto peak = [&](const std::vector<double>& v) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < v.size(); ++i) if (v[i] > v[k]) k = i;
    const double den = v[k - 1] - 2 * v[k] + v[k + 1];
    return g.time(k) + 0.5 * (v[k - 1] - v[k + 1]) / den * g.step;
  };
  CHECK(peak(io) - peak(oo) == doctest::Approx(advancement(kFastMedium, 0.0)).epsilon(0.01));
}

TEST_CASE("front probe: nothing leaves before the switch-on") {
  const FrontReport r = front_probe(kFastMedium, 0.0);
  CHECK(r.pre_front_ratio <= 1e-6);
  CHECK(r.front_preserved);
  CHECK(r.earliest_nonzero >= r.turn_on);
  CHECK(r.peak_advancement > 40e-9);
  const FrontReport v = front_probe(MediumModel::vacuum(), 0.0);
  CHECK(v.pre_front_ratio == 0.0);
  CHECK(v.peak_advancement == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("interpolation vanishes off the grid") {
  const TimeGrid g{0.0, 1.0, 3};
  const std::vector<double> v{1.0, 3.0, 5.0};
  CHECK(interpolate_linear(v, g, 0.5) == doctest::Approx(2.0));
  CHECK(interpolate_linear(v, g, -0.1) == 0.0);
  CHECK(interpolate_linear(v, g, 2.5) == 0.0);
  CHECK(interpolate_linear(v, g, 2.0) == doctest::Approx(5.0));
}

TEST_CASE("envelope CSV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "fastlight_signal_test";
  std::filesystem::create_directories(dir);
  const TimeGrid g = TimeGrid::centered(1.6e-6, 64);
  Envelope e = make_gaussian(g, 200e-9, 0.0, 2.0);
  e.samples[5] = {0.1, -0.2};
  write_complex_csv(dir / "c.csv", e);
  const Envelope back = read_envelope_csv(dir / "c.csv");
  CHECK(back.grid.count == g.count);
  CHECK(back.grid.step == doctest::Approx(g.step));
  for (std::size_t i = 0; i < g.count; ++i) CHECK(std::abs(back.samples[i] - e.samples[i]) < 1e-14);
  write_intensity_csv(dir / "i.csv", e);
  const Envelope bi = read_envelope_csv(dir / "i.csv");
  CHECK(bi.energy() == doctest::Approx(e.energy()).epsilon(1e-12));
}
