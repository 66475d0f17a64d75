#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "jrcss/scene_channel.hpp"

using namespace jrcss;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RealWaveform bandlimited_noise(const Timebase& tb, double f_lo, double f_hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  RealWaveform w{tb, std::vector<double>(tb.n_samples)};
  for (auto& v : w.samples) v = g(rng);
  return apply_frequency_response(w, [&](double f) {
    const double a = std::abs(f);
    return cplx{a >= f_lo && a <= f_hi ? 1.0 : 0.0, 0.0};
  });
}

// Circular cross-correlation peak, refined with a parabola.
double xcorr_delay(const RealWaveform& ref, const RealWaveform& sig) {
  const std::size_t n = ref.size();
  std::vector<double> c(n, 0.0);
  for (std::size_t lag = 0; lag < n; ++lag) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += sig.samples[(i + lag) % n] * ref.samples[i];
    c[lag] = s;
  }
  const auto p = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
  const double a = c[(p + n - 1) % n], b = c[p], d = c[(p + 1) % n];
  const double off = 0.5 * (a - d) / (a - 2.0 * b + d);
  return (static_cast<double>(p) + off) / ref.timebase.sample_rate_hz;
}

}  // namespace

TEST_CASE("scatterer ranges follow planar rotation geometry", "[scene_channel][oracle]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.3, 0.3), th(0.0, 30.0);
  for (int trial = 0; trial < 100; ++trial) {
    Scene s;
    s.turntable.center_range_m = 1.0 + std::abs(u(rng)) * 5.0;
    s.turntable.rotation_period_s = 24.56;
    s.scatterers.push_back({u(rng), u(rng), 1.0});
    const double t = th(rng);
    // Oracle: rotate the point as a complex number, then measure distance to the antenna.
    const double angle = -kTwoPi * t / 24.56;
    const std::complex<double> p = std::complex<double>(s.scatterers[0].x_m, s.scatterers[0].y_m) * std::polar(1.0, angle);
    const double expected = std::hypot(p.real(), s.turntable.center_range_m + p.imag());
    REQUIRE_THAT(scatterer_ranges(s, t)[0], WithinAbs(expected, 1e-12));
  }
}

TEST_CASE("stationary scenes keep their ranges", "[scene_channel]") {
  Scene s;
  s.scatterers.push_back({0.0, 0.065, 1.0});
  REQUIRE_THAT(scatterer_ranges(s, 0.0)[0], WithinAbs(1.535, 1e-12));
  REQUIRE_THAT(scatterer_ranges(s, 100.0)[0], WithinAbs(1.535, 1e-12));
}

TEST_CASE("echo delay matches the cross-correlation peak to sub-sample accuracy", "[scene_channel][oracle]") {
  const Timebase tb{20e9, 4096, 0.0};
  const auto tx = bandlimited_noise(tb, 1e9, 8e9, 9);
  for (double r : {0.5, 1.47, 2.3456}) {
    Scene s;
    s.turntable.center_range_m = r;
    s.scatterers.push_back({});
    const auto rx = echo(tx, s, 0.0);
    const double tau = 2.0 * r / kSpeedOfLight;
    REQUIRE_THAT(xcorr_delay(tx, rx), WithinAbs(tau, 0.1 * tb.dt()));
  }
}

TEST_CASE("echo superposes scatterers linearly with their reflectivities", "[scene_channel]") {
  const Timebase tb{20e9, 2048, 0.0};
  const auto tx = bandlimited_noise(tb, 1e9, 8e9, 3);
  Scene a, b, ab;
  a.scatterers.push_back({0.0, 0.0, 1.0});
  b.scatterers.push_back({0.0, 0.1, 0.5});
  ab.scatterers = {a.scatterers[0], b.scatterers[0]};
  const auto ya = echo(tx, a, 0.0), yb = echo(tx, b, 0.0), yab = echo(tx, ab, 0.0);
  for (std::size_t i = 0; i < tb.n_samples; ++i) REQUIRE_THAT(yab.samples[i], WithinAbs(ya.samples[i] + yb.samples[i], 1e-9));
  ab.loss = PropagationLoss::r4;
  ab.scatterers = {a.scatterers[0]};
  const auto yr4 = echo(tx, ab, 0.0);
  REQUIRE_THAT(yr4.samples[100], WithinAbs(ya.samples[100] / (1.47 * 1.47), 1e-12));
}

TEST_CASE("targets beyond the record are rejected", "[scene_channel][errors]") {
  const Timebase tb{20e9, 100, 0.0};  // 5 ns record
  Scene s;
  s.scatterers.push_back({});
  REQUIRE_THROWS_AS(echo(RealWaveform::zeros(tb), s, 0.0), Error);
  s.scatterers[0].reflectivity = 0.0;
  REQUIRE_THROWS_AS(s.validate(), Error);
}

TEST_CASE("RF response applies tilt and out-of-band rejection", "[scene_channel][oracle]") {
  RfResponseSpec spec{5.85e9, 14.5e9, 40.0, -1.0, 7.8e9, std::nullopt};
  const Timebase tb{40e9, 40000, 0.0};
  for (double f : {4e9, 7.8e9, 10.8e9, 13.8e9, 16e9}) {
    RealWaveform w{tb, std::vector<double>(tb.n_samples)};
    for (std::size_t i = 0; i < tb.n_samples; ++i) w.samples[i] = std::cos(kTwoPi * f * tb.time_at(i));
    const auto y = apply_rf_response(w, spec, 0);
    double db = -(f - 7.8e9) / 1e9;
    if (f < 5.85e9 || f > 14.5e9) db -= 40.0;
    REQUIRE_THAT(20.0 * std::log10(tone_amplitude(y, f)), WithinAbs(db, 1e-9));
  }
}

TEST_CASE("RF noise reaches the requested in-band SNR and is seed-deterministic", "[scene_channel]") {
  RfResponseSpec spec;
  spec.noise_snr_db = 10.0;
  const Timebase tb{1e9, 200000, 0.0};
  RealWaveform w{tb, std::vector<double>(tb.n_samples)};
  for (std::size_t i = 0; i < tb.n_samples; ++i) w.samples[i] = std::cos(kTwoPi * 0.1e9 * tb.time_at(i));
  const auto y1 = apply_rf_response(w, spec, 42);
  const auto y2 = apply_rf_response(w, spec, 42);
  const auto y3 = apply_rf_response(w, spec, 43);
  REQUIRE(y1.samples == y2.samples);
  REQUIRE(y1.samples != y3.samples);
  double pn = 0.0;
  for (std::size_t i = 0; i < tb.n_samples; ++i) pn += std::pow(y1.samples[i] - w.samples[i], 2);
  pn /= static_cast<double>(tb.n_samples);
  REQUIRE_THAT(10.0 * std::log10(0.5 / pn), WithinAbs(10.0, 0.1));
}
