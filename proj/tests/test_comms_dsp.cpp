#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "jrcss/chains.hpp"

using namespace jrcss;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Rectangular NRZ levels at `sps` samples per symbol times a slow trend.
RealWaveform nrz(const std::vector<std::uint8_t>& bits, std::size_t sps, double baud, double lo, double hi,
                 double (*trend)(double)) {
  const double fs = baud * static_cast<double>(sps);
  RealWaveform w{{fs, bits.size() * sps, 0.0}, std::vector<double>(bits.size() * sps)};
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(w.size());
    w.samples[i] = (bits[i / sps] ? hi : lo) * trend(u);
  }
  return w;
}

double flat(double) { return 1.0; }
double ramp(double u) { return 0.3 + 1.7 * u; }

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("self-mixing recovers the squared ASK envelope", "[comms_dsp][oracle]") {
  AskPlan a;
  a.bits = gen_prbs(4, 400, 7);
  a.carrier_hz = 3e9;
  const Timebase tb{40e9, 32000, 0.0};
  const auto env = self_mix(gen_ask(a, tb), 2.5e9);
  // cos^2 -> level^2 / 2 after removing the 2 f_c term. Symbols inside runs
  // avoid the low-pass edge response.
  for (std::size_t k = 5; k + 5 < 400; ++k) {
    if (a.bits[k - 1] != a.bits[k] || a.bits[k + 1] != a.bits[k]) continue;
    const auto mid = static_cast<std::size_t>((static_cast<double>(k) + 0.5) * 80.0);
    const double lvl = a.level(a.bits[k]);
    REQUIRE_THAT(env.samples[mid], WithinAbs(0.5 * lvl * lvl, 0.01));
  }
}

TEST_CASE("trend compensation flattens a ramped envelope", "[comms_dsp][oracle]") {
  const auto bits = gen_prbs(9, 4000, 15);
  const auto env = nrz(bits, 8, 1e9, 0.04, 1.0, ramp);
  const auto comp = compensate_envelope(env, 1e9, 64);
  // Oracle: the true trend is known, so "one" symbols must land on a common level.
  double lo = 1e9, hi = -1e9;
  for (std::size_t k = 0; k < bits.size(); ++k) {
    if (!bits[k]) continue;
    const double v = comp.samples[k * 8 + 4];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  REQUIRE(hi / lo < 1.03);
  // Before compensation the spread follows the ramp, 2.0 / 0.3.
  REQUIRE(env.samples.back() / env.samples[8 * 2 + 4] > 3.0);
}

TEST_CASE("a flat envelope passes through compensation unchanged", "[comms_dsp]") {
  const auto bits = gen_prbs(2, 2000, 15);
  const auto env = nrz(bits, 8, 1e9, 0.04, 1.0, flat);
  const auto comp = compensate_envelope(env, 1e9, 64);
  for (std::size_t i = 0; i < env.size(); i += 37) REQUIRE_THAT(comp.samples[i], WithinRel(env.samples[i], 1e-6));
}

TEST_CASE("demod_ask BER agrees with the Gaussian tail probability", "[comms_dsp][oracle]") {
  const auto bits = gen_prbs(7, 200000, 23);
  const std::size_t sps = 4;
  auto env = nrz(bits, sps, 1e9, 0.0, 1.0, flat);
  const double sigma = 0.5 / 2.326;  // Q(2.326) = 1e-2
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, sigma);
  for (auto& v : env.samples) v += g(rng);
  const auto r = demod_ask(env, 1e9, bits);
  const double p = q_function(0.5 / sigma);
  const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(bits.size()));
  INFO("measured " << r.ber << " expected " << p);
  REQUIRE(std::abs(r.ber - p) < 4.0 * sd);
  REQUIRE_THAT(r.threshold_used, WithinAbs(0.5, 0.02));
}

TEST_CASE("noiseless NRZ demodulates without errors at any timing phase", "[comms_dsp]") {
  const auto bits = gen_prbs(3, 3000, 15);
  auto env = nrz(bits, 10, 1e9, 0.1, 0.9, flat);
  const auto r = demod_ask(env, 1e9, bits);
  REQUIRE(r.n_errors == 0);
  REQUIRE(r.n_bits == 3000);
}

TEST_CASE("eye opening shrinks with band limitation", "[comms_dsp]") {
  const auto bits = gen_prbs(5, 3000, 15);
  const auto env = nrz(bits, 20, 1e9, 0.0, 1.0, flat);
  const auto clean = eye_diagram(env, 1e9, &bits);
  REQUIRE_THAT(clean.eye_opening, WithinAbs(1.0, 1e-9));
  REQUIRE(clean.samples_per_symbol == 20);
  const auto narrow = eye_diagram(lowpass(env, 0.6e9), 1e9, &bits);
  const auto narrower = eye_diagram(lowpass(env, 0.35e9), 1e9, &bits);
  REQUIRE(narrow.eye_opening < clean.eye_opening);
  REQUIRE(narrower.eye_opening < narrow.eye_opening);
  // Without reference bits the classes come from the signal itself.
  REQUIRE_THAT(eye_diagram(env, 1e9).eye_opening, WithinAbs(1.0, 1e-9));
}

TEST_CASE("communication chain recovers the bits through the tilted receiver", "[comms_dsp]") {
  CommSetup cs;
  cs.tx.ask.bits = gen_prbs(1, 32767, 15);
  const auto cap = comm_capture(cs, 2, 1);
  const auto env = decimate(cap.envelope, 4);  // 10 GSa/s capture
  const auto comp = compensate_envelope(env, cs.tx.ask.baud_rate, 64, cs.tx.chirp.period_s);
  const auto r = demod_ask(comp, cs.tx.ask.baud_rate, cap.bits);
  REQUIRE(r.n_bits == 4000);
  REQUIRE(r.n_errors == 0);
}

TEST_CASE("comms input validation", "[comms_dsp][errors]") {
  RealWaveform zero = RealWaveform::zeros(Timebase{1e9, 1000, 0.0});
  REQUIRE_THROWS_AS(compensate_envelope(zero, 1e8), Error);
  REQUIRE_THROWS_AS(demod_ask(zero, 1e8, {}), Error);
  REQUIRE_THROWS_AS(demod_ask(zero, 1e8, std::vector<std::uint8_t>(500, 1)), Error);
  REQUIRE_THROWS_AS(eye_diagram(zero, 0.0), Error);
}
