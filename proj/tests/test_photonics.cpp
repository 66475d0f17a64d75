#include <catch_amalgamated.hpp>

#include <cmath>

#include "jrcss/chains.hpp"

using namespace jrcss;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ComplexEnvelope phasor(const Timebase& tb, double f, double a = 1.0) {
  auto e = ComplexEnvelope::zeros(tb);
  for (std::size_t i = 0; i < tb.n_samples; ++i) e.samples[i] = std::polar(a, kTwoPi * f * tb.time_at(i));
  return e;
}

double line_amplitude(const ComplexEnvelope& e, double f) {
  cplx acc{};
  for (std::size_t i = 0; i < e.size(); ++i) acc += e.samples[i] * std::polar(1.0, -kTwoPi * f * e.timebase.time_at(i));
  return std::abs(acc) / static_cast<double>(e.size());
}

}  // namespace

TEST_CASE("SBS gain is a Lorentzian in dB", "[photonics][oracle]") {
  SbsFilterSpec s;  // 20 MHz FWHM, 20 dB peak
  REQUIRE_THAT(s.gain_db(0.0), WithinAbs(20.0, 1e-12));
  REQUIRE_THAT(s.gain_db(10e6), WithinAbs(10.0, 1e-12));
  REQUIRE_THAT(s.gain_db(-10e6), WithinAbs(10.0, 1e-12));
  REQUIRE_THAT(s.gain_db(30e6), WithinAbs(2.0, 1e-12));
  REQUIRE_THAT(std::abs(s.transfer(0.0)), WithinRel(10.0, 1e-12));
  REQUIRE_THAT(20.0 * std::log10(std::abs(s.transfer(10e6))), WithinAbs(10.0, 1e-9));
  // The Kramers-Kronig phase leaves the magnitude unchanged.
  s.include_phase = true;
  for (double d : {0.0, 5e6, 13e6, 50e6})
    REQUIRE_THAT(20.0 * std::log10(std::abs(s.transfer(d))), WithinAbs(s.gain_db(d), 1e-9));
  REQUIRE(std::arg(s.transfer(5e6)) != 0.0);
}

TEST_CASE("SBS window sits BFS + f_x below the probe carrier", "[photonics]") {
  SbsFilterSpec s;
  REQUIRE(s.center_offset_hz() == -10.8e9);
  s.pump_offset_hz = 2e9;
  REQUIRE(s.center_offset_hz() == -12.8e9);
}

TEST_CASE("sbs_filter amplifies only lines inside the gain window", "[photonics][oracle]") {
  const Timebase tb{40e9, 40000, 0.0};  // 1 us, 1 MHz bins
  SbsFilterSpec s;
  auto field = phasor(tb, -10.8e9);
  const auto off = phasor(tb, -9.8e9);
  for (std::size_t i = 0; i < field.size(); ++i) field.samples[i] += off.samples[i];
  const auto out = sbs_filter(field, s);
  REQUIRE_THAT(line_amplitude(out, -10.8e9), WithinRel(10.0, 1e-9));
  REQUIRE_THAT(line_amplitude(out, -9.8e9), WithinRel(std::pow(10.0, s.gain_db(1e9) / 20.0), 1e-9));
}

TEST_CASE("short records raise a transient warning", "[photonics]") {
  Diagnostics d;
  sbs_filter(phasor(Timebase{40e9, 400, 0.0}, 0.0), SbsFilterSpec{}, &d);
  REQUIRE(d.warnings.size() == 1);
}

TEST_CASE("CS-DSB makes a residual carrier and two SUT sidebands", "[photonics][oracle]") {
  const Timebase tb{40e9, 4000, 0.0};
  const auto probe = phasor(tb, -7e9);
  SutSpec sut;
  sut.freqs_hz = {1e9};
  const auto out = cs_dsb_modulate(probe, gen_sut(sut, tb), 6.0);
  REQUIRE_THAT(line_amplitude(out, -7e9), WithinRel(db_suppression_to_amplitude(6.0), 1e-9));
  REQUIRE_THAT(line_amplitude(out, -6e9), WithinRel(0.5, 1e-9));
  REQUIRE_THAT(line_amplitude(out, -8e9), WithinRel(0.5, 1e-9));
}

TEST_CASE("gen_sut follows the declared instantaneous frequency", "[photonics][oracle]") {
  const Timebase tb{40e9, 80000, 0.0};
  auto check = [&](const SutSpec& s, double tol) {
    const auto a = analytic_signal(gen_sut(s, tb));
    for (std::size_t i = 2000; i + 2000 < tb.n_samples; i += 3001) {
      const double f = std::arg(a.samples[i + 1] * std::conj(a.samples[i])) / kTwoPi * tb.sample_rate_hz;
      REQUIRE_THAT(f, WithinAbs(s.instantaneous_frequency(tb.time_at(i) + 0.5 * tb.dt()), tol));
    }
  };
  SutSpec lfm;
  lfm.kind = SutKind::lfm;
  lfm.f_start_hz = 1e9;
  lfm.f_stop_hz = 5e9;
  lfm.period_s = 2e-6;
  check(lfm, 5e6);
  SutSpec nlfm;
  nlfm.kind = SutKind::nlfm;
  nlfm.period_s = 2e-6;
  nlfm.poly_coeffs = {1e9, 0.0, 1e21};  // 1 -> 5 GHz quadratic
  check(nlfm, 5e6);
  SutSpec tone;
  tone.freqs_hz = {2.5e9};
  check(tone, 1e3);
}

TEST_CASE("PD1 square-law output beats the residual carrier with the filtered sideband", "[photonics][oracle]") {
  const Timebase tb{40e9, 40000, 0.0};
  auto field = phasor(tb, 0.0, 0.5);
  const auto side = phasor(tb, 20e6, 2.0);
  for (std::size_t i = 0; i < field.size(); ++i) field.samples[i] += side.samples[i];
  const auto pd = pd1_detect(field, 1.0, 50e6);
  REQUIRE_THAT(tone_amplitude(pd, 20e6), WithinRel(2.0 * 0.5 * 2.0, 1e-9));
  const auto dc = pd1_detect(field, 1.0, 10e6);
  REQUIRE(tone_amplitude(dc, 20e6) < 1e-9);
}

TEST_CASE("sensing chain maps a tone to a pulse at T f / f_B after the reference", "[photonics]") {
  SensingSetup s;
  s.tx.ask.bits = gen_prbs(1, 32767, 15);
  SutSpec tone;
  tone.freqs_hz = {3e9};
  const auto rec = sense_pd1(s, tone, 1);
  // Strongest sample away from the sweep start is the signal pulse.
  std::size_t best = 0;
  const double fs = rec.timebase.sample_rate_hz;
  for (std::size_t i = static_cast<std::size_t>(0.2e-6 * fs); i < rec.size(); ++i)
    if (rec.samples[i] > rec.samples[best]) best = i;
  REQUIRE_THAT(rec.timebase.time_at(best), WithinAbs(2e-6, 30e-9));
}

TEST_CASE("invalid SBS and SUT specs are rejected", "[photonics][errors]") {
  SbsFilterSpec s;
  s.linewidth_hz = 0.0;
  REQUIRE_THROWS_AS(s.validate(), Error);
  SutSpec sut;
  sut.freqs_hz = {30e9};
  REQUIRE_THROWS_AS(gen_sut(sut, Timebase{40e9, 100, 0.0}), Error);
}
