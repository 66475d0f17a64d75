#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "jrcss/pipelines.hpp"

using namespace jrcss;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kT = 4e-6;
constexpr double kFb = 6e9;

struct Pulse {
  double t_s;
  double amp;
  double sigma_s;
};

// Record of Gaussian pulses on a zero baseline.
RealWaveform pulses(double fs, std::size_t n_sweeps, const std::vector<Pulse>& ps) {
  const Timebase tb{fs, static_cast<std::size_t>(std::llround(n_sweeps * kT * fs)), 0.0};
  RealWaveform w = RealWaveform::zeros(tb);
  for (std::size_t i = 0; i < tb.n_samples; ++i) {
    const double t = tb.time_at(i);
    for (const auto& p : ps) w.samples[i] += p.amp * std::exp(-0.5 * std::pow((t - p.t_s) / p.sigma_s, 2));
  }
  return w;
}

// Reference plus one signal pulse per sweep, the signal at the FTTM position of f.
std::vector<Pulse> fttm_train(std::size_t n_sweeps, double f_hz, double ref_delay_s, double sigma_s = 15e-9) {
  std::vector<Pulse> ps;
  for (std::size_t k = 0; k < n_sweeps; ++k) {
    const double t0 = static_cast<double>(k) * kT;
    ps.push_back({t0 + ref_delay_s, 1.0, sigma_s});
    ps.push_back({t0 + kT * f_hz / kFb, 2.0, sigma_s});
  }
  return ps;
}

FttmCalibration default_cal() {
  FttmCalibration c;
  c.bandwidth_hz = kFb;
  c.period_s = kT;
  return c;
}

}  // namespace

TEST_CASE("pulse centroids land on the Gaussian centre at any sample phase", "[sensing_dsp][oracle]") {
  const double fs = 100e6;
  for (double phase : {0.0, 0.17, 0.5, 0.81}) {
    const double tc = 1.3e-6 + phase / fs;
    const auto rec = pulses(fs, 2, {{40e-9, 1.0, 15e-9}, {tc, 2.0, 15e-9}, {kT + 40e-9, 1.0, 15e-9}, {kT + tc, 2.0, 15e-9}});
    const auto found = detect_pulses(rec, kT);
    REQUIRE(found.n_sweeps == 2);
    REQUIRE(found.events.size() == 4);
    for (const auto& e : found.events) {
      const double origin = static_cast<double>(e.sweep_index) * kT;
      const double expected = e.is_reference ? origin + 40e-9 : origin + tc;
      // Sampling the threshold kink leaves a phase-dependent bias of a few
      // hundredths of a sample at 1.5 samples per sigma.
      REQUIRE_THAT(e.time_s, WithinAbs(expected, 0.05 / fs));
    }
  }
  // FWHM by linear interpolation needs a few samples per sigma.
  const auto fine = detect_pulses(pulses(400e6, 1, {{40e-9, 1.0, 15e-9}, {1.3e-6, 2.0, 15e-9}}), kT);
  REQUIRE(fine.events.size() == 2);
  REQUIRE_THAT(fine.events[1].width_s, WithinRel(2.0 * std::sqrt(2.0 * std::log(2.0)) * 15e-9, 0.01));
}

TEST_CASE("a sweep holding only noise is reported empty", "[sensing_dsp]") {
  const double fs = 100e6;
  auto rec = pulses(fs, 3, {{40e-9, 1.0, 15e-9}, {2e-6, 2.0, 15e-9}, {2 * kT + 40e-9, 1.0, 15e-9}, {2 * kT + 2e-6, 2.0, 15e-9}});
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.01);
  for (auto& v : rec.samples) v += g(rng);
  const auto found = detect_pulses(rec, kT);
  REQUIRE(found.n_sweeps == 3);
  REQUIRE(found.empty_sweeps == std::vector<std::size_t>{1});
  REQUIRE(found.events.size() == 4);
}

TEST_CASE("pulses closer than a 3 dB valley merge, wider ones split", "[sensing_dsp]") {
  const double fs = 400e6;
  const double s = 5e-9;
  // Each of two equal Gaussians d apart contributes exp(-d^2 / 8 s^2) at the
  // midpoint. Valley 0.6 of the peaks keeps two maxima that must merge;
  // valley 0.4 is below the 3 dB criterion.
  const double d_merge = 2.0 * s * std::sqrt(2.0 * std::log(1.0 / 0.30));
  const double d_split = 2.0 * s * std::sqrt(2.0 * std::log(1.0 / 0.20));
  const auto merged = detect_pulses(pulses(fs, 1, {{40e-9, 1.0, s}, {2e-6, 1.0, s}, {2e-6 + d_merge, 1.0, s}}), kT);
  const auto split = detect_pulses(pulses(fs, 1, {{40e-9, 1.0, s}, {2e-6, 1.0, s}, {2e-6 + d_split, 1.0, s}}), kT);
  REQUIRE(merged.events.size() == 2);
  REQUIRE(split.events.size() == 3);
}

TEST_CASE("fttm_estimate applies the linear frequency-to-time law exactly", "[sensing_dsp][oracle]") {
  auto cal = default_cal();
  cal.reference_delay_s = 9.6e-9;
  cal.offset_hz = 0.25e9;
  std::vector<PulseEvent> evs;
  const std::vector<double> truth{0.3e9, 1.7e9, 4.2e9};
  for (std::size_t k = 0; k < 3; ++k) {
    const double t0 = 0.7e-9 + static_cast<double>(k) * kT;
    evs.push_back({t0 + cal.reference_delay_s, 1.0, 10e-9, k, true});
    evs.push_back({t0 + kT * (truth[k] - cal.offset_hz) / kFb, 1.0, 10e-9, k, false});
  }
  const auto est = fttm_estimate(evs, cal);
  REQUIRE(est.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    REQUIRE(est[k].calibrated);
    REQUIRE_THAT(est[k].freq_hz, WithinAbs(truth[k], 1e-3));
  }

  // Trigger mode: every event is a signal and t0 is the sweep start.
  cal.mode = ReferenceMode::trigger;
  cal.trigger_t0_offset_s = 0.0;
  const std::vector<PulseEvent> trig{{1e-6, 1.0, 10e-9, 0, false}, {kT + 3e-6, 1.0, 10e-9, 1, false}};
  const auto et = fttm_estimate(trig, cal);
  REQUIRE_THAT(et[0].freq_hz, WithinAbs(0.25e9 + 1.5e9, 1e-3));
  REQUIRE_THAT(et[1].freq_hz, WithinAbs(0.25e9 + 4.5e9, 1e-3));

  // A pulse-mode sweep without a reference is flagged uncalibrated.
  cal.mode = ReferenceMode::pulse;
  REQUIRE_FALSE(fttm_estimate({{1e-6, 1.0, 10e-9, 0, false}}, cal)[0].calibrated);
}

TEST_CASE("reference delay calibration recovers an injected delay", "[sensing_dsp][oracle]") {
  const auto cal = default_cal();
  // Delays keep the whole reference pulse inside its sweep window.
  for (double delay : {30e-9, 45.5e-9, 60e-9}) {
    const auto found = detect_pulses(pulses(200e6, 3, fttm_train(3, 3e9, delay, 8e-9)), kT);
    REQUIRE_THAT(calibrate_reference_delay(found.events, cal, 3e9), WithinAbs(delay, 0.2e-9));
  }
  REQUIRE(std::isnan(calibrate_reference_delay({}, cal, 3e9)));
}

TEST_CASE("spectrogram columns map time to frequency and the ridge follows the tone", "[sensing_dsp][oracle]") {
  const double fs = 100e6;
  const auto rec = pulses(fs, 4, fttm_train(4, 2e9, 0.0, 20e-9));
  const double bin = kFb / (kT * fs);
  const auto cal = default_cal();
  SpectrogramOptions opt;
  opt.blank_reference_s = 60e-9;
  const auto sg = assemble_spectrogram(rec, kT, cal, opt);
  REQUIRE(sg.intensity.size() == 4);
  REQUIRE(sg.freq_axis_hz.size() == 400);
  REQUIRE_THAT(sg.freq_axis_hz[1] - sg.freq_axis_hz[0], WithinRel(bin, 1e-12));
  REQUIRE_THAT(sg.reference_blank_hz, WithinRel(90e6, 1e-12));
  REQUIRE(sg.intensity[0][0] == 0.0);
  for (std::size_t k = 0; k < 4; ++k) REQUIRE_THAT(sg.time_axis_s[k], WithinAbs(static_cast<double>(k) * kT, 1e-15));
  for (const auto& r : spectrogram_ridge(sg)) {
    REQUIRE(r.has_value());
    REQUIRE_THAT(*r, WithinAbs(2e9, 0.5 * bin));
  }
  REQUIRE_THROWS_AS(assemble_spectrogram(pulses(fs, 1, {}), 2 * kT, cal), Error);
}

TEST_CASE("resolution study loses two close lines as the ADC rate drops", "[sensing_dsp][scaling]") {
  // 30 ns apart at 5 ns width: 45 MHz between lines.
  std::vector<Pulse> ps;
  for (std::size_t k = 0; k < 3; ++k) {
    const double t0 = static_cast<double>(k) * kT;
    ps.push_back({t0 + 40e-9, 1.0, 5e-9});
    ps.push_back({t0 + 2e-6, 1.0, 5e-9});
    ps.push_back({t0 + 2.03e-6, 1.0, 5e-9});
  }
  const auto rec = pulses(400e6, 3, ps);
  auto cal = default_cal();
  cal.reference_delay_s = 40e-9;
  const auto rows = resolution_study(rec, {400e6, 100e6, 10e6}, cal, {3e9, 3.045e9});
  REQUIRE(rows.size() == 3);
  REQUIRE(rows[0].resolved);
  REQUIRE(rows[1].resolved);
  REQUIRE_FALSE(rows[2].resolved);
  REQUIRE(rows[0].ridge_error_hz < 5e6);
}

TEST_CASE("detector rejects invalid options", "[sensing_dsp][errors]") {
  const auto rec = pulses(100e6, 1, {});
  DetectOptions bad;
  bad.threshold_frac = 1.2;
  REQUIRE_THROWS_AS(detect_pulses(rec, kT, bad), Error);
  REQUIRE_THROWS_AS(detect_pulses(rec, 0.0), Error);
  auto cal = default_cal();
  cal.period_s = 0.0;
  REQUIRE_THROWS_AS(fttm_estimate({}, cal), Error);
}

TEST_CASE("sensing chain measures a 1 GHz tone within 10 MHz", "[sensing_dsp][chain]") {
  SensingSetup ss;
  ss.tx.ask.bits = gen_prbs(1, 32767, 15);
  auto cal = sensing_calibration(ss);
  REQUIRE(cal.mode == ReferenceMode::pulse);
  const DetectOptions det;
  cal.reference_delay_s = detail::measure_reference_delay(ss, cal, det, 100e6, 3e9);
  SutSpec sut;
  sut.freqs_hz = {1e9};
  const auto rec = sense_pd1(ss, sut, 3);
  const auto est = fttm_estimate(detect_pulses(decimate(rec, decimation_factor(rec.timebase.sample_rate_hz, 100e6)), kT, det).events, cal);
  REQUIRE(est.size() >= 2);
  for (const auto& e : est) REQUIRE_THAT(e.freq_hz, WithinAbs(1e9, 10e6));
}

TEST_CASE("an offset gain window reads high tones against the trigger", "[sensing_dsp][chain]") {
  SensingSetup ss;
  ss.tx.ask.bits = gen_prbs(1, 32767, 15);
  ss.sbs.pump_offset_hz = 2e9;
  const auto cal = sensing_calibration(ss);
  REQUIRE(cal.mode == ReferenceMode::trigger);
  SutSpec sut;
  sut.freqs_hz = {7e9};
  const auto rec = sense_pd1(ss, sut, 3);
  const auto est = fttm_estimate(detect_pulses(decimate(rec, decimation_factor(rec.timebase.sample_rate_hz, 100e6)), kT).events, cal);
  REQUIRE(est.size() >= 2);
  for (const auto& e : est) REQUIRE_THAT(e.freq_hz, WithinAbs(7e9, 10e6));
}
