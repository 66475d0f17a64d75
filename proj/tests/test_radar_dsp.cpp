#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "jrcss/chains.hpp"

using namespace jrcss;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RadarSetup make_setup(double baud = 0.5e9) {
  RadarSetup s;
  s.tx.ask.baud_rate = baud;
  s.tx.ask.bits = gen_prbs(1, 32767, 15);
  s.rx = RfResponseSpec{5.85e9, 14.5e9, 40.0, -1.0, 7.8e9, std::nullopt};
  return s;
}

RangeEstimate measure(const RadarSetup& s, const RealWaveform& tx, std::size_t n_peaks,
                      WindowKind win = WindowKind::rectangular) {
  RangeProfileOptions opt;
  opt.window = win;
  return estimate_range(range_profile(radar_beat(s, tx, 0.0, 0), s.tx.chirp, 40e6, opt), n_peaks);
}

IsarImage isar(const RadarSetup& s, const RealWaveform& tx, std::size_t m = 64, double acc = 2.2, double period = 24.56) {
  std::vector<BeatSweep> sweeps(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double ts = -0.5 * acc + acc * static_cast<double>(i) / static_cast<double>(m);
    sweeps[i] = {ts, radar_beat(s, tx, ts, 0)};
  }
  IsarOptions opt;
  opt.max_range_m = 3.0;
  return isar_image(sweeps, s.tx.chirp, 10.8e9, acc, period, opt);
}

}  // namespace

TEST_CASE("beat-to-range law matches the closed form on random geometries", "[radar_dsp][oracle]") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ub(0.5e9, 8e9), ut(1e-6, 20e-6), ur(0.1, 50.0);
  for (int i = 0; i < 100; ++i) {
    ChirpPlan c{10e9, 10e9 - ub(rng), ut(rng), 1};
    const double r = ur(rng);
    const double fb = 2.0 * r * c.bandwidth_hz() / (kSpeedOfLight * c.period_s);
    REQUIRE_THAT(range_to_beat(r, c), WithinRel(fb, 1e-12));
    REQUIRE_THAT(beat_to_range(fb, c), WithinRel(r, 1e-12));
  }
}

TEST_CASE("de-chirped range matches geometry for 100 random targets", "[radar_dsp][oracle]") {
  auto s = make_setup();
  const auto tx = tx_ask_lfm(s.tx, sweep_timebase(s.tx, 0));
  std::mt19937_64 rng(22);
  // Ranges whose beats fall in the flat part of the ADC anti-alias filter.
  std::uniform_real_distribution<double> ur(0.4, 1.6);
  const double half_bin = 0.5 * kSpeedOfLight / (2.0 * s.tx.chirp.bandwidth_hz());
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    s.scene.scatterers = {{0.0, 0.0, 1.0}};
    s.scene.turntable.center_range_m = ur(rng);
    const auto est = measure(s, tx, 1);
    REQUIRE(est.peaks.size() == 1);
    worst = std::max(worst, std::abs(est.peaks[0].range_m - s.scene.turntable.center_range_m));
  }
  INFO("worst range error " << worst);
  REQUIRE(worst <= half_bin);
}

TEST_CASE("single-target 3-dB width is one range bin", "[radar_dsp]") {
  auto s = make_setup();
  s.scene.scatterers = {{}};
  const auto tx = tx_ask_lfm(s.tx, sweep_timebase(s.tx, 0));
  const auto est = measure(s, tx, 1);
  const double bin = kSpeedOfLight / (2.0 * s.tx.chirp.bandwidth_hz());
  // Rectangular window: 3-dB width of a sinc is 0.886 bins.
  REQUIRE_THAT(est.peaks[0].width_3db_m, WithinRel(0.886 * bin, 0.1));
  REQUIRE_THAT(range_to_beat(est.peaks[0].width_3db_m, s.tx.chirp), WithinRel(0.886 * 0.25e6, 0.1));
}

TEST_CASE("range resolution scales with window and bandwidth", "[radar_dsp][scaling]") {
  auto s = make_setup();
  s.scene.scatterers = {{}};
  const auto tx = tx_ask_lfm(s.tx, sweep_timebase(s.tx, 0));
  const double w_rect = measure(s, tx, 1).peaks[0].width_3db_m;
  const double w_hann = measure(s, tx, 1, WindowKind::hann).peaks[0].width_3db_m;
  // Hann / rectangular 3-dB width ratio is 1.44 / 0.886.
  REQUIRE_THAT(w_hann / w_rect, WithinRel(1.44 / 0.886, 0.08));

  auto half = s;
  half.tx.chirp.f_stop_hz = 7.8e9;  // 3 GHz sweep
  const auto tx_half = tx_ask_lfm(half.tx, sweep_timebase(half.tx, 0));
  const double w_half = measure(half, tx_half, 1).peaks[0].width_3db_m;
  REQUIRE_THAT(w_half / w_rect, WithinRel(2.0, 0.1));
}

TEST_CASE("two targets 13 cm apart are separated", "[radar_dsp]") {
  auto s = make_setup();
  s.scene.scatterers = {{0.0, 0.0, 1.0}, {0.0, 0.13, 1.0}};
  const auto tx = tx_ask_lfm(s.tx, sweep_timebase(s.tx, 0));
  auto peaks = measure(s, tx, 2).peaks;
  REQUIRE(peaks.size() == 2);
  REQUIRE_THAT(std::abs(peaks[0].range_m - peaks[1].range_m), WithinAbs(0.13, 0.007));
}

TEST_CASE("an ADC below the beat Nyquist rate is reported", "[radar_dsp][errors]") {
  auto s = make_setup();
  s.scene.scatterers = {{}};
  const auto tx = tx_ask_lfm(s.tx, sweep_timebase(s.tx, 0));
  const auto beat = radar_beat(s, tx, 0.0, 0);
  try {
    range_profile(beat, s.tx.chirp, 4e6);
    FAIL("expected adc-undersampled");
  } catch (const Error& e) {
    REQUIRE(e.code() == "adc-undersampled");
  }
}

TEST_CASE("ISAR cross-range cell follows lambda / (2 delta_theta)", "[radar_dsp][isar]") {
  IsarImage img;
  img.meta.lambda_m = kSpeedOfLight / 10.8e9;
  img.meta.delta_theta_rad = 0.5628;
  REQUIRE_THAT(img.crossrange_cell_m(), WithinRel(0.02466, 1e-3));
  img.meta.delta_theta_rad = 0.2814;
  REQUIRE_THAT(img.crossrange_cell_m(), WithinRel(0.04932, 1e-3));
}

TEST_CASE("ISAR point response has the theoretical resolutions", "[radar_dsp][isar]") {
  auto s = make_setup();
  s.scene.turntable.rotation_period_s = 24.56;
  s.scene.scatterers = {{}};
  const auto tx = tx_ask_lfm(s.tx, sweep_timebase(s.tx, 0));
  const auto img = isar(s, tx);
  REQUIRE_THAT(img.meta.delta_theta_rad, WithinRel(0.5628, 1e-3));
  const auto psf = measure_psf(img);
  REQUIRE_THAT(psf.range_res_3db_m, WithinRel(0.025, 0.2));
  REQUIRE_THAT(psf.crossrange_res_3db_m, WithinRel(0.0247, 0.2));
  REQUIRE_THAT(psf.peak_range_m, WithinAbs(1.47, 0.005));
  REQUIRE_THAT(psf.peak_crossrange_m, WithinAbs(0.0, 0.005));
}

TEST_CASE("ISAR images a positive cross-range offset at positive cross-range", "[radar_dsp][isar]") {
  auto s = make_setup();
  s.scene.turntable.rotation_period_s = 24.56;
  s.scene.scatterers = {{0.05, 0.0, 1.0}};
  const auto tx = tx_ask_lfm(s.tx, sweep_timebase(s.tx, 0));
  const auto psf = measure_psf(isar(s, tx));
  REQUIRE_THAT(psf.peak_crossrange_m, WithinAbs(0.05, 0.0125));
}

TEST_CASE("ISAR separates two points two cells apart in both directions", "[radar_dsp][isar]") {
  auto s = make_setup();
  s.scene.turntable.rotation_period_s = 24.56;
  const auto tx = tx_ask_lfm(s.tx, sweep_timebase(s.tx, 0));

  s.scene.scatterers = {{0.0, -0.025, 1.0}, {0.0, 0.025, 1.0}};
  const auto img_r = isar(s, tx);
  const double v_range = valley_depth_db(img_r, std::hypot(0.0, 1.445), 0.0, 1.495, 0.0);
  s.scene.scatterers = {{-0.025, 0.0, 1.0}, {0.025, 0.0, 1.0}};
  const auto img_x = isar(s, tx);
  const double r = std::hypot(0.025, 1.47);
  const double v_cross = valley_depth_db(img_x, r, -0.025, r, 0.025);
  INFO("range valley " << v_range << " dB, cross-range valley " << v_cross << " dB");
  REQUIRE(v_range >= 3.0);
  REQUIRE(v_cross >= 3.0);
}

TEST_CASE("ISAR input validation", "[radar_dsp][isar][errors]") {
  ChirpPlan c;
  std::vector<BeatSweep> few(4, BeatSweep{0.0, RealWaveform::zeros(Timebase{40e9, 160000, 0.0})});
  REQUIRE_THROWS_AS(isar_image(few, c, 10.8e9, 2.2, 24.56), Error);
  std::vector<BeatSweep> same(8, BeatSweep{0.0, RealWaveform::zeros(Timebase{40e9, 160000, 0.0})});
  REQUIRE_THROWS_AS(isar_image(same, c, 10.8e9, 2.2, 24.56), Error);
}
