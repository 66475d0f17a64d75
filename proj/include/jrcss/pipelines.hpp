#pragma once

// Scenario-driven pipelines. Each one writes its artifacts into the output
// directory and returns metrics that are a pure function of the scenario.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "jrcss/parallel.hpp"
#include "jrcss/scenario.hpp"

namespace jrcss {

struct RunReport {
  std::string scenario_digest;
  std::string pipeline;
  json metrics = json::object();
  std::vector<std::string> artifacts;
  double wall_time_s = 0.0;

  /// Deterministic part of the report (what goes into metrics.json).
  json metrics_document() const {
    return {{"pipeline", pipeline}, {"scenario_digest", scenario_digest}, {"metrics", metrics}, {"artifacts", artifacts}};
  }
};

namespace io {

/// Shortest round-trip decimal form.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// JSON value for a double; non-finite values become null.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class Csv {
 public:
  explicit Csv(const std::filesystem::path& p) : out_(p) {
    if (!out_) fail_config("output-not-writable", p.string());
  }
  Csv& header(std::initializer_list<const char*> cols) {
    bool first = true;
    for (const char* c : cols) {
      if (!first) out_ << ',';
      out_ << c;
      first = false;
    }
    out_ << '\n';
    return *this;
  }
  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((write_cell(v, first)), ...);
    out_ << '\n';
  }
  std::ofstream& stream() { return out_; }

 private:
  void write_cell(double v, bool& first) { sep(first) << num(v); }
  void write_cell(int v, bool& first) { sep(first) << v; }
  void write_cell(std::size_t v, bool& first) { sep(first) << v; }
  void write_cell(bool v, bool& first) { sep(first) << (v ? "true" : "false"); }
  void write_cell(const std::string& v, bool& first) { sep(first) << v; }
  void write_cell(const char* v, bool& first) { sep(first) << v; }
  std::ofstream& sep(bool& first) {
    if (!first) out_ << ',';
    first = false;
    return out_;
  }
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) fail_config("output-not-writable", p.string());
  out << j.dump(2) << '\n';
}

}  // namespace io

namespace detail {

class ArtifactSink {
 public:
  ArtifactSink(std::filesystem::path dir, RunReport& report) : dir_(std::move(dir)), report_(report) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail_config("output-not-writable", dir_.string() + ": " + ec.message());
  }
  std::filesystem::path add(const std::string& name) {
    report_.artifacts.push_back(name);
    return dir_ / name;
  }

 private:
  std::filesystem::path dir_;
  RunReport& report_;
};

inline TxSetup make_tx(const Scenario& sc) {
  TxSetup tx;
  tx.chirp = sc.chirp;
  tx.ask = sc.ask;
  tx.modulator = sc.modulator;
  tx.sim_rate_hz = sc.sim_sample_rate_hz;
  return tx;
}

inline RadarSetup make_radar(const Scenario& sc) {
  RadarSetup r;
  r.tx = make_tx(sc);
  r.scene = sc.scene;
  r.rx = sc.rf;
  r.if_lowpass_hz = sc.radar.if_lowpass_hz;
  return r;
}

inline SensingSetup make_sensing(const Scenario& sc) {
  SensingSetup s;
  s.tx = make_tx(sc);
  s.sbs = sc.sbs;
  s.dsb_suppression_db = sc.sense.dsb_suppression_db;
  s.pd1_lowpass_hz = sc.sense.pd1_lowpass_hz;
  s.record_rate_hz = sc.sense.record_rate_hz;
  return s;
}

inline FttmCalibration make_calibration(const Scenario& sc, const SensingSetup& ss) {
  auto cal = sensing_calibration(ss);
  if (sc.sense.reference == ReferenceChoice::pulse) cal.mode = ReferenceMode::pulse;
  if (sc.sense.reference == ReferenceChoice::trigger) cal.mode = ReferenceMode::trigger;
  return cal;
}

inline DetectOptions make_detect(const Scenario& sc) {
  DetectOptions d;
  d.threshold_frac = sc.sense.threshold_frac;
  return d;
}

/// Adds white Gaussian noise at `snr_db` below the record peak.
inline RealWaveform add_adc_noise(const RealWaveform& w, double snr_db, std::uint64_t seed) {
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  const double sigma = peak * std::pow(10.0, -snr_db / 20.0);
  RealWaveform out = w;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  for (auto& v : out.samples) v += g(rng);
  return out;
}

/// Reference-pulse delay measured on a noiseless capture of a known tone at
/// the same ADC rate (instrument calibration).
inline double measure_reference_delay(const SensingSetup& ss, const FttmCalibration& cal, const DetectOptions& det,
                                      double adc_rate_hz, double tone_hz) {
  SutSpec tone;
  tone.kind = SutKind::tone;
  tone.freqs_hz = {tone_hz};
  const auto rec = sense_pd1(ss, tone, 2);
  const auto adc = decimate(rec, decimation_factor(rec.timebase.sample_rate_hz, adc_rate_hz));
  const double d = calibrate_reference_delay(detect_pulses(adc, cal.period_s, det).events, cal, tone_hz);
  if (!std::isfinite(d)) fail_numerical("calibration-failed", "no reference/signal pulse pair in the calibration capture");
  return d;
}

inline double calibration_tone(const Scenario& sc, const FttmCalibration& cal) {
  return sc.sense.calibration_tone_hz > 0.0 ? sc.sense.calibration_tone_hz : cal.offset_hz + 0.5 * cal.bandwidth_hz;
}

/// Mean t0 position within the sweep implied by the detected references.
inline double reference_t0_offset(const std::vector<PulseEvent>& events, const FttmCalibration& cal) {
  if (cal.mode == ReferenceMode::trigger) return cal.trigger_t0_offset_s;
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& e : events) {
    if (!e.is_reference) continue;
    s += e.time_s - cal.reference_delay_s - (cal.sweep_origin_s + static_cast<double>(e.sweep_index) * cal.period_s);
    ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

inline void write_spectrogram(const Spectrogram& sg, const std::filesystem::path& long_form,
                              const std::filesystem::path& matrix) {
  io::Csv lf(long_form);
  lf.header({"time_s", "freq_hz", "intensity"});
  for (std::size_t c = 0; c < sg.intensity.size(); ++c)
    for (std::size_t j = 0; j < sg.freq_axis_hz.size(); ++j) lf.row(sg.time_axis_s[c], sg.freq_axis_hz[j], sg.intensity[c][j]);
  io::Csv m(matrix);
  auto& os = m.stream();
  os << "time_s\\freq_hz";
  for (double f : sg.freq_axis_hz) os << ',' << io::num(f);
  os << '\n';
  for (std::size_t c = 0; c < sg.intensity.size(); ++c) {
    os << io::num(sg.time_axis_s[c]);
    for (double v : sg.intensity[c]) os << ',' << io::num(v);
    os << '\n';
  }
}

inline json events_json(const std::vector<PulseEvent>& evs) {
  json a = json::array();
  for (const auto& e : evs)
    a.push_back({{"time_s", e.time_s},
                 {"peak_amplitude", e.peak_amplitude},
                 {"width_s", e.width_s},
                 {"sweep_index", e.sweep_index},
                 {"is_reference", e.is_reference}});
  return a;
}

inline std::size_t sense_sweeps(const Scenario& sc) {
  if (sc.sense.n_sweeps > 0) return sc.sense.n_sweeps;
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(sc.sut.duration_s / sc.chirp.period_s - 1e-9)));
}

/// PD1 record for the scenario. With separate records each tone of a
/// multitone SUT gets its own block of sweeps, placed back to back in time.
inline RealWaveform sense_record(const Scenario& sc, const SensingSetup& ss, std::size_t n_sweeps, Diagnostics* diag) {
  if (!sc.sense.separate_records || sc.sut.kind != SutKind::multitone || sc.sut.freqs_hz.size() < 2)
    return sense_pd1(ss, sc.sut, n_sweeps, 0, diag);
  RealWaveform all;
  for (std::size_t i = 0; i < sc.sut.freqs_hz.size(); ++i) {
    SutSpec tone = sc.sut;
    tone.kind = SutKind::tone;
    tone.freqs_hz = {sc.sut.freqs_hz[i]};
    const auto rec = sense_pd1(ss, tone, n_sweeps, i * n_sweeps, i == 0 ? diag : nullptr);
    if (i == 0) {
      all = rec;
    } else {
      all.samples.insert(all.samples.end(), rec.samples.begin(), rec.samples.end());
      all.timebase.n_samples = all.samples.size();
    }
  }
  return all;
}

/// Expected spectral lines for tone-like SUTs (empty otherwise).
inline std::vector<double> expected_lines(const SutSpec& sut) {
  if (sut.kind == SutKind::tone) return {sut.freqs_hz.front()};
  if (sut.kind == SutKind::multitone) return sut.freqs_hz;
  return {};
}

/// Block maxima of one sweep of `env`; used to characterize the slow trend.
inline std::vector<double> block_maxima(const RealWaveform& env, std::size_t first, std::size_t count, std::size_t blocks) {
  std::vector<double> m(blocks, -std::numeric_limits<double>::infinity());
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t i = first + b * count / blocks; i < first + (b + 1) * count / blocks; ++i)
      m[b] = std::max(m[b], env.samples[i]);
  return m;
}

inline bool strictly_monotone(const std::vector<double>& v) {
  bool inc = true, dec = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    inc = inc && v[i] > v[i - 1];
    dec = dec && v[i] < v[i - 1];
  }
  return v.size() >= 2 && (inc || dec);
}

// ---------------------------------------------------------------------------

inline void run_generate(const Scenario& sc, RunReport& rep, ArtifactSink& out) {
  const auto tx = make_tx(sc);
  const auto tb = Timebase::covering(sc.sim_sample_rate_hz, static_cast<double>(sc.chirp.n_periods) * sc.chirp.period_s);
  const auto w = tx_ask_lfm(tx, tb);
  const auto spec = fft_spectrum(w, WindowKind::hann);

  // Occupied band: -20 dB points of the 20-MHz max-hold spectrum.
  const double df = spec.freq_axis_hz[1] - spec.freq_axis_hz[0];
  const auto group = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(20e6 / df)));
  std::vector<double> f, m;
  for (std::size_t i = 0; i + group <= spec.freq_axis_hz.size(); i += group) {
    double mx = kFloorDb;
    for (std::size_t j = i; j < i + group; ++j) mx = std::max(mx, spec.magnitude_db[j]);
    f.push_back(spec.freq_axis_hz[i + group / 2]);
    m.push_back(mx);
  }
  const auto pk = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
  std::size_t lo = pk, hi = pk;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] >= m[pk] - 20.0) {
      lo = std::min(lo, i);
      hi = std::max(hi, i);
    }

  {
    io::Csv c(out.add("tx_spectrum.csv"));
    c.header({"freq_hz", "magnitude_db"});
    for (std::size_t i = 0; i < f.size(); ++i) c.row(f[i], m[i]);
  }
  {
    io::Csv c(out.add("tx_waveform.csv"));
    c.header({"time_s", "ask_lfm"});
    const std::size_t n = std::min<std::size_t>(w.size(), static_cast<std::size_t>(std::llround(50e-9 * w.timebase.sample_rate_hz)));
    for (std::size_t i = 0; i < n; ++i) c.row(w.timebase.time_at(i), w.samples[i]);
  }
  {
    io::Csv c(out.add("bits.csv"));
    c.header({"index", "bit"});
    const auto n = std::min<std::size_t>(sc.ask.bits.size(),
                                         static_cast<std::size_t>(std::floor(tb.duration() * sc.ask.baud_rate + 1e-9)));
    for (std::size_t i = 0; i < n; ++i) c.row(i, static_cast<int>(sc.ask.bits[i]));
  }
  rep.metrics["band_low_hz"] = f[lo];
  rep.metrics["band_high_hz"] = f[hi];
  rep.metrics["band_center_hz"] = 0.5 * (f[lo] + f[hi]);
  rep.metrics["chirp_bandwidth_hz"] = sc.chirp.bandwidth_hz();
  rep.metrics["n_samples"] = w.size();
  rep.metrics["rms"] = std::sqrt(mean_power(std::span<const double>(w.samples)));
}

inline void run_radar_range(const Scenario& sc, RunReport& rep, ArtifactSink& out) {
  const auto rs = make_radar(sc);
  const auto tx = tx_ask_lfm(rs.tx, sweep_timebase(rs.tx, 0));
  const std::size_t n_peaks = sc.radar.n_peaks ? sc.radar.n_peaks : std::max<std::size_t>(1, sc.scene.scatterers.size());
  double step = sc.radar.slow_time_step_s;
  if (step == 0.0 && sc.scene.turntable.rotation_period_s > 0.0)
    step = sc.scene.turntable.rotation_period_s / static_cast<double>(sc.radar.n_sweeps);
  RangeProfileOptions opt;
  opt.window = sc.radar.window;
  opt.zero_pad = sc.radar.zero_pad;

  const std::size_t n_sw = sc.radar.n_sweeps, n_rep = sc.repeats;
  std::vector<RangeEstimate> est(n_sw * n_rep);
  std::vector<RangeProfile> first_profile(1);
  parallel_for(n_sw * n_rep, [&](std::size_t idx) {
    const std::size_t k = idx % n_sw;
    const double ts = static_cast<double>(k) * step;
    const auto beat = radar_beat(rs, tx, ts, split_seed(sc.seed, 1, idx));
    auto prof = range_profile(beat, sc.chirp, sc.radar.adc_rate_hz, opt);
    est[idx] = estimate_range(prof, n_peaks);
    if (idx == 0) first_profile[0] = std::move(prof);
  });

  io::Csv c(out.add("ranging.csv"));
  c.header({"repeat", "sweep", "slow_time_s", "peak", "true_range_m", "est_range_m", "error_m", "magnitude_db", "width_3db_m"});
  double max_abs = 0.0, sum = 0.0, sum2 = 0.0, sum_abs = 0.0;
  std::size_t n = 0, incomplete = 0;
  std::vector<double> errors;
  for (std::size_t r = 0; r < n_rep; ++r) {
    for (std::size_t k = 0; k < n_sw; ++k) {
      const double ts = static_cast<double>(k) * step;
      auto truth = scatterer_ranges(sc.scene, ts);
      std::sort(truth.begin(), truth.end());
      auto peaks = est[r * n_sw + k].peaks;
      if (est[r * n_sw + k].incomplete) ++incomplete;
      std::sort(peaks.begin(), peaks.end(), [](const RangePeak& a, const RangePeak& b) { return a.range_m < b.range_m; });
      for (std::size_t p = 0; p < peaks.size(); ++p) {
        const bool paired = peaks.size() == truth.size();
        const double t = paired ? truth[p] : std::numeric_limits<double>::quiet_NaN();
        const double e = peaks[p].range_m - t;
        c.row(r, k, ts, p, t, peaks[p].range_m, e, peaks[p].magnitude_db, peaks[p].width_3db_m);
        if (paired) {
          max_abs = std::max(max_abs, std::abs(e));
          sum += e;
          sum2 += e * e;
          sum_abs += std::abs(e);
          errors.push_back(e);
          ++n;
        }
      }
    }
  }
  {
    io::Csv p(out.add("profile.csv"));
    p.header({"range_m", "beat_hz", "magnitude_db"});
    const auto& pr = first_profile[0];
    for (std::size_t i = 0; i < pr.range_axis_m.size(); ++i) p.row(pr.range_axis_m[i], pr.beat_freq_axis_hz[i], pr.magnitude_db[i]);
  }
  const auto& p0 = est[0].peaks;
  auto& m = rep.metrics;
  m["n_sweeps"] = n_sw;
  m["repeats"] = n_rep;
  m["slow_time_step_s"] = step;
  m["incomplete_sweeps"] = incomplete;
  m["paired_estimates"] = n;
  if (!p0.empty()) {
    m["range_m"] = p0.front().range_m;
    m["beat_hz"] = p0.front().beat_hz;
    m["width_3db_m"] = p0.front().width_3db_m;
    m["width_3db_hz"] = range_to_beat(p0.front().width_3db_m, sc.chirp);
  }
  if (n) {
    const double mean = sum / static_cast<double>(n);
    m["max_abs_range_error_m"] = max_abs;
    m["mean_range_error_m"] = mean;
    m["mean_abs_range_error_m"] = sum_abs / static_cast<double>(n);
    m["std_range_error_m"] = std::sqrt(std::max(0.0, sum2 / static_cast<double>(n) - mean * mean));
  }
  if (p0.size() == 2 && sc.scene.scatterers.size() == 2) {
    auto truth = scatterer_ranges(sc.scene, 0.0);
    const double sep = std::abs(p0[0].range_m - p0[1].range_m);
    const double true_sep = std::abs(truth[0] - truth[1]);
    m["separation_m"] = sep;
    m["true_separation_m"] = true_sep;
    m["separation_error_m"] = sep - true_sep;
  }
}

inline void run_radar_isar(const Scenario& sc, RunReport& rep, ArtifactSink& out) {
  if (!(sc.scene.turntable.rotation_period_s > 0.0))
    fail_physics("static-scene", "scene.rotation_period_s must be > 0 for ISAR");
  const auto rs = make_radar(sc);
  const auto tx = tx_ask_lfm(rs.tx, sweep_timebase(rs.tx, 0));
  const std::size_t m = sc.radar.isar_sweeps;
  const double acc = sc.radar.accumulation_s;
  std::vector<BeatSweep> sweeps(m);
  parallel_for(m, [&](std::size_t i) {
    const double ts = -0.5 * acc + acc * static_cast<double>(i) / static_cast<double>(m);
    sweeps[i] = {ts, radar_beat(rs, tx, ts, split_seed(sc.seed, 2, i))};
  });
  IsarOptions opt;
  opt.adc_rate_hz = sc.radar.adc_rate_hz;
  opt.range_window = sc.radar.window;
  opt.doppler_window = sc.radar.doppler_window;
  opt.max_range_m = sc.radar.max_range_m;
  const double fc = sc.radar.center_freq_hz > 0.0 ? sc.radar.center_freq_hz : sc.chirp.center_hz() + sc.ask.carrier_hz;
  const auto img = isar_image(sweeps, sc.chirp, fc, acc, sc.scene.turntable.rotation_period_s, opt);

  {
    io::Csv c(out.add("isar_image.csv"));
    auto& os = c.stream();
    os << "range_m\\crossrange_m";
    for (double x : img.crossrange_axis_m) os << ',' << io::num(x);
    os << '\n';
    for (std::size_t r = 0; r < img.range_axis_m.size(); ++r) {
      os << io::num(img.range_axis_m[r]);
      for (double v : img.intensity_db[r]) os << ',' << io::num(v);
      os << '\n';
    }
  }
  auto& mt = rep.metrics;
  mt["center_freq_hz"] = fc;
  mt["delta_theta_rad"] = img.meta.delta_theta_rad;
  mt["crossrange_cell_m"] = img.crossrange_cell_m();
  mt["range_cell_m"] = kSpeedOfLight / (2.0 * sc.chirp.bandwidth_hz());
  mt["n_sweeps"] = m;
  json psf = json::object();
  if (sc.scene.scatterers.size() == 1) {
    const auto p = measure_psf(img);
    psf = {{"range_res_3db_m", p.range_res_3db_m},
           {"crossrange_res_3db_m", p.crossrange_res_3db_m},
           {"peak_range_m", p.peak_range_m},
           {"peak_crossrange_m", p.peak_crossrange_m}};
    mt["range_res_3db_m"] = p.range_res_3db_m;
    mt["crossrange_res_3db_m"] = p.crossrange_res_3db_m;
  } else if (sc.scene.scatterers.size() == 2) {
    // Predicted image positions at the aperture center.
    const double th = sc.scene.turntable.angle_at(0.0);
    double r[2], x[2];
    for (int i = 0; i < 2; ++i) {
      const auto& s = sc.scene.scatterers[static_cast<std::size_t>(i)];
      x[i] = s.x_m * std::cos(th) - s.y_m * std::sin(th);
      const double yr = s.x_m * std::sin(th) + s.y_m * std::cos(th);
      r[i] = std::hypot(x[i], sc.scene.turntable.center_range_m + yr);
    }
    const double v = valley_depth_db(img, r[0], x[0], r[1], x[1]);
    psf = {{"valley_db", v}};
    mt["valley_db"] = v;
  }
  io::write_json(out.add("psf.json"), psf);
}

inline void run_comm(const Scenario& sc, RunReport& rep, ArtifactSink& out) {
  CommSetup cs;
  cs.tx = make_tx(sc);
  cs.rx = sc.rf;
  cs.selfmix_lowpass_hz = sc.comm.selfmix_lowpass_hz;
  const auto cap = comm_capture(cs, sc.comm.n_sweeps, split_seed(sc.seed, 3));
  const auto env = decimate(cap.envelope, decimation_factor(sc.sim_sample_rate_hz, sc.comm.capture_rate_hz));
  const double baud = sc.ask.baud_rate;
  const auto comp = compensate_envelope(env, baud, sc.comm.trend_window_symbols,
                                        sc.comm.per_sweep_trend ? sc.chirp.period_s : 0.0);
  const auto ber = demod_ask(comp, baud, cap.bits);
  const auto eye = eye_diagram(comp, baud, &cap.bits);

  const auto per_sweep = static_cast<std::size_t>(std::llround(sc.chirp.period_s * env.timebase.sample_rate_hz));
  bool monotone = true;
  double ratio_db = 0.0;
  for (std::size_t k = 0; k < sc.comm.n_sweeps; ++k) {
    // The retrace at the sweep boundary is excluded from the trend check.
    const std::size_t guard = per_sweep / 50;
    const auto pre = block_maxima(env, k * per_sweep + guard, per_sweep - 2 * guard, 16);
    monotone = monotone && strictly_monotone(pre);
    if (k == 0) ratio_db = 20.0 * std::log10(pre.back() / pre.front());
  }
  const auto post = block_maxima(comp, 0, per_sweep, 16);
  const double post_spread_db =
      20.0 * std::log10(*std::max_element(post.begin(), post.end()) / *std::min_element(post.begin(), post.end()));

  io::write_json(out.add("ber.json"), {{"n_bits", ber.n_bits},
                                       {"n_errors", ber.n_errors},
                                       {"ber", ber.ber},
                                       {"threshold", ber.threshold_used},
                                       {"timing_offset_s", ber.timing_offset_used},
                                       {"eye_opening", eye.eye_opening}});
  {
    io::Csv c(out.add("eye.csv"));
    c.header({"trace", "sample", "time_s", "value"});
    const double dt = env.timebase.dt();
    for (std::size_t t = 0; t < std::min<std::size_t>(eye.trace_matrix.size(), 200); ++t)
      for (std::size_t j = 0; j < eye.trace_matrix[t].size(); ++j)
        c.row(t, j, static_cast<double>(j) * dt, eye.trace_matrix[t][j]);
  }
  {
    io::Csv c(out.add("compensated.csv"));
    c.header({"time_s", "envelope", "compensated"});
    for (std::size_t i = 0; i < per_sweep; ++i) c.row(env.timebase.time_at(i), env.samples[i], comp.samples[i]);
  }
  auto& m = rep.metrics;
  m["ber"] = ber.ber;
  m["n_bits"] = ber.n_bits;
  m["n_errors"] = ber.n_errors;
  m["eye_opening"] = eye.eye_opening;
  m["trend_monotone"] = monotone;
  m["trend_rise_db"] = ratio_db;
  m["compensated_spread_db"] = post_spread_db;
}

inline void run_sense(const Scenario& sc, RunReport& rep, ArtifactSink& out) {
  const auto ss = make_sensing(sc);
  auto cal = make_calibration(sc, ss);
  const auto det = make_detect(sc);
  Diagnostics diag;
  const std::size_t n_sweeps = sense_sweeps(sc);
  const auto rec = sense_record(sc, ss, n_sweeps, &diag);
  const auto adc = decimate(rec, decimation_factor(rec.timebase.sample_rate_hz, sc.sense.adc_rate_hz));
  if (cal.mode == ReferenceMode::pulse)
    cal.reference_delay_s = measure_reference_delay(ss, cal, det, sc.sense.adc_rate_hz, calibration_tone(sc, cal));

  struct Trial {
    DetectionResult found;
    std::vector<FrequencyEstimate> est;
  };
  std::vector<Trial> trials(sc.repeats);
  parallel_for(sc.repeats, [&](std::size_t r) {
    const auto rec_r = sc.sense.noise_snr_db ? add_adc_noise(adc, *sc.sense.noise_snr_db, split_seed(sc.seed, 4, r)) : adc;
    trials[r].found = detect_pulses(rec_r, cal.period_s, det);
    trials[r].est = fttm_estimate(trials[r].found.events, cal);
  });

  SpectrogramOptions so;
  so.t0_offset_s = reference_t0_offset(trials[0].found.events, cal);
  so.blank_reference_s = cal.mode == ReferenceMode::pulse ? sc.sense.blank_reference_s : 0.0;
  const auto rec0 = sc.sense.noise_snr_db ? add_adc_noise(adc, *sc.sense.noise_snr_db, split_seed(sc.seed, 4, 0)) : adc;
  const auto sg = assemble_spectrogram(rec0, cal.period_s, cal, so);
  write_spectrogram(sg, out.add("spectrogram.csv"), out.add("spectrogram_matrix.csv"));
  const auto ridge = spectrogram_ridge(sg);

  {
    io::Csv c(out.add("pd1_record.csv"));
    c.header({"time_s", "pd1"});
    for (std::size_t i = 0; i < rec0.size(); ++i) c.row(rec0.timebase.time_at(i), rec0.samples[i]);
  }
  io::write_json(out.add("pulses.json"), events_json(trials[0].found.events));

  const auto lines = expected_lines(sc.sut);
  json all = json::array();
  double s1 = 0.0, s2 = 0.0, max_err = 0.0;
  std::size_t n = 0, n_uncal = 0;
  // Per expected line: estimates assigned to the nearest line.
  std::vector<std::vector<double>> per_line(lines.size());
  for (std::size_t r = 0; r < trials.size(); ++r) {
    json row = json::array();
    for (const auto& e : trials[r].est) {
      row.push_back({{"freq_hz", e.freq_hz}, {"sweep_index", e.sweep_index}, {"time_s", e.time_s}, {"calibrated", e.calibrated}});
      if (!e.calibrated) {
        ++n_uncal;
        continue;
      }
      s1 += e.freq_hz;
      s2 += e.freq_hz * e.freq_hz;
      ++n;
      if (!lines.empty()) {
        std::size_t li = 0;
        for (std::size_t j = 1; j < lines.size(); ++j)
          if (std::abs(e.freq_hz - lines[j]) < std::abs(e.freq_hz - lines[li])) li = j;
        per_line[li].push_back(e.freq_hz);
        max_err = std::max(max_err, std::abs(e.freq_hz - lines[li]));
      }
    }
    all.push_back(row);
  }
  io::write_json(out.add("frequency_estimates.json"),
                 {{"reference_mode", cal.mode == ReferenceMode::pulse ? "pulse" : "trigger"},
                  {"reference_delay_s", cal.reference_delay_s},
                  {"adc_rate_hz", sc.sense.adc_rate_hz},
                  {"repeats", all}});

  auto& m = rep.metrics;
  m["adc_rate_hz"] = sc.sense.adc_rate_hz;
  m["n_sweeps"] = n_sweeps;
  m["reference_mode"] = cal.mode == ReferenceMode::pulse ? "pulse" : "trigger";
  m["reference_delay_s"] = cal.reference_delay_s;
  m["n_estimates"] = n;
  m["n_uncalibrated"] = n_uncal;
  m["empty_sweeps"] = trials[0].found.empty_sweeps.size();
  json first = json::array();
  for (const auto& e : trials[0].est) first.push_back(e.freq_hz);
  m["freq_estimates_hz"] = first;
  if (n) {
    const double mean = s1 / static_cast<double>(n);
    m["mean_freq_hz"] = mean;
    m["std_freq_hz"] = n > 1 ? std::sqrt(std::max(0.0, (s2 - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1))) : 0.0;
    if (!lines.empty()) m["max_abs_error_hz"] = max_err;
  }
  json pl = json::array();
  for (std::size_t j = 0; j < lines.size(); ++j) {
    const auto& v = per_line[j];
    json row{{"line_hz", lines[j]}, {"n", v.size()}};
    if (!v.empty()) {
      double mean = 0.0, err = 0.0;
      for (double f : v) mean += f;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double f : v) {
        var += (f - mean) * (f - mean);
        err = std::max(err, std::abs(f - lines[j]));
      }
      row["mean_hz"] = mean;
      row["std_hz"] = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      row["max_abs_error_hz"] = err;
    }
    pl.push_back(row);
  }
  m["per_line"] = pl;
  json rj = json::array();
  for (const auto& v : ridge) rj.push_back(v ? json(*v) : json(nullptr));
  m["ridge_hz"] = rj;
  m["warnings"] = diag.warnings;
}

inline void run_rate_study(const Scenario& sc, RunReport& rep, ArtifactSink& out) {
  const auto ss = make_sensing(sc);
  const auto det = make_detect(sc);
  const std::size_t n_sweeps = sense_sweeps(sc);
  const auto rec = sense_pd1(ss, sc.sut, n_sweeps);
  const auto lines = expected_lines(sc.sut);

  io::Csv c(out.add("resolution.csv"));
  c.header({"rate_hz", "resolved", "ridge_error_hz", "min_events_per_sweep"});
  json rows = json::array();
  for (double rate : sc.adc_rates) {
    auto cal = make_calibration(sc, ss);
    if (cal.mode == ReferenceMode::pulse)
      cal.reference_delay_s = measure_reference_delay(ss, cal, det, rate, calibration_tone(sc, cal));
    const auto row = resolution_study(rec, {rate}, cal, lines, det).front();
    c.row(row.rate_hz, row.resolved, row.ridge_error_hz, row.min_events_per_sweep);
    rows.push_back({{"rate_hz", row.rate_hz},
                    {"resolved", row.resolved},
                    {"ridge_error_hz", io::jnum(row.ridge_error_hz)},
                    {"min_events_per_sweep", row.min_events_per_sweep}});

    const auto adc = decimate(rec, decimation_factor(rec.timebase.sample_rate_hz, rate));
    SpectrogramOptions so;
    so.t0_offset_s = reference_t0_offset(detect_pulses(adc, cal.period_s, det).events, cal);
    so.blank_reference_s = cal.mode == ReferenceMode::pulse ? sc.sense.blank_reference_s : 0.0;
    const auto sg = assemble_spectrogram(adc, cal.period_s, cal, so);
    const std::string tag = std::to_string(static_cast<long long>(std::llround(rate / 1e6))) + "MSps";
    write_spectrogram(sg, out.add("spectrogram_" + tag + ".csv"), out.add("spectrogram_matrix_" + tag + ".csv"));
  }
  rep.metrics["rows"] = rows;
  rep.metrics["n_sweeps"] = n_sweeps;
}

}  // namespace detail

/// Runs the scenario's pipeline, writes artifacts plus metrics.json and
/// run_report.json into the output directory.
inline RunReport run(const Scenario& sc) {
  const auto t_start = std::chrono::steady_clock::now();
  RunReport rep;
  rep.scenario_digest = scenario_digest(sc);
  rep.pipeline = pipeline_name(sc.pipeline);
  detail::ArtifactSink out(sc.output_dir, rep);
  io::write_json(out.add("scenario_resolved.json"), scenario_to_json(sc));
  switch (sc.pipeline) {
    case Pipeline::generate: detail::run_generate(sc, rep, out); break;
    case Pipeline::radar_range: detail::run_radar_range(sc, rep, out); break;
    case Pipeline::radar_isar: detail::run_radar_isar(sc, rep, out); break;
    case Pipeline::comm: detail::run_comm(sc, rep, out); break;
    case Pipeline::sense: detail::run_sense(sc, rep, out); break;
    case Pipeline::rate_study: detail::run_rate_study(sc, rep, out); break;
  }
  io::write_json(std::filesystem::path(sc.output_dir) / "metrics.json", rep.metrics_document());
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  auto full = rep.metrics_document();
  full["wall_time_s"] = rep.wall_time_s;
  io::write_json(std::filesystem::path(sc.output_dir) / "run_report.json", full);
  return rep;
}

}  // namespace jrcss
