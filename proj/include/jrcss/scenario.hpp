#pragma once

// Declarative run configuration: JSON schema, defaults (the experiment's
// operating point) and validation with field-path error messages.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jrcss/chains.hpp"

namespace jrcss {

using nlohmann::json;

enum class Pipeline { generate, radar_range, radar_isar, comm, sense, rate_study };

inline const char* pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::generate: return "generate";
    case Pipeline::radar_range: return "radar-range";
    case Pipeline::radar_isar: return "radar-isar";
    case Pipeline::comm: return "comm";
    case Pipeline::sense: return "sense";
    case Pipeline::rate_study: return "rate-study";
  }
  return "?";
}

inline std::optional<Pipeline> parse_pipeline(const std::string& s) {
  for (auto p : {Pipeline::generate, Pipeline::radar_range, Pipeline::radar_isar, Pipeline::comm, Pipeline::sense,
                 Pipeline::rate_study})
    if (s == pipeline_name(p)) return p;
  return std::nullopt;
}

struct RadarParams {
  double adc_rate_hz = 40e6;
  double if_lowpass_hz = 200e6;
  /// radar-range: number of slow-time samples.
  std::size_t n_sweeps = 1;
  /// 0: one rotation spread over n_sweeps when the table turns, else 0.
  double slow_time_step_s = 0.0;
  /// 0: one peak per scatterer.
  std::size_t n_peaks = 0;
  WindowKind window = WindowKind::rectangular;
  std::size_t zero_pad = 8;
  // radar-isar
  std::size_t isar_sweeps = 64;
  double accumulation_s = 2.2;
  /// 0: chirp center frequency.
  double center_freq_hz = 0.0;
  WindowKind doppler_window = WindowKind::rectangular;
  double max_range_m = 3.0;
};

struct CommParams {
  std::size_t n_sweeps = 2;
  double selfmix_lowpass_hz = 2.5e9;
  /// Oscilloscope rate of the captured envelope.
  double capture_rate_hz = 10e9;
  std::size_t trend_window_symbols = 64;
  bool per_sweep_trend = true;
};

enum class ReferenceChoice { automatic, pulse, trigger };

struct SenseParams {
  /// 0: enough sweeps to cover sut.duration_s (at least 2).
  std::size_t n_sweeps = 0;
  double adc_rate_hz = 100e6;
  double threshold_frac = 0.3;
  double dsb_suppression_db = 3.0;
  double pd1_lowpass_hz = 50e6;
  double record_rate_hz = 400e6;
  /// White Gaussian noise on the ADC samples, relative to the record peak.
  std::optional<double> noise_snr_db;
  /// Known tone used to calibrate the reference delay; 0 = middle of range.
  double calibration_tone_hz = 0.0;
  ReferenceChoice reference = ReferenceChoice::automatic;
  double blank_reference_s = 30e-9;
  /// Multitone SUTs only: measure each tone in its own block of n_sweeps
  /// consecutive sweeps instead of driving all tones at once.
  bool separate_records = false;
};

struct Scenario {
  std::uint64_t seed = 1;
  Pipeline pipeline = Pipeline::sense;
  std::string output_dir = "out";
  double sim_sample_rate_hz = 40e9;
  std::vector<double> adc_rates{100e6, 50e6, 20e6, 10e6};
  std::size_t repeats = 1;

  ChirpPlan chirp;
  AskPlan ask;
  std::size_t ask_n_bits = 32767;
  int prbs_order = 15;
  bool explicit_bits = false;
  ModulatorSpec modulator;
  SbsFilterSpec sbs;
  Scene scene;
  RfResponseSpec rf{5.85e9, 14.5e9, 40.0, -1.0, 7.8e9, std::nullopt};
  SutSpec sut;
  RadarParams radar;
  CommParams comm;
  SenseParams sense;

  Scenario() { scene.scatterers.push_back({}); }
};

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

/// Typed access to one JSON object; every access records the key so unknown
/// keys can be reported afterwards.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail_config("schema-violation", (path_.empty() ? "<root>" : path_) + ": expected an object");
  }

  std::string path(const std::string& key) const { return join_path(path_, key); }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) fail_config("schema-violation", path(key) + ": expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail_config("schema-violation", path(key) + ": must be finite");
  }
  void optional_number(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    double v = 0.0;
    number(key, v);
    out = v;
  }
  template <class U>
  void count(const std::string& key, U& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      fail_config("schema-violation", path(key) + ": expected a non-negative integer");
    out = static_cast<U>(v.get<long long>());
  }
  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail_config("schema-violation", path(key) + ": expected an integer");
    out = v.get<int>();
  }
  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) fail_config("schema-violation", path(key) + ": expected true or false");
    out = v.get<bool>();
  }
  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) fail_config("schema-violation", path(key) + ": expected a string");
    out = v.get<std::string>();
  }
  void numbers(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) fail_config("schema-violation", path(key) + ": expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail_config("schema-violation", path(key) + "[" + std::to_string(i) + "]: expected a number");
      out.push_back(v[i].get<double>());
    }
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail_config("schema-violation", path(it.key()) + ": unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) fail_config("schema-violation", path + ": " + what);
}

inline void require_physical(bool ok, const std::string& path, const std::string& what) {
  if (!ok) fail_physics("physical-inconsistency", path + ": " + what);
}

inline WindowKind parse_window(Section& s, const std::string& key, WindowKind def) {
  std::string v;
  s.string(key, v);
  if (v.empty()) return def;
  if (v == "rectangular") return WindowKind::rectangular;
  if (v == "hann") return WindowKind::hann;
  if (v == "hamming") return WindowKind::hamming;
  if (v == "blackman") return WindowKind::blackman;
  fail_config("schema-violation", s.path(key) + ": unknown window '" + v + "'");
}

inline const char* window_name(WindowKind w) {
  switch (w) {
    case WindowKind::rectangular: return "rectangular";
    case WindowKind::hann: return "hann";
    case WindowKind::hamming: return "hamming";
    case WindowKind::blackman: return "blackman";
  }
  return "?";
}

inline const char* sut_kind_name(SutKind k) {
  switch (k) {
    case SutKind::tone: return "tone";
    case SutKind::multitone: return "multitone";
    case SutKind::lfm: return "lfm";
    case SutKind::nlfm: return "nlfm";
    case SutKind::step_frequency: return "step_frequency";
    case SutKind::custom: return "custom";
  }
  return "?";
}

inline const char* reference_name(ReferenceChoice r) {
  switch (r) {
    case ReferenceChoice::automatic: return "auto";
    case ReferenceChoice::pulse: return "pulse";
    case ReferenceChoice::trigger: return "trigger";
  }
  return "?";
}

}  // namespace detail

/// Parses and validates a scenario document. Missing fields keep their
/// defaults.
inline Scenario parse_scenario(const json& doc) {
  using detail::require;
  using detail::require_physical;
  Scenario sc;
  detail::Section root(doc, "");

  if (root.has("seed")) {
    const auto& v = root.raw("seed");
    require(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0), "seed",
            "expected a non-negative integer");
    sc.seed = v.get<std::uint64_t>();
  }
  std::string pipe;
  root.string("pipeline", pipe);
  if (!pipe.empty()) {
    const auto p = parse_pipeline(pipe);
    require(p.has_value(), "pipeline", "unknown pipeline '" + pipe + "'");
    sc.pipeline = *p;
  }
  root.string("output_dir", sc.output_dir);
  root.number("sim_sample_rate_hz", sc.sim_sample_rate_hz);
  require(sc.sim_sample_rate_hz > 0.0, "sim_sample_rate_hz", "must be > 0");
  root.numbers("adc_rates", sc.adc_rates);
  require(!sc.adc_rates.empty(), "adc_rates", "must not be empty");
  for (std::size_t i = 0; i < sc.adc_rates.size(); ++i)
    require(sc.adc_rates[i] > 0.0, "adc_rates[" + std::to_string(i) + "]", "must be > 0");
  root.count("repeats", sc.repeats);
  require(sc.repeats >= 1, "repeats", "must be >= 1");

  if (root.has("chirp")) {
    detail::Section s(root.raw("chirp"), "chirp");
    s.number("f_start_hz", sc.chirp.f_start_hz);
    s.number("f_stop_hz", sc.chirp.f_stop_hz);
    s.number("period_s", sc.chirp.period_s);
    s.count("n_periods", sc.chirp.n_periods);
    s.reject_unknown();
  }
  require(sc.chirp.period_s > 0.0, "chirp.period_s", "must be > 0");
  require(sc.chirp.f_start_hz >= 0.0, "chirp.f_start_hz", "must be >= 0");
  require(sc.chirp.f_stop_hz >= 0.0, "chirp.f_stop_hz", "must be >= 0");
  require(sc.chirp.f_stop_hz != sc.chirp.f_start_hz, "chirp.f_stop_hz", "must differ from f_start_hz");
  require(sc.chirp.n_periods >= 1, "chirp.n_periods", "must be >= 1");

  if (root.has("ask")) {
    detail::Section s(root.raw("ask"), "ask");
    s.number("carrier_hz", sc.ask.carrier_hz);
    s.number("baud_rate", sc.ask.baud_rate);
    s.number("low_level", sc.ask.low_level);
    s.number("high_level", sc.ask.high_level);
    s.number("rolloff", sc.ask.rolloff);
    std::string shape;
    s.string("pulse_shape", shape);
    if (shape == "raised_cosine") sc.ask.pulse_shape = PulseShape::raised_cosine;
    else if (shape == "rectangular" || shape.empty()) sc.ask.pulse_shape = PulseShape::rectangular;
    else fail_config("schema-violation", "ask.pulse_shape: unknown shape '" + shape + "'");
    s.count("n_bits", sc.ask_n_bits);
    s.integer("prbs_order", sc.prbs_order);
    if (s.has("bits")) {
      const auto& b = s.raw("bits");
      require(b.is_array() && !b.empty(), "ask.bits", "expected a non-empty array of 0/1");
      for (std::size_t i = 0; i < b.size(); ++i) {
        require(b[i].is_number_integer() && (b[i] == 0 || b[i] == 1), "ask.bits[" + std::to_string(i) + "]",
                "expected 0 or 1");
        sc.ask.bits.push_back(static_cast<std::uint8_t>(b[i].get<int>()));
      }
      sc.explicit_bits = true;
    }
    s.reject_unknown();
  }
  require(sc.ask.baud_rate > 0.0, "ask.baud_rate", "must be > 0");
  require(sc.ask.carrier_hz >= 0.0, "ask.carrier_hz", "must be >= 0");
  require(sc.ask.low_level >= 0.0, "ask.low_level", "must be >= 0");
  require(sc.ask.high_level > sc.ask.low_level, "ask.high_level", "must exceed low_level");
  require(sc.ask.rolloff >= 0.0 && sc.ask.rolloff <= 1.0, "ask.rolloff", "must lie in [0, 1]");
  require(sc.prbs_order == 7 || sc.prbs_order == 15 || sc.prbs_order == 23, "ask.prbs_order", "must be 7, 15 or 23");
  require(sc.ask_n_bits >= 1, "ask.n_bits", "must be >= 1");
  if (!sc.explicit_bits) sc.ask.bits = gen_prbs(sc.seed, sc.ask_n_bits, sc.prbs_order);

  if (root.has("modulator")) {
    detail::Section s(root.raw("modulator"), "modulator");
    s.number("carrier_suppression_db", sc.modulator.carrier_suppression_db);
    s.number("sideband_rejection_db", sc.modulator.sideband_rejection_db);
    s.reject_unknown();
  }
  require(sc.modulator.carrier_suppression_db >= 0.0, "modulator.carrier_suppression_db", "must be >= 0");
  require(sc.modulator.sideband_rejection_db >= 0.0, "modulator.sideband_rejection_db", "must be >= 0");

  if (root.has("sbs")) {
    detail::Section s(root.raw("sbs"), "sbs");
    s.number("bfs_hz", sc.sbs.bfs_hz);
    s.number("pump_offset_hz", sc.sbs.pump_offset_hz);
    s.number("linewidth_hz", sc.sbs.linewidth_hz);
    s.number("peak_gain_db", sc.sbs.peak_gain_db);
    s.boolean("include_phase", sc.sbs.include_phase);
    s.reject_unknown();
  }
  require(sc.sbs.bfs_hz > 0.0, "sbs.bfs_hz", "must be > 0");
  require(sc.sbs.linewidth_hz > 0.0, "sbs.linewidth_hz", "must be > 0");
  require(sc.sbs.peak_gain_db > 0.0, "sbs.peak_gain_db", "must be > 0");
  require_physical(sc.sbs.linewidth_hz < 0.1 * sc.sbs.bfs_hz, "sbs.linewidth_hz", "must be much smaller than bfs_hz");

  if (root.has("scene")) {
    detail::Section s(root.raw("scene"), "scene");
    s.number("center_range_m", sc.scene.turntable.center_range_m);
    s.number("rotation_period_s", sc.scene.turntable.rotation_period_s);
    s.number("phase0_rad", sc.scene.turntable.phase0_rad);
    std::string loss;
    s.string("loss", loss);
    if (loss == "r4") sc.scene.loss = PropagationLoss::r4;
    else if (loss == "none" || loss.empty()) sc.scene.loss = PropagationLoss::none;
    else fail_config("schema-violation", "scene.loss: expected 'none' or 'r4'");
    if (s.has("scatterers")) {
      const auto& arr = s.raw("scatterers");
      require(arr.is_array(), "scene.scatterers", "expected an array");
      sc.scene.scatterers.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        detail::Section p(arr[i], "scene.scatterers[" + std::to_string(i) + "]");
        Scatterer sct;
        p.number("x_m", sct.x_m);
        p.number("y_m", sct.y_m);
        p.number("reflectivity", sct.reflectivity);
        p.reject_unknown();
        require(sct.reflectivity > 0.0, p.path("reflectivity"), "must be > 0");
        sc.scene.scatterers.push_back(sct);
      }
    }
    s.reject_unknown();
  }
  require(sc.scene.turntable.center_range_m > 0.0, "scene.center_range_m", "must be > 0");
  require(sc.scene.turntable.rotation_period_s >= 0.0, "scene.rotation_period_s", "must be >= 0");

  if (root.has("rf")) {
    detail::Section s(root.raw("rf"), "rf");
    s.number("passband_low_hz", sc.rf.passband_low_hz);
    s.number("passband_high_hz", sc.rf.passband_high_hz);
    s.number("out_of_band_rejection_db", sc.rf.out_of_band_rejection_db);
    s.number("tilt_db_per_ghz", sc.rf.tilt_db_per_ghz);
    s.optional_number("tilt_reference_hz", sc.rf.tilt_reference_hz);
    s.optional_number("noise_snr_db", sc.rf.noise_snr_db);
    s.reject_unknown();
  }
  require(sc.rf.passband_low_hz < sc.rf.passband_high_hz, "rf.passband_high_hz", "must exceed passband_low_hz");
  require(sc.rf.out_of_band_rejection_db >= 0.0, "rf.out_of_band_rejection_db", "must be >= 0");

  if (root.has("sut")) {
    detail::Section s(root.raw("sut"), "sut");
    std::string kind;
    s.string("kind", kind);
    if (!kind.empty()) {
      bool found = false;
      for (auto k : {SutKind::tone, SutKind::multitone, SutKind::lfm, SutKind::nlfm, SutKind::step_frequency,
                     SutKind::custom})
        if (kind == detail::sut_kind_name(k)) {
          sc.sut.kind = k;
          found = true;
        }
      require(found, "sut.kind", "unknown kind '" + kind + "'");
    }
    s.number("amplitude", sc.sut.amplitude);
    s.number("duration_s", sc.sut.duration_s);
    s.numbers("freqs_hz", sc.sut.freqs_hz);
    if (s.has("step")) {
      detail::Section st(s.raw("step"), "sut.step");
      double a = 0.0, b = 0.0, d = 0.0;
      st.number("start_hz", a);
      st.number("stop_hz", b);
      st.number("step_hz", d);
      st.reject_unknown();
      require(d > 0.0 && b >= a, "sut.step", "needs start_hz <= stop_hz and step_hz > 0");
      sc.sut.freqs_hz = SutSpec::steps(a, b, d);
    }
    s.number("f_start_hz", sc.sut.f_start_hz);
    s.number("f_stop_hz", sc.sut.f_stop_hz);
    s.number("period_s", sc.sut.period_s);
    s.boolean("triangular", sc.sut.triangular);
    s.numbers("poly_coeffs", sc.sut.poly_coeffs);
    s.number("dwell_s", sc.sut.dwell_s);
    if (s.has("if_table")) {
      const auto& t = s.raw("if_table");
      require(t.is_array(), "sut.if_table", "expected an array of [t_s, f_hz] pairs");
      sc.sut.if_table.clear();
      for (std::size_t i = 0; i < t.size(); ++i) {
        require(t[i].is_array() && t[i].size() == 2 && t[i][0].is_number() && t[i][1].is_number(),
                "sut.if_table[" + std::to_string(i) + "]", "expected [t_s, f_hz]");
        sc.sut.if_table.emplace_back(t[i][0].get<double>(), t[i][1].get<double>());
      }
    }
    s.reject_unknown();
  }
  require(sc.sut.duration_s > 0.0, "sut.duration_s", "must be > 0");
  require(sc.sut.amplitude >= 0.0, "sut.amplitude", "must be >= 0");
  try {
    sc.sut.validate();
  } catch (const Error& e) {
    fail_config("schema-violation", std::string("sut: ") + e.what());
  }

  if (root.has("radar")) {
    detail::Section s(root.raw("radar"), "radar");
    s.number("adc_rate_hz", sc.radar.adc_rate_hz);
    s.number("if_lowpass_hz", sc.radar.if_lowpass_hz);
    s.count("n_sweeps", sc.radar.n_sweeps);
    s.number("slow_time_step_s", sc.radar.slow_time_step_s);
    s.count("n_peaks", sc.radar.n_peaks);
    sc.radar.window = detail::parse_window(s, "window", sc.radar.window);
    s.count("zero_pad", sc.radar.zero_pad);
    s.count("isar_sweeps", sc.radar.isar_sweeps);
    s.number("accumulation_s", sc.radar.accumulation_s);
    s.number("center_freq_hz", sc.radar.center_freq_hz);
    sc.radar.doppler_window = detail::parse_window(s, "doppler_window", sc.radar.doppler_window);
    s.number("max_range_m", sc.radar.max_range_m);
    s.reject_unknown();
  }
  require(sc.radar.adc_rate_hz > 0.0, "radar.adc_rate_hz", "must be > 0");
  require(sc.radar.if_lowpass_hz > 0.0, "radar.if_lowpass_hz", "must be > 0");
  require(sc.radar.n_sweeps >= 1, "radar.n_sweeps", "must be >= 1");
  require(sc.radar.slow_time_step_s >= 0.0, "radar.slow_time_step_s", "must be >= 0");
  require(sc.radar.zero_pad >= 1, "radar.zero_pad", "must be >= 1");
  require(sc.radar.isar_sweeps >= 8, "radar.isar_sweeps", "must be >= 8");
  require(sc.radar.accumulation_s > 0.0, "radar.accumulation_s", "must be > 0");
  require(sc.radar.center_freq_hz >= 0.0, "radar.center_freq_hz", "must be >= 0");

  if (root.has("comm")) {
    detail::Section s(root.raw("comm"), "comm");
    s.count("n_sweeps", sc.comm.n_sweeps);
    s.number("selfmix_lowpass_hz", sc.comm.selfmix_lowpass_hz);
    s.number("capture_rate_hz", sc.comm.capture_rate_hz);
    s.count("trend_window_symbols", sc.comm.trend_window_symbols);
    s.boolean("per_sweep_trend", sc.comm.per_sweep_trend);
    s.reject_unknown();
  }
  require(sc.comm.n_sweeps >= 1, "comm.n_sweeps", "must be >= 1");
  require(sc.comm.selfmix_lowpass_hz > 0.0, "comm.selfmix_lowpass_hz", "must be > 0");
  require(sc.comm.capture_rate_hz > 0.0, "comm.capture_rate_hz", "must be > 0");
  require(sc.comm.trend_window_symbols >= 1, "comm.trend_window_symbols", "must be >= 1");

  if (root.has("sense")) {
    detail::Section s(root.raw("sense"), "sense");
    s.count("n_sweeps", sc.sense.n_sweeps);
    s.number("adc_rate_hz", sc.sense.adc_rate_hz);
    s.number("threshold_frac", sc.sense.threshold_frac);
    s.number("dsb_suppression_db", sc.sense.dsb_suppression_db);
    s.number("pd1_lowpass_hz", sc.sense.pd1_lowpass_hz);
    s.number("record_rate_hz", sc.sense.record_rate_hz);
    s.optional_number("noise_snr_db", sc.sense.noise_snr_db);
    s.number("calibration_tone_hz", sc.sense.calibration_tone_hz);
    s.number("blank_reference_s", sc.sense.blank_reference_s);
    s.boolean("separate_records", sc.sense.separate_records);
    std::string ref;
    s.string("reference", ref);
    if (ref == "pulse") sc.sense.reference = ReferenceChoice::pulse;
    else if (ref == "trigger") sc.sense.reference = ReferenceChoice::trigger;
    else if (ref == "auto" || ref.empty()) sc.sense.reference = ReferenceChoice::automatic;
    else fail_config("schema-violation", "sense.reference: expected 'auto', 'pulse' or 'trigger'");
    s.reject_unknown();
  }
  require(sc.sense.adc_rate_hz > 0.0, "sense.adc_rate_hz", "must be > 0");
  require(sc.sense.threshold_frac > 0.0 && sc.sense.threshold_frac < 1.0, "sense.threshold_frac", "must lie in (0, 1)");
  require(sc.sense.dsb_suppression_db >= 0.0, "sense.dsb_suppression_db", "must be >= 0");
  require(sc.sense.pd1_lowpass_hz > 0.0, "sense.pd1_lowpass_hz", "must be > 0");
  require(sc.sense.record_rate_hz > 0.0, "sense.record_rate_hz", "must be > 0");
  require(sc.sense.calibration_tone_hz >= 0.0, "sense.calibration_tone_hz", "must be >= 0");
  require(sc.sense.blank_reference_s >= 0.0, "sense.blank_reference_s", "must be >= 0");
  root.reject_unknown();

  // Physical consistency against the simulation rate.
  const double nyq = 0.5 * sc.sim_sample_rate_hz;
  require_physical(sc.chirp.max_frequency_hz() < nyq, "chirp.f_start_hz", "chirp exceeds the simulation Nyquist rate");
  require_physical(sc.ask.carrier_hz < nyq, "ask.carrier_hz", "ASK carrier above the simulation Nyquist rate");
  require_physical(sc.ask.baud_rate <= sc.sim_sample_rate_hz / 4.0, "ask.baud_rate",
                   "baud rate above a quarter of the simulation rate");
  require_physical(sc.chirp.max_frequency_hz() + sc.ask.carrier_hz < nyq, "ask.carrier_hz",
                   "ASK-LFM band exceeds the simulation Nyquist rate");
  require_physical(sc.sut.max_frequency_hz() < nyq, "sut", "SUT frequency above the simulation Nyquist rate");
  auto achievable = [&](double from, double to, const std::string& path) {
    const double r = from / to;
    require_physical(std::abs(r - std::round(r)) < 1e-9 * r && std::round(r) >= 1.0, path,
                     "not reachable by integer decimation from " + std::to_string(from) + " Hz");
  };
  achievable(sc.sim_sample_rate_hz, sc.sense.record_rate_hz, "sense.record_rate_hz");
  achievable(sc.sense.record_rate_hz, sc.sense.adc_rate_hz, "sense.adc_rate_hz");
  for (std::size_t i = 0; i < sc.adc_rates.size(); ++i)
    achievable(sc.sense.record_rate_hz, sc.adc_rates[i], "adc_rates[" + std::to_string(i) + "]");
  achievable(sc.sim_sample_rate_hz, sc.radar.adc_rate_hz, "radar.adc_rate_hz");
  achievable(sc.sim_sample_rate_hz, sc.comm.capture_rate_hz, "comm.capture_rate_hz");
  require_physical(sc.comm.selfmix_lowpass_hz < 0.5 * sc.comm.capture_rate_hz, "comm.selfmix_lowpass_hz",
                   "envelope low-pass above the capture Nyquist rate");
  require_physical(sc.radar.if_lowpass_hz < nyq, "radar.if_lowpass_hz", "above the simulation Nyquist rate");
  const double per_sweep = sc.chirp.period_s * sc.sim_sample_rate_hz;
  require_physical(std::abs(per_sweep - std::round(per_sweep)) < 1e-6, "chirp.period_s",
                   "sweep must span a whole number of simulation samples");
  return sc;
}

/// Raw scenario document; callers may patch it before parse_scenario.
inline json read_scenario_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_config("file-not-found", path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail_config("parse-error", path + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_scenario_document(path)); }

/// Fully resolved scenario as JSON (all defaults filled in). Bits are
/// summarized by count and seed-derived origin to keep the document small.
inline json scenario_to_json(const Scenario& sc) {
  json j;
  j["seed"] = sc.seed;
  j["pipeline"] = pipeline_name(sc.pipeline);
  j["output_dir"] = sc.output_dir;
  j["sim_sample_rate_hz"] = sc.sim_sample_rate_hz;
  j["adc_rates"] = sc.adc_rates;
  j["repeats"] = sc.repeats;
  j["chirp"] = {{"f_start_hz", sc.chirp.f_start_hz},
                {"f_stop_hz", sc.chirp.f_stop_hz},
                {"period_s", sc.chirp.period_s},
                {"n_periods", sc.chirp.n_periods}};
  j["ask"] = {{"carrier_hz", sc.ask.carrier_hz},
              {"baud_rate", sc.ask.baud_rate},
              {"low_level", sc.ask.low_level},
              {"high_level", sc.ask.high_level},
              {"pulse_shape", sc.ask.pulse_shape == PulseShape::rectangular ? "rectangular" : "raised_cosine"},
              {"rolloff", sc.ask.rolloff},
              {"n_bits", sc.ask.bits.size()},
              {"prbs_order", sc.prbs_order}};
  if (sc.explicit_bits) j["ask"]["bits"] = sc.ask.bits;
  j["modulator"] = {{"carrier_suppression_db", sc.modulator.carrier_suppression_db},
                    {"sideband_rejection_db", sc.modulator.sideband_rejection_db}};
  j["sbs"] = {{"bfs_hz", sc.sbs.bfs_hz},
              {"pump_offset_hz", sc.sbs.pump_offset_hz},
              {"linewidth_hz", sc.sbs.linewidth_hz},
              {"peak_gain_db", sc.sbs.peak_gain_db},
              {"include_phase", sc.sbs.include_phase}};
  json scat = json::array();
  for (const auto& s : sc.scene.scatterers) scat.push_back({{"x_m", s.x_m}, {"y_m", s.y_m}, {"reflectivity", s.reflectivity}});
  j["scene"] = {{"center_range_m", sc.scene.turntable.center_range_m},
                {"rotation_period_s", sc.scene.turntable.rotation_period_s},
                {"phase0_rad", sc.scene.turntable.phase0_rad},
                {"loss", sc.scene.loss == PropagationLoss::r4 ? "r4" : "none"},
                {"scatterers", scat}};
  j["rf"] = {{"passband_low_hz", sc.rf.passband_low_hz},
             {"passband_high_hz", sc.rf.passband_high_hz},
             {"out_of_band_rejection_db", sc.rf.out_of_band_rejection_db},
             {"tilt_db_per_ghz", sc.rf.tilt_db_per_ghz},
             {"tilt_reference_hz", sc.rf.tilt_reference_hz ? json(*sc.rf.tilt_reference_hz) : json(nullptr)},
             {"noise_snr_db", sc.rf.noise_snr_db ? json(*sc.rf.noise_snr_db) : json(nullptr)}};
  json table = json::array();
  for (const auto& [t, f] : sc.sut.if_table) table.push_back({t, f});
  j["sut"] = {{"kind", detail::sut_kind_name(sc.sut.kind)},
              {"amplitude", sc.sut.amplitude},
              {"duration_s", sc.sut.duration_s},
              {"freqs_hz", sc.sut.freqs_hz},
              {"f_start_hz", sc.sut.f_start_hz},
              {"f_stop_hz", sc.sut.f_stop_hz},
              {"period_s", sc.sut.period_s},
              {"triangular", sc.sut.triangular},
              {"poly_coeffs", sc.sut.poly_coeffs},
              {"dwell_s", sc.sut.dwell_s},
              {"if_table", table}};
  j["radar"] = {{"adc_rate_hz", sc.radar.adc_rate_hz},
                {"if_lowpass_hz", sc.radar.if_lowpass_hz},
                {"n_sweeps", sc.radar.n_sweeps},
                {"slow_time_step_s", sc.radar.slow_time_step_s},
                {"n_peaks", sc.radar.n_peaks},
                {"window", detail::window_name(sc.radar.window)},
                {"zero_pad", sc.radar.zero_pad},
                {"isar_sweeps", sc.radar.isar_sweeps},
                {"accumulation_s", sc.radar.accumulation_s},
                {"center_freq_hz", sc.radar.center_freq_hz},
                {"doppler_window", detail::window_name(sc.radar.doppler_window)},
                {"max_range_m", sc.radar.max_range_m}};
  j["comm"] = {{"n_sweeps", sc.comm.n_sweeps},
               {"selfmix_lowpass_hz", sc.comm.selfmix_lowpass_hz},
               {"capture_rate_hz", sc.comm.capture_rate_hz},
               {"trend_window_symbols", sc.comm.trend_window_symbols},
               {"per_sweep_trend", sc.comm.per_sweep_trend}};
  j["sense"] = {{"n_sweeps", sc.sense.n_sweeps},
                {"adc_rate_hz", sc.sense.adc_rate_hz},
                {"threshold_frac", sc.sense.threshold_frac},
                {"dsb_suppression_db", sc.sense.dsb_suppression_db},
                {"pd1_lowpass_hz", sc.sense.pd1_lowpass_hz},
                {"record_rate_hz", sc.sense.record_rate_hz},
                {"noise_snr_db", sc.sense.noise_snr_db ? json(*sc.sense.noise_snr_db) : json(nullptr)},
                {"calibration_tone_hz", sc.sense.calibration_tone_hz},
                {"reference", detail::reference_name(sc.sense.reference)},
                {"blank_reference_s", sc.sense.blank_reference_s},
                {"separate_records", sc.sense.separate_records}};
  return j;
}

/// FNV-1a over the canonical resolved scenario (output location excluded).
inline std::string scenario_digest(const Scenario& sc) {
  auto j = scenario_to_json(sc);
  j.erase("output_dir");
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace jrcss
