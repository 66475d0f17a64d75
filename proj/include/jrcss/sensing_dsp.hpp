#pragma once

// Frequency-to-time-mapping back end: pulse detection on the PD1 record,
// reference-anchored frequency estimates, spectrogram assembly and the
// sampling-rate study.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "jrcss/signal_core.hpp"

namespace jrcss {

struct PulseEvent {
  double time_s = 0.0;  // amplitude-weighted centroid
  double peak_amplitude = 0.0;
  double width_s = 0.0;  // full width at half maximum
  std::size_t sweep_index = 0;
  bool is_reference = false;
};

struct DetectOptions {
  double threshold_frac = 0.3;
  /// A pulse must also rise this many robust (MAD) standard deviations of
  /// the sweep above its baseline; keeps background ripple in a sweep with
  /// no pulse from being reported.
  double min_prominence_sigma = 6.0;
  /// Absolute time of the start of sweep 0.
  double sweep_origin_s = 0.0;
  /// Sweep windows open this fraction of a period early so a reference
  /// pulse smeared slightly before the sweep start stays in its own sweep.
  double guard_frac = 0.005;
  /// Expected reference position within the sweep and the tolerance for
  /// calling the earliest pulse the reference.
  double reference_offset_s = 0.0;
  double reference_window_frac = 0.02;
};

struct DetectionResult {
  std::vector<PulseEvent> events;
  std::vector<std::size_t> empty_sweeps;
  std::size_t n_sweeps = 0;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

/// Index range [first, last) of the samples belonging to sweep k, or an
/// empty range when less than 90% of the sweep is inside the record.
struct SweepSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  double start_s = 0.0;
  bool valid = false;
};

inline SweepSpan sweep_span(const Timebase& tb, double period_s, double origin_s, double guard_s, long k) {
  SweepSpan s;
  s.start_s = origin_s + static_cast<double>(k) * period_s;
  const double a = s.start_s - guard_s;
  const double b = a + period_s;
  const double fs = tb.sample_rate_hz;
  const double ia = std::ceil((a - tb.t0_s) * fs - 1e-9);
  const double ib = std::ceil((b - tb.t0_s) * fs - 1e-9);
  const double lo = std::max(ia, 0.0);
  const double hi = std::min(ib, static_cast<double>(tb.n_samples));
  if (hi - lo < 0.9 * period_s * fs || hi <= lo) return s;
  s.first = static_cast<std::size_t>(lo);
  s.last = static_cast<std::size_t>(hi);
  s.valid = true;
  return s;
}

}  // namespace detail

/// Per sweep: local maxima above threshold_frac of the sweep's peak (over the
/// median baseline). Maxima separated by less than a 3 dB valley are merged.
/// Each event is timed by the centroid of its above-threshold support,
/// weighted by the amplitude in excess of the threshold (weights fall to
/// zero at the support edges, which keeps the estimate smooth in sample
/// phase).
inline DetectionResult detect_pulses(const RealWaveform& pd1, double sweep_period_s, const DetectOptions& opt = {}) {
  validate_record(pd1);
  if (!(opt.threshold_frac > 0.0 && opt.threshold_frac < 1.0))
    fail_physics("invalid-threshold", "threshold_frac must lie in (0, 1)");
  if (!(sweep_period_s > 0.0)) fail_physics("invalid-sweep-period");
  const auto& x = pd1.samples;
  const auto& tb = pd1.timebase;
  const double guard = opt.guard_frac * sweep_period_s;

  DetectionResult res;
  const long k_first = static_cast<long>(std::floor((tb.t0_s - opt.sweep_origin_s) / sweep_period_s)) - 1;
  const long k_last = static_cast<long>(std::ceil((tb.time_at(tb.n_samples) - opt.sweep_origin_s) / sweep_period_s)) + 1;
  std::size_t sweep_index = 0;
  for (long k = k_first; k <= k_last; ++k) {
    const auto span = detail::sweep_span(tb, sweep_period_s, opt.sweep_origin_s, guard, k);
    if (!span.valid) continue;
    const std::size_t idx = k < 0 ? 0 : static_cast<std::size_t>(k);
    sweep_index = idx;
    ++res.n_sweeps;
    const std::size_t a = span.first, b = span.last;

    std::vector<double> seg(x.begin() + static_cast<std::ptrdiff_t>(a), x.begin() + static_cast<std::ptrdiff_t>(b));
    const double base = detail::median(seg);
    const double top = *std::max_element(seg.begin(), seg.end());
    for (auto& v : seg) v = std::abs(v - base);
    const double floor = base + opt.min_prominence_sigma * 1.4826 * detail::median(seg);
    if (!(top > base) || !(top > floor)) {
      res.empty_sweeps.push_back(sweep_index);
      continue;
    }
    const double thr = std::max(base + opt.threshold_frac * (top - base), floor);

    std::vector<std::size_t> maxima;
    for (std::size_t i = a; i < b; ++i) {
      if (x[i] <= thr) continue;
      const bool left_ok = i == a || x[i] >= x[i - 1];
      const bool right_ok = i + 1 == b || x[i] > x[i + 1];
      if (left_ok && right_ok) maxima.push_back(i);
    }
    if (maxima.empty()) {
      res.empty_sweeps.push_back(sweep_index);
      continue;
    }

    // Merge maxima that are not separated by a 3-dB valley.
    std::vector<std::size_t> peaks{maxima.front()};
    std::vector<std::size_t> valley_before{a};  // split point preceding each peak
    for (std::size_t m = 1; m < maxima.size(); ++m) {
      const std::size_t p = peaks.back(), q = maxima[m];
      std::size_t vi = p;
      for (std::size_t i = p; i <= q; ++i)
        if (x[i] < x[vi]) vi = i;
      const double hp = x[p] - base, hq = x[q] - base;
      if (x[vi] - base > 0.5 * std::min(hp, hq)) {
        if (x[q] > x[p]) peaks.back() = q;
      } else {
        peaks.push_back(q);
        valley_before.push_back(vi);
      }
    }

    std::vector<PulseEvent> sweep_events;
    for (std::size_t e = 0; e < peaks.size(); ++e) {
      const std::size_t p = peaks[e];
      const std::size_t lo_bound = valley_before[e];
      const std::size_t hi_bound = e + 1 < peaks.size() ? valley_before[e + 1] : b - 1;
      std::size_t lo = p, hi = p;
      while (lo > lo_bound && x[lo - 1] > thr) --lo;
      while (hi < hi_bound && x[hi + 1] > thr) ++hi;
      double sw = 0.0, st = 0.0;
      for (std::size_t i = lo; i <= hi; ++i) {
        const double w = x[i] - thr;
        sw += w;
        st += w * tb.time_at(i);
      }
      PulseEvent ev;
      ev.time_s = st / sw;
      ev.peak_amplitude = x[p] - base;
      ev.sweep_index = sweep_index;

      const double half = base + 0.5 * ev.peak_amplitude;
      double tl = tb.time_at(p), tr = tb.time_at(p);
      for (std::size_t i = p; i > a; --i) {
        if (x[i - 1] < half) {
          tl = tb.time_at(i - 1) + (half - x[i - 1]) / (x[i] - x[i - 1]) * tb.dt();
          break;
        }
      }
      for (std::size_t i = p; i + 1 < b; ++i) {
        if (x[i + 1] < half) {
          tr = tb.time_at(i) + (x[i] - half) / (x[i] - x[i + 1]) * tb.dt();
          break;
        }
      }
      ev.width_s = std::max(tr - tl, tb.dt());
      sweep_events.push_back(ev);
    }

    // Reference: the earliest event, if it sits where the reference line
    // crosses the gain window.
    const double expected = span.start_s + opt.reference_offset_s;
    auto earliest = std::min_element(sweep_events.begin(), sweep_events.end(),
                                     [](const PulseEvent& l, const PulseEvent& r) { return l.time_s < r.time_s; });
    if (std::abs(earliest->time_s - expected) <= opt.reference_window_frac * sweep_period_s)
      earliest->is_reference = true;
    res.events.insert(res.events.end(), sweep_events.begin(), sweep_events.end());
  }
  return res;
}

enum class ReferenceMode {
  /// t0 from the detected reference pulse of each sweep.
  pulse,
  /// t0 = sweep start + trigger offset (acquisition synchronized to the sweep).
  trigger,
};

struct FttmCalibration {
  double bandwidth_hz = 6e9;  // f_B
  double period_s = 4e-6;     // T
  double offset_hz = 0.0;     // f_x
  ReferenceMode mode = ReferenceMode::pulse;
  double sweep_origin_s = 0.0;
  double trigger_t0_offset_s = 0.0;
  /// Centroid of the reference pulse minus the true crossing time. The
  /// crossing sits on the sweep boundary, so only the trailing half of the
  /// reference pulse exists and its centroid lags; see
  /// calibrate_reference_delay.
  double reference_delay_s = 0.0;
};

struct FrequencyEstimate {
  double freq_hz = 0.0;
  std::size_t sweep_index = 0;
  double time_s = 0.0;
  bool calibrated = true;
};

/// f = f_x + f_B (t_SUT - t0) / T for every non-reference event.
inline std::vector<FrequencyEstimate> fttm_estimate(const std::vector<PulseEvent>& events, const FttmCalibration& cal) {
  if (!(cal.period_s > 0.0) || !(cal.bandwidth_hz > 0.0)) fail_physics("invalid-calibration");
  std::map<std::size_t, std::vector<const PulseEvent*>> by_sweep;
  for (const auto& e : events) by_sweep[e.sweep_index].push_back(&e);

  std::vector<FrequencyEstimate> out;
  for (const auto& [k, evs] : by_sweep) {
    const double trigger_t0 = cal.sweep_origin_s + static_cast<double>(k) * cal.period_s + cal.trigger_t0_offset_s;
    double t0 = trigger_t0;
    bool calibrated = true;
    if (cal.mode == ReferenceMode::pulse) {
      const auto ref = std::find_if(evs.begin(), evs.end(), [](const PulseEvent* e) { return e->is_reference; });
      if (ref != evs.end()) {
        t0 = (*ref)->time_s - cal.reference_delay_s;
      } else {
        calibrated = false;
      }
    }
    for (const auto* e : evs) {
      if (cal.mode == ReferenceMode::pulse && e->is_reference) continue;
      out.push_back({cal.offset_hz + cal.bandwidth_hz * (e->time_s - t0) / cal.period_s, k, e->time_s, calibrated});
    }
  }
  return out;
}

/// Reference delay from a capture of a known tone: mean over sweeps of
/// t_ref - (t_sig - T (f_known - f_x) / f_B). The signal event closest to
/// the expected position is used in each sweep. NaN if no sweep has both.
inline double calibrate_reference_delay(const std::vector<PulseEvent>& events, const FttmCalibration& cal,
                                        double known_freq_hz) {
  std::map<std::size_t, std::vector<const PulseEvent*>> by_sweep;
  for (const auto& e : events) by_sweep[e.sweep_index].push_back(&e);
  const double lag = cal.period_s * (known_freq_hz - cal.offset_hz) / cal.bandwidth_hz;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [k, evs] : by_sweep) {
    const PulseEvent* ref = nullptr;
    for (const auto* e : evs)
      if (e->is_reference) ref = e;
    if (!ref) continue;
    const PulseEvent* best = nullptr;
    for (const auto* e : evs) {
      if (e->is_reference) continue;
      if (!best || std::abs(e->time_s - ref->time_s - lag) < std::abs(best->time_s - ref->time_s - lag)) best = e;
    }
    if (!best) continue;
    sum += ref->time_s - (best->time_s - lag);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

struct Spectrogram {
  /// Start time of each sweep (one column per sweep).
  std::vector<double> time_axis_s;
  std::vector<double> freq_axis_hz;
  /// intensity[column][freq bin]
  std::vector<std::vector<double>> intensity;
  /// Frequencies below offset + this are blanked around the reference pulse.
  double reference_blank_hz = 0.0;
};

struct SpectrogramOptions {
  double sweep_origin_s = 0.0;
  /// Position of t0 within each sweep.
  double t0_offset_s = 0.0;
  /// Half-width of the zeroed region around t0 (0 = no blanking).
  double blank_reference_s = 0.0;
};

/// One column per full sweep; intra-sweep time maps to frequency by the FTTM
/// law.
inline Spectrogram assemble_spectrogram(const RealWaveform& pd1, double sweep_period_s, const FttmCalibration& cal,
                                        const SpectrogramOptions& opt = {}) {
  validate_record(pd1);
  const auto& tb = pd1.timebase;
  const double fs = tb.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(sweep_period_s * fs));
  if (n < 2 || tb.duration() + 0.5 / fs < sweep_period_s) fail_physics("record-too-short", "record shorter than one sweep");

  Spectrogram sg;
  sg.freq_axis_hz.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    sg.freq_axis_hz[j] = cal.offset_hz + cal.bandwidth_hz * (static_cast<double>(j) / fs - opt.t0_offset_s) / cal.period_s;
  sg.reference_blank_hz = cal.bandwidth_hz * opt.blank_reference_s / cal.period_s;

  const long k0 = static_cast<long>(std::ceil((tb.t0_s - opt.sweep_origin_s) / sweep_period_s - 1e-9));
  for (long k = k0;; ++k) {
    const double start = opt.sweep_origin_s + static_cast<double>(k) * sweep_period_s;
    const long i0 = std::lround((start - tb.t0_s) * fs);
    if (i0 < 0) continue;
    if (static_cast<std::size_t>(i0) + n > tb.n_samples) break;
    const auto from = pd1.samples.begin() + i0;
    std::vector<double> col(from, from + static_cast<std::ptrdiff_t>(n));
    if (opt.blank_reference_s > 0.0) {
      for (std::size_t j = 0; j < n; ++j)
        if (std::abs(static_cast<double>(j) / fs - opt.t0_offset_s) < opt.blank_reference_s) col[j] = 0.0;
    }
    sg.time_axis_s.push_back(start);
    sg.intensity.push_back(std::move(col));
  }
  if (sg.intensity.empty()) fail_physics("record-too-short", "no complete sweep in record");
  return sg;
}

/// Frequency of the strongest line in each column, refined by the centroid
/// of the contiguous region above half its height. nullopt for silent columns.
inline std::vector<std::optional<double>> spectrogram_ridge(const Spectrogram& sg) {
  std::vector<std::optional<double>> ridge;
  for (const auto& col : sg.intensity) {
    const auto it = std::max_element(col.begin(), col.end());
    if (it == col.end() || !(*it > 0.0)) {
      ridge.emplace_back(std::nullopt);
      continue;
    }
    const auto p = static_cast<std::size_t>(it - col.begin());
    const double half = 0.5 * *it;
    std::size_t lo = p, hi = p;
    while (lo > 0 && col[lo - 1] > half) --lo;
    while (hi + 1 < col.size() && col[hi + 1] > half) ++hi;
    double sw = 0.0, sf = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
      sw += col[j];
      sf += col[j] * sg.freq_axis_hz[j];
    }
    ridge.emplace_back(sf / sw);
  }
  return ridge;
}

struct ResolutionRow {
  double rate_hz = 0.0;
  bool resolved = false;
  double ridge_error_hz = std::numeric_limits<double>::quiet_NaN();
  std::size_t min_events_per_sweep = 0;
};

/// Re-samples the PD1 record at each ADC rate and checks whether every sweep
/// shows one separate pulse per expected line (3-dB valley criterion of
/// detect_pulses). ridge_error_hz is the largest distance between an
/// estimate and its nearest expected line.
inline std::vector<ResolutionRow> resolution_study(const RealWaveform& pd1, const std::vector<double>& adc_rates_hz,
                                                   const FttmCalibration& cal, const std::vector<double>& expected_hz,
                                                   const DetectOptions& det = {}) {
  std::vector<ResolutionRow> rows;
  for (double rate : adc_rates_hz) {
    const auto adc = decimate(pd1, decimation_factor(pd1.timebase.sample_rate_hz, rate));
    const auto found = detect_pulses(adc, cal.period_s, det);
    const auto est = fttm_estimate(found.events, cal);
    std::map<std::size_t, std::size_t> per_sweep;
    for (std::size_t k = 0; k < found.n_sweeps; ++k) per_sweep[k] = 0;
    double err = 0.0;
    for (const auto& e : est) {
      ++per_sweep[e.sweep_index];
      double best = std::numeric_limits<double>::infinity();
      for (double f : expected_hz) best = std::min(best, std::abs(e.freq_hz - f));
      err = std::max(err, best);
    }
    ResolutionRow row;
    row.rate_hz = rate;
    row.min_events_per_sweep = std::numeric_limits<std::size_t>::max();
    for (const auto& [k, c] : per_sweep) row.min_events_per_sweep = std::min(row.min_events_per_sweep, c);
    if (per_sweep.empty()) row.min_events_per_sweep = 0;
    row.resolved = !per_sweep.empty() && row.min_events_per_sweep >= std::max<std::size_t>(expected_hz.size(), 1);
    if (!est.empty() && !expected_hz.empty()) row.ridge_error_hz = err;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace jrcss
