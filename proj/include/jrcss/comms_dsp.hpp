#pragma once

// Communication receiver: self-mixing envelope recovery, slow-trend
// compensation, symbol timing/decisions and eye diagrams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "jrcss/signal_core.hpp"

namespace jrcss {

struct EyeDiagram {
  /// traces x (2 * samples_per_symbol)
  std::vector<std::vector<double>> trace_matrix;
  std::size_t samples_per_symbol = 0;
  /// (min high - max low) / (mean high - mean low) at the best instant.
  double eye_opening = 0.0;
  std::size_t best_phase = 0;
};

struct BerReport {
  std::size_t n_bits = 0;
  std::size_t n_errors = 0;
  double ber = 0.0;
  double threshold_used = 0.0;
  double timing_offset_used = 0.0;  // seconds into the first symbol
};

/// Square-law envelope recovery: lowpass(rx^2).
inline RealWaveform self_mix(const RealWaveform& rx, double lowpass_hz) {
  validate_record(rx);
  RealWaveform sq{rx.timebase, std::vector<double>(rx.samples.size())};
  for (std::size_t i = 0; i < sq.samples.size(); ++i) sq.samples[i] = rx.samples[i] * rx.samples[i];
  return lowpass(sq, lowpass_hz);
}

namespace detail {

/// Centered sliding maximum of width w (truncated at the edges).
inline std::vector<double> moving_max(std::span<const double> x, std::size_t w) {
  const std::size_t n = x.size();
  const std::size_t half = w / 2;
  std::vector<double> out(n);
  std::deque<std::size_t> dq;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t hi = std::min(n - 1, i + half);
    while (next <= hi) {
      while (!dq.empty() && x[dq.back()] <= x[next]) dq.pop_back();
      dq.push_back(next++);
    }
    const std::size_t lo = i >= half ? i - half : 0;
    while (dq.front() < lo) dq.pop_front();
    out[i] = x[dq.front()];
  }
  return out;
}

/// Centered moving average of width w (truncated at the edges).
inline std::vector<double> moving_average(std::span<const double> x, std::size_t w) {
  const std::size_t n = x.size();
  const std::size_t half = w / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

struct TwoLevels {
  double threshold = 0.0;
  double mean_low = 0.0;
  double mean_high = 0.0;
  double max_low = 0.0;
  double min_high = 0.0;
  std::size_t n_low = 0;
  std::size_t n_high = 0;

  double opening() const {
    const double span = mean_high - mean_low;
    if (n_low == 0 || n_high == 0 || !(span > 0.0)) return -std::numeric_limits<double>::infinity();
    return (min_high - max_low) / span;
  }
};

/// 2-means clustering of scalar samples (threshold at the midpoint of the
/// cluster means).
inline TwoLevels two_means(std::span<const double> v) {
  TwoLevels t;
  if (v.empty()) return t;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  double thr = 0.5 * (*lo_it + *hi_it);
  for (int iter = 0; iter < 100; ++iter) {
    double s0 = 0.0, s1 = 0.0;
    std::size_t n0 = 0, n1 = 0;
    for (double x : v) {
      if (x > thr) {
        s1 += x;
        ++n1;
      } else {
        s0 += x;
        ++n0;
      }
    }
    if (n0 == 0 || n1 == 0) break;
    const double next = 0.5 * (s0 / static_cast<double>(n0) + s1 / static_cast<double>(n1));
    if (next == thr) break;
    thr = next;
  }
  t.threshold = thr;
  t.max_low = -std::numeric_limits<double>::infinity();
  t.min_high = std::numeric_limits<double>::infinity();
  double s0 = 0.0, s1 = 0.0;
  for (double x : v) {
    if (x > thr) {
      s1 += x;
      ++t.n_high;
      t.min_high = std::min(t.min_high, x);
    } else {
      s0 += x;
      ++t.n_low;
      t.max_low = std::max(t.max_low, x);
    }
  }
  if (t.n_low) t.mean_low = s0 / static_cast<double>(t.n_low);
  if (t.n_high) t.mean_high = s1 / static_cast<double>(t.n_high);
  return t;
}

/// Samples at t = offset + k / baud, k = 0..count-1 (nearest sample).
inline std::vector<double> symbol_samples(const RealWaveform& env, double baud, double offset_s, std::size_t count) {
  std::vector<double> v;
  v.reserve(count);
  const double fs = env.timebase.sample_rate_hz;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = offset_s + static_cast<double>(k) / baud;
    const auto i = static_cast<std::size_t>(std::llround(t * fs));
    if (i >= env.samples.size()) break;
    v.push_back(env.samples[i]);
  }
  return v;
}

/// Least-squares polynomial fit y ~ sum c_k x^k over the points with use[i].
inline std::vector<double> polyfit(const std::vector<double>& x, const std::vector<double>& y,
                                   const std::vector<bool>& use, std::size_t degree) {
  const std::size_t m = degree + 1;
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!use[i]) continue;
    std::vector<double> p(2 * m - 1, 1.0);
    for (std::size_t k = 1; k < p.size(); ++k) p[k] = p[k - 1] * x[i];
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) a[r][c] += p[r + c];
      a[r][m] += p[r] * y[i];
    }
  }
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < m; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    if (a[c][c] == 0.0) fail_numerical("singular-fit", "trend fit is under-determined");
    for (std::size_t r = 0; r < m; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= m; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> coef(m);
  for (std::size_t c = 0; c < m; ++c) coef[c] = a[c][m] / a[c][c];
  return coef;
}

inline double polyval(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

/// Smooth trend of the "one" level: a quintic in log amplitude fitted to the
/// maxima of w-sample blocks, each placed where it occurs and ignoring w/16
/// samples at either end. Blocks that deviate from the fit by more than
/// three robust sigmas (at least 0.5 dB) are dropped and the fit repeated,
/// which removes blocks without a "one" symbol and edge transients. Short
/// inputs fall back to a sliding max followed by a sliding mean.
inline std::vector<double> smooth_trend(std::span<const double> x, std::size_t w) {
  const std::size_t n_blocks = x.size() / std::max<std::size_t>(w, 1);
  if (n_blocks < 12) return moving_average(moving_max(x, w), w);
  std::vector<double> c(n_blocks), y(n_blocks);
  std::vector<bool> use(n_blocks, true);
  const double half = 0.5 * static_cast<double>(x.size());
  const std::size_t guard = w / 16;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    std::size_t lo = b * x.size() / n_blocks, hi = (b + 1) * x.size() / n_blocks;
    // Edge samples carry the filter memory of the previous segment.
    if (b == 0) lo += guard;
    if (b + 1 == n_blocks) hi -= guard;
    const auto it = std::max_element(x.begin() + static_cast<std::ptrdiff_t>(lo), x.begin() + static_cast<std::ptrdiff_t>(hi));
    const double mx = *it;
    // Abscissa at the maximum itself: on a sloped trend the block centre is biased.
    c[b] = (static_cast<double>(it - x.begin()) + 0.5 - half) / half;
    use[b] = mx > 0.0;
    y[b] = use[b] ? std::log(mx) : 0.0;
  }
  const std::size_t degree = 5;
  std::vector<double> coef;
  for (int iter = 0; iter < 4; ++iter) {
    if (static_cast<std::size_t>(std::count(use.begin(), use.end(), true)) <= degree + 2)
      return moving_average(moving_max(x, w), w);
    coef = polyfit(c, y, use, degree);
    std::vector<double> res;
    for (std::size_t b = 0; b < n_blocks; ++b)
      if (use[b]) res.push_back(std::abs(y[b] - polyval(coef, c[b])));
    std::nth_element(res.begin(), res.begin() + static_cast<std::ptrdiff_t>(res.size() / 2), res.end());
    const double limit = std::max(3.0 * 1.4826 * res[res.size() / 2], std::log(10.0) * 0.5 / 20.0);
    bool changed = false;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const bool keep = use[b] && std::abs(y[b] - polyval(coef, c[b])) <= limit;
      changed = changed || keep != use[b];
      use[b] = keep;
    }
    if (!changed) break;
  }
  std::vector<double> trend(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) trend[i] = std::exp(polyval(coef, (static_cast<double>(i) + 0.5 - half) / half));
  return trend;
}

}  // namespace detail

/// Divides out the slow envelope trend (see detail::smooth_trend, blocks of
/// `trend_window_symbols`), rescaled by the mean trend so a flat input is
/// unchanged. With segment_s > 0 the trend is estimated per segment, e.g.
/// per chirp period.
inline RealWaveform compensate_envelope(const RealWaveform& env, double baud, std::size_t trend_window_symbols = 64,
                                        double segment_s = 0.0) {
  validate_record(env);
  if (!(baud > 0.0)) fail_physics("invalid-baud");
  std::vector<double> x(env.samples.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::max(env.samples[i], 0.0);
  if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; })) fail_physics("no-signal");

  const double fs = env.timebase.sample_rate_hz;
  const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(trend_window_symbols * fs / baud)));
  std::size_t seg = x.size();
  if (segment_s > 0.0) seg = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(segment_s * fs)));

  std::vector<double> trend(x.size());
  for (std::size_t first = 0; first < x.size(); first += seg) {
    const std::size_t count = std::min(seg, x.size() - first);
    const auto part = std::span<const double>(x).subspan(first, count);
    const auto avg = detail::smooth_trend(part, w);
    std::copy(avg.begin(), avg.end(), trend.begin() + static_cast<std::ptrdiff_t>(first));
  }
  double mean_trend = 0.0;
  for (double v : trend) mean_trend += v;
  mean_trend /= static_cast<double>(trend.size());

  RealWaveform out{env.timebase, std::vector<double>(x.size())};
  for (std::size_t i = 0; i < x.size(); ++i) out.samples[i] = trend[i] > 0.0 ? x[i] * mean_trend / trend[i] : 0.0;
  return out;
}

/// Symbol timing by maximizing the eye opening over a one-symbol offset
/// scan, 2-means threshold, then bit decisions against `ref_bits`.
inline BerReport demod_ask(const RealWaveform& env, double baud, const std::vector<std::uint8_t>& ref_bits) {
  validate_record(env);
  if (!(baud > 0.0)) fail_physics("invalid-baud");
  if (ref_bits.empty()) fail_physics("no-data");
  const double fs = env.timebase.sample_rate_hz;
  const double ts = 1.0 / baud;
  if (env.timebase.duration() + 0.5 / fs < static_cast<double>(ref_bits.size()) * ts)
    fail_physics("record-too-short", "envelope shorter than the reference bits");

  const auto n_offsets = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ts * fs)));
  double best_open = -std::numeric_limits<double>::infinity();
  double best_offset = 0.0;
  detail::TwoLevels best_levels;
  for (std::size_t j = 0; j < n_offsets; ++j) {
    const double off = static_cast<double>(j) / fs;
    const auto v = detail::symbol_samples(env, baud, off, ref_bits.size());
    if (v.size() < ref_bits.size()) continue;
    const auto lv = detail::two_means(v);
    const double o = lv.opening();
    if (o > best_open) {
      best_open = o;
      best_offset = off;
      best_levels = lv;
    }
  }
  if (!std::isfinite(best_open)) fail_numerical("no-modulation", "symbol samples do not form two levels");

  const auto v = detail::symbol_samples(env, baud, best_offset, ref_bits.size());
  BerReport r;
  r.n_bits = ref_bits.size();
  r.threshold_used = best_levels.threshold;
  r.timing_offset_used = best_offset;
  for (std::size_t k = 0; k < ref_bits.size(); ++k) {
    const std::uint8_t decided = v[k] > best_levels.threshold ? 1 : 0;
    if (decided != (ref_bits[k] ? 1 : 0)) ++r.n_errors;
  }
  r.ber = static_cast<double>(r.n_errors) / static_cast<double>(r.n_bits);
  return r;
}

/// Folds the envelope at two-symbol period. Symbol classes come from
/// `ref_bits` when given, otherwise from integrate-and-dump decisions over
/// the central half of each symbol; the opening is then evaluated at every
/// phase of the symbol slot and the best one is kept.
inline EyeDiagram eye_diagram(const RealWaveform& env, double baud,
                              const std::vector<std::uint8_t>* ref_bits = nullptr) {
  validate_record(env);
  if (!(baud > 0.0)) fail_physics("invalid-baud");
  const double fs = env.timebase.sample_rate_hz;
  const double ts = 1.0 / baud;
  const auto n_symbols = static_cast<std::size_t>(std::floor(env.timebase.duration() / ts + 1e-9));
  if (n_symbols < 50) fail_physics("too-few-symbols", "eye diagram needs >= 50 symbols");
  const auto sps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ts * fs)));
  auto symbol_start = [&](std::size_t k) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(k) * ts * fs));
  };

  EyeDiagram eye;
  eye.samples_per_symbol = sps;
  for (std::size_t k = 0; k + 2 <= n_symbols; k += 2) {
    const auto start = symbol_start(k);
    if (start + 2 * sps > env.samples.size()) break;
    eye.trace_matrix.emplace_back(env.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                  env.samples.begin() + static_cast<std::ptrdiff_t>(start + 2 * sps));
  }

  std::vector<std::uint8_t> cls(n_symbols);
  if (ref_bits && !ref_bits->empty()) {
    for (std::size_t k = 0; k < n_symbols; ++k) cls[k] = (*ref_bits)[k % ref_bits->size()] ? 1 : 0;
  } else {
    std::vector<double> dump(n_symbols, 0.0);
    const std::size_t a = sps / 4, b = std::max(a + 1, sps - sps / 4);
    for (std::size_t k = 0; k < n_symbols; ++k) {
      const auto s0 = symbol_start(k);
      std::size_t cnt = 0;
      for (std::size_t j = a; j < b && s0 + j < env.samples.size(); ++j, ++cnt) dump[k] += env.samples[s0 + j];
      if (cnt) dump[k] /= static_cast<double>(cnt);
    }
    const double thr = detail::two_means(dump).threshold;
    for (std::size_t k = 0; k < n_symbols; ++k) cls[k] = dump[k] > thr ? 1 : 0;
  }

  eye.eye_opening = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < sps; ++j) {
    double min_high = std::numeric_limits<double>::infinity();
    double max_low = -std::numeric_limits<double>::infinity();
    double s0 = 0.0, s1 = 0.0;
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t k = 0; k < n_symbols; ++k) {
      const auto i = symbol_start(k) + j;
      if (i >= env.samples.size()) break;
      const double x = env.samples[i];
      if (cls[k]) {
        min_high = std::min(min_high, x);
        s1 += x;
        ++n1;
      } else {
        max_low = std::max(max_low, x);
        s0 += x;
        ++n0;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const double span = s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
    if (!(span > 0.0)) continue;
    const double o = (min_high - max_low) / span;
    if (o > eye.eye_opening) {
      eye.eye_opening = o;
      eye.best_phase = j;
    }
  }
  if (!std::isfinite(eye.eye_opening)) eye.eye_opening = -1.0;
  eye.eye_opening = std::clamp(eye.eye_opening, -1.0, 1.0);
  return eye;
}

}  // namespace jrcss
