#pragma once

// De-chirp receiver: beat formation, range profiles, peak ranging and
// range-Doppler ISAR imaging with point-spread metrology.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "jrcss/signal_core.hpp"
#include "jrcss/waveform_tx.hpp"

namespace jrcss {

/// Beat frequency to range: R = f_b c T / (2 f_B).
inline double beat_to_range(double beat_hz, const ChirpPlan& chirp) {
  return beat_hz * kSpeedOfLight * chirp.period_s / (2.0 * chirp.bandwidth_hz());
}

inline double range_to_beat(double range_m, const ChirpPlan& chirp) {
  return 2.0 * range_m * chirp.bandwidth_hz() / (chirp.period_s * kSpeedOfLight);
}

struct RangeProfile {
  std::vector<double> range_axis_m;
  std::vector<double> magnitude_db;
  std::vector<double> beat_freq_axis_hz;
};

struct RangePeak {
  double range_m = 0.0;
  double beat_hz = 0.0;
  double magnitude_db = 0.0;
  double width_3db_m = 0.0;
};

struct RangeEstimate {
  std::vector<RangePeak> peaks;
  /// True when fewer peaks than requested were found above the floor.
  bool incomplete = false;
};

struct RangeProfileOptions {
  WindowKind window = WindowKind::rectangular;
  std::size_t zero_pad = 8;
  std::size_t sweep_index = 0;
};

inline RealWaveform dechirp(const RealWaveform& rx, const RealWaveform& lo, double if_lowpass_hz) {
  require_same_timebase(rx.timebase, lo.timebase, "dechirp: rx and lo");
  validate_record(rx);
  validate_record(lo);
  RealWaveform prod{rx.timebase, std::vector<double>(rx.samples.size())};
  for (std::size_t i = 0; i < prod.samples.size(); ++i) prod.samples[i] = rx.samples[i] * lo.samples[i];
  return lowpass(prod, if_lowpass_hz);
}

namespace detail {

/// Decimates a beat record to the ADC rate after checking that its dominant
/// component lies below the ADC Nyquist rate.
inline RealWaveform beat_to_adc(const RealWaveform& beat, double adc_rate_hz) {
  validate_record(beat);
  const std::size_t factor = decimation_factor(beat.timebase.sample_rate_hz, adc_rate_hz);
  if (factor == 1) return beat;
  std::vector<cplx> data(beat.samples.begin(), beat.samples.end());
  fft::forward(data);
  const std::size_t n = data.size();
  std::size_t best = 0;
  double best_mag = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double m = std::abs(data[k]);
    if (m > best_mag) {
      best_mag = m;
      best = k;
    }
  }
  const double f_peak = static_cast<double>(best) * beat.timebase.sample_rate_hz / static_cast<double>(n);
  // Beats between the flat edge and Nyquist are attenuated, not aliased.
  if (best_mag > 0.0 && f_peak >= 0.5 * adc_rate_hz)
    fail_physics("adc-undersampled", "dominant beat above the ADC Nyquist rate");
  return decimate(beat, factor);
}

/// Windowed, zero-padded FFT of one sweep; returns the non-negative bins
/// normalized so a unit tone reads amplitude 1.
inline std::vector<cplx> range_fft(std::span<const double> segment, WindowKind window, std::size_t zero_pad) {
  const std::size_t n = segment.size();
  const std::size_t nfft = n * std::max<std::size_t>(zero_pad, 1);
  const auto win = make_window(window, n);
  const double wsum = std::accumulate(win.begin(), win.end(), 0.0);
  std::vector<cplx> data(nfft, cplx{});
  for (std::size_t i = 0; i < n; ++i) data[i] = segment[i] * win[i];
  fft::forward(data);
  data.resize(nfft / 2 + 1);
  for (std::size_t k = 0; k < data.size(); ++k) data[k] *= (k == 0 ? 1.0 : 2.0) / wsum;
  return data;
}

inline std::size_t samples_per_sweep(const ChirpPlan& chirp, double rate_hz) {
  return static_cast<std::size_t>(std::llround(chirp.period_s * rate_hz));
}

/// Offset of the vertex of the parabola through (-1,a), (0,b), (1,c).
inline double parabolic_offset(double a, double b, double c) {
  const double den = a - 2.0 * b + c;
  if (den >= 0.0) return 0.0;
  return std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
}

/// Width between the -3 dB crossings around index `peak` of a dB curve,
/// in index units, or a negative value when a crossing is missing.
inline double width_3db_index(std::span<const double> db, std::size_t peak, double peak_db) {
  const double level = peak_db - 3.0;
  double left = -1.0, right = -1.0;
  for (std::size_t i = peak; i > 0; --i) {
    if (db[i - 1] < level) {
      left = static_cast<double>(i - 1) + (level - db[i - 1]) / (db[i] - db[i - 1]);
      break;
    }
  }
  for (std::size_t i = peak; i + 1 < db.size(); ++i) {
    if (db[i + 1] < level) {
      right = static_cast<double>(i) + (db[i] - level) / (db[i] - db[i + 1]);
      break;
    }
  }
  if (left < 0.0 || right < 0.0) return -1.0;
  return right - left;
}

}  // namespace detail

inline RangeProfile range_profile(const RealWaveform& beat, const ChirpPlan& chirp, double adc_rate_hz,
                                  const RangeProfileOptions& opt = {}) {
  chirp.validate();
  const RealWaveform adc = detail::beat_to_adc(beat, adc_rate_hz);
  const std::size_t n = detail::samples_per_sweep(chirp, adc_rate_hz);
  const std::size_t first = opt.sweep_index * n;
  if (n < 2 || first + n > adc.samples.size()) fail_physics("record-too-short", "beat shorter than the requested sweep");
  const auto bins = detail::range_fft(std::span<const double>(adc.samples).subspan(first, n), opt.window, opt.zero_pad);
  const double df = adc_rate_hz / static_cast<double>(n * std::max<std::size_t>(opt.zero_pad, 1));
  RangeProfile p;
  p.beat_freq_axis_hz.resize(bins.size());
  p.range_axis_m.resize(bins.size());
  p.magnitude_db.resize(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) {
    p.beat_freq_axis_hz[k] = static_cast<double>(k) * df;
    p.range_axis_m[k] = beat_to_range(p.beat_freq_axis_hz[k], chirp);
    p.magnitude_db[k] = detail::amplitude_to_db(std::abs(bins[k]));
  }
  return p;
}

/// Local maxima within `dynamic_range_db` of the strongest bin, refined by
/// 3-point parabolic interpolation on dB and sorted by magnitude.
inline RangeEstimate estimate_range(const RangeProfile& profile, std::size_t n_peaks, double dynamic_range_db = 30.0) {
  if (n_peaks < 1) fail_physics("invalid-peak-count", "n_peaks must be >= 1");
  const auto& db = profile.magnitude_db;
  RangeEstimate est;
  if (db.size() < 3) {
    est.incomplete = true;
    return est;
  }
  const double top = *std::max_element(db.begin(), db.end());
  const double floor = std::max(top - dynamic_range_db, kFloorDb + 1.0);
  const double dr = profile.range_axis_m[1] - profile.range_axis_m[0];
  const double df = profile.beat_freq_axis_hz[1] - profile.beat_freq_axis_hz[0];
  for (std::size_t i = 1; i + 1 < db.size(); ++i) {
    if (!(db[i] > db[i - 1] && db[i] >= db[i + 1]) || db[i] < floor) continue;
    const double d = detail::parabolic_offset(db[i - 1], db[i], db[i + 1]);
    const double peak_db = db[i] - 0.25 * (db[i - 1] - db[i + 1]) * d;
    RangePeak pk;
    pk.range_m = profile.range_axis_m[i] + d * dr;
    pk.beat_hz = profile.beat_freq_axis_hz[i] + d * df;
    pk.magnitude_db = peak_db;
    const double w = detail::width_3db_index(db, i, peak_db);
    pk.width_3db_m = w > 0.0 ? w * dr : 0.0;
    est.peaks.push_back(pk);
  }
  std::stable_sort(est.peaks.begin(), est.peaks.end(),
                   [](const RangePeak& a, const RangePeak& b) { return a.magnitude_db > b.magnitude_db; });
  if (est.peaks.size() > n_peaks) est.peaks.resize(n_peaks);
  est.incomplete = est.peaks.size() < n_peaks;
  return est;
}

// ---------------------------------------------------------------------------
// ISAR

struct IsarMeta {
  double lambda_m = 0.0;
  double delta_theta_rad = 0.0;
  std::size_t n_sweeps = 0;
};

struct IsarImage {
  std::vector<double> range_axis_m;
  std::vector<double> crossrange_axis_m;
  /// intensity_db[r][x], normalized to 0 dB peak.
  std::vector<std::vector<double>> intensity_db;
  IsarMeta meta;

  /// Cross-range extent of one Doppler resolution cell.
  double crossrange_cell_m() const { return meta.lambda_m / (2.0 * meta.delta_theta_rad); }
};

struct BeatSweep {
  double slow_time_s = 0.0;
  RealWaveform beat;
};

struct IsarOptions {
  double adc_rate_hz = 40e6;
  std::size_t range_zero_pad = 4;
  std::size_t doppler_zero_pad = 4;
  WindowKind range_window = WindowKind::rectangular;
  WindowKind doppler_window = WindowKind::rectangular;
  /// Range cells beyond this are dropped from the image (0 keeps all).
  double max_range_m = 0.0;
};

/// Range-Doppler imaging: per-sweep range FFT, then a slow-time FFT per range
/// cell. Cross-range x = f_D * lambda / (2 omega) with omega the turntable
/// rate, which gives cells of lambda / (2 delta_theta).
inline IsarImage isar_image(const std::vector<BeatSweep>& sweeps, const ChirpPlan& chirp, double center_freq_hz,
                            double accumulation_s, double rotation_period_s, const IsarOptions& opt = {}) {
  chirp.validate();
  if (sweeps.size() < 8) fail_physics("too-few-sweeps", "ISAR needs at least 8 sweeps");
  if (!(center_freq_hz > 0.0) || !(accumulation_s > 0.0) || !(rotation_period_s > 0.0))
    fail_physics("invalid-isar", "center frequency, accumulation and rotation period must be positive");
  const std::size_t m = sweeps.size();
  const double pri = (sweeps.back().slow_time_s - sweeps.front().slow_time_s) / static_cast<double>(m - 1);
  if (!(pri > 0.0)) fail_physics("non-uniform-slow-time", "slow times must increase");
  for (std::size_t i = 1; i < m; ++i) {
    const double d = sweeps[i].slow_time_s - sweeps[i - 1].slow_time_s;
    if (std::abs(d - pri) > 1e-6 * pri) fail_physics("non-uniform-slow-time");
  }

  // Range compression.
  const std::size_t n = detail::samples_per_sweep(chirp, opt.adc_rate_hz);
  std::vector<std::vector<cplx>> rc(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto adc = detail::beat_to_adc(sweeps[i].beat, opt.adc_rate_hz);
    if (adc.samples.size() < n) fail_physics("record-too-short", "beat shorter than one sweep");
    rc[i] = detail::range_fft(std::span<const double>(adc.samples).first(n), opt.range_window, opt.range_zero_pad);
  }
  const double df = opt.adc_rate_hz / static_cast<double>(n * std::max<std::size_t>(opt.range_zero_pad, 1));
  std::size_t n_range = rc.front().size();
  if (opt.max_range_m > 0.0)
    n_range = std::min(n_range, static_cast<std::size_t>(range_to_beat(opt.max_range_m, chirp) / df) + 1);

  IsarImage img;
  img.meta.lambda_m = kSpeedOfLight / center_freq_hz;
  img.meta.delta_theta_rad = kTwoPi * accumulation_s / rotation_period_s;
  img.meta.n_sweeps = m;
  img.range_axis_m.resize(n_range);
  for (std::size_t k = 0; k < n_range; ++k) img.range_axis_m[k] = beat_to_range(static_cast<double>(k) * df, chirp);

  // Azimuth compression.
  const std::size_t md = m * std::max<std::size_t>(opt.doppler_zero_pad, 1);
  const auto win = make_window(opt.doppler_window, m);
  const double omega = kTwoPi / rotation_period_s;
  img.crossrange_axis_m.resize(md);
  for (std::size_t j = 0; j < md; ++j) {
    const double fd = (static_cast<double>(j) - static_cast<double>(md / 2)) / (static_cast<double>(md) * pri);
    img.crossrange_axis_m[j] = fd * img.meta.lambda_m / (2.0 * omega);
  }
  img.intensity_db.assign(n_range, std::vector<double>(md, kFloorDb));
  double peak = 0.0;
  std::vector<std::vector<double>> power(n_range, std::vector<double>(md));
  std::vector<cplx> col(md);
  for (std::size_t k = 0; k < n_range; ++k) {
    std::fill(col.begin(), col.end(), cplx{});
    for (std::size_t i = 0; i < m; ++i) col[i] = rc[i][k] * win[i];
    fft::forward(col);
    for (std::size_t j = 0; j < md; ++j) {
      const double p = std::norm(col[(j + md - md / 2) % md]);
      power[k][j] = p;
      peak = std::max(peak, p);
    }
  }
  if (peak > 0.0) {
    for (std::size_t k = 0; k < n_range; ++k)
      for (std::size_t j = 0; j < md; ++j)
        img.intensity_db[k][j] = power[k][j] > 0.0 ? 10.0 * std::log10(power[k][j] / peak) : kFloorDb;
  }
  return img;
}

struct PsfMetrics {
  double range_res_3db_m = 0.0;
  double crossrange_res_3db_m = 0.0;
  double peak_range_m = 0.0;
  double peak_crossrange_m = 0.0;
};

/// 3-dB widths of the dominant point response along both image axes.
inline PsfMetrics measure_psf(const IsarImage& image) {
  const auto& g = image.intensity_db;
  if (g.size() < 3 || g.front().size() < 3) fail_numerical("psf-ambiguous", "image too small");
  std::size_t pr = 0, px = 0;
  for (std::size_t r = 0; r < g.size(); ++r)
    for (std::size_t x = 0; x < g[r].size(); ++x)
      if (g[r][x] > g[pr][px]) {
        pr = r;
        px = x;
      }
  if (pr == 0 || px == 0 || pr + 1 >= g.size() || px + 1 >= g[pr].size())
    fail_numerical("psf-ambiguous", "peak on the image border");

  std::vector<double> rcut(g.size()), xcut = g[pr];
  for (std::size_t r = 0; r < g.size(); ++r) rcut[r] = g[r][px];
  const double dr_off = detail::parabolic_offset(rcut[pr - 1], rcut[pr], rcut[pr + 1]);
  const double dx_off = detail::parabolic_offset(xcut[px - 1], xcut[px], xcut[px + 1]);
  const double rpk = rcut[pr] - 0.25 * (rcut[pr - 1] - rcut[pr + 1]) * dr_off;
  const double xpk = xcut[px] - 0.25 * (xcut[px - 1] - xcut[px + 1]) * dx_off;
  const double wr = detail::width_3db_index(rcut, pr, rpk);
  const double wx = detail::width_3db_index(xcut, px, xpk);
  if (wr <= 0.0 || wx <= 0.0) fail_numerical("psf-ambiguous", "3-dB crossing not found");

  // Another local maximum within 3 dB of the main one means no isolated point.
  for (std::size_t r = 1; r + 1 < g.size(); ++r) {
    for (std::size_t x = 1; x + 1 < g[r].size(); ++x) {
      if (r == pr && x == px) continue;
      const double v = g[r][x];
      if (v < g[pr][px] - 3.0) continue;
      if (v > g[r - 1][x] && v > g[r + 1][x] && v > g[r][x - 1] && v > g[r][x + 1])
        fail_numerical("psf-ambiguous", "secondary peak within 3 dB");
    }
  }

  const double dr = image.range_axis_m[1] - image.range_axis_m[0];
  const double dx = image.crossrange_axis_m[1] - image.crossrange_axis_m[0];
  PsfMetrics m;
  m.range_res_3db_m = wr * dr;
  m.crossrange_res_3db_m = wx * dx;
  m.peak_range_m = image.range_axis_m[pr] + dr_off * dr;
  m.peak_crossrange_m = image.crossrange_axis_m[px] + dx_off * dx;
  return m;
}

/// Depth in dB of the deepest dip between two points of the image along the
/// straight line joining them, relative to the weaker endpoint maximum.
/// Endpoints are snapped to the local maximum within `search` cells.
inline double valley_depth_db(const IsarImage& image, double r1, double x1, double r2, double x2, int search = 3) {
  const auto& g = image.intensity_db;
  auto nearest = [](const std::vector<double>& axis, double v) {
    const auto it = std::min_element(axis.begin(), axis.end(),
                                     [v](double a, double b) { return std::abs(a - v) < std::abs(b - v); });
    return static_cast<long>(it - axis.begin());
  };
  auto snap = [&](long r, long x) {
    long br = r, bx = x;
    for (long dr = -search; dr <= search; ++dr)
      for (long dx = -search; dx <= search; ++dx) {
        const long rr = r + dr, xx = x + dx;
        if (rr < 0 || xx < 0 || rr >= static_cast<long>(g.size()) || xx >= static_cast<long>(g[0].size())) continue;
        if (g[rr][xx] > g[br][bx]) {
          br = rr;
          bx = xx;
        }
      }
    return std::pair{br, bx};
  };
  const auto [ar, ax] = snap(nearest(image.range_axis_m, r1), nearest(image.crossrange_axis_m, x1));
  const auto [br, bx] = snap(nearest(image.range_axis_m, r2), nearest(image.crossrange_axis_m, x2));
  const double weaker = std::min(g[ar][ax], g[br][bx]);
  const long steps = std::max(std::abs(br - ar), std::abs(bx - ax));
  if (steps < 2) return 0.0;
  double lowest = weaker;
  for (long s = 1; s < steps; ++s) {
    const double u = static_cast<double>(s) / static_cast<double>(steps);
    const auto rr = static_cast<std::size_t>(std::lround(static_cast<double>(ar) + u * static_cast<double>(br - ar)));
    const auto xx = static_cast<std::size_t>(std::lround(static_cast<double>(ax) + u * static_cast<double>(bx - ax)));
    lowest = std::min(lowest, g[rr][xx]);
  }
  return weaker - lowest;
}

}  // namespace jrcss
