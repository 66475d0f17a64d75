#pragma once

// Sampled-record types and the generic DSP primitives shared by every
// stage of the simulator: spectra, zero-phase low-pass filtering,
// decimation, windows and analytic signals.

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "jrcss/error.hpp"
#include "jrcss/fft.hpp"

namespace jrcss {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299'792'458.0;
/// Magnitude reported for exactly-zero spectral bins.
inline constexpr double kFloorDb = -300.0;

struct Timebase {
  double sample_rate_hz = 1.0;
  std::size_t n_samples = 1;
  double t0_s = 0.0;

  double dt() const { return 1.0 / sample_rate_hz; }
  double duration() const { return static_cast<double>(n_samples) / sample_rate_hz; }
  double nyquist_hz() const { return 0.5 * sample_rate_hz; }
  double time_at(std::size_t i) const { return t0_s + static_cast<double>(i) / sample_rate_hz; }

  void validate() const {
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
      fail_physics("invalid-timebase", "sample_rate_hz must be positive");
    if (n_samples < 1) fail_physics("empty-record", "n_samples must be >= 1");
    if (!std::isfinite(t0_s)) fail_physics("invalid-timebase", "t0_s must be finite");
  }

  bool matches(const Timebase& o) const {
    return n_samples == o.n_samples &&
           std::abs(sample_rate_hz - o.sample_rate_hz) <= 1e-12 * sample_rate_hz &&
           std::abs(t0_s - o.t0_s) <= 1e-6 * dt();
  }

  /// Timebase covering `duration_s` starting at `t0_s`.
  static Timebase covering(double sample_rate_hz, double duration_s, double t0_s = 0.0) {
    const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
    Timebase tb{sample_rate_hz, std::max<std::size_t>(n, 1), t0_s};
    tb.validate();
    return tb;
  }
};

struct RealWaveform {
  Timebase timebase;
  std::vector<double> samples;

  static RealWaveform zeros(const Timebase& tb) { return {tb, std::vector<double>(tb.n_samples, 0.0)}; }
  std::size_t size() const { return samples.size(); }
};

/// Complex baseband record centered on `ref_freq_hz`. Optical fields use
/// offsets from the laser carrier; ref_freq_hz is metadata only.
struct ComplexEnvelope {
  Timebase timebase;
  double ref_freq_hz = 0.0;
  std::vector<cplx> samples;

  static ComplexEnvelope zeros(const Timebase& tb, double ref = 0.0) {
    return {tb, ref, std::vector<cplx>(tb.n_samples, cplx{})};
  }
  std::size_t size() const { return samples.size(); }
};

template <class W>
concept SampledRecord = std::same_as<W, RealWaveform> || std::same_as<W, ComplexEnvelope>;

template <SampledRecord W>
inline constexpr bool is_real_record_v = std::is_same_v<W, RealWaveform>;

template <SampledRecord W>
void validate_record(const W& w) {
  w.timebase.validate();
  if (w.samples.size() != w.timebase.n_samples)
    fail_physics("length-mismatch", "samples length differs from timebase.n_samples");
  for (const auto& v : w.samples) {
    if constexpr (is_real_record_v<W>) {
      if (!std::isfinite(v)) fail_physics("non-finite-sample");
    } else {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) fail_physics("non-finite-sample");
    }
  }
}

inline void require_same_timebase(const Timebase& a, const Timebase& b, const char* what) {
  if (!a.matches(b)) fail_physics("timebase-mismatch", what);
}

// ---------------------------------------------------------------------------
// Frequency-domain helpers

namespace detail {

/// Signed frequency of DFT bin k for an N-point transform.
inline double bin_frequency(std::size_t k, std::size_t n, double fs) {
  const auto kk = static_cast<double>(k);
  const auto nn = static_cast<double>(n);
  return (k <= (n - 1) / 2 ? kk : kk - nn) * fs / nn;
}

template <SampledRecord W>
std::vector<cplx> to_complex(const W& w) {
  if constexpr (is_real_record_v<W>) {
    return {w.samples.begin(), w.samples.end()};
  } else {
    return w.samples;
  }
}

template <SampledRecord W>
W from_complex(const W& like, std::vector<cplx>&& data) {
  W out;
  out.timebase = like.timebase;
  if constexpr (is_real_record_v<W>) {
    out.samples.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.samples[i] = data[i].real();
  } else {
    out.ref_freq_hz = like.ref_freq_hz;
    out.samples = std::move(data);
  }
  return out;
}

}  // namespace detail

/// Multiplies the record's DFT by `response(f)` (f signed, in Hz) and
/// transforms back. Circular: the record is treated as one period.
/// For real records the response should be Hermitian; the real part of the
/// result is kept.
template <SampledRecord W, class Response>
W apply_frequency_response(const W& w, Response&& response) {
  auto data = detail::to_complex(w);
  const std::size_t n = data.size();
  if (n < 2) return w;
  fft::forward(data);
  const double fs = w.timebase.sample_rate_hz;
  for (std::size_t k = 0; k < n; ++k) data[k] *= response(detail::bin_frequency(k, n, fs));
  fft::inverse(data);
  return detail::from_complex(w, std::move(data));
}

// ---------------------------------------------------------------------------
// Windows and spectra

enum class WindowKind { rectangular, hann, hamming, blackman };

/// DFT-even (periodic) window of length n.
inline std::vector<double> make_window(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = kTwoPi * static_cast<double>(i) / nn;
    switch (kind) {
      case WindowKind::rectangular: break;
      case WindowKind::hann: w[i] = 0.5 - 0.5 * std::cos(x); break;
      case WindowKind::hamming: w[i] = 0.54 - 0.46 * std::cos(x); break;
      case WindowKind::blackman: w[i] = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x); break;
    }
  }
  return w;
}

/// Amplitude spectrum: a unit-amplitude real tone reads 0 dB. Real records
/// give the one-sided spectrum [0, fs/2]; complex records give the two-sided
/// spectrum of offsets from ref_freq_hz, ordered from -fs/2 upward.
struct Spectrum {
  std::vector<double> freq_axis_hz;
  std::vector<double> magnitude_db;
  std::vector<double> phase_rad;
  std::size_t n_fft = 0;
  bool onesided = true;
  /// Sum of window samples; needed to undo the amplitude normalization.
  double window_sum = 0.0;
};

namespace detail {

inline double amplitude_to_db(double a) { return a > 0.0 ? 20.0 * std::log10(a) : kFloorDb; }
inline double db_to_amplitude(double db) { return db <= kFloorDb ? 0.0 : std::pow(10.0, db / 20.0); }

/// Map from Spectrum bin index to DFT bin index, plus the per-bin scale c.
inline std::size_t spectrum_to_dft_index(const Spectrum& s, std::size_t i) {
  if (s.onesided) return i;
  const std::size_t n = s.n_fft;
  const std::size_t half = n / 2;
  return (i + n - half) % n;  // undo fftshift
}

inline double onesided_scale(std::size_t k, std::size_t n) {
  if (k == 0) return 1.0;
  if (n % 2 == 0 && k == n / 2) return 1.0;
  return 2.0;
}

}  // namespace detail

template <SampledRecord W>
Spectrum fft_spectrum(const W& w, WindowKind window = WindowKind::hann) {
  const std::size_t n = w.samples.size();
  if (n == 0) fail_physics("empty-record");
  if (n < 2) fail_physics("record-too-short", "fft_spectrum needs at least 2 samples");
  const auto win = make_window(window, n);
  std::vector<cplx> data = detail::to_complex(w);
  for (std::size_t i = 0; i < n; ++i) data[i] *= win[i];
  fft::forward(data);

  Spectrum s;
  s.n_fft = n;
  s.window_sum = std::accumulate(win.begin(), win.end(), 0.0);
  s.onesided = is_real_record_v<W>;
  const double fs = w.timebase.sample_rate_hz;
  const std::size_t m = s.onesided ? n / 2 + 1 : n;
  s.freq_axis_hz.resize(m);
  s.magnitude_db.resize(m);
  s.phase_rad.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t k = detail::spectrum_to_dft_index(s, i);
    const double scale = s.onesided ? detail::onesided_scale(k, n) : 1.0;
    const cplx x = data[k];
    s.freq_axis_hz[i] = s.onesided ? static_cast<double>(k) * fs / static_cast<double>(n)
                                   : detail::bin_frequency(k, n, fs);
    s.magnitude_db[i] = detail::amplitude_to_db(scale * std::abs(x) / s.window_sum);
    s.phase_rad[i] = std::arg(x);
  }
  return s;
}

namespace detail {

inline std::vector<cplx> spectrum_to_dft(const Spectrum& s) {
  const std::size_t n = s.n_fft;
  std::vector<cplx> data(n, cplx{});
  for (std::size_t i = 0; i < s.magnitude_db.size(); ++i) {
    const std::size_t k = spectrum_to_dft_index(s, i);
    const double scale = s.onesided ? onesided_scale(k, n) : 1.0;
    const double mag = db_to_amplitude(s.magnitude_db[i]) * s.window_sum / scale;
    data[k] = std::polar(mag, s.phase_rad[i]);
    if (s.onesided && k != 0 && !(n % 2 == 0 && k == n / 2)) data[n - k] = std::conj(data[k]);
  }
  return data;
}

}  // namespace detail

/// Time-domain energy sum |x_w[n]|^2 of the windowed record, recomputed from
/// the spectrum (Parseval).
inline double spectral_energy(const Spectrum& s) {
  const auto data = detail::spectrum_to_dft(s);
  double e = 0.0;
  for (const auto& v : data) e += std::norm(v);
  return e / static_cast<double>(s.n_fft);
}

/// Rebuilds the (windowed) real record from a one-sided spectrum.
inline RealWaveform inverse_spectrum_real(const Spectrum& s, const Timebase& tb) {
  if (!s.onesided) fail_physics("spectrum-kind", "two-sided spectrum cannot rebuild a real record");
  auto data = detail::spectrum_to_dft(s);
  fft::inverse(data);
  RealWaveform out{tb, std::vector<double>(data.size())};
  for (std::size_t i = 0; i < data.size(); ++i) out.samples[i] = data[i].real();
  return out;
}

inline ComplexEnvelope inverse_spectrum_complex(const Spectrum& s, const Timebase& tb, double ref_freq_hz = 0.0) {
  if (s.onesided) fail_physics("spectrum-kind", "one-sided spectrum cannot rebuild a complex record");
  auto data = detail::spectrum_to_dft(s);
  fft::inverse(data);
  return {tb, ref_freq_hz, std::move(data)};
}

// ---------------------------------------------------------------------------
// Filtering

/// Zero-phase low-pass mask: flat to 0.9 x cutoff, raised-cosine roll-off,
/// zero from 1.1 x cutoff.
inline double lowpass_mask(double f_abs, double cutoff_hz) {
  const double lo = 0.9 * cutoff_hz;
  const double hi = 1.1 * cutoff_hz;
  if (f_abs <= lo) return 1.0;
  if (f_abs >= hi) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * (f_abs - lo) / (hi - lo)));
}

/// Highest frequency passed without attenuation by lowpass(cutoff).
inline double lowpass_flat_edge(double cutoff_hz) { return 0.9 * cutoff_hz; }

template <SampledRecord W>
W lowpass(const W& w, double cutoff_hz) {
  if (w.samples.empty()) fail_physics("empty-record");
  if (!(cutoff_hz > 0.0)) fail_physics("invalid-cutoff", "cutoff must be positive");
  if (cutoff_hz >= w.timebase.nyquist_hz()) fail_physics("cutoff-above-nyquist");
  return apply_frequency_response(w, [cutoff_hz](double f) { return cplx{lowpass_mask(std::abs(f), cutoff_hz), 0.0}; });
}

/// Anti-alias cutoff used by decimate() for a given output rate.
inline double decimation_cutoff(double output_rate_hz) { return 0.5 * output_rate_hz / 1.1; }

template <SampledRecord W>
W decimate(const W& w, std::size_t factor) {
  if (factor < 1) fail_physics("invalid-factor", "decimation factor must be >= 1");
  if (factor == 1) return w;
  const std::size_t n_out = (w.samples.size() + factor - 1) / factor;
  if (n_out < 2) fail_physics("record-too-short");
  const double out_rate = w.timebase.sample_rate_hz / static_cast<double>(factor);
  const W filtered = lowpass(w, decimation_cutoff(out_rate));
  W out;
  out.timebase = {out_rate, n_out, w.timebase.t0_s};
  if constexpr (!is_real_record_v<W>) out.ref_freq_hz = w.ref_freq_hz;
  out.samples.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) out.samples[i] = filtered.samples[i * factor];
  return out;
}

/// Integer decimation factor taking `from_hz` to `to_hz`; throws when the
/// ratio is not integral.
inline std::size_t decimation_factor(double from_hz, double to_hz) {
  if (!(to_hz > 0.0) || to_hz > from_hz * (1.0 + 1e-12))
    fail_physics("rate-not-achievable", "target rate must be in (0, source rate]");
  const double ratio = from_hz / to_hz;
  const double r = std::round(ratio);
  if (std::abs(ratio - r) > 1e-9 * ratio) fail_physics("rate-not-achievable", "non-integer decimation ratio");
  return static_cast<std::size_t>(r);
}

/// Analytic signal x + j H{x}; a real cosine becomes a unit phasor.
inline ComplexEnvelope analytic_signal(const RealWaveform& w) {
  std::vector<cplx> data(w.samples.begin(), w.samples.end());
  const std::size_t n = data.size();
  if (n < 2) fail_physics("record-too-short");
  fft::forward(data);
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (n % 2 == 0 && k == half) continue;
    data[k] *= (k < (n + 1) / 2) ? 2.0 : 0.0;
  }
  fft::inverse(data);
  return {w.timebase, 0.0, std::move(data)};
}

/// |analytic(x)|. Used as an independent envelope reference.
inline RealWaveform hilbert_envelope(const RealWaveform& w) {
  const auto a = analytic_signal(w);
  RealWaveform out{w.timebase, std::vector<double>(a.samples.size())};
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = std::abs(a.samples[i]);
  return out;
}

/// Amplitude factor for a suppression given in dB; infinity maps to 0.
inline double db_suppression_to_amplitude(double db) {
  return std::isinf(db) ? 0.0 : std::pow(10.0, -db / 20.0);
}

inline double mean_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

inline double mean_power(std::span<const cplx> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (const auto& v : x) s += std::norm(v);
  return s / static_cast<double>(x.size());
}

/// Amplitude of the real tone at `freq_hz` by correlation over the record.
inline double tone_amplitude(const RealWaveform& w, double freq_hz) {
  cplx acc{};
  const double fs = w.timebase.sample_rate_hz;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double ph = kTwoPi * freq_hz * static_cast<double>(i) / fs;
    acc += w.samples[i] * cplx{std::cos(ph), -std::sin(ph)};
  }
  const double scale = (freq_hz == 0.0) ? 1.0 : 2.0;
  return scale * std::abs(acc) / static_cast<double>(w.samples.size());
}

/// Copy of samples [first, first + count) as a new record.
template <SampledRecord W>
W slice(const W& w, std::size_t first, std::size_t count) {
  if (first + count > w.samples.size() || count == 0) fail_physics("slice-out-of-range");
  W out;
  out.timebase = {w.timebase.sample_rate_hz, count, w.timebase.time_at(first)};
  if constexpr (!is_real_record_v<W>) out.ref_freq_hz = w.ref_freq_hz;
  out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(first),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

}  // namespace jrcss
