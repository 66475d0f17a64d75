#pragma once

// Spectrum-sensing optical front end: signal-under-test synthesis, CS-DSB
// modulation of the swept probe, the SBS gain window and PD1.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "jrcss/signal_core.hpp"

namespace jrcss {

/// SBS gain window. The pump is taken f_x below the laser carrier, so the
/// gain is centered at offset -(bfs + pump_offset) and a sweep over
/// [-f_SBS, -f_SBS + f_B] senses [f_x, f_x + f_B].
struct SbsFilterSpec {
  double bfs_hz = 10.8e9;
  double pump_offset_hz = 0.0;
  double linewidth_hz = 20e6;
  double peak_gain_db = 20.0;
  bool include_phase = false;

  double center_offset_hz() const { return -(bfs_hz + pump_offset_hz); }

  /// Gain in dB at detuning `delta_hz` from the window center.
  double gain_db(double delta_hz) const {
    const double hw = 0.5 * linewidth_hz;
    return peak_gain_db * hw * hw / (delta_hz * delta_hz + hw * hw);
  }

  /// Complex field transfer at detuning `delta_hz`.
  cplx transfer(double delta_hz) const {
    const double amp_log = peak_gain_db * std::log(10.0) / 20.0;
    if (!include_phase) return {std::exp(amp_log / (1.0 + std::pow(2.0 * delta_hz / linewidth_hz, 2))), 0.0};
    // exp(g / (1 + jx)): real part is the Lorentzian, imaginary part its
    // Kramers-Kronig companion.
    const cplx x{1.0, 2.0 * delta_hz / linewidth_hz};
    return std::exp(amp_log / x);
  }

  void validate() const {
    if (!(bfs_hz > 0.0)) fail_physics("invalid-sbs", "bfs_hz must be positive");
    if (!(linewidth_hz > 0.0)) fail_physics("invalid-sbs", "linewidth_hz must be positive");
    if (!(linewidth_hz < 0.1 * bfs_hz)) fail_physics("invalid-sbs", "linewidth must be much smaller than bfs");
    if (!(peak_gain_db > 0.0) || !std::isfinite(peak_gain_db))
      fail_physics("invalid-sbs", "peak_gain_db must be positive and finite");
    if (!std::isfinite(pump_offset_hz)) fail_physics("invalid-sbs", "pump_offset_hz must be finite");
  }
};

enum class SutKind { tone, multitone, lfm, nlfm, step_frequency, custom };

/// Signal under test. Every kind except multitone follows one
/// instantaneous-frequency trajectory and is phase-continuous in time.
struct SutSpec {
  SutKind kind = SutKind::tone;
  double amplitude = 1.0;
  double duration_s = 8e-6;
  /// tone: first entry; multitone: all entries; step_frequency: the steps.
  std::vector<double> freqs_hz{1e9};
  // lfm
  double f_start_hz = 0.0;
  double f_stop_hz = 6e9;
  double period_s = 500e-6;
  bool triangular = false;
  // nlfm: f(tau) = sum_k coeffs[k] * tau^k, tau = time within period_s
  std::vector<double> poly_coeffs;
  // step_frequency
  double dwell_s = 20e-6;
  // custom: piecewise-linear (t, f) points, periodic with the last t
  std::vector<std::pair<double, double>> if_table;

  double instantaneous_frequency(double t) const {
    switch (kind) {
      case SutKind::tone:
      case SutKind::multitone: return freqs_hz.empty() ? 0.0 : freqs_hz.front();
      case SutKind::lfm: {
        const double tau = wrap(t, period_s);
        if (!triangular) return f_start_hz + (f_stop_hz - f_start_hz) * tau / period_s;
        const double h = 0.5 * period_s;
        return tau < h ? f_start_hz + (f_stop_hz - f_start_hz) * tau / h
                       : f_stop_hz - (f_stop_hz - f_start_hz) * (tau - h) / h;
      }
      case SutKind::nlfm: {
        const double tau = wrap(t, period_s);
        double f = 0.0, p = 1.0;
        for (double c : poly_coeffs) {
          f += c * p;
          p *= tau;
        }
        return f;
      }
      case SutKind::step_frequency: {
        const double tau = wrap(t, dwell_s * static_cast<double>(freqs_hz.size()));
        const auto j = std::min(freqs_hz.size() - 1, static_cast<std::size_t>(tau / dwell_s));
        return freqs_hz[j];
      }
      case SutKind::custom: {
        const double tau = wrap(t, if_table.back().first);
        for (std::size_t i = 1; i < if_table.size(); ++i) {
          const auto [t0, f0] = if_table[i - 1];
          const auto [t1, f1] = if_table[i];
          if (tau <= t1) return t1 > t0 ? f0 + (f1 - f0) * (tau - t0) / (t1 - t0) : f1;
        }
        return if_table.back().second;
      }
    }
    return 0.0;
  }

  /// Accumulated phase in cycles, split as (whole-period part, remainder) so
  /// the fractional part survives long records.
  double phase_fraction(double t) const {
    double periods = 0.0, per_period = 0.0, local = 0.0;
    switch (kind) {
      case SutKind::tone:
      case SutKind::multitone: {
        const double c = freqs_hz.front() * t;
        return c - std::floor(c);
      }
      case SutKind::lfm: {
        periods = std::floor(t / period_s);
        const double tau = t - periods * period_s;
        per_period = 0.5 * (f_start_hz + f_stop_hz) * period_s;
        if (!triangular) {
          local = f_start_hz * tau + 0.5 * (f_stop_hz - f_start_hz) / period_s * tau * tau;
        } else {
          const double h = 0.5 * period_s;
          const double k = (f_stop_hz - f_start_hz) / h;
          if (tau < h) {
            local = f_start_hz * tau + 0.5 * k * tau * tau;
          } else {
            const double u = tau - h;
            local = 0.5 * (f_start_hz + f_stop_hz) * h + f_stop_hz * u - 0.5 * k * u * u;
          }
        }
        break;
      }
      case SutKind::nlfm: {
        periods = std::floor(t / period_s);
        const double tau = t - periods * period_s;
        per_period = poly_integral(period_s);
        local = poly_integral(tau);
        break;
      }
      case SutKind::step_frequency: {
        const double period = dwell_s * static_cast<double>(freqs_hz.size());
        periods = std::floor(t / period);
        double tau = t - periods * period;
        for (double f : freqs_hz) per_period += f * dwell_s;
        for (double f : freqs_hz) {
          const double d = std::min(tau, dwell_s);
          local += f * d;
          tau -= d;
          if (tau <= 0.0) break;
        }
        break;
      }
      case SutKind::custom: {
        const double period = if_table.back().first;
        periods = std::floor(t / period);
        const double tau = t - periods * period;
        per_period = table_integral(period);
        local = table_integral(tau);
        break;
      }
    }
    const double whole = per_period * periods;
    return frac(frac(whole) + frac(local));
  }

  /// Largest frequency the trajectory reaches.
  double max_frequency_hz() const {
    switch (kind) {
      case SutKind::tone:
      case SutKind::multitone:
      case SutKind::step_frequency: return freqs_hz.empty() ? 0.0 : *std::max_element(freqs_hz.begin(), freqs_hz.end());
      case SutKind::lfm: return std::max(f_start_hz, f_stop_hz);
      case SutKind::nlfm:
      case SutKind::custom: {
        double m = 0.0;
        const double period = kind == SutKind::nlfm ? period_s : if_table.back().first;
        for (int i = 0; i <= 1000; ++i) m = std::max(m, instantaneous_frequency(period * i / 1000.0 * 0.999999));
        return m;
      }
    }
    return 0.0;
  }

  void validate() const {
    if (!(duration_s > 0.0)) fail_physics("invalid-sut", "duration_s must be positive");
    if (amplitude < 0.0) fail_physics("invalid-sut", "amplitude must be >= 0");
    switch (kind) {
      case SutKind::tone:
      case SutKind::multitone:
        if (freqs_hz.empty()) fail_physics("invalid-sut", "freqs_hz is empty");
        break;
      case SutKind::lfm:
        if (!(period_s > 0.0)) fail_physics("invalid-sut", "period_s must be positive");
        break;
      case SutKind::nlfm:
        if (!(period_s > 0.0) || poly_coeffs.empty()) fail_physics("invalid-sut", "nlfm needs period_s and coefficients");
        break;
      case SutKind::step_frequency:
        if (freqs_hz.empty() || !(dwell_s > 0.0)) fail_physics("invalid-sut", "step needs frequencies and dwell_s");
        break;
      case SutKind::custom:
        if (if_table.size() < 2 || !(if_table.back().first > 0.0))
          fail_physics("invalid-sut", "custom table needs >= 2 points and positive span");
        for (std::size_t i = 1; i < if_table.size(); ++i)
          if (if_table[i].first < if_table[i - 1].first) fail_physics("invalid-sut", "custom table times must be sorted");
        break;
    }
  }

  /// Evenly spaced step-frequency list from `start` to `stop` inclusive.
  static std::vector<double> steps(double start_hz, double stop_hz, double step_hz) {
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::llround((stop_hz - start_hz) / step_hz)) + 1;
    for (std::size_t i = 0; i < n; ++i) out.push_back(start_hz + step_hz * static_cast<double>(i));
    return out;
  }

 private:
  static double frac(double x) { return x - std::floor(x); }
  static double wrap(double t, double period) { return t - std::floor(t / period) * period; }

  double poly_integral(double tau) const {
    double s = 0.0, p = tau;
    for (std::size_t k = 0; k < poly_coeffs.size(); ++k) {
      s += poly_coeffs[k] * p / static_cast<double>(k + 1);
      p *= tau;
    }
    return s;
  }

  double table_integral(double tau) const {
    double s = 0.0;
    for (std::size_t i = 1; i < if_table.size(); ++i) {
      const auto [t0, f0] = if_table[i - 1];
      const auto [t1, f1] = if_table[i];
      if (tau <= t0) break;
      const double te = std::min(tau, t1);
      const double fe = t1 > t0 ? f0 + (f1 - f0) * (te - t0) / (t1 - t0) : f1;
      s += 0.5 * (f0 + fe) * (te - t0);
    }
    return s;
  }
};

inline RealWaveform gen_sut(const SutSpec& spec, const Timebase& tb) {
  spec.validate();
  tb.validate();
  if (spec.max_frequency_hz() >= tb.nyquist_hz()) fail_physics("undersampled-sut");
  RealWaveform out = RealWaveform::zeros(tb);
  if (spec.amplitude == 0.0) return out;
  if (spec.kind == SutKind::multitone) {
    for (double f : spec.freqs_hz) {
      for (std::size_t i = 0; i < tb.n_samples; ++i) {
        const double c = f * tb.time_at(i);
        out.samples[i] += spec.amplitude * std::cos(kTwoPi * (c - std::floor(c)));
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < tb.n_samples; ++i)
    out.samples[i] = spec.amplitude * std::cos(kTwoPi * spec.phase_fraction(tb.time_at(i)));
  return out;
}

/// Small-signal MZM in the CS-DSB regime: E_out = E_in * (rho + sut(t)).
/// rho = 10^(-suppression/20) is the residual-carrier amplitude relative to a
/// unit drive; 6 dB makes the reference equal to each sideband of a
/// unit-amplitude tone.
inline ComplexEnvelope cs_dsb_modulate(const ComplexEnvelope& probe_in, const RealWaveform& sut,
                                       double carrier_suppression_db) {
  require_same_timebase(probe_in.timebase, sut.timebase, "cs_dsb_modulate: probe and SUT");
  if (std::isnan(carrier_suppression_db) || carrier_suppression_db < 0.0)
    fail_physics("invalid-modulator", "carrier_suppression_db must be >= 0");
  const double rho = db_suppression_to_amplitude(carrier_suppression_db);
  ComplexEnvelope out = probe_in;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] *= rho + sut.samples[i];
  return out;
}

struct Diagnostics {
  std::vector<std::string> warnings;
};

/// Static Lorentzian SBS gain applied over the whole record.
inline ComplexEnvelope sbs_filter(const ComplexEnvelope& probe, const SbsFilterSpec& spec,
                                  Diagnostics* diag = nullptr) {
  spec.validate();
  validate_record(probe);
  if (diag && probe.timebase.duration() < 10.0 / spec.linewidth_hz)
    diag->warnings.emplace_back("filter-transient-dominated");
  const double center = spec.center_offset_hz();
  return apply_frequency_response(probe, [&](double f) { return spec.transfer(f - center); });
}

/// PD1: square-law detection, DC block and the acquisition low-pass.
inline RealWaveform pd1_detect(const ComplexEnvelope& field, double responsivity = 1.0,
                               double post_lowpass_hz = 50e6) {
  validate_record(field);
  if (!(responsivity > 0.0)) fail_physics("invalid-responsivity");
  RealWaveform out{field.timebase, std::vector<double>(field.samples.size())};
  double mean = 0.0;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = responsivity * std::norm(field.samples[i]);
    mean += out.samples[i];
  }
  mean /= static_cast<double>(out.samples.size());
  for (auto& v : out.samples) v -= mean;
  return lowpass(out, post_lowpass_hz);
}

}  // namespace jrcss
