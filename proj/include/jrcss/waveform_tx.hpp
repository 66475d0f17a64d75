#pragma once

// Transmit-side signal generation: the negatively chirped LFM drive, the IF
// ASK drive, the CS-TSSB optical field and the photodetected ASK-LFM.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "jrcss/signal_core.hpp"

namespace jrcss {

struct ChirpPlan {
  double f_start_hz = 10.8e9;
  double f_stop_hz = 4.8e9;
  double period_s = 4e-6;
  std::size_t n_periods = 1;

  double bandwidth_hz() const { return std::abs(f_stop_hz - f_start_hz); }
  /// Signed sweep rate (Hz/s); negative for a down-chirp.
  double sweep_rate() const { return (f_stop_hz - f_start_hz) / period_s; }
  double center_hz() const { return 0.5 * (f_start_hz + f_stop_hz); }
  double max_frequency_hz() const { return std::max(f_start_hz, f_stop_hz); }

  void validate() const {
    if (!(period_s > 0.0)) fail_physics("invalid-chirp", "period_s must be positive");
    if (n_periods < 1) fail_physics("invalid-chirp", "n_periods must be >= 1");
    if (f_start_hz < 0.0 || f_stop_hz < 0.0) fail_physics("invalid-chirp", "frequencies must be >= 0");
  }

  /// Time since the start of the current period, in [0, period).
  double local_time(double t) const {
    const double k = std::floor(t / period_s);
    double tau = t - k * period_s;
    if (tau >= period_s) tau -= period_s;
    return tau < 0.0 ? 0.0 : tau;
  }

  double instantaneous_frequency(double t) const {
    return f_start_hz + sweep_rate() * local_time(t);
  }

  /// Phase in cycles, zero at every period start.
  double phase_cycles(double t) const {
    const double tau = local_time(t);
    return f_start_hz * tau + 0.5 * sweep_rate() * tau * tau;
  }
};

enum class PulseShape { rectangular, raised_cosine };

struct AskPlan {
  double carrier_hz = 3e9;
  double baud_rate = 0.5e9;
  std::vector<std::uint8_t> bits;
  double low_level = 0.2;
  double high_level = 1.0;
  PulseShape pulse_shape = PulseShape::rectangular;
  /// Fraction of a symbol spent in each raised-cosine transition.
  double rolloff = 0.35;

  double symbol_period_s() const { return 1.0 / baud_rate; }
  double level(std::uint8_t bit) const { return bit ? high_level : low_level; }

  /// Bit active at time t; the sequence repeats when the record is longer.
  std::uint8_t bit_at_symbol(long long k) const {
    const auto n = static_cast<long long>(bits.size());
    return bits[static_cast<std::size_t>(((k % n) + n) % n)];
  }

  /// Shaped envelope value at time t.
  double envelope(double t) const {
    const double ts = symbol_period_s();
    const double x = t / ts;
    const auto k = static_cast<long long>(std::floor(x));
    const double cur = level(bit_at_symbol(k));
    if (pulse_shape == PulseShape::rectangular || rolloff <= 0.0) return cur;
    // Raised-cosine edge centered on each symbol boundary.
    const double frac = x - static_cast<double>(k);
    const double half = 0.5 * std::min(rolloff, 1.0);
    if (frac < half) {
      const double prev = level(bit_at_symbol(k - 1));
      const double u = (frac + half) / (2.0 * half);
      return prev + (cur - prev) * 0.5 * (1.0 - std::cos(kPi * u));
    }
    if (frac > 1.0 - half) {
      const double next = level(bit_at_symbol(k + 1));
      const double u = (frac - (1.0 - half)) / (2.0 * half);
      return cur + (next - cur) * 0.5 * (1.0 - std::cos(kPi * u));
    }
    return cur;
  }

  void validate() const {
    if (bits.empty()) fail_physics("no-data", "ASK bit sequence is empty");
    if (!(baud_rate > 0.0)) fail_physics("invalid-ask", "baud_rate must be positive");
    if (low_level < 0.0 || !(high_level > low_level))
      fail_physics("invalid-ask", "levels must satisfy 0 <= low < high");
    if (carrier_hz < 0.0) fail_physics("invalid-ask", "carrier must be >= 0");
  }
};

/// Behavioral DP-MZM: residual carrier and opposite-side images, both in dB
/// below the wanted sidebands. Infinity means ideal suppression.
struct ModulatorSpec {
  double carrier_suppression_db = 30.0;
  double sideband_rejection_db = 30.0;

  void validate() const {
    if (std::isnan(carrier_suppression_db) || carrier_suppression_db < 0.0)
      fail_physics("invalid-modulator", "carrier_suppression_db must be >= 0");
    if (std::isnan(sideband_rejection_db) || sideband_rejection_db < 0.0)
      fail_physics("invalid-modulator", "sideband_rejection_db must be >= 0");
  }
};

inline RealWaveform gen_lfm(const ChirpPlan& plan, const Timebase& tb) {
  plan.validate();
  tb.validate();
  if (plan.max_frequency_hz() >= tb.nyquist_hz()) fail_physics("undersampled-chirp");
  RealWaveform out{tb, std::vector<double>(tb.n_samples)};
  for (std::size_t i = 0; i < tb.n_samples; ++i) {
    const double cyc = plan.phase_cycles(tb.time_at(i));
    out.samples[i] = std::cos(kTwoPi * (cyc - std::floor(cyc)));
  }
  return out;
}

inline RealWaveform gen_ask(const AskPlan& plan, const Timebase& tb) {
  plan.validate();
  tb.validate();
  if (plan.carrier_hz >= tb.nyquist_hz()) fail_physics("undersampled-ask", "carrier above Nyquist");
  if (plan.baud_rate > tb.sample_rate_hz / 4.0) fail_physics("undersampled-ask", "baud rate above fs/4");
  RealWaveform out{tb, std::vector<double>(tb.n_samples)};
  for (std::size_t i = 0; i < tb.n_samples; ++i) {
    const double t = tb.time_at(i);
    const double cyc = plan.carrier_hz * t;
    out.samples[i] = plan.envelope(t) * std::cos(kTwoPi * (cyc - std::floor(cyc)));
  }
  return out;
}

/// Maximal-length PRBS from a Fibonacci LFSR (x^7+x^6+1, x^15+x^14+1,
/// x^23+x^18+1). The seed selects the nonzero start state.
inline std::vector<std::uint8_t> gen_prbs(std::uint64_t seed, std::size_t n_bits, int order) {
  int tap = 0;
  switch (order) {
    case 7: tap = 6; break;
    case 15: tap = 14; break;
    case 23: tap = 18; break;
    default: fail_physics("unsupported-prbs-order", std::to_string(order));
  }
  const std::uint64_t mask = (std::uint64_t{1} << order) - 1;
  std::uint64_t state = (seed % mask) + 1;
  std::vector<std::uint8_t> bits(n_bits);
  for (auto& b : bits) {
    const std::uint64_t fb = ((state >> (order - 1)) ^ (state >> (tap - 1))) & 1U;
    b = static_cast<std::uint8_t>(state & 1U);
    state = ((state << 1) | fb) & mask;
  }
  return bits;
}

/// CS-TSSB output relative to the optical carrier: the LFM drive on the
/// lower side (offsets -f_LFM), the ASK drive on the upper side (+f_IF), a
/// residual carrier and mirror-image sidebands at the specified levels.
inline ComplexEnvelope cs_tssb_modulate(const RealWaveform& lfm, const RealWaveform& ask,
                                        const ModulatorSpec& spec, double fc_ref_hz) {
  spec.validate();
  require_same_timebase(lfm.timebase, ask.timebase, "cs_tssb_modulate: LFM and ASK drives");
  validate_record(lfm);
  validate_record(ask);
  const auto a_lfm = analytic_signal(lfm);
  const auto a_ask = analytic_signal(ask);
  const double carrier = std::sqrt(mean_power(std::span<const cplx>(a_lfm.samples))) *
                         db_suppression_to_amplitude(spec.carrier_suppression_db);
  const double image = db_suppression_to_amplitude(spec.sideband_rejection_db);

  ComplexEnvelope out{lfm.timebase, fc_ref_hz, std::vector<cplx>(lfm.samples.size())};
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const cplx l = a_lfm.samples[i];
    const cplx a = a_ask.samples[i];
    out.samples[i] = std::conj(l) + a + carrier + image * (l + std::conj(a));
  }
  return out;
}

/// Square-law detection, AC-coupled: responsivity x |E|^2 minus its mean.
inline RealWaveform photodetect(const ComplexEnvelope& field, double responsivity) {
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
  return out;
}

}  // namespace jrcss
