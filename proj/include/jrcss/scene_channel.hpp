#pragma once

// Radar scene (point scatterers on a turntable), free-space echoes and the
// behavioral RF front-end response.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "jrcss/signal_core.hpp"

namespace jrcss {

struct Scatterer {
  double x_m = 0.0;  // cross-range, turntable frame
  double y_m = 0.0;  // along the line of sight, positive away from the antenna
  double reflectivity = 1.0;
};

struct Turntable {
  double center_range_m = 1.47;
  /// 0 means stationary.
  double rotation_period_s = 0.0;
  double phase0_rad = 0.0;

  /// Table angle at slow time t; clockwise rotation decreases the angle.
  double angle_at(double t) const {
    if (rotation_period_s <= 0.0) return phase0_rad;
    return phase0_rad - kTwoPi * t / rotation_period_s;
  }
};

enum class PropagationLoss { none, r4 };

/// Monostatic geometry: the antenna phase center is at the origin and the
/// turntable center sits center_range_m down the line of sight.
struct Scene {
  std::vector<Scatterer> scatterers;
  Turntable turntable;
  PropagationLoss loss = PropagationLoss::none;

  void validate() const {
    if (!(turntable.center_range_m > 0.0)) fail_physics("invalid-scene", "center_range_m must be positive");
    if (turntable.rotation_period_s < 0.0) fail_physics("invalid-scene", "rotation_period_s must be >= 0");
    for (const auto& s : scatterers)
      if (!(s.reflectivity > 0.0)) fail_physics("invalid-scene", "reflectivity must be positive");
  }
};

inline std::vector<double> scatterer_ranges(const Scene& scene, double slow_time_s) {
  const double th = scene.turntable.angle_at(slow_time_s);
  const double c = std::cos(th), s = std::sin(th);
  std::vector<double> ranges;
  ranges.reserve(scene.scatterers.size());
  for (const auto& p : scene.scatterers) {
    const double xr = p.x_m * c - p.y_m * s;
    const double yr = p.x_m * s + p.y_m * c;
    ranges.push_back(std::hypot(xr, scene.turntable.center_range_m + yr));
  }
  return ranges;
}

/// Stop-and-hop echo: delayed, scaled copies of tx for every scatterer.
/// Delays are applied as frequency-domain phase ramps, so the record is
/// treated as periodic (one or more whole sweeps).
inline RealWaveform echo(const RealWaveform& tx, const Scene& scene, double slow_time_s) {
  validate_record(tx);
  scene.validate();
  if (scene.scatterers.empty()) return RealWaveform::zeros(tx.timebase);
  const auto ranges = scatterer_ranges(scene, slow_time_s);
  std::vector<std::pair<double, double>> taps;  // (delay, amplitude)
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const double tau = 2.0 * ranges[i] / kSpeedOfLight;
    if (tau >= tx.timebase.duration()) fail_physics("target-out-of-window");
    double a = scene.scatterers[i].reflectivity;
    if (scene.loss == PropagationLoss::r4) a /= ranges[i] * ranges[i];
    taps.emplace_back(tau, a);
  }
  return apply_frequency_response(tx, [&](double f) {
    cplx h{};
    for (const auto& [tau, a] : taps) h += a * std::polar(1.0, -kTwoPi * f * tau);
    return h;
  });
}

struct RfResponseSpec {
  double passband_low_hz = 0.0;
  double passband_high_hz = 1e300;
  double out_of_band_rejection_db = 0.0;
  double tilt_db_per_ghz = 0.0;
  /// Frequency where the tilt contributes 0 dB; defaults to the passband low edge.
  std::optional<double> tilt_reference_hz;
  std::optional<double> noise_snr_db;

  double tilt_reference() const { return tilt_reference_hz.value_or(passband_low_hz); }

  /// Field (amplitude) gain at |f|.
  double gain(double f_abs) const {
    double g_db = tilt_db_per_ghz * (f_abs - tilt_reference()) / 1e9;
    if (f_abs < passband_low_hz || f_abs > passband_high_hz) g_db -= out_of_band_rejection_db;
    return std::pow(10.0, g_db / 20.0);
  }

  void validate() const {
    if (!(passband_low_hz < passband_high_hz)) fail_physics("invalid-rf-response", "passband low must be < high");
    if (out_of_band_rejection_db < 0.0) fail_physics("invalid-rf-response", "rejection must be >= 0");
  }
};

/// Gain mask (passband, rejection, tilt) then optional white Gaussian noise
/// at the requested in-band SNR. Deterministic for a given seed.
inline RealWaveform apply_rf_response(const RealWaveform& w, const RfResponseSpec& spec, std::uint64_t rng_seed) {
  validate_record(w);
  spec.validate();
  RealWaveform out = apply_frequency_response(w, [&](double f) { return cplx{spec.gain(std::abs(f)), 0.0}; });
  if (!spec.noise_snr_db) return out;

  const double nyq = w.timebase.nyquist_hz();
  const double band_lo = std::max(0.0, spec.passband_low_hz);
  const double band_hi = std::min(nyq, spec.passband_high_hz);
  const double inband_fraction = std::max(band_hi - band_lo, 0.0) / nyq;
  if (inband_fraction <= 0.0) fail_physics("invalid-rf-response", "passband lies outside the record bandwidth");
  const double p_signal = mean_power(std::span<const double>(out.samples));
  const double p_noise_inband = p_signal / std::pow(10.0, *spec.noise_snr_db / 10.0);
  const double sigma = std::sqrt(p_noise_inband / inband_fraction);
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (auto& v : out.samples) v += gauss(rng);
  return out;
}

}  // namespace jrcss
