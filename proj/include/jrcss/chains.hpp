#pragma once

// End-to-end signal chains built from the module primitives: ASK-LFM
// transmitter, radar echo and de-chirp, communication receiver front end
// and the spectrum-sensing path up to the PD1 record.

#include <cmath>
#include <cstdint>
#include <vector>

#include "jrcss/comms_dsp.hpp"
#include "jrcss/photonics.hpp"
#include "jrcss/radar_dsp.hpp"
#include "jrcss/scene_channel.hpp"
#include "jrcss/sensing_dsp.hpp"
#include "jrcss/waveform_tx.hpp"

namespace jrcss {

struct TxSetup {
  ChirpPlan chirp;
  AskPlan ask;
  ModulatorSpec modulator;
  double sim_rate_hz = 40e9;
  double responsivity = 1.0;
  /// Transmit amplifier band (PD2 output is band-limited before the antenna).
  RfResponseSpec tx_band{5.85e9, 14.5e9, 40.0, 0.0, std::nullopt, std::nullopt};
};

/// Optical field after the DP-MZM over `tb`.
inline ComplexEnvelope tx_optical_field(const TxSetup& s, const Timebase& tb) {
  return cs_tssb_modulate(gen_lfm(s.chirp, tb), gen_ask(s.ask, tb), s.modulator, 0.0);
}

/// Electrical ASK-LFM signal radiated by the transmit antenna.
inline RealWaveform tx_ask_lfm(const TxSetup& s, const Timebase& tb) {
  const auto pd2 = photodetect(tx_optical_field(s, tb), s.responsivity);
  return apply_rf_response(pd2, s.tx_band, 0);
}

/// Timebase of sweep k at the simulation rate.
inline Timebase sweep_timebase(const TxSetup& s, std::size_t k) {
  const auto n = static_cast<std::size_t>(std::llround(s.chirp.period_s * s.sim_rate_hz));
  return {s.sim_rate_hz, n, static_cast<double>(k) * s.chirp.period_s};
}

struct RadarSetup {
  TxSetup tx;
  Scene scene;
  /// Receive chain (antenna, LNA). Noise, if any, is added here.
  RfResponseSpec rx;
  double if_lowpass_hz = 200e6;
};

/// De-chirped IF for one sweep at the simulation rate; the transmitted
/// ASK-LFM is the mixer LO.
inline RealWaveform radar_beat(const RadarSetup& s, const RealWaveform& tx, double slow_time_s, std::uint64_t seed) {
  const auto rx = apply_rf_response(echo(tx, s.scene, slow_time_s), s.rx, seed);
  return dechirp(rx, tx, s.if_lowpass_hz);
}

struct CommSetup {
  TxSetup tx;
  /// Receive antenna, amplifier and the mixer's uneven response.
  RfResponseSpec rx{5.85e9, 14.5e9, 40.0, -1.0, 7.8e9, std::nullopt};
  double selfmix_lowpass_hz = 2.5e9;
};

struct CommCapture {
  RealWaveform envelope;  // self-mixed, before compensation
  std::vector<std::uint8_t> bits;  // transmitted bits covering the record
};

/// Received ASK-LFM over n_sweeps, self-mixed and low-pass filtered.
inline CommCapture comm_capture(const CommSetup& s, std::size_t n_sweeps, std::uint64_t seed) {
  const auto tb = Timebase::covering(s.tx.sim_rate_hz, static_cast<double>(n_sweeps) * s.tx.chirp.period_s);
  const auto tx = tx_ask_lfm(s.tx, tb);
  const auto rx = apply_rf_response(tx, s.rx, seed);
  CommCapture c{self_mix(rx, s.selfmix_lowpass_hz), {}};
  const auto n_bits = static_cast<std::size_t>(std::floor(tb.duration() * s.tx.ask.baud_rate + 1e-9));
  c.bits.resize(n_bits);
  for (std::size_t k = 0; k < n_bits; ++k) c.bits[k] = s.tx.ask.bits[k % s.tx.ask.bits.size()];
  return c;
}

struct SensingSetup {
  TxSetup tx;
  SbsFilterSpec sbs;
  /// MZM bias: residual probe line relative to a unit SUT drive.
  double dsb_suppression_db = 3.0;
  double pd1_responsivity = 1.0;
  double pd1_lowpass_hz = 50e6;
  /// Each sweep is simulated with this much of its neighbours on both sides
  /// so the circular FFT filters settle.
  double guard_s = 0.25e-6;
  /// Rate of the stitched PD1 record handed to the back end.
  double record_rate_hz = 400e6;
};

/// PD1 output for n_sweeps starting at sweep `first_sweep`, simulated one
/// sweep at a time at the simulation rate and stitched at record_rate_hz.
inline RealWaveform sense_pd1(const SensingSetup& s, const SutSpec& sut, std::size_t n_sweeps,
                              std::size_t first_sweep = 0, Diagnostics* diag = nullptr) {
  const double fs = s.tx.sim_rate_hz;
  const double T = s.tx.chirp.period_s;
  const auto factor = decimation_factor(fs, s.record_rate_hz);
  const auto n_sweep = static_cast<std::size_t>(std::llround(T * fs));
  auto n_guard = static_cast<std::size_t>(std::llround(s.guard_s * fs));
  n_guard = (n_guard + factor - 1) / factor * factor;
  if (n_sweep % factor != 0) fail_physics("rate-not-achievable", "sweep length is not a whole number of record samples");

  const std::size_t out_per_sweep = n_sweep / factor;
  const double t_first = static_cast<double>(first_sweep) * T;
  RealWaveform out = RealWaveform::zeros({fs / static_cast<double>(factor), n_sweeps * out_per_sweep, t_first});
  for (std::size_t k = 0; k < n_sweeps; ++k) {
    const double start = static_cast<double>(first_sweep + k) * T;
    const Timebase tb{fs, n_sweep + 2 * n_guard, start - static_cast<double>(n_guard) / fs};
    const auto probe = tx_optical_field(s.tx, tb);
    const auto modulated = cs_dsb_modulate(probe, gen_sut(sut, tb), s.dsb_suppression_db);
    const auto filtered = sbs_filter(modulated, s.sbs, k == 0 ? diag : nullptr);
    const auto pd1 = pd1_detect(filtered, s.pd1_responsivity, s.pd1_lowpass_hz);
    const auto rec = decimate(pd1, factor);
    const std::size_t skip = n_guard / factor;
    std::copy_n(rec.samples.begin() + static_cast<std::ptrdiff_t>(skip), out_per_sweep,
                out.samples.begin() + static_cast<std::ptrdiff_t>(k * out_per_sweep));
  }
  return out;
}

/// FTTM calibration implied by the sensing setup.
inline FttmCalibration sensing_calibration(const SensingSetup& s) {
  FttmCalibration c;
  c.bandwidth_hz = s.tx.chirp.bandwidth_hz();
  c.period_s = s.tx.chirp.period_s;
  c.offset_hz = s.sbs.pump_offset_hz;
  // The residual probe line crosses the gain window only when the window
  // sits on the sweep start; otherwise time is referenced to the trigger.
  c.mode = s.sbs.pump_offset_hz == 0.0 ? ReferenceMode::pulse : ReferenceMode::trigger;
  return c;
}

}  // namespace jrcss
