#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "dss/error.hpp"

namespace dss {

enum class Rat { LTE, NR };

inline const char* to_string(Rat rat) { return rat == Rat::LTE ? "LTE" : "NR"; }

/// Link-level parameters of the shared carrier.
struct RadioParams {
  double carrier_freq_ghz = 3.5;
  int total_prbs = 25;
  double prb_bandwidth_hz = 180'000.0;
  double tx_power_per_prb_w = 0.8;
  double noise_power_per_prb_dbm = -112.5;
  double spectral_efficiency_cap = 5.55;  // bits/s/Hz

  void validate() const {
    if (total_prbs < 1) throw ConfigError("radio.total_prbs must be >= 1");
    if (!(prb_bandwidth_hz > 0)) throw ConfigError("radio.prb_bandwidth_hz must be > 0");
    if (!(tx_power_per_prb_w > 0)) throw ConfigError("radio.tx_power_per_prb_w must be > 0");
    if (!(spectral_efficiency_cap > 0))
      throw ConfigError("radio.spectral_efficiency_cap must be > 0");
  }
};

// OFDM symbols per 1 ms subframe and how many of them carry data.
inline constexpr int kSymbolsPerSubframe = 14;
inline constexpr int kLteDataSymbols = 12;
inline constexpr int kNrSharedDataSymbols = 11;  // LTE PDCCH present
inline constexpr int kNrAloneDataSymbols = 13;   // no LTE PDCCH in the subframe
inline constexpr double kSubframeSeconds = 1e-3;

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0 - 3.0); }

/// Urban-macro path loss in dB at 3.5 GHz for a UE `distance_m` metres away.
inline double path_loss_db(double distance_m) {
  if (!(distance_m >= 1.0)) throw std::domain_error("path loss model is invalid below 1 m");
  return 20.4 + 37.6 * std::log10(distance_m);
}

/// Linear SNR on one PRB.
inline double snr(double tx_power_per_prb_w, double fading_gain, double path_loss_db,
                  double noise_per_prb_w) {
  if (tx_power_per_prb_w < 0 || fading_gain < 0 || !(noise_per_prb_w > 0))
    throw std::domain_error("snr: inputs must be nonnegative and noise positive");
  return tx_power_per_prb_w * fading_gain * std::pow(10.0, -path_loss_db / 10.0) /
         noise_per_prb_w;
}

/// Shannon rate over `prbs` identical PRBs with a spectral-efficiency ceiling, in bits/s.
inline double achievable_rate(int prbs, double snr_per_prb, double prb_bandwidth_hz,
                              double spectral_efficiency_cap) {
  if (prbs <= 0) return 0.0;
  const double efficiency = std::min(std::log2(1.0 + snr_per_prb), spectral_efficiency_cap);
  return prbs * prb_bandwidth_hz * efficiency;
}

inline int data_symbols(Rat rat, bool nr_alone) {
  if (rat == Rat::LTE) return kLteDataSymbols;
  return nr_alone ? kNrAloneDataSymbols : kNrSharedDataSymbols;
}

}  // namespace dss
