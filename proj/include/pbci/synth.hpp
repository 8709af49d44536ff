#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pbci/session.hpp"

namespace pbci {

enum class SynthMode {
  workload_calibration,
  workload_conversation,
  erp_calibration,
  erp_conversation,
};

const char* synth_mode_name(SynthMode m);
SynthMode synth_mode_from_name(const std::string& name);

struct SynthConfig {
  SynthMode mode = SynthMode::workload_calibration;
  std::uint64_t seed = 1;
  std::vector<std::string> channels = {"Fz", "F3", "F4", "Cz", "Pz", "P3", "P4", "Oz"};
  double sample_rate_hz = 500.0;
  double noise_sigma_uv = 2.0;
  double theta_hz = 5.5;
  double alpha_hz = 10.0;
  double theta_amp_low_uv = 1.0;   // amplitude at workload level 0
  double theta_amp_high_uv = 3.0;  // amplitude at workload level 1
  double alpha_amp_low_uv = 5.0;
  double alpha_amp_high_uv = 2.0;
  double erp_peak_uv = -5.0;
  double erp_latency_s = 0.400;
  double erp_width_s = 0.080;
  double sync_offset_s = 1.25;
  double sync_drift = 1.0;
  int n_trials = 0;  // 0 = mode default (20 per condition / 180 jumps)
  int n_rounds = 10;
  int words_per_round = 6;
};

Vector pink_noise(long n_frames, double sigma_uv, std::uint64_t seed);

Session synth_workload_session(const SynthConfig& cfg);
Session synth_erp_session(const SynthConfig& cfg);

// Generates the session for cfg.mode, saves it under dir, and writes
// ground_truth.json with the injected parameters and true labels.
void write_synth_bundle(const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace pbci
