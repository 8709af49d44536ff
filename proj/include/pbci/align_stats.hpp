#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pbci/session.hpp"

namespace pbci {

// Affine audio-to-EEG clock: eeg_t = drift * audio_t + offset_s.
struct ClockMap {
  double offset_s = 0.0;
  double drift = 1.0;
  double rms_residual_s = 0.0;

  double to_eeg(double audio_t_s) const { return drift * audio_t_s + offset_s; }
};

struct WordAlignment {
  std::string word;
  Speaker speaker = Speaker::participant;
  double onset_eeg_s = 0.0;
  double offset_eeg_s = 0.0;
  // Statistics over ticks inside [onset, offset); NaN when absent.
  double mean_value = 0.0;
  double max_value = 0.0;
  double min_value = 0.0;
  double post_window_mean = 0.0;  // over [onset, onset + 0.8 s), clipped to trace end
  bool absent = false;            // word span contains no tick
};

struct RoundSummary {
  int round = 0;
  long n_ticks = 0;
  double mean = 0.0;
  double rho_hat = 0.0;  // lag-1 autocorrelation, clamped to [0, 0.999]
  double n_eff = 0.0;    // n (1 - rho) / (1 + rho)
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct TrendReport {
  double slope = 0.0;  // per round
  double intercept = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double p_value = 1.0;
  double r_squared = 0.0;
  double cumulative_change = 0.0;  // slope * (n_rounds - 1)
  bool significant = false;        // CI excludes zero
};

ClockMap fit_clock_map(const SyncPairs& sync);

std::vector<WordAlignment> align_words(const PredictionTrace& trace,
                                       const std::vector<TranscriptWord>& transcript,
                                       const ClockMap& map);

std::vector<RoundSummary> round_means(const PredictionTrace& trace,
                                      const std::vector<RoundSpec>& rounds, double alpha = 0.05);

TrendReport ols_trend(const std::vector<std::pair<double, double>>& points, double alpha = 0.05);

void words_to_csv(const std::vector<WordAlignment>& words, const std::filesystem::path& path);
std::vector<WordAlignment> words_from_csv(const std::filesystem::path& path);

void save_analysis(const std::vector<RoundSummary>& rounds, const TrendReport& trend,
                   const std::filesystem::path& path);

}  // namespace pbci
