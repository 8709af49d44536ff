#pragma once

#include <optional>
#include <vector>

#include "pbci/session.hpp"

namespace pbci {

struct Epoch {
  double onset_s = 0.0;
  Matrix samples;  // channels x frames, microvolts
  double rate_hz = 0.0;
  std::optional<int> label;
};

struct BandSpec {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

struct RejectionMask {
  double window_len_s = 0.0;
  std::vector<long> rejected;  // sorted window indices
  double fraction = 0.0;
};

enum class FilterMode { zero_phase, causal };

// Second-order section, a0 normalized to 1.
struct Biquad {
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct SosFilter {
  std::vector<Biquad> sections;
};

// 4th-order Butterworth designs via bilinear transform.
SosFilter design_lowpass(double cutoff_hz, double rate_hz);
SosFilter design_highpass(double cutoff_hz, double rate_hz);
SosFilter design_bandpass(BandSpec band, double rate_hz);

double sos_gain(const SosFilter& filt, double freq_hz, double rate_hz);

Matrix filter_causal(const SosFilter& filt, const Matrix& x);
Matrix filter_zero_phase(const SosFilter& filt, const Matrix& x);

SessionData resample(const SessionData& x, double target_hz);
SessionData average_reference(const SessionData& x);
SessionData highpass(const SessionData& x, double cutoff_hz, FilterMode mode = FilterMode::zero_phase);
SessionData bandpass(const SessionData& x, BandSpec band, FilterMode mode = FilterMode::zero_phase);

std::vector<Epoch> extract_epochs(const SessionData& x, const std::vector<EventRecord>& events,
                                  double start_offset_s, double end_offset_s);

RejectionMask reject_artifact_windows(const SessionData& x, double window_len_s, double fraction);

// True when [t0_s, t1_s), in recording-local time, touches a rejected window.
bool mask_rejects_span(const RejectionMask& mask, double t0_s, double t1_s);

// Round-half-up frame index used by every time-to-frame conversion.
long frame_index(double t_s, double rate_hz);

}  // namespace pbci
