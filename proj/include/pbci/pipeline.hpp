#pragma once

#include <optional>

#include "pbci/classifier.hpp"
#include "pbci/dsp.hpp"
#include "pbci/session.hpp"

namespace pbci {

// Shared preprocessing ahead of both calibration chains: downsample,
// average reference, high-pass, then artifact-window scoring.
struct PreprocessConfig {
  double work_rate_hz = 250.0;
  double highpass_hz = 1.0;
  double artifact_window_s = 1.0;
  double artifact_fraction = 0.02;
};

struct Preprocessed {
  SessionData data;
  RejectionMask mask;
};

Preprocessed preprocess(const SessionData& raw, const PreprocessConfig& cfg = {});

struct CalibConfig {
  PreprocessConfig pre;
  double feature_rate_hz = 100.0;
  int csp_k = 3;
  std::optional<double> gamma;  // shrinkage override, estimated when unset
};

struct CalibResult {
  LinearModel model;
  FeatureMatrix features;  // one row per surviving epoch, calibration order
  std::vector<double> epoch_onsets;  // recording clock, parallel to features
  long n_epochs_total = 0;
  long n_epochs_dropped = 0;  // removed by the artifact mask
};

// Condition-labeled trials tiled into 1 s epochs, filter-bank CSP
// log-variance features, shrinkage LDA. Workload bands: theta 4-7 Hz,
// alpha 8-13 Hz.
CalibResult calibrate_workload(const Session& session, const CalibConfig& cfg = {});

// Angle-labeled jump events, 0.1-15 Hz band-pass, windowed means over
// 200-650 ms, shrinkage LDA.
CalibResult calibrate_agreement(const Session& session, const CalibConfig& cfg = {});

}  // namespace pbci
