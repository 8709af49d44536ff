#pragma once

#include <vector>

#include "pbci/dsp.hpp"
#include "pbci/session.hpp"

namespace pbci {

struct SpatialFilterBank {
  std::vector<BandSpec> bands;
  std::vector<Matrix> filters_per_band;  // channels x 2k each
  std::vector<std::vector<double>> eigenvalues_per_band;
  int k = 0;
};

struct WindowSpec {
  double start_s = 0.200;
  double end_s = 0.650;
  double width_s = 0.050;
  double rate_hz = 100.0;
  int n_windows() const;
  int samples_per_window() const;
};

// Band-pass applied ahead of windowed-means feature extraction.
inline constexpr BandSpec kErpBand{0.1, 15.0};

struct FeatureMatrix {
  Matrix x;  // observations x feature dimension
  std::vector<int> labels;
};

struct LabeledEvent {
  EventRecord event;
  int label = 0;
};

std::pair<Matrix, Matrix> class_covariances(const std::vector<Epoch>& epochs);

std::pair<Matrix, std::vector<double>> train_csp(const Matrix& c0, const Matrix& c1, int k);

Epoch bandpass_epoch(const Epoch& epoch, BandSpec band);

Vector apply_csp_logvar(const Epoch& epoch, const SpatialFilterBank& bank);

Vector windowed_means(const Epoch& epoch, const WindowSpec& spec);

std::vector<LabeledEvent> label_grid_jumps(const std::vector<EventRecord>& events);

}  // namespace pbci
