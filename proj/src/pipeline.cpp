#include "pbci/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <utility>

#include "pbci/error.hpp"
#include "pbci/features.hpp"

namespace pbci {

namespace {

constexpr double kWorkloadEpochS = 1.0;
constexpr double kErpEpochS = 0.65;

const std::vector<BandSpec> kWorkloadBands = {{4.0, 7.0}, {8.0, 13.0}};

double parse_seconds(const std::string& text, const std::string& what) {
  const char* s = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(v) || v <= 0.0)
    fail(errc::malformed_record, what + " '" + text + "' is not a positive duration");
  return v;
}

// Keeps epochs whose [onset, onset + len) span avoids every rejected window.
std::vector<Epoch> drop_masked(std::vector<Epoch> epochs, const RejectionMask& mask,
                               double epoch_len_s, double start_time_s, long* dropped) {
  std::vector<Epoch> kept;
  kept.reserve(epochs.size());
  for (auto& e : epochs) {
    const double t0 = e.onset_s - start_time_s;
    if (mask_rejects_span(mask, t0, t0 + epoch_len_s))
      ++*dropped;
    else
      kept.push_back(std::move(e));
  }
  return kept;
}

FeatureMatrix logvar_features(const std::vector<Epoch>& epochs, const SpatialFilterBank& bank) {
  FeatureMatrix fm;
  const long dim = static_cast<long>(bank.bands.size()) * 2 * bank.k;
  fm.x.resize(static_cast<long>(epochs.size()), dim);
  fm.labels.reserve(epochs.size());
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    fm.x.row(static_cast<long>(i)) = apply_csp_logvar(epochs[i], bank).transpose();
    fm.labels.push_back(*epochs[i].label);
  }
  return fm;
}

}  // namespace

Preprocessed preprocess(const SessionData& raw, const PreprocessConfig& cfg) {
  SessionData x = resample(raw, cfg.work_rate_hz);
  x = average_reference(x);
  x = highpass(x, cfg.highpass_hz, FilterMode::zero_phase);
  RejectionMask mask = reject_artifact_windows(x, cfg.artifact_window_s, cfg.artifact_fraction);
  return {std::move(x), std::move(mask)};
}

CalibResult calibrate_workload(const Session& session, const CalibConfig& cfg) {
  std::vector<EventRecord> slots;
  std::vector<int> slot_labels;
  for (const auto& ev : session.events) {
    const auto cond = ev.meta.find("condition");
    if (cond == ev.meta.end()) continue;
    int label;
    if (cond->second == "high")
      label = 1;
    else if (cond->second == "low")
      label = 0;
    else
      fail(errc::missing_events, "unknown trial condition '" + cond->second + "'");
    double duration = kWorkloadEpochS;
    const auto dur = ev.meta.find("duration_s");
    if (dur != ev.meta.end()) duration = parse_seconds(dur->second, "duration_s");
    const long n_sub = static_cast<long>(std::floor(duration / kWorkloadEpochS + 1e-9));
    for (long i = 0; i < n_sub; ++i) {
      EventRecord slot;
      slot.t_s = ev.t_s + static_cast<double>(i) * kWorkloadEpochS;
      slots.push_back(std::move(slot));
      slot_labels.push_back(label);
    }
  }
  if (slots.empty())
    fail(errc::missing_events, "no condition-labeled trial events in session");

  const Preprocessed pre = preprocess(session.data, cfg.pre);
  const SessionData x = resample(pre.data, cfg.feature_rate_hz);

  std::vector<Epoch> epochs = extract_epochs(x, slots, 0.0, kWorkloadEpochS);
  for (std::size_t i = 0; i < epochs.size(); ++i) epochs[i].label = slot_labels[i];

  CalibResult result;
  result.n_epochs_total = static_cast<long>(epochs.size());
  epochs = drop_masked(std::move(epochs), pre.mask, kWorkloadEpochS,
                       session.data.header.start_time_s, &result.n_epochs_dropped);

  // Average referencing zeroes the all-ones direction, so the summed class
  // covariance is singular there. Equal diagonal loading on both classes
  // restores definiteness and pins that direction to the neutral eigenvalue
  // one half, where filter selection never picks it.
  const long ch = session.data.samples.rows();
  const Matrix ridge = 1e-9 * Matrix::Identity(ch, ch);
  SpatialFilterBank bank;
  bank.k = cfg.csp_k;
  bank.bands = kWorkloadBands;
  for (const auto& band : kWorkloadBands) {
    std::vector<Epoch> in_band;
    in_band.reserve(epochs.size());
    for (const auto& e : epochs) in_band.push_back(bandpass_epoch(e, band));
    const auto [c0, c1] = class_covariances(in_band);
    auto [filters, eigenvalues] = train_csp(c0 + ridge, c1 + ridge, cfg.csp_k);
    bank.filters_per_band.push_back(std::move(filters));
    bank.eigenvalues_per_band.push_back(std::move(eigenvalues));
  }

  result.features = logvar_features(epochs, bank);
  for (const auto& e : epochs) result.epoch_onsets.push_back(e.onset_s);
  result.model = train_slda(result.features, cfg.gamma);
  result.model.kind = ModelKind::workload;
  result.model.channels = session.data.header.channels;
  result.model.feature_meta =
      SpectralFeatureMeta{std::move(bank), kWorkloadEpochS, cfg.feature_rate_hz};
  return result;
}

CalibResult calibrate_agreement(const Session& session, const CalibConfig& cfg) {
  std::vector<EventRecord> jump_events;
  for (const auto& ev : session.events)
    if (ev.meta.count("angle_deg")) jump_events.push_back(ev);
  const std::vector<LabeledEvent> labeled = label_grid_jumps(jump_events);
  if (labeled.empty())
    fail(errc::missing_events, "no angle-labeled jump events in session");

  const Preprocessed pre = preprocess(session.data, cfg.pre);
  SessionData x = resample(pre.data, cfg.feature_rate_hz);
  x = bandpass(x, kErpBand, FilterMode::zero_phase);

  std::vector<EventRecord> slots;
  slots.reserve(labeled.size());
  for (const auto& le : labeled) slots.push_back(le.event);
  std::vector<Epoch> epochs = extract_epochs(x, slots, 0.0, kErpEpochS);
  for (std::size_t i = 0; i < epochs.size(); ++i) epochs[i].label = labeled[i].label;

  CalibResult result;
  result.n_epochs_total = static_cast<long>(epochs.size());
  epochs = drop_masked(std::move(epochs), pre.mask, kErpEpochS,
                       session.data.header.start_time_s, &result.n_epochs_dropped);

  const WindowSpec spec;
  FeatureMatrix fm;
  fm.x.resize(static_cast<long>(epochs.size()),
              static_cast<long>(session.data.header.channels.size()) * spec.n_windows());
  fm.labels.reserve(epochs.size());
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    fm.x.row(static_cast<long>(i)) = windowed_means(epochs[i], spec).transpose();
    fm.labels.push_back(*epochs[i].label);
  }

  result.features = std::move(fm);
  for (const auto& e : epochs) result.epoch_onsets.push_back(e.onset_s);
  result.model = train_slda(result.features, cfg.gamma);
  result.model.kind = ModelKind::agreement;
  result.model.channels = session.data.header.channels;
  result.model.feature_meta = ErpFeatureMeta{spec, kErpEpochS};
  return result;
}

}  // namespace pbci
