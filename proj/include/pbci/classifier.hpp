#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pbci/features.hpp"
#include "pbci/session.hpp"

namespace pbci {

enum class ModelKind { workload, agreement };

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

// Everything the online simulator needs to recompute features from raw data.
struct SpectralFeatureMeta {
  SpatialFilterBank bank;
  double epoch_len_s = 1.0;
  double rate_hz = 100.0;
};

struct ErpFeatureMeta {
  WindowSpec windows;
  double epoch_len_s = 0.65;
};

struct LinearModel {
  ModelKind kind = ModelKind::workload;
  double gamma = 0.0;
  Vector weights;
  double bias = 0.0;
  std::vector<std::string> channels;
  std::variant<SpectralFeatureMeta, ErpFeatureMeta> feature_meta;
};

double ledoit_wolf_gamma(const FeatureMatrix& features);

LinearModel train_slda(const FeatureMatrix& features, std::optional<double> gamma_override = {});

double predict(const LinearModel& model, const Vector& x);

void save_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model(const std::filesystem::path& path);

}  // namespace pbci
