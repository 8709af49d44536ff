#include "pbci/classifier.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "pbci/error.hpp"

namespace pbci {

using nlohmann::json;

const char* model_kind_name(ModelKind k) {
  return k == ModelKind::workload ? "workload" : "agreement";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "workload") return ModelKind::workload;
  if (name == "agreement") return ModelKind::agreement;
  fail(errc::malformed_model, "unknown model kind '" + name + "'");
}

namespace {

// Observations centered by class mean when labels are present; unlabeled
// input is taken as already centered.
Matrix centered_observations(const FeatureMatrix& features) {
  const long n = features.x.rows();
  const long d = features.x.cols();
  Matrix z = features.x;
  if (!features.labels.empty()) {
    if (static_cast<long>(features.labels.size()) != n)
      fail(errc::dimension_mismatch, "label count does not match observation count");
    Vector mean0 = Vector::Zero(d), mean1 = Vector::Zero(d);
    long n0 = 0, n1 = 0;
    for (long i = 0; i < n; ++i) {
      if (features.labels[static_cast<std::size_t>(i)] == 0) {
        mean0 += features.x.row(i).transpose();
        ++n0;
      } else {
        mean1 += features.x.row(i).transpose();
        ++n1;
      }
    }
    if (n0 > 0) mean0 /= static_cast<double>(n0);
    if (n1 > 0) mean1 /= static_cast<double>(n1);
    for (long i = 0; i < n; ++i)
      z.row(i) -= (features.labels[static_cast<std::size_t>(i)] == 0 ? mean0 : mean1).transpose();
  }
  return z;
}

}  // namespace

double ledoit_wolf_gamma(const FeatureMatrix& features) {
  const long n = features.x.rows();
  const long d = features.x.cols();
  if (n < 2) fail(errc::too_few_observations, "shrinkage estimate needs >= 2 observations");
  const Matrix z = centered_observations(features);
  const Matrix s = z.transpose() * z / static_cast<double>(n);
  const double nu = s.trace() / static_cast<double>(d);
  const double dd = (s - nu * Matrix::Identity(d, d)).squaredNorm();
  if (dd == 0.0) return 0.0;
  double sum4 = 0.0;
  for (long i = 0; i < n; ++i) sum4 += std::pow(z.row(i).squaredNorm(), 2);
  const double beta = (sum4 / static_cast<double>(n) - s.squaredNorm()) / static_cast<double>(n);
  return std::min(1.0, std::max(0.0, beta / dd));
}

LinearModel train_slda(const FeatureMatrix& features, std::optional<double> gamma_override) {
  const long n = features.x.rows();
  const long d = features.x.cols();
  if (static_cast<long>(features.labels.size()) != n)
    fail(errc::dimension_mismatch, "training needs one label per observation");
  if (!features.x.allFinite()) fail(errc::non_finite_feature, "non-finite training feature");

  Vector mean0 = Vector::Zero(d), mean1 = Vector::Zero(d);
  long n0 = 0, n1 = 0;
  for (long i = 0; i < n; ++i) {
    if (features.labels[static_cast<std::size_t>(i)] == 0) {
      mean0 += features.x.row(i).transpose();
      ++n0;
    } else {
      mean1 += features.x.row(i).transpose();
      ++n1;
    }
  }
  if (n0 == 0 || n1 == 0) fail(errc::single_class, "training needs observations from both classes");
  mean0 /= static_cast<double>(n0);
  mean1 /= static_cast<double>(n1);

  const Matrix z = centered_observations(features);
  const Matrix sigma = z.transpose() * z / static_cast<double>(n);
  const double nu = sigma.trace() / static_cast<double>(d);
  const double gamma = gamma_override ? *gamma_override : ledoit_wolf_gamma(features);
  if (gamma < 0.0 || gamma > 1.0) fail(errc::invalid_config, "gamma must lie in [0, 1]");
  const Matrix reg = (1.0 - gamma) * sigma + gamma * nu * Matrix::Identity(d, d);

  const Vector delta = mean1 - mean0;
  Eigen::LDLT<Matrix> ldlt(reg);
  Vector weights = ldlt.solve(delta);
  const double residual = (reg * weights - delta).norm();
  if (ldlt.info() != Eigen::Success || !weights.allFinite() ||
      residual > 1e-8 * std::max(1.0, delta.norm()))
    fail(errc::singular_covariance, "regularized covariance is singular");

  LinearModel model;
  model.gamma = gamma;
  model.weights = weights;
  model.bias = -weights.dot((mean0 + mean1) / 2.0);
  return model;
}

double predict(const LinearModel& model, const Vector& x) {
  if (x.size() != model.weights.size())
    fail(errc::dimension_mismatch, "feature vector has dimension " + std::to_string(x.size()) +
                                       ", model expects " + std::to_string(model.weights.size()));
  return model.weights.dot(x) + model.bias;
}

namespace {

json band_to_json(const BandSpec& b) { return json::array({b.lo_hz, b.hi_hz}); }

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) fail(errc::malformed_model, "expected a non-empty matrix");
  const long rows = static_cast<long>(j.size());
  const long cols = static_cast<long>(j[0].size());
  Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    if (!j[static_cast<std::size_t>(r)].is_array() ||
        static_cast<long>(j[static_cast<std::size_t>(r)].size()) != cols)
      fail(errc::malformed_model, "ragged matrix rows");
    for (long c = 0; c < cols; ++c) {
      const auto& v = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      if (!v.is_number()) fail(errc::malformed_model, "non-numeric matrix entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

double get_number(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number())
    fail(errc::malformed_model, std::string("missing or non-numeric '") + key + "'");
  return j[key].get<double>();
}

}  // namespace

void save_model(const LinearModel& model, const std::filesystem::path& path) {
  json j;
  j["kind"] = model_kind_name(model.kind);
  j["gamma"] = model.gamma;
  j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
  j["bias"] = model.bias;
  j["channels"] = model.channels;

  json meta;
  if (const auto* spec = std::get_if<SpectralFeatureMeta>(&model.feature_meta)) {
    meta["type"] = "spectral";
    meta["epoch_len_s"] = spec->epoch_len_s;
    meta["rate_hz"] = spec->rate_hz;
    meta["k"] = spec->bank.k;
    json bands = json::array(), filters = json::array(), eigs = json::array();
    for (const auto& b : spec->bank.bands) bands.push_back(band_to_json(b));
    for (const auto& f : spec->bank.filters_per_band) filters.push_back(matrix_to_json(f));
    for (const auto& e : spec->bank.eigenvalues_per_band) eigs.push_back(e);
    meta["bands"] = bands;
    meta["filters"] = filters;
    meta["eigenvalues"] = eigs;
  } else {
    const auto& erp = std::get<ErpFeatureMeta>(model.feature_meta);
    meta["type"] = "erp";
    meta["epoch_len_s"] = erp.epoch_len_s;
    meta["rate_hz"] = erp.windows.rate_hz;
    meta["window_start_s"] = erp.windows.start_s;
    meta["window_end_s"] = erp.windows.end_s;
    meta["window_width_s"] = erp.windows.width_s;
  }
  j["feature_meta"] = meta;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) fail(errc::io_failure, "short write to " + path.string());
}

LinearModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(errc::missing_file, "cannot open " + path.string());
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) fail(errc::malformed_model, "invalid JSON in " + path.string());

  LinearModel model;
  if (!j.contains("kind") || !j["kind"].is_string()) fail(errc::malformed_model, "missing 'kind'");
  model.kind = model_kind_from_name(j["kind"].get<std::string>());
  model.gamma = get_number(j, "gamma");
  model.bias = get_number(j, "bias");
  if (!j.contains("weights") || !j["weights"].is_array() || j["weights"].empty())
    fail(errc::malformed_model, "missing 'weights'");
  model.weights.resize(static_cast<long>(j["weights"].size()));
  for (long i = 0; i < model.weights.size(); ++i) {
    const auto& v = j["weights"][static_cast<std::size_t>(i)];
    if (!v.is_number()) fail(errc::malformed_model, "non-numeric weight");
    model.weights(i) = v.get<double>();
  }
  if (!j.contains("channels") || !j["channels"].is_array())
    fail(errc::malformed_model, "missing 'channels'");
  for (const auto& c : j["channels"]) {
    if (!c.is_string()) fail(errc::malformed_model, "channel names must be strings");
    model.channels.push_back(c.get<std::string>());
  }

  if (!j.contains("feature_meta") || !j["feature_meta"].is_object())
    fail(errc::malformed_model, "missing 'feature_meta'");
  const json& meta = j["feature_meta"];
  if (!meta.contains("type") || !meta["type"].is_string())
    fail(errc::malformed_model, "feature_meta needs a 'type'");
  const std::string type = meta["type"].get<std::string>();
  if (type == "spectral") {
    SpectralFeatureMeta spec;
    spec.epoch_len_s = get_number(meta, "epoch_len_s");
    spec.rate_hz = get_number(meta, "rate_hz");
    spec.bank.k = static_cast<int>(get_number(meta, "k"));
    if (!meta.contains("bands") || !meta["bands"].is_array() || !meta.contains("filters") ||
        !meta["filters"].is_array() || meta["bands"].size() != meta["filters"].size())
      fail(errc::malformed_model, "bands and filters must be parallel arrays");
    for (const auto& b : meta["bands"]) {
      if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
        fail(errc::malformed_model, "band must be [lo_hz, hi_hz]");
      spec.bank.bands.push_back({b[0].get<double>(), b[1].get<double>()});
    }
    for (const auto& f : meta["filters"]) spec.bank.filters_per_band.push_back(matrix_from_json(f));
    if (meta.contains("eigenvalues")) {
      for (const auto& e : meta["eigenvalues"])
        spec.bank.eigenvalues_per_band.push_back(e.get<std::vector<double>>());
    }
    model.feature_meta = spec;
  } else if (type == "erp") {
    ErpFeatureMeta erp;
    erp.epoch_len_s = get_number(meta, "epoch_len_s");
    erp.windows.rate_hz = get_number(meta, "rate_hz");
    erp.windows.start_s = get_number(meta, "window_start_s");
    erp.windows.end_s = get_number(meta, "window_end_s");
    erp.windows.width_s = get_number(meta, "window_width_s");
    model.feature_meta = erp;
  } else {
    fail(errc::malformed_model, "unknown feature_meta type '" + type + "'");
  }

  if (!model.weights.allFinite() || !std::isfinite(model.bias) ||
      model.gamma < 0.0 || model.gamma > 1.0)
    fail(errc::malformed_model, "non-finite or out-of-range model numbers");
  return model;
}

}  // namespace pbci
