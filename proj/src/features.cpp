#include "pbci/features.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "pbci/error.hpp"

namespace pbci {

namespace {

constexpr double kVarFloor = 1e-12;

Matrix epoch_covariance(const Epoch& e, std::size_t index) {
  if (e.samples.cols() < 2)
    fail(errc::degenerate_epoch, "epoch " + std::to_string(index) + " has fewer than 2 frames");
  Matrix centered = e.samples;
  centered.colwise() -= e.samples.rowwise().mean();
  Matrix c = centered * centered.transpose() / static_cast<double>(e.samples.cols());
  const double tr = c.trace();
  if (!(tr > 0.0))
    fail(errc::degenerate_epoch, "epoch " + std::to_string(index) + " has zero variance");
  return c / tr;
}

}  // namespace

int WindowSpec::n_windows() const {
  const double n = (end_s - start_s) / width_s;
  if (std::abs(n - std::round(n)) > 1e-9 || std::round(n) < 1.0)
    fail(errc::invalid_config, "window span is not a whole number of windows");
  return static_cast<int>(std::round(n));
}

int WindowSpec::samples_per_window() const {
  const double n = width_s * rate_hz;
  if (std::abs(n - std::round(n)) > 1e-9 || std::round(n) < 1.0)
    fail(errc::invalid_config, "window width is not a whole number of samples");
  return static_cast<int>(std::round(n));
}

std::pair<Matrix, Matrix> class_covariances(const std::vector<Epoch>& epochs) {
  long n0 = 0, n1 = 0;
  for (const auto& e : epochs) {
    if (!e.label) continue;
    (*e.label == 0 ? n0 : n1) += 1;
  }
  if (n0 == 0 || n1 == 0) fail(errc::single_class, "need labeled epochs from both classes");
  const long ch = epochs.front().samples.rows();
  Matrix c0 = Matrix::Zero(ch, ch), c1 = Matrix::Zero(ch, ch);
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& e = epochs[i];
    if (!e.label) continue;
    (*e.label == 0 ? c0 : c1) += epoch_covariance(e, i);
  }
  c0 /= static_cast<double>(n0);
  c1 /= static_cast<double>(n1);
  c0 = ((c0 + c0.transpose()) / 2.0).eval();
  c1 = ((c1 + c1.transpose()) / 2.0).eval();
  return {c0, c1};
}

std::pair<Matrix, std::vector<double>> train_csp(const Matrix& c0, const Matrix& c1, int k) {
  const long ch = c0.rows();
  if (2L * k > ch) fail(errc::too_many_filters, "2k exceeds channel count");
  const Matrix s = c0 + c1;

  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const Vector lam = es.eigenvalues();
  if (!(lam.minCoeff() > 1e-12 * std::max(1.0, lam.maxCoeff())))
    fail(errc::not_positive_definite, "covariance sum is not positive definite");
  const Matrix whiten = lam.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();

  Matrix t = whiten * c1 * whiten.transpose();
  t = ((t + t.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> et(t);

  // ascending order from the solver; pick k largest then k smallest, descending overall
  std::vector<long> pick;
  for (int i = 0; i < k; ++i) pick.push_back(ch - 1 - i);
  for (int i = k - 1; i >= 0; --i) pick.push_back(i);

  Matrix filters(ch, 2L * k);
  std::vector<double> values;
  for (std::size_t j = 0; j < pick.size(); ++j) {
    Vector w = whiten.transpose() * et.eigenvectors().col(pick[j]);
    w /= w.norm();
    long imax = 0;
    w.cwiseAbs().maxCoeff(&imax);
    if (w(imax) < 0.0) w = -w;
    filters.col(static_cast<long>(j)) = w;
    values.push_back(et.eigenvalues()(pick[j]));
  }
  return {filters, values};
}

Epoch bandpass_epoch(const Epoch& epoch, BandSpec band) {
  Epoch out = epoch;
  out.samples = filter_zero_phase(design_bandpass(band, epoch.rate_hz), epoch.samples);
  return out;
}

Vector apply_csp_logvar(const Epoch& epoch, const SpatialFilterBank& bank) {
  long dim = 0;
  for (const auto& f : bank.filters_per_band) dim += f.cols();
  Vector feat(dim);
  long at = 0;
  for (std::size_t b = 0; b < bank.bands.size(); ++b) {
    const Epoch filtered = bandpass_epoch(epoch, bank.bands[b]);
    const Matrix y = bank.filters_per_band[b].transpose() * filtered.samples;
    for (long r = 0; r < y.rows(); ++r) {
      const double m = y.row(r).mean();
      const double var = (y.row(r).array() - m).square().mean();
      feat(at++) = std::log(var + kVarFloor);
    }
  }
  if (!feat.allFinite()) fail(errc::non_finite_feature, "non-finite log-variance feature");
  return feat;
}

Vector windowed_means(const Epoch& epoch, const WindowSpec& spec) {
  if (epoch.rate_hz != spec.rate_hz)
    fail(errc::epoch_too_short, "epoch rate does not match the window spec");
  const int n_win = spec.n_windows();
  const int w_len = spec.samples_per_window();
  const long need = frame_index(spec.end_s, spec.rate_hz);
  if (epoch.samples.cols() < need)
    fail(errc::epoch_too_short, "epoch ends before " + std::to_string(spec.end_s) + " s post-onset");
  const long ch = epoch.samples.rows();
  Vector feat(ch * n_win);
  for (long c = 0; c < ch; ++c) {
    for (int w = 0; w < n_win; ++w) {
      const long first = frame_index(spec.start_s + w * spec.width_s, spec.rate_hz);
      feat(c * n_win + w) = epoch.samples.row(c).segment(first, w_len).mean();
    }
  }
  return feat;
}

std::vector<LabeledEvent> label_grid_jumps(const std::vector<EventRecord>& events) {
  std::vector<LabeledEvent> out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto it = events[i].meta.find("angle_deg");
    if (it == events[i].meta.end())
      fail(errc::malformed_angle, "event " + std::to_string(i) + " has no angle_deg");
    const char* text = it->second.c_str();
    char* end = nullptr;
    const double angle = std::strtod(text, &end);
    if (end == text || *end != '\0' || !std::isfinite(angle) || angle < 0.0 || angle > 180.0)
      fail(errc::malformed_angle,
           "event " + std::to_string(i) + ": angle_deg '" + it->second + "' not in [0, 180]");
    if (angle < 45.0)
      out.push_back({events[i], 1});
    else if (angle > 90.0)
      out.push_back({events[i], 0});
  }
  return out;
}

}  // namespace pbci
