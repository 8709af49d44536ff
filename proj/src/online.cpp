#include "pbci/online.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "pbci/dsp.hpp"
#include "pbci/error.hpp"
#include "pbci/features.hpp"

namespace pbci {

namespace {

constexpr double kTickRateHz = 50.0;
constexpr double kHighpassHz = 1.0;

// Causal counterpart of the offline chain: average reference, 1 Hz
// high-pass, then a single anti-alias low-pass and decimation stage.
Matrix causal_front_end(const SessionData& data, double feature_rate_hz) {
  const double src = data.header.sample_rate_hz;
  const long factor = std::lround(src / feature_rate_hz);
  if (factor < 1 || src != feature_rate_hz * static_cast<double>(factor))
    fail(errc::ratio_not_rational, "source rate must be an integer multiple of the feature rate");

  SessionData x = average_reference(data);
  x.samples = filter_causal(design_highpass(kHighpassHz, src), x.samples);
  if (factor == 1) return std::move(x.samples);

  const SosFilter anti_alias = design_lowpass(0.45 * feature_rate_hz / 2.0, src);
  const Matrix filtered = filter_causal(anti_alias, x.samples);
  Matrix out(filtered.rows(), (filtered.cols() - 1) / factor + 1);
  for (long j = 0; j < out.cols(); ++j) out.col(j) = filtered.col(j * factor);
  return out;
}

double window_logvar(const Eigen::Ref<const Eigen::RowVectorXd>& projected) {
  const double mean = projected.mean();
  const double var = (projected.array() - mean).square().sum() / projected.size();
  return std::log(var + 1e-12);
}

template <typename FeatureFn>
PredictionTrace run_ticks(const Session& session, const LinearModel& model, double feature_rate_hz,
                          long window_frames, long stream_frames, FeatureFn&& featurize) {
  if (stream_frames < window_frames)
    fail(errc::session_too_short, "session shorter than one analysis window");

  const long step = std::lround(feature_rate_hz / kTickRateHz);
  const long n_ticks = (stream_frames - window_frames) / step + 1;

  PredictionTrace trace;
  trace.rate_hz = kTickRateHz;
  trace.t0_s = session.data.header.start_time_s +
               static_cast<double>(window_frames) / feature_rate_hz;
  trace.values.reserve(static_cast<std::size_t>(n_ticks));
  for (long k = 0; k < n_ticks; ++k)
    trace.values.push_back(predict(model, featurize(k * step)));
  return trace;
}

PredictionTrace simulate_spectral(const Session& session, const LinearModel& model,
                                  const SpectralFeatureMeta& meta) {
  const double rate = meta.rate_hz;
  const long window = frame_index(meta.epoch_len_s, rate);
  const auto& bank = meta.bank;
  const long per_band = 2L * bank.k;

  // Band-filter the whole decimated stream once, then slide the window.
  const Matrix front = causal_front_end(session.data, rate);
  std::vector<Matrix> projected;  // per band: (2k) x frames
  for (std::size_t b = 0; b < bank.bands.size(); ++b) {
    const Matrix banded = filter_causal(design_bandpass(bank.bands[b], rate), front);
    projected.push_back(bank.filters_per_band[b].transpose() * banded);
  }

  auto featurize = [&](long first) {
    Vector f(static_cast<long>(bank.bands.size()) * per_band);
    long at = 0;
    for (const auto& p : projected)
      for (long j = 0; j < per_band; ++j)
        f(at++) = window_logvar(p.row(j).segment(first, window));
    return f;
  };
  return run_ticks(session, model, rate, window, front.cols(), featurize);
}

PredictionTrace simulate_erp(const Session& session, const LinearModel& model,
                             const ErpFeatureMeta& meta) {
  const double rate = meta.windows.rate_hz;
  const long window = frame_index(meta.epoch_len_s, rate);

  const Matrix front = causal_front_end(session.data, rate);
  const Matrix banded = filter_causal(design_bandpass(kErpBand, rate), front);

  auto featurize = [&](long first) {
    Epoch pseudo;
    pseudo.rate_hz = rate;
    pseudo.samples = banded.middleCols(first, window);
    return windowed_means(pseudo, meta.windows);
  };
  return run_ticks(session, model, rate, window, banded.cols(), featurize);
}

}  // namespace

PredictionTrace simulate_online(const Session& session, const LinearModel& model) {
  if (session.data.header.channels != model.channels)
    fail(errc::channel_mismatch, "session channels differ from the model's channel list");
  const bool spectral_meta = std::holds_alternative<SpectralFeatureMeta>(model.feature_meta);
  if (spectral_meta != (model.kind == ModelKind::workload))
    fail(errc::kind_mismatch, "model kind does not match its feature description");

  if (spectral_meta)
    return simulate_spectral(session, model, std::get<SpectralFeatureMeta>(model.feature_meta));
  return simulate_erp(session, model, std::get<ErpFeatureMeta>(model.feature_meta));
}

PredictionTrace normalize_trace(const PredictionTrace& trace, TraceNorm mode) {
  if (trace.values.empty()) fail(errc::empty_trace, "trace has no ticks");
  PredictionTrace out = trace;
  if (mode == TraceNorm::none) return out;

  double pos = 0.0, neg = 0.0;
  for (double v : trace.values) {
    pos = std::max(pos, v);
    neg = std::min(neg, v);
  }
  for (double& v : out.values) {
    if (v > 0.0 && pos > 0.0) v /= pos;
    if (v < 0.0 && neg < 0.0) v /= -neg;
  }
  return out;
}

void trace_to_csv(const PredictionTrace& trace, const std::filesystem::path& path) {
  if (trace.values.empty()) fail(errc::empty_trace, "trace has no ticks");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot write " + path.string());
  out << "t_s,value\n";
  char line[80];
  for (std::size_t k = 0; k < trace.values.size(); ++k) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", trace.time_at(k), trace.values[k]);
    out << line;
  }
  if (!out) fail(errc::io_failure, "short write to " + path.string());
}

PredictionTrace trace_from_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::missing_file, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "t_s,value")
    fail(errc::malformed_record, path.string() + ": expected header 't_s,value'");

  std::vector<double> times, values;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const char* s = line.c_str();
    char* end = nullptr;
    const double t = std::strtod(s, &end);
    if (end == s || *end != ',')
      fail(errc::malformed_record, path.string() + ":" + std::to_string(line_no) + ": bad row");
    const char* s2 = end + 1;
    const double v = std::strtod(s2, &end);
    if (end == s2 || *end != '\0' || !std::isfinite(t) || !std::isfinite(v))
      fail(errc::malformed_record, path.string() + ":" + std::to_string(line_no) + ": bad row");
    times.push_back(t);
    values.push_back(v);
  }
  if (values.empty()) fail(errc::empty_trace, path.string() + " has no ticks");

  PredictionTrace trace;
  trace.t0_s = times.front();
  trace.rate_hz = times.size() > 1 ? static_cast<double>(times.size() - 1) /
                                         (times.back() - times.front())
                                   : kTickRateHz;
  trace.values = std::move(values);
  return trace;
}

}  // namespace pbci
