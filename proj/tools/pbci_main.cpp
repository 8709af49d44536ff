#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pbci/align_stats.hpp"
#include "pbci/classifier.hpp"
#include "pbci/error.hpp"
#include "pbci/eval.hpp"
#include "pbci/online.hpp"
#include "pbci/pipeline.hpp"
#include "pbci/rng.hpp"
#include "pbci/session.hpp"
#include "pbci/synth.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInvalidInput = 2;
constexpr int kExitValidation = 3;
constexpr int kExitIo = 4;

int exit_code_for(pbci::errc code) {
  switch (code) {
    case pbci::errc::io_failure:
      return kExitIo;
    case pbci::errc::single_class:
    case pbci::errc::degenerate_epoch:
    case pbci::errc::not_positive_definite:
    case pbci::errc::too_few_observations:
    case pbci::errc::singular_covariance:
    case pbci::errc::class_too_small:
    case pbci::errc::drift_out_of_range:
    case pbci::errc::empty_round:
    case pbci::errc::too_few_rounds:
    case pbci::errc::zero_variance_x:
      return kExitValidation;
    default:
      return kExitInvalidInput;
  }
}

// Machine-readable summaries go to stdout; everything else to stderr.
void emit(const json& summary) {
  std::fputs(summary.dump(2).c_str(), stdout);
  std::fputc('\n', stdout);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) pbci::fail(pbci::errc::io_failure, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) pbci::fail(pbci::errc::io_failure, "short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) pbci::fail(pbci::errc::io_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string gamma_or_auto(const std::string& s) {
  if (s == "auto") return {};
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !(v >= 0.0 && v < 1.0))
    return "expected 'auto' or a number in [0, 1)";
  return {};
}

std::optional<double> parse_gamma(const std::string& s) {
  if (s == "auto") return std::nullopt;
  return std::strtod(s.c_str(), nullptr);
}

struct SynthArgs {
  std::string mode = "workload_calibration";
  std::string out;
  std::uint64_t seed = 1;
  double noise_sigma = 2.0;
  double sample_rate = 500.0;
  double sync_offset = 1.25;
  double sync_drift = 1.0;
  int n_trials = 0;
  int n_rounds = 10;
  int words_per_round = 6;
  std::vector<std::string> channels;
};

int cmd_synth(const SynthArgs& a) {
  pbci::SynthConfig cfg;
  cfg.mode = pbci::synth_mode_from_name(a.mode);
  cfg.seed = a.seed;
  cfg.noise_sigma_uv = a.noise_sigma;
  cfg.sample_rate_hz = a.sample_rate;
  cfg.sync_offset_s = a.sync_offset;
  cfg.sync_drift = a.sync_drift;
  cfg.n_trials = a.n_trials;
  cfg.n_rounds = a.n_rounds;
  cfg.words_per_round = a.words_per_round;
  if (!a.channels.empty()) cfg.channels = a.channels;

  pbci::write_synth_bundle(cfg, a.out);
  const pbci::Session check = pbci::load_session(a.out);

  emit(json{{"command", "synth"},
            {"mode", a.mode},
            {"out", a.out},
            {"seed", a.seed},
            {"channels", check.data.header.channels.size()},
            {"frames", check.data.samples.cols()},
            {"rate_hz", check.data.header.sample_rate_hz},
            {"events", check.events.size()}});
  return kExitOk;
}

struct CalibrateArgs {
  std::string session;
  std::string kind = "workload";
  std::string model;
  int k = 3;
  std::string gamma = "auto";
};

pbci::CalibResult run_calibration(const pbci::Session& session, const std::string& kind, int k,
                                  const std::string& gamma) {
  pbci::CalibConfig cfg;
  cfg.csp_k = k;
  cfg.gamma = parse_gamma(gamma);
  return kind == "workload" ? pbci::calibrate_workload(session, cfg)
                            : pbci::calibrate_agreement(session, cfg);
}

std::vector<long> count_classes(const std::vector<int>& labels) {
  std::vector<long> counts(2, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

int cmd_calibrate(const CalibrateArgs& a) {
  const pbci::Session session = pbci::load_session(a.session);
  const pbci::CalibResult result = run_calibration(session, a.kind, a.k, a.gamma);
  pbci::save_model(result.model, a.model);

  emit(json{{"command", "calibrate"},
            {"kind", a.kind},
            {"model", a.model},
            {"n_features", result.model.weights.size()},
            {"gamma", result.model.gamma},
            {"class_counts", count_classes(result.features.labels)},
            {"n_epochs_total", result.n_epochs_total},
            {"n_epochs_dropped", result.n_epochs_dropped}});
  return kExitOk;
}

struct XvalArgs {
  std::string session;
  std::string kind = "workload";
  std::string report;
  int folds = 5;
  int repeats = 5;
  std::uint64_t seed = 1;
  int k = 3;
  std::string gamma = "auto";
  bool shuffle_labels = false;
};

int cmd_xval(const XvalArgs& a) {
  const pbci::Session session = pbci::load_session(a.session);
  pbci::CalibResult calib = run_calibration(session, a.kind, a.k, a.gamma);
  if (a.shuffle_labels) {
    pbci::Rng rng(pbci::mix_seed(a.seed, 1));
    rng.shuffle(calib.features.labels);
  }

  const std::optional<double> gamma = parse_gamma(a.gamma);
  const pbci::CrossValReport report = pbci::crossval_repeated(
      calib.features,
      [&](const pbci::FeatureMatrix& f) { return pbci::train_slda(f, gamma); }, a.folds,
      a.repeats, a.seed);

  json doc{{"fold_accuracies", report.fold_accuracies},
           {"mean_acc", report.mean_acc},
           {"sd_acc", report.sd_acc},
           {"n_trials", report.n_trials},
           {"class_counts", report.class_counts},
           {"chance_threshold", report.chance_threshold},
           {"significant", report.significant},
           {"seed", report.seed},
           {"kind", a.kind},
           {"shuffled", a.shuffle_labels}};
  write_text(a.report, doc.dump(2) + "\n");
  emit(doc);
  return report.significant ? kExitOk : kExitValidation;
}

struct SimulateArgs {
  std::string session;
  std::string model;
  std::string out;
  std::string normalize = "none";
};

int cmd_simulate(const SimulateArgs& a) {
  const pbci::Session session = pbci::load_session(a.session);
  const pbci::LinearModel model = pbci::load_model(a.model);
  pbci::PredictionTrace trace = pbci::simulate_online(session, model);
  if (a.normalize == "pm1") trace = pbci::normalize_trace(trace, pbci::TraceNorm::minmax_pm1);
  pbci::trace_to_csv(trace, a.out);

  emit(json{{"command", "simulate"},
            {"out", a.out},
            {"n_ticks", trace.values.size()},
            {"t0_s", trace.t0_s},
            {"rate_hz", trace.rate_hz},
            {"normalize", a.normalize}});
  return kExitOk;
}

struct AlignArgs {
  std::string trace;
  std::string transcript;
  std::string sync;
  std::string out;
};

int cmd_align(const AlignArgs& a) {
  const pbci::PredictionTrace trace = pbci::trace_from_csv(a.trace);
  const std::vector<pbci::TranscriptWord> transcript = pbci::load_transcript(a.transcript);
  const pbci::SyncPairs sync = pbci::load_sync(a.sync);
  const pbci::ClockMap map = pbci::fit_clock_map(sync);
  const std::vector<pbci::WordAlignment> words = pbci::align_words(trace, transcript, map);
  pbci::words_to_csv(words, a.out);

  long absent = 0;
  for (const auto& w : words) absent += w.absent ? 1 : 0;
  emit(json{{"command", "align"},
            {"out", a.out},
            {"n_words", words.size()},
            {"n_absent", absent},
            {"clock",
             {{"offset_s", map.offset_s},
              {"drift", map.drift},
              {"rms_residual_s", map.rms_residual_s}}}});
  return kExitOk;
}

struct AnalyzeArgs {
  std::string trace;
  std::string rounds;
  std::string out;
  double alpha = 0.05;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const pbci::PredictionTrace trace = pbci::trace_from_csv(a.trace);
  const std::vector<pbci::RoundSpec> rounds = pbci::load_rounds(a.rounds);
  const std::vector<pbci::RoundSummary> summaries = pbci::round_means(trace, rounds, a.alpha);

  std::vector<std::pair<double, double>> points;
  for (const auto& r : summaries) points.emplace_back(r.round, r.mean);
  const pbci::TrendReport trend = pbci::ols_trend(points, a.alpha);

  pbci::save_analysis(summaries, trend, a.out);
  std::fputs(read_text(a.out).c_str(), stdout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"passive BCI toolkit: synthesize, calibrate, cross-validate, simulate, align, analyze"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic session bundle");
  synth->add_option("--mode", synth_args.mode, "session layout")
      ->check(CLI::IsMember({"workload_calibration", "workload_conversation", "erp_calibration",
                             "erp_conversation"}))
      ->capture_default_str();
  synth->add_option("--out", synth_args.out, "output bundle directory")->required();
  synth->add_option("--seed", synth_args.seed, "generator seed")->capture_default_str();
  synth->add_option("--noise-sigma", synth_args.noise_sigma, "pink noise sigma in microvolts")
      ->capture_default_str();
  synth->add_option("--sample-rate", synth_args.sample_rate, "recording rate in Hz")
      ->capture_default_str();
  synth->add_option("--sync-offset", synth_args.sync_offset, "audio-to-recording clock offset in s")
      ->capture_default_str();
  synth->add_option("--sync-drift", synth_args.sync_drift, "audio-to-recording clock drift")
      ->capture_default_str();
  synth->add_option("--n-trials", synth_args.n_trials, "trial count, 0 = mode default")
      ->capture_default_str();
  synth->add_option("--n-rounds", synth_args.n_rounds, "conversation round count")
      ->capture_default_str();
  synth->add_option("--words-per-round", synth_args.words_per_round, "transcript words per round")
      ->capture_default_str();
  synth->add_option("--channels", synth_args.channels, "channel names, default 8-channel montage");

  CalibrateArgs calibrate_args;
  auto* calibrate = app.add_subcommand("calibrate", "train a classifier from a labeled session");
  calibrate->add_option("--session", calibrate_args.session, "session bundle directory")
      ->required();
  calibrate->add_option("--kind", calibrate_args.kind, "classifier kind")
      ->check(CLI::IsMember({"workload", "agreement"}))
      ->capture_default_str();
  calibrate->add_option("--model", calibrate_args.model, "output model JSON path")->required();
  calibrate->add_option("--k", calibrate_args.k, "spatial filters kept per side and band")
      ->capture_default_str();
  calibrate->add_option("--gamma", calibrate_args.gamma, "shrinkage, 'auto' or a value in [0, 1)")
      ->check(gamma_or_auto)
      ->capture_default_str();

  XvalArgs xval_args;
  auto* xval = app.add_subcommand("xval", "repeated stratified cross-validation");
  xval->add_option("--session", xval_args.session, "session bundle directory")->required();
  xval->add_option("--kind", xval_args.kind, "classifier kind")
      ->check(CLI::IsMember({"workload", "agreement"}))
      ->capture_default_str();
  xval->add_option("--report", xval_args.report, "output report JSON path")->required();
  xval->add_option("--folds", xval_args.folds, "folds per repeat")->capture_default_str();
  xval->add_option("--repeats", xval_args.repeats, "shuffled repeats")->capture_default_str();
  xval->add_option("--seed", xval_args.seed, "fold assignment seed")->capture_default_str();
  xval->add_option("--k", xval_args.k, "spatial filters kept per side and band")
      ->capture_default_str();
  xval->add_option("--gamma", xval_args.gamma, "shrinkage, 'auto' or a value in [0, 1)")
      ->check(gamma_or_auto)
      ->capture_default_str();
  xval->add_flag("--shuffle-labels", xval_args.shuffle_labels,
                 "debug: permute labels to probe the chance level");

  SimulateArgs simulate_args;
  auto* simulate = app.add_subcommand("simulate", "pseudo-online classification at 50 Hz");
  simulate->add_option("--session", simulate_args.session, "session bundle directory")->required();
  simulate->add_option("--model", simulate_args.model, "model JSON path")->required();
  simulate->add_option("--out", simulate_args.out, "output trace CSV path")->required();
  simulate->add_option("--normalize", simulate_args.normalize, "trace normalization")
      ->check(CLI::IsMember({"none", "pm1"}))
      ->capture_default_str();

  AlignArgs align_args;
  auto* align = app.add_subcommand("align", "map transcript words onto a prediction trace");
  align->add_option("--trace", align_args.trace, "trace CSV path")->required();
  align->add_option("--transcript", align_args.transcript, "transcript JSONL path, audio clock")
      ->required();
  align->add_option("--sync", align_args.sync, "audio/recording sync pairs JSON path")->required();
  align->add_option("--out", align_args.out, "output word statistics CSV path")->required();

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "round means, AR(1) intervals, trend line");
  analyze->add_option("--trace", analyze_args.trace, "trace CSV path")->required();
  analyze->add_option("--rounds", analyze_args.rounds, "round boundaries JSON path")->required();
  analyze->add_option("--out", analyze_args.out, "output report JSON path")->required();
  analyze->add_option("--alpha", analyze_args.alpha, "interval significance level")
      ->check(CLI::Range(1e-6, 0.5))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cerr, std::cerr);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  try {
    if (*synth) return cmd_synth(synth_args);
    if (*calibrate) return cmd_calibrate(calibrate_args);
    if (*xval) return cmd_xval(xval_args);
    if (*simulate) return cmd_simulate(simulate_args);
    if (*align) return cmd_align(align_args);
    if (*analyze) return cmd_analyze(analyze_args);
  } catch (const pbci::Error& e) {
    std::fprintf(stderr, "pbci: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pbci: %s\n", e.what());
    return kExitIo;
  }
  return kExitInvalidInput;
}
