#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "pbci/align_stats.hpp"
#include "pbci/classifier.hpp"
#include "pbci/online.hpp"
#include "pbci/session.hpp"

using namespace pbci;
using testutil::TempDir;

namespace {

int run_cli(const std::string& args, const std::filesystem::path& stdout_path = {}) {
  std::string cmd = std::string(PBCI_CLI_PATH) + " " + args;
  cmd += " > " + (stdout_path.empty() ? "/dev/null" : stdout_path.string());
  cmd += " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

// Shared bundles and models so the slow generation runs once per binary.
struct CliWorld {
  TempDir tmp;
  std::filesystem::path wcal, wconv, ecal, econv, wl_model, ag_model;
  bool ok = false;

  CliWorld() {
    const auto d = tmp.path();
    wcal = d / "wcal";
    wconv = d / "wconv";
    ecal = d / "ecal";
    econv = d / "econv";
    wl_model = d / "wl.json";
    ag_model = d / "ag.json";
    ok = run_cli("synth --mode workload_calibration --out " + wcal.string() +
                 " --seed 7 --noise-sigma 0.5") == 0 &&
         run_cli("synth --mode workload_conversation --out " + wconv.string() +
                 " --seed 7 --noise-sigma 0.5") == 0 &&
         run_cli("synth --mode erp_calibration --out " + ecal.string() +
                 " --seed 5 --noise-sigma 0.5") == 0 &&
         run_cli("synth --mode erp_conversation --out " + econv.string() +
                 " --seed 5 --noise-sigma 0.5") == 0 &&
         run_cli("calibrate --session " + wcal.string() + " --kind workload --model " +
                 wl_model.string()) == 0 &&
         run_cli("calibrate --session " + ecal.string() + " --kind agreement --model " +
                 ag_model.string()) == 0;
  }
};

CliWorld& world() {
  static CliWorld w;
  return w;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes loadable, reproducible bundles") {
  REQUIRE(world().ok);
  const Session s = load_session(world().wcal);
  CHECK(s.data.header.sample_rate_hz == 500.0);
  CHECK(s.data.n_channels() == 8);
  CHECK(s.data.n_frames() == 200000);
  CHECK(s.events.size() == 40);

  const std::string before = file_bytes(world().wcal / "eeg.f32");
  REQUIRE(run_cli("synth --mode workload_calibration --out " + world().wcal.string() +
                  " --seed 7 --noise-sigma 0.5") == 0);
  CHECK(file_bytes(world().wcal / "eeg.f32") == before);

  // a different seed changes the recording
  const auto alt = world().tmp.path() / "wcal_alt";
  REQUIRE(run_cli("synth --mode workload_calibration --out " + alt.string() +
                  " --seed 8 --noise-sigma 0.5") == 0);
  CHECK(file_bytes(alt / "eeg.f32") != before);
}

TEST_CASE("malformed invocations exit with code 2") {
  CHECK(run_cli("synth --mode bogus --out /tmp/nope") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("calibrate --kind workload --model /tmp/m.json") == 2);  // --session missing
  CHECK(run_cli("") == 2);                                               // subcommand required
  CHECK(run_cli("calibrate --session " + world().wcal.string() +
                " --kind workload --model /tmp/m.json --gamma lots") == 2);
}

TEST_CASE("calibrate reports feature dimensions and writes the model") {
  REQUIRE(world().ok);
  const auto out = world().tmp.path() / "calib_stdout.json";
  REQUIRE(run_cli("calibrate --session " + world().wcal.string() + " --kind workload --model " +
                      world().wl_model.string(),
                  out) == 0);
  const nlohmann::json summary = json_file(out);
  CHECK(summary["n_features"] == 12);
  CHECK(summary["n_epochs_total"] == 400);
  CHECK(summary["class_counts"].size() == 2);
  const long n0 = summary["class_counts"][0].get<long>();
  const long n1 = summary["class_counts"][1].get<long>();
  CHECK(n0 + n1 + summary["n_epochs_dropped"].get<long>() == 400);
  CHECK(summary["gamma"].get<double>() > 0.0);
  CHECK(summary["gamma"].get<double>() < 1.0);

  const LinearModel wl = load_model(world().wl_model);
  CHECK(wl.kind == ModelKind::workload);
  CHECK(wl.weights.size() == 12);

  const LinearModel ag = load_model(world().ag_model);
  CHECK(ag.kind == ModelKind::agreement);
  CHECK(ag.weights.size() == 72);

  // events of the wrong kind are an input error
  CHECK(run_cli("calibrate --session " + world().econv.string() +
                " --kind workload --model /tmp/m.json") == 2);
}

TEST_CASE("xval gates the exit code on significance") {
  REQUIRE(world().ok);
  const auto report_path = world().tmp.path() / "xv.json";
  REQUIRE(run_cli("xval --session " + world().wcal.string() + " --kind workload --report " +
                  report_path.string() + " --seed 17") == 0);
  const nlohmann::json report = json_file(report_path);
  CHECK(report["fold_accuracies"].size() == 25);
  CHECK(report["mean_acc"].get<double>() >= 0.95);
  CHECK(report["significant"].get<bool>());
  CHECK(report["chance_threshold"].get<double>() == doctest::Approx(0.541).epsilon(0.002));
  CHECK(report["n_trials"].get<long>() == 392);

  const auto shuffled_path = world().tmp.path() / "xv_shuffled.json";
  CHECK(run_cli("xval --session " + world().wcal.string() + " --kind workload --report " +
                shuffled_path.string() + " --seed 17 --shuffle-labels") == 3);
  const nlohmann::json shuffled = json_file(shuffled_path);
  CHECK_FALSE(shuffled["significant"].get<bool>());
  CHECK(shuffled["mean_acc"].get<double>() < shuffled["chance_threshold"].get<double>());
}

TEST_CASE("simulate emits the 50 Hz tick grid deterministically") {
  REQUIRE(world().ok);
  const auto trace_path = world().tmp.path() / "trace.csv";
  REQUIRE(run_cli("simulate --session " + world().wconv.string() + " --model " +
                  world().wl_model.string() + " --out " + trace_path.string()) == 0);
  const PredictionTrace trace = trace_from_csv(trace_path);
  // 300 s at 100 Hz, window 100, step 2: (30000 - 100) / 2 + 1 ticks
  CHECK(trace.values.size() == 14951);
  CHECK(trace.t0_s == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(trace.rate_hz == doctest::Approx(50.0).epsilon(1e-9));

  const std::string bytes = file_bytes(trace_path);
  REQUIRE(run_cli("simulate --session " + world().wconv.string() + " --model " +
                  world().wl_model.string() + " --out " + trace_path.string()) == 0);
  CHECK(file_bytes(trace_path) == bytes);

  // pm1 normalization bounds the trace
  const auto norm_path = world().tmp.path() / "trace_pm1.csv";
  REQUIRE(run_cli("simulate --session " + world().wconv.string() + " --model " +
                  world().wl_model.string() + " --out " + norm_path.string() +
                  " --normalize pm1") == 0);
  const PredictionTrace norm = trace_from_csv(norm_path);
  for (double v : norm.values) {
    CHECK(v <= 1.0);
    CHECK(v >= -1.0);
  }
}

TEST_CASE("an all-zero recording produces a constant trace") {
  REQUIRE(world().ok);
  Session zero;
  zero.data.header.sample_rate_hz = 500.0;
  zero.data.header.channels = {"Fz", "F3", "F4", "Cz", "Pz", "P3", "P4", "Oz"};
  zero.data.samples = Matrix::Zero(8, 30500);
  const auto dir = world().tmp.path() / "zero";
  save_session(zero, dir);

  const auto trace_path = world().tmp.path() / "zero_trace.csv";
  REQUIRE(run_cli("simulate --session " + dir.string() + " --model " +
                  world().wl_model.string() + " --out " + trace_path.string()) == 0);
  const PredictionTrace trace = trace_from_csv(trace_path);
  REQUIRE(trace.values.size() == 3001);
  for (double v : trace.values) CHECK(v == trace.values[0]);
}

TEST_CASE("align joins the transcript onto the trace") {
  REQUIRE(world().ok);
  const auto trace_path = world().tmp.path() / "etrace.csv";
  REQUIRE(run_cli("simulate --session " + world().econv.string() + " --model " +
                  world().ag_model.string() + " --out " + trace_path.string()) == 0);

  const auto words_path = world().tmp.path() / "words.csv";
  const auto summary_path = world().tmp.path() / "align_stdout.json";
  REQUIRE(run_cli("align --trace " + trace_path.string() + " --transcript " +
                      (world().econv / "transcript.jsonl").string() + " --sync " +
                      (world().econv / "sync.json").string() + " --out " + words_path.string(),
                  summary_path) == 0);

  const nlohmann::json summary = json_file(summary_path);
  CHECK(summary["n_words"] == 60);
  CHECK(summary["n_absent"] == 0);
  CHECK(summary["clock"]["offset_s"].get<double>() == doctest::Approx(1.25).epsilon(1e-9));
  CHECK(summary["clock"]["drift"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

  const auto words = words_from_csv(words_path);
  const auto transcript = load_transcript(world().econv / "transcript.jsonl");
  REQUIRE(words.size() == transcript.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    CHECK(words[i].word == transcript[i].word);
    CHECK(words[i].onset_eeg_s ==
          doctest::Approx(transcript[i].onset_s + 1.25).epsilon(1e-9));
    CHECK_FALSE(words[i].absent);
  }

  // transcript timestamps live on the audio clock, so sync pairs are required
  CHECK(run_cli("align --trace " + trace_path.string() + " --transcript " +
                (world().econv / "transcript.jsonl").string() + " --out /tmp/nope.csv") == 2);
}

TEST_CASE("analyze recovers the planted workload ramp") {
  REQUIRE(world().ok);
  const auto trace_path = world().tmp.path() / "trace.csv";  // written by the simulate case
  REQUIRE(std::filesystem::exists(trace_path));
  const auto report_path = world().tmp.path() / "report.json";
  REQUIRE(run_cli("analyze --trace " + trace_path.string() + " --rounds " +
                  (world().wconv / "rounds.json").string() + " --out " +
                  report_path.string()) == 0);

  const nlohmann::json report = json_file(report_path);
  REQUIRE(report["rounds"].size() == 10);
  CHECK(report["trend"]["slope"].get<double>() > 0.0);
  CHECK(report["trend"]["significant"].get<bool>());
  CHECK(report["trend"]["ci"][0].get<double>() > 0.0);
  for (std::size_t r = 1; r < 10; ++r)
    CHECK(report["rounds"][r]["mean"].get<double>() >
          report["rounds"][r - 1]["mean"].get<double>());
}

TEST_CASE("analyze exits zero on a flat trace and reports no trend") {
  REQUIRE(world().ok);
  PredictionTrace flat;
  flat.t0_s = 1.0;
  flat.rate_hz = 50.0;
  flat.values.assign(3001, 0.75);
  const auto trace_path = world().tmp.path() / "flat.csv";
  trace_to_csv(flat, trace_path);

  std::vector<RoundSpec> rounds;
  for (int r = 0; r < 6; ++r) rounds.push_back({r + 1, 1.0 + r * 10.0, 1.0 + (r + 1) * 10.0});
  const auto rounds_path = world().tmp.path() / "flat_rounds.json";
  save_rounds(rounds, rounds_path);

  const auto report_path = world().tmp.path() / "flat_report.json";
  REQUIRE(run_cli("analyze --trace " + trace_path.string() + " --rounds " + rounds_path.string() +
                  " --out " + report_path.string()) == 0);
  const nlohmann::json report = json_file(report_path);
  CHECK(report["trend"]["slope"].get<double>() == 0.0);
  CHECK(report["trend"]["ci"][0].get<double>() <= 0.0);
  CHECK(report["trend"]["ci"][1].get<double>() >= 0.0);
  CHECK_FALSE(report["trend"]["significant"].get<bool>());
  for (const auto& r : report["rounds"]) CHECK(r["mean"].get<double>() == 0.75);
}

}  // TEST_SUITE
