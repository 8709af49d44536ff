#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "pbci/dsp.hpp"
#include "pbci/synth.hpp"

using namespace pbci;
using testutil::TempDir;
using testutil::expect_error;

namespace {

long find_channel(const Session& s, const std::string& name) {
  const auto& ch = s.data.header.channels;
  return std::find(ch.begin(), ch.end(), name) - ch.begin();
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("pink noise is deterministic with the right level") {
  Vector a = pink_noise(65536, 2.0, 42);
  Vector b = pink_noise(65536, 2.0, 42);
  CHECK(a == b);
  Vector c = pink_noise(65536, 2.0, 43);
  CHECK(a != c);

  CHECK(std::abs(a.mean()) < 1e-9);
  const double sd = std::sqrt(a.squaredNorm() / 65536.0);
  CHECK(sd > 1.9);
  CHECK(sd < 2.1);

  CHECK(pink_noise(1000, 0.0, 1).isZero());
  expect_error(errc::too_short, [&] { pink_noise(100, 2.0, 1); });
}

TEST_CASE("pink noise spectrum falls like one over f") {
  Vector x = pink_noise(65536, 2.0, 7);
  std::vector<double> v(x.data(), x.data() + x.size());
  const double slope = oracle::periodogram_slope(v, 500.0, 1.0, 40.0);
  CHECK(slope > -1.3);
  CHECK(slope < -0.7);
}

TEST_CASE("workload calibration layout") {
  SynthConfig cfg;
  cfg.mode = SynthMode::workload_calibration;
  Session s = synth_workload_session(cfg);
  CHECK(s.data.n_channels() == 8);
  CHECK(s.data.n_frames() == 200000);
  CHECK(s.data.duration_s() == doctest::Approx(400.0));
  REQUIRE(s.events.size() == 40);
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    CHECK(s.events[i].t_s == 10.0 * static_cast<double>(i));
    CHECK(s.events[i].label == "trial_start");
    CHECK(s.events[i].meta.at("condition") == (i % 2 == 0 ? "high" : "low"));
  }
  CHECK(s.rounds.empty());
}

TEST_CASE("workload theta power ratio matches the amplitude ratio") {
  SynthConfig cfg;
  cfg.mode = SynthMode::workload_calibration;
  cfg.noise_sigma_uv = 0.0;
  cfg.n_trials = 4;
  Session s = synth_workload_session(cfg);
  const long fz = find_channel(s, "Fz");
  const long frames_per_trial = 5000;
  double high = 0.0, low = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<double> seg(static_cast<std::size_t>(frames_per_trial));
    for (long i = 0; i < frames_per_trial; ++i)
      seg[static_cast<std::size_t>(i)] = s.data.samples(fz, trial * frames_per_trial + i);
    const double p = oracle::goertzel_power(seg.data(), frames_per_trial, cfg.theta_hz, 500.0);
    (trial % 2 == 0 ? high : low) += p;
  }
  CHECK(high / low == doctest::Approx(9.0).epsilon(0.25));

  // alpha moves the other way on parietal sites
  const long pz = find_channel(s, "Pz");
  double ahigh = 0.0, alow = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<double> seg(static_cast<std::size_t>(frames_per_trial));
    for (long i = 0; i < frames_per_trial; ++i)
      seg[static_cast<std::size_t>(i)] = s.data.samples(pz, trial * frames_per_trial + i);
    const double p = oracle::goertzel_power(seg.data(), frames_per_trial, cfg.alpha_hz, 500.0);
    (trial % 2 == 0 ? ahigh : alow) += p;
  }
  CHECK(ahigh / alow == doctest::Approx(std::pow(2.0 / 5.0, 2)).epsilon(0.25));
}

TEST_CASE("conversation alpha power decreases across rounds") {
  SynthConfig cfg;
  cfg.mode = SynthMode::workload_conversation;
  cfg.noise_sigma_uv = 0.0;
  Session s = synth_workload_session(cfg);
  REQUIRE(s.rounds.size() == 10);
  CHECK(s.data.duration_s() == doctest::Approx(300.0));
  const long pz = find_channel(s, "Pz");
  const long frames_per_round = 15000;
  double prev = 1e18;
  for (int r = 0; r < 10; ++r) {
    std::vector<double> seg(static_cast<std::size_t>(frames_per_round));
    for (long i = 0; i < frames_per_round; ++i)
      seg[static_cast<std::size_t>(i)] = s.data.samples(pz, r * frames_per_round + i);
    const double p = oracle::goertzel_power(seg.data(), frames_per_round, cfg.alpha_hz, 500.0);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("erp deflection peaks at the configured latency") {
  SynthConfig cfg;
  cfg.mode = SynthMode::erp_calibration;
  cfg.noise_sigma_uv = 0.0;
  cfg.n_trials = 2;
  Session s = synth_erp_session(cfg);
  REQUIRE(s.events.size() == 2);
  const long fz = find_channel(s, "Fz");
  const long cz = find_channel(s, "Cz");
  const long pz = find_channel(s, "Pz");
  for (const auto& ev : s.events) {
    const long peak = frame_index(ev.t_s + 0.4, 500.0);
    if (ev.meta.at("angle_deg") == "120") {
      CHECK(s.data.samples(fz, peak) == doctest::Approx(-5.0).epsilon(0.05));
      CHECK(s.data.samples(cz, peak) == doctest::Approx(-5.0).epsilon(0.05));
      CHECK(s.data.samples(pz, peak) == 0.0);
    } else {
      const long first = frame_index(ev.t_s, 500.0);
      CHECK(s.data.samples.block(0, first, s.data.n_channels(), 500).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("erp calibration balances the two angle classes") {
  SynthConfig cfg;
  cfg.mode = SynthMode::erp_calibration;
  Session s = synth_erp_session(cfg);
  REQUIRE(s.events.size() == 180);
  long correct = 0, incorrect = 0;
  for (const auto& ev : s.events) {
    if (ev.meta.at("angle_deg") == "30")
      ++correct;
    else if (ev.meta.at("angle_deg") == "120")
      ++incorrect;
  }
  CHECK(correct == 90);
  CHECK(incorrect == 90);
}

TEST_CASE("erp conversation emits words, sync, and balanced expectedness") {
  SynthConfig cfg;
  cfg.mode = SynthMode::erp_conversation;
  Session s = synth_erp_session(cfg);
  REQUIRE(s.transcript.size() == 60);
  REQUIRE(s.events.size() == 60);
  long counts[3] = {0, 0, 0};
  for (const auto& ev : s.events) {
    const std::string& e = ev.meta.at("expectedness");
    if (e == "low") ++counts[0];
    if (e == "medium") ++counts[1];
    if (e == "high") ++counts[2];
  }
  CHECK(counts[0] == 20);
  CHECK(counts[1] == 20);
  CHECK(counts[2] == 20);
  REQUIRE(s.sync.pairs.size() == 4);
  for (const auto& [audio_t, eeg_t] : s.sync.pairs)
    CHECK(eeg_t == doctest::Approx(audio_t + 1.25).epsilon(1e-12));
  for (std::size_t i = 0; i < s.transcript.size(); ++i) {
    CHECK(s.events[i].t_s == doctest::Approx(s.transcript[i].onset_s + 1.25));
    CHECK(s.transcript[i].offset_s - s.transcript[i].onset_s == doctest::Approx(0.45));
    CHECK(s.transcript[i].speaker == Speaker::agent);
  }
}

TEST_CASE("bundles are deterministic and load back cleanly") {
  TempDir tmp;
  SynthConfig cfg;
  cfg.mode = SynthMode::erp_conversation;
  cfg.seed = 11;
  write_synth_bundle(cfg, tmp.path() / "a");
  write_synth_bundle(cfg, tmp.path() / "b");

  Session a = load_session(tmp.path() / "a");
  Session b = load_session(tmp.path() / "b");
  CHECK(a.data.samples == b.data.samples);
  CHECK(a.events.size() == b.events.size());
  CHECK(a.transcript.size() == 60);
  CHECK(std::filesystem::exists(tmp.path() / "a" / "ground_truth.json"));

  Session direct = synth_erp_session(cfg);
  CHECK(a.data.samples == direct.data.samples);  // float quantization at generation

  SynthConfig wcfg;
  wcfg.mode = SynthMode::workload_conversation;
  write_synth_bundle(wcfg, tmp.path() / "w");
  Session w = load_session(tmp.path() / "w");
  CHECK(w.rounds.size() == 10);
}

TEST_CASE("bad configs are rejected") {
  SynthConfig cfg;
  cfg.mode = SynthMode::workload_calibration;
  cfg.theta_amp_high_uv = 0.5;  // below low
  expect_error(errc::invalid_config, [&] { synth_workload_session(cfg); });

  SynthConfig cfg2;
  cfg2.mode = SynthMode::workload_calibration;
  cfg2.alpha_amp_high_uv = 6.0;  // above low
  expect_error(errc::invalid_config, [&] { synth_workload_session(cfg2); });

  SynthConfig cfg3;
  cfg3.mode = SynthMode::erp_calibration;
  cfg3.channels = {"P3", "P4"};
  expect_error(errc::invalid_config, [&] { synth_erp_session(cfg3); });

  SynthConfig cfg4;
  cfg4.mode = SynthMode::workload_calibration;
  expect_error(errc::invalid_config, [&] { synth_erp_session(cfg4); });
}

}  // TEST_SUITE
