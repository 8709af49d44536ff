#include "pbci/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <set>

#include "json.hpp"
#include "pbci/dsp.hpp"
#include "pbci/error.hpp"
#include "pbci/rng.hpp"

namespace pbci {

using nlohmann::json;

namespace {

constexpr double kTau = 6.283185307179586;

const char* kModeNames[4] = {"workload_calibration", "workload_conversation", "erp_calibration",
                             "erp_conversation"};

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTau : -kTau) / static_cast<double>(len);
    const std::complex<double> w_len(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const auto u = a[i + j];
        const auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= w_len;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

struct ChannelRoles {
  std::vector<long> frontal;    // theta carriers
  std::vector<long> parietal;   // alpha carriers
  std::vector<long> erp_sites;  // deflection carriers
};

ChannelRoles find_roles(const std::vector<std::string>& channels) {
  const std::set<std::string> frontal_names = {"Fz", "F3", "F4"};
  const std::set<std::string> parietal_names = {"Pz", "P3", "P4", "Oz"};
  const std::set<std::string> erp_names = {"Fz", "Cz"};
  ChannelRoles roles;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (frontal_names.count(channels[c])) roles.frontal.push_back(static_cast<long>(c));
    if (parietal_names.count(channels[c])) roles.parietal.push_back(static_cast<long>(c));
    if (erp_names.count(channels[c])) roles.erp_sites.push_back(static_cast<long>(c));
  }
  return roles;
}

void check_config(const SynthConfig& cfg) {
  if (!(cfg.sample_rate_hz > 0.0)) fail(errc::invalid_config, "sample_rate_hz must be > 0");
  if (cfg.noise_sigma_uv < 0.0) fail(errc::invalid_config, "noise_sigma_uv must be >= 0");
  if (!(cfg.theta_amp_high_uv > cfg.theta_amp_low_uv))
    fail(errc::invalid_config, "theta amplitude must increase with workload");
  if (!(cfg.alpha_amp_high_uv < cfg.alpha_amp_low_uv))
    fail(errc::invalid_config, "alpha amplitude must decrease with workload");
  if (!(cfg.erp_width_s > 0.0)) fail(errc::invalid_config, "erp_width_s must be > 0");
  if (cfg.channels.empty()) fail(errc::invalid_config, "channel list is empty");
  std::set<std::string> uniq(cfg.channels.begin(), cfg.channels.end());
  if (uniq.size() != cfg.channels.size()) fail(errc::invalid_config, "duplicate channel names");
  if (cfg.n_trials < 0) fail(errc::invalid_config, "n_trials must be >= 0");
  if (cfg.n_rounds < 2) fail(errc::invalid_config, "n_rounds must be >= 2");
  if (cfg.words_per_round < 1) fail(errc::invalid_config, "words_per_round must be >= 1");
  if (cfg.sync_drift <= 0.0) fail(errc::invalid_config, "sync_drift must be > 0");
}

SessionData empty_recording(const SynthConfig& cfg, double duration_s) {
  SessionData data;
  data.header.sample_rate_hz = cfg.sample_rate_hz;
  data.header.channels = cfg.channels;
  data.samples = Matrix::Zero(static_cast<long>(cfg.channels.size()),
                              static_cast<long>(std::lround(duration_s * cfg.sample_rate_hz)));
  return data;
}

void add_noise(SessionData& data, const SynthConfig& cfg) {
  if (cfg.noise_sigma_uv == 0.0) return;
  for (long c = 0; c < data.n_channels(); ++c) {
    const Vector noise =
        pink_noise(data.n_frames(), cfg.noise_sigma_uv, mix_seed(cfg.seed, static_cast<std::uint64_t>(c), 0x01));
    data.samples.row(c) += noise.transpose();
  }
}

// Sine with piecewise-constant amplitude; level_at gives workload in [0,1].
template <typename LevelFn>
void add_oscillation(SessionData& data, const std::vector<long>& sites, double freq_hz,
                     double amp_low, double amp_high, LevelFn&& level_at) {
  const double rate = data.header.sample_rate_hz;
  for (long i = 0; i < data.n_frames(); ++i) {
    const double t = static_cast<double>(i) / rate;
    const double u = level_at(t);
    if (u < 0.0) continue;
    const double amp = amp_low + (amp_high - amp_low) * u;
    const double v = amp * std::sin(kTau * freq_hz * t);
    for (long c : sites) data.samples(c, i) += v;
  }
}

void add_deflection(SessionData& data, const std::vector<long>& sites, double onset_s, double scale,
                    const SynthConfig& cfg) {
  if (scale == 0.0) return;
  const double rate = data.header.sample_rate_hz;
  const double mu = onset_s + cfg.erp_latency_s;
  const double half_span = 6.0 * cfg.erp_width_s;
  const long first = std::max(0L, frame_index(mu - half_span, rate));
  const long last = std::min(data.n_frames() - 1, frame_index(mu + half_span, rate));
  for (long i = first; i <= last; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double d = (t - mu) / cfg.erp_width_s;
    const double v = scale * cfg.erp_peak_uv * std::exp(-0.5 * d * d);
    for (long c : sites) data.samples(c, i) += v;
  }
}

void quantize_to_float(SessionData& data) {
  data.samples = data.samples.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

std::string word_text(int index) {
  static const char* kWords[] = {"alpha",  "bravo",   "charlie", "delta",  "echo",   "foxtrot",
                                 "golf",   "hotel",   "india",   "juliett", "kilo",   "lima",
                                 "mike",   "november", "oscar",   "papa",   "quebec", "romeo",
                                 "sierra", "tango",   "uniform", "victor", "whiskey", "xray",
                                 "yankee", "zulu"};
  return std::string(kWords[index % 26]) + "_" + std::to_string(index);
}

}  // namespace

const char* synth_mode_name(SynthMode m) { return kModeNames[static_cast<int>(m)]; }

SynthMode synth_mode_from_name(const std::string& name) {
  for (int i = 0; i < 4; ++i)
    if (name == kModeNames[i]) return static_cast<SynthMode>(i);
  fail(errc::invalid_config, "unknown synth mode '" + name + "'");
}

Vector pink_noise(long n_frames, double sigma_uv, std::uint64_t seed) {
  if (n_frames < 256) fail(errc::too_short, "pink noise needs >= 256 frames");
  if (sigma_uv == 0.0) return Vector::Zero(n_frames);

  std::size_t block = 1;
  while (block < static_cast<std::size_t>(n_frames)) block <<= 1;

  Rng rng(seed);
  std::vector<std::complex<double>> spectrum(block, {0.0, 0.0});
  for (std::size_t k = 1; k < block / 2; ++k) {
    const double amp = 1.0 / std::sqrt(static_cast<double>(k));
    const double phase = kTau * rng.uniform01();
    spectrum[k] = std::polar(amp, phase);
    spectrum[block - k] = std::conj(spectrum[k]);
  }
  spectrum[block / 2] = {(rng.below(2) ? 1.0 : -1.0) / std::sqrt(static_cast<double>(block / 2)), 0.0};

  fft_inplace(spectrum, true);
  Vector x(n_frames);
  for (long i = 0; i < n_frames; ++i) x(i) = spectrum[static_cast<std::size_t>(i)].real();
  x.array() -= x.mean();
  const double sd = std::sqrt(x.squaredNorm() / static_cast<double>(n_frames));
  if (sd > 0.0) x *= sigma_uv / sd;
  return x;
}

Session synth_workload_session(const SynthConfig& cfg) {
  check_config(cfg);
  const ChannelRoles roles = find_roles(cfg.channels);
  if (roles.frontal.empty() || roles.parietal.empty())
    fail(errc::invalid_config, "workload synthesis needs frontal and parietal channels");

  Session session;
  if (cfg.mode == SynthMode::workload_calibration) {
    const int per_condition = cfg.n_trials > 0 ? cfg.n_trials : 20;
    const int trials = 2 * per_condition;
    const double trial_len = 10.0;
    session.data = empty_recording(cfg, trials * trial_len);
    auto level_at = [&](double t) {
      const int trial = static_cast<int>(t / trial_len);
      if (trial >= trials) return -1.0;
      return trial % 2 == 0 ? 1.0 : 0.0;  // alternating, high first
    };
    add_oscillation(session.data, roles.frontal, cfg.theta_hz, cfg.theta_amp_low_uv,
                    cfg.theta_amp_high_uv, level_at);
    add_oscillation(session.data, roles.parietal, cfg.alpha_hz, cfg.alpha_amp_low_uv,
                    cfg.alpha_amp_high_uv, level_at);
    for (int j = 0; j < trials; ++j) {
      EventRecord ev;
      ev.t_s = j * trial_len;
      ev.label = "trial_start";
      ev.meta["condition"] = j % 2 == 0 ? "high" : "low";
      ev.meta["duration_s"] = "10";
      session.events.push_back(ev);
    }
  } else if (cfg.mode == SynthMode::workload_conversation) {
    const double round_len = 30.0;
    session.data = empty_recording(cfg, cfg.n_rounds * round_len);
    auto level_at = [&](double t) {
      const int r = static_cast<int>(t / round_len);
      if (r >= cfg.n_rounds) return -1.0;
      return static_cast<double>(r) / static_cast<double>(cfg.n_rounds - 1);
    };
    add_oscillation(session.data, roles.frontal, cfg.theta_hz, cfg.theta_amp_low_uv,
                    cfg.theta_amp_high_uv, level_at);
    add_oscillation(session.data, roles.parietal, cfg.alpha_hz, cfg.alpha_amp_low_uv,
                    cfg.alpha_amp_high_uv, level_at);
    for (int r = 0; r < cfg.n_rounds; ++r) {
      session.rounds.push_back({r + 1, r * round_len, (r + 1) * round_len});
      EventRecord ev;
      ev.t_s = r * round_len;
      ev.label = "round_start";
      ev.meta["round"] = std::to_string(r + 1);
      session.events.push_back(ev);
    }
  } else {
    fail(errc::invalid_config, "not a workload mode");
  }

  add_noise(session.data, cfg);
  quantize_to_float(session.data);
  return session;
}

Session synth_erp_session(const SynthConfig& cfg) {
  check_config(cfg);
  const ChannelRoles roles = find_roles(cfg.channels);
  if (roles.erp_sites.empty()) fail(errc::invalid_config, "erp synthesis needs Fz or Cz");

  Session session;
  if (cfg.mode == SynthMode::erp_calibration) {
    const int trials = cfg.n_trials > 0 ? cfg.n_trials : 180;
    const double lead_s = 2.0, gap_s = 3.0, tail_s = 2.0;
    session.data = empty_recording(cfg, lead_s + gap_s * trials + tail_s);

    std::vector<int> labels;  // 1 = correct (30 deg), 0 = incorrect (120 deg)
    for (int i = 0; i < trials; ++i) labels.push_back(i < (trials + 1) / 2 ? 1 : 0);
    Rng rng(mix_seed(cfg.seed, 0, 0x02));
    rng.shuffle(labels);

    for (int i = 0; i < trials; ++i) {
      const double onset = lead_s + gap_s * i;
      EventRecord ev;
      ev.t_s = onset;
      ev.label = "jump";
      ev.meta["angle_deg"] = labels[static_cast<std::size_t>(i)] == 1 ? "30" : "120";
      session.events.push_back(ev);
      add_deflection(session.data, roles.erp_sites, onset,
                     labels[static_cast<std::size_t>(i)] == 1 ? 0.0 : 1.0, cfg);
    }
  } else if (cfg.mode == SynthMode::erp_conversation) {
    const int trials = cfg.n_rounds * cfg.words_per_round;
    const double lead_audio_s = 4.0, gap_s = 6.0, word_len_s = 0.45;
    const double last_eeg = (lead_audio_s + gap_s * (trials - 1)) * cfg.sync_drift + cfg.sync_offset_s;
    session.data = empty_recording(cfg, last_eeg + gap_s);

    std::vector<int> expectedness;  // 0 = low, 1 = medium, 2 = high
    for (int i = 0; i < trials; ++i) expectedness.push_back(i % 3);
    Rng rng(mix_seed(cfg.seed, 0, 0x02));
    rng.shuffle(expectedness);
    static const char* kLevels[3] = {"low", "medium", "high"};
    static const double kScales[3] = {1.0, 0.5, 0.0};

    for (int i = 0; i < trials; ++i) {
      const double audio_onset = lead_audio_s + gap_s * i;
      const double eeg_onset = audio_onset * cfg.sync_drift + cfg.sync_offset_s;
      const int e = expectedness[static_cast<std::size_t>(i)];
      EventRecord ev;
      ev.t_s = eeg_onset;
      ev.label = "word_onset";
      ev.meta["expectedness"] = kLevels[e];
      ev.meta["word"] = word_text(i);
      session.events.push_back(ev);
      session.transcript.push_back({word_text(i), audio_onset, audio_onset + word_len_s, Speaker::agent});
      add_deflection(session.data, roles.erp_sites, eeg_onset, kScales[e], cfg);
    }
    const double audio_span = lead_audio_s + gap_s * trials;
    for (int p = 0; p <= 3; ++p) {
      const double at = audio_span * static_cast<double>(p) / 3.0;
      session.sync.pairs.emplace_back(at, at * cfg.sync_drift + cfg.sync_offset_s);
    }
  } else {
    fail(errc::invalid_config, "not an erp mode");
  }

  add_noise(session.data, cfg);
  quantize_to_float(session.data);
  return session;
}

void write_synth_bundle(const SynthConfig& cfg, const std::filesystem::path& dir) {
  const bool workload = cfg.mode == SynthMode::workload_calibration ||
                        cfg.mode == SynthMode::workload_conversation;
  const Session session = workload ? synth_workload_session(cfg) : synth_erp_session(cfg);
  save_session(session, dir);

  json gt;
  gt["mode"] = synth_mode_name(cfg.mode);
  gt["seed"] = cfg.seed;
  gt["noise_sigma_uv"] = cfg.noise_sigma_uv;
  switch (cfg.mode) {
    case SynthMode::workload_calibration: {
      json events = json::array();
      for (const auto& ev : session.events) {
        const bool high = ev.meta.at("condition") == "high";
        events.push_back({{"t_s", ev.t_s}, {"condition", ev.meta.at("condition")}, {"label", high ? 1 : 0}});
      }
      gt["events"] = events;
      break;
    }
    case SynthMode::workload_conversation: {
      json rounds = json::array();
      for (const auto& r : session.rounds) {
        const double level = static_cast<double>(r.round - 1) / static_cast<double>(cfg.n_rounds - 1);
        rounds.push_back({{"round", r.round}, {"level", level}});
      }
      gt["rounds"] = rounds;
      break;
    }
    case SynthMode::erp_calibration: {
      json events = json::array();
      for (const auto& ev : session.events) {
        const bool correct = ev.meta.at("angle_deg") == "30";
        events.push_back(
            {{"t_s", ev.t_s}, {"angle_deg", ev.meta.at("angle_deg")}, {"label", correct ? 1 : 0}});
      }
      gt["events"] = events;
      break;
    }
    case SynthMode::erp_conversation: {
      json events = json::array();
      for (std::size_t i = 0; i < session.events.size(); ++i) {
        const auto& ev = session.events[i];
        const std::string& level = ev.meta.at("expectedness");
        json entry = {{"t_s", ev.t_s},
                      {"expectedness", level},
                      {"word", ev.meta.at("word")},
                      {"onset_audio_s", session.transcript[i].onset_s}};
        if (level == "high")
          entry["label"] = 1;
        else if (level == "low")
          entry["label"] = 0;
        else
          entry["label"] = nullptr;
        events.push_back(entry);
      }
      gt["events"] = events;
      gt["sync"] = {{"offset_s", cfg.sync_offset_s}, {"drift", cfg.sync_drift}};
      break;
    }
  }

  std::ofstream out(dir / "ground_truth.json", std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot write ground_truth.json");
  out << gt.dump(2) << "\n";
  if (!out) fail(errc::io_failure, "short write to ground_truth.json");
}

}  // namespace pbci
