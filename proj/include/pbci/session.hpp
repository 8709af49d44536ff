#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pbci {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SessionHeader {
  int version = 1;
  double sample_rate_hz = 0.0;
  std::vector<std::string> channels;
  double start_time_s = 0.0;
  std::string units = "microvolts";
  std::string data_file = "eeg.f32";
};

// Continuous multichannel recording, channels x frames, in microvolts.
// Frame i sits at time start_time_s + i / sample_rate_hz.
struct SessionData {
  SessionHeader header;
  Matrix samples;

  int n_channels() const { return static_cast<int>(samples.rows()); }
  long n_frames() const { return static_cast<long>(samples.cols()); }
  double duration_s() const {
    return header.sample_rate_hz > 0 ? n_frames() / header.sample_rate_hz : 0.0;
  }
};

struct EventRecord {
  double t_s = 0.0;  // recording clock
  std::string label;
  std::map<std::string, std::string> meta;
};

enum class Speaker { participant, agent };

const char* speaker_name(Speaker s);
Speaker speaker_from_name(const std::string& name);

struct TranscriptWord {
  std::string word;
  double onset_s = 0.0;   // audio clock
  double offset_s = 0.0;  // audio clock
  Speaker speaker = Speaker::participant;
};

struct RoundSpec {
  int round = 0;
  double start_s = 0.0;  // recording clock
  double end_s = 0.0;
};

struct SyncPairs {
  // (audio_t_s, eeg_t_s), audio strictly increasing
  std::vector<std::pair<double, double>> pairs;
};

// Continuous classifier output sampled at rate_hz; tick k sits at
// t0_s + k / rate_hz, decision boundary at zero.
struct PredictionTrace {
  double rate_hz = 50.0;
  double t0_s = 0.0;
  std::vector<double> values;

  double time_at(std::size_t k) const { return t0_s + static_cast<double>(k) / rate_hz; }
};

// On-disk bundle: session.json + eeg.f32, plus optional sidecars
// (events.jsonl, transcript.jsonl, rounds.json, sync.json).
struct Session {
  SessionData data;
  std::vector<EventRecord> events;
  std::vector<TranscriptWord> transcript;
  std::vector<RoundSpec> rounds;
  SyncPairs sync;
};

void validate_header(const SessionHeader& header);

Session load_session(const std::filesystem::path& dir_path);
void save_session(const Session& session, const std::filesystem::path& dir_path);

std::vector<EventRecord> load_events(const std::filesystem::path& path);
std::vector<TranscriptWord> load_transcript(const std::filesystem::path& path);
std::vector<RoundSpec> load_rounds(const std::filesystem::path& path);
SyncPairs load_sync(const std::filesystem::path& path);

void save_events(const std::vector<EventRecord>& events, const std::filesystem::path& path);
void save_transcript(const std::vector<TranscriptWord>& words, const std::filesystem::path& path);
void save_rounds(const std::vector<RoundSpec>& rounds, const std::filesystem::path& path);
void save_sync(const SyncPairs& sync, const std::filesystem::path& path);

}  // namespace pbci
