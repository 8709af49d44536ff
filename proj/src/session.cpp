#include "pbci/session.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pbci/error.hpp"

namespace pbci {

using nlohmann::json;
namespace fs = std::filesystem;

const char* errc_name(errc c) {
  switch (c) {
    case errc::missing_file: return "MissingFile";
    case errc::malformed_header: return "MalformedHeader";
    case errc::sample_count_mismatch: return "SampleCountMismatch";
    case errc::non_finite_sample: return "NonFiniteSample";
    case errc::io_failure: return "IoFailure";
    case errc::malformed_record: return "MalformedRecord";
    case errc::overlapping_rounds: return "OverlappingRounds";
    case errc::non_monotonic_timestamps: return "NonMonotonicTimestamps";
    case errc::upsample_requested: return "UpsampleRequested";
    case errc::ratio_not_rational: return "RatioNotRational";
    case errc::single_channel: return "SingleChannel";
    case errc::cutoff_above_nyquist: return "CutoffAboveNyquist";
    case errc::unstable_filter: return "UnstableFilter";
    case errc::window_out_of_bounds: return "WindowOutOfBounds";
    case errc::too_short: return "TooShort";
    case errc::invalid_fraction: return "InvalidFraction";
    case errc::missing_events: return "MissingEvents";
    case errc::single_class: return "SingleClass";
    case errc::degenerate_epoch: return "DegenerateEpoch";
    case errc::not_positive_definite: return "NotPositiveDefinite";
    case errc::too_many_filters: return "TooManyFilters";
    case errc::non_finite_feature: return "NonFiniteFeature";
    case errc::epoch_too_short: return "EpochTooShort";
    case errc::malformed_angle: return "MalformedAngle";
    case errc::too_few_observations: return "TooFewObservations";
    case errc::singular_covariance: return "SingularCovariance";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::malformed_model: return "MalformedModel";
    case errc::kind_mismatch: return "KindMismatch";
    case errc::empty_counts: return "EmptyCounts";
    case errc::class_too_small: return "ClassTooSmall";
    case errc::channel_mismatch: return "ChannelMismatch";
    case errc::session_too_short: return "SessionTooShort";
    case errc::empty_trace: return "EmptyTrace";
    case errc::empty_pairs: return "EmptyPairs";
    case errc::drift_out_of_range: return "DriftOutOfRange";
    case errc::empty_round: return "EmptyRound";
    case errc::too_few_rounds: return "TooFewRounds";
    case errc::zero_variance_x: return "ZeroVarianceX";
    case errc::invalid_config: return "InvalidConfig";
  }
  return "Error";
}

const char* speaker_name(Speaker s) {
  return s == Speaker::participant ? "participant" : "agent";
}

Speaker speaker_from_name(const std::string& name) {
  if (name == "participant") return Speaker::participant;
  if (name == "agent") return Speaker::agent;
  fail(errc::malformed_record, "unknown speaker '" + name + "'");
}

void validate_header(const SessionHeader& header) {
  if (header.version != 1)
    fail(errc::malformed_header, "unsupported version " + std::to_string(header.version));
  if (!(header.sample_rate_hz > 0.0) || !std::isfinite(header.sample_rate_hz))
    fail(errc::malformed_header, "sample_rate_hz must be > 0");
  if (header.channels.empty()) fail(errc::malformed_header, "no channels");
  std::set<std::string> seen;
  for (const auto& name : header.channels) {
    if (name.empty()) fail(errc::malformed_header, "empty channel name");
    if (!seen.insert(name).second)
      fail(errc::malformed_header, "duplicate channel name '" + name + "'");
  }
  if (header.units != "microvolts")
    fail(errc::malformed_header, "units must be 'microvolts', got '" + header.units + "'");
  if (header.data_file.empty()) fail(errc::malformed_header, "data_file missing");
}

namespace {

json parse_json_file(const fs::path& path, errc on_error) {
  std::ifstream in(path);
  if (!in) fail(errc::missing_file, "cannot open " + path.string());
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) fail(on_error, "invalid JSON in " + path.string());
  return j;
}

double require_number(const json& j, const char* key, errc code, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number())
    fail(code, where + ": missing or non-numeric '" + std::string(key) + "'");
  return j[key].get<double>();
}

std::string require_string(const json& j, const char* key, errc code, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string())
    fail(code, where + ": missing or non-string '" + std::string(key) + "'");
  return j[key].get<std::string>();
}

// Raw sample file: little-endian float32, frame-major, no header.
void write_f32(const fs::path& path, const Matrix& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot write " + path.string());
  const long frames = samples.cols();
  const int channels = static_cast<int>(samples.rows());
  std::vector<unsigned char> buf(static_cast<std::size_t>(channels) * 4);
  for (long f = 0; f < frames; ++f) {
    for (int c = 0; c < channels; ++c) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(samples(c, f)));
      buf[4 * c + 0] = static_cast<unsigned char>(bits & 0xff);
      buf[4 * c + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
      buf[4 * c + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
      buf[4 * c + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) fail(errc::io_failure, "short write to " + path.string());
}

Matrix read_f32(const fs::path& path, int channels) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(errc::missing_file, "cannot open " + path.string());
  const auto size = static_cast<long long>(in.tellg());
  in.seekg(0);
  const long long frame_bytes = 4LL * channels;
  if (size % frame_bytes != 0)
    fail(errc::sample_count_mismatch,
         path.string() + ": " + std::to_string(size) + " bytes not divisible by " +
             std::to_string(channels) + " channels x 4");
  const long frames = static_cast<long>(size / frame_bytes);
  std::vector<unsigned char> raw(static_cast<std::size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(raw.data()), size);
  if (!in && size > 0) fail(errc::io_failure, "short read from " + path.string());
  Matrix samples(channels, frames);
  for (long f = 0; f < frames; ++f) {
    const std::size_t base = static_cast<std::size_t>(f) * static_cast<std::size_t>(frame_bytes);
    for (int c = 0; c < channels; ++c) {
      const std::size_t o = base + 4 * static_cast<std::size_t>(c);
      std::uint32_t bits = static_cast<std::uint32_t>(raw[o]) |
                           (static_cast<std::uint32_t>(raw[o + 1]) << 8) |
                           (static_cast<std::uint32_t>(raw[o + 2]) << 16) |
                           (static_cast<std::uint32_t>(raw[o + 3]) << 24);
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v))
        fail(errc::non_finite_sample, path.string() + ": non-finite sample at frame " +
                                          std::to_string(f) + ", channel " + std::to_string(c));
      samples(c, f) = static_cast<double>(v);
    }
  }
  return samples;
}

// One JSON object per line; blank lines ignored. Reports 1-based line numbers.
template <typename Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) fail(errc::missing_file, "cannot open " + path.string());
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object())
      fail(errc::malformed_record, path.string() + ":" + std::to_string(line_no) + ": invalid JSON object");
    fn(j, line_no);
  }
}

std::string loc(const fs::path& path, long line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

}  // namespace

std::vector<EventRecord> load_events(const fs::path& path) {
  std::vector<EventRecord> events;
  for_each_jsonl(path, [&](const json& j, long line_no) {
    EventRecord ev;
    ev.t_s = require_number(j, "t_s", errc::malformed_record, loc(path, line_no));
    ev.label = require_string(j, "label", errc::malformed_record, loc(path, line_no));
    if (ev.t_s < 0.0 || !std::isfinite(ev.t_s))
      fail(errc::malformed_record, loc(path, line_no) + ": t_s must be finite and >= 0");
    if (j.contains("meta")) {
      if (!j["meta"].is_object())
        fail(errc::malformed_record, loc(path, line_no) + ": meta must be an object");
      for (const auto& [key, value] : j["meta"].items()) {
        if (!value.is_string())
          fail(errc::malformed_record, loc(path, line_no) + ": meta value for '" + key + "' must be a string");
        ev.meta[key] = value.get<std::string>();
      }
    }
    if (!events.empty() && ev.t_s < events.back().t_s)
      fail(errc::non_monotonic_timestamps,
           loc(path, line_no) + ": events must be sorted non-decreasing by t_s");
    events.push_back(std::move(ev));
  });
  return events;
}

std::vector<TranscriptWord> load_transcript(const fs::path& path) {
  std::vector<TranscriptWord> words;
  for_each_jsonl(path, [&](const json& j, long line_no) {
    TranscriptWord w;
    w.word = require_string(j, "word", errc::malformed_record, loc(path, line_no));
    w.onset_s = require_number(j, "onset_s", errc::malformed_record, loc(path, line_no));
    w.offset_s = require_number(j, "offset_s", errc::malformed_record, loc(path, line_no));
    const std::string speaker = require_string(j, "speaker", errc::malformed_record, loc(path, line_no));
    if (speaker != "participant" && speaker != "agent")
      fail(errc::malformed_record, loc(path, line_no) + ": unknown speaker '" + speaker + "'");
    w.speaker = speaker_from_name(speaker);
    if (!(w.offset_s > w.onset_s))
      fail(errc::malformed_record, loc(path, line_no) + ": offset_s must be > onset_s");
    words.push_back(std::move(w));
  });
  std::stable_sort(words.begin(), words.end(),
                   [](const TranscriptWord& a, const TranscriptWord& b) { return a.onset_s < b.onset_s; });
  return words;
}

std::vector<RoundSpec> load_rounds(const fs::path& path) {
  json j = parse_json_file(path, errc::malformed_record);
  if (!j.is_array()) fail(errc::malformed_record, path.string() + ": expected a JSON array");
  std::vector<RoundSpec> rounds;
  long index = 0;
  for (const auto& item : j) {
    ++index;
    const std::string where = path.string() + " round entry " + std::to_string(index);
    if (!item.is_object()) fail(errc::malformed_record, where + ": expected object");
    RoundSpec r;
    if (!item.contains("round") || !item["round"].is_number_integer())
      fail(errc::malformed_record, where + ": missing integer 'round'");
    r.round = item["round"].get<int>();
    r.start_s = require_number(item, "start_s", errc::malformed_record, where);
    r.end_s = require_number(item, "end_s", errc::malformed_record, where);
    if (!(r.end_s > r.start_s)) fail(errc::malformed_record, where + ": end_s must be > start_s");
    if (!rounds.empty() && r.round <= rounds.back().round)
      fail(errc::malformed_record, where + ": round indices must be strictly increasing");
    rounds.push_back(r);
  }
  std::vector<RoundSpec> by_start = rounds;
  std::sort(by_start.begin(), by_start.end(),
            [](const RoundSpec& a, const RoundSpec& b) { return a.start_s < b.start_s; });
  for (std::size_t i = 1; i < by_start.size(); ++i) {
    if (by_start[i].start_s < by_start[i - 1].end_s)
      fail(errc::overlapping_rounds, path.string() + ": rounds " + std::to_string(by_start[i - 1].round) +
                                         " and " + std::to_string(by_start[i].round) + " overlap");
  }
  return rounds;
}

SyncPairs load_sync(const fs::path& path) {
  json j = parse_json_file(path, errc::malformed_record);
  if (!j.is_object() || !j.contains("pairs") || !j["pairs"].is_array())
    fail(errc::malformed_record, path.string() + ": expected {\"pairs\": [[audio_t, eeg_t], ...]}");
  SyncPairs sync;
  long index = 0;
  for (const auto& item : j["pairs"]) {
    ++index;
    const std::string where = path.string() + " pair " + std::to_string(index);
    if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number())
      fail(errc::malformed_record, where + ": expected [audio_t, eeg_t]");
    const double audio_t = item[0].get<double>();
    const double eeg_t = item[1].get<double>();
    if (!sync.pairs.empty() && audio_t <= sync.pairs.back().first)
      fail(errc::non_monotonic_timestamps, where + ": audio times must be strictly increasing");
    sync.pairs.emplace_back(audio_t, eeg_t);
  }
  if (sync.pairs.empty()) fail(errc::malformed_record, path.string() + ": no sync pairs");
  return sync;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot write " + path.string());
  out << text;
  if (!out) fail(errc::io_failure, "short write to " + path.string());
}

}  // namespace

void save_events(const std::vector<EventRecord>& events, const fs::path& path) {
  std::vector<EventRecord> sorted = events;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.t_s < b.t_s; });
  std::string text;
  for (const auto& ev : sorted) {
    json j;
    j["t_s"] = ev.t_s;
    j["label"] = ev.label;
    if (!ev.meta.empty()) {
      json m = json::object();
      for (const auto& [key, value] : ev.meta) m[key] = value;
      j["meta"] = m;
    }
    text += j.dump();
    text += '\n';
  }
  write_text(path, text);
}

void save_transcript(const std::vector<TranscriptWord>& words, const fs::path& path) {
  std::string text;
  for (const auto& w : words) {
    json j;
    j["word"] = w.word;
    j["onset_s"] = w.onset_s;
    j["offset_s"] = w.offset_s;
    j["speaker"] = speaker_name(w.speaker);
    text += j.dump();
    text += '\n';
  }
  write_text(path, text);
}

void save_rounds(const std::vector<RoundSpec>& rounds, const fs::path& path) {
  json j = json::array();
  for (const auto& r : rounds) {
    json item;
    item["round"] = r.round;
    item["start_s"] = r.start_s;
    item["end_s"] = r.end_s;
    j.push_back(item);
  }
  write_text(path, j.dump(2) + "\n");
}

void save_sync(const SyncPairs& sync, const fs::path& path) {
  json pairs = json::array();
  for (const auto& [audio_t, eeg_t] : sync.pairs) pairs.push_back(json::array({audio_t, eeg_t}));
  json j;
  j["pairs"] = pairs;
  write_text(path, j.dump(2) + "\n");
}

Session load_session(const fs::path& dir_path) {
  const fs::path header_path = dir_path / "session.json";
  if (!fs::exists(header_path)) fail(errc::missing_file, header_path.string() + " not found");
  json j = parse_json_file(header_path, errc::malformed_header);
  if (!j.is_object()) fail(errc::malformed_header, header_path.string() + ": expected object");

  Session session;
  SessionHeader& header = session.data.header;
  if (!j.contains("version") || !j["version"].is_number_integer())
    fail(errc::malformed_header, header_path.string() + ": missing integer 'version'");
  header.version = j["version"].get<int>();
  header.sample_rate_hz = require_number(j, "sample_rate_hz", errc::malformed_header, header_path.string());
  if (!j.contains("channels") || !j["channels"].is_array())
    fail(errc::malformed_header, header_path.string() + ": missing 'channels' array");
  for (const auto& c : j["channels"]) {
    if (!c.is_string()) fail(errc::malformed_header, header_path.string() + ": channel names must be strings");
    header.channels.push_back(c.get<std::string>());
  }
  header.start_time_s = require_number(j, "start_time_s", errc::malformed_header, header_path.string());
  header.units = require_string(j, "units", errc::malformed_header, header_path.string());
  header.data_file = require_string(j, "data_file", errc::malformed_header, header_path.string());
  validate_header(header);

  session.data.samples = read_f32(dir_path / header.data_file, static_cast<int>(header.channels.size()));

  const fs::path events_path = dir_path / "events.jsonl";
  if (fs::exists(events_path)) session.events = load_events(events_path);
  const fs::path transcript_path = dir_path / "transcript.jsonl";
  if (fs::exists(transcript_path)) session.transcript = load_transcript(transcript_path);
  const fs::path rounds_path = dir_path / "rounds.json";
  if (fs::exists(rounds_path)) session.rounds = load_rounds(rounds_path);
  const fs::path sync_path = dir_path / "sync.json";
  if (fs::exists(sync_path)) session.sync = load_sync(sync_path);
  return session;
}

void save_session(const Session& session, const fs::path& dir_path) {
  validate_header(session.data.header);
  if (session.data.samples.rows() != static_cast<long>(session.data.header.channels.size()))
    fail(errc::malformed_header, "sample matrix rows do not match channel count");
  if (!session.data.samples.allFinite()) fail(errc::non_finite_sample, "samples contain non-finite values");

  std::error_code ec;
  fs::create_directories(dir_path, ec);
  if (ec) fail(errc::io_failure, "cannot create directory " + dir_path.string());

  const SessionHeader& header = session.data.header;
  json j;
  j["version"] = header.version;
  j["sample_rate_hz"] = header.sample_rate_hz;
  j["channels"] = header.channels;
  j["start_time_s"] = header.start_time_s;
  j["units"] = header.units;
  j["data_file"] = header.data_file;
  write_text(dir_path / "session.json", j.dump(2) + "\n");

  write_f32(dir_path / header.data_file, session.data.samples);

  if (!session.events.empty()) save_events(session.events, dir_path / "events.jsonl");
  if (!session.transcript.empty()) save_transcript(session.transcript, dir_path / "transcript.jsonl");
  if (!session.rounds.empty()) save_rounds(session.rounds, dir_path / "rounds.json");
  if (!session.sync.pairs.empty()) save_sync(session.sync, dir_path / "sync.json");
}

}  // namespace pbci
