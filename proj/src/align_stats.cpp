#include "pbci/align_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "pbci/dist.hpp"
#include "pbci/error.hpp"

namespace pbci {

using nlohmann::json;

namespace {

constexpr double kPostWindowS = 0.8;
constexpr double kEdgeGrace = 1e-9;

// Tick indices whose times fall in [t0_s, t1_s), clipped to the trace.
std::pair<long, long> tick_range(const PredictionTrace& trace, double t0_s, double t1_s) {
  const double rate = trace.rate_hz;
  long first = static_cast<long>(std::ceil((t0_s - trace.t0_s) * rate - kEdgeGrace));
  long end = static_cast<long>(std::ceil((t1_s - trace.t0_s) * rate - kEdgeGrace));
  first = std::max(first, 0L);
  end = std::min(end, static_cast<long>(trace.values.size()));
  return {first, std::max(first, end)};
}

double mean_of(const std::vector<double>& v, long first, long end) {
  double sum = 0.0;
  for (long i = first; i < end; ++i) sum += v[static_cast<std::size_t>(i)];
  return sum / static_cast<double>(end - first);
}

void append_number(std::string& line, double v) {
  if (std::isnan(v)) return;  // absent statistic, leave the field empty
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_row(const std::string& line, const std::string& where) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) fail(errc::malformed_record, where + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

double parse_field(const std::string& text, const std::string& where) {
  if (text.empty()) return std::numeric_limits<double>::quiet_NaN();
  const char* s = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0') fail(errc::malformed_record, where + ": '" + text + "' is not a number");
  return v;
}

}  // namespace

ClockMap fit_clock_map(const SyncPairs& sync) {
  const auto& pairs = sync.pairs;
  if (pairs.empty()) fail(errc::empty_pairs, "clock fit needs at least one sync pair");

  ClockMap map;
  if (pairs.size() == 1) {
    map.drift = 1.0;
    map.offset_s = pairs[0].second - pairs[0].first;
  } else {
    const double n = static_cast<double>(pairs.size());
    double ma = 0.0, me = 0.0;
    for (const auto& [a, e] : pairs) {
      ma += a;
      me += e;
    }
    ma /= n;
    me /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [a, e] : pairs) {
      sxx += (a - ma) * (a - ma);
      sxy += (a - ma) * (e - me);
    }
    map.drift = sxy / sxx;
    map.offset_s = me - map.drift * ma;
    double rss = 0.0;
    for (const auto& [a, e] : pairs) {
      const double r = e - map.to_eeg(a);
      rss += r * r;
    }
    map.rms_residual_s = std::sqrt(rss / n);
  }
  if (!(map.drift > 0.9 && map.drift < 1.1))
    fail(errc::drift_out_of_range,
         "fitted drift " + std::to_string(map.drift) + " outside (0.9, 1.1)");
  return map;
}

std::vector<WordAlignment> align_words(const PredictionTrace& trace,
                                       const std::vector<TranscriptWord>& transcript,
                                       const ClockMap& map) {
  if (trace.values.empty()) fail(errc::empty_trace, "cannot align against an empty trace");
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<WordAlignment> out;
  out.reserve(transcript.size());
  for (const auto& w : transcript) {
    WordAlignment a;
    a.word = w.word;
    a.speaker = w.speaker;
    a.onset_eeg_s = map.to_eeg(w.onset_s);
    a.offset_eeg_s = map.to_eeg(w.offset_s);

    const auto [first, end] = tick_range(trace, a.onset_eeg_s, a.offset_eeg_s);
    a.absent = first == end;
    if (a.absent) {
      a.mean_value = a.max_value = a.min_value = a.post_window_mean = nan;
    } else {
      a.mean_value = mean_of(trace.values, first, end);
      a.max_value = *std::max_element(trace.values.begin() + first, trace.values.begin() + end);
      a.min_value = *std::min_element(trace.values.begin() + first, trace.values.begin() + end);
      const auto [pf, pe] = tick_range(trace, a.onset_eeg_s, a.onset_eeg_s + kPostWindowS);
      a.post_window_mean = pf == pe ? nan : mean_of(trace.values, pf, pe);
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<RoundSummary> round_means(const PredictionTrace& trace,
                                      const std::vector<RoundSpec>& rounds, double alpha) {
  if (!(alpha > 0.0) || !(alpha < 0.5)) fail(errc::invalid_config, "alpha must lie in (0, 0.5)");
  std::vector<RoundSummary> out;
  out.reserve(rounds.size());
  for (const auto& r : rounds) {
    const auto [first, end] = tick_range(trace, r.start_s, r.end_s);
    const long n = end - first;
    if (n < 1)
      fail(errc::empty_round, "round " + std::to_string(r.round) + " contains no trace ticks");

    RoundSummary s;
    s.round = r.round;
    s.n_ticks = n;
    s.mean = mean_of(trace.values, first, end);

    double ss = 0.0, lag = 0.0;
    for (long i = first; i < end; ++i) {
      const double d = trace.values[static_cast<std::size_t>(i)] - s.mean;
      ss += d * d;
      if (i + 1 < end) lag += d * (trace.values[static_cast<std::size_t>(i + 1)] - s.mean);
    }
    s.rho_hat = ss > 0.0 ? std::clamp(lag / ss, 0.0, 0.999) : 0.0;
    s.n_eff = static_cast<double>(n) * (1.0 - s.rho_hat) / (1.0 + s.rho_hat);

    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    double half = 0.0;
    if (sd > 0.0) {
      const double df = std::max(s.n_eff - 1.0, 0.01);
      half = student_t_quantile(1.0 - alpha / 2.0, df) * sd / std::sqrt(s.n_eff);
    }
    s.ci_lo = s.mean - half;
    s.ci_hi = s.mean + half;
    out.push_back(s);
  }
  return out;
}

TrendReport ols_trend(const std::vector<std::pair<double, double>>& points, double alpha) {
  const long n = static_cast<long>(points.size());
  if (n < 3) fail(errc::too_few_rounds, "trend needs at least 3 rounds");

  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0, tss = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    tss += (y - my) * (y - my);
  }
  if (!(sxx > 0.0)) fail(errc::zero_variance_x, "round indices have no variance");

  TrendReport r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;

  double rss = 0.0;
  for (const auto& [x, y] : points) {
    const double res = y - r.intercept - r.slope * x;
    rss += res * res;
  }

  const double df = static_cast<double>(n - 2);
  if (rss > 0.0) {
    const double se = std::sqrt(rss / df / sxx);
    const double tq = student_t_quantile(1.0 - alpha / 2.0, df);
    r.ci_lo = r.slope - tq * se;
    r.ci_hi = r.slope + tq * se;
    r.p_value = 2.0 * student_t_cdf(-std::abs(r.slope / se), df);
  } else {
    r.ci_lo = r.ci_hi = r.slope;
    r.p_value = r.slope == 0.0 ? 1.0 : 0.0;
  }
  r.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  r.cumulative_change = r.slope * static_cast<double>(n - 1);
  r.significant = r.ci_lo > 0.0 || r.ci_hi < 0.0;
  return r;
}

void words_to_csv(const std::vector<WordAlignment>& words, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot write " + path.string());
  out << "word,speaker,onset_eeg_s,offset_eeg_s,mean,max,min,post_mean,absent\n";
  for (const auto& w : words) {
    std::string line = csv_quote(w.word);
    line += ',';
    line += speaker_name(w.speaker);
    char buf[64];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", w.onset_eeg_s, w.offset_eeg_s);
    line += buf;
    append_number(line, w.mean_value);
    line += ',';
    append_number(line, w.max_value);
    line += ',';
    append_number(line, w.min_value);
    line += ',';
    append_number(line, w.post_window_mean);
    line += w.absent ? ",1\n" : ",0\n";
    out << line;
  }
  if (!out) fail(errc::io_failure, "short write to " + path.string());
}

std::vector<WordAlignment> words_from_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::missing_file, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line != "word,speaker,onset_eeg_s,offset_eeg_s,mean,max,min,post_mean,absent")
    fail(errc::malformed_record, path.string() + ": unexpected words header");

  std::vector<WordAlignment> out;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split_csv_row(line, where);
    if (fields.size() != 9) fail(errc::malformed_record, where + ": expected 9 fields");

    WordAlignment w;
    w.word = fields[0];
    w.speaker = speaker_from_name(fields[1]);
    w.onset_eeg_s = parse_field(fields[2], where);
    w.offset_eeg_s = parse_field(fields[3], where);
    w.mean_value = parse_field(fields[4], where);
    w.max_value = parse_field(fields[5], where);
    w.min_value = parse_field(fields[6], where);
    w.post_window_mean = parse_field(fields[7], where);
    if (fields[8] != "0" && fields[8] != "1")
      fail(errc::malformed_record, where + ": absent flag must be 0 or 1");
    w.absent = fields[8] == "1";
    if (std::isnan(w.onset_eeg_s) || std::isnan(w.offset_eeg_s))
      fail(errc::malformed_record, where + ": onset/offset must be present");
    out.push_back(std::move(w));
  }
  return out;
}

void save_analysis(const std::vector<RoundSummary>& rounds, const TrendReport& trend,
                   const std::filesystem::path& path) {
  json doc;
  doc["rounds"] = json::array();
  for (const auto& r : rounds)
    doc["rounds"].push_back({{"round", r.round},
                             {"mean", r.mean},
                             {"ci_lo", r.ci_lo},
                             {"ci_hi", r.ci_hi},
                             {"rho_hat", r.rho_hat},
                             {"n_eff", r.n_eff}});
  doc["trend"] = {{"slope", trend.slope},
                  {"ci", {trend.ci_lo, trend.ci_hi}},
                  {"p", trend.p_value},
                  {"r2", trend.r_squared},
                  {"cumulative", trend.cumulative_change},
                  {"significant", trend.significant}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
  if (!out) fail(errc::io_failure, "short write to " + path.string());
}

}  // namespace pbci
