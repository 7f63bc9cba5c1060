#include "avatar/curation.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "avatar/error.h"
#include "avatar/parallel.h"
#include "avatar/wav.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace avatar {

EnergyVad::EnergyVad(double rms_threshold, double min_silence_s, double frame_s)
    : rms_threshold_(rms_threshold),
      min_silence_s_(min_silence_s),
      frame_s_(frame_s) {
  if (rms_threshold < 0) throw ConfigError("VAD rms threshold must be >= 0");
  if (min_silence_s <= 0) throw ConfigError("VAD min silence must be > 0");
  if (frame_s <= 0) throw ConfigError("VAD frame length must be > 0");
}

std::vector<TimeSpan> EnergyVad::segment(const Waveform& w) const {
  const double rate = static_cast<double>(w.sample_rate_hz);
  const long frame_len =
      std::max<long>(1, std::llround(frame_s_ * rate));
  const long min_silence_frames = std::max<long>(
      1, static_cast<long>(std::ceil(min_silence_s_ / frame_s_ - 1e-9)));
  const long n = static_cast<long>(w.samples.size());

  std::vector<TimeSpan> spans;
  bool open = false;
  double seg_start = 0.0, last_voiced_end = 0.0;
  long silence_run = 0;

  for (long f0 = 0; f0 < n; f0 += frame_len) {
    const long f1 = std::min(n, f0 + frame_len);
    double energy = 0.0;
    for (long s = f0; s < f1; ++s) energy += w.samples[s] * w.samples[s];
    const double rms = std::sqrt(energy / static_cast<double>(f1 - f0));
    if (rms >= rms_threshold_) {
      if (!open) {
        open = true;
        seg_start = f0 / rate;
      }
      last_voiced_end = f1 / rate;
      silence_run = 0;
    } else if (open) {
      if (++silence_run >= min_silence_frames) {
        spans.push_back({seg_start, last_voiced_end});
        open = false;
        silence_run = 0;
      }
    }
  }
  if (open) spans.push_back({seg_start, last_voiced_end});
  return spans;
}

KeywordScorer::KeywordScorer(
    std::map<std::string, std::set<std::string>> keywords_by_video)
    : keywords_(std::move(keywords_by_video)) {}

double KeywordScorer::score(const std::string& video_id,
                            const Transcript& sentence) const {
  std::set<std::string> unique(sentence.words.begin(), sentence.words.end());
  if (unique.empty()) return 0.0;
  auto it = keywords_.find(video_id);
  if (it == keywords_.end()) return 0.0;
  long hits = 0;
  for (const auto& w : unique)
    if (it->second.count(w)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(unique.size());
}

const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::none: return "none";
    case RejectReason::empty_user: return "empty_user";
    case RejectReason::video_wer_gt_100: return "video_wer_gt_100";
    case RejectReason::seg_wer_gt_50: return "seg_wer_gt_50";
    case RejectReason::nonstop_wer_lt_20: return "nonstop_wer_lt_20";
    case RejectReason::too_short: return "too_short";
  }
  throw ContractError("unhandled rejection reason");
}

RejectReason parse_reject_reason(const std::string& name) {
  for (auto r : {RejectReason::none, RejectReason::empty_user,
                 RejectReason::video_wer_gt_100, RejectReason::seg_wer_gt_50,
                 RejectReason::nonstop_wer_lt_20, RejectReason::too_short})
    if (name == reject_reason_name(r)) return r;
  throw InputError("unknown rejection reason '" + name + "'");
}

double transcript_wer_pct(const Transcript& ref, const Transcript& hyp) {
  AlignmentResult r = align_words(ref.words, hyp.words);
  const long errors = r.substitutions + r.deletions + r.insertions;
  if (ref.words.empty())
    return errors == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return 100.0 * static_cast<double>(errors) /
         static_cast<double>(ref.words.size());
}

std::optional<double> nonstop_wer_pct(const Transcript& ref,
                                      const Transcript& hyp,
                                      const Stoplist& stoplist) {
  long content_refs = 0;
  for (const auto& w : ref.words)
    if (is_content_word(w, stoplist)) ++content_refs;
  if (content_refs == 0) return std::nullopt;

  AlignmentResult r = align_words(ref.words, hyp.words);
  long errors = 0;
  for (const auto& [ri, hi] : r.aligned_pairs) {
    if (ri < 0) continue;  // insertions sit on no reference position
    if (!is_content_word(ref.words[ri], stoplist)) continue;
    if (hi < 0 || ref.words[ri] != hyp.words[hi]) ++errors;
  }
  return 100.0 * static_cast<double>(errors) /
         static_cast<double>(content_refs);
}

GateResult video_gate(const Transcript& user, const Transcript& asr,
                      double threshold_pct) {
  GateResult g;
  if (user.words.empty()) {
    g.verdict = Verdict::rejected;
    g.reason = RejectReason::empty_user;
    return g;
  }
  g.wer_pct = transcript_wer_pct(user, asr);
  if (g.wer_pct > threshold_pct) {
    g.verdict = Verdict::rejected;
    g.reason = RejectReason::video_wer_gt_100;
  }
  return g;
}

namespace {

void fill_stats(SegmentRecord& rec, const Stoplist& stoplist) {
  rec.wer_pct = transcript_wer_pct(rec.user, rec.asr);
  rec.wer_nonstop_pct = nonstop_wer_pct(rec.user, rec.asr, stoplist);
  rec.n_words = static_cast<long>(rec.user.words.size());
}

}  // namespace

SegmentRecord segment_filter(SegmentRecord rec, const Stoplist& stoplist,
                             const CurationThresholds& thresholds,
                             std::ostream* log) {
  fill_stats(rec, stoplist);
  rec.verdict = Verdict::kept;
  rec.reason = RejectReason::none;

  if (rec.wer_pct > thresholds.seg_wer_pct) {
    rec.verdict = Verdict::rejected;
    rec.reason = RejectReason::seg_wer_gt_50;
    return rec;
  }
  if (rec.wer_nonstop_pct.has_value()) {
    if (*rec.wer_nonstop_pct < thresholds.nonstop_wer_pct) {
      rec.verdict = Verdict::rejected;
      rec.reason = RejectReason::nonstop_wer_lt_20;
      return rec;
    }
  } else {
    std::ostream& out = log ? *log : std::cerr;
    char span[64];
    std::snprintf(span, sizeof(span), "[%.2f, %.2f)", rec.start_s, rec.end_s);
    out << "segment " << rec.video_id << " " << span
        << ": no content words; too-clean check skipped\n";
  }
  if (rec.n_words < thresholds.min_words) {
    rec.verdict = Verdict::rejected;
    rec.reason = RejectReason::too_short;
    return rec;
  }
  return rec;
}

std::vector<SegmentRecord> rank_candidates(
    const std::vector<SegmentRecord>& records, const Scorer& scorer,
    size_t top_k) {
  std::vector<SegmentRecord> kept;
  for (const auto& r : records)
    if (r.verdict == Verdict::kept) kept.push_back(r);
  for (auto& r : kept) r.similarity = scorer.score(r.video_id, r.user);
  std::sort(kept.begin(), kept.end(),
            [](const SegmentRecord& a, const SegmentRecord& b) {
              if (*a.similarity != *b.similarity)
                return *a.similarity > *b.similarity;
              if (a.video_id != b.video_id) return a.video_id < b.video_id;
              return a.start_s < b.start_s;
            });
  if (kept.size() > top_k) kept.resize(top_k);
  return kept;
}

TimedTranscript load_transcript_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open transcript file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);

  // The timed format needs every non-empty line to be "word start end".
  bool timed = false;
  long rows = 0;
  for (const auto& l : lines) {
    std::istringstream row(l);
    std::string word, extra;
    double a, b;
    if (row >> word >> a >> b && !(row >> extra)) {
      ++rows;
      timed = true;
    } else if (!l.empty() &&
               l.find_first_not_of(" \t\r") != std::string::npos) {
      timed = false;
      break;
    }
  }

  TimedTranscript out;
  if (!timed || rows == 0) {
    std::string joined;
    for (const auto& l : lines) {
      if (!joined.empty()) joined += " ";
      joined += l;
    }
    out.text = Transcript::from_raw(joined);
    return out;
  }

  WordAlignment timing;
  std::vector<std::string> words;
  long line_no = 0;
  for (const auto& l : lines) {
    ++line_no;
    if (l.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(l);
    std::string word;
    double start, end;
    row >> word >> start >> end;
    if (end < start)
      throw InputError(path + ":" + std::to_string(line_no) +
                       ": word ends before it starts");
    for (const auto& w : Transcript::from_raw(word).words) {
      words.push_back(w);
      timing.entries.push_back({w, start, end});
    }
  }
  out.text = Transcript::from_words(std::move(words));
  out.timing = std::move(timing);
  return out;
}

Transcript cut_to_span(const TimedTranscript& t, const TimeSpan& span) {
  if (!t.timing) return t.text;
  std::vector<std::string> words;
  for (const auto& e : t.timing->entries) {
    const double mid = 0.5 * (e.start_s + e.end_s);
    if (mid >= span.start_s && mid < span.end_s) words.push_back(e.word);
  }
  return Transcript::from_words(std::move(words));
}

namespace {

struct VideoInput {
  std::string id;
  std::string dir;
  std::string audio_path;
};

std::set<std::string> load_keywords(const std::string& path) {
  std::ifstream in(path);
  std::set<std::string> out;
  if (!in) return out;
  std::stringstream all;
  all << in.rdbuf();
  for (const auto& w : Transcript::from_raw(all.str()).words) out.insert(w);
  return out;
}

}  // namespace

CurationResult run_curation(const std::string& videos_dir,
                            const Stoplist& stoplist,
                            const CurationOptions& opts, const Vad* vad,
                            const Scorer* scorer, std::ostream* log) {
  if (!fs::is_directory(videos_dir))
    throw InputError("videos directory not found: " + videos_dir);

  std::vector<VideoInput> videos;
  for (const auto& entry : fs::directory_iterator(videos_dir)) {
    if (!entry.is_directory()) continue;
    VideoInput v;
    v.id = entry.path().filename().string();
    v.dir = entry.path().string();
    for (const char* name : {"audio.wav", "audio.f32"}) {
      std::string candidate = v.dir + "/" + name;
      if (fs::exists(candidate)) {
        v.audio_path = candidate;
        break;
      }
    }
    if (v.audio_path.empty())
      throw InputError("video '" + v.id + "' has no audio.wav or audio.f32");
    for (const char* name : {"user.txt", "asr.txt"})
      if (!fs::exists(v.dir + "/" + name))
        throw InputError("video '" + v.id + "' is missing " +
                         std::string(name));
    videos.push_back(std::move(v));
  }
  std::sort(videos.begin(), videos.end(),
            [](const VideoInput& a, const VideoInput& b) { return a.id < b.id; });

  EnergyVad default_vad(opts.vad_rms_threshold, opts.vad_min_silence_s);
  const Vad& the_vad = vad ? *vad : default_vad;

  std::map<std::string, std::set<std::string>> keywords;
  if (!scorer)
    for (const auto& v : videos)
      keywords[v.id] = load_keywords(v.dir + "/keywords.txt");
  KeywordScorer default_scorer(std::move(keywords));
  const Scorer& the_scorer = scorer ? *scorer : default_scorer;

  std::vector<std::vector<SegmentRecord>> per_video(videos.size());
  std::vector<char> gated(videos.size(), 0);
  std::vector<std::string> log_lines(videos.size());

  parallel_for(static_cast<long>(videos.size()), opts.workers, [&](long vi) {
    const VideoInput& v = videos[static_cast<size_t>(vi)];
    std::ostringstream vlog;

    TimedTranscript user = load_transcript_file(v.dir + "/user.txt");
    TimedTranscript asr = load_transcript_file(v.dir + "/asr.txt");
    GateResult gate =
        video_gate(user.text, asr.text, opts.thresholds.video_wer_pct);
    if (gate.reason == RejectReason::empty_user)
      vlog << "video " << v.id << ": empty user transcript; rejected\n";

    Waveform audio = read_audio(v.audio_path);
    std::vector<TimeSpan> spans = the_vad.segment(audio);

    for (const auto& span : spans) {
      SegmentRecord rec;
      rec.video_id = v.id;
      rec.start_s = span.start_s;
      rec.end_s = span.end_s;
      rec.user = cut_to_span(user, span);
      rec.asr = cut_to_span(asr, span);
      if (gate.verdict == Verdict::rejected) {
        fill_stats(rec, stoplist);
        rec.verdict = Verdict::rejected;
        rec.reason = gate.reason;
      } else {
        rec = segment_filter(std::move(rec), stoplist, opts.thresholds, &vlog);
      }
      per_video[static_cast<size_t>(vi)].push_back(std::move(rec));
    }
    gated[static_cast<size_t>(vi)] = gate.verdict == Verdict::rejected ? 1 : 0;
    log_lines[static_cast<size_t>(vi)] = vlog.str();
  });

  CurationResult result;
  result.videos_seen = static_cast<long>(videos.size());
  std::ostream& out_log = log ? *log : std::cerr;
  for (size_t vi = 0; vi < videos.size(); ++vi) {
    if (gated[vi]) ++result.videos_gated;
    out_log << log_lines[vi];
    for (auto& rec : per_video[vi]) result.segments.push_back(std::move(rec));
  }

  for (auto& rec : result.segments)
    if (rec.verdict == Verdict::kept)
      rec.similarity = the_scorer.score(rec.video_id, rec.user);
  result.review = rank_candidates(result.segments, the_scorer, opts.top_k);
  return result;
}

namespace {

nlohmann::json record_to_json(const SegmentRecord& r) {
  nlohmann::json j;
  j["video_id"] = r.video_id;
  j["start_s"] = r.start_s;
  j["end_s"] = r.end_s;
  j["user"] = r.user.raw;
  j["asr"] = r.asr.raw;
  if (std::isfinite(r.wer_pct))
    j["wer_pct"] = r.wer_pct;
  else
    j["wer_pct"] = "inf";
  if (r.wer_nonstop_pct)
    j["wer_nonstop_pct"] = *r.wer_nonstop_pct;
  else
    j["wer_nonstop_pct"] = nullptr;
  j["n_words"] = r.n_words;
  if (r.similarity)
    j["similarity"] = *r.similarity;
  else
    j["similarity"] = nullptr;
  j["verdict"] = r.verdict == Verdict::kept ? "kept" : "rejected";
  if (r.verdict == Verdict::rejected)
    j["reason"] = reject_reason_name(r.reason);
  return j;
}

SegmentRecord record_from_json(const nlohmann::json& j, const std::string& ctx) {
  try {
    SegmentRecord r;
    r.video_id = j.at("video_id").get<std::string>();
    r.start_s = j.at("start_s").get<double>();
    r.end_s = j.at("end_s").get<double>();
    r.user = Transcript::from_raw(j.at("user").get<std::string>());
    r.asr = Transcript::from_raw(j.at("asr").get<std::string>());
    const auto& wer = j.at("wer_pct");
    r.wer_pct = wer.is_string()
                    ? std::numeric_limits<double>::infinity()
                    : wer.get<double>();
    if (!j.at("wer_nonstop_pct").is_null())
      r.wer_nonstop_pct = j.at("wer_nonstop_pct").get<double>();
    r.n_words = j.at("n_words").get<long>();
    if (j.contains("similarity") && !j.at("similarity").is_null())
      r.similarity = j.at("similarity").get<double>();
    const std::string verdict = j.at("verdict").get<std::string>();
    if (verdict == "kept") {
      r.verdict = Verdict::kept;
    } else if (verdict == "rejected") {
      r.verdict = Verdict::rejected;
      r.reason = parse_reject_reason(j.at("reason").get<std::string>());
    } else {
      throw InputError("verdict must be kept or rejected");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(ctx + ": " + e.what());
  }
}

}  // namespace

void write_segments_jsonl(const std::string& path,
                          const std::vector<SegmentRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write segments file: " + path);
  for (const auto& r : records) out << record_to_json(r).dump() << "\n";
  if (!out) throw InputError("failed writing segments file: " + path);
}

std::vector<SegmentRecord> load_segments_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open segments file: " + path);
  std::vector<SegmentRecord> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = path + ":" + std::to_string(line_no);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw InputError(ctx + ": invalid JSON");
    out.push_back(record_from_json(j, ctx));
  }
  return out;
}

std::vector<SegmentRecord> apply_corrections(
    std::vector<SegmentRecord> records, const std::string& corrections_path,
    const Stoplist& stoplist) {
  std::ifstream in(corrections_path);
  if (!in) throw InputError("cannot open corrections file: " + corrections_path);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = corrections_path + ":" + std::to_string(line_no);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw InputError(ctx + ": invalid JSON");

    std::string video_id;
    double start = 0, end = 0;
    std::string text;
    try {
      video_id = j.at("video_id").get<std::string>();
      start = j.at("start_s").get<double>();
      end = j.at("end_s").get<double>();
      text = j.at("transcript").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError(ctx + ": " + e.what());
    }

    bool matched = false;
    for (auto& r : records) {
      if (r.video_id != video_id || std::abs(r.start_s - start) > 1e-6 ||
          std::abs(r.end_s - end) > 1e-6)
        continue;
      r.user = Transcript::from_raw(text);
      fill_stats(r, stoplist);
      matched = true;
      break;
    }
    if (!matched)
      throw InputError(ctx + ": correction matches no segment (" + video_id +
                       ")");
  }
  return records;
}

}  // namespace avatar
