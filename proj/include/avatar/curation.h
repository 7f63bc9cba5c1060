#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "avatar/audio.h"
#include "avatar/text.h"

namespace avatar {

struct TimeSpan {
  double start_s = 0.0;
  double end_s = 0.0;
};

// Voice-activity detection plugin: returns sorted, non-overlapping voiced
// spans. A silent file yields an empty list.
class Vad {
 public:
  virtual ~Vad() = default;
  virtual std::vector<TimeSpan> segment(const Waveform& w) const = 0;
};

// Reference VAD: fixed frames, a frame is silent when its RMS falls below
// the threshold, and a silent run of at least min_silence_s closes the
// current segment. Deliberately naive; real detectors plug in via Vad.
class EnergyVad : public Vad {
 public:
  explicit EnergyVad(double rms_threshold = 0.01, double min_silence_s = 0.3,
                     double frame_s = 0.01);
  std::vector<TimeSpan> segment(const Waveform& w) const override;

 private:
  double rms_threshold_;
  double min_silence_s_;
  double frame_s_;
};

// Visual-grounding score for a (video, sentence) pair; higher means the
// sentence is more likely to need the video to transcribe. Deterministic.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const std::string& video_id,
                       const Transcript& sentence) const = 0;
};

// Reference scorer: fraction of the sentence's distinct words that appear
// in the video's keyword list (empty sentence or no keywords scores 0).
class KeywordScorer : public Scorer {
 public:
  explicit KeywordScorer(
      std::map<std::string, std::set<std::string>> keywords_by_video);
  double score(const std::string& video_id,
               const Transcript& sentence) const override;

 private:
  std::map<std::string, std::set<std::string>> keywords_;
};

enum class Verdict { kept, rejected };

// First failed check in pipeline order; empty_user flags a degenerate video
// with no reference transcript at all.
enum class RejectReason {
  none,
  empty_user,
  video_wer_gt_100,
  seg_wer_gt_50,
  nonstop_wer_lt_20,
  too_short,
};

const char* reject_reason_name(RejectReason r);
RejectReason parse_reject_reason(const std::string& name);

struct SegmentRecord {
  std::string video_id;
  double start_s = 0.0;
  double end_s = 0.0;
  Transcript user;  // uploaded reference transcript for the span
  Transcript asr;   // recognizer transcript for the span
  double wer_pct = 0.0;                     // asr against user
  std::optional<double> wer_nonstop_pct;    // empty when no content refs
  long n_words = 0;                         // user word count
  std::optional<double> similarity;         // filled for kept records
  Verdict verdict = Verdict::kept;
  RejectReason reason = RejectReason::none;
};

// Word error rate of hyp against ref, percent. An empty ref scores 0 when
// hyp is empty too, +inf otherwise (insertions with nothing to match).
double transcript_wer_pct(const Transcript& ref, const Transcript& hyp);

// Errors on content-word reference positions (substitutions and deletions
// only) over the content-word reference count; empty when ref has no
// content words.
std::optional<double> nonstop_wer_pct(const Transcript& ref,
                                      const Transcript& hyp,
                                      const Stoplist& stoplist);

struct CurationThresholds {
  double video_wer_pct = 100.0;  // reject video when its WER exceeds this
  double seg_wer_pct = 50.0;     // reject segment when WER exceeds this
  double nonstop_wer_pct = 20.0; // reject segment when non-stop WER is below
  long min_words = 9;            // reject segment with fewer reference words
};

struct GateResult {
  Verdict verdict = Verdict::kept;
  RejectReason reason = RejectReason::none;
  double wer_pct = 0.0;
};

// Whole-video gate: WER of the full ASR transcript against the full user
// transcript; rejected only when strictly above the threshold. An empty
// user transcript is rejected with its own reason.
GateResult video_gate(const Transcript& user, const Transcript& asr,
                      double threshold_pct = 100.0);

// Segment checks in order: quality (WER > seg threshold), too clean
// (non-stop WER < threshold; skipped and logged when it cannot be
// computed), too short (reference words < min). Fills wer fields, n_words,
// verdict, and the first failing reason.
SegmentRecord segment_filter(SegmentRecord rec, const Stoplist& stoplist,
                             const CurationThresholds& thresholds = {},
                             std::ostream* log = nullptr);

// Scores the kept records, sorts by similarity descending (ties broken by
// video_id then start_s), and returns the first top_k.
std::vector<SegmentRecord> rank_candidates(
    const std::vector<SegmentRecord>& records, const Scorer& scorer,
    size_t top_k);

// Transcript file: either plain text, or one "word start end" row per line
// (whitespace-separated, times in seconds). Words are normalized; rows
// whose word normalizes away are dropped.
struct TimedTranscript {
  Transcript text;
  std::optional<WordAlignment> timing;  // present only for the row format
};

TimedTranscript load_transcript_file(const std::string& path);

// Words whose midpoints fall inside the span; a transcript without timing
// falls back to the full text for every span.
Transcript cut_to_span(const TimedTranscript& t, const TimeSpan& span);

struct CurationOptions {
  CurationThresholds thresholds;
  size_t top_k = 50;
  int workers = 1;
  double vad_rms_threshold = 0.01;
  double vad_min_silence_s = 0.3;
};

struct CurationResult {
  std::vector<SegmentRecord> segments;  // every segment, kept or not
  std::vector<SegmentRecord> review;    // top_k kept, ranked
  long videos_seen = 0;
  long videos_gated = 0;  // rejected whole (gate or empty user)
};

// Walks videos_dir/<video_id>/ directories, each holding user.txt, asr.txt,
// and audio.wav or audio.f32 (keywords.txt feeds the reference scorer).
// Per video: gate, VAD segmentation, per-segment transcript cuts, filters.
// Segments of a gated-out video are still emitted, all rejected with the
// gate's reason. Videos are processed in name order; output is
// deterministic for any worker count. Null vad/scorer use the bundled
// reference implementations.
CurationResult run_curation(const std::string& videos_dir,
                            const Stoplist& stoplist,
                            const CurationOptions& opts = {},
                            const Vad* vad = nullptr,
                            const Scorer* scorer = nullptr,
                            std::ostream* log = nullptr);

void write_segments_jsonl(const std::string& path,
                          const std::vector<SegmentRecord>& records);
std::vector<SegmentRecord> load_segments_jsonl(const std::string& path);

// Manual-review import: corrections.jsonl rows {video_id, start_s, end_s,
// transcript} replace the matching record's user transcript and refresh its
// WER fields and word count (verdict and similarity stay). A correction
// that matches no record is an error.
std::vector<SegmentRecord> apply_corrections(
    std::vector<SegmentRecord> records, const std::string& corrections_path,
    const Stoplist& stoplist);

}  // namespace avatar
