#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avatar/audio.h"
#include "avatar/manifest.h"
#include "avatar/model.h"
#include "avatar/text.h"

namespace avatar {

struct SliceCounts {
  long sub = 0;
  long del = 0;
  long ins = 0;
  long n_ref = 0;

  long errors() const { return sub + del + ins; }
  // Percent; with no reference words: 0 when error-free, +inf otherwise.
  double wer_pct() const;
};

struct UtteranceRecord {
  std::string id;
  std::string ref;
  std::string hyp;
  long sub = 0;
  long del = 0;
  long ins = 0;
  long n_ref = 0;
};

struct WerBreakdown {
  SliceCounts total;    // every word
  SliceCounts content;  // non-stopword slice
  SliceCounts stop;     // stopword slice
  std::vector<UtteranceRecord> per_utterance;
};

// Where an inserted hypothesis word lands in the content/stop split: classify
// it like a reference word, or keep insertions out of the slices entirely.
enum class InsertionSlice { by_hypothesis_word, total_only };

// Corpus-pooled WER (errors and reference counts summed over utterances,
// not averaged per sentence). Every ref must be non-empty; ids, when given,
// label per_utterance records (defaults to the utterance index).
WerBreakdown corpus_wer(const std::vector<Transcript>& refs,
                        const std::vector<Transcript>& hyps,
                        const Stoplist& stoplist,
                        InsertionSlice insertions = InsertionSlice::by_hypothesis_word,
                        const std::vector<std::string>& ids = {});

// 100 * (wer_a - wer_av) / wer_a; empty when wer_a is 0 (not applicable).
std::optional<double> rel_delta(double wer_a, double wer_av);

enum class VisualMode { real, none, shuffled };

VisualMode parse_visual_mode(const std::string& name);
const char* visual_mode_name(VisualMode m);

struct EvalOptions {
  ModelConfig model;
  NoiseKind noise = NoiseKind::clean;
  double snr_db = 0.0;
  const NoiseBank* bank = nullptr;  // environment/mixed only
  VisualMode visual = VisualMode::real;
  int beam_size = 4;
  double beam_alpha = 0.6;
  InsertionSlice insertions = InsertionSlice::by_hypothesis_word;
  std::uint64_t seed = 0;
  int workers = 1;
};

// Degrade -> featurize -> encode -> beam-decode -> pooled WER. Noise and
// frame-sampling draws are forked per utterance from (seed, index), so the
// degradations a checkpoint faces do not depend on the checkpoint. visual
// none drops the video stream (audio-only encode); shuffled pairs every
// utterance with a different entry's frames (derangement; needs >= 2
// entries). Entry media paths must already be resolved.
WerBreakdown evaluate(const std::vector<ManifestEntry>& entries,
                      const Params& params, const WordpieceVocab& vocab,
                      const Stoplist& stoplist, const EvalOptions& opts);

// One line per utterance: id, ref, hyp, and error counts as JSON.
void write_utterance_jsonl(const std::string& path, const WerBreakdown& wb);

// Accumulated results table: one row per evaluate run, keyed by training
// strategy, noise condition, and modality ("A" or "A+V").
void append_result_row(const std::string& results_path,
                       const std::string& strategy, const std::string& noise,
                       const std::string& modality, double wer_pct);

// Renders the accumulated rows as a grid: training strategies down the side,
// noise conditions across, each cell holding A / A+V / relative delta.
std::string render_results_table(const std::string& results_path);

}  // namespace avatar
