#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "avatar/audio.h"
#include "avatar/manifest.h"
#include "avatar/model.h"
#include "avatar/rng.h"
#include "avatar/text.h"
#include "avatar/video.h"

namespace avatar {

enum class MaskStrategy { none, random_words, content_words };

MaskStrategy parse_mask_strategy(const std::string& name);  // none|random|content
const char* mask_strategy_name(MaskStrategy s);

struct MaskPlan {
  MaskStrategy strategy = MaskStrategy::none;
  double overall_rate = 0.10;  // fraction of all words masked, in expectation
  double content_rate = 0.0;   // derived per corpus for the content strategy

  void validate() const;  // throws ConfigError
};

// min(1, overall_rate * N_total / N_content): masking content words at this
// rate hits overall_rate across the corpus. Capped at 1 with a warning on
// stderr (the achievable overall rate is then N_content / N_total).
double compute_content_rate(const std::vector<std::string>& corpus_words,
                            const Stoplist& stoplist, double overall_rate);

// Word indices to mask this visit. random: every word with probability
// overall_rate; content: every content word with probability content_rate,
// stopwords never. Fresh draws per call.
std::vector<int> select_mask_targets(const WordAlignment& align,
                                     const MaskPlan& plan,
                                     const Stoplist& stoplist, Rng& rng);

// Piecewise-linear learning rate through (0, 0), (warmup, base_lr),
// (total, 0); warmup_iters == 0 starts at base_lr and decays.
struct Schedule {
  double base_lr = 0.05;
  long warmup_iters = 10;
  long total_iters = 300;
  double momentum = 0.9;

  void validate() const;  // throws ConfigError
  double lr(long iter) const;
};

// Heavy-ball SGD over the whole parameter table, velocity kept per name.
class MomentumSgd {
 public:
  explicit MomentumSgd(double momentum = 0.9) : mu_(momentum) {}

  // v <- mu*v + g; p <- p - lr*v. Throws ContractError on a non-finite
  // gradient, naming the parameter.
  void step(Params& params, double lr);

 private:
  double mu_;
  std::map<std::string, std::vector<double>> velocity_;
};

struct TrainOptions {
  ModelConfig model;
  MaskPlan mask;
  Schedule schedule;
  int batch_size = 2;
  std::uint64_t seed = 0;
  int workers = 1;
  bool use_spec_augment = true;
  SpecAugmentParams spec_augment;
  bool augment_video = true;
  std::string init_checkpoint;    // optional warm start
  std::string out_dir;            // when set: checkpoints + loss log land here
  long checkpoint_every = 0;      // 0 keeps only the final checkpoint
};

struct TrainResult {
  Params params;
  std::vector<double> losses;      // mean batch loss per iteration
  std::string final_checkpoint;    // empty unless out_dir was set
};

using TrainHook = std::function<void(long iter, double loss, double lr)>;

// Runs the full loop: sample batch, pick and mask target words, featurize
// (log-mel + SpecAugment, frame pair + augmentation), encode, teacher-forced
// loss, backward, momentum step. Entry media paths must already be resolved.
// Deterministic in (options.seed, manifest order) for any worker count.
TrainResult train(const std::vector<ManifestEntry>& entries,
                  const WordpieceVocab& vocab, const Stoplist& stoplist,
                  const TrainOptions& options, const TrainHook& hook = nullptr);

// Wordpiece ids for the decoder target: transcript pieces (truncated to fit)
// plus the closing end-of-sequence id.
std::vector<int> target_ids(const std::string& transcript,
                            const WordpieceVocab& vocab,
                            const ModelConfig& cfg);

}  // namespace avatar
