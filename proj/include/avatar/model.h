#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avatar/rng.h"
#include "avatar/tensor.h"

namespace avatar {

struct ModelConfig {
  int d_model = 768;
  int enc_layers = 12;   // L
  int enc_heads = 12;    // N_H
  int ff_dim = 3072;     // feed-forward hidden size
  int n_bottleneck = 4;
  int fusion_layer = 8;  // first fused encoder layer, 0-based; == L disables
  int dec_layers = 8;
  int dec_heads = 4;
  int vocab_size = 0;    // set from the wordpiece vocab
  int bos_id = 2;        // start-of-sequence token id
  int eos_id = 3;        // end-of-sequence token id
  int max_target_len = 64;
  bool audio_only = false;
  bool cls_only = false;  // decoder reads CLS + bottlenecks only

  // Token geometry. The frontend emits 780/196 tokens; smaller counts make
  // the pipeline keep a prefix (audio: leading time patches).
  int n_audio_tokens = 780;
  int n_video_tokens = 196;
  int audio_token_dim = 256;
  int video_token_dim = 1536;

  static ModelConfig paper_preset();
  static ModelConfig tiny_preset();

  void validate() const;          // throws ConfigError
  int encoder_output_len() const; // tokens + CLS per modality + bottlenecks
};

// Named parameter collection. The map order (lexicographic) is the
// checkpoint's table and data order.
class Params {
 public:
  Params() = default;

  // Shapes for every parameter of this architecture, keyed by name.
  static std::map<std::string, std::vector<int>> expected_shapes(
      const ModelConfig& cfg);

  // Truncated-normal(0.02) weights; zero biases; unit LayerNorm gains.
  static Params init(const ModelConfig& cfg, Rng& rng);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return table_.count(name) != 0; }

  std::map<std::string, Tensor>& table() { return table_; }
  const std::map<std::string, Tensor>& table() const { return table_; }

  void zero_grads();

  // Binary checkpoint: magic, entry table (name, dims), then all values as
  // little-endian doubles in table order. See README for the exact layout.
  void save(const std::string& path) const;
  static Params load(const std::string& path);

  // Copies every entry of a donor checkpoint whose name exists here. Shape
  // mismatches are adapted when they look like image-patch kernels
  // (3-channel rows averaged for audio, repeated per frame for video);
  // anything else throws. Returns the imported names.
  std::vector<std::string> import_named(const std::string& path);

 private:
  std::map<std::string, Tensor> table_;
};

// Throws InputError unless params carries exactly the names and shapes the
// config calls for.
void check_params_match(const ModelConfig& cfg, const Params& params);

// Bottleneck probe: record captures the bottleneck rows fed into each fused
// layer; inject replays recorded rows in their place, cutting cross-modal
// flow at the recorded boundary.
struct EncoderProbe {
  bool inject = false;
  std::vector<std::vector<double>> bottlenecks;  // one [n_b * d] row set per fused layer
};

// audio: [n_audio_tokens x audio_token_dim]; video required unless
// cfg.audio_only. Output rows: audio tokens, video tokens, CLS(audio),
// CLS(video), bottlenecks — with video rows absent in audio-only mode.
Tensor encode(const Tensor& audio, const std::optional<Tensor>& video,
              const ModelConfig& cfg, const Params& params,
              EncoderProbe* probe = nullptr);

// Log-probabilities [|target| x vocab] under teacher forcing: position t
// predicts target[t] from start-of-sequence plus target[0..t).
Tensor decoder_logprobs(const Tensor& enc, const std::vector<int>& target,
                        const ModelConfig& cfg, const Params& params);

// Next-token log-probability vector after the given generated prefix.
// Inference-only (no tape).
std::vector<double> decode_step(const Tensor& enc, const std::vector<int>& prefix,
                                const ModelConfig& cfg, const Params& params);

// Mean token NLL; target must end with the end-of-sequence id.
Tensor sequence_loss(const Tensor& enc, const std::vector<int>& target,
                     const ModelConfig& cfg, const Params& params);

struct Hypothesis {
  std::vector<int> ids;  // generated tokens, including the closing EOS
  double log_prob = 0.0;
  bool finished = false;
};

// Length-normalized beam search. Children are ranked by raw cumulative
// log-probability; the top beam_size survive each step, with end-of-sequence
// children retiring to the finished pool. Finished hypotheses score
// log_prob / ((5+|Y|)/6)^alpha; ties break toward the lexicographically
// smaller token sequence. Returns the best hypothesis's ids (EOS included
// when finished).
std::vector<int> beam_search(const Tensor& enc, const ModelConfig& cfg,
                             const Params& params, int beam_size = 4,
                             double alpha = 0.6);

}  // namespace avatar
