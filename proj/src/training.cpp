#include "avatar/training.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "avatar/error.h"
#include "avatar/parallel.h"
#include "avatar/wav.h"

namespace avatar {

MaskStrategy parse_mask_strategy(const std::string& name) {
  if (name == "none") return MaskStrategy::none;
  if (name == "random") return MaskStrategy::random_words;
  if (name == "content") return MaskStrategy::content_words;
  throw ConfigError("unknown mask strategy '" + name +
                    "' (expected none|random|content)");
}

const char* mask_strategy_name(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::none: return "none";
    case MaskStrategy::random_words: return "random";
    case MaskStrategy::content_words: return "content";
  }
  throw ContractError("unhandled mask strategy");
}

void MaskPlan::validate() const {
  if (overall_rate < 0.0 || overall_rate > 1.0)
    throw ConfigError("overall_rate must lie in [0, 1]");
  if (strategy == MaskStrategy::content_words &&
      (content_rate <= 0.0 || content_rate > 1.0))
    throw ConfigError(
        "content strategy needs content_rate in (0, 1]; derive it with "
        "compute_content_rate");
}

double compute_content_rate(const std::vector<std::string>& corpus_words,
                            const Stoplist& stoplist, double overall_rate) {
  long total = static_cast<long>(corpus_words.size());
  long content = 0;
  for (const auto& w : corpus_words)
    if (is_content_word(w, stoplist)) ++content;
  if (content == 0)
    throw ConfigError("corpus has no content words; content masking "
                      "cannot reach any overall rate");
  double rate = overall_rate * static_cast<double>(total) /
                static_cast<double>(content);
  if (rate > 1.0) {
    std::cerr << "warning: content masking capped at rate 1; achievable "
                 "overall rate is "
              << static_cast<double>(content) / static_cast<double>(total)
              << " not " << overall_rate << "\n";
    return 1.0;
  }
  return rate;
}

std::vector<int> select_mask_targets(const WordAlignment& align,
                                     const MaskPlan& plan,
                                     const Stoplist& stoplist, Rng& rng) {
  std::vector<int> picked;
  if (plan.strategy == MaskStrategy::none) return picked;
  for (size_t i = 0; i < align.entries.size(); ++i) {
    const std::string& word = align.entries[i].word;
    if (plan.strategy == MaskStrategy::random_words) {
      if (rng.uniform() < plan.overall_rate)
        picked.push_back(static_cast<int>(i));
    } else {
      if (!is_content_word(word, stoplist)) continue;  // stopwords: no draw
      if (rng.uniform() < plan.content_rate)
        picked.push_back(static_cast<int>(i));
    }
  }
  return picked;
}

void Schedule::validate() const {
  if (base_lr < 0) throw ConfigError("base_lr must be >= 0");
  if (warmup_iters < 0) throw ConfigError("warmup_iters must be >= 0");
  if (total_iters < 1) throw ConfigError("total_iters must be >= 1");
  if (warmup_iters >= total_iters)
    throw ConfigError("warmup_iters must be < total_iters");
  if (momentum < 0 || momentum >= 1)
    throw ConfigError("momentum must lie in [0, 1)");
}

double Schedule::lr(long iter) const {
  if (iter < 0) throw ContractError("iteration must be >= 0");
  if (iter >= total_iters) return 0.0;
  if (iter <= warmup_iters) {
    if (warmup_iters == 0) return base_lr;
    return base_lr * static_cast<double>(iter) /
           static_cast<double>(warmup_iters);
  }
  return base_lr * static_cast<double>(total_iters - iter) /
         static_cast<double>(total_iters - warmup_iters);
}

void MomentumSgd::step(Params& params, double lr) {
  for (auto& [name, t] : params.table()) {
    auto& v = velocity_[name];
    if (v.empty()) v.assign(t.data().size(), 0.0);
    const bool has_grad = t.has_grad();
    const std::vector<double>* g = has_grad ? &t.grad() : nullptr;
    auto& x = t.data();
    for (size_t i = 0; i < x.size(); ++i) {
      double gi = g ? (*g)[i] : 0.0;
      if (!std::isfinite(gi))
        throw ContractError("non-finite gradient in '" + name + "' at element " +
                            std::to_string(i));
      v[i] = mu_ * v[i] + gi;
      x[i] -= lr * v[i];
    }
  }
}

std::vector<int> target_ids(const std::string& transcript,
                            const WordpieceVocab& vocab,
                            const ModelConfig& cfg) {
  std::vector<int> ids = vocab.encode(transcript);
  if (static_cast<int>(ids.size()) > cfg.max_target_len - 1)
    ids.resize(cfg.max_target_len - 1);
  ids.push_back(cfg.eos_id);
  return ids;
}

namespace {

struct PreparedExample {
  Tensor audio;
  std::optional<Tensor> video;
  std::vector<int> target;
};

Tensor slice_audio_tokens(const Spectrogram& s, const ModelConfig& cfg) {
  Tensor all = patchify_audio(s);
  if (cfg.n_audio_tokens == all.dim(0)) return all;
  return slice_rows(all, 0, cfg.n_audio_tokens);
}

Tensor slice_video_tokens(const Tensor& all, const ModelConfig& cfg) {
  if (cfg.n_video_tokens == all.dim(0)) return all;
  return slice_rows(all, 0, cfg.n_video_tokens);
}

PreparedExample prepare_example(const ManifestEntry& entry,
                                const Waveform& audio,
                                const WordpieceVocab& vocab,
                                const Stoplist& stoplist,
                                const TrainOptions& opts, Rng& rng) {
  NoGradGuard ng;  // inputs are data, not parameters
  PreparedExample out;

  Waveform w = audio;
  if (opts.mask.strategy != MaskStrategy::none && entry.alignment) {
    std::vector<int> targets =
        select_mask_targets(*entry.alignment, opts.mask, stoplist, rng);
    if (!targets.empty()) w = mask_words(w, *entry.alignment, targets);
  }
  Spectrogram spec = log_mel_spectrogram(w);
  if (opts.use_spec_augment) spec = spec_augment(spec, opts.spec_augment, rng);
  out.audio = slice_audio_tokens(spec, opts.model);

  if (!opts.model.audio_only) {
    if (!entry.frames_path)
      throw InputError("entry '" + entry.id +
                       "' has no frames_path but the model wants video");
    ClipSource clip = ClipSource::open(*entry.frames_path);
    FrameStack frames = sample_frames(clip, rng);
    frames = augment_frames(frames, VideoAugmentParams{}, rng,
                            opts.augment_video);
    out.video = slice_video_tokens(tubelet_tokenize(frames), opts.model);
  }

  out.target = target_ids(entry.transcript, vocab, opts.model);
  return out;
}

}  // namespace

TrainResult train(const std::vector<ManifestEntry>& entries,
                  const WordpieceVocab& vocab, const Stoplist& stoplist,
                  const TrainOptions& options, const TrainHook& hook) {
  TrainOptions opts = options;
  opts.model.validate();
  opts.schedule.validate();
  if (opts.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (entries.empty()) throw ConfigError("manifest is empty");
  if (opts.model.vocab_size != vocab.size())
    throw ConfigError("model vocab_size " +
                      std::to_string(opts.model.vocab_size) +
                      " does not match the vocabulary (" +
                      std::to_string(vocab.size()) + ")");
  if (opts.model.bos_id != vocab.bos_id() ||
      opts.model.eos_id != vocab.eos_id())
    throw ConfigError("model bos/eos ids do not match the vocabulary");

  // Plan feasibility is settled before any work happens.
  if (opts.mask.strategy != MaskStrategy::none) {
    for (const auto& e : entries)
      if (!e.alignment)
        throw ConfigError("mask strategy '" +
                          std::string(mask_strategy_name(opts.mask.strategy)) +
                          "' needs word alignments; entry '" + e.id +
                          "' has none");
  }
  if (opts.mask.strategy == MaskStrategy::content_words &&
      opts.mask.content_rate == 0.0) {
    std::vector<std::string> corpus;
    for (const auto& e : entries)
      for (const auto& w : Transcript::from_raw(e.transcript).words)
        corpus.push_back(w);
    opts.mask.content_rate =
        compute_content_rate(corpus, stoplist, opts.mask.overall_rate);
  }
  opts.mask.validate();

  Rng root(opts.seed);
  Rng batch_rng = root.fork(0);

  Params params;
  if (!opts.init_checkpoint.empty()) {
    params = Params::load(opts.init_checkpoint);
    check_params_match(opts.model, params);
  } else {
    Rng init_rng = root.fork(~0ull);
    params = Params::init(opts.model, init_rng);
  }

  // Waveforms are reused every visit; decode them once.
  std::vector<Waveform> audio(entries.size());
  for (size_t i = 0; i < entries.size(); ++i)
    audio[i] = read_audio(entries[i].audio_path);

  std::ofstream loss_log;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    loss_log.open(opts.out_dir + "/loss_log.tsv", std::ios::app);
    if (!loss_log)
      throw InputError("cannot open loss log in " + opts.out_dir);
  }

  MomentumSgd optimizer(opts.schedule.momentum);
  TrainResult result;
  const int B = opts.batch_size;

  for (long iter = 0; iter < opts.schedule.total_iters; ++iter) {
    std::vector<size_t> idx(B);
    for (int b = 0; b < B; ++b)
      idx[b] = static_cast<size_t>(
          batch_rng.uniform_int(static_cast<long long>(entries.size())));

    std::vector<PreparedExample> prepared(B);
    parallel_for(B, opts.workers, [&](long b) {
      Rng ex_rng = root.fork(1 + static_cast<std::uint64_t>(iter) *
                                     static_cast<std::uint64_t>(B) +
                                 static_cast<std::uint64_t>(b));
      prepared[b] = prepare_example(entries[idx[b]], audio[idx[b]], vocab,
                                    stoplist, opts, ex_rng);
    });

    params.zero_grads();
    double mean_loss = 0.0;
    for (int b = 0; b < B; ++b) {
      Tensor enc = encode(prepared[b].audio, prepared[b].video, opts.model,
                          params);
      Tensor loss = sequence_loss(enc, prepared[b].target, opts.model, params);
      mean_loss += loss.item() / B;
      backward(scale(loss, 1.0 / B));
    }

    double lr = opts.schedule.lr(iter);
    optimizer.step(params, lr);

    result.losses.push_back(mean_loss);
    if (loss_log.is_open()) {
      char line[80];
      std::snprintf(line, sizeof(line), "%ld\t%.10g\t%.10g", iter, mean_loss,
                    lr);
      loss_log << line << "\n";
      loss_log.flush();
    }
    if (hook) hook(iter, mean_loss, lr);

    if (!opts.out_dir.empty() && opts.checkpoint_every > 0 &&
        (iter + 1) % opts.checkpoint_every == 0 &&
        iter + 1 < opts.schedule.total_iters) {
      params.save(opts.out_dir + "/ckpt_" + std::to_string(iter + 1) +
                  ".ckpt");
    }
  }

  if (!opts.out_dir.empty()) {
    result.final_checkpoint = opts.out_dir + "/model.ckpt";
    params.save(result.final_checkpoint);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace avatar
