// Command-line surface over the C API: train, evaluate, degrade, curate, wer.
// Exit codes: 0 success, 1 input/configuration error, 2 internal error.
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avatar/avatar.h"

namespace {

struct OptsHandle {
  av_opts* p = av_opts_new();
  ~OptsHandle() { av_opts_free(p); }
};

int fail(av_status st) {
  std::fprintf(stderr, "error: %s\n", av_last_error());
  return st == AV_ERR_INPUT ? 1 : 2;
}

// Applies --config (preset name or file), then explicit flags, then --set
// pairs, in that order, so later layers override earlier ones.
class OptsBuilder {
 public:
  explicit OptsBuilder(CLI::App* cmd) : cmd_(cmd) {
    cmd->add_option("--config", config_,
                    "preset name (tiny, pretrain-paper, finetune-paper) or "
                    "config file path");
    cmd->add_option("--set", sets_, "extra key=value override (repeatable)")
        ->expected(-1);
  }

  // Binds --flag to a config key, set only when the user passes it.
  void flag(const std::string& cli_name, const std::string& key,
            const std::string& help) {
    values_.push_back(std::make_unique<std::string>());
    std::string* slot = values_.back().get();
    cmd_->add_option_function<std::string>(
        cli_name,
        [this, key, slot](const std::string& v) {
          *slot = v;
          pairs_.push_back({key, *slot});
        },
        help);
  }

  av_status apply(av_opts* opts) const {
    if (!config_.empty()) {
      av_status st = av_opts_load(opts, config_.c_str());
      if (st != AV_OK) return st;
    }
    for (const auto& [key, value] : pairs_) {
      av_status st = av_opts_set(opts, key.c_str(), value.c_str());
      if (st != AV_OK) return st;
    }
    for (const std::string& s : sets_) {
      size_t eq = s.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::fprintf(stderr, "error: --set wants key=value, got '%s'\n",
                     s.c_str());
        return AV_ERR_INPUT;
      }
      av_status st = av_opts_set(opts, s.substr(0, eq).c_str(),
                                 s.substr(eq + 1).c_str());
      if (st != AV_OK) return st;
    }
    return AV_OK;
  }

 private:
  CLI::App* cmd_;
  std::string config_;
  std::vector<std::string> sets_;
  std::vector<std::pair<std::string, std::string>> pairs_;
  std::vector<std::unique_ptr<std::string>> values_;
};

int echo_resolved(const av_opts* opts, const char* verb) {
  char* text = nullptr;
  av_status st = av_resolved_config(opts, verb, &text);
  if (st != AV_OK) return fail(st);
  std::printf("# resolved %s configuration\n%s", verb, text);
  std::fflush(stdout);
  av_string_free(text);
  return 0;
}

void print_progress(long iter, double loss, double lr, void* user) {
  long total = *static_cast<long*>(user);
  if (iter == 0 || (iter + 1) % 25 == 0 || iter + 1 == total)
    std::printf("iter %ld  loss %.6f  lr %.6g\n", iter + 1, loss, lr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audio-visual speech recognition toolkit"};
  app.set_version_flag("--version", av_version());
  app.require_subcommand(1);

  // train ------------------------------------------------------------
  CLI::App* train = app.add_subcommand("train", "train a model");
  OptsBuilder train_opts(train);
  train_opts.flag("--manifest", "manifest", "training manifest (JSONL)");
  train_opts.flag("--vocab", "vocab", "wordpiece vocabulary file");
  train_opts.flag("--out", "out_dir", "output directory");
  train_opts.flag("--mask", "mask_strategy",
                  "word-masking strategy: none|random|content");
  train_opts.flag("--seed", "seed", "RNG seed");
  train_opts.flag("--workers", "workers", "parallel data workers");
  train_opts.flag("--batch", "batch_size", "batch size");
  train_opts.flag("--iters", "total_iters", "total iterations");
  train_opts.flag("--stoplist", "stoplist", "stopword list file");
  train_opts.flag("--init-checkpoint", "init_checkpoint",
                  "warm-start checkpoint");
  train_opts.flag("--checkpoint-every", "checkpoint_every",
                  "periodic checkpoint interval (0 = final only)");

  // evaluate -----------------------------------------------------------
  CLI::App* ev = app.add_subcommand("evaluate", "evaluate a checkpoint");
  OptsBuilder ev_opts(ev);
  ev_opts.flag("--checkpoint", "checkpoint", "model checkpoint");
  ev_opts.flag("--manifest", "manifest", "evaluation manifest (JSONL)");
  ev_opts.flag("--noise", "noise",
               "audio degradation: clean|burst|environment|mixed");
  ev_opts.flag("--noise-bank", "noise_bank", "directory of noise clips");
  ev_opts.flag("--snr-db", "snr_db", "signal-to-noise ratio in dB");
  ev_opts.flag("--visual", "visual", "video stream: real|none|shuffled");
  ev_opts.flag("--seed", "seed", "RNG seed");
  ev_opts.flag("--workers", "workers", "parallel workers");
  ev_opts.flag("--out", "out_dir",
               "output directory (default: checkpoint's)");
  ev_opts.flag("--vocab", "vocab", "wordpiece vocabulary file");
  ev_opts.flag("--stoplist", "stoplist", "stopword list file");
  ev_opts.flag("--beam-size", "beam_size", "beam width");

  // degrade ------------------------------------------------------------
  CLI::App* deg = app.add_subcommand("degrade",
                                     "write a noise-degraded audio file");
  OptsBuilder deg_opts(deg);
  deg_opts.flag("--in", "in", "input audio file");
  deg_opts.flag("--out", "out", "output audio file");
  deg_opts.flag("--noise", "noise",
                "degradation: clean|burst|environment|mixed");
  deg_opts.flag("--noise-bank", "noise_bank", "directory of noise clips");
  deg_opts.flag("--snr-db", "snr_db", "signal-to-noise ratio in dB");
  deg_opts.flag("--seed", "seed", "RNG seed");

  // curate -------------------------------------------------------------
  CLI::App* cur = app.add_subcommand("curate", "curate a video corpus");
  OptsBuilder cur_opts(cur);
  cur_opts.flag("--videos", "videos", "directory of per-video inputs");
  cur_opts.flag("--out", "out_dir", "output directory");
  cur_opts.flag("--workers", "workers", "parallel workers");
  cur_opts.flag("--stoplist", "stoplist", "stopword list file");
  cur_opts.flag("--top-k", "top_k", "review list size");
  cur_opts.flag("--video-wer", "video_wer_pct",
                "gate threshold: reject videos above this WER%%");
  cur_opts.flag("--seg-wer", "seg_wer_pct",
                "reject segments above this WER%%");
  cur_opts.flag("--nonstop-wer", "nonstop_wer_pct",
                "reject segments below this content-word WER%%");
  cur_opts.flag("--min-words", "min_words", "minimum words per segment");
  cur_opts.flag("--vad-rms", "vad_rms_threshold", "VAD energy threshold");
  cur_opts.flag("--vad-min-silence", "vad_min_silence_s",
                "VAD minimum silence seconds");

  // wer ----------------------------------------------------------------
  CLI::App* wer = app.add_subcommand(
      "wer", "word error rate between two transcript files");
  std::string ref_path, hyp_path, wer_stoplist;
  wer->add_option("--ref", ref_path, "reference transcripts, one per line")
      ->required();
  wer->add_option("--hyp", hyp_path, "hypothesis transcripts, one per line")
      ->required();
  wer->add_option("--stoplist", wer_stoplist, "stopword list file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are input errors
  }

  if (app.got_subcommand(train)) {
    OptsHandle h;
    av_status st = train_opts.apply(h.p);
    if (st != AV_OK) return fail(st);
    if (int rc = echo_resolved(h.p, "train")) return rc;
    char* text = nullptr;
    long total = 0;
    if (av_resolved_config(h.p, "train", &text) == AV_OK) {
      std::string s(text);
      size_t at = s.find("total_iters=");
      if (at != std::string::npos) total = std::atol(s.c_str() + at + 12);
      av_string_free(text);
    }
    st = av_train(h.p, print_progress, &total);
    if (st != AV_OK) return fail(st);
    std::printf("done\n");
    return 0;
  }

  if (app.got_subcommand(ev)) {
    OptsHandle h;
    av_status st = ev_opts.apply(h.p);
    if (st != AV_OK) return fail(st);
    if (int rc = echo_resolved(h.p, "evaluate")) return rc;
    double wer_pct = 0.0;
    st = av_evaluate(h.p, &wer_pct);
    if (st != AV_OK) return fail(st);
    std::printf("WER %.2f%%\n", wer_pct);
    return 0;
  }

  if (app.got_subcommand(deg)) {
    OptsHandle h;
    av_status st = deg_opts.apply(h.p);
    if (st != AV_OK) return fail(st);
    if (int rc = echo_resolved(h.p, "degrade")) return rc;
    st = av_degrade(h.p);
    if (st != AV_OK) return fail(st);
    std::printf("done\n");
    return 0;
  }

  if (app.got_subcommand(cur)) {
    OptsHandle h;
    av_status st = cur_opts.apply(h.p);
    if (st != AV_OK) return fail(st);
    if (int rc = echo_resolved(h.p, "curate")) return rc;
    av_curate_stats stats{};
    st = av_curate(h.p, &stats);
    if (st != AV_OK) return fail(st);
    std::printf(
        "videos %ld (gated %ld)  segments %ld (kept %ld)  review %ld\n",
        stats.videos_seen, stats.videos_gated, stats.segments,
        stats.segments_kept, stats.review);
    return 0;
  }

  // wer
  double total = 0, content = 0, stop = 0;
  av_status st = av_wer_files(
      ref_path.c_str(), hyp_path.c_str(),
      wer_stoplist.empty() ? nullptr : wer_stoplist.c_str(), &total, &content,
      &stop);
  if (st != AV_OK) return fail(st);
  std::printf("WER %.2f%%\n", total);
  std::printf("content WER %.2f%%\nstopword WER %.2f%%\n", content, stop);
  return 0;
}
