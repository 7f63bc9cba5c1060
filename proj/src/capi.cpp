#include "avatar/avatar.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "avatar/config.h"
#include "avatar/curation.h"
#include "avatar/error.h"
#include "avatar/evaluation.h"
#include "avatar/manifest.h"
#include "avatar/model.h"
#include "avatar/text.h"
#include "avatar/training.h"
#include "avatar/wav.h"

namespace fs = std::filesystem;
using namespace avatar;

struct av_opts {
  KvConfig kv;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
av_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return AV_OK;
  } catch (const InputError& e) {
    g_last_error = e.what();
    return AV_ERR_INPUT;
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return AV_ERR_INPUT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AV_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return AV_ERR_INTERNAL;
  }
}

void require_keys(const KvConfig& kv, const std::string& verb,
                  const std::vector<std::string>& keys) {
  for (const auto& k : keys)
    if (kv.get_string(k, "").empty())
      throw InputError(verb + " needs the '" + k + "' setting (--" + k + ")");
}

bool has_model_keys(const KvConfig& kv) {
  static const char* keys[] = {
      "d_model",        "enc_layers",     "enc_heads",     "ff_dim",
      "n_bottleneck",   "fusion_layer",   "dec_layers",    "dec_heads",
      "vocab_size",     "max_target_len", "audio_only",    "cls_only",
      "n_audio_tokens", "n_video_tokens", "audio_token_dim",
      "video_token_dim"};
  for (const char* k : keys)
    if (kv.has(k)) return true;
  return false;
}

std::vector<ManifestEntry> load_resolved_manifest(const std::string& path) {
  std::vector<ManifestEntry> entries = load_manifest(path);
  for (auto& e : entries) {
    e.audio_path = resolve_manifest_path(path, e.audio_path);
    if (e.frames_path)
      e.frames_path = resolve_manifest_path(path, *e.frames_path);
  }
  return entries;
}

Stoplist stoplist_for(const KvConfig& kv) {
  std::string path = kv.get_string("stoplist", "");
  return path.empty() ? Stoplist::builtin() : Stoplist::from_file(path);
}

void copy_path_keys(const KvConfig& from, KvConfig& to,
                    const std::vector<std::string>& keys) {
  for (const auto& k : keys)
    if (from.has(k)) to.set(k, from.get_string(k, ""));
}

// Evaluate layering: the checkpoint's training sidecar sits under the
// caller's settings, supplying model shape, vocab path, and mask strategy.
KvConfig eval_layered(const KvConfig& kv) {
  require_keys(kv, "evaluate", {"checkpoint"});
  std::string sidecar = kv.get_string("checkpoint", "") + ".conf";
  KvConfig merged;
  bool have_sidecar = fs::exists(sidecar);
  if (have_sidecar) merged = KvConfig::load_file(sidecar);
  merged.merge_from(kv);
  if (!have_sidecar && !has_model_keys(kv))
    throw InputError("no config sidecar at " + sidecar +
                     " and no model settings given; pass --config");
  return merged;
}

// ---- per-verb resolution: the exact text echoed and written ------------

KvConfig resolved_train(const KvConfig& kv, TrainOptions* out_opts) {
  ensure_known_keys(kv);
  require_keys(kv, "train", {"manifest", "vocab", "out_dir"});
  TrainOptions t = resolve_train_options(kv);
  WordpieceVocab vocab = WordpieceVocab::load_file(kv.get_string("vocab", ""));
  t.model.vocab_size = vocab.size();
  t.model.bos_id = vocab.bos_id();
  t.model.eos_id = vocab.eos_id();
  t.model.validate();
  if (out_opts) *out_opts = t;
  KvConfig resolved = dump_train_options(t);
  copy_path_keys(kv, resolved, {"manifest", "vocab", "stoplist"});
  return resolved;
}

KvConfig resolved_evaluate(const KvConfig& raw, EvalOptions* out_opts) {
  KvConfig kv = eval_layered(raw);
  ensure_known_keys(kv);
  require_keys(kv, "evaluate", {"checkpoint", "manifest", "vocab"});
  EvalOptions e = resolve_eval_options(kv);
  WordpieceVocab vocab = WordpieceVocab::load_file(kv.get_string("vocab", ""));
  e.model.vocab_size = vocab.size();
  e.model.bos_id = vocab.bos_id();
  e.model.eos_id = vocab.eos_id();
  e.model.validate();
  bool needs_bank =
      e.noise == NoiseKind::environment || e.noise == NoiseKind::mixed;
  if (needs_bank && kv.get_string("noise_bank", "").empty())
    throw InputError(std::string(noise_kind_name(e.noise)) +
                     " noise mixes in recorded clips; pass --noise-bank DIR");
  if (out_opts) *out_opts = e;
  KvConfig resolved = dump_eval_options(e);
  // mask_strategy keys the results-table row for this checkpoint.
  resolved.set("mask_strategy", kv.get_string("mask_strategy", "none"));
  std::string out_dir = kv.get_string("out_dir", "");
  if (out_dir.empty())
    out_dir = fs::path(kv.get_string("checkpoint", "")).parent_path().string();
  if (out_dir.empty()) out_dir = ".";
  resolved.set("out_dir", out_dir);
  copy_path_keys(kv, resolved,
                 {"checkpoint", "manifest", "vocab", "stoplist", "noise_bank"});
  return resolved;
}

KvConfig resolved_degrade(const KvConfig& kv) {
  ensure_known_keys(kv);
  require_keys(kv, "degrade", {"in", "out"});
  NoiseKind kind = parse_noise_kind(kv.get_string("noise", "clean"));
  bool needs_bank =
      kind == NoiseKind::environment || kind == NoiseKind::mixed;
  if (needs_bank && kv.get_string("noise_bank", "").empty())
    throw InputError(std::string(noise_kind_name(kind)) +
                     " noise mixes in recorded clips; pass --noise-bank DIR");
  KvConfig resolved;
  resolved.set("noise", noise_kind_name(kind));
  resolved.set_double("snr_db", kv.get_double("snr_db", 0.0));
  resolved.set_long("seed", kv.get_long("seed", 0));
  copy_path_keys(kv, resolved, {"in", "out", "noise_bank"});
  return resolved;
}

KvConfig resolved_curate(const KvConfig& kv, CurationOptions* out_opts) {
  ensure_known_keys(kv);
  require_keys(kv, "curate", {"videos", "out_dir"});
  CurationOptions c = resolve_curation_options(kv);
  if (out_opts) *out_opts = c;
  KvConfig resolved = dump_curation_options(c);
  copy_path_keys(kv, resolved, {"videos", "out_dir", "stoplist"});
  return resolved;
}

KvConfig resolved_for(const std::string& verb, const KvConfig& kv) {
  if (verb == "train") return resolved_train(kv, nullptr);
  if (verb == "evaluate") return resolved_evaluate(kv, nullptr);
  if (verb == "degrade") return resolved_degrade(kv);
  if (verb == "curate") return resolved_curate(kv, nullptr);
  throw InputError("unknown verb '" + verb +
                   "' (train, evaluate, degrade, curate)");
}

std::string eval_run_tag(const EvalOptions& e) {
  bool audio_only = e.model.audio_only || e.visual == VisualMode::none;
  return std::string(noise_kind_name(e.noise)) + "_" +
         (audio_only ? "a" : "av");
}

std::vector<Transcript> transcript_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open transcript file: " + path);
  std::vector<Transcript> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    Transcript t = Transcript::from_raw(line);
    if (!t.words.empty()) out.push_back(std::move(t));
    else if (!line.empty() && line.find_first_not_of(" \t\r") != std::string::npos)
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": line holds no words after normalization");
  }
  return out;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* av_version(void) { return "0.1.0"; }

const char* av_last_error(void) { return g_last_error.c_str(); }

av_opts* av_opts_new(void) { return new (std::nothrow) av_opts(); }

void av_opts_free(av_opts* opts) { delete opts; }

av_status av_opts_set(av_opts* opts, const char* key, const char* value) {
  return guarded([&] {
    if (!opts || !key || !value)
      throw ContractError("av_opts_set: NULL argument");
    KvConfig probe;
    probe.set(key, value);
    ensure_known_keys(probe);
    opts->kv.set(key, value);
  });
}

av_status av_opts_load(av_opts* opts, const char* preset_or_path) {
  return guarded([&] {
    if (!opts || !preset_or_path)
      throw ContractError("av_opts_load: NULL argument");
    KvConfig layer = KvConfig::preset_or_file(preset_or_path);
    ensure_known_keys(layer);
    opts->kv.merge_from(layer);
  });
}

av_status av_resolved_config(const av_opts* opts, const char* verb,
                             char** out_text) {
  return guarded([&] {
    if (!opts || !verb || !out_text)
      throw ContractError("av_resolved_config: NULL argument");
    std::string text = resolved_for(verb, opts->kv).render();
    *out_text = dup_string(text);
    if (!*out_text) throw std::bad_alloc();
  });
}

void av_string_free(char* text) { std::free(text); }

av_status av_train(const av_opts* opts, av_train_callback cb, void* user) {
  return guarded([&] {
    if (!opts) throw ContractError("av_train: NULL opts");
    TrainOptions t;
    KvConfig resolved = resolved_train(opts->kv, &t);
    t.out_dir = opts->kv.get_string("out_dir", "");
    fs::create_directories(t.out_dir);
    resolved.write_file(t.out_dir + "/train.conf");

    WordpieceVocab vocab =
        WordpieceVocab::load_file(opts->kv.get_string("vocab", ""));
    std::vector<ManifestEntry> entries =
        load_resolved_manifest(opts->kv.get_string("manifest", ""));
    Stoplist stoplist = stoplist_for(opts->kv);

    TrainHook hook;
    if (cb)
      hook = [cb, user](long iter, double loss, double lr) {
        cb(iter, loss, lr, user);
      };
    train(entries, vocab, stoplist, t, hook);

    // A sidecar per checkpoint lets evaluate run without --config.
    for (const auto& entry : fs::directory_iterator(t.out_dir))
      if (entry.path().extension() == ".ckpt")
        resolved.write_file(entry.path().string() + ".conf");
  });
}

av_status av_evaluate(const av_opts* opts, double* wer_pct) {
  return guarded([&] {
    if (!opts) throw ContractError("av_evaluate: NULL opts");
    EvalOptions e;
    KvConfig resolved = resolved_evaluate(opts->kv, &e);

    WordpieceVocab vocab =
        WordpieceVocab::load_file(resolved.get_string("vocab", ""));
    std::vector<ManifestEntry> entries =
        load_resolved_manifest(resolved.get_string("manifest", ""));
    Stoplist stoplist = stoplist_for(resolved);

    NoiseBank bank;
    if (!resolved.get_string("noise_bank", "").empty()) {
      bank = NoiseBank::load_dir(resolved.get_string("noise_bank", ""));
      e.bank = &bank;
    }

    Params params = Params::load(resolved.get_string("checkpoint", ""));
    check_params_match(e.model, params);

    WerBreakdown wb = evaluate(entries, params, vocab, stoplist, e);

    std::string out_dir = resolved.get_string("out_dir", ".");
    fs::create_directories(out_dir);
    std::string tag = eval_run_tag(e);
    resolved.write_file(out_dir + "/evaluate_" + tag + ".conf");
    write_utterance_jsonl(out_dir + "/utterances_" + tag + ".jsonl", wb);

    bool audio_only = e.model.audio_only || e.visual == VisualMode::none;
    std::string results = out_dir + "/results.tsv";
    append_result_row(results, resolved.get_string("mask_strategy", "none"),
                      noise_kind_name(e.noise), audio_only ? "A" : "A+V",
                      wb.total.wer_pct());
    std::ofstream table(out_dir + "/results_table.txt", std::ios::trunc);
    if (!table)
      throw InputError("cannot write results table in " + out_dir);
    table << render_results_table(results);

    if (wer_pct) *wer_pct = wb.total.wer_pct();
  });
}

av_status av_degrade(const av_opts* opts) {
  return guarded([&] {
    if (!opts) throw ContractError("av_degrade: NULL opts");
    KvConfig resolved = resolved_degrade(opts->kv);

    NoiseSpec spec;
    spec.kind = parse_noise_kind(resolved.get_string("noise", "clean"));
    spec.snr_db = resolved.get_double("snr_db", 0.0);
    spec.rng_seed =
        static_cast<uint64_t>(resolved.get_long("seed", 0));
    NoiseBank bank;
    if (!resolved.get_string("noise_bank", "").empty()) {
      bank = NoiseBank::load_dir(resolved.get_string("noise_bank", ""));
      spec.bank = &bank;
    }

    Waveform w = read_audio(resolved.get_string("in", ""));
    Waveform degraded = apply_noise(w, spec);
    std::string out = resolved.get_string("out", "");
    write_audio(out, degraded);
    resolved.write_file(out + ".conf");
  });
}

av_status av_curate(const av_opts* opts, av_curate_stats* stats) {
  return guarded([&] {
    if (!opts) throw ContractError("av_curate: NULL opts");
    CurationOptions c;
    KvConfig resolved = resolved_curate(opts->kv, &c);

    std::string out_dir = resolved.get_string("out_dir", "");
    fs::create_directories(out_dir);
    resolved.write_file(out_dir + "/curate.conf");

    Stoplist stoplist = stoplist_for(opts->kv);
    std::ofstream log(out_dir + "/curation.log", std::ios::trunc);
    if (!log) throw InputError("cannot write curation log in " + out_dir);

    CurationResult result = run_curation(resolved.get_string("videos", ""),
                                         stoplist, c, nullptr, nullptr, &log);
    write_segments_jsonl(out_dir + "/segments.jsonl", result.segments);
    write_segments_jsonl(out_dir + "/review_topk.jsonl", result.review);

    if (stats) {
      long kept = 0;
      for (const auto& s : result.segments)
        if (s.verdict == Verdict::kept) ++kept;
      stats->videos_seen = result.videos_seen;
      stats->videos_gated = result.videos_gated;
      stats->segments = static_cast<long>(result.segments.size());
      stats->segments_kept = kept;
      stats->review = static_cast<long>(result.review.size());
    }
  });
}

av_status av_wer_files(const char* ref_path, const char* hyp_path,
                       const char* stoplist_path, double* total_pct,
                       double* content_pct, double* stop_pct) {
  return guarded([&] {
    if (!ref_path || !hyp_path)
      throw ContractError("av_wer_files: NULL path");
    std::vector<Transcript> refs = transcript_lines(ref_path);
    std::vector<Transcript> hyps = transcript_lines(hyp_path);
    if (refs.empty())
      throw InputError(std::string(ref_path) + ": no reference utterances");
    if (refs.size() != hyps.size())
      throw InputError("utterance count mismatch: " + std::string(ref_path) +
                       " has " + std::to_string(refs.size()) + ", " +
                       hyp_path + " has " + std::to_string(hyps.size()));
    Stoplist stoplist = (stoplist_path && *stoplist_path)
                            ? Stoplist::from_file(stoplist_path)
                            : Stoplist::builtin();
    WerBreakdown wb = corpus_wer(refs, hyps, stoplist);
    if (total_pct) *total_pct = wb.total.wer_pct();
    if (content_pct) *content_pct = wb.content.wer_pct();
    if (stop_pct) *stop_pct = wb.stop.wer_pct();
  });
}

}  // extern "C"
