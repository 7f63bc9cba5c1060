#include "avatar/config.h"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "avatar/error.h"

namespace avatar {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Shortest decimal that parses back to exactly v.
std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Every key any subcommand understands, in one glossary.
const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // model architecture
      "d_model", "enc_layers", "enc_heads", "ff_dim", "n_bottleneck",
      "fusion_layer", "dec_layers", "dec_heads", "vocab_size",
      "max_target_len", "audio_only", "cls_only", "n_audio_tokens",
      "n_video_tokens", "audio_token_dim", "video_token_dim",
      // training loop
      "mask_strategy", "mask_rate", "content_rate", "base_lr", "warmup_iters",
      "total_iters", "momentum", "batch_size", "spec_augment", "augment_video",
      "checkpoint_every", "init_checkpoint",
      // decoding / evaluation
      "beam_size", "beam_alpha", "noise", "snr_db", "visual", "noise_bank",
      // curation
      "video_wer_pct", "seg_wer_pct", "nonstop_wer_pct", "min_words", "top_k",
      "vad_rms_threshold", "vad_min_silence_s",
      // shared runtime and I/O
      "seed", "workers", "manifest", "vocab", "stoplist", "out_dir",
      "checkpoint", "videos", "ref", "hyp", "in", "out",
  };
  return keys;
}

KvConfig tiny_settings() {
  KvConfig kv = dump_model_config(ModelConfig::tiny_preset());
  kv.set_long("vocab_size", 11);
  kv.set("mask_strategy", "none");
  kv.set_double("mask_rate", 0.10);
  kv.set_double("content_rate", 0.0);
  kv.set_double("base_lr", 0.05);
  kv.set_long("warmup_iters", 10);
  kv.set_long("total_iters", 300);
  kv.set_double("momentum", 0.9);
  kv.set_long("batch_size", 4);
  kv.set_bool("spec_augment", false);
  kv.set_bool("augment_video", false);
  kv.set_long("beam_size", 4);
  kv.set_double("beam_alpha", 0.6);
  return kv;
}

KvConfig paper_settings(bool pretrain) {
  KvConfig kv = dump_model_config(ModelConfig::paper_preset());
  kv.set_long("vocab_size", 30522);  // standard BERT wordpiece inventory
  kv.set("mask_strategy", "random");
  kv.set_double("mask_rate", 0.10);
  kv.set_double("content_rate", 0.0);
  kv.set_double("base_lr", 2.0);
  kv.set_long("warmup_iters", pretrain ? 1000 : 0);
  kv.set_long("total_iters", pretrain ? 1000000 : 40000);
  kv.set_double("momentum", 0.9);
  kv.set_long("batch_size", pretrain ? 1536 : 256);
  kv.set_bool("spec_augment", true);
  kv.set_bool("augment_video", true);
  kv.set_long("beam_size", 4);
  kv.set_double("beam_alpha", 0.6);
  return kv;
}

}  // namespace

KvConfig KvConfig::parse_text(const std::string& text,
                              const std::string& origin) {
  KvConfig kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw InputError(origin + ":" + std::to_string(lineno) +
                       ": expected key=value, got '" + t + "'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw InputError(origin + ":" + std::to_string(lineno) +
                       ": empty key");
    if (kv.entries_.count(key))
      throw InputError(origin + ":" + std::to_string(lineno) +
                       ": duplicate key '" + key + "'");
    kv.entries_[key] = value;
  }
  return kv;
}

KvConfig KvConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  std::ostringstream body;
  body << in.rdbuf();
  return parse_text(body.str(), path);
}

KvConfig KvConfig::preset(const std::string& name) {
  if (name == "tiny") return tiny_settings();
  if (name == "pretrain-paper" || name == "paper") return paper_settings(true);
  if (name == "finetune-paper") return paper_settings(false);
  throw ConfigError("unknown preset '" + name +
                    "' (presets: tiny, pretrain-paper, finetune-paper)");
}

bool KvConfig::is_preset_name(const std::string& name) {
  return name == "tiny" || name == "paper" || name == "pretrain-paper" ||
         name == "finetune-paper";
}

std::vector<std::string> KvConfig::preset_names() {
  return {"tiny", "pretrain-paper", "finetune-paper"};
}

KvConfig KvConfig::preset_or_file(const std::string& ref) {
  return is_preset_name(ref) ? preset(ref) : load_file(ref);
}

void KvConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

void KvConfig::set_long(const std::string& key, long value) {
  entries_[key] = std::to_string(value);
}

void KvConfig::set_double(const std::string& key, double value) {
  entries_[key] = fmt_double(value);
}

void KvConfig::set_bool(const std::string& key, bool value) {
  entries_[key] = value ? "true" : "false";
}

void KvConfig::merge_from(const KvConfig& overrides) {
  for (const auto& [k, v] : overrides.entries_) entries_[k] = v;
}

bool KvConfig::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

long KvConfig::get_long(const std::string& key, long fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  errno = 0;
  char* end = nullptr;
  long v = std::strtol(it->second.c_str(), &end, 10);
  if (errno != 0 || end == it->second.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "' wants an integer, got '" +
                      it->second + "'");
  return v;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (errno != 0 || end == it->second.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "' wants a number, got '" +
                      it->second + "'");
  return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "' wants true|false|1|0, got '" +
                    v + "'");
}

std::string KvConfig::render() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << "=" << v << "\n";
  return out.str();
}

void KvConfig::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write config file: " + path);
  out << render();
  if (!out) throw InputError("failed writing config file: " + path);
}

void ensure_known_keys(const KvConfig& kv) {
  for (const auto& [k, v] : kv.entries())
    if (!known_keys().count(k))
      throw ConfigError("unknown config key '" + k + "'");
}

ModelConfig resolve_model_config(const KvConfig& kv) {
  ModelConfig m;
  auto geti = [&](const char* key, int cur) {
    return static_cast<int>(kv.get_long(key, cur));
  };
  m.d_model = geti("d_model", m.d_model);
  m.enc_layers = geti("enc_layers", m.enc_layers);
  m.enc_heads = geti("enc_heads", m.enc_heads);
  m.ff_dim = geti("ff_dim", m.ff_dim);
  m.n_bottleneck = geti("n_bottleneck", m.n_bottleneck);
  m.fusion_layer = geti("fusion_layer", m.fusion_layer);
  m.dec_layers = geti("dec_layers", m.dec_layers);
  m.dec_heads = geti("dec_heads", m.dec_heads);
  m.vocab_size = geti("vocab_size", m.vocab_size);
  m.max_target_len = geti("max_target_len", m.max_target_len);
  m.audio_only = kv.get_bool("audio_only", m.audio_only);
  m.cls_only = kv.get_bool("cls_only", m.cls_only);
  m.n_audio_tokens = geti("n_audio_tokens", m.n_audio_tokens);
  m.n_video_tokens = geti("n_video_tokens", m.n_video_tokens);
  m.audio_token_dim = geti("audio_token_dim", m.audio_token_dim);
  m.video_token_dim = geti("video_token_dim", m.video_token_dim);
  if (m.vocab_size > 0) m.validate();  // vocab arrives later otherwise
  return m;
}

TrainOptions resolve_train_options(const KvConfig& kv) {
  TrainOptions t;
  t.model = resolve_model_config(kv);
  t.mask.strategy =
      parse_mask_strategy(kv.get_string("mask_strategy", "none"));
  t.mask.overall_rate = kv.get_double("mask_rate", t.mask.overall_rate);
  t.mask.content_rate = kv.get_double("content_rate", t.mask.content_rate);
  t.schedule.base_lr = kv.get_double("base_lr", t.schedule.base_lr);
  t.schedule.warmup_iters =
      kv.get_long("warmup_iters", t.schedule.warmup_iters);
  t.schedule.total_iters = kv.get_long("total_iters", t.schedule.total_iters);
  t.schedule.momentum = kv.get_double("momentum", t.schedule.momentum);
  t.batch_size = static_cast<int>(kv.get_long("batch_size", t.batch_size));
  t.seed = static_cast<std::uint64_t>(kv.get_long("seed", 0));
  t.workers = static_cast<int>(kv.get_long("workers", t.workers));
  t.use_spec_augment = kv.get_bool("spec_augment", t.use_spec_augment);
  t.augment_video = kv.get_bool("augment_video", t.augment_video);
  t.init_checkpoint = kv.get_string("init_checkpoint", t.init_checkpoint);
  t.out_dir = kv.get_string("out_dir", t.out_dir);
  t.checkpoint_every = kv.get_long("checkpoint_every", t.checkpoint_every);
  MaskPlan check = t.mask;  // content_rate 0 means "derive from the corpus"
  if (check.strategy == MaskStrategy::content_words &&
      check.content_rate == 0.0)
    check.content_rate = 1.0;
  check.validate();
  t.schedule.validate();
  return t;
}

EvalOptions resolve_eval_options(const KvConfig& kv) {
  EvalOptions e;
  e.model = resolve_model_config(kv);
  e.noise = parse_noise_kind(kv.get_string("noise", "clean"));
  e.snr_db = kv.get_double("snr_db", e.snr_db);
  e.visual = parse_visual_mode(kv.get_string("visual", "real"));
  e.beam_size = static_cast<int>(kv.get_long("beam_size", e.beam_size));
  e.beam_alpha = kv.get_double("beam_alpha", e.beam_alpha);
  e.seed = static_cast<std::uint64_t>(kv.get_long("seed", 0));
  e.workers = static_cast<int>(kv.get_long("workers", e.workers));
  if (e.beam_size < 1) throw ConfigError("beam_size must be >= 1");
  return e;
}

CurationOptions resolve_curation_options(const KvConfig& kv) {
  CurationOptions c;
  c.thresholds.video_wer_pct =
      kv.get_double("video_wer_pct", c.thresholds.video_wer_pct);
  c.thresholds.seg_wer_pct =
      kv.get_double("seg_wer_pct", c.thresholds.seg_wer_pct);
  c.thresholds.nonstop_wer_pct =
      kv.get_double("nonstop_wer_pct", c.thresholds.nonstop_wer_pct);
  c.thresholds.min_words =
      static_cast<int>(kv.get_long("min_words", c.thresholds.min_words));
  long top_k = kv.get_long("top_k", static_cast<long>(c.top_k));
  if (top_k < 0) throw ConfigError("top_k must be >= 0");
  c.top_k = static_cast<size_t>(top_k);
  c.workers = static_cast<int>(kv.get_long("workers", c.workers));
  c.vad_rms_threshold =
      kv.get_double("vad_rms_threshold", c.vad_rms_threshold);
  c.vad_min_silence_s =
      kv.get_double("vad_min_silence_s", c.vad_min_silence_s);
  return c;
}

KvConfig dump_model_config(const ModelConfig& m) {
  KvConfig kv;
  kv.set_long("d_model", m.d_model);
  kv.set_long("enc_layers", m.enc_layers);
  kv.set_long("enc_heads", m.enc_heads);
  kv.set_long("ff_dim", m.ff_dim);
  kv.set_long("n_bottleneck", m.n_bottleneck);
  kv.set_long("fusion_layer", m.fusion_layer);
  kv.set_long("dec_layers", m.dec_layers);
  kv.set_long("dec_heads", m.dec_heads);
  kv.set_long("vocab_size", m.vocab_size);
  kv.set_long("max_target_len", m.max_target_len);
  kv.set_bool("audio_only", m.audio_only);
  kv.set_bool("cls_only", m.cls_only);
  kv.set_long("n_audio_tokens", m.n_audio_tokens);
  kv.set_long("n_video_tokens", m.n_video_tokens);
  kv.set_long("audio_token_dim", m.audio_token_dim);
  kv.set_long("video_token_dim", m.video_token_dim);
  return kv;
}

KvConfig dump_train_options(const TrainOptions& t) {
  KvConfig kv = dump_model_config(t.model);
  kv.set("mask_strategy", mask_strategy_name(t.mask.strategy));
  kv.set_double("mask_rate", t.mask.overall_rate);
  kv.set_double("content_rate", t.mask.content_rate);
  kv.set_double("base_lr", t.schedule.base_lr);
  kv.set_long("warmup_iters", t.schedule.warmup_iters);
  kv.set_long("total_iters", t.schedule.total_iters);
  kv.set_double("momentum", t.schedule.momentum);
  kv.set_long("batch_size", t.batch_size);
  kv.set_long("seed", static_cast<long>(t.seed));
  kv.set_long("workers", t.workers);
  kv.set_bool("spec_augment", t.use_spec_augment);
  kv.set_bool("augment_video", t.augment_video);
  if (!t.init_checkpoint.empty()) kv.set("init_checkpoint", t.init_checkpoint);
  if (!t.out_dir.empty()) kv.set("out_dir", t.out_dir);
  kv.set_long("checkpoint_every", t.checkpoint_every);
  return kv;
}

KvConfig dump_eval_options(const EvalOptions& e) {
  KvConfig kv = dump_model_config(e.model);
  kv.set("noise", noise_kind_name(e.noise));
  kv.set_double("snr_db", e.snr_db);
  kv.set("visual", visual_mode_name(e.visual));
  kv.set_long("beam_size", e.beam_size);
  kv.set_double("beam_alpha", e.beam_alpha);
  kv.set_long("seed", static_cast<long>(e.seed));
  kv.set_long("workers", e.workers);
  return kv;
}

KvConfig dump_curation_options(const CurationOptions& c) {
  KvConfig kv;
  kv.set_double("video_wer_pct", c.thresholds.video_wer_pct);
  kv.set_double("seg_wer_pct", c.thresholds.seg_wer_pct);
  kv.set_double("nonstop_wer_pct", c.thresholds.nonstop_wer_pct);
  kv.set_long("min_words", c.thresholds.min_words);
  kv.set_long("top_k", c.top_k);
  kv.set_long("workers", c.workers);
  kv.set_double("vad_rms_threshold", c.vad_rms_threshold);
  kv.set_double("vad_min_silence_s", c.vad_min_silence_s);
  return kv;
}

}  // namespace avatar
