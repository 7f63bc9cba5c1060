#pragma once

#include <map>
#include <string>
#include <vector>

#include "avatar/curation.h"
#include "avatar/evaluation.h"
#include "avatar/model.h"
#include "avatar/training.h"

namespace avatar {

// Flat key=value configuration text. Lines are `key = value`; blank lines
// and lines starting with '#' are skipped; a duplicate key within one file
// is an error (later *layers* override via merge_from, duplicates inside a
// single file are almost always typos).
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse_text(const std::string& text,
                             const std::string& origin = "<memory>");
  static KvConfig load_file(const std::string& path);  // InputError

  // Built-in presets: "tiny" (desk-scale), "pretrain-paper" and
  // "finetune-paper" (published hyperparameters; "paper" is accepted as an
  // alias of pretrain-paper). The same settings ship as files in configs/.
  static KvConfig preset(const std::string& name);  // ConfigError on unknown
  static bool is_preset_name(const std::string& name);
  static std::vector<std::string> preset_names();
  // Treats `ref` as a preset name when it is one, else as a file path.
  static KvConfig preset_or_file(const std::string& ref);

  void set(const std::string& key, const std::string& value);
  void set_long(const std::string& key, long value);
  void set_double(const std::string& key, double value);
  void set_bool(const std::string& key, bool value);

  // Values in `overrides` win over this map's.
  void merge_from(const KvConfig& overrides);

  bool has(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const {
    return entries_;
  }

  // Typed access; the fallback is returned when the key is absent. A value
  // that does not parse cleanly throws ConfigError naming the key.
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  long get_long(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;  // true|false|1|0

  // Canonical text: one sorted `key=value` line per entry.
  std::string render() const;
  void write_file(const std::string& path) const;  // InputError

 private:
  std::map<std::string, std::string> entries_;
};

// Rejects keys outside the full documented glossary (catches typos while
// letting one file carry model, training, evaluation, and curation settings
// side by side). Throws ConfigError naming the first offender.
void ensure_known_keys(const KvConfig& kv);

// Struct builders: start from the struct's defaults, apply whichever keys
// are present, validate. Keys from other scopes are ignored, so a training
// sidecar feeds evaluation untouched.
ModelConfig resolve_model_config(const KvConfig& kv);
TrainOptions resolve_train_options(const KvConfig& kv);
EvalOptions resolve_eval_options(const KvConfig& kv);
CurationOptions resolve_curation_options(const KvConfig& kv);

// Inverse direction: every key of the scope written out with its resolved
// value, defaults materialized — the text echoed before a run and written
// next to its outputs.
KvConfig dump_model_config(const ModelConfig& m);
KvConfig dump_train_options(const TrainOptions& t);
KvConfig dump_eval_options(const EvalOptions& e);
KvConfig dump_curation_options(const CurationOptions& c);

}  // namespace avatar
