/* C interface to the audio-visual speech recognition library.
 *
 * Every entry point is safe to call from C or from other languages' FFI.
 * Settings travel in an opaque av_opts handle holding flat key=value pairs
 * (the same keys the config files use; see README for the glossary). Later
 * av_opts_set / av_opts_load calls override earlier values, so callers apply
 * layers in ascending priority: preset or config file first, explicit
 * overrides last.
 *
 * Functions return AV_OK on success. On failure they return a status code
 * and leave a human-readable message in av_last_error(), which is
 * thread-local and valid until the next library call on that thread.
 */
#ifndef AVATAR_AVATAR_H_
#define AVATAR_AVATAR_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum av_status {
  AV_OK = 0,
  AV_ERR_INPUT = 1,    /* bad input data or configuration */
  AV_ERR_INTERNAL = 2, /* contract violation or unexpected failure */
} av_status;

/* Library version as "major.minor.patch". Static storage; do not free. */
const char* av_version(void);

/* Message for the most recent failure on this thread ("" when none). */
const char* av_last_error(void);

/* ---- option handles -------------------------------------------------- */

typedef struct av_opts av_opts;

av_opts* av_opts_new(void);
void av_opts_free(av_opts* opts);

/* Sets one key. Unknown keys are rejected (AV_ERR_INPUT). */
av_status av_opts_set(av_opts* opts, const char* key, const char* value);

/* Merges a built-in preset ("tiny", "pretrain-paper", "finetune-paper") or
 * a config file over the current contents. */
av_status av_opts_load(av_opts* opts, const char* preset_or_path);

/* Renders the fully resolved configuration for a verb ("train", "evaluate",
 * "degrade", "curate"): every default materialized, exactly the text the
 * verb writes next to its outputs. For "evaluate" this folds in the
 * checkpoint's sidecar config when one exists. The result is heap-allocated;
 * release it with av_string_free. */
av_status av_resolved_config(const av_opts* opts, const char* verb,
                             char** out_text);
void av_string_free(char* text);

/* ---- verbs ------------------------------------------------------------ */

/* Trains a model. Required keys: manifest, vocab, out_dir. Writes
 * checkpoints, loss_log.tsv, train.conf, and a <checkpoint>.conf sidecar
 * per checkpoint into out_dir. The optional callback fires once per
 * iteration. */
typedef void (*av_train_callback)(long iter, double loss, double lr,
                                  void* user);
av_status av_train(const av_opts* opts, av_train_callback cb, void* user);

/* Evaluates a checkpoint. Required keys: checkpoint, manifest (vocab and
 * model settings normally arrive via the checkpoint's .conf sidecar).
 * Writes per-utterance results, appends to results.tsv, refreshes
 * results_table.txt, and stores the resolved config, all in out_dir
 * (default: the checkpoint's directory). The pooled word error rate in
 * percent is stored through wer_pct when non-NULL. */
av_status av_evaluate(const av_opts* opts, double* wer_pct);

/* Applies simulated degradation to one audio file. Required keys: in, out,
 * noise (+ noise_bank for environment/mixed). Writes the degraded audio and
 * an <out>.conf sidecar. */
av_status av_degrade(const av_opts* opts);

/* Summary counters filled by av_curate. */
typedef struct av_curate_stats {
  long videos_seen;
  long videos_gated;
  long segments;
  long segments_kept;
  long review;
} av_curate_stats;

/* Runs the dataset curation pipeline. Required keys: videos, out_dir.
 * Writes segments.jsonl, review_topk.jsonl, curation.log, and curate.conf
 * into out_dir. stats may be NULL. */
av_status av_curate(const av_opts* opts, av_curate_stats* stats);

/* Pooled word error rate between two transcript files (one utterance per
 * non-empty line). Percentages are stored through any non-NULL pointer;
 * content/stop slices split on the stoplist (built-in list when
 * stoplist_path is NULL or empty). */
av_status av_wer_files(const char* ref_path, const char* hyp_path,
                       const char* stoplist_path, double* total_pct,
                       double* content_pct, double* stop_pct);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* AVATAR_AVATAR_H_ */
