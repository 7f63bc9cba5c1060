// Release gate: every property the library promises, checked in one binary.
// Each check prints exactly one PASS/FAIL line (with reasons on failure) and
// the exit code is the number of failed checks, so CI and a human read the
// same story. Checks keep running after a failure; later ones that depend on
// an earlier artifact (the overfit model) report the dependency instead.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "avatar/audio.h"
#include "avatar/curation.h"
#include "avatar/evaluation.h"
#include "avatar/manifest.h"
#include "avatar/model.h"
#include "avatar/rng.h"
#include "avatar/tensor.h"
#include "avatar/text.h"
#include "avatar/training.h"
#include "avatar/video.h"
#include "avatar/wav.h"
#include "support/corpus.h"
#include "support/curation_corpus.h"
#include "support/fixtures.h"
#include "support/gradcheck.h"
#include "support/model_fixtures.h"
#include "support/op_gradchecks.h"
#include "support/wer_oracle.h"

namespace {

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return std::string(buf);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

// Collects failure messages for one check; caps the detail spam so a broken
// exhaustive sweep still prints a readable report.
struct CheckContext {
  std::vector<std::string> problems;
  long failed = 0;

  bool expect(bool ok, const std::string& msg) {
    if (ok) return true;
    ++failed;
    if (failed <= 6)
      problems.push_back(msg);
    else if (failed == 7)
      problems.push_back("(further failures suppressed)");
    return false;
  }
};

// Artifacts handed from the overfit check to the noise check.
struct SharedState {
  std::optional<testsupport::SyntheticCorpus> overfit_corpus;
  std::optional<avatar::Params> overfit_params;
  avatar::ModelConfig overfit_cfg;
  double overfit_clean_wer = -1.0;
};

// --- 1: a 25 s clip makes exactly 780 audio tokens, a 224x224 frame pair
//        exactly 196 video tokens --------------------------------------------

void token_counts_check(CheckContext& c, SharedState&) {
  avatar::Waveform w;
  w.samples.resize(25 * avatar::kSampleRateHz);
  for (size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = 0.3 * std::sin(2.0 * std::numbers::pi * 523.0 *
                                  static_cast<double>(i) /
                                  avatar::kSampleRateHz);
  avatar::Tensor audio = avatar::patchify_audio(avatar::log_mel_spectrogram(w));
  c.expect(audio.dim(0) == 780,
           fmt("audio tokens: got %d, want 780", audio.dim(0)));
  c.expect(audio.dim(1) == 256,
           fmt("audio token width: got %d, want 256", audio.dim(1)));

  avatar::FrameStack f;
  for (int k = 0; k < 2; ++k) {
    f.frames[k].height = avatar::kFrameSide;
    f.frames[k].width = avatar::kFrameSide;
    f.frames[k].rgb.assign(
        static_cast<size_t>(avatar::kFrameSide) * avatar::kFrameSide * 3,
        k == 0 ? 0.25 : 0.75);
  }
  f.timestamps_s = {0.0, 0.4};
  avatar::Tensor video = avatar::tubelet_tokenize(f);
  c.expect(video.dim(0) == 196,
           fmt("video tokens: got %d, want 196", video.dim(0)));
  c.expect(video.dim(1) == 1536,
           fmt("video token width: got %d, want 1536", video.dim(1)));
}

// --- 2: every op and the whole tiny-preset model agree with central finite
//        differences ---------------------------------------------------------

void gradient_suite_check(CheckContext& c, SharedState&) {
  for (const auto& op : testsupport::run_op_gradchecks(2026))
    c.expect(op.max_rel_err <= 1e-4,
             fmt("op %s: rel err %.3g > 1e-4", op.name.c_str(),
                 op.max_rel_err));

  avatar::ModelConfig cfg = avatar::ModelConfig::tiny_preset();
  cfg.vocab_size = 11;
  cfg.validate();
  avatar::Rng rng(31);
  avatar::Params params = avatar::Params::init(cfg, rng);
  avatar::Tensor audio = testsupport::rand_tensor(
      {cfg.n_audio_tokens, cfg.audio_token_dim}, rng, false);
  const std::vector<int> target = {4, 7, 5, cfg.eos_id};
  auto loss = [&] {
    return avatar::sequence_loss(
        avatar::encode(audio, std::nullopt, cfg, params), target, cfg, params);
  };
  std::vector<avatar::Tensor> all;
  for (auto& [name, t] : params.table()) all.push_back(t);
  const double err = testsupport::fd_max_rel_err(loss, all);
  c.expect(err <= 1e-3, fmt("whole-model FD rel err %.3g > 1e-3", err));
}

// --- 3: beam 125 on vocab 5 / max length 3 equals the exhaustive
//        length-penalized argmax on 100 random models -------------------------

void beam_oracle_check(CheckContext& c, SharedState&) {
  const avatar::ModelConfig cfg = testsupport::beam_toy_config();
  avatar::NoGradGuard ng;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    avatar::Rng rng(seed);
    avatar::Params params = avatar::Params::init(cfg, rng);
    avatar::Tensor audio = testsupport::rand_tensor(
        {cfg.n_audio_tokens, cfg.audio_token_dim}, rng, false);
    avatar::Tensor video = testsupport::rand_tensor(
        {cfg.n_video_tokens, cfg.video_token_dim}, rng, false);
    avatar::Tensor enc = avatar::encode(audio, video, cfg, params);
    const std::vector<int> got = avatar::beam_search(enc, cfg, params, 125, 0.6);
    const std::vector<int> want = testsupport::beam_oracle(enc, cfg, params, 0.6);
    c.expect(got == want,
             fmt("seed %llu: beam result differs from exhaustive argmax",
                 static_cast<unsigned long long>(seed)));
  }
}

// --- 4: pooled WER error counts equal a brute-force edit distance,
//        exhaustively to length 6 over 3 symbols plus 1000 random longer
//        pairs ---------------------------------------------------------------

void wer_oracle_check(CheckContext& c, SharedState&) {
  const avatar::Stoplist stop = avatar::Stoplist::builtin();
  const std::vector<std::string> alphabet = {"ba", "ku", "ri"};
  const auto seqs = testsupport::all_sequences(alphabet, 6);

  std::vector<avatar::Transcript> hyps;
  hyps.reserve(seqs.size());
  for (const auto& s : seqs) hyps.push_back(avatar::Transcript::from_words(s));

  long pair_count = 0;
  for (const auto& ref : seqs) {
    if (ref.empty()) continue;  // references must carry at least one word
    const std::vector<avatar::Transcript> refs(
        seqs.size(), avatar::Transcript::from_words(ref));
    const avatar::WerBreakdown wb = avatar::corpus_wer(
        refs, hyps, stop, avatar::InsertionSlice::total_only);
    if (!c.expect(wb.per_utterance.size() == seqs.size(),
                  "per-utterance record count diverged"))
      return;
    long want_total = 0;
    for (size_t i = 0; i < seqs.size(); ++i) {
      const long want = testsupport::oracle_edit_distance(ref, seqs[i]);
      want_total += want;
      const auto& rec = wb.per_utterance[i];
      const long got = rec.sub + rec.del + rec.ins;
      c.expect(got == want, fmt("|ref|=%zu |hyp|=%zu: %ld errors, oracle %ld",
                                ref.size(), seqs[i].size(), got, want));
      c.expect(rec.n_ref == static_cast<long>(ref.size()),
               fmt("|ref|=%zu: n_ref recorded as %ld", ref.size(), rec.n_ref));
      ++pair_count;
    }
    c.expect(wb.total.errors() == want_total,
             "pooled totals diverge from the per-utterance sum");
  }
  c.expect(pair_count == 1092L * 1093L,
           fmt("covered %ld exhaustive pairs, want %ld", pair_count,
               1092L * 1093L));

  // Longer random pairs over a wider alphabet.
  avatar::Rng rng(404);
  const std::vector<std::string> wide = {"ba", "ku", "ri", "zo"};
  std::vector<std::vector<std::string>> rref(1000), rhyp(1000);
  std::vector<avatar::Transcript> refs, rand_hyps;
  for (int k = 0; k < 1000; ++k) {
    const size_t rl = 7 + rng.uniform_int(8);  // 7..14 words
    const size_t hl = rng.uniform_int(17);     // 0..16 words
    for (size_t i = 0; i < rl; ++i)
      rref[static_cast<size_t>(k)].push_back(wide[rng.uniform_int(wide.size())]);
    for (size_t i = 0; i < hl; ++i)
      rhyp[static_cast<size_t>(k)].push_back(wide[rng.uniform_int(wide.size())]);
    refs.push_back(avatar::Transcript::from_words(rref[static_cast<size_t>(k)]));
    rand_hyps.push_back(
        avatar::Transcript::from_words(rhyp[static_cast<size_t>(k)]));
  }
  const avatar::WerBreakdown wb = avatar::corpus_wer(
      refs, rand_hyps, stop, avatar::InsertionSlice::total_only);
  if (!c.expect(wb.per_utterance.size() == 1000,
                "random-pair record count diverged"))
    return;
  for (size_t k = 0; k < 1000; ++k) {
    const auto& rec = wb.per_utterance[k];
    const long got = rec.sub + rec.del + rec.ins;
    const long want = testsupport::oracle_edit_distance(rref[k], rhyp[k]);
    c.expect(got == want, fmt("random pair %zu: %ld errors, oracle %ld", k,
                              got, want));
  }
}

// --- 5: both masking strategies land on a 0.100 +/- 0.005 overall rate over
//        >= 100k words; the content strategy never touches a stopword --------

void mask_rate_check(CheckContext& c, SharedState&) {
  testsupport::TempDir dir("accept_mask");
  const std::vector<std::string> stop_words = {"the", "a",  "of", "and", "to",
                                               "in",  "is", "it", "that", "was"};
  const std::vector<std::string> content_words = {
      "cat",   "dog",   "tree",  "house", "river",
      "stone", "cloud", "grass", "bird",  "fish"};
  {
    std::ofstream f(dir.file("stop.txt"));
    for (const auto& w : stop_words) f << w << "\n";
  }
  const avatar::Stoplist stop = avatar::Stoplist::from_file(dir.file("stop.txt"));

  const int n_utts = 6000, words_per_utt = 20;
  std::vector<avatar::WordAlignment> aligns(n_utts);
  std::vector<std::string> corpus_words;
  corpus_words.reserve(static_cast<size_t>(n_utts) * words_per_utt);
  avatar::Rng gen(55);
  for (auto& a : aligns) {
    for (int k = 0; k < words_per_utt; ++k) {
      const bool pick_stop = gen.uniform() < 0.5;
      const auto& pool = pick_stop ? stop_words : content_words;
      const std::string& w = pool[gen.uniform_int(pool.size())];
      a.entries.push_back({w, 0.5 * k, 0.5 * k + 0.4});
      corpus_words.push_back(w);
    }
  }
  const double total = static_cast<double>(corpus_words.size());
  c.expect(total >= 100000.0, fmt("corpus holds %.0f words, want >= 100000", total));

  {
    avatar::MaskPlan plan;
    plan.strategy = avatar::MaskStrategy::random_words;
    plan.overall_rate = 0.10;
    avatar::Rng rng(606);
    long picked = 0;
    for (const auto& a : aligns)
      picked += static_cast<long>(
          avatar::select_mask_targets(a, plan, stop, rng).size());
    const double rate = static_cast<double>(picked) / total;
    c.expect(std::fabs(rate - 0.100) <= 0.005,
             fmt("every-word strategy masked %.4f of words, want 0.100 +/- 0.005",
                 rate));
  }
  {
    avatar::MaskPlan plan;
    plan.strategy = avatar::MaskStrategy::content_words;
    plan.overall_rate = 0.10;
    plan.content_rate = avatar::compute_content_rate(corpus_words, stop, 0.10);
    avatar::Rng rng(707);
    long picked = 0, stop_hits = 0;
    for (const auto& a : aligns)
      for (int idx : avatar::select_mask_targets(a, plan, stop, rng)) {
        ++picked;
        if (!avatar::is_content_word(
                a.entries[static_cast<size_t>(idx)].word, stop))
          ++stop_hits;
      }
    const double rate = static_cast<double>(picked) / total;
    c.expect(std::fabs(rate - 0.100) <= 0.005,
             fmt("content strategy masked %.4f of words, want 0.100 +/- 0.005",
                 rate));
    c.expect(stop_hits == 0,
             fmt("content strategy masked %ld stopwords, want 0", stop_hits));
  }
}

// --- 6: burst noise zeroes exactly two intervals, each at most 1 s on a 10 s
//        clip, with uniformly distributed lengths ----------------------------

void burst_contract_check(CheckContext& c, SharedState&) {
  const int n_clips = 1000;
  std::vector<double> lengths;  // in units of the 1.0 s cap
  lengths.reserve(2 * n_clips);
  for (int i = 0; i < n_clips; ++i) {
    avatar::Waveform w;
    w.samples.resize(10 * avatar::kSampleRateHz);
    avatar::Rng sig(9000 + static_cast<std::uint64_t>(i));
    for (auto& x : w.samples) x = sig.uniform(0.2, 0.9);  // never zero

    avatar::NoiseSpec spec;
    spec.kind = avatar::NoiseKind::burst;
    spec.rng_seed = static_cast<std::uint64_t>(i);
    const avatar::Waveform out = avatar::apply_noise(w, spec);

    std::vector<long> runs;
    long run = 0;
    for (double x : out.samples) {
      if (x == 0.0)
        ++run;
      else if (run) {
        runs.push_back(run);
        run = 0;
      }
    }
    if (run) runs.push_back(run);

    if (!c.expect(runs.size() == 2,
                  fmt("clip %d: %zu zeroed intervals, want exactly 2", i,
                      runs.size())))
      continue;
    for (long r : runs) {
      c.expect(r <= avatar::kSampleRateHz,
               fmt("clip %d: interval of %ld samples exceeds 1.0 s", i, r));
      lengths.push_back(static_cast<double>(r) / avatar::kSampleRateHz);
    }
  }

  if (!c.expect(lengths.size() == 2 * n_clips, "interval count short"))
    return;
  std::sort(lengths.begin(), lengths.end());
  const double n = static_cast<double>(lengths.size());
  double d = 0.0;
  for (size_t i = 0; i < lengths.size(); ++i) {
    const double f = std::clamp(lengths[i], 0.0, 1.0);
    d = std::max(d, f - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
  }
  const double crit = 1.6276 / std::sqrt(n);  // alpha = 0.01
  c.expect(d < crit,
           fmt("interval lengths fail uniformity: KS %.4f >= %.4f", d, crit));
}

// --- 7: environment mixing at snr_db=0 measures 0 +/- 0.1 dB ----------------

void snr_contract_check(CheckContext& c, SharedState&) {
  for (int k = 0; k < 100; ++k) {
    avatar::Rng rng(500 + static_cast<std::uint64_t>(k));
    avatar::Waveform w;
    w.samples.resize(static_cast<size_t>(1.5 * avatar::kSampleRateHz));
    for (auto& x : w.samples) x = rng.uniform(-0.5, 0.5);

    avatar::NoiseBank bank;
    avatar::Waveform clip;
    clip.samples.resize(static_cast<size_t>(1.1 * avatar::kSampleRateHz));
    for (auto& x : clip.samples) x = rng.uniform(-0.3, 0.3);
    bank.clips.push_back(std::move(clip));

    avatar::NoiseSpec spec;
    spec.kind = avatar::NoiseKind::environment;
    spec.bank = &bank;
    spec.snr_db = 0.0;
    spec.rng_seed = static_cast<std::uint64_t>(k);
    const avatar::Waveform out = avatar::apply_noise(w, spec);

    double p_sig = 0.0, p_noise = 0.0;
    for (size_t i = 0; i < w.samples.size(); ++i) {
      p_sig += w.samples[i] * w.samples[i];
      const double nz = out.samples[i] - w.samples[i];
      p_noise += nz * nz;
    }
    const double snr = 10.0 * std::log10(p_sig / p_noise);
    c.expect(std::fabs(snr) <= 0.1,
             fmt("pair %d: measured %.4f dB, want 0 +/- 0.1", k, snr));
  }
}

// --- 8: the tiny preset overfits 10 synthetic utterances (loss < 0.1x
//        initial within 300 iterations) and then decodes them at 0% WER ------

void overfit_check(CheckContext& c, SharedState& s) {
  s.overfit_corpus = testsupport::make_tone_corpus(10, 3, 2026, false);
  const auto& corpus = *s.overfit_corpus;
  const avatar::WordpieceVocab vocab = corpus.vocab();
  const avatar::Stoplist stop = avatar::Stoplist::builtin();

  avatar::ModelConfig cfg = avatar::ModelConfig::tiny_preset();
  cfg.vocab_size = vocab.size();
  cfg.validate();

  avatar::TrainOptions opt;
  opt.model = cfg;
  opt.mask.strategy = avatar::MaskStrategy::none;
  opt.batch_size = 4;
  opt.seed = 1;
  opt.workers = 1;
  opt.use_spec_augment = false;
  opt.augment_video = false;
  // default schedule: lr 0.05, 10 warmup iterations, 300 total

  const avatar::TrainResult res =
      avatar::train(corpus.entries, vocab, stop, opt);
  if (!c.expect(!res.losses.empty(), "no training iterations ran")) return;
  c.expect(res.losses.size() <= 300,
           fmt("%zu iterations ran, want <= 300", res.losses.size()));
  const double initial = res.losses.front();
  const double last = res.losses.back();
  c.expect(last < 0.1 * initial,
           fmt("loss %.4f after %zu iterations, needed < %.4f (0.1 x %.4f)",
               last, res.losses.size(), 0.1 * initial, initial));

  avatar::EvalOptions eo;
  eo.model = cfg;
  eo.seed = 0;
  const avatar::WerBreakdown wb =
      avatar::evaluate(corpus.entries, res.params, vocab, stop, eo);
  s.overfit_clean_wer = wb.total.wer_pct();
  c.expect(s.overfit_clean_wer == 0.0,
           fmt("clean WER %.2f%% on the training utterances, want exactly 0",
               s.overfit_clean_wer));

  s.overfit_params = res.params;
  s.overfit_cfg = cfg;
}

// --- 9: mixed noise strictly degrades the overfit model, and an audio-only
//        model's evaluation bytes ignore all video content -------------------

void noise_and_vision_check(CheckContext& c, SharedState& s) {
  if (!s.overfit_params || !s.overfit_corpus) {
    c.expect(false, "needs the trained model from the overfit check");
  } else {
    const auto& corpus = *s.overfit_corpus;
    const avatar::WordpieceVocab vocab = corpus.vocab();
    const avatar::Stoplist stop = avatar::Stoplist::builtin();
    testsupport::TempDir noisedir("accept_noise");
    const avatar::NoiseBank bank =
        avatar::NoiseBank::load_dir(testsupport::make_noise_bank(noisedir, 77));

    avatar::EvalOptions eo;
    eo.model = s.overfit_cfg;
    eo.noise = avatar::NoiseKind::mixed;
    eo.snr_db = 0.0;
    eo.bank = &bank;
    eo.seed = 5;
    const avatar::WerBreakdown noisy =
        avatar::evaluate(corpus.entries, *s.overfit_params, vocab, stop, eo);
    c.expect(noisy.total.wer_pct() > s.overfit_clean_wer,
             fmt("mixed-noise WER %.2f%% not strictly above clean %.2f%%",
                 noisy.total.wer_pct(), s.overfit_clean_wer));
  }

  // Audio-only decode must be bit-invariant to the frame files' content.
  auto av = testsupport::make_tone_corpus(3, 2, 555, true);
  const avatar::WordpieceVocab vocab = av.vocab();
  const avatar::Stoplist stop = avatar::Stoplist::builtin();
  avatar::ModelConfig cfg = avatar::ModelConfig::tiny_preset();
  cfg.vocab_size = vocab.size();
  avatar::Rng rng(99);
  const avatar::Params params = avatar::Params::init(cfg, rng);

  avatar::EvalOptions eo;
  eo.model = cfg;
  eo.seed = 3;
  testsupport::TempDir out("accept_vision");
  auto run_once = [&](const std::string& path) {
    const avatar::WerBreakdown wb =
        avatar::evaluate(av.entries, params, vocab, stop, eo);
    avatar::write_utterance_jsonl(path, wb);
  };
  run_once(out.file("before.jsonl"));
  for (const auto& e : av.entries) {
    const std::vector<avatar::Frame> repaint = {
        testsupport::solid_frame(16, 16, 0.9, 0.1, 0.2),
        testsupport::solid_frame(16, 16, 0.1, 0.8, 0.3),
        testsupport::solid_frame(16, 16, 0.5, 0.5, 0.9)};
    testsupport::write_frames_file(*e.frames_path, repaint, 3.0);
  }
  run_once(out.file("after.jsonl"));
  const std::string before = slurp(out.file("before.jsonl"));
  const std::string after = slurp(out.file("after.jsonl"));
  c.expect(!before.empty(), "audio-only evaluation produced no output");
  c.expect(before == after,
           "audio-only evaluation bytes changed when frame bytes changed");
}

// --- 10: the 40-segment curation corpus matches its hand-computed verdicts,
//         rejection reasons, and review ranking exactly ----------------------

void curation_check(CheckContext& c, SharedState&) {
  const auto corpus = testsupport::make_curation_corpus();
  std::ostringstream log;
  const avatar::CurationOptions opts;
  const avatar::CurationResult result =
      avatar::run_curation(corpus.videos_dir, avatar::Stoplist::builtin(),
                           opts, nullptr, nullptr, &log);

  c.expect(result.videos_seen == 7,
           fmt("saw %ld videos, want 7", result.videos_seen));
  c.expect(result.videos_gated == 2,
           fmt("gated %ld videos, want 2", result.videos_gated));
  if (!c.expect(result.segments.size() == corpus.expected.size(),
                fmt("%zu segments, want %zu", result.segments.size(),
                    corpus.expected.size())))
    return;

  std::map<std::string, int> next_index;
  for (size_t i = 0; i < result.segments.size(); ++i) {
    const auto& got = result.segments[i];
    const auto& want = corpus.expected[i];
    const int pos = next_index[got.video_id]++;
    const bool ok = got.video_id == want.video_id && pos == want.index &&
                    got.verdict == want.verdict && got.reason == want.reason;
    c.expect(ok, fmt("segment %zu (%s#%d): verdict %d reason %s, want %d %s",
                     i, want.video_id.c_str(), want.index,
                     static_cast<int>(got.verdict),
                     avatar::reject_reason_name(got.reason),
                     static_cast<int>(want.verdict),
                     avatar::reject_reason_name(want.reason)));
  }

  std::vector<std::string> review_keys;
  for (const auto& r : result.review)
    review_keys.push_back(
        r.video_id + "#" +
        std::to_string(static_cast<int>(std::lround(r.start_s / 0.9))));
  c.expect(review_keys == corpus.expected_review,
           "review ranking differs from the hand-computed order");
}

// --- 11: the published relative-delta computations reproduce ----------------

void rel_delta_check(CheckContext& c, SharedState&) {
  const auto d1 = avatar::rel_delta(23.39, 22.35);
  const auto d2 = avatar::rel_delta(9.75, 9.79);
  if (!c.expect(d1.has_value() && d2.has_value(),
                "rel_delta undefined on a nonzero baseline"))
    return;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *d1);
  c.expect(std::string(buf) == "4.45",
           fmt("rel_delta(23.39, 22.35) renders %s, want 4.45", buf));
  std::snprintf(buf, sizeof buf, "%.2f", *d2);
  c.expect(std::string(buf) == "-0.41",
           fmt("rel_delta(9.75, 9.79) renders %s, want -0.41", buf));
  // Two-decimal WER inputs carry +/- 0.005 rounding; the published figure
  // -0.33 must sit within the documented +/- 0.15 band of the recomputation.
  c.expect(std::fabs(*d2 - (-0.33)) <= 0.15,
           fmt("recomputed %.4f vs published -0.33 exceeds the 0.15 band",
               *d2));
}

// --- 12: every subcommand is byte-deterministic across repeats and across
//         worker counts ------------------------------------------------------

void determinism_check(CheckContext& c, SharedState&) {
  testsupport::TempDir dir("accept_cli");
  const auto corpus = testsupport::make_tone_corpus(3, 2, 431, false);
  int run_id = 0;

  auto cli = [&](const std::string& args) -> std::string {
    const std::string tag = dir.file("run" + std::to_string(run_id++));
    const std::string cmd = std::string(AVATAR_CLI_PATH) + " " + args + " > " +
                            tag + ".out 2> " + tag + ".err";
    const int rc = std::system(cmd.c_str());
    const int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    if (code != 0) {
      const std::string err = slurp(tag + ".err");
      c.expect(false, fmt("command exited %d: %s | %s", code,
                          args.substr(0, 60).c_str(),
                          err.substr(0, err.find('\n')).c_str()));
    }
    return slurp(tag + ".out");
  };
  auto same_bytes = [&](const std::string& label, const std::string& a,
                        const std::string& b) {
    const std::string ba = slurp(a), bb = slurp(b);
    c.expect(!ba.empty(), label + ": first output is empty or missing");
    c.expect(ba == bb, label + ": outputs differ");
  };

  const std::string small =
      " --set d_model=16 --set enc_layers=1 --set enc_heads=2 --set ff_dim=32"
      " --set n_bottleneck=2 --set fusion_layer=0 --set dec_layers=1"
      " --set dec_heads=2 --set max_target_len=6 --set audio_only=true"
      " --set n_audio_tokens=35 --set base_lr=0.05 --set warmup_iters=1"
      " --set total_iters=6 --set batch_size=2 --set spec_augment=false";

  auto train_cmd = [&](const std::string& out, int workers) {
    return "train --manifest " + corpus.manifest_path + " --vocab " +
           corpus.vocab_path + " --out " + out + " --mask none --seed 7" +
           " --workers " + std::to_string(workers) + small;
  };
  cli(train_cmd(dir.file("t1"), 1));
  cli(train_cmd(dir.file("t2"), 1));
  cli(train_cmd(dir.file("t4"), 4));
  same_bytes("train checkpoint, repeated run", dir.file("t1") + "/model.ckpt",
             dir.file("t2") + "/model.ckpt");
  same_bytes("train checkpoint, workers 1 vs 4",
             dir.file("t1") + "/model.ckpt", dir.file("t4") + "/model.ckpt");
  same_bytes("train loss log, repeated run", dir.file("t1") + "/loss_log.tsv",
             dir.file("t2") + "/loss_log.tsv");
  same_bytes("train loss log, workers 1 vs 4",
             dir.file("t1") + "/loss_log.tsv",
             dir.file("t4") + "/loss_log.tsv");

  auto eval_cmd = [&](const std::string& out, int workers) {
    return "evaluate --checkpoint " + dir.file("t1") + "/model.ckpt" +
           " --manifest " + corpus.manifest_path + " --seed 9 --workers " +
           std::to_string(workers) + " --out " + out;
  };
  cli(eval_cmd(dir.file("e1"), 1));
  cli(eval_cmd(dir.file("e2"), 1));
  cli(eval_cmd(dir.file("e4"), 4));
  same_bytes("evaluate utterances, repeated run",
             dir.file("e1") + "/utterances_clean_a.jsonl",
             dir.file("e2") + "/utterances_clean_a.jsonl");
  same_bytes("evaluate utterances, workers 1 vs 4",
             dir.file("e1") + "/utterances_clean_a.jsonl",
             dir.file("e4") + "/utterances_clean_a.jsonl");
  same_bytes("evaluate results row, repeated run",
             dir.file("e1") + "/results.tsv", dir.file("e2") + "/results.tsv");
  same_bytes("evaluate results row, workers 1 vs 4",
             dir.file("e1") + "/results.tsv", dir.file("e4") + "/results.tsv");

  auto degrade_cmd = [&](const std::string& out) {
    return "degrade --in " + corpus.entries[0].audio_path + " --out " + out +
           " --noise burst --seed 11";
  };
  cli(degrade_cmd(dir.file("g1.wav")));
  cli(degrade_cmd(dir.file("g2.wav")));
  same_bytes("degrade waveform, repeated run", dir.file("g1.wav"),
             dir.file("g2.wav"));

  const auto videos = testsupport::make_curation_corpus();
  auto curate_cmd = [&](const std::string& out, int workers) {
    return "curate --videos " + videos.videos_dir + " --out " + out +
           " --workers " + std::to_string(workers);
  };
  cli(curate_cmd(dir.file("c1"), 1));
  cli(curate_cmd(dir.file("c2"), 1));
  cli(curate_cmd(dir.file("c4"), 4));
  same_bytes("curate segments, repeated run",
             dir.file("c1") + "/segments.jsonl",
             dir.file("c2") + "/segments.jsonl");
  same_bytes("curate segments, workers 1 vs 4",
             dir.file("c1") + "/segments.jsonl",
             dir.file("c4") + "/segments.jsonl");
  same_bytes("curate review ranking, repeated run",
             dir.file("c1") + "/review_topk.jsonl",
             dir.file("c2") + "/review_topk.jsonl");
  same_bytes("curate review ranking, workers 1 vs 4",
             dir.file("c1") + "/review_topk.jsonl",
             dir.file("c4") + "/review_topk.jsonl");

  std::ofstream(dir.file("ref.txt")) << "bay dow gie\nkay moo\n";
  std::ofstream(dir.file("hyp.txt")) << "bay dow nee\nkay moo\n";
  const std::string wer_args =
      "wer --ref " + dir.file("ref.txt") + " --hyp " + dir.file("hyp.txt");
  const std::string w1 = cli(wer_args);
  const std::string w2 = cli(wer_args);
  c.expect(!w1.empty(), "wer output is empty");
  c.expect(w1 == w2, "wer stdout differs between identical runs");
}

}  // namespace

int main() {
  SharedState shared;
  struct Entry {
    int num;
    const char* name;
    double budget_s;
    void (*fn)(CheckContext&, SharedState&);
  };
  const Entry checks[] = {
      {1, "token counts", 1.0, token_counts_check},
      {2, "gradient finite differences", 120.0, gradient_suite_check},
      {3, "beam search vs exhaustive argmax", 60.0, beam_oracle_check},
      {4, "word-error-rate oracle", 60.0, wer_oracle_check},
      {5, "masking-rate statistics", 30.0, mask_rate_check},
      {6, "burst-noise contract", 30.0, burst_contract_check},
      {7, "environment-mixing snr", 30.0, snr_contract_check},
      {8, "overfit sanity", 600.0, overfit_check},
      {9, "noise degrades, vision isolated", 300.0, noise_and_vision_check},
      {10, "curation verdicts", 10.0, curation_check},
      {11, "relative wer delta", 1.0, rel_delta_check},
      {12, "command-line determinism", 300.0, determinism_check},
  };

  int failures = 0;
  for (const auto& e : checks) {
    CheckContext ctx;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      e.fn(ctx, shared);
    } catch (const std::exception& ex) {
      ctx.expect(false, std::string("unhandled exception: ") + ex.what());
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (dt >= e.budget_s)
      ctx.expect(false, fmt("runtime %.2f s exceeds the %.0f s budget", dt,
                            e.budget_s));
    const bool ok = ctx.failed == 0;
    std::printf("%s %2d %-34s %8.2fs\n", ok ? "PASS" : "FAIL", e.num, e.name,
                dt);
    for (const auto& p : ctx.problems) std::printf("       - %s\n", p.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures)
    std::printf("%d of 12 checks failed\n", failures);
  else
    std::printf("all 12 checks passed\n");
  return failures;
}
