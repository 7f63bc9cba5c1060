#include "avatar/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "avatar/error.h"
#include "avatar/parallel.h"
#include "avatar/video.h"
#include "avatar/wav.h"
#include "json.hpp"

namespace avatar {

double SliceCounts::wer_pct() const {
  if (n_ref == 0)
    return errors() == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return 100.0 * static_cast<double>(errors()) / static_cast<double>(n_ref);
}

WerBreakdown corpus_wer(const std::vector<Transcript>& refs,
                        const std::vector<Transcript>& hyps,
                        const Stoplist& stoplist, InsertionSlice insertions,
                        const std::vector<std::string>& ids) {
  if (refs.size() != hyps.size())
    throw ContractError("corpus_wer needs matching ref/hyp counts");
  if (!ids.empty() && ids.size() != refs.size())
    throw ContractError("corpus_wer ids must match the utterance count");

  WerBreakdown wb;
  for (size_t u = 0; u < refs.size(); ++u) {
    const auto& ref = refs[u].words;
    const auto& hyp = hyps[u].words;
    if (ref.empty())
      throw ContractError("reference " + std::to_string(u) + " is empty");

    AlignmentResult r = align_words(ref, hyp);

    UtteranceRecord rec;
    rec.id = ids.empty() ? std::to_string(u) : ids[u];
    rec.ref = refs[u].raw;
    rec.hyp = hyps[u].raw;
    rec.sub = r.substitutions;
    rec.del = r.deletions;
    rec.ins = r.insertions;
    rec.n_ref = static_cast<long>(ref.size());
    wb.per_utterance.push_back(std::move(rec));

    wb.total.n_ref += static_cast<long>(ref.size());
    wb.total.sub += r.substitutions;
    wb.total.del += r.deletions;
    wb.total.ins += r.insertions;

    for (const auto& [ri, hi] : r.aligned_pairs) {
      if (ri >= 0) {
        SliceCounts& slice =
            is_content_word(ref[ri], stoplist) ? wb.content : wb.stop;
        if (hi < 0) {
          ++slice.del;
        } else if (ref[ri] != hyp[hi]) {
          ++slice.sub;
        }
      } else if (hi >= 0 && insertions == InsertionSlice::by_hypothesis_word) {
        SliceCounts& slice =
            is_content_word(hyp[hi], stoplist) ? wb.content : wb.stop;
        ++slice.ins;
      }
    }
    for (const auto& w : ref) {
      if (is_content_word(w, stoplist))
        ++wb.content.n_ref;
      else
        ++wb.stop.n_ref;
    }
  }
  return wb;
}

std::optional<double> rel_delta(double wer_a, double wer_av) {
  if (wer_a < 0) throw ContractError("wer_a must be >= 0");
  if (wer_a == 0) return std::nullopt;
  return 100.0 * (wer_a - wer_av) / wer_a;
}

VisualMode parse_visual_mode(const std::string& name) {
  if (name == "real") return VisualMode::real;
  if (name == "none") return VisualMode::none;
  if (name == "shuffled") return VisualMode::shuffled;
  throw ConfigError("unknown visual mode '" + name +
                    "' (expected real|none|shuffled)");
}

const char* visual_mode_name(VisualMode m) {
  switch (m) {
    case VisualMode::real: return "real";
    case VisualMode::none: return "none";
    case VisualMode::shuffled: return "shuffled";
  }
  throw ContractError("unhandled visual mode");
}

namespace {

// Stream salts for per-utterance forks; documented in the README.
constexpr std::uint64_t kNoiseStream = 0x100000000ull;
constexpr std::uint64_t kFrameStream = 0x200000000ull;
constexpr std::uint64_t kShuffleStream = 3;

std::vector<size_t> derangement(size_t n, Rng& rng) {
  std::vector<size_t> perm(n);
  while (true) {
    for (size_t i = 0; i < n; ++i) perm[i] = i;
    for (size_t i = n; i > 1; --i)
      std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
    bool any_fixed = false;
    for (size_t i = 0; i < n; ++i)
      if (perm[i] == i) {
        any_fixed = true;
        break;
      }
    if (!any_fixed) return perm;
  }
}

}  // namespace

WerBreakdown evaluate(const std::vector<ManifestEntry>& entries,
                      const Params& params, const WordpieceVocab& vocab,
                      const Stoplist& stoplist, const EvalOptions& opts) {
  ModelConfig cfg = opts.model;
  if (opts.visual == VisualMode::none) cfg.audio_only = true;
  cfg.validate();
  if (cfg.vocab_size != vocab.size())
    throw ConfigError("model vocab_size does not match the vocabulary");
  if (entries.empty()) throw ConfigError("manifest is empty");
  if (opts.visual == VisualMode::shuffled && entries.size() < 2)
    throw ConfigError("shuffled visual mode needs at least 2 entries");
  if ((opts.noise == NoiseKind::environment || opts.noise == NoiseKind::mixed) &&
      opts.bank == nullptr)
    throw ConfigError("environment/mixed noise needs a noise bank");

  Rng root(opts.seed);
  std::vector<size_t> frame_source(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) frame_source[i] = i;
  if (opts.visual == VisualMode::shuffled) {
    Rng shuffle_rng = root.fork(kShuffleStream);
    frame_source = derangement(entries.size(), shuffle_rng);
  }

  const size_t n = entries.size();
  std::vector<Transcript> refs(n), hyps(n);
  std::vector<std::string> ids(n);

  parallel_for(static_cast<long>(n), opts.workers, [&](long li) {
    size_t i = static_cast<size_t>(li);
    const ManifestEntry& e = entries[i];
    NoGradGuard ng;

    NoiseSpec noise;
    noise.kind = opts.noise;
    noise.bank = opts.bank;
    noise.snr_db = opts.snr_db;
    noise.rng_seed = root.fork(kNoiseStream + i).seed();
    Waveform w = apply_noise(read_audio(e.audio_path), noise);

    Spectrogram spec = log_mel_spectrogram(w);
    Tensor audio_tokens = patchify_audio(spec);
    if (cfg.n_audio_tokens != audio_tokens.dim(0))
      audio_tokens = slice_rows(audio_tokens, 0, cfg.n_audio_tokens);

    std::optional<Tensor> video_tokens;
    if (!cfg.audio_only) {
      const ManifestEntry& source = entries[frame_source[i]];
      if (!source.frames_path)
        throw InputError("entry '" + source.id +
                         "' has no frames_path but the model wants video");
      ClipSource clip = ClipSource::open(*source.frames_path);
      Rng frame_rng = root.fork(kFrameStream + i);
      FrameStack frames = sample_frames(clip, frame_rng);
      Tensor vt = tubelet_tokenize(frames);
      if (cfg.n_video_tokens != vt.dim(0))
        vt = slice_rows(vt, 0, cfg.n_video_tokens);
      video_tokens = std::move(vt);
    }

    Tensor enc = encode(audio_tokens, video_tokens, cfg, params);
    std::vector<int> out =
        beam_search(enc, cfg, params, opts.beam_size, opts.beam_alpha);
    hyps[i] = Transcript::from_raw(vocab.decode(out));
    refs[i] = Transcript::from_raw(e.transcript);
    ids[i] = e.id;
  });

  return corpus_wer(refs, hyps, stoplist, opts.insertions, ids);
}

void write_utterance_jsonl(const std::string& path, const WerBreakdown& wb) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write per-utterance report: " + path);
  for (const auto& r : wb.per_utterance) {
    nlohmann::json j;
    j["id"] = r.id;
    j["ref"] = r.ref;
    j["hyp"] = r.hyp;
    j["sub"] = r.sub;
    j["del"] = r.del;
    j["ins"] = r.ins;
    j["n_ref"] = r.n_ref;
    out << j.dump() << "\n";
  }
  if (!out) throw InputError("failed writing per-utterance report: " + path);
}

void append_result_row(const std::string& results_path,
                       const std::string& strategy, const std::string& noise,
                       const std::string& modality, double wer_pct) {
  std::ofstream out(results_path, std::ios::app);
  if (!out) throw InputError("cannot append to results file: " + results_path);
  char line[256];
  std::snprintf(line, sizeof(line), "%s\t%s\t%s\t%.6f", strategy.c_str(),
                noise.c_str(), modality.c_str(), wer_pct);
  out << line << "\n";
}

std::string render_results_table(const std::string& results_path) {
  std::ifstream in(results_path);
  if (!in) throw InputError("cannot open results file: " + results_path);

  // (strategy, noise) -> modality -> latest WER
  std::map<std::string, std::map<std::string, std::map<std::string, double>>>
      cells;
  std::vector<std::string> strategies;  // in first-seen order
  std::vector<std::string> noises;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string strategy, noise, modality, wer_text;
    if (!std::getline(row, strategy, '\t') || !std::getline(row, noise, '\t') ||
        !std::getline(row, modality, '\t') || !std::getline(row, wer_text))
      throw InputError(results_path + ":" + std::to_string(line_no) +
                       ": expected strategy<TAB>noise<TAB>modality<TAB>wer");
    double wer = 0;
    try {
      wer = std::stod(wer_text);
    } catch (const std::exception&) {
      throw InputError(results_path + ":" + std::to_string(line_no) +
                       ": bad WER value '" + wer_text + "'");
    }
    if (!cells.count(strategy)) strategies.push_back(strategy);
    if (std::find(noises.begin(), noises.end(), noise) == noises.end())
      noises.push_back(noise);
    cells[strategy][noise][modality] = wer;
  }

  std::ostringstream out;
  out << "WER (%) by training strategy and evaluation noise; each cell "
         "reads A / A+V / rel-delta.\n\n";
  out << "strategy";
  for (const auto& nz : noises) out << "\t" << nz;
  out << "\n";
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  for (const auto& st : strategies) {
    out << st;
    for (const auto& nz : noises) {
      out << "\t";
      const auto& mods = cells[st].count(nz) ? cells[st][nz]
                                             : std::map<std::string, double>{};
      bool has_a = mods.count("A");
      bool has_av = mods.count("A+V");
      out << (has_a ? fmt(mods.at("A")) : std::string("-")) << " / "
          << (has_av ? fmt(mods.at("A+V")) : std::string("-")) << " / ";
      if (has_a && has_av) {
        auto rd = rel_delta(mods.at("A"), mods.at("A+V"));
        out << (rd ? fmt(*rd) : std::string("n/a"));
      } else {
        out << "-";
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace avatar
