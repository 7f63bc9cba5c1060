#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "avatar/audio.h"
#include "avatar/manifest.h"
#include "avatar/rng.h"
#include "avatar/text.h"
#include "avatar/video.h"
#include "avatar/wav.h"
#include "fixtures.h"

namespace testsupport {

// Tone-coded speech: every vocabulary word is a pure tone, an utterance is a
// chain of 0.4 s tones with 0.1 s gaps, and the frames file is a solid color
// keyed to the first word. Exact alignments come for free.
struct SyntheticCorpus {
  std::unique_ptr<TempDir> dir;
  std::vector<avatar::ManifestEntry> entries;  // media paths fully resolved
  std::string manifest_path;
  std::string vocab_path;

  static const std::vector<std::string>& words() {
    static const std::vector<std::string> w = {"bay", "dow", "gie",
                                               "kay", "moo", "nee"};
    return w;
  }
  static double tone_hz(size_t word_idx) {
    static const double hz[] = {350, 620, 950, 1400, 1950, 2600};
    return hz[word_idx];
  }

  avatar::WordpieceVocab vocab() const {
    return avatar::WordpieceVocab::load_file(vocab_path);
  }
};

inline SyntheticCorpus make_tone_corpus(int n_utts, int words_per_utt,
                                        uint64_t seed, bool with_video) {
  SyntheticCorpus c;
  c.dir = std::make_unique<TempDir>("corpus");
  avatar::Rng rng(seed);

  {
    std::ofstream v(c.dir->file("vocab.txt"));
    v << "[PAD]\n[UNK]\n[BOS]\n[EOS]\n";
    for (const auto& w : SyntheticCorpus::words()) v << w << "\n";
  }
  c.vocab_path = c.dir->file("vocab.txt");

  const double kWord = 0.4, kGap = 0.1;
  for (int u = 0; u < n_utts; ++u) {
    std::vector<size_t> word_ids(static_cast<size_t>(words_per_utt));
    for (auto& id : word_ids)
      id = static_cast<size_t>(
          rng.uniform_int(SyntheticCorpus::words().size()));

    double dur = words_per_utt * (kWord + kGap);
    avatar::Waveform w;
    w.samples.assign(
        static_cast<size_t>(std::llround(dur * avatar::kSampleRateHz)), 0.0);
    avatar::WordAlignment align;
    std::string transcript;
    for (int k = 0; k < words_per_utt; ++k) {
      double t0 = k * (kWord + kGap);
      double hz = SyntheticCorpus::tone_hz(word_ids[k]);
      long long s0 = std::llround(t0 * avatar::kSampleRateHz);
      long long s1 = std::llround((t0 + kWord) * avatar::kSampleRateHz);
      for (long long s = s0; s < s1; ++s)
        w.samples[static_cast<size_t>(s)] =
            0.4 * std::sin(2.0 * std::numbers::pi * hz *
                           static_cast<double>(s) / avatar::kSampleRateHz);
      const std::string& word = SyntheticCorpus::words()[word_ids[k]];
      if (k) transcript += " ";
      transcript += word;
      align.entries.push_back({word, t0, t0 + kWord});
    }

    avatar::ManifestEntry e;
    e.id = "utt" + std::to_string(u);
    e.audio_path = c.dir->file(e.id + ".wav");
    avatar::write_audio(e.audio_path, w);
    e.transcript = transcript;
    e.alignment = align;
    e.duration_s = dur;

    if (with_video) {
      double shade = 0.15 + 0.7 * static_cast<double>(word_ids[0]) /
                                static_cast<double>(
                                    SyntheticCorpus::words().size());
      std::vector<avatar::Frame> frames = {solid_frame(8, 8, shade, 0.5, 1.0 - shade),
                                           solid_frame(8, 8, shade, 0.6, 1.0 - shade)};
      e.frames_path = c.dir->file(e.id + ".frames");
      write_frames_file(*e.frames_path, frames, 5.0);
    }
    c.entries.push_back(std::move(e));
  }

  c.manifest_path = c.dir->file("manifest.jsonl");
  avatar::write_manifest(c.manifest_path, c.entries);
  return c;
}

// A couple of band-limited noise recordings for environment mixing.
inline std::string make_noise_bank(TempDir& dir, uint64_t seed) {
  avatar::Rng rng(seed);
  std::string bank = dir.file("bank");
  std::filesystem::create_directories(bank);
  for (int k = 0; k < 2; ++k) {
    avatar::Waveform w = noise_clip(2.0 + k, rng, 0.3);
    avatar::write_audio(bank + "/noise" + std::to_string(k) + ".wav", w);
  }
  return bank;
}

}  // namespace testsupport
