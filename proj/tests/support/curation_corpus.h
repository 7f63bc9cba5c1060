#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "avatar/curation.h"
#include "avatar/wav.h"
#include "fixtures.h"

namespace testsupport {

// A constructed curation corpus of exactly 40 segments that lands on both
// sides of every filter threshold, with the verdict of each segment worked
// out by hand. Audio is 0.4 s tone bursts separated by 0.5 s of silence, so
// the reference VAD recovers segment k at [0.9k, 0.9k + 0.4).
struct ExpectedSegment {
  std::string video_id;
  int index;  // position among the video's segments
  avatar::Verdict verdict;
  avatar::RejectReason reason;
};

struct CurationCorpus {
  std::unique_ptr<TempDir> dir;
  std::string videos_dir;
  std::vector<ExpectedSegment> expected;          // all 40, in output order
  std::vector<std::string> expected_review;       // "video_id#index", ranked
};

namespace curation_detail {

using WordList = std::vector<std::string>;

// n distinct content words: prefix0, prefix1, ...
inline WordList cw(const std::string& prefix, int n) {
  WordList out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Copy with the first k words replaced by fresh out-of-vocabulary words.
inline WordList subs(WordList w, int k, const std::string& tag = "sx") {
  for (int i = 0; i < k; ++i) w[static_cast<size_t>(i)] = tag + std::to_string(i);
  return w;
}

inline WordList cat(WordList a, const WordList& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

struct SegSpec {
  WordList user;
  WordList asr;
  avatar::Verdict verdict;
  avatar::RejectReason reason;
};

inline SegSpec seg(WordList user, WordList asr, avatar::Verdict v,
                   avatar::RejectReason r = avatar::RejectReason::none) {
  return {std::move(user), std::move(asr), v, r};
}

// Writes one video directory: burst-per-segment audio plus timed user/asr
// transcripts whose word midpoints fall inside their segment's span.
inline void write_video(const std::string& dir, const std::string& id,
                        const std::vector<SegSpec>& segs, bool empty_user,
                        const WordList& keywords) {
  namespace fs = std::filesystem;
  const std::string vdir = dir + "/" + id;
  fs::create_directories(vdir);

  const double kBurst = 0.4, kGap = 0.5;
  avatar::Waveform w;
  w.samples.assign(
      static_cast<size_t>(std::llround(
          (segs.size() * (kBurst + kGap)) * avatar::kSampleRateHz)),
      0.0);
  for (size_t k = 0; k < segs.size(); ++k) {
    long long s0 = std::llround(k * (kBurst + kGap) * avatar::kSampleRateHz);
    long long s1 = s0 + std::llround(kBurst * avatar::kSampleRateHz);
    for (long long s = s0; s < s1; ++s)
      w.samples[static_cast<size_t>(s)] =
          0.3 * std::sin(2.0 * std::numbers::pi * 440.0 *
                         static_cast<double>(s) / avatar::kSampleRateHz);
  }
  avatar::write_audio(vdir + "/audio.wav", w);

  auto write_rows = [&](const std::string& path, bool user_side) {
    std::ofstream out(path);
    for (size_t k = 0; k < segs.size(); ++k) {
      const WordList& words = user_side ? segs[k].user : segs[k].asr;
      for (size_t j = 0; j < words.size(); ++j) {
        char row[128];
        double t0 = k * (kBurst + kGap) + 0.01 * static_cast<double>(j);
        std::snprintf(row, sizeof(row), "%s %.4f %.4f\n", words[j].c_str(),
                      t0, t0 + 0.005);
        out << row;
      }
    }
  };
  if (empty_user)
    std::ofstream(vdir + "/user.txt");  // present but empty
  else
    write_rows(vdir + "/user.txt", true);
  write_rows(vdir + "/asr.txt", false);

  if (!keywords.empty()) {
    std::ofstream kw(vdir + "/keywords.txt");
    for (const auto& word : keywords) kw << word << "\n";
  }
}

}  // namespace curation_detail

inline CurationCorpus make_curation_corpus() {
  using namespace curation_detail;
  using avatar::RejectReason;
  using avatar::Verdict;
  const auto kept = Verdict::kept;
  const auto rej = Verdict::rejected;

  CurationCorpus c;
  c.dir = std::make_unique<TempDir>("curation");
  c.videos_dir = c.dir->file("videos");
  std::filesystem::create_directories(c.videos_dir);

  const WordList stops9 = {"the", "a", "of", "to", "in", "on", "at", "is", "it"};
  const WordList stops8(stops9.begin(), stops9.begin() + 8);

  // v01: 3 user words vs 8 unrelated ASR words -> video WER (3 sub + 5 ins)/3
  // = 266.67% > 100% -> the whole video is gated out.
  std::vector<SegSpec> v01 = {
      seg({"alpha", "beta", "gamma"}, cw("za", 3), rej,
          RejectReason::video_wer_gt_100),
      seg({}, cw("zb", 3), rej, RejectReason::video_wer_gt_100),
      seg({}, cw("zc", 2), rej, RejectReason::video_wer_gt_100),
  };

  // v02: empty user transcript -> degenerate, gated with its own reason.
  std::vector<SegSpec> v02 = {
      seg({}, cw("ya", 3), rej, RejectReason::empty_user),
      seg({}, cw("yb", 3), rej, RejectReason::empty_user),
  };

  // v03: every word substituted -> video WER exactly 100%, which the strict
  // gate keeps; each segment is then 100% > 50% at the segment level.
  std::vector<SegSpec> v03 = {
      seg(cw("ea", 4), cw("eax", 4), rej, RejectReason::seg_wer_gt_50),
      seg(cw("eb", 4), cw("ebx", 4), rej, RejectReason::seg_wer_gt_50),
  };

  // v04: the segment-filter boundary battery.
  std::vector<SegSpec> v04;
  // 0: 6 subs / 10 = 60% > 50.
  v04.push_back(seg(cw("aa", 10), subs(cw("aa", 10), 6), rej,
                    RejectReason::seg_wer_gt_50));
  // 1: 5 subs / 10 = exactly 50% (kept: strict >); non-stop 4/8 = 50%.
  {
    WordList u = cat(cw("bb", 8), {"the", "a"});
    WordList a = subs(cw("bb", 8), 4);
    a = cat(a, {"onn", "a"});
    v04.push_back(seg(u, a, kept));
  }
  // 2: 6 subs / 11 = 54.5% > 50.
  v04.push_back(seg(cw("cc", 11), subs(cw("cc", 11), 6), rej,
                    RejectReason::seg_wer_gt_50));
  // 3: identical 12 words -> non-stop 0% < 20 (too clean).
  {
    WordList u = cat(cw("dd", 10), {"the", "a"});
    v04.push_back(seg(u, u, rej, RejectReason::nonstop_wer_lt_20));
  }
  // 4: subs on both stops + 1 content: WER 25%, non-stop 1/10 = 10% < 20.
  {
    WordList u = cat(cw("ee", 10), {"the", "a"});
    WordList a = cat(subs(cw("ee", 10), 1, "eex"), {"onn", "ann"});
    v04.push_back(seg(u, a, rej, RejectReason::nonstop_wer_lt_20));
  }
  // 5: 2 content subs of 10 content refs -> non-stop exactly 20% (kept).
  {
    WordList u = cat(cw("ff", 10), {"the", "a"});
    WordList a = cat(subs(cw("ff", 10), 2, "ffx"), {"the", "a"});
    v04.push_back(seg(u, a, kept));
  }
  // 6: 1 content sub of 6 content refs -> 16.67% < 20.
  {
    WordList u = cat(cw("gg", 6), {"the", "a", "of", "to", "in", "on"});
    WordList a = cat(subs(cw("gg", 6), 1, "ggx"),
                     {"the", "a", "of", "to", "in", "on"});
    v04.push_back(seg(u, a, rej, RejectReason::nonstop_wer_lt_20));
  }
  // 7: 8 words with healthy WERs -> too short.
  {
    WordList u = cat(cw("hh", 5), {"the", "a", "of"});
    WordList a = cat(subs(cw("hh", 5), 2, "hhx"), {"the", "a", "of"});
    v04.push_back(seg(u, a, rej, RejectReason::too_short));
  }
  // 8: exactly 9 words (kept: strict <).
  {
    WordList u = cat(cw("ii", 5), {"the", "a", "of", "to"});
    WordList a = cat(subs(cw("ii", 5), 2, "iix"), {"the", "a", "of", "to"});
    v04.push_back(seg(u, a, kept));
  }
  // 9: 8 identical words -> too-clean fires before too-short.
  {
    WordList u = cat(cw("jj", 5), {"the", "a", "of"});
    v04.push_back(seg(u, u, rej, RejectReason::nonstop_wer_lt_20));
  }
  // 10: single stopword -> too-clean check skipped (logged), too short.
  v04.push_back(seg({"the"}, {"the"}, rej, RejectReason::too_short));
  // 11: 9 identical stopwords -> check skipped, kept.
  v04.push_back(seg(stops9, stops9, kept));
  // 12: 8 identical stopwords -> check skipped, too short.
  v04.push_back(seg(stops8, stops8, rej, RejectReason::too_short));
  // 13: nothing in the user span but 2 ASR words -> WER +inf > 50.
  v04.push_back(seg({}, cw("kk", 2), rej, RejectReason::seg_wer_gt_50));
  // 14: empty on both sides -> WER 0, zero words, too short.
  v04.push_back(seg({}, {}, rej, RejectReason::too_short));

  // v05: six kept segments with planted keyword overlaps 1.0 .. 0.0.
  std::vector<SegSpec> v05;
  WordList v05_keywords;
  const int hits[] = {10, 8, 6, 4, 2, 0};
  for (int j = 0; j < 6; ++j) {
    WordList u = cw("r" + std::to_string(j) + "w", 10);
    v05.push_back(seg(u, subs(u, 3, "r" + std::to_string(j) + "x"), kept));
    for (int h = 0; h < hits[j]; ++h) v05_keywords.push_back(u[static_cast<size_t>(h)]);
  }

  // v06: deletion- and insertion-shaped errors against the same thresholds.
  std::vector<SegSpec> v06;
  {
    WordList u = cw("mm", 10);
    v06.push_back(seg(u, WordList(u.begin(), u.begin() + 4), rej,
                      RejectReason::seg_wer_gt_50));  // 6 deletions, 60%
  }
  v06.push_back(seg(cw("nn", 10), cat(cw("nn", 10), cw("nnx", 6)), rej,
                    RejectReason::seg_wer_gt_50));  // 6 insertions, 60%
  // 5 insertions = 50% exactly passes quality, but insertions sit on no
  // reference position, so non-stop WER is 0% -> too clean.
  v06.push_back(seg(cw("oo", 10), cat(cw("oo", 10), cw("oox", 5)), rej,
                    RejectReason::nonstop_wer_lt_20));
  // 2 content deletions of 10 content refs -> non-stop exactly 20%, kept.
  {
    WordList u = cat(cw("pp", 10), {"the", "a"});
    WordList a = WordList(u.begin() + 2, u.end());
    a[a.size() - 2] = "onn";  // "the" -> sub
    v06.push_back(seg(u, a, kept));
  }

  // v07: bulk mix of all reasons.
  std::vector<SegSpec> v07 = {
      seg(cw("qq", 10), subs(cw("qq", 10), 3, "qqx"), kept),
      seg(cw("rr", 10), subs(cw("rr", 10), 4, "rrx"), kept),
      seg(cw("ss", 12), subs(cw("ss", 12), 9, "ssx"), rej,
          RejectReason::seg_wer_gt_50),
      seg(cw("tt", 10), subs(cw("tt", 10), 10, "ttx"), rej,
          RejectReason::seg_wer_gt_50),
      seg(cw("uu", 20), subs(cw("uu", 20), 1, "uux"), rej,
          RejectReason::nonstop_wer_lt_20),
      seg(cw("vv", 20), subs(cw("vv", 20), 3, "vvx"), rej,
          RejectReason::nonstop_wer_lt_20),
      seg(cat(cw("ww", 4), {"the", "a", "of"}),
          cat(subs(cw("ww", 4), 1, "wwx"), {"the", "a", "of"}), rej,
          RejectReason::too_short),
      seg(cat(cw("xx", 3), {"the", "a"}),
          cat(subs(cw("xx", 3), 1, "xxx"), {"the", "a"}), rej,
          RejectReason::too_short),
  };

  struct VideoSpec {
    std::string id;
    const std::vector<SegSpec>* segs;
    bool empty_user;
    const WordList* keywords;
  };
  const WordList no_keywords;
  std::vector<VideoSpec> videos = {
      {"v01_gate", &v01, false, &no_keywords},
      {"v02_empty", &v02, true, &no_keywords},
      {"v03_edge", &v03, false, &no_keywords},
      {"v04_filters", &v04, false, &no_keywords},
      {"v05_ranked", &v05, false, &v05_keywords},
      {"v06_errors", &v06, false, &no_keywords},
      {"v07_mixed", &v07, false, &no_keywords},
  };

  for (const auto& v : videos) {
    write_video(c.videos_dir, v.id, *v.segs, v.empty_user, *v.keywords);
    for (size_t k = 0; k < v.segs->size(); ++k)
      c.expected.push_back({v.id, static_cast<int>(k), (*v.segs)[k].verdict,
                            (*v.segs)[k].reason});
  }

  // Ranked review: planted scores first, then the zero-overlap kept records
  // ordered by (video_id, start).
  c.expected_review = {
      "v05_ranked#0", "v05_ranked#1", "v05_ranked#2",  "v05_ranked#3",
      "v05_ranked#4", "v04_filters#1", "v04_filters#5", "v04_filters#8",
      "v04_filters#11", "v05_ranked#5", "v06_errors#3", "v07_mixed#0",
      "v07_mixed#1",
  };
  return c;
}

}  // namespace testsupport
