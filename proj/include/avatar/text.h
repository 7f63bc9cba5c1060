#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace avatar {

// Scoring-side normalization, applied identically to references and
// hypotheses: lowercase, strip punctuation except apostrophes, collapse
// whitespace.
std::string normalize_text(const std::string& raw);

struct Transcript {
  std::string raw;                  // original string
  std::vector<std::string> words;  // whitespace split of normalize_text(raw)

  static Transcript from_raw(const std::string& raw);
  // For words that are already normalized (e.g. decoder output).
  static Transcript from_words(std::vector<std::string> words);
};

struct AlignedWord {
  std::string word;
  double start_s = 0;
  double end_s = 0;
};

// Forced alignment for one utterance. Alignments are consumed from manifests,
// never computed here.
struct WordAlignment {
  std::vector<AlignedWord> entries;

  // Throws InputError unless entries are sorted, non-overlapping, and fit in
  // [0, clip_duration_s].
  void validate(double clip_duration_s) const;
};

// Wordpiece inventory with BERT-style "##" continuation pieces. File format:
// one piece per line, id = line number. [PAD], [UNK], [BOS], [EOS] required.
class WordpieceVocab {
 public:
  static WordpieceVocab load_file(const std::string& path);
  static WordpieceVocab from_pieces(std::vector<std::string> pieces);

  int size() const { return static_cast<int>(pieces_.size()); }
  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int bos_id() const { return bos_; }
  int eos_id() const { return eos_; }

  const std::string& piece(int id) const;
  std::optional<int> id_of(const std::string& piece) const;

  // Greedy longest-match-first per word; words with no cover (or longer than
  // 100 chars) become the unknown id. Normalizes the text first.
  std::vector<int> encode(const std::string& text) const;

  // Inverse of encode up to unknown substitutions. Specials other than [UNK]
  // are dropped.
  std::string decode(const std::vector<int>& ids) const;

 private:
  WordpieceVocab() = default;
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> ids_;
  int pad_ = -1, unk_ = -1, bos_ = -1, eos_ = -1;
};

class Stoplist {
 public:
  // Bundled English list, one word per line in data/stopwords_en.txt and
  // compiled in here so binaries work without the data directory.
  static Stoplist builtin();
  static Stoplist from_file(const std::string& path);

  bool contains(const std::string& lowercase_word) const {
    return words_.count(lowercase_word) != 0;
  }
  int size() const { return static_cast<int>(words_.size()); }

 private:
  std::unordered_set<std::string> words_;
};

// True iff lowercase(word) is not a stopword. Empty words are rejected.
bool is_content_word(const std::string& word, const Stoplist& stoplist);

struct AlignmentResult {
  long matches = 0;
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  // One entry per backtrace step in reference order: (ref index, hyp index),
  // -1 on the side an insertion/deletion is missing from.
  std::vector<std::pair<int, int>> aligned_pairs;

  long distance() const { return substitutions + deletions + insertions; }
};

// Minimal-unit-cost Levenshtein alignment with deterministic backtrace
// (preference: match > substitution > deletion > insertion).
AlignmentResult align_words(const std::vector<std::string>& ref,
                            const std::vector<std::string>& hyp);

}  // namespace avatar
