#include "avatar/text.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "avatar/error.h"

namespace avatar {

namespace {

bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c >= 0x80;  // keep UTF-8 tails
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(std::move(w));
  return out;
}

}  // namespace

std::string normalize_text(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (is_word_char(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

Transcript Transcript::from_raw(const std::string& raw) {
  Transcript t;
  t.raw = raw;
  t.words = split_ws(normalize_text(raw));
  return t;
}

Transcript Transcript::from_words(std::vector<std::string> words) {
  Transcript t;
  for (const auto& w : words) {
    if (w.empty()) throw ContractError("Transcript: empty word");
    if (!t.raw.empty()) t.raw.push_back(' ');
    t.raw += w;
  }
  t.words = std::move(words);
  return t;
}

void WordAlignment::validate(double clip_duration_s) const {
  double prev_end = 0.0;
  for (const auto& e : entries) {
    if (e.word.empty()) throw InputError("alignment: empty word");
    if (e.start_s < prev_end)
      throw InputError("alignment: entries overlap or are unsorted at '" +
                       e.word + "'");
    if (e.end_s <= e.start_s)
      throw InputError("alignment: non-positive span for '" + e.word + "'");
    if (e.end_s > clip_duration_s)
      throw InputError("alignment: '" + e.word + "' ends after the clip");
    prev_end = e.end_s;
  }
}

WordpieceVocab WordpieceVocab::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open vocab file: " + path);
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pieces.push_back(line);
  }
  // A trailing newline produces one empty tail entry; drop it.
  while (!pieces.empty() && pieces.back().empty()) pieces.pop_back();
  return from_pieces(std::move(pieces));
}

WordpieceVocab WordpieceVocab::from_pieces(std::vector<std::string> pieces) {
  if (pieces.empty()) throw ConfigError("vocab: no pieces");
  WordpieceVocab v;
  v.pieces_ = std::move(pieces);
  for (size_t i = 0; i < v.pieces_.size(); ++i) {
    const std::string& p = v.pieces_[i];
    if (p.empty())
      throw ConfigError("vocab: empty piece at line " + std::to_string(i + 1));
    if (!v.ids_.emplace(p, static_cast<int>(i)).second)
      throw ConfigError("vocab: duplicate piece '" + p + "'");
  }
  auto need = [&](const char* name) {
    auto it = v.ids_.find(name);
    if (it == v.ids_.end())
      throw ConfigError("vocab: missing special token " + std::string(name));
    return it->second;
  };
  v.pad_ = need("[PAD]");
  v.unk_ = need("[UNK]");
  v.bos_ = need("[BOS]");
  v.eos_ = need("[EOS]");
  return v;
}

const std::string& WordpieceVocab::piece(int id) const {
  if (id < 0 || id >= size())
    throw ContractError("vocab: id " + std::to_string(id) + " out of range");
  return pieces_[static_cast<size_t>(id)];
}

std::optional<int> WordpieceVocab::id_of(const std::string& piece) const {
  auto it = ids_.find(piece);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> WordpieceVocab::encode(const std::string& text) const {
  std::vector<int> out;
  for (const std::string& word : split_ws(normalize_text(text))) {
    if (word.size() > 100) {
      out.push_back(unk_);
      continue;
    }
    std::vector<int> word_ids;
    size_t start = 0;
    while (start < word.size()) {
      size_t end = word.size();
      int match = -1;
      for (; end > start; --end) {
        std::string cand = word.substr(start, end - start);
        if (start > 0) cand = "##" + cand;
        auto it = ids_.find(cand);
        if (it != ids_.end()) {
          match = it->second;
          break;
        }
      }
      if (match < 0) {
        word_ids.clear();
        word_ids.push_back(unk_);
        break;
      }
      word_ids.push_back(match);
      start = end;
    }
    out.insert(out.end(), word_ids.begin(), word_ids.end());
  }
  return out;
}

std::string WordpieceVocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id == pad_ || id == bos_ || id == eos_) continue;
    const std::string& p = piece(id);
    if (p.size() > 2 && p.compare(0, 2, "##") == 0) {
      out += p.substr(2);  // continuation: glue to the current word
    } else {
      if (!out.empty()) out.push_back(' ');
      out += p;
    }
  }
  return out;
}

bool is_content_word(const std::string& word, const Stoplist& stoplist) {
  if (word.empty()) throw InputError("is_content_word: empty word");
  std::string lower;
  lower.reserve(word.size());
  for (unsigned char c : word) lower.push_back(static_cast<char>(std::tolower(c)));
  return !stoplist.contains(lower);
}

namespace detail {
const char* builtin_stopwords();  // stopwords_data.cpp
}

Stoplist Stoplist::builtin() {
  std::istringstream in(detail::builtin_stopwords());
  Stoplist s;
  std::string w;
  while (in >> w) s.words_.insert(w);
  return s;
}

Stoplist Stoplist::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open stoplist file: " + path);
  Stoplist s;
  std::string w;
  while (in >> w) {
    std::string lower;
    for (unsigned char c : w) lower.push_back(static_cast<char>(std::tolower(c)));
    s.words_.insert(lower);
  }
  if (s.words_.empty()) throw ConfigError("stoplist is empty: " + path);
  return s;
}

AlignmentResult align_words(const std::vector<std::string>& ref,
                            const std::vector<std::string>& hyp) {
  const size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const int sub = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int del = d[i - 1][j] + 1;
      const int ins = d[i][j - 1] + 1;
      d[i][j] = std::min({sub, del, ins});
    }
  }

  AlignmentResult r;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] &&
        d[i][j] == d[i - 1][j - 1]) {
      ++r.matches;
      r.aligned_pairs.push_back({static_cast<int>(i) - 1,
                                 static_cast<int>(j) - 1});
      --i, --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      ++r.substitutions;
      r.aligned_pairs.push_back({static_cast<int>(i) - 1,
                                 static_cast<int>(j) - 1});
      --i, --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++r.deletions;
      r.aligned_pairs.push_back({static_cast<int>(i) - 1, -1});
      --i;
    } else {
      ++r.insertions;
      r.aligned_pairs.push_back({-1, static_cast<int>(j) - 1});
      --j;
    }
  }
  std::reverse(r.aligned_pairs.begin(), r.aligned_pairs.end());
  return r;
}

}  // namespace avatar
