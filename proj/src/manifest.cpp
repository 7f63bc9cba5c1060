#include "avatar/manifest.h"

#include <filesystem>
#include <fstream>

#include "avatar/error.h"
#include "json.hpp"

namespace avatar {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, long line,
                       const std::string& what) {
  throw InputError(path + ":" + std::to_string(line) + ": " + what);
}

ManifestEntry parse_entry(const json& j, const std::string& path, long line) {
  ManifestEntry e;
  try {
    e.id = j.at("id").get<std::string>();
    e.audio_path = j.at("audio_path").get<std::string>();
    e.transcript = j.at("transcript").get<std::string>();
    e.duration_s = j.at("duration_s").get<double>();
    if (j.contains("frames_path") && !j["frames_path"].is_null())
      e.frames_path = j["frames_path"].get<std::string>();
    if (j.contains("alignment") && !j["alignment"].is_null()) {
      WordAlignment a;
      for (const auto& row : j["alignment"]) {
        if (!row.is_array() || row.size() != 3)
          fail(path, line, "alignment rows must be [word, start_s, end_s]");
        a.entries.push_back({row[0].get<std::string>(), row[1].get<double>(),
                             row[2].get<double>()});
      }
      e.alignment = std::move(a);
    }
  } catch (const json::exception& ex) {
    fail(path, line, ex.what());
  }

  if (e.id.empty()) fail(path, line, "id must be non-empty");
  if (e.audio_path.empty()) fail(path, line, "audio_path must be non-empty");
  if (!(e.duration_s > 0)) fail(path, line, "duration_s must be positive");

  if (e.alignment) {
    try {
      e.alignment->validate(e.duration_s);
    } catch (const InputError& ex) {
      fail(path, line, ex.what());
    }
    auto words = Transcript::from_raw(e.transcript).words;
    bool match = words.size() == e.alignment->entries.size();
    for (size_t i = 0; match && i < words.size(); ++i)
      match = words[i] == e.alignment->entries[i].word;
    if (!match)
      fail(path, line,
           "alignment words do not match the normalized transcript for id '" +
               e.id + "'");
  }
  return e;
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest: " + path);

  std::vector<ManifestEntry> entries;
  std::string raw;
  long line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& ex) {
      fail(path, line, std::string("malformed JSON: ") + ex.what());
    }
    if (!j.is_object()) fail(path, line, "entry must be a JSON object");
    entries.push_back(parse_entry(j, path, line));
  }
  return entries;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write manifest: " + path);
  for (const auto& e : entries) {
    json j;
    j["id"] = e.id;
    j["audio_path"] = e.audio_path;
    j["transcript"] = e.transcript;
    j["duration_s"] = e.duration_s;
    if (e.frames_path) j["frames_path"] = *e.frames_path;
    if (e.alignment) {
      json rows = json::array();
      for (const auto& w : e.alignment->entries)
        rows.push_back(json::array({w.word, w.start_s, w.end_s}));
      j["alignment"] = std::move(rows);
    }
    out << j.dump() << "\n";
  }
  if (!out) throw InputError("failed writing manifest: " + path);
}

std::string resolve_manifest_path(const std::string& manifest_path,
                                  const std::string& entry_path) {
  std::filesystem::path p(entry_path);
  if (p.is_absolute()) return entry_path;
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

}  // namespace avatar
