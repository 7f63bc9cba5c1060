#pragma once

#include <optional>
#include <string>
#include <vector>

#include "avatar/text.h"

namespace avatar {

// One utterance: where its media lives and what was said.
struct ManifestEntry {
  std::string id;
  std::string audio_path;
  std::optional<std::string> frames_path;
  std::string transcript;
  std::optional<WordAlignment> alignment;
  double duration_s = 0;
};

// JSONL, one entry per line; blank lines are skipped. Every entry is
// validated (required fields, alignment words matching the normalized
// transcript, sane alignment times) and failures carry the line number.
std::vector<ManifestEntry> load_manifest(const std::string& path);

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries);

// Entry paths are stored as written; relative ones resolve against the
// manifest's own directory at access time.
std::string resolve_manifest_path(const std::string& manifest_path,
                                  const std::string& entry_path);

}  // namespace avatar
