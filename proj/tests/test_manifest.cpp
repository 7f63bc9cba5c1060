#include <fstream>
#include <string>

#include "avatar/error.h"
#include "avatar/manifest.h"
#include "doctest.h"
#include "support/fixtures.h"

using namespace avatar;

namespace {

std::string write_lines(const testsupport::TempDir& dir,
                        const std::string& name, const std::string& body) {
  std::string path = dir.file(name);
  std::ofstream out(path);
  out << body;
  return path;
}

bool error_names_line(const std::string& path, long line) {
  try {
    load_manifest(path);
  } catch (const InputError& e) {
    return std::string(e.what()).find(":" + std::to_string(line) + ":") !=
           std::string::npos;
  }
  return false;
}

}  // namespace

TEST_SUITE("manifest") {

TEST_CASE("empty file loads as an empty list") {
  testsupport::TempDir dir("manifest");
  auto path = write_lines(dir, "empty.jsonl", "");
  CHECK(load_manifest(path).empty());
  auto blank = write_lines(dir, "blank.jsonl", "\n  \n\t\n");
  CHECK(load_manifest(blank).empty());
}

TEST_CASE("round-trip preserves every field exactly") {
  testsupport::TempDir dir("manifest");
  std::vector<ManifestEntry> entries(2);
  entries[0].id = "a1";
  entries[0].audio_path = "clips/a1.wav";
  entries[0].transcript = "Hello there, WORLD!";
  entries[0].duration_s = 3.2500000001;
  WordAlignment align;
  align.entries = {{"hello", 0.1, 0.55}, {"there", 0.55, 0.9},
                   {"world", 1.0, 1.7321}};
  entries[0].alignment = align;
  entries[0].frames_path = "clips/a1.frames";

  entries[1].id = "b2";
  entries[1].audio_path = "/abs/b2.f32";
  entries[1].transcript = "just audio";
  entries[1].duration_s = 1.25;

  auto path = dir.file("rt.jsonl");
  write_manifest(path, entries);
  auto loaded = load_manifest(path);

  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].id == "a1");
  CHECK(loaded[0].audio_path == "clips/a1.wav");
  CHECK(loaded[0].transcript == "Hello there, WORLD!");
  CHECK(loaded[0].duration_s == 3.2500000001);
  REQUIRE(loaded[0].frames_path.has_value());
  CHECK(*loaded[0].frames_path == "clips/a1.frames");
  REQUIRE(loaded[0].alignment.has_value());
  REQUIRE(loaded[0].alignment->entries.size() == 3);
  CHECK(loaded[0].alignment->entries[2].word == "world");
  CHECK(loaded[0].alignment->entries[2].start_s == 1.0);
  CHECK(loaded[0].alignment->entries[2].end_s == 1.7321);
  CHECK(!loaded[1].frames_path.has_value());
  CHECK(!loaded[1].alignment.has_value());
  CHECK(loaded[1].duration_s == 1.25);
}

TEST_CASE("parse failures carry the line number") {
  testsupport::TempDir dir("manifest");
  std::string good =
      R"({"id":"x","audio_path":"x.wav","transcript":"hi","duration_s":1.0})";

  auto bad_json = write_lines(dir, "a.jsonl", good + "\n{oops\n");
  CHECK(error_names_line(bad_json, 2));

  auto not_object = write_lines(dir, "b.jsonl", good + "\n[1,2]\n");
  CHECK(error_names_line(not_object, 2));

  auto missing = write_lines(
      dir, "c.jsonl", R"({"id":"x","transcript":"hi","duration_s":1.0})"
                      "\n");
  CHECK(error_names_line(missing, 1));

  auto bad_duration = write_lines(
      dir, "d.jsonl",
      good + "\n" +
          R"({"id":"y","audio_path":"y.wav","transcript":"hi","duration_s":0})"
          "\n");
  CHECK(error_names_line(bad_duration, 2));
}

TEST_CASE("alignment must spell the normalized transcript") {
  testsupport::TempDir dir("manifest");
  // Normalization lowercases and strips the comma, so this matches.
  auto ok = write_lines(
      dir, "ok.jsonl",
      R"({"id":"x","audio_path":"x.wav","transcript":"Hey, You","duration_s":2.0,)"
      R"("alignment":[["hey",0.0,0.5],["you",0.6,1.1]]})"
      "\n");
  CHECK(load_manifest(ok).size() == 1);

  auto wrong_word = write_lines(
      dir, "w.jsonl",
      R"({"id":"x","audio_path":"x.wav","transcript":"hey you","duration_s":2.0,)"
      R"("alignment":[["hey",0.0,0.5],["me",0.6,1.1]]})"
      "\n");
  CHECK(error_names_line(wrong_word, 1));

  auto wrong_count = write_lines(
      dir, "n.jsonl",
      R"({"id":"x","audio_path":"x.wav","transcript":"hey you","duration_s":2.0,)"
      R"("alignment":[["hey",0.0,0.5]]})"
      "\n");
  CHECK(error_names_line(wrong_count, 1));

  auto out_of_range = write_lines(
      dir, "r.jsonl",
      R"({"id":"x","audio_path":"x.wav","transcript":"hey you","duration_s":1.0,)"
      R"("alignment":[["hey",0.0,0.5],["you",0.6,1.1]]})"
      "\n");
  CHECK(error_names_line(out_of_range, 1));

  auto bad_row = write_lines(
      dir, "t.jsonl",
      R"({"id":"x","audio_path":"x.wav","transcript":"hey","duration_s":1.0,)"
      R"("alignment":[["hey",0.0]]})"
      "\n");
  CHECK(error_names_line(bad_row, 1));
}

TEST_CASE("relative media paths resolve against the manifest directory") {
  CHECK(resolve_manifest_path("/data/set/m.jsonl", "clips/a.wav") ==
        "/data/set/clips/a.wav");
  CHECK(resolve_manifest_path("/data/set/m.jsonl", "/abs/a.wav") ==
        "/abs/a.wav");
  CHECK(resolve_manifest_path("m.jsonl", "a.wav") == "a.wav");
}

TEST_CASE("missing manifest file is an input error") {
  CHECK_THROWS_AS(load_manifest("/nonexistent/m.jsonl"), InputError);
}

}  // TEST_SUITE
