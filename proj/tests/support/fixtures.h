#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "avatar/audio.h"
#include "avatar/rng.h"
#include "avatar/video.h"

#include <unistd.h>

namespace testsupport {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("avatar_" + tag + "_" + std::to_string(++counter) + "_" +
             std::to_string(static_cast<unsigned>(::getpid())));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline avatar::Waveform tone(double freq_hz, double duration_s,
                             double amplitude = 0.5) {
  avatar::Waveform w;
  const long long n = std::llround(duration_s * avatar::kSampleRateHz);
  w.samples.resize(static_cast<size_t>(n));
  for (long long i = 0; i < n; ++i)
    w.samples[static_cast<size_t>(i)] =
        amplitude *
        std::sin(2.0 * std::numbers::pi * freq_hz * i / avatar::kSampleRateHz);
  return w;
}

inline avatar::Waveform noise_clip(double duration_s, avatar::Rng& rng,
                                   double amplitude = 0.4) {
  avatar::Waveform w;
  const long long n = std::llround(duration_s * avatar::kSampleRateHz);
  w.samples.resize(static_cast<size_t>(n));
  for (auto& s : w.samples) s = rng.uniform(-amplitude, amplitude);
  return w;
}

// Binary .frames container used by ClipSource (see README).
inline void write_frames_file(const std::string& path,
                              const std::vector<avatar::Frame>& frames,
                              double fps) {
  std::ofstream out(path, std::ios::binary);
  auto put_u32 = [&](uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff),
                 static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
  };
  out.write("AVFR", 4);
  put_u32(1);
  put_u32(static_cast<uint32_t>(frames.size()));
  put_u32(static_cast<uint32_t>(frames.empty() ? 0 : frames[0].height));
  put_u32(static_cast<uint32_t>(frames.empty() ? 0 : frames[0].width));
  out.write(reinterpret_cast<const char*>(&fps), 8);
  for (const auto& f : frames) {
    for (double v : f.rgb) {
      const float x = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&x), 4);
    }
  }
}

inline avatar::Frame solid_frame(int height, int width, double r, double g,
                                 double b) {
  avatar::Frame f;
  f.height = height;
  f.width = width;
  f.rgb.resize(static_cast<size_t>(height) * width * 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      f.at(y, x, 0) = r;
      f.at(y, x, 1) = g;
      f.at(y, x, 2) = b;
    }
  return f;
}

}  // namespace testsupport
