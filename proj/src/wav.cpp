#include "avatar/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "avatar/error.h"

namespace avatar {

namespace {

uint32_t rd_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void wr_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open audio file: " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

Waveform read_wav(const std::string& path) {
  const std::string raw = slurp(path);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 ||
      std::memcmp(p + 8, "WAVE", 4) != 0)
    throw InputError("not a RIFF/WAVE file: " + path);

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;
  size_t off = 12;
  while (off + 8 <= raw.size()) {
    const uint32_t chunk_len = rd_u32(p + off + 4);
    const size_t body = off + 8;
    if (std::memcmp(p + off, "fmt ", 4) == 0) {
      if (body + 16 > raw.size())
        throw InputError("truncated fmt chunk: " + path);
      format = rd_u16(p + body);
      channels = rd_u16(p + body + 2);
      rate = rd_u32(p + body + 4);
      bits = rd_u16(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(p + off, "data", 4) == 0) {
      data_off = body;
      data_len = std::min<size_t>(chunk_len, raw.size() - body);
    }
    off = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data_off == 0)
    throw InputError("missing fmt or data chunk: " + path);
  if (format != 1 || bits != 16)
    throw InputError("only 16-bit PCM WAV is supported: " + path);
  if (channels != 1) throw InputError("only mono WAV is supported: " + path);
  if (rate != kSampleRateHz)
    throw InputError("expected a 16 kHz WAV, got " + std::to_string(rate) +
                     " Hz: " + path);

  Waveform w;
  w.samples.resize(data_len / 2);
  for (size_t i = 0; i < w.samples.size(); ++i) {
    const int16_t v = static_cast<int16_t>(rd_u16(p + data_off + 2 * i));
    w.samples[i] = v / 32768.0;
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  const uint32_t data_len = static_cast<uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  wr_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  wr_u32(out, 16);
  wr_u16(out, 1);  // PCM
  wr_u16(out, 1);  // mono
  wr_u32(out, kSampleRateHz);
  wr_u32(out, kSampleRateHz * 2);  // byte rate
  wr_u16(out, 2);                  // block align
  wr_u16(out, 16);                 // bits
  out += "data";
  wr_u32(out, data_len);
  for (double x : w.samples) {
    const double c = std::clamp(x, -1.0, 1.0);
    wr_u16(out, static_cast<uint16_t>(static_cast<int16_t>(std::lround(c * 32767.0))));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size())))
    throw InputError("cannot write WAV file: " + path);
}

Waveform read_f32(const std::string& path) {
  const std::string raw = slurp(path);
  if (raw.size() % 4 != 0)
    throw InputError("raw float32 file size is not a multiple of 4: " + path);
  Waveform w;
  w.samples.resize(raw.size() / 4);
  for (size_t i = 0; i < w.samples.size(); ++i) {
    float v;
    std::memcpy(&v, raw.data() + 4 * i, 4);
    w.samples[i] = static_cast<double>(v);
  }
  return w;
}

void write_f32(const std::string& path, const Waveform& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write float32 file: " + path);
  for (double x : w.samples) {
    const float v = static_cast<float>(x);
    char buf[4];
    std::memcpy(buf, &v, 4);
    f.write(buf, 4);
  }
  if (!f) throw InputError("cannot write float32 file: " + path);
}

namespace {

bool ends_with(const std::string& s, const char* suffix) {
  const size_t n = std::strlen(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

}  // namespace

Waveform read_audio(const std::string& path) {
  if (ends_with(path, ".wav")) return read_wav(path);
  if (ends_with(path, ".f32")) return read_f32(path);
  throw InputError("unsupported audio extension (want .wav or .f32): " + path);
}

void write_audio(const std::string& path, const Waveform& w) {
  if (ends_with(path, ".wav")) return write_wav(path, w);
  if (ends_with(path, ".f32")) return write_f32(path, w);
  throw InputError("unsupported audio extension (want .wav or .f32): " + path);
}

}  // namespace avatar
