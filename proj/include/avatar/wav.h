#pragma once

#include <string>

#include "avatar/audio.h"

namespace avatar {

// 16-bit PCM mono WAV at 16 kHz. Other encodings or rates are rejected
// (resampling is the caller's job).
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// Headerless little-endian float32; sample count = file size / 4.
Waveform read_f32(const std::string& path);
void write_f32(const std::string& path, const Waveform& w);

// Dispatches on extension: .wav or .f32.
Waveform read_audio(const std::string& path);
void write_audio(const std::string& path, const Waveform& w);

}  // namespace avatar
