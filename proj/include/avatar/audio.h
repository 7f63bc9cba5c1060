#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avatar/rng.h"
#include "avatar/tensor.h"
#include "avatar/text.h"

namespace avatar {

constexpr int kSampleRateHz = 16000;
constexpr int kMelBins = 80;
constexpr int kSpectrogramFrames = 2500;  // 25 s at a 10 ms stride
constexpr int kAudioTokens = 780;         // 5 mel rows x 156 time columns
constexpr int kAudioTokenDim = 256;

struct Waveform {
  std::vector<double> samples;  // nominal range [-1, 1]
  int sample_rate_hz = kSampleRateHz;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

struct Spectrogram {
  int n_frames = 0;
  int n_mels = kMelBins;
  std::vector<double> data;  // [n_frames x n_mels], row-major

  double& at(int t, int m) { return data[static_cast<size_t>(t) * n_mels + m]; }
  double at(int t, int m) const {
    return data[static_cast<size_t>(t) * n_mels + m];
  }
};

// Triangular mel filters over power-spectrum bins (HTK mel scale,
// m = 2595 log10(1 + f/700)).
class MelFilterbank {
 public:
  MelFilterbank(int n_filters, double f_lo_hz, double f_hi_hz, int n_fft,
                int sample_rate_hz);

  int n_filters() const { return n_filters_; }
  double center_hz(int k) const;  // peak frequency of filter k

  // power: n_fft/2 + 1 bins; returns one energy per filter.
  std::vector<double> apply(const std::vector<double>& power) const;

 private:
  int n_filters_;
  int n_bins_;
  std::vector<double> centers_hz_;
  std::vector<double> weights_;  // [n_filters x n_bins]
};

// 25 ms symmetric Hamming window, 10 ms hop, 512-point FFT, 80 mel filters
// over 0-8 kHz, log(energy + 1e-10); padded or truncated to 2500 frames.
Spectrogram log_mel_spectrogram(const Waveform& w);

// Non-overlapping 16x16 patches; token t*5+m (time-major) flattens frames
// [16t, 16t+16) x mels [16m, 16m+16) frame-major. Returns [780 x 256].
Tensor patchify_audio(const Spectrogram& s);

// Zeroes the sample span [start_s, end_s) of every targeted word.
Waveform mask_words(const Waveform& w, const WordAlignment& align,
                    const std::vector<int>& targets);

struct SpecAugmentParams {
  int F = 27;   // max frequency-mask width (bins)
  int mF = 2;   // number of frequency masks
  int T = 100;  // max time-mask width (frames)
  int mT = 2;   // number of time masks
  bool mask_to_mean = true;  // fill with pre-mask utterance mean, else 0
};

Spectrogram spec_augment(const Spectrogram& s, const SpecAugmentParams& p,
                         Rng& rng);

struct NoiseBank {
  std::vector<Waveform> clips;

  // Reads every .wav/.f32 in dir (sorted by filename).
  static NoiseBank load_dir(const std::string& dir);
};

enum class NoiseKind { clean, burst, environment, mixed };

NoiseKind parse_noise_kind(const std::string& name);
const char* noise_kind_name(NoiseKind k);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::clean;
  const NoiseBank* bank = nullptr;  // required for environment/mixed
  double snr_db = 0.0;
  uint64_t rng_seed = 0;
};

// clean: identity. burst: two disjoint zeroed spans with lengths drawn
// uniformly from (0, 0.1]*duration. environment: a bank clip looped/cropped
// from a random offset and scaled to hit snr_db exactly, then added.
// mixed: burst then environment on one seeded stream.
Waveform apply_noise(const Waveform& w, const NoiseSpec& spec);

}  // namespace avatar
