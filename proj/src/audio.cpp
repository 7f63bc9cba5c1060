#include "avatar/audio.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "avatar/error.h"
#include "avatar/wav.h"

namespace avatar {

namespace {

constexpr int kNFft = 512;
constexpr int kWinLen = 400;  // 25 ms
constexpr int kHop = 160;     // 10 ms
constexpr double kLogFloor = 1e-10;

// Iterative radix-2 FFT with a precomputed twiddle table.
void fft512(std::vector<double>& re, std::vector<double>& im) {
  static const std::vector<double> tw_re = [] {
    std::vector<double> t(kNFft / 2);
    for (int k = 0; k < kNFft / 2; ++k)
      t[k] = std::cos(-2.0 * std::numbers::pi * k / kNFft);
    return t;
  }();
  static const std::vector<double> tw_im = [] {
    std::vector<double> t(kNFft / 2);
    for (int k = 0; k < kNFft / 2; ++k)
      t[k] = std::sin(-2.0 * std::numbers::pi * k / kNFft);
    return t;
  }();

  for (int i = 1, j = 0; i < kNFft; ++i) {
    int bit = kNFft >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (int len = 2; len <= kNFft; len <<= 1) {
    const int stride = kNFft / len;
    for (int i = 0; i < kNFft; i += len) {
      for (int k = 0; k < len / 2; ++k) {
        const double wr = tw_re[k * stride], wi = tw_im[k * stride];
        const int a = i + k, b = i + k + len / 2;
        const double xr = re[b] * wr - im[b] * wi;
        const double xi = re[b] * wi + im[b] * wr;
        re[b] = re[a] - xr;
        im[b] = im[a] - xi;
        re[a] += xr;
        im[a] += xi;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

}  // namespace

MelFilterbank::MelFilterbank(int n_filters, double f_lo_hz, double f_hi_hz,
                             int n_fft, int sample_rate_hz)
    : n_filters_(n_filters), n_bins_(n_fft / 2 + 1) {
  if (n_filters <= 0 || f_hi_hz <= f_lo_hz)
    throw ContractError("mel filterbank: bad filter layout");
  const double mel_lo = hz_to_mel(f_lo_hz), mel_hi = hz_to_mel(f_hi_hz);
  std::vector<double> edges(n_filters + 2);
  for (int j = 0; j < n_filters + 2; ++j)
    edges[j] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * j / (n_filters + 1));

  centers_hz_.assign(edges.begin() + 1, edges.end() - 1);
  weights_.assign(static_cast<size_t>(n_filters_) * n_bins_, 0.0);
  for (int k = 0; k < n_filters_; ++k) {
    const double lo = edges[k], mid = edges[k + 1], hi = edges[k + 2];
    for (int b = 0; b < n_bins_; ++b) {
      const double f = static_cast<double>(b) * sample_rate_hz / n_fft;
      double v = 0.0;
      if (f >= lo && f <= mid && mid > lo) v = (f - lo) / (mid - lo);
      else if (f > mid && f <= hi && hi > mid) v = (hi - f) / (hi - mid);
      weights_[static_cast<size_t>(k) * n_bins_ + b] = v;
    }
  }
}

double MelFilterbank::center_hz(int k) const {
  if (k < 0 || k >= n_filters_)
    throw ContractError("mel filterbank: filter index out of range");
  return centers_hz_[static_cast<size_t>(k)];
}

std::vector<double> MelFilterbank::apply(const std::vector<double>& power) const {
  if (static_cast<int>(power.size()) != n_bins_)
    throw ContractError("mel filterbank: wrong spectrum size");
  std::vector<double> out(static_cast<size_t>(n_filters_), 0.0);
  for (int k = 0; k < n_filters_; ++k) {
    const double* row = &weights_[static_cast<size_t>(k) * n_bins_];
    double acc = 0.0;
    for (int b = 0; b < n_bins_; ++b) acc += row[b] * power[b];
    out[static_cast<size_t>(k)] = acc;
  }
  return out;
}

Spectrogram log_mel_spectrogram(const Waveform& w) {
  if (w.samples.empty()) throw InputError("log_mel_spectrogram: empty waveform");
  if (w.sample_rate_hz != kSampleRateHz)
    throw InputError("log_mel_spectrogram: expected 16 kHz input");

  static const std::vector<double> hamming = [] {
    std::vector<double> win(kWinLen);
    for (int n = 0; n < kWinLen; ++n)
      win[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (kWinLen - 1));
    return win;
  }();
  static const MelFilterbank bank(kMelBins, 0.0, 8000.0, kNFft, kSampleRateHz);

  Spectrogram s;
  s.n_frames = kSpectrogramFrames;
  s.data.assign(static_cast<size_t>(kSpectrogramFrames) * kMelBins, 0.0);

  const long long n = static_cast<long long>(w.samples.size());
  std::vector<double> re(kNFft), im(kNFft), power(kNFft / 2 + 1);
  for (int t = 0; t < kSpectrogramFrames; ++t) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const long long base = static_cast<long long>(t) * kHop;
    for (int i = 0; i < kWinLen; ++i) {
      const long long idx = base + i;
      if (idx < n) re[i] = w.samples[static_cast<size_t>(idx)] * hamming[i];
    }
    fft512(re, im);
    for (int b = 0; b <= kNFft / 2; ++b)
      power[b] = re[b] * re[b] + im[b] * im[b];
    const std::vector<double> mel = bank.apply(power);
    for (int m = 0; m < kMelBins; ++m)
      s.at(t, m) = std::log(mel[static_cast<size_t>(m)] + kLogFloor);
  }
  return s;
}

Tensor patchify_audio(const Spectrogram& s) {
  if (s.n_frames != kSpectrogramFrames || s.n_mels != kMelBins)
    throw ContractError("patchify_audio: expected a [2500 x 80] spectrogram");
  constexpr int kPatch = 16;
  constexpr int kTimePatches = kSpectrogramFrames / kPatch;  // 156, tail dropped
  constexpr int kMelPatches = kMelBins / kPatch;             // 5

  std::vector<double> vals(static_cast<size_t>(kAudioTokens) * kAudioTokenDim);
  for (int t = 0; t < kTimePatches; ++t) {
    for (int m = 0; m < kMelPatches; ++m) {
      const size_t tok = static_cast<size_t>(t) * kMelPatches + m;
      for (int i = 0; i < kPatch; ++i)
        for (int j = 0; j < kPatch; ++j)
          vals[tok * kAudioTokenDim + i * kPatch + j] =
              s.at(t * kPatch + i, m * kPatch + j);
    }
  }
  return Tensor::from({kAudioTokens, kAudioTokenDim}, std::move(vals));
}

Waveform mask_words(const Waveform& w, const WordAlignment& align,
                    const std::vector<int>& targets) {
  Waveform out = w;
  const long long n = static_cast<long long>(out.samples.size());
  for (int idx : targets) {
    if (idx < 0 || idx >= static_cast<int>(align.entries.size()))
      throw ContractError("mask_words: word index " + std::to_string(idx) +
                          " out of range");
    const AlignedWord& e = align.entries[static_cast<size_t>(idx)];
    const long long begin =
        std::clamp<long long>(std::llround(e.start_s * w.sample_rate_hz), 0, n);
    const long long end =
        std::clamp<long long>(std::llround(e.end_s * w.sample_rate_hz), 0, n);
    for (long long i = begin; i < end; ++i) out.samples[static_cast<size_t>(i)] = 0.0;
  }
  return out;
}

Spectrogram spec_augment(const Spectrogram& s, const SpecAugmentParams& p,
                         Rng& rng) {
  if (p.F < 0 || p.mF < 0 || p.T < 0 || p.mT < 0)
    throw ConfigError("spec_augment: negative parameter");
  if (p.F > s.n_mels)
    throw ConfigError("spec_augment: F exceeds the mel bin count");
  if (p.T > s.n_frames)
    throw ConfigError("spec_augment: T exceeds the frame count");

  double fill = 0.0;
  if (p.mask_to_mean && !s.data.empty()) {
    double acc = 0.0;
    for (double v : s.data) acc += v;
    fill = acc / static_cast<double>(s.data.size());
  }

  Spectrogram out = s;
  for (int i = 0; i < p.mF; ++i) {
    const int width = static_cast<int>(rng.uniform_int(p.F + 1));
    const int f0 = static_cast<int>(rng.uniform_int(s.n_mels - width + 1));
    for (int t = 0; t < out.n_frames; ++t)
      for (int m = f0; m < f0 + width; ++m) out.at(t, m) = fill;
  }
  for (int i = 0; i < p.mT; ++i) {
    const int width = static_cast<int>(rng.uniform_int(p.T + 1));
    const int t0 = static_cast<int>(rng.uniform_int(s.n_frames - width + 1));
    for (int t = t0; t < t0 + width; ++t)
      for (int m = 0; m < out.n_mels; ++m) out.at(t, m) = fill;
  }
  return out;
}

NoiseBank NoiseBank::load_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw InputError("noise bank is not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".wav" || ext == ".f32") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty())
    throw ConfigError("noise bank directory has no .wav/.f32 files: " + dir);
  NoiseBank bank;
  for (const auto& path : paths) bank.clips.push_back(read_audio(path));
  return bank;
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "clean") return NoiseKind::clean;
  if (name == "burst") return NoiseKind::burst;
  if (name == "environment") return NoiseKind::environment;
  if (name == "mixed") return NoiseKind::mixed;
  throw ConfigError("unknown noise kind: " + name);
}

const char* noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::clean: return "clean";
    case NoiseKind::burst: return "burst";
    case NoiseKind::environment: return "environment";
    case NoiseKind::mixed: return "mixed";
  }
  return "?";
}

namespace {

// Two zeroed spans. Lengths are committed from their uniform draws untouched;
// only the start positions are redrawn until the spans are disjoint with a
// gap, so the span-length distribution stays exactly Uniform(0, 0.1]*duration
// and the spans never merge into one zero run or clip at the edges.
Waveform apply_burst(const Waveform& w, Rng& rng) {
  const long long n = static_cast<long long>(w.samples.size());
  const double duration = w.duration_s();
  auto draw_len = [&] {
    const double len_s = (1.0 - rng.uniform()) * 0.1 * duration;  // (0, 0.1]*D
    return std::max<long long>(1, std::llround(len_s * w.sample_rate_hz));
  };
  const long long n1 = draw_len();
  const long long n2 = draw_len();
  if (n1 + n2 + 1 > n)
    throw InputError("clip too short for two separated burst chunks");

  const long long s1 = static_cast<long long>(rng.uniform_int(n - n1 + 1));
  long long s2 = 0;
  while (true) {
    s2 = static_cast<long long>(rng.uniform_int(n - n2 + 1));
    if (s2 + n2 < s1 || s1 + n1 < s2) break;
  }

  Waveform out = w;
  for (long long i = s1; i < s1 + n1; ++i) out.samples[static_cast<size_t>(i)] = 0.0;
  for (long long i = s2; i < s2 + n2; ++i) out.samples[static_cast<size_t>(i)] = 0.0;
  return out;
}

Waveform apply_environment(const Waveform& w, const NoiseSpec& spec, Rng& rng) {
  if (spec.bank == nullptr || spec.bank->clips.empty())
    throw ConfigError("environment noise requires a non-empty noise bank");
  const Waveform& clip = spec.bank->clips[rng.uniform_int(spec.bank->clips.size())];
  if (clip.samples.empty()) throw InputError("noise bank clip is empty");

  const size_t n = w.samples.size();
  const size_t offset = rng.uniform_int(clip.samples.size());
  std::vector<double> noise(n);
  for (size_t i = 0; i < n; ++i)
    noise[i] = clip.samples[(offset + i) % clip.samples.size()];

  double p_sig = 0.0, p_noise = 0.0;
  for (size_t i = 0; i < n; ++i) {
    p_sig += w.samples[i] * w.samples[i];
    p_noise += noise[i] * noise[i];
  }
  if (p_noise == 0.0) throw InputError("noise bank clip is silent");
  if (p_sig == 0.0)
    throw InputError("cannot set an SNR against an all-zero signal");
  // Scale so that 10*log10(p_sig / p_scaled_noise) == snr_db exactly.
  const double gain = std::sqrt(p_sig / (p_noise * std::pow(10.0, spec.snr_db / 10.0)));

  Waveform out = w;
  for (size_t i = 0; i < n; ++i) out.samples[i] += gain * noise[i];
  return out;
}

}  // namespace

Waveform apply_noise(const Waveform& w, const NoiseSpec& spec) {
  if (w.samples.empty()) throw InputError("apply_noise: empty waveform");
  Rng rng(spec.rng_seed);
  switch (spec.kind) {
    case NoiseKind::clean:
      return w;
    case NoiseKind::burst:
      return apply_burst(w, rng);
    case NoiseKind::environment:
      return apply_environment(w, spec, rng);
    case NoiseKind::mixed: {
      const Waveform damaged = apply_burst(w, rng);
      return apply_environment(damaged, spec, rng);
    }
  }
  throw ContractError("apply_noise: unhandled noise kind");
}

}  // namespace avatar
