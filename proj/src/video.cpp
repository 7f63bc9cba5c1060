#include "avatar/video.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "avatar/error.h"

namespace avatar {

namespace {

double luma(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

uint32_t rd_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

Frame read_ppm(const std::string& path) {
  const std::string raw = slurp(path);
  // Header: "P6" <ws> width <ws> height <ws> maxval, single whitespace after.
  size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < raw.size() && std::isspace(static_cast<unsigned char>(raw[pos]))) {
      ++pos;
      // PPM comments run to end of line.
      if (pos < raw.size() && raw[pos] == '#')
        while (pos < raw.size() && raw[pos] != '\n') ++pos;
    }
    size_t start = pos;
    while (pos < raw.size() && !std::isspace(static_cast<unsigned char>(raw[pos])))
      ++pos;
    return raw.substr(start, pos - start);
  };
  if (token() != "P6") throw InputError("not a binary PPM (P6) file: " + path);
  Frame f;
  try {
    f.width = std::stoi(token());
    f.height = std::stoi(token());
    if (std::stoi(token()) != 255)
      throw InputError("PPM maxval must be 255: " + path);
  } catch (const std::logic_error&) {
    throw InputError("malformed PPM header: " + path);
  }
  if (f.width <= 0 || f.height <= 0)
    throw InputError("bad PPM dimensions: " + path);
  ++pos;  // single whitespace byte before pixel data
  const size_t need = static_cast<size_t>(f.width) * f.height * 3;
  if (pos + need > raw.size())
    throw InputError("truncated PPM pixel data: " + path);
  f.rgb.resize(need);
  for (size_t i = 0; i < need; ++i)
    f.rgb[i] = static_cast<unsigned char>(raw[pos + i]) / 255.0;
  return f;
}

void write_ppm(const std::string& path, const Frame& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write PPM file: " + path);
  out << "P6\n" << f.width << " " << f.height << "\n255\n";
  std::string bytes;
  bytes.reserve(f.rgb.size());
  for (double v : f.rgb)
    bytes.push_back(static_cast<char>(
        std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("cannot write PPM file: " + path);
}

Frame resize_bilinear(const Frame& src, int out_height, int out_width) {
  if (src.height <= 0 || src.width <= 0)
    throw ContractError("resize: empty frame");
  if (src.height == out_height && src.width == out_width) return src;
  Frame dst;
  dst.height = out_height;
  dst.width = out_width;
  dst.rgb.resize(static_cast<size_t>(out_height) * out_width * 3);
  const double sy = static_cast<double>(src.height) / out_height;
  const double sx = static_cast<double>(src.width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(y0, x0, c) * (1 - wx) + src.at(y0, x1, c) * wx;
        const double bot = src.at(y1, x0, c) * (1 - wx) + src.at(y1, x1, c) * wx;
        dst.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return dst;
}

ClipSource ClipSource::open(const std::string& path) {
  namespace fs = std::filesystem;
  ClipSource c;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".ppm")
        c.frame_paths_.push_back(entry.path().string());
    }
    std::sort(c.frame_paths_.begin(), c.frame_paths_.end());
    if (c.frame_paths_.empty())
      throw InputError("clip directory has no .ppm frames: " + path);
    const std::string fps_path = (fs::path(path) / "fps.txt").string();
    std::ifstream fps_in(fps_path);
    if (!(fps_in >> c.fps_) || c.fps_ <= 0)
      throw InputError("missing or bad fps sidecar: " + fps_path);
    c.n_frames_ = static_cast<int>(c.frame_paths_.size());
    return c;
  }

  const std::string raw = slurp(path);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < 28 || std::memcmp(p, "AVFR", 4) != 0)
    throw InputError("not a frames file (AVFR magic missing): " + path);
  if (rd_u32(p + 4) != 1)
    throw InputError("unsupported frames file version: " + path);
  c.n_frames_ = static_cast<int>(rd_u32(p + 8));
  c.raw_height_ = static_cast<int>(rd_u32(p + 12));
  c.raw_width_ = static_cast<int>(rd_u32(p + 16));
  double fps;
  std::memcpy(&fps, p + 20, 8);
  c.fps_ = fps;
  if (c.n_frames_ <= 0 || c.raw_height_ <= 0 || c.raw_width_ <= 0 || c.fps_ <= 0)
    throw InputError("bad frames file geometry: " + path);
  const size_t n_vals = static_cast<size_t>(c.n_frames_) * c.raw_height_ *
                        c.raw_width_ * 3;
  if (raw.size() != 28 + n_vals * 4)
    throw InputError("frames file size mismatch: " + path);
  c.raw_data_.resize(n_vals);
  std::memcpy(c.raw_data_.data(), p + 28, n_vals * 4);
  return c;
}

Frame ClipSource::frame(int index) const {
  if (index < 0 || index >= n_frames_)
    throw ContractError("clip frame index out of range");
  if (!frame_paths_.empty())
    return read_ppm(frame_paths_[static_cast<size_t>(index)]);
  Frame f;
  f.height = raw_height_;
  f.width = raw_width_;
  const size_t per_frame = static_cast<size_t>(raw_height_) * raw_width_ * 3;
  f.rgb.resize(per_frame);
  const float* src = raw_data_.data() + per_frame * static_cast<size_t>(index);
  for (size_t i = 0; i < per_frame; ++i) f.rgb[i] = static_cast<double>(src[i]);
  return f;
}

FrameStack sample_frames(const ClipSource& clip, Rng& rng) {
  if (clip.n_frames() <= 0) throw InputError("sample_frames: empty clip");
  constexpr double kSpacing = 0.4;  // 2.5 fps
  const double duration = clip.duration_s();
  const double t0 = rng.uniform(0.0, std::max(0.0, duration - kSpacing));
  const double t1 = std::min(t0 + kSpacing, duration);

  auto nearest = [&](double t) {
    const long long i = std::llround(t * clip.fps());
    return static_cast<int>(
        std::clamp<long long>(i, 0, clip.n_frames() - 1));
  };
  FrameStack out;
  out.timestamps_s = {t0, t1};
  out.frames[0] = resize_bilinear(clip.frame(nearest(t0)), kFrameSide, kFrameSide);
  out.frames[1] = resize_bilinear(clip.frame(nearest(t1)), kFrameSide, kFrameSide);
  return out;
}

FrameStack augment_frames(const FrameStack& f, const VideoAugmentParams& p,
                          Rng& rng, bool train) {
  if (!train) return f;
  if (p.crop_min <= 0 || p.crop_min > p.crop_max || p.crop_max > 1.0)
    throw ConfigError("augment_frames: bad crop scale range");

  // One draw sequence per stack: both frames get the identical transform.
  const double scale = rng.uniform(p.crop_min, p.crop_max);
  const int side = std::max(1, static_cast<int>(std::lround(kFrameSide * scale)));
  const int max_off = kFrameSide - side;
  const int oy = static_cast<int>(rng.uniform_int(max_off + 1));
  const int ox = static_cast<int>(rng.uniform_int(max_off + 1));
  const double d_bright = p.brightness > 0 ? rng.uniform(-p.brightness, p.brightness) : 0.0;
  const double f_contrast = p.contrast > 0 ? 1.0 + rng.uniform(-p.contrast, p.contrast) : 1.0;
  const double f_sat = p.saturation > 0 ? 1.0 + rng.uniform(-p.saturation, p.saturation) : 1.0;

  FrameStack out = f;
  for (int k = 0; k < 2; ++k) {
    Frame& fr = out.frames[k];
    if (fr.height != kFrameSide || fr.width != kFrameSide)
      throw ContractError("augment_frames: frames must be 224x224");
    if (side != kFrameSide) {
      Frame crop;
      crop.height = crop.width = side;
      crop.rgb.resize(static_cast<size_t>(side) * side * 3);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          for (int c = 0; c < 3; ++c)
            crop.at(y, x, c) = fr.at(oy + y, ox + x, c);
      fr = resize_bilinear(crop, kFrameSide, kFrameSide);
    }
    if (d_bright != 0.0)
      for (double& v : fr.rgb) v += d_bright;
    if (f_contrast != 1.0) {
      double mean = 0.0;
      for (int y = 0; y < fr.height; ++y)
        for (int x = 0; x < fr.width; ++x)
          mean += luma(fr.at(y, x, 0), fr.at(y, x, 1), fr.at(y, x, 2));
      mean /= static_cast<double>(fr.height) * fr.width;
      for (double& v : fr.rgb) v = mean + (v - mean) * f_contrast;
    }
    if (f_sat != 1.0) {
      for (int y = 0; y < fr.height; ++y)
        for (int x = 0; x < fr.width; ++x) {
          const double g = luma(fr.at(y, x, 0), fr.at(y, x, 1), fr.at(y, x, 2));
          for (int c = 0; c < 3; ++c)
            fr.at(y, x, c) = g + (fr.at(y, x, c) - g) * f_sat;
        }
    }
    if (d_bright != 0.0 || f_contrast != 1.0 || f_sat != 1.0)
      for (double& v : fr.rgb) v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

Tensor tubelet_tokenize(const FrameStack& f) {
  for (const Frame& fr : f.frames)
    if (fr.height != kFrameSide || fr.width != kFrameSide)
      throw ContractError("tubelet_tokenize: frames must be 224x224");
  constexpr int kPatch = 16;
  constexpr int kGrid = kFrameSide / kPatch;  // 14

  std::vector<double> vals(static_cast<size_t>(kVideoTokens) * kVideoTokenDim);
  for (int r = 0; r < kGrid; ++r) {
    for (int c = 0; c < kGrid; ++c) {
      const size_t tok = static_cast<size_t>(r) * kGrid + c;
      double* dst = &vals[tok * kVideoTokenDim];
      for (int i = 0; i < kPatch; ++i)
        for (int j = 0; j < kPatch; ++j)
          for (int frame = 0; frame < 2; ++frame)
            for (int ch = 0; ch < 3; ++ch)
              *dst++ = f.frames[static_cast<size_t>(frame)].at(
                  r * kPatch + i, c * kPatch + j, ch);
    }
  }
  return Tensor::from({kVideoTokens, kVideoTokenDim}, std::move(vals));
}

}  // namespace avatar
