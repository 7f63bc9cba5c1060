#pragma once

#include <array>
#include <string>
#include <vector>

#include "avatar/rng.h"
#include "avatar/tensor.h"

namespace avatar {

constexpr int kFrameSide = 224;
constexpr int kVideoTokens = 196;  // (224/16)^2 spatial tubelets
constexpr int kVideoTokenDim = 1536;  // 16*16*2*3

struct Frame {
  int height = 0;
  int width = 0;
  std::vector<double> rgb;  // [height x width x 3], values in [0, 1]

  double& at(int y, int x, int c) {
    return rgb[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  double at(int y, int x, int c) const {
    return rgb[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

Frame resize_bilinear(const Frame& src, int out_height, int out_width);

// Two frames sampled 0.4 s apart (2.5 fps), already at 224x224.
struct FrameStack {
  std::array<Frame, 2> frames;
  std::array<double, 2> timestamps_s = {0.0, 0.0};
};

// Pre-decoded clip: either a directory of .ppm frames (P6, sorted by
// filename) with an fps.txt sidecar, or a single .frames file (see README
// for the layout). Frames are decoded on access; frame i sits at i/fps.
class ClipSource {
 public:
  static ClipSource open(const std::string& path);

  int n_frames() const { return n_frames_; }
  double fps() const { return fps_; }
  double duration_s() const { return n_frames_ / fps_; }
  Frame frame(int index) const;

 private:
  ClipSource() = default;
  int n_frames_ = 0;
  double fps_ = 0.0;
  std::vector<std::string> frame_paths_;  // directory mode
  int raw_height_ = 0, raw_width_ = 0;    // .frames mode
  std::vector<float> raw_data_;
};

Frame read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Frame& f);

// Draws t0 uniformly in [0, duration - 0.4] (clamped at 0), picks the frames
// nearest t0 and t0+0.4, and resizes them to 224x224.
FrameStack sample_frames(const ClipSource& clip, Rng& rng);

struct VideoAugmentParams {
  double crop_min = 0.8, crop_max = 1.0;  // crop side scale range
  double brightness = 0.2;                // additive, drawn from [-b, b]
  double contrast = 0.2;   // factor 1+c around the frame's luma mean
  double saturation = 0.2; // factor 1+s toward per-pixel luma
};

// Identical crop and color transform for both frames; identity when
// train == false. Outputs clamped to [0, 1].
FrameStack augment_frames(const FrameStack& f, const VideoAugmentParams& p,
                          Rng& rng, bool train);

// Non-overlapping 16x16x2 tubelets in row-major spatial order; token (r, c)
// flattens (row, col, frame, channel) to 1536 values. Returns [196 x 1536].
Tensor tubelet_tokenize(const FrameStack& f);

}  // namespace avatar
