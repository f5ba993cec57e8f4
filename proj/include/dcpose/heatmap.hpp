#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dcpose/tensor.hpp"

namespace dcpose {

inline constexpr int kDefaultJoints = 15;
inline constexpr double kDecodeThreshold = 0.1;
inline constexpr double kDefaultSigma = 2.0;

struct Keypoint {
  double x = 0.0;  // column, pixels
  double y = 0.0;  // row, pixels
  bool visible = false;

  bool operator==(const Keypoint&) const = default;
};

struct Pose {
  std::vector<Keypoint> joints;

  Pose() = default;
  explicit Pose(int num_joints) : joints(std::size_t(num_joints)) {}

  int size() const { return int(joints.size()); }
  Keypoint& operator[](int j) { return joints[std::size_t(j)]; }
  const Keypoint& operator[](int j) const { return joints[std::size_t(j)]; }
  bool operator==(const Pose&) const = default;
};

// J x H x W joint confidence maps of a single person in a single frame.
class HeatmapStack {
 public:
  HeatmapStack() = default;
  HeatmapStack(int joints, int h, int w) : t_(1, joints, h, w) {}
  // Takes batch item 0 of a (1, J, H, W) tensor.
  explicit HeatmapStack(Tensor4 t);

  int joints() const { return t_.c(); }
  int h() const { return t_.h(); }
  int w() const { return t_.w(); }

  double& at(int j, int y, int x) { return t_(0, j, y, x); }
  double at(int j, int y, int x) const { return t_(0, j, y, x); }
  std::span<double> channel(int j) { return t_.plane(0, j); }
  std::span<const double> channel(int j) const { return t_.plane(0, j); }

  const Tensor4& tensor() const { return t_; }
  Tensor4& tensor() { return t_; }

  bool same_shape(const HeatmapStack& o) const { return t_.shape() == o.t_.shape(); }
  bool operator==(const HeatmapStack& o) const { return same_shape(o) && t_.vec() == o.t_.vec(); }

 private:
  Tensor4 t_;
};

struct BBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool contains(const BBox& o) const {
    return x_min <= o.x_min && y_min <= o.y_min && x_max >= o.x_max && y_max >= o.y_max;
  }
};

HeatmapStack encode_gaussian(const Pose& pose, int h, int w, double sigma = kDefaultSigma);

// Per-joint argmax (smallest row-major index on ties); visible iff the peak
// exceeds kDecodeThreshold.
Pose decode_argmax(const HeatmapStack& stack);

BBox enlarge_bbox(const BBox& b, double factor, int h, int w);

// Tight box around the visible joints.
BBox pose_bbox(const Pose& pose);

// Indices and heatmaps of the (previous, current, next) frames. A missing or
// disabled side holds a copy of h_c under the virtual index c-1 / c+1.
struct ClipTriplet {
  int p = 0, c = 0, n = 0;
  int T = 1;
  HeatmapStack hp, hc, hn;
};

struct FrameSelector {
  bool seeded = false;  // uniform pick inside the window instead of nearest
  std::uint64_t seed = 0;
  bool use_prev = true;
  bool use_next = true;
};

ClipTriplet assemble_clip(std::span<const HeatmapStack> frames, int c, int T, const FrameSelector& sel = {});

}  // namespace dcpose
