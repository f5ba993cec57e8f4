#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dcpose/heatmap.hpp"

namespace dcpose {

// 15-joint skeleton in PoseTrack order.
enum Joint : int {
  kRightAnkle = 0,
  kRightKnee,
  kRightHip,
  kLeftHip,
  kLeftKnee,
  kLeftAnkle,
  kRightWrist,
  kRightElbow,
  kRightShoulder,
  kLeftShoulder,
  kLeftElbow,
  kLeftWrist,
  kNeck,
  kNose,
  kHeadTop,
};

inline constexpr std::array<const char*, 15> kJointNames{
    "r_ankle", "r_knee", "r_hip", "l_hip", "l_knee", "l_ankle", "r_wrist", "r_elbow",
    "r_shoulder", "l_shoulder", "l_elbow", "l_wrist", "neck", "nose", "head_top"};

// Left/right partner of each joint under a horizontal flip.
inline constexpr std::array<int, 15> kFlipPartner{5, 4, 3, 2, 1, 0, 11, 10, 9, 8, 7, 6, 12, 13, 14};

// Drawn limbs (parent, child).
inline constexpr std::array<std::array<int, 2>, 14> kLimbs{{{kNeck, kNose},
                                                             {kNose, kHeadTop},
                                                             {kNeck, kRightShoulder},
                                                             {kNeck, kLeftShoulder},
                                                             {kRightShoulder, kRightElbow},
                                                             {kRightElbow, kRightWrist},
                                                             {kLeftShoulder, kLeftElbow},
                                                             {kLeftElbow, kLeftWrist},
                                                             {kNeck, kRightHip},
                                                             {kNeck, kLeftHip},
                                                             {kRightHip, kRightKnee},
                                                             {kRightKnee, kRightAnkle},
                                                             {kLeftHip, kLeftKnee},
                                                             {kLeftKnee, kLeftAnkle}}};

struct SceneConfig {
  int persons = 1;
  int joints = kDefaultJoints;
  int frames = 3;
  int h = 24;
  int w = 24;
  double sigma = kDefaultSigma;
  double max_velocity = 1.5;     // px/frame, per joint
  double max_turn = 0.25;        // rad/frame, per limb angle
  double occlusion_prob = 0.0;   // per joint and frame
  double blur_min = 0.0;         // Gaussian blur sigma range, px
  double blur_max = 0.0;
  double jitter_sigma = 0.0;     // px
  std::uint64_t seed = 0;

  void validate() const;
  bool degradation_off() const { return occlusion_prob == 0.0 && blur_max == 0.0 && jitter_sigma == 0.0; }
};

struct SyntheticClip {
  int h = 0, w = 0;
  double sigma = kDefaultSigma;
  // Indexed [person][frame].
  std::vector<std::vector<Pose>> poses;
  std::vector<std::vector<HeatmapStack>> degraded;
  std::vector<std::vector<HeatmapStack>> clean;

  int persons() const { return int(poses.size()); }
  int frames() const { return poses.empty() ? 0 : int(poses.front().size()); }
};

SyntheticClip generate(const SceneConfig& cfg);

// Deterministic seed derivation (splitmix64 chain).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// Separable Gaussian blur of every channel, zero padding, radius ceil(3*sigma).
HeatmapStack gaussian_blur(const HeatmapStack& s, double sigma);

struct AugmentParams {
  double rotation_deg = 0.0;  // about the grid centre
  double scale = 1.0;
  double shift_x = 0.0;       // px, applied after rotation and scaling
  double shift_y = 0.0;
  bool flip = false;          // horizontal, with left/right joint swap

  bool identity() const { return rotation_deg == 0.0 && scale == 1.0 && shift_x == 0.0 && shift_y == 0.0 && !flip; }
};

// Same transform applied to all heatmaps (bilinear resampling) and keypoints
// of every person and frame. Keypoints leaving the grid become invisible.
SyntheticClip augment(const SyntheticClip& clip, const AugmentParams& params);

// Random rotation, scaling, truncating shift and flip. If every joint of the
// clip leaves the grid the draw is repeated once, then InvalidArgument.
SyntheticClip augment(const SyntheticClip& clip, std::uint64_t seed);

// Forward map of a single point under params on an h x w grid.
Keypoint transform_point(const Keypoint& kp, const AugmentParams& params, int h, int w);

}  // namespace dcpose
