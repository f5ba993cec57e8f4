#include "dcpose/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "dcpose/kernels.hpp"

namespace dcpose {

namespace {

constexpr double kPi = std::numbers::pi;

// Limb lengths relative to the body scale.
struct Proportions {
  double torso = 0.50, head = 0.22, shoulder = 0.17, hip = 0.11;
  double upper_arm = 0.28, forearm = 0.25, thigh = 0.36, shin = 0.34;
};

// Articulation state: absolute limb angles (image coordinates, y down).
struct Articulation {
  double root_x = 0, root_y = 0;
  double torso = -kPi / 2;
  double head = 0;  // relative to torso
  double r_upper = kPi / 2, r_fore = kPi / 2, l_upper = kPi / 2, l_fore = kPi / 2;
  double r_thigh = kPi / 2, r_shin = kPi / 2, l_thigh = kPi / 2, l_shin = kPi / 2;
};

double* angle_ptr(Articulation& a, int i) {
  double* angles[] = {&a.torso, &a.head, &a.r_upper, &a.r_fore, &a.l_upper,
                      &a.l_fore, &a.r_thigh, &a.r_shin, &a.l_thigh, &a.l_shin};
  return angles[i];
}
constexpr int kAngles = 10;

Pose skeleton(const Articulation& a, double scale, int joints) {
  const Proportions p;
  auto dir = [](double ang) { return std::array<double, 2>{std::cos(ang), std::sin(ang)}; };
  auto at = [](std::array<double, 2> o, double len, double ang) {
    return std::array<double, 2>{o[0] + len * std::cos(ang), o[1] + len * std::sin(ang)};
  };
  const std::array<double, 2> root{a.root_x, a.root_y};
  const auto up = dir(a.torso);
  const std::array<double, 2> side{-up[1], up[0]};
  const auto neck = at(root, p.torso * scale, a.torso);
  const double head_ang = a.torso + a.head;
  const auto nose = at(neck, 0.5 * p.head * scale, head_ang);
  const auto head_top = at(neck, p.head * scale, head_ang);
  const std::array<double, 2> r_sh{neck[0] - p.shoulder * scale * side[0], neck[1] - p.shoulder * scale * side[1]};
  const std::array<double, 2> l_sh{neck[0] + p.shoulder * scale * side[0], neck[1] + p.shoulder * scale * side[1]};
  const std::array<double, 2> r_hip{root[0] - p.hip * scale * side[0], root[1] - p.hip * scale * side[1]};
  const std::array<double, 2> l_hip{root[0] + p.hip * scale * side[0], root[1] + p.hip * scale * side[1]};
  const auto r_elb = at(r_sh, p.upper_arm * scale, a.r_upper);
  const auto r_wri = at(r_elb, p.forearm * scale, a.r_fore);
  const auto l_elb = at(l_sh, p.upper_arm * scale, a.l_upper);
  const auto l_wri = at(l_elb, p.forearm * scale, a.l_fore);
  const auto r_knee = at(r_hip, p.thigh * scale, a.r_thigh);
  const auto r_ank = at(r_knee, p.shin * scale, a.r_shin);
  const auto l_knee = at(l_hip, p.thigh * scale, a.l_thigh);
  const auto l_ank = at(l_knee, p.shin * scale, a.l_shin);

  const std::array<std::array<double, 2>, 15> pts{r_ank, r_knee, r_hip, l_hip, l_knee, l_ank, r_wri, r_elb,
                                                  r_sh,  l_sh,   l_elb, l_wri, neck,  nose,  head_top};
  Pose pose(joints);
  for (int j = 0; j < joints; ++j) {
    const auto& q = pts[std::size_t(j % 15)];
    pose[j] = {q[0], q[1], true};
  }
  return pose;
}

bool on_grid(const Keypoint& kp, int h, int w) {
  return kp.x >= 0.0 && kp.x <= w - 1.0 && kp.y >= 0.0 && kp.y <= h - 1.0;
}

}  // namespace

void SceneConfig::validate() const {
  require(persons >= 1, "scene: persons must be >= 1");
  require(joints >= 1, "scene: joints must be >= 1");
  require(frames >= 3, "scene: frames must be >= 3");
  require(h >= 16 && w >= 16, "scene: heatmap dims must be >= 16");
  require(sigma > 0.0, "scene: sigma must be positive");
  require(max_velocity > 0.0 && max_turn >= 0.0, "scene: velocity bounds must be positive");
  require(occlusion_prob >= 0.0 && occlusion_prob <= 1.0, "scene: occlusion probability must be in [0,1]");
  require(blur_min >= 0.0 && blur_max >= blur_min, "scene: invalid blur range");
  require(jitter_sigma >= 0.0, "scene: jitter sigma must be >= 0");
}

HeatmapStack gaussian_blur(const HeatmapStack& s, double sigma) {
  if (sigma <= 0.0) return s;
  const int r = int(std::ceil(3.0 * sigma));
  std::vector<double> k(std::size_t(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[std::size_t(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;

  const int H = s.h(), W = s.w();
  HeatmapStack tmp(s.joints(), H, W), out(s.joints(), H, W);
  for (int j = 0; j < s.joints(); ++j) {
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          if (x + i >= 0 && x + i < W) acc += k[std::size_t(i + r)] * s.at(j, y, x + i);
        tmp.at(j, y, x) = acc;
      }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          if (y + i >= 0 && y + i < H) acc += k[std::size_t(i + r)] * tmp.at(j, y + i, x);
        out.at(j, y, x) = acc;
      }
  }
  return out;
}

SyntheticClip generate(const SceneConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SyntheticClip clip;
  clip.h = cfg.h;
  clip.w = cfg.w;
  clip.sigma = cfg.sigma;
  clip.poses.resize(std::size_t(cfg.persons));
  clip.degraded.resize(std::size_t(cfg.persons));
  clip.clean.resize(std::size_t(cfg.persons));

  // Body height is roughly 1.35 * scale; the person box enlarged by 25% has
  // to fit the crop.
  const double base_scale = 0.55 * std::min(cfg.h, cfg.w);
  for (int person = 0; person < cfg.persons; ++person) {
    Articulation a;
    double scale = base_scale * uniform(0.85, 1.0);
    a.torso = -kPi / 2 + uniform(-0.3, 0.3);
    a.head = uniform(-0.2, 0.2);
    a.r_upper = kPi / 2 + uniform(-1.2, 0.6);
    a.l_upper = kPi / 2 + uniform(-0.6, 1.2);
    a.r_fore = a.r_upper + uniform(-1.0, 0.2);
    a.l_fore = a.l_upper + uniform(-0.2, 1.0);
    a.r_thigh = kPi / 2 + uniform(-0.4, 0.2);
    a.l_thigh = kPi / 2 + uniform(-0.2, 0.4);
    a.r_shin = a.r_thigh + uniform(-0.1, 0.4);
    a.l_shin = a.l_thigh + uniform(-0.4, 0.1);

    // Centre the enlarged box in the crop, shrinking until it fits.
    Pose pose;
    for (int attempt = 0;; ++attempt) {
      a.root_x = 0.0;
      a.root_y = 0.0;
      pose = skeleton(a, scale, cfg.joints);
      const BBox tight = pose_bbox(pose);
      const double bw = (tight.x_max - tight.x_min) * 1.25, bh = (tight.y_max - tight.y_min) * 1.25;
      if ((bw < cfg.w && bh < cfg.h) || attempt > 20) {
        a.root_x = 0.5 * (cfg.w - 1) - 0.5 * (tight.x_min + tight.x_max) + uniform(-0.1, 0.1) * std::max(0.0, cfg.w - bw);
        a.root_y = 0.5 * (cfg.h - 1) - 0.5 * (tight.y_min + tight.y_max) + uniform(-0.1, 0.1) * std::max(0.0, cfg.h - bh);
        break;
      }
      scale *= 0.9;
    }

    double vx = uniform(-0.5, 0.5) * cfg.max_velocity, vy = uniform(-0.3, 0.3) * cfg.max_velocity;
    std::array<double, kAngles> omega{};
    for (auto& o : omega) o = uniform(-1.0, 1.0) * cfg.max_turn;
    omega[0] *= 0.2;  // torso sways less
    omega[1] *= 0.5;

    auto& poses = clip.poses[std::size_t(person)];
    Pose prev;
    for (int f = 0; f < cfg.frames; ++f) {
      if (f > 0) {
        a.root_x += vx;
        a.root_y += vy;
        for (int i = 0; i < kAngles; ++i) {
          omega[std::size_t(i)] = std::clamp(omega[std::size_t(i)] + 0.3 * cfg.max_turn * normal(rng), -cfg.max_turn,
                                             cfg.max_turn);
          *angle_ptr(a, i) += omega[std::size_t(i)];
        }
        vx = std::clamp(vx + 0.1 * cfg.max_velocity * normal(rng), -0.5 * cfg.max_velocity, 0.5 * cfg.max_velocity);
        vy = std::clamp(vy + 0.1 * cfg.max_velocity * normal(rng), -0.5 * cfg.max_velocity, 0.5 * cfg.max_velocity);
      }
      Pose cur = skeleton(a, scale, cfg.joints);
      if (f > 0) {
        // Enforce the per-joint displacement bound exactly.
        for (int j = 0; j < cfg.joints; ++j) {
          const double dx = cur[j].x - prev[j].x, dy = cur[j].y - prev[j].y;
          const double d = std::hypot(dx, dy);
          if (d > cfg.max_velocity) {
            const double s = cfg.max_velocity / d;
            cur[j].x = prev[j].x + dx * s;
            cur[j].y = prev[j].y + dy * s;
          }
        }
      }
      prev = cur;
      for (auto& kp : cur.joints) kp.visible = on_grid(kp, cfg.h, cfg.w);
      poses.push_back(cur);
    }

    for (int f = 0; f < cfg.frames; ++f) {
      const Pose& gt = poses[std::size_t(f)];
      clip.clean[std::size_t(person)].push_back(encode_gaussian(gt, cfg.h, cfg.w, cfg.sigma));
      if (cfg.degradation_off()) {
        clip.degraded[std::size_t(person)].push_back(clip.clean[std::size_t(person)].back());
        continue;
      }
      Pose noisy = gt;
      std::vector<bool> occluded(std::size_t(cfg.joints), false);
      for (int j = 0; j < cfg.joints; ++j) {
        noisy[j].x += cfg.jitter_sigma * normal(rng);
        noisy[j].y += cfg.jitter_sigma * normal(rng);
        occluded[std::size_t(j)] = unit(rng) < cfg.occlusion_prob;
      }
      const double blur = uniform(cfg.blur_min, cfg.blur_max);
      HeatmapStack deg = gaussian_blur(encode_gaussian(noisy, cfg.h, cfg.w, cfg.sigma), blur);
      for (int j = 0; j < cfg.joints; ++j)
        if (occluded[std::size_t(j)]) std::ranges::fill(deg.channel(j), 0.0);
      clip.degraded[std::size_t(person)].push_back(std::move(deg));
    }
  }
  return clip;
}

Keypoint transform_point(const Keypoint& kp, const AugmentParams& params, int h, int w) {
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  double x = params.flip ? (w - 1) - kp.x : kp.x;
  double y = kp.y;
  const double th = params.rotation_deg * kPi / 180.0;
  double c = std::cos(th), s = std::sin(th);
  // Exact quarter turns.
  if (std::abs(c) < 1e-12) c = 0.0;
  if (std::abs(s) < 1e-12) s = 0.0;
  const double rx = x - cx, ry = y - cy;
  x = cx + params.scale * (c * rx - s * ry) + params.shift_x;
  y = cy + params.scale * (s * rx + c * ry) + params.shift_y;
  return {x, y, kp.visible && on_grid({x, y, true}, h, w)};
}

namespace {

HeatmapStack resample(const HeatmapStack& in, const AugmentParams& params) {
  const int H = in.h(), W = in.w(), J = in.joints();
  const double cx = 0.5 * (W - 1), cy = 0.5 * (H - 1);
  const double th = params.rotation_deg * kPi / 180.0;
  double c = std::cos(th), s = std::sin(th);
  if (std::abs(c) < 1e-12) c = 0.0;
  if (std::abs(s) < 1e-12) s = 0.0;
  const bool swap = params.flip && J == 15;
  HeatmapStack out(J, H, W);
  for (int j = 0; j < J; ++j) {
    const int src_j = swap ? kFlipPartner[std::size_t(j)] : j;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        // Inverse map: unshift, unscale, unrotate, unflip.
        const double ux = (x - params.shift_x - cx) / params.scale, uy = (y - params.shift_y - cy) / params.scale;
        double sx = cx + c * ux + s * uy;
        const double sy = cy - s * ux + c * uy;
        if (params.flip) sx = (W - 1) - sx;
        out.at(j, y, x) = bilinear_sample(in.tensor(), 0, src_j, sy, sx);
      }
  }
  return out;
}

Pose transform_pose(const Pose& pose, const AugmentParams& params, int h, int w) {
  Pose out(pose.size());
  const bool swap = params.flip && pose.size() == 15;
  for (int j = 0; j < pose.size(); ++j)
    out[j] = transform_point(pose[swap ? kFlipPartner[std::size_t(j)] : j], params, h, w);
  return out;
}

bool any_visible(const SyntheticClip& clip) {
  for (const auto& person : clip.poses)
    for (const auto& pose : person)
      for (const auto& kp : pose.joints)
        if (kp.visible) return true;
  return false;
}

}  // namespace

SyntheticClip augment(const SyntheticClip& clip, const AugmentParams& params) {
  require(params.scale > 0.0, "augment: scale must be positive");
  if (params.identity()) return clip;
  SyntheticClip out = clip;
  for (std::size_t p = 0; p < clip.poses.size(); ++p)
    for (std::size_t f = 0; f < clip.poses[p].size(); ++f) {
      out.poses[p][f] = transform_pose(clip.poses[p][f], params, clip.h, clip.w);
      out.degraded[p][f] = resample(clip.degraded[p][f], params);
      out.clean[p][f] = resample(clip.clean[p][f], params);
    }
  return out;
}

SyntheticClip augment(const SyntheticClip& clip, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 2; ++attempt) {
    AugmentParams p;
    p.rotation_deg = -30.0 + 60.0 * unit(rng);
    p.scale = 0.8 + 0.4 * unit(rng);
    p.shift_x = (unit(rng) - 0.5) * 0.2 * clip.w;
    p.shift_y = (unit(rng) - 0.5) * 0.2 * clip.h;
    p.flip = unit(rng) < 0.5;
    SyntheticClip out = augment(clip, p);
    if (any_visible(out) || !any_visible(clip)) return out;
  }
  throw InvalidArgument("augment: transform pushed every joint out of the frame twice");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(base) ^ a) ^ b);
}

}  // namespace dcpose
