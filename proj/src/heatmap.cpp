#include "dcpose/heatmap.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace dcpose {

HeatmapStack::HeatmapStack(Tensor4 t) : t_(std::move(t)) {
  require(t_.n() == 1, "HeatmapStack: expected batch size 1, got " + t_.shape().str());
}

HeatmapStack encode_gaussian(const Pose& pose, int h, int w, double sigma) {
  require(sigma > 0.0, "encode_gaussian: sigma must be positive");
  require(h >= 1 && w >= 1, "encode_gaussian: empty grid");
  HeatmapStack out(pose.size(), h, w);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int j = 0; j < pose.size(); ++j) {
    const auto& kp = pose[j];
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y))
      throw InvalidArgument("encode_gaussian: non-finite keypoint for joint " + std::to_string(j));
    if (!kp.visible) continue;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dx = x - kp.x, dy = y - kp.y;
        out.at(j, y, x) = std::exp(-(dx * dx + dy * dy) * inv);
      }
  }
  return out;
}

Pose decode_argmax(const HeatmapStack& stack) {
  Pose pose(stack.joints());
  for (int j = 0; j < stack.joints(); ++j) {
    const auto ch = stack.channel(j);
    std::size_t best = 0;
    for (std::size_t i = 1; i < ch.size(); ++i)
      if (ch[i] > ch[best]) best = i;
    pose[j].x = double(best % std::size_t(stack.w()));
    pose[j].y = double(best / std::size_t(stack.w()));
    pose[j].visible = !ch.empty() && ch[best] > kDecodeThreshold;
  }
  return pose;
}

BBox enlarge_bbox(const BBox& b, double factor, int h, int w) {
  require(b.valid(), "enlarge_bbox: invalid box");
  require(factor >= 0.0, "enlarge_bbox: negative factor");
  const double ex = 0.5 * factor * (b.x_max - b.x_min);
  const double ey = 0.5 * factor * (b.y_max - b.y_min);
  BBox out{std::max(0.0, b.x_min - ex), std::max(0.0, b.y_min - ey), std::min(double(w), b.x_max + ex),
           std::min(double(h), b.y_max + ey)};
  require(out.valid(), "enlarge_bbox: box is degenerate after clamping to the frame");
  return out;
}

BBox pose_bbox(const Pose& pose) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  BBox b{inf, inf, -inf, -inf};
  for (const auto& kp : pose.joints) {
    if (!kp.visible) continue;
    b.x_min = std::min(b.x_min, kp.x);
    b.y_min = std::min(b.y_min, kp.y);
    b.x_max = std::max(b.x_max, kp.x);
    b.y_max = std::max(b.y_max, kp.y);
  }
  return b;
}

ClipTriplet assemble_clip(std::span<const HeatmapStack> frames, int c, int T, const FrameSelector& sel) {
  require(!frames.empty(), "assemble_clip: empty sequence");
  require(c >= 0 && c < int(frames.size()), "assemble_clip: current index out of range");
  require(T >= 1, "assemble_clip: window radius must be >= 1");
  const int last = int(frames.size()) - 1;
  const int lo = std::max(0, c - T), hi = std::min(last, c + T);

  int p = c - 1, n = c + 1;
  if (sel.seeded) {
    // Per-frame stream so the choice does not depend on iteration order.
    std::seed_seq seq{std::uint32_t(sel.seed), std::uint32_t(sel.seed >> 32), std::uint32_t(c), std::uint32_t(T)};
    std::mt19937_64 rng(seq);
    if (lo < c) p = std::uniform_int_distribution<int>(lo, c - 1)(rng);
    if (hi > c) n = std::uniform_int_distribution<int>(c + 1, hi)(rng);
  }

  ClipTriplet t;
  t.c = c;
  t.T = T;
  t.hc = frames[std::size_t(c)];
  const bool have_prev = sel.use_prev && lo < c;
  const bool have_next = sel.use_next && hi > c;
  t.p = have_prev ? p : c - 1;
  t.n = have_next ? n : c + 1;
  t.hp = have_prev ? frames[std::size_t(p)] : t.hc;
  t.hn = have_next ? frames[std::size_t(n)] : t.hc;
  require(t.hp.same_shape(t.hc) && t.hn.same_shape(t.hc), "assemble_clip: frames differ in shape");
  return t;
}

}  // namespace dcpose
