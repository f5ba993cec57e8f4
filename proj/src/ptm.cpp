#include "dcpose/ptm.hpp"

namespace dcpose {

TemporalWeights temporal_weights(int p, int c, int n) {
  require(p < c && c < n, "temporal_weights: need p < c < n, got (" + std::to_string(p) + "," + std::to_string(c) +
                              "," + std::to_string(n) + ")");
  const double span = double(n - p);
  return {double(n - c) / span, double(c - p) / span};
}

Tensor4 stack_grouped(const ClipTriplet& clip) {
  require(clip.hp.same_shape(clip.hc) && clip.hn.same_shape(clip.hc), "stack_grouped: heatmap shapes differ");
  const auto w = temporal_weights(clip.p, clip.c, clip.n);
  const int J = clip.hc.joints();
  Tensor4 out(1, 3 * J, clip.hc.h(), clip.hc.w());
  for (int j = 0; j < J; ++j) {
    auto prev = out.plane(0, 3 * j), cur = out.plane(0, 3 * j + 1), next = out.plane(0, 3 * j + 2);
    const auto hp = clip.hp.channel(j), hc = clip.hc.channel(j), hn = clip.hn.channel(j);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      prev[i] = w.prev * hp[i];
      cur[i] = hc[i];
      next[i] = w.next * hn[i];
    }
  }
  return out;
}

Tensor4 weighted_sum(const ClipTriplet& clip) {
  const auto w = temporal_weights(clip.p, clip.c, clip.n);
  return w.prev * clip.hp.tensor() + clip.hc.tensor() + w.next * clip.hn.tensor();
}

ResidualStack make_ptm_params(int joints) {
  require(joints >= 1, "ptm: need at least one joint");
  return make_residual_stack(3 * joints, kPtmHiddenPerJoint * joints, joints, kPtmDepth, joints);
}

Tensor4 ptm_merge(const Tensor4& stacked, const ResidualStack& params, ResidualCache* cache) {
  require(!params.empty() && stacked.c() == params.front().conv1.in_channels(),
          "ptm_merge: stacked feature has " + std::to_string(stacked.c()) + " channels, parameters expect " +
              std::to_string(params.empty() ? 0 : params.front().conv1.in_channels()));
  return residual_stack(stacked, params, cache);
}

ResidualStack make_ptm_summation_params(int joints) {
  auto s = make_ptm_params(joints);
  // Block 0: zero convolutions, 1x1 projection summing the joint's triple.
  // Later blocks: zero convolutions and identity skips.
  auto& proj = *s.front().skip;
  for (int j = 0; j < joints; ++j)
    for (int t = 0; t < 3; ++t) proj.weight(j, t, 0, 0) = 1.0;
  return s;
}

}  // namespace dcpose
