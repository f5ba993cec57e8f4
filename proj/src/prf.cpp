#include "dcpose/prf.hpp"

#include "dcpose/ptm.hpp"

namespace dcpose {

Tensor4 pose_residuals(const ClipTriplet& clip) {
  require(clip.hp.same_shape(clip.hc) && clip.hn.same_shape(clip.hc), "pose_residuals: heatmap shapes differ");
  const auto w = temporal_weights(clip.p, clip.c, clip.n);
  const int J = clip.hc.joints();
  Tensor4 out(1, 4 * J, clip.hc.h(), clip.hc.w());
  for (int j = 0; j < J; ++j) {
    const auto hp = clip.hp.channel(j), hc = clip.hc.channel(j), hn = clip.hn.channel(j);
    auto back = out.plane(0, j), fwd = out.plane(0, J + j);
    auto wback = out.plane(0, 2 * J + j), wfwd = out.plane(0, 3 * J + j);
    for (std::size_t i = 0; i < hc.size(); ++i) {
      back[i] = hc[i] - hp[i];
      fwd[i] = hn[i] - hc[i];
      wback[i] = w.prev * back[i];
      wfwd[i] = w.next * fwd[i];
    }
  }
  return out;
}

ResidualStack make_prf_params(int joints) {
  require(joints >= 1, "prf: need at least one joint");
  return make_residual_stack(4 * joints, kPrfHiddenPerJoint * joints, joints, kPrfDepth, joints);
}

Tensor4 residuals_by_joint(const Tensor4& psi) {
  require(psi.c() % 4 == 0, "residuals_by_joint: channel count must be 4J");
  const int J = psi.c() / 4;
  Tensor4 out(psi.shape());
  for (int n = 0; n < psi.n(); ++n)
    for (int b = 0; b < 4; ++b)
      for (int j = 0; j < J; ++j) std::ranges::copy(psi.plane(n, b * J + j), out.plane(n, 4 * j + b).begin());
  return out;
}

Tensor4 residuals_by_block(const Tensor4& by_joint) {
  require(by_joint.c() % 4 == 0, "residuals_by_block: channel count must be 4J");
  const int J = by_joint.c() / 4;
  Tensor4 out(by_joint.shape());
  for (int n = 0; n < by_joint.n(); ++n)
    for (int b = 0; b < 4; ++b)
      for (int j = 0; j < J; ++j) std::ranges::copy(by_joint.plane(n, 4 * j + b), out.plane(n, b * J + j).begin());
  return out;
}

Tensor4 prf_fuse(const Tensor4& psi, const ResidualStack& params, PrfCache* cache) {
  require(!params.empty() && psi.c() == params.front().conv1.in_channels(),
          "prf_fuse: residual feature has " + std::to_string(psi.c()) + " channels, parameters expect " +
              std::to_string(params.empty() ? 0 : params.front().conv1.in_channels()));
  return residual_stack(residuals_by_joint(psi), params, cache ? &cache->stack : nullptr);
}

Tensor4 prf_fuse_backward(const PrfCache& cache, const ResidualStack& params, const Tensor4& dy, ResidualStack* grad) {
  return residuals_by_block(residual_stack_backward(cache.stack, params, dy, grad));
}

}  // namespace dcpose
