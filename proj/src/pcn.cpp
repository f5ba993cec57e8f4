#include "dcpose/pcn.hpp"

#include <algorithm>
#include <numeric>

namespace dcpose {

namespace {

constexpr int kTaps = 9;

std::vector<std::size_t> ascending_dilation_order(const PcnParams& p) {
  std::vector<std::size_t> order(p.branches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, {}, [&](std::size_t i) { return p.branches[i].dilation; });
  return order;
}

Tensor4 trunk_input(const Tensor4& merged, const Tensor4& fused) {
  require(merged.shape() == fused.shape(),
          "pcn: merged and fused features differ in shape: " + merged.shape().str() + " vs " + fused.shape().str());
  return concat_channels(merged, fused);
}

void check_branch(const PcnParams& params, std::size_t branch) {
  require(branch < params.branches.size(), "pcn: branch index out of range");
}

}  // namespace

DilationBranch DilationBranch::zeros_like() const {
  return {dilation, offset_conv.zeros_like(), mask_conv.zeros_like(), deform.zeros_like()};
}

PcnParams PcnParams::zeros_like() const {
  PcnParams g{dcpose::zeros_like(offset_trunk), dcpose::zeros_like(mask_trunk), {}};
  for (const auto& b : branches) g.branches.push_back(b.zeros_like());
  return g;
}

PcnParams make_pcn_params(int joints, const std::vector<int>& dilations) {
  require(joints >= 1, "pcn: need at least one joint");
  require(!dilations.empty(), "pcn: need at least one dilation branch");
  PcnParams p;
  p.offset_trunk = make_residual_stack(2 * joints, kPcnTrunkWidth, kPcnTrunkWidth, kPcnTrunkDepth, 1);
  p.mask_trunk = make_residual_stack(2 * joints, kPcnTrunkWidth, kPcnTrunkWidth, kPcnTrunkDepth, 1);
  for (int d : dilations) {
    require(d >= 1, "pcn: dilation must be >= 1");
    p.branches.push_back({d, ConvParams::zeros(kPcnTrunkWidth, 2 * kTaps, 3, d), ConvParams::zeros(kPcnTrunkWidth, kTaps, 3, d),
                          ConvParams::zeros(joints, joints, 3, d)});
  }
  return p;
}

Tensor4 offset_head(const Tensor4& merged, const Tensor4& fused, const PcnParams& params, std::size_t branch) {
  check_branch(params, branch);
  const Tensor4 feat = residual_stack(trunk_input(merged, fused), params.offset_trunk);
  return conv2d(feat, params.branches[branch].offset_conv);
}

Tensor4 mask_head(const Tensor4& merged, const Tensor4& fused, const PcnParams& params, std::size_t branch) {
  check_branch(params, branch);
  const Tensor4 feat = residual_stack(trunk_input(merged, fused), params.mask_trunk);
  return sigmoid(conv2d(feat, params.branches[branch].mask_conv));
}

Tensor4 correct(const Tensor4& merged, const Tensor4& fused, const PcnParams& params, PcnCache* cache) {
  require(!params.branches.empty(), "pcn: empty branch list");
  PcnCache local;
  PcnCache& c = cache ? *cache : local;
  c.merged = merged;
  c.trunk_input = trunk_input(merged, fused);
  c.offset_features = residual_stack(c.trunk_input, params.offset_trunk, &c.offset_trunk);
  c.mask_features = residual_stack(c.trunk_input, params.mask_trunk, &c.mask_trunk);
  c.deform_inputs.assign(params.branches.size(), {});

  Tensor4 out(merged.n(), params.branches.front().deform.out_channels(), merged.h(), merged.w());
  for (std::size_t i : ascending_dilation_order(params)) {
    const auto& b = params.branches[i];
    auto& di = c.deform_inputs[i];
    di.offsets = conv2d(c.offset_features, b.offset_conv);
    di.masks = sigmoid(conv2d(c.mask_features, b.mask_conv));
    out += deform_conv_v2(merged, di, b.deform);
  }
  out *= 1.0 / double(params.branches.size());
  return out;
}

PcnInputGrads correct_backward(const PcnCache& cache, const PcnParams& params, const Tensor4& dy, PcnParams* grad) {
  require(cache.deform_inputs.size() == params.branches.size(), "pcn backward: cache does not match parameters");
  const Tensor4 dbranch = (1.0 / double(params.branches.size())) * dy;
  Tensor4 dmerged(cache.merged.shape());
  Tensor4 doff_feat(cache.offset_features.shape()), dmask_feat(cache.mask_features.shape());
  for (std::size_t i : ascending_dilation_order(params)) {
    const auto& b = params.branches[i];
    const auto& di = cache.deform_inputs[i];
    DilationBranch* gb = grad ? &grad->branches[i] : nullptr;
    auto g = deform_conv_v2_backward(cache.merged, di, b.deform, dbranch, gb ? &gb->deform : nullptr);
    dmerged += g.dx;
    doff_feat += conv2d_backward(cache.offset_features, b.offset_conv, g.doffsets, gb ? &gb->offset_conv : nullptr);
    const Tensor4 dmask_pre = sigmoid_backward(di.masks, std::move(g.dmasks));
    dmask_feat += conv2d_backward(cache.mask_features, b.mask_conv, dmask_pre, gb ? &gb->mask_conv : nullptr);
  }
  Tensor4 dinput = residual_stack_backward(cache.offset_trunk, params.offset_trunk, doff_feat,
                                           grad ? &grad->offset_trunk : nullptr);
  dinput += residual_stack_backward(cache.mask_trunk, params.mask_trunk, dmask_feat, grad ? &grad->mask_trunk : nullptr);
  const int J = cache.merged.c();
  dmerged += slice_channels(dinput, 0, J);
  return {std::move(dmerged), slice_channels(dinput, J, dinput.c() - J)};
}

}  // namespace dcpose
