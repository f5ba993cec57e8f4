#pragma once

#include <cstddef>
#include <vector>

#include "dcpose/kernels.hpp"

namespace dcpose {

inline constexpr int kPcnTrunkWidth = 32;
inline constexpr int kPcnTrunkDepth = 1;
inline const std::vector<int> kDefaultDilations{3, 6, 9, 12, 15};

// Per dilation rate: the offset and mask convolutions on top of the shared
// trunks, and the deformable layer they drive.
struct DilationBranch {
  int dilation = 3;
  ConvParams offset_conv;  // trunk -> 2*9
  ConvParams mask_conv;    // trunk -> 9
  ConvParams deform;       // J -> J

  DilationBranch zeros_like() const;
};

struct PcnParams {
  ResidualStack offset_trunk;  // 2J -> 32 -> 32
  ResidualStack mask_trunk;    // same topology, separate parameters
  std::vector<DilationBranch> branches;

  PcnParams zeros_like() const;
};

PcnParams make_pcn_params(int joints, const std::vector<int>& dilations = kDefaultDilations);

Tensor4 offset_head(const Tensor4& merged, const Tensor4& fused, const PcnParams& params, std::size_t branch);
// Logistic-squashed, values in (0, 1).
Tensor4 mask_head(const Tensor4& merged, const Tensor4& fused, const PcnParams& params, std::size_t branch);

struct PcnCache {
  Tensor4 merged;
  Tensor4 trunk_input;
  ResidualCache offset_trunk, mask_trunk;
  Tensor4 offset_features, mask_features;
  std::vector<DeformInputs> deform_inputs;
};

// Mean over branches of deform_conv_v2(merged, offsets_d, masks_d), summed in
// ascending dilation order.
Tensor4 correct(const Tensor4& merged, const Tensor4& fused, const PcnParams& params, PcnCache* cache = nullptr);

struct PcnInputGrads {
  Tensor4 dmerged;
  Tensor4 dfused;
};

PcnInputGrads correct_backward(const PcnCache& cache, const PcnParams& params, const Tensor4& dy, PcnParams* grad);

}  // namespace dcpose
