#pragma once

#include "dcpose/heatmap.hpp"
#include "dcpose/kernels.hpp"

namespace dcpose {

struct TemporalWeights {
  double prev = 0.5;
  double next = 0.5;
};

// Distance-based weights of the adjacent frames; the current frame has weight 1.
TemporalWeights temporal_weights(int p, int c, int n);

// (1, 3J, H, W): per joint the triple [w_p*h_p^j, h_c^j, w_n*h_n^j].
Tensor4 stack_grouped(const ClipTriplet& clip);

// Fixed, unlearned merge w_p*h_p + h_c + w_n*h_n.
Tensor4 weighted_sum(const ClipTriplet& clip);

inline constexpr int kPtmHiddenPerJoint = 16;
inline constexpr int kPtmDepth = 2;

// Grouped (one group per joint) stack mapping 3J -> J channels.
ResidualStack make_ptm_params(int joints);

// Maps the stacked feature to the merged heatmaps.
Tensor4 ptm_merge(const Tensor4& stacked, const ResidualStack& params, ResidualCache* cache = nullptr);

// Parameters for which ptm_merge reproduces weighted_sum on non-negative input.
ResidualStack make_ptm_summation_params(int joints);

}  // namespace dcpose
