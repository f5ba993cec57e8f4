#pragma once

#include "dcpose/heatmap.hpp"
#include "dcpose/kernels.hpp"

namespace dcpose {

// (1, 4J, H, W) in block order [psi(p,c), psi(c,n), w_p*psi(p,c), w_n*psi(c,n)],
// with psi(p,c) = h_c - h_p and psi(c,n) = h_n - h_c.
Tensor4 pose_residuals(const ClipTriplet& clip);

inline constexpr int kPrfHiddenPerJoint = 16;
inline constexpr int kPrfDepth = 2;

// Grouped stack mapping 4J -> J channels, four input channels per joint.
ResidualStack make_prf_params(int joints);

// Block-major residual feature -> joint-major layout expected by the grouped
// stack, and its inverse.
Tensor4 residuals_by_joint(const Tensor4& psi);
Tensor4 residuals_by_block(const Tensor4& by_joint);

struct PrfCache {
  ResidualCache stack;
};

Tensor4 prf_fuse(const Tensor4& psi, const ResidualStack& params, PrfCache* cache = nullptr);
// Returns dL/dpsi in block order.
Tensor4 prf_fuse_backward(const PrfCache& cache, const ResidualStack& params, const Tensor4& dy, ResidualStack* grad);

}  // namespace dcpose
