#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcpose/heatmap.hpp"
#include "dcpose/pcn.hpp"
#include "dcpose/prf.hpp"
#include "dcpose/ptm.hpp"

namespace dcpose {

enum class PtmMode {
  Full,     // weighted grouped stack
  SumConv,  // h_p + h_c + h_n through one plain 3x3 conv
  Current,  // merged heatmap is h_c
};

enum class PrfMode {
  Full,       // weighted residuals through a grouped stack
  PlainConv,  // [h_c - h_p, h_n - h_c] through one plain 3x3 conv
};

struct ModelConfig {
  int joints = kDefaultJoints;
  PtmMode ptm = PtmMode::Full;
  PrfMode prf = PrfMode::Full;
  std::vector<int> dilations = kDefaultDilations;

  bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
  ModelConfig config;
  ResidualStack ptm;        // PtmMode::Full
  ConvParams ptm_sum_conv;  // PtmMode::SumConv
  ResidualStack prf;        // PrfMode::Full
  ConvParams prf_conv;      // PrfMode::PlainConv
  PcnParams pcn;

  ModelParams zeros_like() const;
};

// All-zero parameters with the shapes implied by the config.
ModelParams make_model_params(const ModelConfig& cfg);

// Hand-set parameters for which the refined heatmap equals h_c.
ModelParams make_identity_params(const ModelConfig& cfg);

struct ParamRef {
  std::string name;
  std::vector<int> shape;
  std::span<double> values;
  bool is_bias = false;
};

// Every learnable tensor in a fixed order with a stable name.
std::vector<ParamRef> param_refs(ModelParams& params);
std::size_t param_count(const ModelParams& params);

struct ForwardCache {
  ClipTriplet clip;
  Tensor4 ptm_input;
  ResidualCache ptm;
  Tensor4 residuals;
  PrfCache prf;
  Tensor4 prf_plain_input;
  Tensor4 merged, fused;
  PcnCache pcn;
};

Tensor4 model_forward(const ModelParams& params, const ClipTriplet& clip, ForwardCache* cache = nullptr);

// Accumulates parameter gradients into grad.
void model_backward(const ModelParams& params, const ForwardCache& cache, const Tensor4& dout, ModelParams& grad);

HeatmapStack refine(const ModelParams& params, const ClipTriplet& clip);

std::string to_string(PtmMode m);
std::string to_string(PrfMode m);

}  // namespace dcpose
