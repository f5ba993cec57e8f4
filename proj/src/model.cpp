#include "dcpose/model.hpp"

namespace dcpose {

namespace {

void add_conv(std::vector<ParamRef>& out, const std::string& name, ConvParams& p) {
  const auto& s = p.weight.shape();
  out.push_back({name + ".weight", {s.n, s.c, s.h, s.w}, p.weight.data(), false});
  out.push_back({name + ".bias", {int(p.bias.size())}, p.bias, true});
}

void add_stack(std::vector<ParamRef>& out, const std::string& name, ResidualStack& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::string b = name + ".block" + std::to_string(i);
    add_conv(out, b + ".conv1", s[i].conv1);
    add_conv(out, b + ".conv2", s[i].conv2);
    if (s[i].skip) add_conv(out, b + ".skip", *s[i].skip);
  }
}

Tensor4 plain_residuals(const ClipTriplet& clip) {
  return concat_channels(clip.hc.tensor() - clip.hp.tensor(), clip.hn.tensor() - clip.hc.tensor());
}

}  // namespace

ModelParams ModelParams::zeros_like() const {
  ModelParams g = *this;
  g.ptm = dcpose::zeros_like(ptm);
  g.ptm_sum_conv = ptm_sum_conv.zeros_like();
  g.prf = dcpose::zeros_like(prf);
  g.prf_conv = prf_conv.zeros_like();
  g.pcn = pcn.zeros_like();
  return g;
}

ModelParams make_model_params(const ModelConfig& cfg) {
  require(cfg.joints >= 1, "model: need at least one joint");
  ModelParams p;
  p.config = cfg;
  if (cfg.ptm == PtmMode::Full) p.ptm = make_ptm_params(cfg.joints);
  if (cfg.ptm == PtmMode::SumConv) p.ptm_sum_conv = ConvParams::zeros(cfg.joints, cfg.joints, 3);
  if (cfg.prf == PrfMode::Full) p.prf = make_prf_params(cfg.joints);
  if (cfg.prf == PrfMode::PlainConv) p.prf_conv = ConvParams::zeros(2 * cfg.joints, cfg.joints, 3);
  p.pcn = make_pcn_params(cfg.joints, cfg.dilations);
  return p;
}

ModelParams make_identity_params(const ModelConfig& cfg) {
  ModelParams p = make_model_params(cfg);
  const int J = cfg.joints;
  if (cfg.ptm == PtmMode::Full) {
    auto& proj = *p.ptm.front().skip;
    for (int j = 0; j < J; ++j) proj.weight(j, 1, 0, 0) = 1.0;
  }
  if (cfg.ptm == PtmMode::SumConv) {
    // h_p + h_c + h_n cannot be undone by a linear map of the sum alone; the
    // identity only holds for static clips in this variant.
    for (int j = 0; j < J; ++j) p.ptm_sum_conv.weight(j, j, 1, 1) = 1.0 / 3.0;
  }
  // Zero offsets, masks sigmoid(0) = 0.5, centre tap 2.
  for (auto& b : p.pcn.branches)
    for (int j = 0; j < J; ++j) b.deform.weight(j, j, 1, 1) = 2.0;
  return p;
}

std::vector<ParamRef> param_refs(ModelParams& p) {
  std::vector<ParamRef> out;
  const auto& cfg = p.config;
  if (cfg.ptm == PtmMode::Full) add_stack(out, "ptm", p.ptm);
  if (cfg.ptm == PtmMode::SumConv) add_conv(out, "ptm.sum_conv", p.ptm_sum_conv);
  if (cfg.prf == PrfMode::Full) add_stack(out, "prf", p.prf);
  if (cfg.prf == PrfMode::PlainConv) add_conv(out, "prf.plain_conv", p.prf_conv);
  add_stack(out, "pcn.offset_trunk", p.pcn.offset_trunk);
  add_stack(out, "pcn.mask_trunk", p.pcn.mask_trunk);
  for (auto& b : p.pcn.branches) {
    const std::string name = "pcn.d" + std::to_string(b.dilation);
    add_conv(out, name + ".offset", b.offset_conv);
    add_conv(out, name + ".mask", b.mask_conv);
    add_conv(out, name + ".deform", b.deform);
  }
  return out;
}

std::size_t param_count(const ModelParams& params) {
  auto copy = params;
  std::size_t n = 0;
  for (const auto& r : param_refs(copy)) n += r.values.size();
  return n;
}

Tensor4 model_forward(const ModelParams& params, const ClipTriplet& clip, ForwardCache* cache) {
  const auto& cfg = params.config;
  require(clip.hc.joints() == cfg.joints, "model: clip has " + std::to_string(clip.hc.joints()) +
                                              " joints, model expects " + std::to_string(cfg.joints));
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.clip = clip;

  switch (cfg.ptm) {
    case PtmMode::Full:
      c.ptm_input = stack_grouped(clip);
      c.merged = ptm_merge(c.ptm_input, params.ptm, &c.ptm);
      break;
    case PtmMode::SumConv:
      c.ptm_input = clip.hp.tensor() + clip.hc.tensor() + clip.hn.tensor();
      c.merged = conv2d(c.ptm_input, params.ptm_sum_conv);
      break;
    case PtmMode::Current:
      c.merged = clip.hc.tensor();
      break;
  }

  switch (cfg.prf) {
    case PrfMode::Full:
      c.residuals = pose_residuals(clip);
      c.fused = prf_fuse(c.residuals, params.prf, &c.prf);
      break;
    case PrfMode::PlainConv:
      c.prf_plain_input = plain_residuals(clip);
      c.fused = conv2d(c.prf_plain_input, params.prf_conv);
      break;
  }

  return correct(c.merged, c.fused, params.pcn, &c.pcn);
}

void model_backward(const ModelParams& params, const ForwardCache& cache, const Tensor4& dout, ModelParams& grad) {
  const auto& cfg = params.config;
  auto g = correct_backward(cache.pcn, params.pcn, dout, &grad.pcn);
  switch (cfg.ptm) {
    case PtmMode::Full:
      residual_stack_backward(cache.ptm, params.ptm, g.dmerged, &grad.ptm);
      break;
    case PtmMode::SumConv:
      conv2d_backward(cache.ptm_input, params.ptm_sum_conv, g.dmerged, &grad.ptm_sum_conv);
      break;
    case PtmMode::Current:
      break;
  }
  switch (cfg.prf) {
    case PrfMode::Full:
      prf_fuse_backward(cache.prf, params.prf, g.dfused, &grad.prf);
      break;
    case PrfMode::PlainConv:
      conv2d_backward(cache.prf_plain_input, params.prf_conv, g.dfused, &grad.prf_conv);
      break;
  }
}

HeatmapStack refine(const ModelParams& params, const ClipTriplet& clip) {
  return HeatmapStack(model_forward(params, clip));
}

std::string to_string(PtmMode m) {
  switch (m) {
    case PtmMode::Full: return "full";
    case PtmMode::SumConv: return "sum_conv";
    case PtmMode::Current: return "current";
  }
  return "?";
}

std::string to_string(PrfMode m) {
  switch (m) {
    case PrfMode::Full: return "full";
    case PrfMode::PlainConv: return "plain_conv";
  }
  return "?";
}

}  // namespace dcpose
