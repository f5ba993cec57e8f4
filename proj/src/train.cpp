#include "dcpose/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace dcpose {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) { return derive_seed(a, b, c); }

struct Sample {
  std::size_t clip = 0;
  int frame = 0;
};

// Per-sample tensors are large enough to hit mmap on every allocation.
void keep_heap_warm() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 64 << 20);
    return true;
  }();
  (void)once;
#endif
}

std::vector<Sample> enumerate_samples(const std::vector<const DatasetClip*>& clips) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < clips.size(); ++i)
    for (int f = 0; f < clips[i]->clip.frames(); ++f) out.push_back({i, f});
  return out;
}

FrameSelector selector(int window, bool use_prev, bool use_next, std::uint64_t seed) {
  return {window > 1, seed, use_prev, use_next};
}

}  // namespace

std::vector<bool> visibility(const Pose& pose) {
  std::vector<bool> v;
  v.reserve(pose.joints.size());
  for (const auto& kp : pose.joints) v.push_back(kp.visible);
  return v;
}

double heatmap_loss(const HeatmapStack& pred, const HeatmapStack& gt, const std::vector<bool>& visible,
                    HeatmapStack* grad) {
  require(pred.same_shape(gt), "loss: prediction and target differ in shape");
  require(visible.size() == std::size_t(gt.joints()), "loss: visibility length must equal the joint count");
  if (!pred.tensor().all_finite() || !gt.tensor().all_finite()) throw NumericError("loss: non-finite input");
  const double inv_n = 1.0 / double(gt.joints());
  if (grad) *grad = HeatmapStack(gt.joints(), gt.h(), gt.w());
  double total = 0.0;
  for (int j = 0; j < gt.joints(); ++j) {
    if (!visible[std::size_t(j)]) continue;
    const auto p = pred.channel(j), g = gt.channel(j);
    double ss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - g[i];
      ss += d * d;
    }
    total += ss;
    if (grad) {
      auto gc = grad->channel(j);
      for (std::size_t i = 0; i < p.size(); ++i) gc[i] = 2.0 * inv_n * (p[i] - g[i]);
    }
  }
  return inv_n * total;
}

ModelState make_model_state(const ModelConfig& cfg) {
  ModelState s;
  s.params = make_model_params(cfg);
  s.first_moment = s.params.zeros_like();
  s.second_moment = s.params.zeros_like();
  return s;
}

void init_weights(ModelState& state, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, kInitWeightStd);
  for (auto& ref : param_refs(state.params)) {
    if (ref.is_bias) {
      std::ranges::fill(ref.values, 0.0);
    } else {
      for (auto& v : ref.values) v = to_file_precision(normal(rng));
    }
  }
  state.first_moment = state.params.zeros_like();
  state.second_moment = state.params.zeros_like();
  state.step = 0;
  state.epoch = 0;
}

void adam_step(ModelState& state, ModelParams& grads, double lr, const AdamHyper& hyper) {
  auto p = param_refs(state.params);
  auto g = param_refs(grads);
  auto m = param_refs(state.first_moment);
  auto v = param_refs(state.second_moment);
  require(p.size() == g.size() && p.size() == m.size() && p.size() == v.size(),
          "adam_step: gradient structure does not match parameters");
  for (std::size_t i = 0; i < g.size(); ++i) {
    require(g[i].values.size() == p[i].values.size(), "adam_step: gradient shape mismatch for " + p[i].name);
    for (double x : g[i].values)
      if (!std::isfinite(x)) throw NumericError("non-finite gradient in " + g[i].name);
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, double(state.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto pv = p[i].values, gv = g[i].values, mv = m[i].values, vv = v[i].values;
    for (std::size_t k = 0; k < pv.size(); ++k) {
      const double mk = hyper.beta1 * mv[k] + (1.0 - hyper.beta1) * gv[k];
      const double vk = hyper.beta2 * vv[k] + (1.0 - hyper.beta2) * gv[k] * gv[k];
      const double update = lr * (mk / bc1) / (std::sqrt(vk / bc2) + hyper.eps);
      mv[k] = to_file_precision(mk);
      vv[k] = to_file_precision(vk);
      pv[k] = to_file_precision(pv[k] - update);
    }
  }
}

void TrainConfig::validate() const {
  require(base_lr >= 0.0 && std::isfinite(base_lr), "train: learning rate must be >= 0");
  require(lr_decay > 0.0 && decay_every >= 1, "train: invalid learning-rate schedule");
  require(epochs >= 0, "train: epochs must be >= 0");
  require(batch_size >= 1, "train: batch size must be >= 1");
  require(window >= 1, "train: window radius T must be >= 1");
  require(!model.dilations.empty(), "train: dilation set must be non-empty");
  for (int d : model.dilations)
    require(d == 3 || d == 6 || d == 9 || d == 12 || d == 15, "train: dilation rates must come from {3,6,9,12,15}");
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  return cfg.base_lr * std::pow(cfg.lr_decay, double(epoch / cfg.decay_every));
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  require(data.manifest.joints == cfg.model.joints, "train: dataset has " + std::to_string(data.manifest.joints) +
                                                        " joints, model expects " + std::to_string(cfg.model.joints));
  ModelState state = make_model_state(cfg.model);
  init_weights(state, cfg.seed);
  return train_from(std::move(state), data, cfg, on_epoch);
}

TrainResult train_from(ModelState state, const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  require(state.params.config == cfg.model, "train: state architecture differs from the training config");
  keep_heap_warm();
  const auto clips = data.split(cfg.split);
  require(!clips.empty(), "train: split '" + cfg.split + "' is empty");
  state.window = cfg.window;
  state.use_prev = cfg.use_prev;
  state.use_next = cfg.use_next;

  auto diverged = [&cfg](const ModelState& last, int epoch, const std::string& why) {
    if (cfg.divergence_checkpoint) save_checkpoint(*cfg.divergence_checkpoint, last);
    throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(last.step) +
                       ": " + why);
  };

  TrainResult result;
  const auto ordered = enumerate_samples(clips);
  for (int epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    auto samples = ordered;
    std::mt19937_64 order_rng(mix(cfg.seed, 0x5eed, std::uint64_t(epoch)));
    std::shuffle(samples.begin(), samples.end(), order_rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(samples.size(), start + std::size_t(cfg.batch_size));
      const double inv_batch = 1.0 / double(end - start);
      ModelParams grads = state.params.zeros_like();
      for (std::size_t s = start; s < end; ++s) {
        const auto& smp = samples[s];
        const std::uint64_t sample_seed = mix(cfg.seed, std::uint64_t(epoch), smp.clip * 4096 + std::size_t(smp.frame));
        SyntheticClip local;
        const SyntheticClip* clip = &clips[smp.clip]->clip;
        if (cfg.augment) {
          try {
            local = augment(*clip, mix(sample_seed, 0xa09));
            clip = &local;
          } catch (const InvalidArgument&) {
          }
        }
        const auto triplet =
            assemble_clip(clip->degraded.front(), smp.frame, cfg.window,
                          selector(cfg.window, cfg.use_prev, cfg.use_next, mix(sample_seed, 0xc1)));
        ForwardCache cache;
        HeatmapStack pred(model_forward(state.params, triplet, &cache));
        HeatmapStack dpred;
        double loss = 0.0;
        try {
          loss = heatmap_loss(pred, clip->clean.front()[std::size_t(smp.frame)],
                              visibility(clip->poses.front()[std::size_t(smp.frame)]), &dpred);
        } catch (const NumericError&) {
          loss = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(loss)) diverged(state, epoch, "loss is not finite");
        epoch_loss += loss;
        dpred.tensor() *= inv_batch;
        model_backward(state.params, cache, dpred.tensor(), grads);
      }
      // adam_step validates every gradient before touching the state.
      try {
        adam_step(state, grads, lr);
      } catch (const NumericError& e) {
        diverged(state, epoch, e.what());
      }
    }
    state.epoch = epoch + 1;
    const double mean = epoch_loss / double(samples.size());
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean, lr);
  }
  result.state = std::move(state);
  return result;
}

Refiner identity_refiner() {
  return [](const ClipTriplet& t) { return t.hc; };
}

Refiner model_refiner(const ModelParams& params) {
  return [&params](const ClipTriplet& t) { return refine(params, t); };
}

double reference_length(const Pose& gt) {
  if (gt.size() == 15) {
    const auto diag = [&](int a, int b) -> double {
      if (!gt[a].visible || !gt[b].visible) return 0.0;
      return std::hypot(gt[a].x - gt[b].x, gt[a].y - gt[b].y);
    };
    const double d = std::max(diag(kRightShoulder, kLeftHip), diag(kLeftShoulder, kRightHip));
    if (d > 0.0) return d;
  }
  const BBox b = pose_bbox(gt);
  const double d = b.valid() ? std::hypot(b.x_max - b.x_min, b.y_max - b.y_min) : 0.0;
  return d > 0.0 ? d : 1.0;
}

EvalReport score(const std::vector<Pose>& predictions, const std::vector<Pose>& truth,
                 const std::vector<double>& thresholds, int clip_count) {
  require(predictions.size() == truth.size(), "score: prediction and truth counts differ");
  require(!thresholds.empty(), "score: need at least one threshold");
  const int J = truth.empty() ? 0 : truth.front().size();
  EvalReport r;
  r.thresholds = thresholds;
  r.clip_count = clip_count;
  r.sample_count = int(truth.size());
  std::vector<std::vector<int>> hits(thresholds.size(), std::vector<int>(std::size_t(J), 0));
  std::vector<int> visible(std::size_t(J), 0);
  std::vector<double> err(std::size_t(J), 0.0);
  for (std::size_t s = 0; s < truth.size(); ++s) {
    const auto& gt = truth[s];
    const auto& pr = predictions[s];
    require(gt.size() == J && pr.size() == J, "score: joint count mismatch");
    const double ref = reference_length(gt);
    for (int j = 0; j < J; ++j) {
      if (!gt[j].visible) continue;
      const double e = std::hypot(pr[j].x - gt[j].x, pr[j].y - gt[j].y);
      visible[std::size_t(j)] += 1;
      err[std::size_t(j)] += e;
      for (std::size_t t = 0; t < thresholds.size(); ++t)
        if (e <= thresholds[t] * ref) hits[t][std::size_t(j)] += 1;
    }
  }
  const int total_visible = std::accumulate(visible.begin(), visible.end(), 0);
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    std::vector<double> per(std::size_t(J), 0.0);
    for (int j = 0; j < J; ++j)
      if (visible[std::size_t(j)] > 0) per[std::size_t(j)] = 100.0 * hits[t][std::size_t(j)] / visible[std::size_t(j)];
    r.pck.push_back(per);
    const int total_hits = std::accumulate(hits[t].begin(), hits[t].end(), 0);
    r.mean_pck.push_back(total_visible > 0 ? 100.0 * total_hits / total_visible : 0.0);
  }
  for (int j = 0; j < J; ++j)
    r.mean_error.push_back(visible[std::size_t(j)] > 0 ? err[std::size_t(j)] / visible[std::size_t(j)] : 0.0);
  return r;
}

EvalReport evaluate(const Refiner& refiner, const Dataset& data, const EvalConfig& cfg) {
  keep_heap_warm();
  const auto clips = data.split(cfg.split);
  if (clips.empty()) throw InvalidArgument("evaluate: split '" + cfg.split + "' is empty");
  std::vector<Pose> preds, truth;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto& clip = clips[i]->clip;
    for (int f = 0; f < clip.frames(); ++f) {
      const auto triplet = assemble_clip(clip.degraded.front(), f, cfg.window,
                                         selector(cfg.window, cfg.use_prev, cfg.use_next, mix(cfg.selector_seed, i)));
      preds.push_back(decode_argmax(refiner(triplet)));
      truth.push_back(clip.poses.front()[std::size_t(f)]);
    }
  }
  return score(preds, truth, cfg.thresholds, int(clips.size()));
}

EvalReport evaluate(const ModelState& state, const Dataset& data, const EvalConfig& cfg) {
  return evaluate(model_refiner(state.params), data, cfg);
}

std::vector<AblationVariant> ablation_variants(const TrainConfig& base) {
  std::vector<AblationVariant> v;
  auto add = [&](std::string name, auto&& edit) {
    TrainConfig c = base;
    c.model.ptm = PtmMode::Full;
    c.model.prf = PrfMode::Full;
    c.model.dilations = kDefaultDilations;
    c.window = 1;
    c.use_prev = c.use_next = true;
    edit(c);
    v.push_back({std::move(name), std::move(c)});
  };
  add("rm_ptm_sum", [](TrainConfig& c) { c.model.ptm = PtmMode::SumConv; });
  add("rm_ptm_current", [](TrainConfig& c) { c.model.ptm = PtmMode::Current; });
  add("rm_prf", [](TrainConfig& c) { c.model.prf = PrfMode::PlainConv; });
  const std::vector<int> all = kDefaultDilations;
  for (std::size_t k = 1; k <= all.size(); ++k) {
    std::string name = "d{";
    for (std::size_t i = 0; i < k; ++i) name += (i ? "," : "") + std::to_string(all[i]);
    name += "}";
    add(name, [&](TrainConfig& c) { c.model.dilations.assign(all.begin(), all.begin() + std::ptrdiff_t(k)); });
  }
  add("rm_prev", [](TrainConfig& c) { c.use_prev = false; });
  add("rm_next", [](TrainConfig& c) { c.use_next = false; });
  for (int T = 1; T <= 4; ++T) add("T=" + std::to_string(T), [T](TrainConfig& c) { c.window = T; });
  return v;
}

std::vector<AblationRow> ablation_suite(const Dataset& data, const TrainConfig& base,
                                        const std::vector<std::string>& eval_splits, const EvalConfig& eval_base,
                                        const std::function<void(const AblationRow&)>& on_row) {
  require(!eval_splits.empty(), "ablation: need at least one evaluation split");
  std::vector<AblationRow> rows;
  // Rows with identical effective settings share one training run.
  std::map<std::string, std::size_t> done;
  for (auto& variant : ablation_variants(base)) {
    std::ostringstream key;
    key << to_string(variant.config.model.ptm) << "|" << to_string(variant.config.model.prf) << "|";
    for (int d : variant.config.model.dilations) key << d << ",";
    key << "|" << variant.config.window << variant.config.use_prev << variant.config.use_next;

    AblationRow row;
    row.name = variant.name;
    row.config = variant.config;
    if (auto it = done.find(key.str()); it != done.end()) {
      row.final_loss = rows[it->second].final_loss;
      row.reports = rows[it->second].reports;
    } else {
      auto result = train(data, variant.config);
      row.final_loss = result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back();
      for (const auto& split : eval_splits) {
        EvalConfig ec = eval_base;
        ec.split = split;
        ec.window = variant.config.window;
        ec.use_prev = variant.config.use_prev;
        ec.use_next = variant.config.use_next;
        row.reports.push_back(evaluate(result.state, data, ec));
      }
      done.emplace(key.str(), rows.size());
    }
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& is, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw IoError("truncated checkpoint: " + path.string());
  return v;
}

NamedTensor pack(const std::string& name, const std::vector<int>& shape, std::span<const double> values) {
  NamedTensor t{name, {}, {}};
  for (int d : shape) t.dims.push_back(std::uint32_t(d));
  t.data.assign(values.begin(), values.end());
  return t;
}

std::vector<double> arch_vector(const ModelState& s) {
  const auto& c = s.params.config;
  std::vector<double> v{double(c.joints), double(int(c.ptm)), double(int(c.prf))};
  for (int d : c.dilations) v.push_back(d);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelState& state) {
  ModelState s = state;
  std::vector<NamedTensor> tensors;
  const auto arch = arch_vector(s);
  tensors.push_back(pack("meta.arch", {int(arch.size())}, arch));
  const std::vector<double> counters{double(s.step), double(s.epoch)};
  tensors.push_back(pack("meta.counters", {2}, counters));
  const std::vector<double> clipcfg{double(s.window), s.use_prev ? 1.0 : 0.0, s.use_next ? 1.0 : 0.0};
  tensors.push_back(pack("meta.clip", {3}, clipcfg));
  for (const auto& r : param_refs(s.params)) tensors.push_back(pack(r.name, r.shape, r.values));
  for (const auto& r : param_refs(s.first_moment)) tensors.push_back(pack("adam.m." + r.name, r.shape, r.values));
  for (const auto& r : param_refs(s.second_moment)) tensors.push_back(pack("adam.v." + r.name, r.shape, r.values));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write("DCM1", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, std::uint32_t(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(os, std::uint32_t(t.name.size()));
    os.write(t.name.data(), std::streamsize(t.name.size()));
    put_u32(os, std::uint32_t(t.dims.size()));
    for (auto d : t.dims) put_u32(os, d);
    os.write(reinterpret_cast<const char*>(t.data.data()), std::streamsize(t.data.size() * sizeof(float)));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "DCM1", 4) != 0) throw IoError("not a DCM1 file: " + path.string());
  const auto version = get_u32(is, path);
  if (version != kCheckpointVersion) throw IoError("unsupported DCM1 version " + std::to_string(version));
  const auto count = get_u32(is, path);
  std::map<std::string, NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto len = get_u32(is, path);
    if (len > 4096) throw IoError("implausible tensor name length in " + path.string());
    t.name.resize(len);
    if (!is.read(t.name.data(), len)) throw IoError("truncated checkpoint: " + path.string());
    const auto rank = get_u32(is, path);
    if (rank > 8) throw IoError("implausible tensor rank in " + path.string());
    std::size_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(get_u32(is, path));
      numel *= t.dims.back();
    }
    if (numel > (std::size_t(1) << 28)) throw IoError("implausible tensor size in " + path.string());
    t.data.resize(numel);
    if (!is.read(reinterpret_cast<char*>(t.data.data()), std::streamsize(numel * sizeof(float))))
      throw IoError("truncated checkpoint: " + path.string());
    tensors.emplace(t.name, std::move(t));
  }

  auto take = [&](const std::string& name) -> const NamedTensor& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IoError("checkpoint " + path.string() + " lacks tensor " + name);
    return it->second;
  };
  const auto& arch = take("meta.arch").data;
  if (arch.size() < 4) throw IoError("malformed meta.arch in " + path.string());
  ModelConfig cfg;
  cfg.joints = int(arch[0]);
  cfg.ptm = PtmMode(int(arch[1]));
  cfg.prf = PrfMode(int(arch[2]));
  cfg.dilations.assign(arch.begin() + 3, arch.end());
  ModelState s;
  try {
    s = make_model_state(cfg);
  } catch (const InvalidArgument& e) {
    throw IoError("invalid architecture in " + path.string() + ": " + e.what());
  }
  const auto& counters = take("meta.counters").data;
  if (counters.size() != 2) throw IoError("malformed meta.counters in " + path.string());
  s.step = std::int64_t(counters[0]);
  s.epoch = int(counters[1]);
  const auto& clipcfg = take("meta.clip").data;
  if (clipcfg.size() != 3) throw IoError("malformed meta.clip in " + path.string());
  s.window = int(clipcfg[0]);
  s.use_prev = clipcfg[1] != 0.0f;
  s.use_next = clipcfg[2] != 0.0f;

  auto fill = [&](ModelParams& params, const std::string& prefix) {
    for (auto& r : param_refs(params)) {
      const auto& t = take(prefix + r.name);
      std::vector<std::uint32_t> want(r.shape.begin(), r.shape.end());
      if (t.dims != want) throw IoError("shape mismatch for " + t.name + " in " + path.string());
      std::ranges::copy(t.data, r.values.begin());
    }
  };
  fill(s.params, "");
  fill(s.first_moment, "adam.m.");
  fill(s.second_moment, "adam.v.");
  return s;
}

std::string to_json_line(const EvalReport& r, const std::string& label) {
  nlohmann::json j{{"type", "eval"},
                   {"thresholds", r.thresholds},
                   {"pck", r.pck},
                   {"mean_pck", r.mean_pck},
                   {"mean_error_px", r.mean_error},
                   {"clip_count", r.clip_count},
                   {"sample_count", r.sample_count}};
  if (!label.empty()) j["label"] = label;
  return j.dump();
}

std::string loss_json_line(int epoch, double loss, double lr) {
  return nlohmann::json{{"type", "loss"}, {"epoch", epoch}, {"mean_loss", loss}, {"lr", lr}}.dump();
}

}  // namespace dcpose
