#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dcpose/io.hpp"
#include "dcpose/model.hpp"

namespace dcpose {

// (1/N) * sum_j v_j * ||gt_j - pred_j||^2. When grad is non-null it receives
// dL/dpred.
double heatmap_loss(const HeatmapStack& pred, const HeatmapStack& gt, const std::vector<bool>& visible,
                    HeatmapStack* grad = nullptr);

std::vector<bool> visibility(const Pose& pose);

struct ModelState {
  ModelParams params;
  ModelParams first_moment;
  ModelParams second_moment;
  std::int64_t step = 0;
  int epoch = 0;
  // Clip assembly the model was trained with; used as evaluation defaults.
  int window = 1;
  bool use_prev = true;
  bool use_next = true;
};

ModelState make_model_state(const ModelConfig& cfg);

inline constexpr double kInitWeightStd = 0.001;

// Weights ~ N(0, 0.001^2), biases 0, deterministic in seed.
void init_weights(ModelState& state, std::uint64_t seed);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update. Throws NumericError naming the first tensor
// with a non-finite gradient. Parameters and moments are kept at f32
// precision so checkpoints round-trip exactly.
void adam_step(ModelState& state, ModelParams& grads, double lr, const AdamHyper& hyper = {});

struct TrainConfig {
  double base_lr = 1e-4;
  double lr_decay = 0.9;
  int decay_every = 4;
  int epochs = 20;
  int batch_size = 8;
  std::uint64_t seed = 0;
  bool augment = true;
  std::string split = "train";
  ModelConfig model;
  // Clip assembly ablations.
  int window = 1;
  bool use_prev = true;
  bool use_next = true;
  // Written with the last finite state if the loss diverges.
  std::optional<std::filesystem::path> divergence_checkpoint;

  void validate() const;
};

double learning_rate(const TrainConfig& cfg, int epoch);

struct TrainResult {
  ModelState state;
  std::vector<double> epoch_loss;  // mean per-sample loss of each epoch
};

using EpochCallback = std::function<void(int epoch, double mean_loss, double lr)>;

TrainResult train(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Continues from an existing state (used by train() after initialization).
TrainResult train_from(ModelState state, const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct EvalConfig {
  std::vector<double> thresholds{0.2};
  std::string split = "test";
  int window = 1;
  bool use_prev = true;
  bool use_next = true;
  std::uint64_t selector_seed = 0;
};

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<std::vector<double>> pck;  // [threshold][joint], percent
  std::vector<double> mean_pck;          // [threshold]
  std::vector<double> mean_error;        // [joint], px, visible joints only
  int clip_count = 0;
  int sample_count = 0;

  bool operator==(const EvalReport&) const = default;
};

using Refiner = std::function<HeatmapStack(const ClipTriplet&)>;

// Refiner that returns h_c unchanged.
Refiner identity_refiner();
Refiner model_refiner(const ModelParams& params);

// Reference length for PCK: torso diagonal (right shoulder to left hip, or
// the other diagonal), falling back to the diagonal of the visible joints.
double reference_length(const Pose& gt);

EvalReport score(const std::vector<Pose>& predictions, const std::vector<Pose>& truth,
                 const std::vector<double>& thresholds, int clip_count);

EvalReport evaluate(const Refiner& refiner, const Dataset& data, const EvalConfig& cfg);
EvalReport evaluate(const ModelState& state, const Dataset& data, const EvalConfig& cfg);

struct AblationVariant {
  std::string name;
  TrainConfig config;
};

// The fourteen rows: two PTM substitutions, PRF removal, five dilation
// subsets, previous/next frame removal, and T = 1..4.
std::vector<AblationVariant> ablation_variants(const TrainConfig& base);

struct AblationRow {
  std::string name;
  TrainConfig config;
  double final_loss = 0.0;
  std::vector<EvalReport> reports;  // one per requested split
};

std::vector<AblationRow> ablation_suite(const Dataset& data, const TrainConfig& base,
                                        const std::vector<std::string>& eval_splits, const EvalConfig& eval_base,
                                        const std::function<void(const AblationRow&)>& on_row = {});

// DCM1: "DCM1", u32 version, u32 tensor count, then per tensor u32 name
// length, name bytes, u32 rank, u32 dims, f32 data; all little endian.
void save_checkpoint(const std::filesystem::path& path, const ModelState& state);
ModelState load_checkpoint(const std::filesystem::path& path);

// Line-delimited JSON records.
std::string to_json_line(const EvalReport& r, const std::string& label = {});
std::string loss_json_line(int epoch, double loss, double lr);

}  // namespace dcpose
