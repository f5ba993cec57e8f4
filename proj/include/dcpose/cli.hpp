#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dcpose/config.hpp"
#include "dcpose/io.hpp"
#include "dcpose/train.hpp"

namespace dcpose {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitIo = 3, kExitNumeric = 4, kExitConfig = 5 };

// Relative output paths are placed under this directory when it is set.
inline constexpr const char* kOutputRootEnv = "DCPOSE_OUTPUT_ROOT";

std::filesystem::path resolve_output(const std::filesystem::path& p);

SceneConfig scene_config(const Config& cfg, std::uint64_t seed, double occlusion_prob);
TrainConfig train_config(const Config& cfg, std::uint64_t seed);
EvalConfig eval_config(const Config& cfg);
ModelConfig model_config(const Config& cfg);

// Writes manifest.json and clips/ for the train, test and occlusion splits.
Manifest synthesize_dataset(const Config& cfg, std::uint64_t seed, const std::filesystem::path& dir);

// Subcommands synth, train, refine, eval, ablate, render.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace dcpose
