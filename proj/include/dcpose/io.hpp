#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcpose/heatmap.hpp"
#include "dcpose/synth.hpp"

namespace dcpose {

namespace fs = std::filesystem;

// DCH1: "DCH1", u32 J, H, W, frame count (little endian), then frame-major f32.
void write_dch1(const fs::path& path, const std::vector<HeatmapStack>& frames);
std::vector<HeatmapStack> read_dch1(const fs::path& path);

// Pose sidecar: JSON array of {"frame": f, "joints": [{"x","y","v"}]}.
void write_pose_sidecar(const fs::path& path, const std::vector<Pose>& poses);
std::vector<Pose> read_pose_sidecar(const fs::path& path);

struct ManifestEntry {
  std::string id;
  std::string split;
  std::uint64_t seed = 0;
  int person = 0;
  std::string heatmaps;  // relative to the manifest directory
  std::string poses;
};

struct Manifest {
  int joints = kDefaultJoints;
  int h = 0, w = 0;
  double sigma = kDefaultSigma;
  std::vector<ManifestEntry> entries;
};

void write_manifest(const fs::path& path, const Manifest& m);
Manifest read_manifest(const fs::path& path);

// One person of one clip, with heatmaps read back at file precision and clean
// targets re-encoded from the poses.
struct DatasetClip {
  ManifestEntry entry;
  SyntheticClip clip;  // single person
};

struct Dataset {
  Manifest manifest;
  std::vector<DatasetClip> clips;

  // Clips of one split, in manifest order.
  std::vector<const DatasetClip*> split(const std::string& name) const;
};

Dataset load_dataset(const fs::path& manifest_path);

// Writes one DCH1 file and pose sidecar per person under dir and returns the
// matching manifest entries.
std::vector<ManifestEntry> write_clip(const fs::path& dir, const std::string& id, const std::string& split,
                                      std::uint64_t seed, const SyntheticClip& clip);

// Rounds through f32 so in-memory values equal what the file formats store.
inline double to_file_precision(double v) { return double(float(v)); }

}  // namespace dcpose
