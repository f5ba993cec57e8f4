#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dcpose/heatmap.hpp"

namespace dcpose {

struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(std::size_t(w) * std::size_t(h) * 3, 0) {}
  void put(int x, int y, std::array<std::uint8_t, 3> c);
};

inline constexpr std::array<std::uint8_t, 3> kTruthColor{40, 200, 60};
inline constexpr std::array<std::uint8_t, 3> kRefinedColor{235, 60, 40};

// 8-bit RGB, no ancillary chunks.
std::vector<std::uint8_t> encode_png(const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);

// Per-pixel max over joints as grey background, upsampled by scale, with the
// ground-truth and refined skeletons drawn on top.
Image render_overlay(const HeatmapStack& background, const Pose& truth, const Pose& refined, int scale);

// Images placed left to right on a black strip with a gap between them.
Image hstack(const std::vector<Image>& images, int gap = 4);

}  // namespace dcpose
