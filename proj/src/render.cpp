#include "dcpose/render.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dcpose/error.hpp"
#include "dcpose/synth.hpp"

namespace dcpose {

void Image::put(int x, int y, std::array<std::uint8_t, 3> c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  auto* px = &rgb[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3];
  px[0] = c[0];
  px[1] = c[1];
  px[2] = c[2];
}

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

void chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
  put_be32(out, std::uint32_t(data.size()));
  const auto start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = crc32(0L, out.data() + start, uInt(out.size() - start));
  put_be32(out, std::uint32_t(crc));
}

void line(Image& img, int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> c) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    img.put(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void skeleton(Image& img, const Pose& pose, int scale, std::array<std::uint8_t, 3> c) {
  auto px = [scale](double v) { return int(std::lround((v + 0.5) * scale)); };
  if (pose.size() == kDefaultJoints) {
    for (const auto& [a, b] : kLimbs) {
      if (!pose[a].visible || !pose[b].visible) continue;
      line(img, px(pose[a].x), px(pose[a].y), px(pose[b].x), px(pose[b].y), c);
    }
  }
  const int r = std::max(1, scale / 4);
  for (const auto& kp : pose.joints) {
    if (!kp.visible) continue;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) img.put(px(kp.x) + dx, px(kp.y) + dy, c);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  require(img.width > 0 && img.height > 0, "png: empty image");
  require(img.rgb.size() == std::size_t(img.width) * std::size_t(img.height) * 3, "png: pixel buffer size mismatch");
  std::vector<std::uint8_t> raw;
  const std::size_t stride = std::size_t(img.width) * 3;
  raw.reserve((stride + 1) * std::size_t(img.height));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    const auto* row = img.rgb.data() + std::size_t(y) * stride;
    raw.insert(raw.end(), row, row + stride);
  }
  uLongf size = compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> packed(size);
  if (compress2(packed.data(), &size, raw.data(), uLong(raw.size()), 9) != Z_OK) throw IoError("png: deflate failed");
  packed.resize(size);

  std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, std::uint32_t(img.width));
  put_be32(ihdr, std::uint32_t(img.height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
  chunk(out, "IHDR", ihdr);
  chunk(out, "IDAT", packed);
  chunk(out, "IEND", {});
  return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_png(img);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

Image render_overlay(const HeatmapStack& background, const Pose& truth, const Pose& refined, int scale) {
  require(scale >= 1, "render: scale must be >= 1");
  Image img(background.w() * scale, background.h() * scale);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double v = 0.0;
      for (int j = 0; j < background.joints(); ++j) v = std::max(v, background.at(j, y / scale, x / scale));
      const auto g = std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 160.0));
      img.put(x, y, {g, g, g});
    }
  }
  skeleton(img, truth, scale, kTruthColor);
  skeleton(img, refined, scale, kRefinedColor);
  return img;
}

Image hstack(const std::vector<Image>& images, int gap) {
  require(!images.empty(), "render: nothing to stack");
  int w = 0, h = 0;
  for (const auto& im : images) {
    w += im.width;
    h = std::max(h, im.height);
  }
  w += gap * int(images.size() - 1);
  Image out(w, h);
  int x0 = 0;
  for (const auto& im : images) {
    for (int y = 0; y < im.height; ++y)
      std::copy_n(im.rgb.begin() + std::ptrdiff_t(std::size_t(y) * std::size_t(im.width) * 3),
                  std::size_t(im.width) * 3, out.rgb.begin() + std::ptrdiff_t((std::size_t(y) * std::size_t(w) + std::size_t(x0)) * 3));
    x0 += im.width + gap;
  }
  return out;
}

}  // namespace dcpose
