#include "dcpose/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace dcpose {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::istream& is, const fs::path& path) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw IoError("truncated file: " + path.string());
  return v;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::binary) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, mode | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::binary) {
  std::ifstream is(path, mode);
  if (!is) throw IoError("cannot open: " + path.string());
  return is;
}

json read_json(const fs::path& path) {
  auto is = open_in(path, std::ios::in);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

void write_dch1(const fs::path& path, const std::vector<HeatmapStack>& frames) {
  require(!frames.empty(), "write_dch1: no frames");
  const auto& f0 = frames.front();
  auto os = open_out(path);
  os.write("DCH1", 4);
  write_u32(os, std::uint32_t(f0.joints()));
  write_u32(os, std::uint32_t(f0.h()));
  write_u32(os, std::uint32_t(f0.w()));
  write_u32(os, std::uint32_t(frames.size()));
  std::vector<float> buf;
  for (const auto& f : frames) {
    require(f.same_shape(f0), "write_dch1: frames differ in shape");
    require(f.tensor().all_finite(), "write_dch1: non-finite heatmap value");
    buf.assign(f.tensor().vec().begin(), f.tensor().vec().end());
    os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<HeatmapStack> read_dch1(const fs::path& path) {
  auto is = open_in(path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "DCH1", 4) != 0) throw IoError("not a DCH1 file: " + path.string());
  const auto J = read_u32(is, path), H = read_u32(is, path), W = read_u32(is, path), F = read_u32(is, path);
  if (J == 0 || H == 0 || W == 0 || J > 4096 || H > 16384 || W > 16384)
    throw IoError("implausible DCH1 header in " + path.string());
  std::vector<HeatmapStack> frames;
  std::vector<float> buf(std::size_t(J) * H * W);
  for (std::uint32_t f = 0; f < F; ++f) {
    if (!is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float))))
      throw IoError("truncated DCH1 data in " + path.string());
    HeatmapStack s{static_cast<int>(J), static_cast<int>(H), static_cast<int>(W)};
    std::ranges::copy(buf, s.tensor().vec().begin());
    frames.push_back(std::move(s));
  }
  return frames;
}

void write_pose_sidecar(const fs::path& path, const std::vector<Pose>& poses) {
  json arr = json::array();
  for (std::size_t f = 0; f < poses.size(); ++f) {
    json joints = json::array();
    for (const auto& kp : poses[f].joints) joints.push_back({{"x", kp.x}, {"y", kp.y}, {"v", kp.visible ? 1 : 0}});
    arr.push_back({{"frame", f}, {"joints", std::move(joints)}});
  }
  auto os = open_out(path, std::ios::out);
  os << arr.dump(1) << "\n";
}

std::vector<Pose> read_pose_sidecar(const fs::path& path) {
  const json arr = read_json(path);
  std::vector<Pose> poses;
  try {
    for (const auto& rec : arr) {
      const auto frame = rec.at("frame").get<std::size_t>();
      if (frame != poses.size()) throw IoError("pose sidecar frames out of order in " + path.string());
      Pose p;
      for (const auto& j : rec.at("joints"))
        p.joints.push_back({j.at("x").get<double>(), j.at("y").get<double>(), j.at("v").get<int>() != 0});
      poses.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed pose sidecar " + path.string() + ": " + e.what());
  }
  return poses;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  json clips = json::array();
  for (const auto& e : m.entries)
    clips.push_back({{"id", e.id},
                     {"split", e.split},
                     {"seed", e.seed},
                     {"person", e.person},
                     {"heatmaps", e.heatmaps},
                     {"poses", e.poses}});
  json doc{{"format", "dcpose-dataset"}, {"version", 1},     {"joints", m.joints}, {"height", m.h},
           {"width", m.w},               {"sigma", m.sigma}, {"clips", std::move(clips)}};
  auto os = open_out(path, std::ios::out);
  os << doc.dump(1) << "\n";
}

Manifest read_manifest(const fs::path& path) {
  const json doc = read_json(path);
  Manifest m;
  try {
    if (doc.at("format") != "dcpose-dataset") throw IoError("not a dataset manifest: " + path.string());
    m.joints = doc.at("joints");
    m.h = doc.at("height");
    m.w = doc.at("width");
    m.sigma = doc.at("sigma");
    for (const auto& c : doc.at("clips"))
      m.entries.push_back({c.at("id"), c.at("split"), c.at("seed"), c.at("person"), c.at("heatmaps"), c.at("poses")});
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

std::vector<const DatasetClip*> Dataset::split(const std::string& name) const {
  std::vector<const DatasetClip*> out;
  for (const auto& c : clips)
    if (c.entry.split == name) out.push_back(&c);
  return out;
}

Dataset load_dataset(const fs::path& manifest_path) {
  Dataset ds;
  ds.manifest = read_manifest(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  for (const auto& e : ds.manifest.entries) {
    DatasetClip dc;
    dc.entry = e;
    auto frames = read_dch1(dir / e.heatmaps);
    auto poses = read_pose_sidecar(dir / e.poses);
    if (frames.size() != poses.size())
      throw IoError("clip " + e.id + ": " + std::to_string(frames.size()) + " heatmap frames but " +
                    std::to_string(poses.size()) + " poses");
    for (const auto& f : frames)
      if (f.joints() != ds.manifest.joints || f.h() != ds.manifest.h || f.w() != ds.manifest.w)
        throw IoError("clip " + e.id + ": heatmap shape disagrees with manifest");
    dc.clip.h = ds.manifest.h;
    dc.clip.w = ds.manifest.w;
    dc.clip.sigma = ds.manifest.sigma;
    std::vector<HeatmapStack> clean;
    for (const auto& p : poses) clean.push_back(encode_gaussian(p, ds.manifest.h, ds.manifest.w, ds.manifest.sigma));
    dc.clip.poses.push_back(std::move(poses));
    dc.clip.degraded.push_back(std::move(frames));
    dc.clip.clean.push_back(std::move(clean));
    ds.clips.push_back(std::move(dc));
  }
  return ds;
}

std::vector<ManifestEntry> write_clip(const fs::path& dir, const std::string& id, const std::string& split,
                                      std::uint64_t seed, const SyntheticClip& clip) {
  std::vector<ManifestEntry> out;
  for (int p = 0; p < clip.persons(); ++p) {
    const std::string stem = "clips/" + id + "_p" + std::to_string(p);
    ManifestEntry e{id, split, seed, p, stem + ".dch", stem + ".poses.json"};
    write_dch1(dir / e.heatmaps, clip.degraded[std::size_t(p)]);
    write_pose_sidecar(dir / e.poses, clip.poses[std::size_t(p)]);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace dcpose
