// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fail.
//   acceptance [--data DIR] [--work DIR] [--skip-training] [--record]
// --record rewrites DIR/baseline.json from the training run.

#include <zlib.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "dcpose/cli.hpp"
#include "dcpose/model.hpp"
#include "dcpose/pcn.hpp"
#include "dcpose/prf.hpp"
#include "dcpose/ptm.hpp"
#include "dcpose/train.hpp"
#include "json.hpp"
#include "oracle.hpp"

using namespace dcpose;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances.
constexpr double kConvAbs = 1e-10;
constexpr double kDcnAbs = 1e-6;
constexpr double kConvSeconds = 10.0;
constexpr double kGradSeconds = 120.0;
constexpr double kTrainMinutes = 30.0;
constexpr double kLossRatio = 0.2;
constexpr double kPckMargin = 5.0;
constexpr double kBaselinePck = 1e-6;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << id << " " << name << ": " << detail << std::endl;
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double max_abs(const Tensor4& a, const Tensor4& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.vec()[i] - b.vec()[i]));
  return m;
}

HeatmapStack random_stack(int J, int h, int w, std::mt19937_64& rng) {
  return HeatmapStack(oracle::random_tensor(1, J, h, w, rng, 0.0, 1.0));
}

ClipTriplet random_clip(int J, int h, int w, std::mt19937_64& rng, int p = 1, int c = 2, int n = 3) {
  ClipTriplet t;
  t.p = p;
  t.c = c;
  t.n = n;
  t.hp = random_stack(J, h, w, rng);
  t.hc = random_stack(J, h, w, rng);
  t.hn = random_stack(J, h, w, rng);
  return t;
}

void randomize(std::span<double> v, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& x : v) x = u(rng);
}

void randomize(ResidualStack& s, std::mt19937_64& rng, double scale) {
  for (auto& b : s)
    for (auto* c : {&b.conv1, &b.conv2, b.skip ? &*b.skip : nullptr}) {
      if (!c) continue;
      randomize(c->weight.vec(), rng, scale);
      randomize(c->bias, rng, scale);
    }
}

bool planes_equal(const Tensor4& a, const Tensor4& b, int ch) {
  const auto x = a.plane(0, ch), y = b.plane(0, ch);
  return std::equal(x.begin(), x.end(), y.begin());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// crc32 over manifest.json and every clip file it lists, in manifest order.
std::uint32_t dataset_checksum(const fs::path& dir) {
  uLong crc = crc32(0L, Z_NULL, 0);
  auto add = [&](const fs::path& p) {
    const auto s = slurp(p);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(s.data()), uInt(s.size()));
  };
  add(dir / "manifest.json");
  for (const auto& e : read_manifest(dir / "manifest.json").entries) {
    add(dir / e.heatmaps);
    add(dir / e.poses);
  }
  return std::uint32_t(crc);
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a)) fa.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b)) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) return false;
  for (const auto& f : fa)
    if (fs::is_regular_file(a / f) && slurp(a / f) != slurp(b / f)) return false;
  return true;
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << e.str();
  return code;
}

void criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> pick(0, 4);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    // Settings used by the model: dilation 1 and 3..15, groups 1 or one per joint.
    const int d = std::array{1, 3, 6, 9, 15}[std::size_t(pick(rng))];
    const int groups = std::array{1, 2, 3, 4, 1}[std::size_t(pick(rng))];
    const int in = groups * (1 + i % 3), out = groups * (1 + (i + 1) % 3);
    const auto p = oracle::random_conv(in, out, 3, d, groups, rng);
    const auto x = oracle::random_tensor(1 + i % 2, in, 9 + i % 5, 11 + i % 4, rng);
    worst = std::max(worst, max_abs(conv2d(x, p), oracle::conv2d(x, p)));
  }
  const double t = seconds_since(t0);
  report(1, "kernel oracle equivalence", worst <= kConvAbs && t < kConvSeconds,
         fmt("20 cases, max abs diff %.3g (<= %g), %.2f s (< %g s)", worst, kConvAbs, t, kConvSeconds));
}

void criterion2() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int d : kDefaultDilations)
    for (int i = 0; i < 10; ++i) {
      const int J = 1 + i % 4;
      const auto p = oracle::random_conv(J, J, 3, d, 1, rng);
      const auto x = oracle::random_tensor(1, J, 12 + i % 3, 10 + i % 5, rng);
      DeformInputs in{Tensor4(1, 18, x.h(), x.w()), Tensor4(1, 9, x.h(), x.w())};
      for (auto& m : in.masks.vec()) m = 1.0;
      worst = std::max(worst, max_abs(deform_conv_v2(x, in, p), conv2d(x, p)));
    }
  report(2, "DCN v2 reduction", worst <= kDcnAbs,
         fmt("10 cases x 5 dilations, max abs diff %.3g (<= %g)", worst, kDcnAbs));
}

void criterion3() {
  const auto t0 = Clock::now();
  std::vector<std::string> failed;
  double worst = 0.0;
  int checks = 0;
  auto check = [&](const std::string& what, std::span<double> values, std::span<const double> analytic,
                   const std::function<double()>& loss, std::mt19937_64& rng) {
    const double e = oracle::fd_check(values, analytic, loss, rng, 16);
    worst = std::max(worst, e);
    ++checks;
    if (!(e < oracle::kTolerance)) failed.push_back(what);
  };
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(300 + seed);
    {
      auto p = oracle::random_conv(4, 4, 3, 3, 2, rng);
      auto x = oracle::random_tensor(1, 4, 7, 7, rng);
      const auto r = oracle::random_tensor(1, 4, 7, 7, rng);
      auto g = p.zeros_like();
      const auto dx = conv2d_backward(x, p, r, &g);
      auto loss = [&] { return oracle::dot(conv2d(x, p), r); };
      check("conv2d.x", x.vec(), dx.vec(), loss, rng);
      check("conv2d.weight", p.weight.vec(), g.weight.vec(), loss, rng);
      check("conv2d.bias", p.bias, g.bias, loss, rng);
    }
    {
      auto s = make_residual_stack(3, 8, 2, 2, 1);
      randomize(s, rng, 0.4);
      auto x = oracle::random_tensor(1, 3, 6, 6, rng);
      const auto r = oracle::random_tensor(1, 2, 6, 6, rng);
      ResidualCache cache;
      residual_stack(x, s, &cache);
      auto g = zeros_like(s);
      const auto dx = residual_stack_backward(cache, s, r, &g);
      auto loss = [&] { return oracle::dot(residual_stack(x, s), r); };
      check("residual.x", x.vec(), dx.vec(), loss, rng);
      check("residual.conv1", s[0].conv1.weight.vec(), g[0].conv1.weight.vec(), loss, rng);
      check("residual.skip", s[0].skip->weight.vec(), g[0].skip->weight.vec(), loss, rng);
      check("residual.conv2", s[1].conv2.bias, g[1].conv2.bias, loss, rng);
    }
    {
      auto p = oracle::random_conv(2, 2, 3, 3, 1, rng);
      auto x = oracle::random_tensor(1, 2, 8, 8, rng);
      DeformInputs in{oracle::random_tensor(1, 18, 8, 8, rng, -2.0, 2.0), oracle::random_tensor(1, 9, 8, 8, rng, 0, 1)};
      const auto r = oracle::random_tensor(1, 2, 8, 8, rng);
      auto g = p.zeros_like();
      const auto dg = deform_conv_v2_backward(x, in, p, r, &g);
      auto loss = [&] { return oracle::dot(deform_conv_v2(x, in, p), r); };
      check("deform.x", x.vec(), dg.dx.vec(), loss, rng);
      check("deform.offsets", in.offsets.vec(), dg.doffsets.vec(), loss, rng);
      check("deform.masks", in.masks.vec(), dg.dmasks.vec(), loss, rng);
      check("deform.weight", p.weight.vec(), g.weight.vec(), loss, rng);
    }
    {
      auto params = make_ptm_params(2);
      randomize(params, rng, 0.4);
      auto x = stack_grouped(random_clip(2, 6, 6, rng));
      const auto r = oracle::random_tensor(1, 2, 6, 6, rng);
      ResidualCache cache;
      ptm_merge(x, params, &cache);
      auto g = zeros_like(params);
      const auto dx = residual_stack_backward(cache, params, r, &g);
      auto loss = [&] { return oracle::dot(ptm_merge(x, params), r); };
      check("ptm.x", x.vec(), dx.vec(), loss, rng);
      check("ptm.conv1", params[0].conv1.weight.vec(), g[0].conv1.weight.vec(), loss, rng);
    }
    {
      auto params = make_prf_params(2);
      randomize(params, rng, 0.4);
      auto psi = pose_residuals(random_clip(2, 6, 6, rng));
      const auto r = oracle::random_tensor(1, 2, 6, 6, rng);
      PrfCache cache;
      prf_fuse(psi, params, &cache);
      auto g = zeros_like(params);
      const auto dpsi = prf_fuse_backward(cache, params, r, &g);
      auto loss = [&] { return oracle::dot(prf_fuse(psi, params), r); };
      check("prf.psi", psi.vec(), dpsi.vec(), loss, rng);
      check("prf.conv1", params[0].conv1.weight.vec(), g[0].conv1.weight.vec(), loss, rng);
    }
    {
      const int J = 2;
      auto params = make_pcn_params(J, {3, 6});
      randomize(params.offset_trunk, rng, 0.3);
      randomize(params.mask_trunk, rng, 0.3);
      for (auto& b : params.branches)
        for (auto* c : {&b.offset_conv, &b.mask_conv, &b.deform}) {
          randomize(c->weight.vec(), rng, 0.4);
          randomize(c->bias, rng, 0.4);
        }
      auto merged = oracle::random_tensor(1, J, 8, 8, rng, 0, 1);
      auto fused = oracle::random_tensor(1, J, 8, 8, rng);
      const auto r = oracle::random_tensor(1, J, 8, 8, rng);
      PcnCache cache;
      correct(merged, fused, params, &cache);
      auto g = params.zeros_like();
      const auto dg = correct_backward(cache, params, r, &g);
      auto loss = [&] { return oracle::dot(correct(merged, fused, params), r); };
      check("pcn.merged", merged.vec(), dg.dmerged.vec(), loss, rng);
      check("pcn.fused", fused.vec(), dg.dfused.vec(), loss, rng);
      check("pcn.offset_conv", params.branches[1].offset_conv.weight.vec(), g.branches[1].offset_conv.weight.vec(),
            loss, rng);
      check("pcn.deform", params.branches[0].deform.weight.vec(), g.branches[0].deform.weight.vec(), loss, rng);
    }
    {
      auto pred = random_stack(3, 5, 5, rng);
      const auto gt = random_stack(3, 5, 5, rng);
      const std::vector<bool> vis{true, seed != 0, true};
      HeatmapStack dpred;
      heatmap_loss(pred, gt, vis, &dpred);
      auto loss = [&] { return heatmap_loss(pred, gt, vis); };
      check("loss", pred.tensor().vec(), dpred.tensor().vec(), loss, rng);
    }
  }
  const double t = seconds_since(t0);
  std::string detail = fmt("%d checks over 3 seeds, worst rel err %.3g (< %g), %.1f s (< %g s)", checks, worst,
                           oracle::kTolerance, t, kGradSeconds);
  for (const auto& f : failed) detail += "; failed " + f;
  report(3, "gradient suite", failed.empty() && t < kGradSeconds, detail);
}

void criterion4() {
  bool ok = true;
  for (int p = -4; p < 5; ++p)
    for (int n = 6; n < 14; ++n) {
      const auto w = temporal_weights(p, 5, n);
      ok = ok && std::abs(w.prev + w.next - 1.0) <= 1e-15;
    }
  const auto adj = temporal_weights(4, 5, 6);
  ok = ok && adj.prev == 0.5 && adj.next == 0.5;
  std::mt19937_64 rng(4);
  for (auto [p, n] : {std::pair{1, 3}, std::pair{0, 3}, std::pair{-2, 5}}) {
    const auto clip = random_clip(5, 8, 7, rng, p, 2, n);
    const auto w = temporal_weights(p, 2, n);
    const auto merged = ptm_merge(stack_grouped(clip), make_ptm_summation_params(5));
    const auto expect = weighted_sum(clip);
    ok = ok && merged.vec() == expect.vec();
    const auto& hp = clip.hp.tensor().vec();
    const auto& hc = clip.hc.tensor().vec();
    const auto& hn = clip.hn.tensor().vec();
    for (std::size_t i = 0; i < merged.size(); ++i)
      ok = ok && std::abs(expect.vec()[i] - (w.prev * hp[i] + hc[i] + w.next * hn[i])) <= 1e-15;
  }
  report(4, "temporal weighting identities", ok,
         "w_p + w_n = 1; adjacent frames give (0.5, 0.5); hand-set merge equals the weighted sum bitwise");
}

void criterion5() {
  std::mt19937_64 rng(5);
  const int J = 6, moved_joint = 4;
  bool ok = true;
  auto ptm = make_ptm_params(J);
  randomize(ptm, rng, 0.4);
  auto clip = random_clip(J, 9, 9, rng);
  auto stacked = stack_grouped(clip);
  const auto base = ptm_merge(stacked, ptm);
  for (int t = 0; t < 3; ++t)
    for (auto& v : stacked.plane(0, 3 * moved_joint + t)) v += 0.37;
  const auto moved = ptm_merge(stacked, ptm);
  for (int j = 0; j < J; ++j) ok = ok && planes_equal(base, moved, j) == (j != moved_joint);

  auto prf = make_prf_params(J);
  randomize(prf, rng, 0.4);
  auto psi = pose_residuals(clip);
  const auto fbase = prf_fuse(psi, prf);
  for (int blk = 0; blk < 4; ++blk)
    for (auto& v : psi.plane(0, blk * J + moved_joint)) v -= 0.5;
  const auto fmoved = prf_fuse(psi, prf);
  for (int j = 0; j < J; ++j) ok = ok && planes_equal(fbase, fmoved, j) == (j != moved_joint);
  report(5, "group isolation", ok, "perturbing one joint changes only that joint's PTM and PRF output (bitwise)");
}

struct TrainingOutcome {
  std::uint32_t checksum = 0;
  double first_loss = 0, final_loss = 0, minutes = 0;
  double identity_pck = 0, model_pck = 0;
};

void criterion6(const fs::path& data, const fs::path& work, bool record) {
  Config cfg = Config::defaults();
  cfg.merge_file((data / "dataset.conf").string());
  const fs::path dir = work / "dataset";
  fs::remove_all(dir);
  synthesize_dataset(cfg, 0, dir);
  TrainingOutcome o;
  o.checksum = dataset_checksum(dir);
  const auto ds = load_dataset(dir / "manifest.json");

  const auto tcfg = train_config(cfg, 0);
  const auto t0 = Clock::now();
  const auto result = train(ds, tcfg, [](int e, double loss, double lr) {
    std::cerr << "  epoch " << e << " loss " << loss << " lr " << lr << "\n";
  });
  o.minutes = seconds_since(t0) / 60.0;
  o.first_loss = result.epoch_loss.front();
  o.final_loss = result.epoch_loss.back();

  auto ecfg = eval_config(cfg);
  ecfg.split = "occlusion";
  ecfg.thresholds = {0.2};
  o.identity_pck = evaluate(identity_refiner(), ds, ecfg).mean_pck[0];
  o.model_pck = evaluate(result.state, ds, ecfg).mean_pck[0];

  const fs::path baseline = data / "baseline.json";
  if (record) {
    nlohmann::json j{{"dataset_crc32", o.checksum},
                     {"epochs", int(result.epoch_loss.size())},
                     {"first_epoch_loss", o.first_loss},
                     {"final_epoch_loss", o.final_loss},
                     {"identity_pck_occlusion", o.identity_pck},
                     {"model_pck_occlusion", o.model_pck}};
    std::ofstream(baseline) << j.dump(1) << "\n";
  }
  bool matches = false;
  std::string recorded = "no recorded baseline";
  if (fs::exists(baseline)) {
    const auto j = nlohmann::json::parse(slurp(baseline));
    const bool same_data = j.at("dataset_crc32").get<std::uint32_t>() == o.checksum;
    const double rec_pck = j.at("identity_pck_occlusion").get<double>();
    matches = same_data && std::abs(rec_pck - o.identity_pck) <= kBaselinePck;
    recorded = fmt("recorded identity %.2f / model %.2f, dataset crc %s", rec_pck,
                   j.at("model_pck_occlusion").get<double>(), same_data ? "matches" : "DIFFERS");
  }
  const double ratio = o.final_loss / o.first_loss;
  const bool pass = o.minutes < kTrainMinutes && ratio <= kLossRatio &&
                    o.model_pck >= o.identity_pck + kPckMargin && matches;
  report(6, "desk-scale training", pass,
         fmt("%.1f min (< %g), loss %.4g -> %.4g ratio %.3f (<= %g), occlusion PCK@0.2 model %.2f vs identity %.2f "
             "(margin >= %g); ",
             o.minutes, kTrainMinutes, o.first_loss, o.final_loss, ratio, kLossRatio, o.model_pck, o.identity_pck,
             kPckMargin) +
             recorded);
}

void criterion7(const fs::path& work) {
  const fs::path dir = work / "ablate";
  fs::remove_all(dir);
  std::vector<std::string> sets{"synth.train_clips=4", "synth.test_clips=2", "synth.occlusion_clips=2",
                                "synth.frames=9",      "synth.height=16",   "synth.width=16",
                                "train.epochs=1",      "train.batch_size=4"};
  std::vector<std::string> synth{"synth", "--seed", "3", "-o", (dir / "data").string()}, ablate{"ablate", "--seed", "3", "-d",
                                                                                 (dir / "data/manifest.json").string(),
                                                                                 "-o", (dir / "out").string()};
  for (const auto& s : sets) {
    synth.insert(synth.end(), {"--set", s});
    ablate.insert(ablate.end(), {"--set", s});
  }
  bool ok = cli(synth) == 0 && cli(ablate) == 0;
  std::set<std::string> names;
  bool schema = ok;
  if (ok) {
    std::ifstream in(dir / "out/ablation.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      names.insert(j.value("label", std::string{}));
      for (const char* k : {"thresholds", "pck", "mean_pck", "mean_error_px", "clip_count", "sample_count", "split", "final_loss"})
        schema = schema && j.contains(k);
    }
  }
  const auto table = ok ? slurp(dir / "out/ablation.md") : std::string{};
  const bool deltas = table.find("rm_ptm_sum") != std::string::npos && table.find("rm_ptm_current") != std::string::npos &&
                      table.find("rm_prf") != std::string::npos && table.find("Delta") != std::string::npos;
  std::size_t variants = 0;
  for (const auto& v : ablation_variants(TrainConfig{}))
    variants += names.count(v.name);
  report(7, "ablation harness", ok && schema && deltas && names.size() == 14 && variants == 14,
         fmt("%zu records covering the 14 variants, schema %s, PTM/PRF deltas %s", names.size(),
             schema ? "complete" : "incomplete", deltas ? "reported" : "missing"));
}

void criterion8(const fs::path& work) {
  const fs::path dir = work / "repro";
  fs::remove_all(dir);
  const std::vector<std::string> sets{"synth.train_clips=4", "synth.test_clips=2", "synth.occlusion_clips=2",
                                      "synth.height=16",     "synth.width=16",    "train.epochs=2",
                                      "train.batch_size=2"};
  auto with_sets = [&](std::vector<std::string> a) {
    for (const auto& s : sets) a.insert(a.end(), {"--set", s});
    return a;
  };
  bool ok = true;
  std::string evals[2];
  for (int r = 0; r < 2; ++r) {
    const fs::path run = dir / std::to_string(r);
    ok = ok && cli(with_sets({"synth", "--seed", "7", "-o", (run / "data").string()})) == 0;
    ok = ok && cli(with_sets({"train", "--seed", "7", "-d", (run / "data/manifest.json").string(), "-o",
                              (run / "model").string()})) == 0;
    ok = ok && cli(with_sets({"refine", "-k", (run / "model/model.dcm").string(), "-i",
                              (run / "data/clips/test_0000_p0.dch").string(), "-o", (run / "refined.dch").string()})) == 0;
    ok = ok && cli(with_sets({"eval", "-d", (run / "data/manifest.json").string(), "-k",
                              (run / "model/model.dcm").string()}),
                   &evals[r]) == 0;
  }
  const bool data = ok && same_tree(dir / "0/data", dir / "1/data");
  const bool model = ok && slurp(dir / "0/model/model.dcm") == slurp(dir / "1/model/model.dcm");
  const bool refined = ok && slurp(dir / "0/refined.dch") == slurp(dir / "1/refined.dch");
  const bool report_same = ok && !evals[0].empty() && evals[0] == evals[1];
  report(8, "reproducibility", data && model && refined && report_same,
         fmt("DCH1 dataset %s, DCM1 checkpoint %s, refined DCH1 %s, EvalReport %s", data ? "identical" : "differs",
             model ? "identical" : "differs", refined ? "identical" : "differs", report_same ? "identical" : "differs"));
}

void criterion9() {
  std::mt19937_64 rng(9);
  std::vector<HeatmapStack> frames;
  for (int f = 0; f < 3; ++f) frames.push_back(random_stack(3, 8, 8, rng));
  bool ok = true;
  const auto first = assemble_clip(frames, 0, 1);
  const auto last = assemble_clip(frames, 2, 1);
  ok = ok && first.hp == frames[0] && first.hc == frames[0] && first.hn == frames[1];
  ok = ok && last.hn == frames[2] && last.hc == frames[2] && last.hp == frames[1];

  // Three-frame clips put every centre next to an edge; a one-frame clip has
  // no neighbour at all.
  Dataset ds;
  ds.manifest.joints = 3;
  ds.manifest.h = ds.manifest.w = 16;
  for (int i = 0; i < 2; ++i) {
    SceneConfig sc;
    sc.joints = 3;
    sc.h = sc.w = 16;
    sc.seed = std::uint64_t(i);
    DatasetClip dc;
    dc.entry = {"edge" + std::to_string(i), "train", sc.seed, 0, "", ""};
    dc.clip = generate(sc);
    if (i == 1)
      for (auto* v : {&dc.clip.degraded[0], &dc.clip.clean[0]}) v->resize(1);
    if (i == 1) dc.clip.poses[0].resize(1);
    ds.clips.push_back(std::move(dc));
  }
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 2;
  tc.augment = false;
  tc.model.joints = 3;
  tc.model.dilations = {3};
  std::string detail = "edge frames substitute the current frame";
  try {
    const auto r = train(ds, tc);
    ok = ok && r.epoch_loss.size() == 2 && std::isfinite(r.epoch_loss.back());
    detail += fmt("; 3- and 1-frame clips trained 2 epochs, final loss %.4g", r.epoch_loss.back());
  } catch (const std::exception& e) {
    ok = false;
    detail += std::string("; training threw: ") + e.what();
  }
  report(9, "boundary padding", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  fs::path data = DCPOSE_DATA_DIR;
  fs::path work = fs::temp_directory_path() / "dcpose_acceptance";
  bool skip_training = false, record = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--data" && i + 1 < argc)
      data = argv[++i];
    else if (a == "--work" && i + 1 < argc)
      work = argv[++i];
    else if (a == "--skip-training")
      skip_training = true;
    else if (a == "--record")
      record = true;
    else {
      std::cerr << "usage: acceptance [--data DIR] [--work DIR] [--skip-training] [--record]\n";
      return 2;
    }
  }
  fs::create_directories(work);
  const std::vector<std::function<void()>> steps{
      criterion1, criterion2, criterion3, criterion4, criterion5,
      [&] {
        if (skip_training)
          std::cout << "SKIP 6 desk-scale training\n";
        else
          criterion6(data, work, record);
      },
      [&] { criterion7(work); }, [&] { criterion8(work); }, criterion9};
  for (std::size_t i = 0; i < steps.size(); ++i) {
    try {
      steps[i]();
    } catch (const std::exception& e) {
      report(int(i) + 1, "exception", false, e.what());
    }
  }
  return failures == 0 ? 0 : 1;
}
