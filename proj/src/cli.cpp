#include "dcpose/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "dcpose/render.hpp"

namespace dcpose {

namespace fs = std::filesystem;

fs::path resolve_output(const fs::path& p) {
  const char* root = std::getenv(kOutputRootEnv);
  if (root == nullptr || *root == '\0' || p.is_absolute()) return p;
  return fs::path(root) / p;
}

SceneConfig scene_config(const Config& cfg, std::uint64_t seed, double occlusion_prob) {
  SceneConfig s;
  s.persons = int(cfg.integer("synth.persons"));
  s.joints = int(cfg.integer("synth.joints"));
  s.frames = int(cfg.integer("synth.frames"));
  s.h = int(cfg.integer("synth.height"));
  s.w = int(cfg.integer("synth.width"));
  s.sigma = cfg.real("synth.sigma");
  s.max_velocity = cfg.real("synth.max_velocity");
  s.max_turn = cfg.real("synth.max_turn");
  s.occlusion_prob = occlusion_prob;
  s.blur_min = cfg.real("synth.blur_min");
  s.blur_max = cfg.real("synth.blur_max");
  s.jitter_sigma = cfg.real("synth.jitter_sigma");
  s.seed = seed;
  return s;
}

namespace {

PtmMode parse_ptm(const std::string& v) {
  if (v == "full") return PtmMode::Full;
  if (v == "sum_conv") return PtmMode::SumConv;
  if (v == "current") return PtmMode::Current;
  throw ConfigError("config: train.ptm must be full, sum_conv or current, got '" + v + "'");
}

PrfMode parse_prf(const std::string& v) {
  if (v == "full") return PrfMode::Full;
  if (v == "plain_conv") return PrfMode::PlainConv;
  throw ConfigError("config: train.prf must be full or plain_conv, got '" + v + "'");
}

}  // namespace

ModelConfig model_config(const Config& cfg) {
  ModelConfig m;
  m.joints = int(cfg.integer("synth.joints"));
  m.ptm = parse_ptm(cfg.str("train.ptm"));
  m.prf = parse_prf(cfg.str("train.prf"));
  m.dilations = cfg.int_list("train.dilations");
  return m;
}

TrainConfig train_config(const Config& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.base_lr = cfg.real("train.lr");
  t.lr_decay = cfg.real("train.lr_decay");
  t.decay_every = int(cfg.integer("train.decay_every"));
  t.epochs = int(cfg.integer("train.epochs"));
  t.batch_size = int(cfg.integer("train.batch_size"));
  t.augment = cfg.boolean("train.augment");
  t.split = cfg.str("train.split");
  t.model = model_config(cfg);
  t.window = int(cfg.integer("train.window"));
  t.use_prev = cfg.boolean("train.use_prev");
  t.use_next = cfg.boolean("train.use_next");
  t.seed = seed;
  try {
    t.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

EvalConfig eval_config(const Config& cfg) {
  EvalConfig e;
  e.split = cfg.str("eval.split");
  e.thresholds = cfg.real_list("eval.thresholds");
  if (e.thresholds.empty()) throw ConfigError("config: eval.thresholds must be non-empty");
  e.selector_seed = std::uint64_t(cfg.integer("eval.selector_seed"));
  return e;
}

Manifest synthesize_dataset(const Config& cfg, std::uint64_t seed, const fs::path& dir) {
  const double train_occ = cfg.real("synth.occlusion_prob");
  const struct {
    const char* split;
    const char* count_key;
    double occlusion;
  } splits[] = {{"train", "synth.train_clips", train_occ},
                {"test", "synth.test_clips", train_occ},
                {"occlusion", "synth.occlusion_clips", cfg.real("synth.occlusion_split_prob")}};
  Manifest m;
  m.joints = int(cfg.integer("synth.joints"));
  m.h = int(cfg.integer("synth.height"));
  m.w = int(cfg.integer("synth.width"));
  m.sigma = cfg.real("synth.sigma");
  fs::create_directories(dir);
  if (fs::exists(dir / "clips")) fs::remove_all(dir / "clips");
  for (std::size_t s = 0; s < std::size(splits); ++s) {
    const auto count = cfg.integer(splits[s].count_key);
    if (count < 0) throw ConfigError(std::string("config: ") + splits[s].count_key + " must be >= 0");
    for (long long i = 0; i < count; ++i) {
      const auto clip_seed = derive_seed(seed, s, std::uint64_t(i));
      std::ostringstream id;
      id << splits[s].split << "_" << std::setw(4) << std::setfill('0') << i;
      SceneConfig sc;
      try {
        sc = scene_config(cfg, clip_seed, splits[s].occlusion);
        sc.validate();
      } catch (const ConfigError&) {
        throw;
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
      const auto clip = generate(sc);
      for (auto& e : write_clip(dir, id.str(), splits[s].split, clip_seed, clip)) m.entries.push_back(std::move(e));
    }
  }
  write_manifest(dir / "manifest.json", m);
  return m;
}

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed, const std::string& out_help) {
  cmd->add_option("-c,--config", c.config_path, "Config file (key = value, [sections])");
  cmd->add_option("--set", c.overrides, "Override, section.key=value (repeatable)");
  if (with_seed) cmd->add_option("--seed", c.seed, "Random seed");
  if (!out_help.empty()) cmd->add_option("-o,--out", c.out, out_help);
}

Config load_config(const Common& c) {
  Config cfg = Config::defaults();
  if (!c.config_path.empty()) cfg.merge_file(c.config_path);
  for (const auto& o : c.overrides) cfg.set(o);
  return cfg;
}

std::uint64_t need_seed(const Common& c, const std::string& cmd) {
  if (!c.seed) throw InvalidArgument(cmd + ": --seed is required");
  return *c.seed;
}

// Checkpoint or identity model, with the clip settings it was trained with.
struct Source {
  ModelState state;
  bool identity = false;
};

Source load_source(const std::string& checkpoint, bool identity, int joints) {
  if (identity == !checkpoint.empty())
    throw InvalidArgument("exactly one of --checkpoint and --identity is required");
  Source s;
  if (identity) {
    ModelConfig mc;
    mc.joints = joints;
    s.state = make_model_state(mc);
    s.state.params = make_identity_params(mc);
    s.identity = true;
  } else {
    s.state = load_checkpoint(checkpoint);
    if (s.state.params.config.joints != joints)
      throw InvalidArgument("checkpoint expects " + std::to_string(s.state.params.config.joints) +
                            " joints, input has " + std::to_string(joints));
  }
  return s;
}

EvalConfig with_clip_settings(EvalConfig e, const ModelState& s) {
  e.window = s.window;
  e.use_prev = s.use_prev;
  e.use_next = s.use_next;
  return e;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

std::string ablation_table(const std::vector<AblationRow>& rows, const std::vector<std::string>& splits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "| variant | final loss |";
  for (const auto& s : splits) os << " PCK " << s << " |";
  os << "\n|---|---|";
  for (std::size_t i = 0; i < splits.size(); ++i) os << "---|";
  os << "\n";
  const AblationRow* full = nullptr;
  for (const auto& r : rows)
    if (r.name == "d{3,6,9,12,15}") full = &r;
  for (const auto& r : rows) {
    os << "| " << r.name << " | " << std::setprecision(5) << r.final_loss << std::setprecision(2) << " |";
    for (const auto& rep : r.reports) os << " " << rep.mean_pck.front() << " |";
    os << "\n";
  }
  if (full != nullptr) {
    os << "\nDelta of full model over:\n";
    for (const auto& r : rows) {
      if (r.name != "rm_ptm_sum" && r.name != "rm_ptm_current" && r.name != "rm_prf") continue;
      os << "  " << r.name << ":";
      for (std::size_t i = 0; i < r.reports.size(); ++i)
        os << " " << splits[i] << " " << std::showpos << full->reports[i].mean_pck.front() - r.reports[i].mean_pck.front()
           << std::noshowpos;
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal pose heatmap refinement", "dcpose"};
  app.require_subcommand(1);

  Common synth_c, train_c, refine_c, eval_c, ablate_c, render_c;
  std::string data, checkpoint, input, resume;
  bool identity = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, synth_c, true, "Dataset directory");

  auto* train_cmd = app.add_subcommand("train", "Train on a dataset");
  add_common(train_cmd, train_c, true, "Run directory");
  train_cmd->add_option("-d,--data", data, "Dataset manifest")->required();
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint");

  auto* refine_cmd = app.add_subcommand("refine", "Refine every frame of a DCH1 clip");
  add_common(refine_cmd, refine_c, false, "Output DCH1 file");
  refine_cmd->add_option("-i,--input", input, "Input DCH1 file")->required();
  refine_cmd->add_option("-k,--checkpoint", checkpoint, "DCM1 checkpoint");
  refine_cmd->add_flag("--identity", identity, "Use the identity-configured model");

  auto* eval_cmd = app.add_subcommand("eval", "Score a model on a dataset split");
  add_common(eval_cmd, eval_c, false, "Also write the report to this file");
  eval_cmd->add_option("-d,--data", data, "Dataset manifest")->required();
  eval_cmd->add_option("-k,--checkpoint", checkpoint, "DCM1 checkpoint");
  eval_cmd->add_flag("--identity", identity, "Score the identity baseline (output = current frame)");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and score all ablation variants");
  add_common(ablate_cmd, ablate_c, true, "Output directory");
  ablate_cmd->add_option("-d,--data", data, "Dataset manifest")->required();

  auto* render_cmd = app.add_subcommand("render", "Draw ground truth vs refined skeletons");
  add_common(render_cmd, render_c, false, "Output directory");
  render_cmd->add_option("-d,--data", data, "Dataset manifest")->required();
  render_cmd->add_option("-k,--checkpoint", checkpoint, "DCM1 checkpoint");
  render_cmd->add_flag("--identity", identity, "Use the identity-configured model");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      const auto cfg = load_config(synth_c);
      const auto seed = need_seed(synth_c, "synth");
      const auto dir = resolve_output(synth_c.out.empty() ? "dataset" : synth_c.out);
      const auto m = synthesize_dataset(cfg, seed, dir);
      out << "wrote " << m.entries.size() << " clips to " << dir.string() << "\n";
    } else if (train_cmd->parsed()) {
      const auto cfg = load_config(train_c);
      const auto tc = train_config(cfg, need_seed(train_c, "train"));
      const auto dir = resolve_output(train_c.out.empty() ? "run" : train_c.out);
      const auto dataset = load_dataset(data);
      fs::create_directories(dir);
      auto run_cfg = tc;
      run_cfg.divergence_checkpoint = dir / "last_finite.dcm";
      std::ofstream log(dir / "loss.jsonl", std::ios::binary | std::ios::trunc);
      if (!log) throw IoError("cannot open for writing: " + (dir / "loss.jsonl").string());
      auto on_epoch = [&](int epoch, double loss, double lr) {
        const auto line = loss_json_line(epoch, loss, lr);
        log << line << "\n" << std::flush;
        out << line << "\n" << std::flush;
      };
      TrainResult result = resume.empty() ? train(dataset, run_cfg, on_epoch)
                                          : train_from(load_checkpoint(resume), dataset, run_cfg, on_epoch);
      save_checkpoint(dir / "model.dcm", result.state);
      write_text(dir / "config.conf", cfg.dump());
      out << "wrote " << (dir / "model.dcm").string() << "\n";
    } else if (refine_cmd->parsed()) {
      load_config(refine_c);
      if (refine_c.out.empty()) throw InvalidArgument("refine: --out is required");
      const auto frames = read_dch1(input);
      if (frames.empty()) throw InvalidArgument("refine: input has no frames");
      const auto src = load_source(checkpoint, identity, frames.front().joints());
      std::vector<HeatmapStack> refined;
      for (int c = 0; c < int(frames.size()); ++c) {
        const auto clip = assemble_clip(frames, c, src.state.window,
                                        FrameSelector{src.state.window > 1, 0, src.state.use_prev, src.state.use_next});
        refined.push_back(refine(src.state.params, clip));
      }
      const auto path = resolve_output(refine_c.out);
      write_dch1(path, refined);
      out << "wrote " << path.string() << "\n";
    } else if (eval_cmd->parsed()) {
      const auto cfg = load_config(eval_c);
      const auto dataset = load_dataset(data);
      const auto src = load_source(checkpoint, identity, dataset.manifest.joints);
      const auto ec = with_clip_settings(eval_config(cfg), src.state);
      const auto report =
          src.identity ? evaluate(identity_refiner(), dataset, ec) : evaluate(src.state, dataset, ec);
      const auto line = to_json_line(report, src.identity ? "identity" : fs::path(checkpoint).filename().string());
      out << line << "\n";
      if (!eval_c.out.empty()) write_text(resolve_output(eval_c.out), line + "\n");
    } else if (ablate_cmd->parsed()) {
      const auto cfg = load_config(ablate_c);
      const auto tc = train_config(cfg, need_seed(ablate_c, "ablate"));
      const auto splits = cfg.str_list("ablate.eval_splits");
      const auto dir = resolve_output(ablate_c.out.empty() ? "ablation" : ablate_c.out);
      const auto dataset = load_dataset(data);
      fs::create_directories(dir);
      std::ofstream log(dir / "ablation.jsonl", std::ios::binary | std::ios::trunc);
      if (!log) throw IoError("cannot open for writing: " + (dir / "ablation.jsonl").string());
      const auto rows = ablation_suite(dataset, tc, splits, eval_config(cfg), [&](const AblationRow& r) {
        for (std::size_t i = 0; i < r.reports.size(); ++i) {
          auto j = nlohmann::json::parse(to_json_line(r.reports[i], r.name));
          j["split"] = splits[i];
          j["final_loss"] = r.final_loss;
          log << j.dump() << "\n" << std::flush;
        }
        out << r.name << " done\n" << std::flush;
      });
      const auto table = ablation_table(rows, splits);
      write_text(dir / "ablation.md", table);
      out << table;
    } else if (render_cmd->parsed()) {
      const auto cfg = load_config(render_c);
      const auto dataset = load_dataset(data);
      const auto src = load_source(checkpoint, identity, dataset.manifest.joints);
      const auto dir = resolve_output(render_c.out.empty() ? "render" : render_c.out);
      const int scale = int(cfg.integer("render.scale"));
      const auto clips = dataset.split(cfg.str("render.split"));
      if (clips.empty()) throw InvalidArgument("render: split '" + cfg.str("render.split") + "' is empty");
      const auto limit = std::min<std::size_t>(clips.size(), std::size_t(std::max<long long>(0, cfg.integer("render.clips"))));
      for (std::size_t i = 0; i < limit; ++i) {
        const auto& clip = clips[i]->clip;
        std::vector<Image> panels;
        for (int c = 0; c < clip.frames(); ++c) {
          const auto triplet = assemble_clip(clip.degraded.front(), c, src.state.window,
                                             FrameSelector{src.state.window > 1, 0, src.state.use_prev, src.state.use_next});
          const auto refined = refine(src.state.params, triplet);
          panels.push_back(render_overlay(clip.degraded.front()[std::size_t(c)], clip.poses.front()[std::size_t(c)],
                                          decode_argmax(refined), scale));
        }
        const auto path = dir / (clips[i]->entry.id + "_p" + std::to_string(clips[i]->entry.person) + ".png");
        write_png(path, hstack(panels));
        out << "wrote " << path.string() << "\n";
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace dcpose
