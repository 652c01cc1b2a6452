// snnsir: synthetic stereo data generation, toy-scale training, inference,
// evaluation and energy profiling for the spike-driven restoration network.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "snnsir/data.hpp"
#include "snnsir/image_io.hpp"
#include "snnsir/metrics.hpp"
#include "snnsir/network.hpp"
#include "snnsir/profiler.hpp"
#include "snnsir/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace snnsir;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;
constexpr int kExitOther = 1;

void write_config_echo(const std::string& out_dir, const json& resolved) {
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "config.json");
  if (!os) throw IoError("cannot write config echo under '" + out_dir + "'");
  os << resolved.dump(2) << "\n";
}

Tensor as_batch(const Tensor& img) {  // [3,H,W] -> [1,3,H,W]
  return reshape(img, {1, 3, img.dim(1), img.dim(2)});
}

Tensor as_image(const Tensor& batched) {  // [1,3,H,W] -> [3,H,W]
  return reshape(batched, {3, batched.dim(2), batched.dim(3)});
}

std::string sanitize(const std::string& name) {
  std::string s = name;
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

struct GenDataArgs {
  std::string task = "raindrop";
  int64_t count = 10;
  int64_t size = 64;
  uint64_t seed = 0;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& a) {
  write_config_echo(a.out, json{{"command", "gen-data"},
                                {"task", a.task},
                                {"count", a.count},
                                {"size", a.size},
                                {"seed", a.seed},
                                {"out", a.out}});
  Manifest m = generate_dataset(a.out, task_from_name(a.task), a.count, a.size, a.seed);
  std::cout << "wrote " << m.entries.size() << " pairs under " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string manifest;
  std::string config_file;
  std::string resume;
  std::string out;
  std::string task;  // empty: from config file or manifest
  int64_t steps = 2000;
  int64_t batch = 4;
  int64_t crop = 32;
  double lr = 1e-3;
  uint64_t seed = 0;
  int64_t val_interval = 100;
  int64_t time_steps = -1;
  int threads = 1;
};

int cmd_train(const TrainArgs& a) {
  Manifest manifest = Manifest::load(a.manifest);
  if (manifest.entries.empty()) throw ConfigError("train: manifest is empty");

  NetworkConfig net_cfg;
  int64_t start_step = 0;
  std::unique_ptr<SnnsirNetwork> net;
  if (!a.resume.empty()) {
    net = SnnsirNetwork::load_checkpoint(a.resume, &start_step);
    net_cfg = net->config();
    if (!a.config_file.empty()) {
      std::cerr << "snnsir: --resume takes the network config from the checkpoint; "
                   "ignoring --config\n";
    }
  } else {
    Task task = manifest.entries[0].degradation.kind;
    if (!a.config_file.empty()) {
      std::ifstream is(a.config_file);
      if (!is) throw IoError("train: cannot open config '" + a.config_file + "'");
      std::string text((std::istreambuf_iterator<char>(is)),
                       std::istreambuf_iterator<char>());
      net_cfg = NetworkConfig::from_json(text);
    } else {
      net_cfg = NetworkConfig::for_task(task);
    }
    if (!a.task.empty()) net_cfg.task = task_from_name(a.task);  // flags beat file
    if (a.time_steps > 0) net_cfg.time_steps = a.time_steps;
    net_cfg.validate();
    net = std::make_unique<SnnsirNetwork>(net_cfg, a.seed);
  }

  TrainConfig tc;
  tc.steps = a.steps;
  tc.batch = a.batch;
  tc.crop = a.crop;
  tc.seed = a.seed;
  tc.val_interval = a.val_interval;
  tc.adamw.lr = a.lr;
  tc.out_dir = a.out;
  tc.start_step = start_step;

  write_config_echo(a.out, json{{"command", "train"},
                                {"manifest", a.manifest},
                                {"steps", a.steps},
                                {"batch", a.batch},
                                {"crop", a.crop},
                                {"lr", a.lr},
                                {"seed", a.seed},
                                {"val_interval", a.val_interval},
                                {"threads", a.threads},
                                {"resume", a.resume},
                                {"start_step", start_step},
                                {"network", json::parse(net->config().to_json())}});

  auto train_samples = load_samples(manifest.split("train"));
  auto val_samples = load_samples(manifest.split("val"));
  if (train_samples.empty()) train_samples = load_samples(manifest.split("all"));

  std::ofstream log(fs::path(a.out) / "train_log.jsonl",
                    a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("train: cannot open log under '" + a.out + "'");
  TrainResult r = train(train_samples, val_samples, *net, tc, &log);
  std::cout << "trained " << r.steps_run << " steps, final L1 " << r.final_l1
            << ", last val PSNR " << r.last_val_psnr << " dB\n"
            << "checkpoint: " << (fs::path(a.out) / "checkpoint.snir").string() << "\n";
  return kExitOk;
}

struct InferArgs {
  std::string checkpoint, left, right, out;
};

int cmd_infer(const InferArgs& a) {
  auto net = SnnsirNetwork::load_checkpoint(a.checkpoint);
  write_config_echo(a.out, json{{"command", "infer"},
                                {"checkpoint", a.checkpoint},
                                {"left", a.left},
                                {"right", a.right},
                                {"network", json::parse(net->config().to_json())}});
  StereoPair in{as_batch(load_png(a.left)), as_batch(load_png(a.right))};
  NoGradGuard no_grad;
  RunContext ctx;
  RestorationOutput out = net->forward(in, ctx);
  save_png((fs::path(a.out) / "restored_left.png").string(), as_image(out.refined.left));
  save_png((fs::path(a.out) / "restored_right.png").string(),
           as_image(out.refined.right));
  std::cout << "wrote restored pair under " << a.out << "\n";
  return kExitOk;
}

struct ProfileArgs {
  std::string checkpoint, left, right, out;
  bool sfr = false;
};

int cmd_profile(const ProfileArgs& a) {
  auto net = SnnsirNetwork::load_checkpoint(a.checkpoint);
  write_config_echo(a.out, json{{"command", "profile"},
                                {"checkpoint", a.checkpoint},
                                {"left", a.left},
                                {"right", a.right},
                                {"sfr", a.sfr},
                                {"network", json::parse(net->config().to_json())}});
  StereoPair in{as_batch(load_png(a.left)), as_batch(load_png(a.right))};
  EnergyLedger ledger;
  if (a.sfr) ledger.enable_sfr();
  NoGradGuard no_grad;
  RunContext ctx;
  ctx.ledger = &ledger;
  net->forward(in, ctx);
  EnergyReport report = ledger.report();
  {
    std::ofstream os(fs::path(a.out) / "report.json");
    os << report.to_json() << "\n";
  }
  {
    std::ofstream os(fs::path(a.out) / "report.txt");
    os << report.to_text();
  }
  if (a.sfr) {
    for (const SfrMap& m : ledger.sfr_maps()) {
      const std::string name =
          "sfr_" + sanitize(m.block) + "_" + (m.view.empty() ? "x" : m.view) + ".png";
      save_heatmap_png((fs::path(a.out) / name).string(), m.values, m.height, m.width);
    }
  }
  std::cout << report.to_text();
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, manifest, out;
  std::string split = "val";
};

int cmd_eval(const EvalArgs& a) {
  auto net = SnnsirNetwork::load_checkpoint(a.checkpoint);
  write_config_echo(a.out, json{{"command", "eval"},
                                {"checkpoint", a.checkpoint},
                                {"manifest", a.manifest},
                                {"split", a.split},
                                {"network", json::parse(net->config().to_json())}});
  Manifest manifest = Manifest::load(a.manifest);
  auto entries = manifest.split(a.split);
  if (entries.empty()) throw ConfigError("eval: no entries in split '" + a.split + "'");
  auto samples = load_samples(entries);

  NoGradGuard no_grad;
  std::ofstream table(fs::path(a.out) / "metrics.jsonl");
  double sum_psnr = 0, sum_ssim = 0, sum_base_psnr = 0, sum_base_ssim = 0;
  std::cout << "idx  psnr_l  psnr_r  psnr   ssim   base_psnr\n";
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    RunContext ctx;
    StereoPair in{as_batch(s.degraded_left), as_batch(s.degraded_right)};
    RestorationOutput out = net->forward(in, ctx);
    StereoPair pred{as_image(out.refined.left), as_image(out.refined.right)};
    StereoPair clean{s.clean_left, s.clean_right};
    // Degraded-input baseline; SR inputs are upscaled bicubically to compare.
    StereoPair base{s.degraded_left, s.degraded_right};
    if (base.left.shape() != clean.left.shape()) {
      base.left = as_image(bicubic_resize(as_batch(base.left), clean.left.dim(1),
                                          clean.left.dim(2)));
      base.right = as_image(bicubic_resize(as_batch(base.right), clean.right.dim(1),
                                           clean.right.dim(2)));
    }
    const double pl = psnr(pred.left, clean.left), pr = psnr(pred.right, clean.right);
    const double p = 0.5 * (pl + pr);
    const double sm = ssim_pair(pred, clean);
    const double bp = psnr_pair(base, clean);
    const double bs = ssim_pair(base, clean);
    sum_psnr += p;
    sum_ssim += sm;
    sum_base_psnr += bp;
    sum_base_ssim += bs;
    table << json{{"index", i},       {"psnr_left", pl},      {"psnr_right", pr},
                  {"psnr", p},        {"ssim", sm},           {"baseline_psnr", bp},
                  {"baseline_ssim", bs}}
                 .dump()
          << "\n";
    std::printf("%-4zu %-7.3f %-7.3f %-6.3f %-6.4f %-6.3f\n", i, pl, pr, p, sm, bp);
  }
  const double n = static_cast<double>(samples.size());
  table << json{{"index", "mean"},
                {"psnr", sum_psnr / n},
                {"ssim", sum_ssim / n},
                {"baseline_psnr", sum_base_psnr / n},
                {"baseline_ssim", sum_base_ssim / n}}
               .dump()
        << "\n";
  std::printf("mean psnr %.3f dB (baseline %.3f dB), ssim %.4f (baseline %.4f)\n",
              sum_psnr / n, sum_base_psnr / n, sum_ssim / n, sum_base_ssim / n);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spike-driven stereo image restoration"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic stereo dataset");
  gen_cmd->add_option("--task", gen.task, "raindrop|rainstreak|lowlight|superres");
  gen_cmd->add_option("--count", gen.count, "number of stereo pairs");
  gen_cmd->add_option("--size", gen.size, "image edge length");
  gen_cmd->add_option("--seed", gen.seed, "base RNG seed");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "train on a generated manifest");
  tr_cmd->add_option("--manifest", tr.manifest, "manifest.jsonl path")->required();
  tr_cmd->add_option("--config", tr.config_file, "network config JSON (flags override)");
  tr_cmd->add_option("--task", tr.task, "override task");
  tr_cmd->add_option("--steps", tr.steps, "optimizer steps");
  tr_cmd->add_option("--batch", tr.batch, "batch size");
  tr_cmd->add_option("--crop", tr.crop, "training crop size");
  tr_cmd->add_option("--lr", tr.lr, "learning rate");
  tr_cmd->add_option("--seed", tr.seed, "RNG seed");
  tr_cmd->add_option("--val-interval", tr.val_interval, "steps between PSNR evals");
  tr_cmd->add_option("--time-steps", tr.time_steps, "override T");
  tr_cmd->add_option("--resume", tr.resume, "checkpoint to continue from");
  tr_cmd->add_option("--threads", tr.threads,
                     "worker cap (this build computes single-threaded)");
  tr_cmd->add_option("--out", tr.out, "output directory")->required();

  InferArgs in;
  auto* in_cmd = app.add_subcommand("infer", "restore one stereo pair");
  in_cmd->add_option("--checkpoint", in.checkpoint, "checkpoint path")->required();
  in_cmd->add_option("--left", in.left, "left degraded PNG")->required();
  in_cmd->add_option("--right", in.right, "right degraded PNG")->required();
  in_cmd->add_option("--out", in.out, "output directory")->required();

  ProfileArgs pr;
  auto* pr_cmd = app.add_subcommand("profile", "FLOP/SOP/energy report for one pair");
  pr_cmd->add_option("--checkpoint", pr.checkpoint, "checkpoint path")->required();
  pr_cmd->add_option("--left", pr.left, "left PNG")->required();
  pr_cmd->add_option("--right", pr.right, "right PNG")->required();
  pr_cmd->add_flag("--sfr", pr.sfr, "emit spike-firing-rate heatmaps");
  pr_cmd->add_option("--out", pr.out, "output directory")->required();

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "PSNR/SSIM table over a manifest split");
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
  ev_cmd->add_option("--manifest", ev.manifest, "manifest.jsonl path")->required();
  ev_cmd->add_option("--split", ev.split, "train|val|test|all");
  ev_cmd->add_option("--out", ev.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (tr_cmd->parsed()) return cmd_train(tr);
    if (in_cmd->parsed()) return cmd_infer(in);
    if (pr_cmd->parsed()) return cmd_profile(pr);
    if (ev_cmd->parsed()) return cmd_eval(ev);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitConfig;
}
