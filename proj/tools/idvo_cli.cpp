// idvo command-line driver.
//
// Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "idvo/dataset_io.hpp"
#include "idvo/evaluation.hpp"
#include "idvo/masking.hpp"
#include "idvo/objective.hpp"
#include "idvo/optimizer.hpp"
#include "idvo/pipeline.hpp"
#include "idvo/run_config.hpp"

namespace fs = std::filesystem;
using namespace idvo;

namespace {

enum Exit { kOk = 0, kVerification = 1, kUsage = 2, kIo = 3 };

struct Overrides {
  std::string config;
  std::vector<std::string> set;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> snippet_len;
  std::vector<std::string> ablate;
  std::optional<std::string> resize;
};

// defaults < config file < IDVO_* environment < flags
RunConfig resolve(const Overrides& o) {
  RunConfig cfg;
  if (!o.config.empty()) apply_config_file(cfg, o.config);
  apply_environment(cfg, idvo_environment());
  for (const std::string& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1), "--set");
  }
  if (o.out) cfg.out = *o.out;
  if (o.seed) {
    cfg.optimizer.seed = *o.seed;
    cfg.synth.seed = *o.seed;
  }
  if (o.threads) cfg.threads = *o.threads;
  if (o.snippet_len) cfg.optimizer.snippet_len = *o.snippet_len;
  if (o.resize) apply_setting(cfg, "resize", *o.resize, "--resize");
  for (const std::string& a : o.ablate) apply_ablation(cfg, a);
  return cfg;
}

std::string path_in(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_trace_csv(const std::string& path, const OptTrace& trace) {
  std::ofstream out(path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "iteration,inertia,rec,ssim,align,mask,total\n";
  for (const TraceRow& r : trace.rows) {
    out << r.iteration << ',' << r.inertia << ',' << r.rec << ',' << r.ssim << ',' << r.align << ','
        << r.mask << ',' << r.total << '\n';
  }
  if (!out) throw LoadError("failed writing '" + path + "'");
}

int cmd_synth(const RunConfig& cfg) {
  try {
    cfg.synth.validate();
  } catch (const DomainError& err) {
    throw ConfigError(err.what());
  }
  const Sequence seq = synth_generate(cfg.synth);
  write_synthetic_dataset(cfg.out, seq, cfg.synth);
  write_config_echo(cfg.out, cfg);
  std::printf("wrote %zu frames (%dx%d) to %s\n", seq.size(), cfg.synth.width, cfg.synth.height,
              cfg.out.c_str());
  return kOk;
}

int cmd_optimize(RunConfig cfg, const std::string& dataset_flag, const std::string& pose_flag) {
  if (!dataset_flag.empty()) cfg.dataset = dataset_flag;
  if (!pose_flag.empty()) cfg.pose_file = pose_flag;
  if (cfg.dataset.empty()) throw ConfigError("optimize: no dataset given (--dataset or dataset=)");
  if (cfg.pose_file.empty() && fs::exists(path_in(cfg.dataset, "poses.txt"))) {
    cfg.pose_file = path_in(cfg.dataset, "poses.txt");
  }
  cfg.validate();
  write_config_echo(cfg.out, cfg);

  const Sequence seq = load_sequence(cfg.dataset, cfg.resize, cfg.pose_file);
  const StaticFilterReport filter = static_filter(seq.frames, cfg.optimizer.static_threshold);
  std::vector<Frame> frames;
  for (int i : filter.kept) frames.push_back(seq.frames[std::size_t(i)]);
  std::printf("%zu frames, %zu kept after static filtering\n", seq.size(), frames.size());

  const auto start = std::chrono::steady_clock::now();
  const SequenceRun run = optimize_sequence(frames, seq.intrinsics, cfg.optimizer, cfg.stride(), cfg.threads);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  {
    std::ofstream kept(path_in(cfg.out, "kept_frames.txt"));
    for (int i : filter.kept) kept << i << '\n';
    if (!kept) throw LoadError("failed writing kept_frames.txt");
  }
  const DepthRange range;
  bool aborted = false;
  for (std::size_t s = 0; s < run.snippets.size(); ++s) {
    const SnippetResult& r = run.snippets[s];
    char name[32];
    std::snprintf(name, sizeof(name), "snippet_%03zu", s);
    const std::string dir = path_in(path_in(cfg.out, "snippets"), name);
    fs::create_directories(dir);
    write_kitti_poses(path_in(dir, "poses.txt"), absolute_poses(r.state.poses));
    for (int f = 0; f < r.state.frame_count(); ++f) {
      char depth_name[32];
      std::snprintf(depth_name, sizeof(depth_name), "depth_%02d.pfm", f);
      pfm_write(path_in(dir, depth_name), range.decode(r.state.depth_logits[std::size_t(f)]));
    }
    write_trace_csv(path_in(dir, "trace.csv"), r.trace);
    std::printf("%s first_frame=%d loss %.6f -> %.6f%s\n", name, filter.kept[std::size_t(run.first_index[s])],
                r.trace.initial_total, r.trace.final_total, r.trace.aborted ? " ABORTED" : "");
    if (r.trace.aborted) {
      std::fprintf(stderr, "%s: %s\n", name, r.trace.message.c_str());
      aborted = true;
    }
  }
  write_kitti_poses(path_in(cfg.out, "trajectory.txt"), run.trajectory);
  if (!seq.gt_poses.empty()) {
    std::vector<Pose6DoF> gt;
    for (std::size_t i = 0; i < run.trajectory.size(); ++i) gt.push_back(seq.gt_poses[std::size_t(filter.kept[i])]);
    write_kitti_poses(path_in(cfg.out, "gt_trajectory.txt"), gt);
  }
  std::printf("%zu snippets, %zu chained poses, %.1f s\n", run.snippets.size(), run.trajectory.size(), seconds);
  return aborted ? kVerification : kOk;
}

std::vector<std::pair<std::string, std::string>> depth_pairs(const std::string& est, const std::string& gt) {
  if (!fs::is_directory(est)) return {{est, gt}};
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(est)) {
    if (e.path().extension() == ".pfm") names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw LoadError("no .pfm files in '" + est + "'");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const std::string& n : names) {
    const std::string g = path_in(gt, n);
    if (!fs::exists(g)) throw LoadError("no ground truth '" + g + "' for '" + path_in(est, n) + "'");
    pairs.emplace_back(path_in(est, n), g);
  }
  return pairs;
}

double population_std(const std::vector<double>& x, double mean) {
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  return std::sqrt(var / double(x.size()));
}

int cmd_eval_ate(const RunConfig& cfg, const std::string& est_path, const std::string& gt_path) {
  const std::vector<Pose6DoF> est = read_kitti_poses(est_path);
  const std::vector<Pose6DoF> gt = read_kitti_poses(gt_path);
  const AteReport r = ate_sequence(est, gt, cfg.optimizer.snippet_len, cfg.ate_alignment);
  write_config_echo(cfg.out, cfg);
  write_ate_csv(path_in(cfg.out, "ate.csv"), r);
  std::printf("ATE %s over %zu windows of %d\n", format_mean_std(r.mean, r.std).c_str(), r.count,
              cfg.optimizer.snippet_len);
  return kOk;
}

int cmd_eval_depth(const RunConfig& cfg, const std::string& est_path, const std::string& gt_path) {
  std::vector<DepthReport> reports;
  for (const auto& [e, g] : depth_pairs(est_path, gt_path)) {
    reports.push_back(depth_metrics(pfm_read(e), pfm_read(g), cfg.depth_cap));
  }
  write_config_echo(cfg.out, cfg);
  write_depth_csv(path_in(cfg.out, "depth.csv"), reports);
  const DepthReport m = average(reports);
  auto column = [&](auto member, double mean) {
    std::vector<double> x;
    for (const DepthReport& r : reports) x.push_back(r.*member);
    return format_mean_std(mean, population_std(x, mean));
  };
  std::printf("AbsRel %s  SqRel %s  RMSE %s  RMSElog %s  (%zu images)\n",
              column(&DepthReport::abs_rel, m.abs_rel).c_str(), column(&DepthReport::sq_rel, m.sq_rel).c_str(),
              column(&DepthReport::rmse, m.rmse).c_str(), column(&DepthReport::rmse_log, m.rmse_log).c_str(),
              reports.size());
  return kOk;
}

int cmd_eval_smoothness(const RunConfig& cfg, const std::string& est_path) {
  const std::vector<Pose6DoF> traj = read_kitti_poses(est_path);
  const SmoothnessReport r = smoothness(traj, cfg.optimizer.inertia.chi);
  write_config_echo(cfg.out, cfg);
  write_smoothness_csv(path_in(cfg.out, "smoothness.csv"), r);
  std::printf("saw-tooth index %.3f  mean |a| %.3f  mean |j| %.3f  max |j| %.3f  mean v %.3f\n",
              r.sawtooth_index, r.mean_abs_accel, r.mean_abs_jerk, r.max_abs_jerk, r.mean_velocity);
  return kOk;
}

int cmd_gradcheck(const RunConfig& cfg, double corrupt, std::size_t samples) {
  write_config_echo(cfg.out, cfg);
  GradCheckOptions options;
  options.corrupt_factor = corrupt;
  options.samples_per_block = samples;
  const auto start = std::chrono::steady_clock::now();
  const std::vector<GradCheckReport> reports = grad_check_suite(cfg.optimizer.seed, options, samples);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ofstream csv(path_in(cfg.out, "gradcheck.csv"));
  csv << "term,block,sampled,max_relative_error,pass\n";
  bool all = true;
  for (const GradCheckReport& r : reports) {
    std::printf("%-15s %s\n", to_string(r.term).c_str(), r.pass ? "PASS" : "FAIL");
    for (const BlockCheck& b : r.blocks) {
      std::printf("  %-15s n=%-5zu max_rel=%.3e %s\n", b.block.c_str(), b.sampled, b.max_relative_error,
                  b.pass ? "ok" : "FAILED");
      csv << to_string(r.term) << ',' << b.block << ',' << b.sampled << ',' << b.max_relative_error << ','
          << (b.pass ? 1 : 0) << '\n';
    }
    all = all && r.pass;
  }
  if (!csv) throw LoadError("failed writing gradcheck.csv");
  std::printf("%s in %.1f s\n", all ? "all terms PASS" : "gradient check FAILED", seconds);
  return all ? kOk : kVerification;
}

int cmd_mask_preview(const RunConfig& cfg, double speed, double yaw_rate, std::optional<double> soft_logit) {
  const Size2 size = cfg.resize.value_or(Size2{416, 128});
  const HardEdgeMask hard = build_dhem(speed, yaw_rate, size.width, size.height, cfg.optimizer.dhem);
  const ExplainabilityField soft(size.height, size.width, soft_logit.value_or(cfg.optimizer.init_mask_logit));
  write_config_echo(cfg.out, cfg);
  write_mask_png(path_in(cfg.out, "hard_mask.png"), hard.grid);
  write_mask_png(path_in(cfg.out, "combined_mask.png"), combine(hard, soft).grid);
  std::printf("%dx%d widths top=%d bottom=%d left=%d right=%d, %ld pixels masked\n", size.width, size.height,
              hard.widths.top, hard.widths.bottom, hard.widths.left, hard.widths.right,
              long((hard.grid == 0.0).count()));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direct monocular depth and ego-motion optimization with inertia and hard-edge masking"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "key=value configuration file");
  app.add_option("--set", o.set, "override one key, key=value (repeatable)");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--seed", o.seed, "seed for the optimizer and the synthetic scene");
  app.add_option("--threads", o.threads, "snippet workers");
  app.add_option("--snippet-len", o.snippet_len, "frames per snippet");
  app.add_option("--ablate", o.ablate, "no-inertia or no-dhem (repeatable)");
  app.add_option("--resize", o.resize, "WxH, or none to keep the native size");

  auto* synth = app.add_subcommand("synth", "write a synthetic KITTI-layout dataset with ground truth");

  std::string dataset, pose_file;
  auto* optimize = app.add_subcommand("optimize", "optimize depth and poses over a sequence");
  optimize->add_option("--dataset", dataset, "KITTI-layout sequence directory");
  optimize->add_option("--pose-file", pose_file, "ground-truth poses to carry along");

  auto* eval = app.add_subcommand("eval", "evaluate estimates against ground truth");
  eval->require_subcommand(1);
  std::string est, gt;
  auto* ate = eval->add_subcommand("ate", "5-snippet ATE with scale alignment");
  ate->add_option("--est", est, "estimated trajectory (KITTI poses)")->required();
  ate->add_option("--gt", gt, "ground-truth trajectory (KITTI poses)")->required();
  auto* depth = eval->add_subcommand("depth", "median-scaled depth metrics");
  depth->add_option("--est", est, "predicted PFM file or directory")->required();
  depth->add_option("--gt", gt, "ground-truth PFM file or directory")->required();
  auto* smooth = eval->add_subcommand("smoothness", "velocity, acceleration and jerk statistics");
  smooth->add_option("--est", est, "trajectory (KITTI poses)")->required();

  double corrupt = 1.0;
  std::size_t samples = 200;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss term");
  gradcheck->add_option("--corrupt", corrupt, "scale analytic gradients by this factor (harness test)");
  gradcheck->add_option("--samples", samples, "parameters checked per block");

  double speed = 0.0, yaw_rate = 0.0;
  std::optional<double> soft_logit;
  auto* preview = app.add_subcommand("mask-preview", "write the hard-edge and combined masks as PNG");
  preview->add_option("--speed", speed, "scene units per frame")->required();
  preview->add_option("--yaw-rate", yaw_rate, "radians per frame, positive for a left turn");
  preview->add_option("--soft-logit", soft_logit, "uniform explainability logit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const RunConfig cfg = resolve(o);
    if (synth->parsed()) return cmd_synth(cfg);
    if (optimize->parsed()) return cmd_optimize(cfg, dataset, pose_file);
    if (ate->parsed()) return cmd_eval_ate(cfg, est, gt);
    if (depth->parsed()) return cmd_eval_depth(cfg, est, gt);
    if (smooth->parsed()) return cmd_eval_smoothness(cfg, est);
    if (gradcheck->parsed()) return cmd_gradcheck(cfg, corrupt, samples);
    if (preview->parsed()) return cmd_mask_preview(cfg, speed, yaw_rate, soft_logit);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const LoadError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const EvaluationError& e) {
    std::fprintf(stderr, "verification failure: %s\n", e.what());
    return kVerification;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
