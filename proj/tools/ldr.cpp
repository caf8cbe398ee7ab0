// Command-line front end for the document localization pipeline:
// data generation, training, evaluation, single-image inference, latency
// benchmarking, ablations, and SVG figure emission.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ldr/ablate.hpp"
#include "ldr/eval.hpp"
#include "ldr/svg.hpp"
#include "ldr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string joined_command_line(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += " ";
    out += argv[i];
  }
  return out;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ldr::DataError(ldr::cat("cannot open ", path, " for writing"));
  f << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ldr::DataError(ldr::cat("cannot open ", path));
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ldr::DataError(ldr::cat(path, ": not valid JSON: ", e.what()));
  }
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string out;
  int count = 100;
  uint64_t seed = 1;
  int size = 64;
  int classes = 2;
  double occlusion = 0.0;
  double occlusion_fraction = -1.0;
  double negatives = 0.0;
  double out_of_frame = 0.0;
  double jitter = 0.06;
  double rotation = 0.5235988;
  bool force = false;
};

int run_gen_data(const GenDataArgs& args, const std::string& cmdline) {
  ldr::SceneConfig cfg;
  cfg.image_hw = args.size;
  cfg.n_cls = args.classes;
  cfg.seed = args.seed;
  cfg.occlusion_prob = args.occlusion;
  cfg.occlusion_fraction = args.occlusion_fraction;
  cfg.occlusion_max_fraction = std::max(cfg.occlusion_max_fraction, args.occlusion_fraction);
  cfg.negative_prob = args.negatives;
  cfg.out_of_frame_prob = args.out_of_frame;
  cfg.jitter = args.jitter;
  cfg.rotation_max = args.rotation;
  cfg.validate();

  if (fs::exists(args.out) && !fs::is_empty(args.out) && !args.force)
    throw ldr::DataError(ldr::cat(args.out, " exists and is not empty (use --force to overwrite)"));

  std::vector<ldr::SceneSample> samples(size_t(args.count), ldr::SceneSample{});
  ldr::parallel_for(args.count, [&](int i) { samples[size_t(i)] = ldr::generate_scene(cfg, i); });
  ldr::write_dataset(samples, args.out, &cfg, cmdline);
  std::cout << "wrote " << args.count << " samples to " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out = "model.ckpt";
  std::string metrics;
  std::string val;
  std::string resume;
  std::string profile = "desk";
  int epochs = -1;
  int batch = -1;
  double lr = -1;
  uint64_t seed = 1;
  bool no_fusion = false;
  bool no_line_loss = false;
  bool squared_reg = false;
  double alpha = -1;
  int n_points = -1;
  int eval_every = 0;
};

int run_train(const TrainArgs& args, const std::string& cmdline) {
  ldr::TrainConfig cfg = args.profile == "paper" ? ldr::paper_profile() : ldr::desk_profile();
  if (args.profile != "paper" && args.profile != "desk")
    throw std::invalid_argument(ldr::cat("unknown profile ", args.profile, " (desk|paper)"));
  cfg.dataset_dir = args.data;
  cfg.val_dir = args.val;
  cfg.out_path = args.out;
  cfg.metrics_path = args.metrics.empty() ? args.out + ".metrics.csv" : args.metrics;
  cfg.resume_from = args.resume;
  cfg.seed = args.seed;
  cfg.eval_every = args.eval_every;
  cfg.squared_reg = args.squared_reg;
  if (args.epochs > 0) cfg.epochs = args.epochs;
  if (args.batch > 0) cfg.batch_size = args.batch;
  if (args.lr > 0) cfg.lr = args.lr;
  if (args.alpha > 0) cfg.model.alpha = args.alpha;
  if (args.n_points > 0) cfg.model.n_points = args.n_points;
  if (args.no_fusion) cfg.model.fusion_enabled = false;
  if (args.no_line_loss) {
    cfg.weights.beta = 0.0;
    cfg.weights.gamma = 0.0;
  }
  cfg.command_line = cmdline;

  auto t0 = std::chrono::steady_clock::now();
  ldr::TrainResult result = ldr::train(cfg);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& last = result.log.back();
  std::cout << "trained " << result.log.size() << " epochs in " << secs << " s; final loss "
            << last.mean.total;
  if (last.val_ji >= 0) std::cout << "; val JI " << last.val_ji;
  std::cout << "\ncheckpoint: " << cfg.out_path << "\nmetrics: " << cfg.metrics_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval / infer / bench
// ---------------------------------------------------------------------------

int run_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& out,
             const std::string& csv, const std::string& cmdline) {
  ldr::Checkpoint ckpt = ldr::load_checkpoint(ckpt_path);
  auto samples = ldr::read_dataset(data_dir);
  ldr::EvalReport report = ldr::evaluate(ckpt, samples);
  json j = report.to_json();
  j["command_line"] = cmdline;
  j["checkpoint"] = ckpt_path;
  j["dataset"] = data_dir;
  if (!out.empty()) write_json_file(out, j);
  if (!csv.empty()) ldr::write_eval_csv(report, csv);
  std::cout << "frames " << report.frames << ", overall JI " << report.overall_ji
            << ", cls accuracy " << report.cls_accuracy << ", failures " << report.failures << "\n";
  for (const auto& [bg, ji] : report.background_mean_ji)
    std::cout << "  background " << bg << ": JI " << ji << " (" << report.background_frames.at(bg)
              << " frames)\n";
  return 0;
}

int run_infer(const std::string& ckpt_path, const std::string& image_path, bool as_json) {
  ldr::Checkpoint ckpt = ldr::load_checkpoint(ckpt_path);
  int w = 0, h = 0;
  auto rgb = ldr::read_ppm(image_path, w, h);
  if (w != ckpt.config.input_hw || h != ckpt.config.input_hw)
    throw ldr::DataError(ldr::cat(image_path, ": expected ", ckpt.config.input_hw, "x",
                                  ckpt.config.input_hw, " input, got ", w, "x", h));
  ldr::Tensor img = ldr::Tensor::zeros({h, w, 3});
  for (size_t i = 0; i < rgb.size(); ++i) img.data[i] = float(rgb[i]) / 255.0f;
  auto [quad, cls] = ldr::predict_quad(ckpt, img, w, h);
  if (as_json) {
    json corners = json::array();
    for (const auto& p : quad.corners) corners.push_back({p.x, p.y});
    std::cout << json{{"corners", corners}, {"class", cls}}.dump() << "\n";
  } else {
    std::cout << "class " << cls << "\n";
    for (int i = 0; i < 4; ++i)
      std::cout << "corner " << i << ": " << quad.corners[size_t(i)].x << " "
                << quad.corners[size_t(i)].y << "\n";
  }
  return 0;
}

int run_bench(const std::string& ckpt_path, int frames, int warmup, bool prune,
              const std::string& out, const std::string& cmdline) {
  ldr::Checkpoint ckpt = ldr::load_checkpoint(ckpt_path);
  if (prune) ckpt = ldr::prune_for_inference(ckpt);
  ldr::LatencyReport report = ldr::benchmark_inference(ckpt, frames, warmup);
  json j = report.to_json();
  j["command_line"] = cmdline;
  j["checkpoint"] = ckpt_path;
  j["pruned"] = prune;
  if (!out.empty()) write_json_file(out, j);
  std::cout << "mean " << report.mean_ms << " ms, p50 " << report.p50_ms << " ms, p95 "
            << report.p95_ms << " ms, fps " << report.fps << ", parameters " << report.parameters
            << "\nframe budget " << ldr::kFrameBudgetMs << " ms: "
            << (report.under_frame_budget ? "PASS" : "MISS") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ablate / plot
// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string axis = "line_loss";
  std::string workdir;
  std::string out;
  std::vector<double> values = {0.25, 0.5, 1.0};
  std::vector<uint64_t> seeds = {1, 2, 3};
  int epochs = 40;
  int train_count = 600;
  int test_count = 150;
  double alpha = 0.5;
  int size = 32;
  int n_points = 12;
};

int run_ablate(const AblateArgs& args, const std::string& cmdline) {
  ldr::AblationConfig cfg;
  cfg.axis = ldr::axis_from_name(args.axis);
  cfg.alpha_values = args.values;
  cfg.seeds = args.seeds;
  cfg.workdir = args.workdir;
  cfg.train_count = args.train_count;
  cfg.test_count = args.test_count;
  cfg.base.model.alpha = args.alpha;
  cfg.base.model.input_hw = args.size;
  cfg.base.model.n_points = args.n_points;
  cfg.base.model.fused_width = 64;
  cfg.base.model.tail_channels = 128;
  cfg.base.epochs = args.epochs;
  cfg.base.batch_size = 32;
  cfg.base.lr_milestones.clear();
  if (args.epochs >= 4)
    cfg.base.lr_milestones = {{args.epochs / 2, 1e-4}, {(3 * args.epochs) / 4, 5e-5}};
  cfg.scene.image_hw = args.size;
  auto cells = ldr::run_ablation(cfg);
  json j = {{"cells", ldr::ablation_to_json(cells)}, {"command_line", cmdline},
            {"axis", args.axis}};
  if (!args.out.empty()) write_json_file(args.out, j);
  for (const auto& c : cells)
    std::cout << c.axis << "=" << c.value << " seed " << c.seed << ": JI " << c.test_ji << "\n";
  if (cfg.axis != ldr::AblationAxis::kAlpha)
    std::cout << "median on " << ldr::median_ji(cells, "on") << " vs off "
              << ldr::median_ji(cells, "off") << "\n";
  return 0;
}

int run_plot(const std::vector<std::string>& bench_files, const std::vector<std::string>& eval_files,
             const std::vector<std::string>& ablation_files, const std::string& out_prefix) {
  int emitted = 0;
  if (!bench_files.empty() && bench_files.size() == eval_files.size()) {
    ldr::SvgSeries pts;
    pts.name = "models";
    pts.color = "#d62728";
    for (size_t i = 0; i < bench_files.size(); ++i) {
      json b = read_json_file(bench_files[i]);
      json e = read_json_file(eval_files[i]);
      pts.points.push_back({b.at("mean_ms").get<double>(), e.at("overall_ji").get<double>()});
    }
    std::string svg = ldr::render_svg_chart("accuracy vs latency", "inference time (ms, log)",
                                            "overall JI", {pts}, true, ldr::kFrameBudgetMs);
    std::ofstream f(out_prefix + "_latency.svg", std::ios::trunc);
    f << svg;
    std::cout << "wrote " << out_prefix << "_latency.svg\n";
    ++emitted;
  }
  for (size_t fi = 0; fi < ablation_files.size(); ++fi) {
    json a = read_json_file(ablation_files[fi]);
    std::map<std::string, std::map<std::string, std::vector<double>>> by_value;
    for (const auto& cell : a.at("cells"))
      by_value[cell.at("axis").get<std::string>()][cell.at("value").get<std::string>()].push_back(
          cell.at("test_ji").get<double>());
    for (const auto& [axis, values] : by_value) {
      ldr::SvgSeries line;
      line.name = axis;
      line.connect = axis == "alpha";
      double x = 0;
      for (const auto& [value, jis] : values) {
        double mean = 0;
        for (double v : jis) mean += v;
        mean /= double(jis.size());
        double xv = axis == "alpha" ? std::stod(value) : (value == "on" ? 1.0 : 0.0);
        line.points.push_back({xv, mean});
        x += 1;
      }
      std::sort(line.points.begin(), line.points.end());
      std::string svg = ldr::render_svg_chart(ldr::cat("ablation: ", axis), axis, "mean test JI",
                                              {line}, false);
      std::string path = ldr::cat(out_prefix, "_ablation_", axis, fi == 0 ? "" : ldr::cat("_", fi),
                                  ".svg");
      std::ofstream f(path, std::ios::trunc);
      f << svg;
      std::cout << "wrote " << path << "\n";
      ++emitted;
    }
  }
  if (emitted == 0)
    throw std::invalid_argument("plot: nothing to draw (need --bench with matching --eval, or --ablation)");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LDRNet-style document localization: synthetic data, training, evaluation"};
  app.require_subcommand(1);
  std::string cmdline = joined_command_line(argc, argv);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset directory");
  gen_cmd->add_option("--out", gen.out, "output dataset directory")->required();
  gen_cmd->add_option("--count", gen.count, "number of samples")->required();
  gen_cmd->add_option("--seed", gen.seed, "rng seed");
  gen_cmd->add_option("--size", gen.size, "square image side in pixels");
  gen_cmd->add_option("--classes", gen.classes, "class count (>= 2; class 0 = no document)");
  gen_cmd->add_option("--occlusion", gen.occlusion, "per-sample corner occlusion probability");
  gen_cmd->add_option("--occlusion-fraction", gen.occlusion_fraction,
                      "fix the occluder size (fraction of document diagonal)");
  gen_cmd->add_option("--negatives", gen.negatives, "probability of a no-document frame");
  gen_cmd->add_option("--out-of-frame", gen.out_of_frame,
                      "probability of pushing a corner outside the frame");
  gen_cmd->add_option("--jitter", gen.jitter, "perspective corner jitter (frame units)");
  gen_cmd->add_option("--rotation", gen.rotation, "max document rotation (radians)");
  gen_cmd->add_flag("--force", gen.force, "overwrite a non-empty directory");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset directory");
  train_cmd->add_option("--data", tr.data, "training dataset directory")->required();
  train_cmd->add_option("--out", tr.out, "checkpoint output path");
  train_cmd->add_option("--metrics", tr.metrics, "metrics CSV path (default <out>.metrics.csv)");
  train_cmd->add_option("--val", tr.val, "validation dataset for periodic JI");
  train_cmd->add_option("--resume", tr.resume, "checkpoint to resume from");
  train_cmd->add_option("--profile", tr.profile, "desk|paper base configuration");
  train_cmd->add_option("--epochs", tr.epochs, "override epoch count");
  train_cmd->add_option("--batch", tr.batch, "override batch size");
  train_cmd->add_option("--lr", tr.lr, "override initial learning rate");
  train_cmd->add_option("--seed", tr.seed, "rng seed");
  train_cmd->add_option("--alpha", tr.alpha, "override width multiplier");
  train_cmd->add_option("--n-points", tr.n_points, "override regression point count N");
  train_cmd->add_option("--eval-every", tr.eval_every, "validation JI every k epochs");
  train_cmd->add_flag("--no-fusion", tr.no_fusion, "disable the feature fusion module");
  train_cmd->add_flag("--no-line-loss", tr.no_line_loss, "set the Line Loss weights to zero");
  train_cmd->add_flag("--squared-reg", tr.squared_reg, "squared regression deviations");

  std::string eval_ckpt, eval_data, eval_out, eval_csv;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--out", eval_out, "JSON report path");
  eval_cmd->add_option("--csv", eval_csv, "per-sample CSV path");

  std::string infer_ckpt, infer_image;
  bool infer_json = false;
  auto* infer_cmd = app.add_subcommand("infer", "localize the document in one PPM image");
  infer_cmd->add_option("--ckpt", infer_ckpt, "checkpoint path")->required();
  infer_cmd->add_option("--image", infer_image, "binary PPM input")->required();
  infer_cmd->add_flag("--json", infer_json, "machine-readable output");

  std::string bench_ckpt, bench_out;
  int bench_frames = 100, bench_warmup = 10;
  bool bench_no_prune = false;
  auto* bench_cmd = app.add_subcommand("bench", "measure single-frame inference latency");
  bench_cmd->add_option("--ckpt", bench_ckpt, "checkpoint path")->required();
  bench_cmd->add_option("--frames", bench_frames, "timed frames (>= 30)");
  bench_cmd->add_option("--warmup", bench_warmup, "discarded warmup frames (>= 5)");
  bench_cmd->add_option("--out", bench_out, "JSON report path");
  bench_cmd->add_flag("--no-prune", bench_no_prune, "benchmark the unpruned checkpoint");

  AblateArgs ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "train matched variants along one axis");
  ablate_cmd->add_option("--axis", ab.axis, "fusion|line_loss|alpha");
  ablate_cmd->add_option("--workdir", ab.workdir, "scratch directory for datasets/checkpoints")
      ->required();
  ablate_cmd->add_option("--out", ab.out, "JSON table path");
  ablate_cmd->add_option("--values", ab.values, "alpha values (alpha axis only)");
  ablate_cmd->add_option("--seeds", ab.seeds, "seeds (one training per value per seed)");
  ablate_cmd->add_option("--epochs", ab.epochs, "epochs per training");
  ablate_cmd->add_option("--train-count", ab.train_count, "training samples per seed");
  ablate_cmd->add_option("--test-count", ab.test_count, "test samples per seed");
  ablate_cmd->add_option("--alpha", ab.alpha, "base width multiplier for non-alpha axes");
  ablate_cmd->add_option("--size", ab.size, "input/image side (multiple of 32)");
  ablate_cmd->add_option("--n-points", ab.n_points, "regression point count N");

  std::vector<std::string> plot_bench, plot_eval, plot_ablation;
  std::string plot_prefix = "figures";
  auto* plot_cmd = app.add_subcommand("plot", "emit SVG figures from JSON reports");
  plot_cmd->add_option("--bench", plot_bench, "bench JSON files (paired with --eval by order)");
  plot_cmd->add_option("--eval", plot_eval, "eval JSON files");
  plot_cmd->add_option("--ablation", plot_ablation, "ablation JSON files");
  plot_cmd->add_option("--out-prefix", plot_prefix, "output file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen, cmdline);
    if (train_cmd->parsed()) return run_train(tr, cmdline);
    if (eval_cmd->parsed()) return run_eval(eval_ckpt, eval_data, eval_out, eval_csv, cmdline);
    if (infer_cmd->parsed()) return run_infer(infer_ckpt, infer_image, infer_json);
    if (bench_cmd->parsed())
      return run_bench(bench_ckpt, bench_frames, bench_warmup, !bench_no_prune, bench_out, cmdline);
    if (ablate_cmd->parsed()) return run_ablate(ab, cmdline);
    if (plot_cmd->parsed()) return run_plot(plot_bench, plot_eval, plot_ablation, plot_prefix);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ldr::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ldr::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
