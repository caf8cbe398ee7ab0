#pragma once

// Ablation runner: trains matched variants (same seeds, same datasets) along
// one axis — feature fusion on/off, Line Loss on/off, or the width
// multiplier — and evaluates each on a held-out synthetic test set.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldr/eval.hpp"
#include "ldr/train.hpp"

namespace ldr {

enum class AblationAxis { kFusion, kLineLoss, kAlpha };

inline std::string axis_name(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kFusion: return "fusion";
    case AblationAxis::kLineLoss: return "line_loss";
    case AblationAxis::kAlpha: return "alpha";
  }
  return "?";
}

inline AblationAxis axis_from_name(const std::string& name) {
  if (name == "fusion") return AblationAxis::kFusion;
  if (name == "line_loss") return AblationAxis::kLineLoss;
  if (name == "alpha") return AblationAxis::kAlpha;
  throw std::invalid_argument(cat("unknown ablation axis: ", name));
}

struct AblationCell {
  std::string axis;
  std::string value;
  uint64_t seed = 0;
  double test_ji = 0;
  double train_seconds = 0;
};

struct AblationConfig {
  AblationAxis axis = AblationAxis::kLineLoss;
  std::vector<double> alpha_values = {0.25, 0.5, 1.0};  // used for the alpha axis
  std::vector<uint64_t> seeds = {1, 2, 3};
  TrainConfig base;       // dataset paths are filled in per seed
  SceneConfig scene;      // generation template; seed overridden per run
  int train_count = 600;
  int test_count = 150;
  std::string workdir;
};

namespace detail {

inline std::string format_alpha(double a) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", a);
  return buf;
}

inline void generate_dataset_dir(SceneConfig scene, uint64_t seed, int count,
                                 const std::string& dir) {
  scene.seed = seed;
  std::vector<SceneSample> samples(size_t(count), SceneSample{});
  parallel_for(count, [&](int i) { samples[size_t(i)] = generate_scene(scene, i); });
  write_dataset(samples, dir, &scene);
}

}  // namespace detail

// One row per (value, seed). Values per axis: fusion/line_loss -> {on, off},
// alpha -> cfg.alpha_values. Datasets are generated once per seed and shared
// across the values of the axis.
inline std::vector<AblationCell> run_ablation(const AblationConfig& cfg) {
  namespace fs = std::filesystem;
  require(!cfg.seeds.empty(), "run_ablation: need at least one seed");
  require(!cfg.workdir.empty(), "run_ablation: need a workdir");

  std::vector<std::string> values;
  if (cfg.axis == AblationAxis::kAlpha)
    for (double a : cfg.alpha_values) values.push_back(detail::format_alpha(a));
  if (cfg.axis != AblationAxis::kAlpha) values = {"on", "off"};

  std::vector<AblationCell> cells;
  for (uint64_t seed : cfg.seeds) {
    std::string seed_dir = (fs::path(cfg.workdir) / cat("seed", seed)).string();
    std::string train_dir = seed_dir + "/train";
    std::string test_dir = seed_dir + "/test";
    if (!fs::exists(train_dir + "/index.json")) {
      SceneConfig scene = cfg.scene;
      scene.image_hw = cfg.base.model.input_hw;
      detail::generate_dataset_dir(scene, seed * 7919 + 11, cfg.train_count, train_dir);
      SceneConfig test_scene = scene;
      test_scene.negative_prob = 0.0;
      detail::generate_dataset_dir(test_scene, seed * 7919 + 12, cfg.test_count, test_dir);
    }
    std::vector<SceneSample> test_samples = read_dataset(test_dir);

    for (const std::string& value : values) {
      TrainConfig run = cfg.base;
      run.seed = seed;
      run.dataset_dir = train_dir;
      run.out_path.clear();
      run.metrics_path.clear();
      switch (cfg.axis) {
        case AblationAxis::kFusion:
          run.model.fusion_enabled = value == "on";
          break;
        case AblationAxis::kLineLoss:
          if (value == "off") {
            run.weights.beta = 0.0;
            run.weights.gamma = 0.0;
          }
          break;
        case AblationAxis::kAlpha:
          run.model.alpha = std::stod(value);
          break;
      }
      auto t0 = std::chrono::steady_clock::now();
      TrainResult result = train(run);
      AblationCell cell;
      cell.axis = axis_name(cfg.axis);
      cell.value = value;
      cell.seed = seed;
      cell.test_ji = evaluate(result.ckpt, test_samples).overall_ji;
      cell.train_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      cells.push_back(cell);
    }
  }
  return cells;
}

inline double median(std::vector<double> v) {
  require(!v.empty(), "median of empty set");
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double median_ji(const std::vector<AblationCell>& cells, const std::string& value) {
  std::vector<double> v;
  for (const auto& c : cells)
    if (c.value == value) v.push_back(c.test_ji);
  return median(v);
}

inline nlohmann::json ablation_to_json(const std::vector<AblationCell>& cells) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : cells)
    rows.push_back({{"axis", c.axis},
                    {"value", c.value},
                    {"seed", c.seed},
                    {"test_ji", c.test_ji},
                    {"train_seconds", c.train_seconds}});
  return rows;
}

}  // namespace ldr
