#pragma once

// Accuracy and latency protocols: per-background Jaccard index with
// perspective removal, single-threaded inference latency against the 30 FPS
// frame budget, and the occlusion robustness sweep.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ldr/data.hpp"
#include "ldr/geometry.hpp"
#include "ldr/model.hpp"

namespace ldr {

// LDR_THREADS caps worker parallelism; default 1 keeps everything serial.
inline int worker_threads() {
  const char* env = std::getenv("LDR_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

// Runs fn(i) for i in [0, n); results must go to disjoint slots by index,
// which keeps the outcome identical for any thread count.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  int nt = std::min(worker_threads(), n);
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(size_t(nt));
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

// -----------------------------------------------------------------------------
// Accuracy
// -----------------------------------------------------------------------------

struct FrameScore {
  int index = 0;
  int background = 0;
  double ji = 0.0;
  bool failed = false;
};

struct EvalReport {
  std::map<int, double> background_mean_ji;
  std::map<int, int> background_frames;
  double overall_ji = 0.0;
  int frames = 0;    // positive frames scored
  int failures = 0;  // frames recorded as JI 0 after a degenerate prediction
  double cls_accuracy = 0.0;  // over all frames, including negatives
  std::vector<FrameScore> per_sample;

  nlohmann::json to_json() const {
    nlohmann::json per_bg = nlohmann::json::object();
    for (const auto& [bg, ji] : background_mean_ji)
      per_bg[std::to_string(bg)] = {{"mean_ji", ji}, {"frames", background_frames.at(bg)}};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : per_sample)
      rows.push_back({{"index", s.index}, {"background", s.background}, {"ji", s.ji},
                      {"failed", s.failed}});
    return {{"overall_ji", overall_ji}, {"frames", frames},     {"failures", failures},
            {"cls_accuracy", cls_accuracy}, {"backgrounds", per_bg}, {"per_sample", rows}};
  }
};

// JI of every positive frame against its perspective-removed ground truth,
// aggregated per background family. Degenerate predictions score 0 and count
// as failures. Negative frames contribute to classification accuracy only.
// `predictor` maps a sample to (quad in pixels, class).
template <typename Predictor>
EvalReport evaluate_with(Predictor&& predictor, const std::vector<SceneSample>& samples) {
  struct Row {
    int cls_pred = 0;
    double ji = 0;
    bool positive = false;
    bool failed = false;
  };
  std::vector<Row> rows(samples.size());
  parallel_for(int(samples.size()), [&](int i) {
    const SceneSample& s = samples[size_t(i)];
    auto [quad, cls] = predictor(s);
    Row r;
    r.cls_pred = cls;
    if (s.label.cls > 0) {
      r.positive = true;
      try {
        r.ji = jaccard_index(quad, s.label.corners_px, canonical_quad(s.meta));
      } catch (const NumericError&) {
        r.ji = 0.0;
        r.failed = true;
      }
    }
    rows[size_t(i)] = r;
  });

  EvalReport report;
  std::map<int, double> bg_sum;
  int cls_correct = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const Row& r = rows[i];
    if (r.cls_pred == samples[i].label.cls) ++cls_correct;
    if (!r.positive) continue;
    int bg = samples[i].meta.background_id;
    bg_sum[bg] += r.ji;
    report.background_frames[bg] += 1;
    report.frames += 1;
    if (r.failed) report.failures += 1;
    report.per_sample.push_back({int(i), bg, r.ji, r.failed});
  }
  double total = 0.0;
  for (const auto& [bg, sum] : bg_sum) {
    report.background_mean_ji[bg] = sum / report.background_frames[bg];
    total += sum;
  }
  report.overall_ji = report.frames > 0 ? total / report.frames : 0.0;
  report.cls_accuracy = samples.empty() ? 0.0 : double(cls_correct) / double(samples.size());
  return report;
}

inline EvalReport evaluate(const Checkpoint& ckpt, const std::vector<SceneSample>& samples) {
  return evaluate_with(
      [&](const SceneSample& s) { return predict_quad(ckpt, s.image(), s.hw, s.hw); }, samples);
}

inline void write_eval_csv(const EvalReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError(cat("cannot open ", path, " for writing"));
  f << "index,background,ji,failed\n";
  f.precision(10);
  for (const auto& s : report.per_sample)
    f << s.index << "," << s.background << "," << s.ji << "," << (s.failed ? 1 : 0) << "\n";
}

// -----------------------------------------------------------------------------
// Latency
// -----------------------------------------------------------------------------

constexpr double kFrameBudgetMs = 1000.0 / 30.0;

struct LatencyReport {
  std::vector<double> samples_ms;
  double mean_ms = 0, p50_ms = 0, p95_ms = 0, fps = 0;
  int64_t parameters = 0;
  bool under_frame_budget = false;
  int warmup = 0;
  std::string host;

  nlohmann::json to_json() const {
    return {{"samples_ms", samples_ms},
            {"mean_ms", mean_ms},
            {"p50_ms", p50_ms},
            {"p95_ms", p95_ms},
            {"fps", fps},
            {"parameters", parameters},
            {"frame_budget_ms", kFrameBudgetMs},
            {"under_frame_budget", under_frame_budget},
            {"warmup", warmup},
            {"host", host}};
  }
};

inline std::string host_descriptor() {
  std::ifstream f("/proc/cpuinfo");
  std::string line;
  while (std::getline(f, line)) {
    auto pos = line.find("model name");
    if (pos != std::string::npos) {
      auto colon = line.find(':');
      if (colon != std::string::npos && colon + 2 <= line.size()) return line.substr(colon + 2);
    }
  }
  return "unknown-host";
}

// Times predict_quad over pre-generated in-memory frames, single-threaded.
inline LatencyReport benchmark_inference(const Checkpoint& ckpt, int n_frames, int warmup) {
  require(n_frames >= 30, cat("benchmark_inference: need n_frames >= 30, got ", n_frames));
  require(warmup >= 5, cat("benchmark_inference: need warmup >= 5, got ", warmup));

  SceneConfig scene;
  scene.image_hw = ckpt.config.input_hw;
  scene.seed = 0x42454e43;
  std::vector<Tensor> frames;
  frames.reserve(size_t(n_frames + warmup));
  for (int i = 0; i < n_frames + warmup; ++i) frames.push_back(generate_scene(scene, i).image());

  const int hw = ckpt.config.input_hw;
  for (int i = 0; i < warmup; ++i) predict_quad(ckpt, frames[size_t(i)], hw, hw);

  LatencyReport report;
  report.warmup = warmup;
  report.samples_ms.reserve(size_t(n_frames));
  for (int i = 0; i < n_frames; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    predict_quad(ckpt, frames[size_t(warmup + i)], hw, hw);
    auto t1 = std::chrono::steady_clock::now();
    report.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  double sum = 0;
  for (double v : report.samples_ms) sum += v;
  report.mean_ms = sum / n_frames;
  std::vector<double> sorted = report.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  report.p50_ms = sorted[size_t(0.50 * (n_frames - 1))];
  report.p95_ms = sorted[size_t(0.95 * (n_frames - 1))];
  report.fps = 1000.0 / report.mean_ms;
  report.parameters = param_count(ckpt);
  report.under_frame_budget = report.mean_ms < kFrameBudgetMs;
  report.host = host_descriptor();
  return report;
}

// -----------------------------------------------------------------------------
// Occlusion robustness
// -----------------------------------------------------------------------------

struct OcclusionPoint {
  double fraction = 0;
  double mean_ji = 0;
  double mean_corner_distance_px = 0;
  int frames = 0;
};

// JI and mean summed corner distance per occlusion fraction. Each sweep entry
// pairs a fraction with frames generated at that fraction.
inline std::vector<OcclusionPoint> occlusion_suite(
    const Checkpoint& ckpt, const std::vector<std::pair<double, std::vector<SceneSample>>>& sweep) {
  std::vector<OcclusionPoint> curve;
  for (const auto& [fraction, samples] : sweep) {
    OcclusionPoint pt;
    pt.fraction = fraction;
    EvalReport report = evaluate(ckpt, samples);
    pt.mean_ji = report.overall_ji;
    pt.frames = report.frames;
    double dist_sum = 0;
    int dist_n = 0;
    for (const auto& s : samples) {
      if (s.label.cls == 0) continue;
      auto [quad, cls] = predict_quad(ckpt, s.image(), s.hw, s.hw);
      dist_sum += corner_distance(quad, s.label.corners_px);
      ++dist_n;
    }
    pt.mean_corner_distance_px = dist_n > 0 ? dist_sum / dist_n : 0.0;
    curve.push_back(pt);
  }
  return curve;
}

inline nlohmann::json occlusion_to_json(const std::vector<OcclusionPoint>& curve) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& pt : curve)
    arr.push_back({{"fraction", pt.fraction},
                   {"mean_ji", pt.mean_ji},
                   {"mean_corner_distance_px", pt.mean_corner_distance_px},
                   {"frames", pt.frames}});
  return arr;
}

}  // namespace ldr
