#pragma once

// RMSprop training loop with piecewise-constant learning-rate decay,
// deterministic per-epoch shuffling and resumable checkpoints. Training is
// single-threaded and bit-reproducible for a fixed seed: batch order is a
// pure function of (seed, epoch), the squared-gradient accumulator is saved
// with the weights, and the graph is rebuilt identically every step.

#include <chrono>
#include <fstream>
#include <string>
#include <vector>

#include "ldr/data.hpp"
#include "ldr/eval.hpp"
#include "ldr/loss.hpp"
#include "ldr/model.hpp"
#include "ldr/rng.hpp"

namespace ldr {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double lr = 1e-3;
  // (epoch, lr): from that epoch on, use this rate.
  std::vector<std::pair<int, double>> lr_milestones = {{100, 1e-4}, {150, 5e-5}, {175, 1e-5}};
  double rho = 0.9;
  double momentum = 0.0;
  double epsilon = 1e-7;
  LossWeights weights;
  bool squared_reg = false;
  uint64_t seed = 1;
  std::string dataset_dir;
  std::string val_dir;       // optional validation dataset
  std::string out_path;      // optional checkpoint destination
  std::string metrics_path;  // optional CSV destination
  std::string resume_from;   // optional checkpoint to continue from
  ModelConfig model;
  int eval_every = 0;  // validation JI every k epochs (0 = only at the end)
  std::string command_line;

  void validate() const {
    model.validate();
    require(epochs >= 1, cat("train config: epochs must be >= 1, got ", epochs));
    require(batch_size >= 1, cat("train config: batch_size must be >= 1, got ", batch_size));
    require(lr > 0, "train config: lr must be > 0");
    require(rho >= 0 && rho < 1, cat("train config: rho out of range: ", rho));
    require(momentum == 0.0, "train config: only momentum = 0 is supported");
    require(epsilon > 0, "train config: epsilon must be > 0");
    require(weights.delta >= 0 && weights.beta >= 0 && weights.gamma >= 0,
            "train config: loss weights must be >= 0");
    int prev = -1;
    for (const auto& [ep, l] : lr_milestones) {
      require(ep > prev, "train config: lr milestones must be strictly increasing in epoch");
      require(l > 0, "train config: milestone lr must be > 0");
      prev = ep;
    }
  }
};

inline double lr_schedule(const TrainConfig& cfg, int epoch) {
  require(epoch >= 0, "lr_schedule: epoch must be >= 0");
  double lr = cfg.lr;
  for (const auto& [ep, l] : cfg.lr_milestones)
    if (epoch >= ep) lr = l;
  return lr;
}

// v <- rho*v + (1-rho)*g^2 ; p <- p - lr*g/(sqrt(v) + eps), elementwise.
inline void rmsprop_step(Tensor& param, const Tensor& grad, Tensor& v, float lr, float rho,
                         float eps) {
  require(param.same_shape(grad) && param.same_shape(v),
          cat("rmsprop_step: shape mismatch, param ", shape_str(param), ", grad ", shape_str(grad),
              ", state ", shape_str(v)));
  for (int64_t i = 0; i < param.size(); ++i) {
    float g = grad[i];
    v[i] = rho * v[i] + (1.0f - rho) * g * g;
    param[i] -= lr * g / (std::sqrt(v[i]) + eps);
  }
}

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  LossBreakdown mean;
  double val_ji = -1;  // < 0 when not evaluated this epoch
  double seconds = 0;
};

struct TrainResult {
  Checkpoint ckpt;
  std::vector<EpochStats> log;
};

inline void write_metrics_csv(const std::string& path, const std::vector<EpochStats>& log,
                              const std::string& command_line = "") {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError(cat("cannot open metrics file ", path));
  if (!command_line.empty()) f << "# cmd: " << command_line << "\n";
  f << "epoch,lr,loss_total,loss_reg,loss_cls,loss_sim,loss_dis,val_ji\n";
  f.precision(10);
  for (const auto& row : log) {
    f << row.epoch << "," << row.lr << "," << row.mean.total << "," << row.mean.reg << ","
      << row.mean.cls << "," << row.mean.sim << "," << row.mean.dis << ",";
    if (row.val_ji >= 0) f << row.val_ji;
    f << "\n";
  }
}

namespace detail {

inline std::vector<int> epoch_order(uint64_t seed, int epoch, int n) {
  std::vector<int> order(size_t(n), 0);
  for (int i = 0; i < n; ++i) order[size_t(i)] = i;
  Rng rng(seed, stream::kShuffle ^ uint64_t(epoch));
  for (int i = n - 1; i > 0; --i)
    std::swap(order[size_t(i)], order[size_t(rng.uniform_int(0, i))]);
  return order;
}

inline Checkpoint with_train_state(const Checkpoint& ckpt, const std::map<std::string, Tensor>& v,
                                   int next_epoch) {
  Checkpoint out = ckpt;
  for (const auto& [name, t] : v) out.tensors["opt.v." + name] = t;
  out.has_train_state = true;
  out.next_epoch = next_epoch;
  return out;
}

}  // namespace detail

inline TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  std::vector<SceneSample> samples = read_dataset(cfg.dataset_dir);
  require(!samples.empty(), cat("train: dataset ", cfg.dataset_dir, " is empty"));
  for (const auto& s : samples)
    require(s.hw == cfg.model.input_hw, cat("train: sample size ", s.hw, " does not match model input ",
                                            cfg.model.input_hw));

  std::vector<SampleLabel> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(make_training_label(s.label, cfg.model.n_points));

  std::vector<SceneSample> val_samples;
  if (!cfg.val_dir.empty()) val_samples = read_dataset(cfg.val_dir);

  Checkpoint ckpt;
  std::map<std::string, Tensor> v;
  int start_epoch = 0;
  if (!cfg.resume_from.empty()) {
    ckpt = load_checkpoint(cfg.resume_from);
    require(!is_pruned(ckpt), "train: cannot resume from a pruned checkpoint");
    require(ckpt.config.to_json() == cfg.model.to_json(),
            "train: resume checkpoint's model config differs from the requested config");
    start_epoch = ckpt.has_train_state ? ckpt.next_epoch : 0;
    for (const auto& spec : param_specs(cfg.model)) {
      auto it = ckpt.tensors.find("opt.v." + spec.name);
      v[spec.name] = it != ckpt.tensors.end() ? it->second : Tensor::zeros(spec.shape);
    }
    for (auto it = ckpt.tensors.begin(); it != ckpt.tensors.end();)
      it = it->first.rfind("opt.", 0) == 0 ? ckpt.tensors.erase(it) : std::next(it);
  } else {
    ckpt = build_model(cfg.model, cfg.seed);
    for (const auto& spec : param_specs(cfg.model)) v[spec.name] = Tensor::zeros(spec.shape);
  }

  const int n = int(samples.size());
  const int S = cfg.model.input_hw;
  TrainResult result;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    const float lr = float(lr_schedule(cfg, epoch));
    std::vector<int> order = detail::epoch_order(cfg.seed, epoch, n);

    LossBreakdown sums;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, n - start);
      Tensor images = Tensor::zeros({b, S, S, 3});
      std::vector<SampleLabel> batch_labels(size_t(b), SampleLabel{});
      for (int i = 0; i < b; ++i) {
        const SceneSample& s = samples[size_t(order[size_t(start + i)])];
        for (size_t j = 0; j < s.rgb.size(); ++j)
          images.data[size_t(i) * s.rgb.size() + j] = float(s.rgb[j]) / 255.0f;
        batch_labels[size_t(i)] = labels[size_t(order[size_t(start + i)])];
      }

      Graph<float> g;
      auto w = weights_to_graph(g, ckpt);
      auto img = g.leaf(std::move(images));
      auto head = build_forward(g, cfg.model, w, img, false);
      auto loss = build_total_loss(g, head, batch_labels, cfg.weights, cfg.model.n_points,
                                   cfg.squared_reg);

      LossBreakdown bd;
      bd.total = double(g.value(loss.total)[0]);
      bd.reg = double(g.value(loss.reg)[0]);
      bd.cls = double(g.value(loss.cls)[0]);
      bd.sim = double(g.value(loss.sim)[0]);
      bd.dis = double(g.value(loss.dis)[0]);
      if (!std::isfinite(bd.total))
        throw NumericError(cat("train: non-finite loss at epoch ", epoch, ", batch ",
                               start / cfg.batch_size));
      sums.total += bd.total * b;
      sums.reg += bd.reg * b;
      sums.cls += bd.cls * b;
      sums.sim += bd.sim * b;
      sums.dis += bd.dis * b;

      g.backward(loss.total);
      for (const auto& spec : param_specs(cfg.model))
        rmsprop_step(ckpt.tensors[spec.name], g.grad(w.at(spec.name)), v[spec.name], lr,
                     float(cfg.rho), float(cfg.epsilon));
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.mean.total = sums.total / n;
    stats.mean.reg = sums.reg / n;
    stats.mean.cls = sums.cls / n;
    stats.mean.sim = sums.sim / n;
    stats.mean.dis = sums.dis / n;

    bool last = epoch + 1 == cfg.epochs;
    if (!val_samples.empty() && (last || (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0)))
      stats.val_ji = evaluate(ckpt, val_samples).overall_ji;
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(stats);
    if (!cfg.metrics_path.empty()) write_metrics_csv(cfg.metrics_path, result.log, cfg.command_line);

    if (!cfg.out_path.empty())
      for (const auto& [ep, l] : cfg.lr_milestones)
        if (ep == epoch + 1 && !last)
          save_checkpoint(detail::with_train_state(ckpt, v, epoch + 1),
                          cat(cfg.out_path, ".epoch", epoch + 1));
  }

  result.ckpt = detail::with_train_state(ckpt, v, cfg.epochs);
  if (!cfg.out_path.empty()) save_checkpoint(result.ckpt, cfg.out_path);
  return result;
}

// -----------------------------------------------------------------------------
// Named profiles
// -----------------------------------------------------------------------------

// Small-input configuration trainable from random init on a desktop CPU.
inline TrainConfig desk_profile() {
  TrainConfig cfg;
  cfg.model.alpha = 1.0;
  cfg.model.n_points = 28;
  cfg.model.n_cls = 2;
  cfg.model.input_hw = 64;
  cfg.model.fusion_enabled = true;
  cfg.model.stage_extra_block = true;
  cfg.model.fused_width = 128;
  cfg.model.tail_channels = 128;
  cfg.epochs = 200;
  cfg.batch_size = 32;
  cfg.lr = 1e-3;
  cfg.lr_milestones = {{140, 1e-4}, {180, 5e-5}, {195, 1e-5}};
  return cfg;
}

// The published recipe: alpha 0.35, N = 100, 224x224 inputs, batch 128,
// 1000 epochs with decay at 250/700/850.
inline TrainConfig paper_profile() {
  TrainConfig cfg;
  cfg.model.alpha = 0.35;
  cfg.model.n_points = 100;
  cfg.model.n_cls = 2;
  cfg.model.input_hw = 224;
  cfg.model.fusion_enabled = true;
  cfg.model.fused_width = 128;
  cfg.model.tail_channels = 1280;
  cfg.epochs = 1000;
  cfg.batch_size = 128;
  cfg.lr = 1e-3;
  cfg.lr_milestones = {{250, 1e-4}, {700, 5e-5}, {850, 1e-5}};
  return cfg;
}

}  // namespace ldr
