// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// selected criterion fails.
//
//   ldr_acceptance [--only 1,2,5] [--workdir DIR] [--reuse]
//
// --reuse keeps previously trained artifacts in the workdir (intended for
// local iteration; CI runs everything fresh).

#include <chrono>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "ldr/ablate.hpp"
#include "ldr/eval.hpp"
#include "ldr/train.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace ldr;

namespace {

// Regression values frozen after the first verified run of the desk-scale
// pipeline on this codebase (measured: test JI 0.8679, JI at 20% occlusion
// 0.8491, out-of-frame decode fraction 0.8644). Floors sit just below the
// measured values to absorb cross-toolchain float drift while still
// catching real regressions.
constexpr double kDeskJiFloor = 0.85;             // criterion 5
constexpr double kOcclusionJiFloor = 0.84;        // criterion 10, JI at 20% occlusion
constexpr double kOutsideDecodeFloor = 0.80;      // criterion 10, decoded-outside fraction

struct Ctx {
  std::string workdir;
  bool reuse = false;
  Checkpoint desk_model;          // produced by criterion 5
  std::string desk_test_dir;      // test dataset of criterion 5
  bool desk_trained = false;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelConfig tiny_full_model(bool extra_blocks) {
  // Complete architecture (backbone, fusion, all three branches) at a scale
  // where exhaustive finite differences finish quickly.
  ModelConfig cfg;
  cfg.alpha = 1.0;
  cfg.n_points = 12;
  cfg.n_cls = 2;
  cfg.input_hw = 32;
  cfg.stage_extra_block = extra_blocks;
  cfg.stage_channels = {8, 8, 8, 8, 8};
  cfg.fused_width = 8;
  cfg.tail_channels = 16;
  return cfg;
}

std::vector<SceneSample> gen_samples(SceneConfig cfg, int count) {
  std::vector<SceneSample> out(size_t(count), SceneSample{});
  parallel_for(count, [&](int i) { out[size_t(i)] = generate_scene(cfg, i); });
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient correctness
// ---------------------------------------------------------------------------

bool criterion_gradients(Ctx&, std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();

  // Per-op spot checks in double precision.
  double worst_op = 0;
  {
    Rng rng(811);
    Graph<double> g;
    TensorD x = TensorD::zeros({2, 6, 6, 3});
    for (auto& v : x.data) v = rng.uniform(0, 1);
    TensorD k = TensorD::zeros({3, 3, 3, 4});
    for (auto& v : k.data) v = rng.uniform(-0.5, 0.5);
    auto xi = g.leaf(x);
    auto ki = g.leaf(k);
    auto y = g.sigmoid(g.conv2d(xi, ki, 2, Padding::kSame));
    auto flat = g.reshape(y, {1, int(g.value(y).size())});
    auto loss = g.masked_mean(g.sum_cols(flat), std::vector<double>{1.0});
    worst_op = std::max(worst_op, finite_difference_check(g, loss, ki, 1e-4));
    worst_op = std::max(worst_op, finite_difference_check(g, loss, xi, 1e-4));
  }
  {
    Rng rng(813);
    Graph<double> g;
    TensorD x = TensorD::zeros({2, 6, 6, 4});
    for (auto& v : x.data) v = rng.uniform(0, 1);
    TensorD k = TensorD::zeros({3, 3, 4});
    for (auto& v : k.data) v = rng.uniform(-0.5, 0.5);
    auto xi = g.leaf(x);
    auto ki = g.leaf(k);
    auto y = g.global_avg_pool(g.depthwise_conv2d(xi, ki, 2, Padding::kSame));
    auto flat = g.reshape(y, {1, int(g.value(y).size())});
    auto loss = g.masked_mean(g.sum_cols(flat), std::vector<double>{1.0});
    worst_op = std::max(worst_op, finite_difference_check(g, loss, ki, 1e-4));
  }
  if (worst_op >= 1e-6) {
    detail = cat("per-op finite-difference error ", worst_op, " >= 1e-6");
    return false;
  }

  // Whole model under the total loss, every parameter, two architectures:
  // the base wiring gated literally at eps = 1e-4, and the extra-block
  // wiring with straddle confirmation. A relu6 or |.| preactivation within
  // eps of its kink makes the central difference straddle a point where the
  // derivative does not exist; such events are measure-zero in the inputs
  // but do occur, so the base model scans seeds for a kink-free
  // configuration, and the deeper model (about twice the activation sites,
  // where no scanned seed tends to be fully clean) instead re-probes every
  // flagged element at smaller eps — a wrong backward rule disagrees at
  // every step size, a straddle vanishes.
  struct ModelCheck {
    double worst = 1e300;
    std::string worst_name;
    int64_t params = 0;
    int attempts = 0;
  };

  auto check_model = [&](bool extra_blocks, bool confirm_straddles, int max_attempts) {
    ModelCheck out;
    for (int attempt = 0; attempt < max_attempts && out.worst >= 1e-4; ++attempt) {
      ++out.attempts;
      ModelConfig cfg = tiny_full_model(extra_blocks);
      Checkpoint ckpt = build_model(cfg, 17 + uint64_t(attempt));
      SceneConfig scene;
      scene.image_hw = cfg.input_hw;
      scene.seed = 515 + uint64_t(attempt);
      const int b = 2;
      TensorD images = TensorD::zeros({b, cfg.input_hw, cfg.input_hw, 3});
      std::vector<SampleLabel> labels;
      for (int i = 0; i < b; ++i) {
        SceneSample s = generate_scene(scene, i);
        Tensor img = s.image();
        for (int64_t j = 0; j < img.size(); ++j)
          images.data[size_t(int64_t(i) * img.size() + j)] = double(img.data[size_t(j)]);
        labels.push_back(make_training_label(s.label, cfg.n_points));
      }

      Graph<double> g;
      std::map<std::string, Graph<double>::NodeId> w;
      for (const auto& [name, t] : ckpt.tensors) w.emplace(name, g.leaf(t.cast<double>()));
      auto img_node = g.leaf(images);
      auto head = build_forward(g, cfg, w, img_node, false);
      auto loss = build_total_loss(g, head, labels, LossWeights{}, cfg.n_points);

      double worst = 0;
      std::string worst_name;
      out.params = 0;
      for (const auto& [name, node] : w) {
        out.params += g.value(node).size();
        double err = finite_difference_check(g, loss.total, node, 1e-4);
        if (err >= 1e-4 && confirm_straddles) {
          // Kink straddles disappear at a smaller step; real bugs persist.
          double confirm = finite_difference_check(g, loss.total, node, 1e-5);
          if (confirm >= 1e-4) confirm = finite_difference_check(g, loss.total, node, 1e-6);
          err = confirm;
        }
        if (err > worst) {
          worst = err;
          worst_name = name;
        }
      }
      if (worst < out.worst) {
        out.worst = worst;
        out.worst_name = worst_name;
      }
    }
    return out;
  };

  ModelCheck base = check_model(false, false, 12);
  ModelCheck deep = check_model(true, true, 3);
  double secs = seconds_since(t0);
  detail = cat("base wiring: max rel err ", base.worst, " (", base.worst_name, ") over ",
               base.params, " parameters in ", base.attempts, " seed(s); extra-block wiring: ",
               deep.worst, " (", deep.worst_name, ") over ", deep.params, " parameters; per-op ",
               worst_op, "; ", secs, " s");
  return base.worst < 1e-4 && deep.worst < 1e-4 && secs < 120.0;
}

// ---------------------------------------------------------------------------
// Criterion 2: label self-consistency
// ---------------------------------------------------------------------------

bool criterion_label_consistency(Ctx&, std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(821);
  double worst_sim = 0, worst_dis = 0;
  for (int i = 0; i < 1000; ++i) {
    Quad q = ldrtest::random_convex_quad(rng);
    PointRing ring = equal_division_points(q, 28);
    worst_sim = std::max(worst_sim, similarity_loss(ring));
    worst_dis = std::max(worst_dis, distance_loss(ring));
  }
  double secs = seconds_since(t0);
  detail = cat("1000 quads: max similarity ", worst_sim, ", max distance ", worst_dis, "; ", secs,
               " s");
  return worst_sim < 1e-9 && worst_dis < 1e-9 && secs < 10.0;
}

// ---------------------------------------------------------------------------
// Criterion 3: JI oracle equivalence
// ---------------------------------------------------------------------------

bool criterion_ji_oracle(Ctx&, std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(823);
  Rng mc_rng(824);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Quad gt = ldrtest::random_document_quad(rng);
    Quad pred;
    for (int i = 0; i < 4; ++i)
      pred.corners[size_t(i)] =
          gt.corners[size_t(i)] + Point2{rng.uniform(-0.09, 0.09), rng.uniform(-0.09, 0.09)};
    Quad canonical = Quad::rect(rng.uniform(0.6, 1.4), 1.0);
    double ji = jaccard_index(pred, gt, canonical);
    Homography removal = estimate_homography(gt, canonical);
    auto s = ldrtest::quad_to_poly(apply_homography(removal, pred));
    auto g = ldrtest::quad_to_poly(apply_homography(removal, gt));
    double mc = ldrtest::mc_jaccard(s, g, 1000000, mc_rng);
    worst = std::max(worst, std::abs(ji - mc));
  }
  double secs = seconds_since(t0);
  detail = cat("100 pairs vs 1e6-sample Monte Carlo: max |diff| ", worst, "; ", secs, " s");
  return worst < 2e-3 && secs < 120.0;
}

// ---------------------------------------------------------------------------
// Criterion 4: loss arithmetic
// ---------------------------------------------------------------------------

bool criterion_loss_arithmetic(Ctx&, std::string& detail) {
  double ce = classification_loss({0.7, 0.7}, 0);
  bool ln2_ok = std::abs(ce - std::log(2.0)) < 1e-9;

  Rng rng(829);
  PointRing gt = equal_division_points(ldrtest::random_convex_quad(rng), 100);
  PointRing pred = gt;
  pred.points[11].y += 0.1;
  double reg = regression_loss(pred, gt);
  bool reg_ok = std::abs(reg - 0.1 / 96.0) < 1e-9;

  LossWeights w;
  double total = combine_loss(w, 1.0, 1.0, 1.0, 1.0);
  bool total_ok = std::abs(total - 1.3264) < 1e-9;

  detail = cat("uniform CE ", ce, " (ln 2 = ", std::log(2.0), "); Eq.7 case ", reg, " (expect ",
               0.1 / 96.0, "); weighted sum ", total, " (expect 1.3264)");
  return ln2_ok && reg_ok && total_ok;
}

// ---------------------------------------------------------------------------
// Criterion 5: desk-scale training
// ---------------------------------------------------------------------------

bool criterion_desk_training(Ctx& ctx, std::string& detail) {
  fs::path train_dir = fs::path(ctx.workdir) / "desk" / "train";
  fs::path test_dir = fs::path(ctx.workdir) / "desk" / "test";
  fs::path ckpt_path = fs::path(ctx.workdir) / "desk" / "model.ckpt";
  ctx.desk_test_dir = test_dir.string();

  if (!(ctx.reuse && fs::exists(ckpt_path))) {
    SceneConfig scene;
    scene.image_hw = 64;
    scene.seed = 20240501;
    scene.occlusion_prob = 0.20;
    scene.out_of_frame_prob = 0.10;
    scene.negative_prob = 0.05;
    write_dataset(gen_samples(scene, 2000), train_dir.string(), &scene);

    SceneConfig test_scene;
    test_scene.image_hw = 64;
    test_scene.seed = 20240502;
    write_dataset(gen_samples(test_scene, 200), test_dir.string(), &test_scene);

    TrainConfig cfg = desk_profile();
    cfg.dataset_dir = train_dir.string();
    cfg.val_dir = test_dir.string();
    cfg.out_path = ckpt_path.string();
    cfg.metrics_path = (fs::path(ctx.workdir) / "desk" / "metrics.csv").string();
    cfg.eval_every = 50;
    cfg.seed = 1;

    auto t0 = std::chrono::steady_clock::now();
    TrainResult result = train(cfg);
    double secs = seconds_since(t0);
    ctx.desk_model = result.ckpt;
    ctx.desk_trained = true;

    EvalReport report = evaluate(result.ckpt, read_dataset(test_dir.string()));
    double med_err = 0;
    {
      std::vector<double> errs;
      for (const auto& s : read_dataset(test_dir.string())) {
        if (s.label.cls == 0) continue;
        auto [quad, cls] = predict_quad(result.ckpt, s.image(), s.hw, s.hw);
        errs.push_back(corner_distance(quad, s.label.corners_px) / 4.0);
      }
      med_err = median(errs);
    }
    detail = cat("test JI ", report.overall_ji, " (floor ", kDeskJiFloor, "), cls acc ",
                 report.cls_accuracy, ", median corner error ", med_err, " px, wall ", secs,
                 " s (cap 1800)");
    return report.overall_ji >= kDeskJiFloor && secs <= 1800.0;
  }

  ctx.desk_model = load_checkpoint(ckpt_path.string());
  ctx.desk_trained = true;
  EvalReport report = evaluate(ctx.desk_model, read_dataset(test_dir.string()));
  detail = cat("(reused) test JI ", report.overall_ji, " (floor ", kDeskJiFloor, ")");
  return report.overall_ji >= kDeskJiFloor;
}

// ---------------------------------------------------------------------------
// Criteria 6 and 7: ablation directions
// ---------------------------------------------------------------------------

TrainConfig ablation_base(int epochs) {
  TrainConfig cfg;
  cfg.model.alpha = 0.35;
  cfg.model.n_points = 28;
  cfg.model.n_cls = 2;
  cfg.model.input_hw = 32;
  cfg.model.stage_extra_block = true;
  cfg.model.fused_width = 64;
  cfg.model.tail_channels = 64;  // match the fused width so the arms differ
                                 // in wiring, not head capacity
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.lr = 1e-3;
  cfg.lr_milestones = {{epochs / 2, 1e-4}, {(3 * epochs) / 4, 5e-5}};
  return cfg;
}

SceneConfig ablation_scene() {
  SceneConfig scene;
  scene.image_hw = 32;
  scene.occlusion_prob = 0.2;
  scene.out_of_frame_prob = 0.1;
  return scene;
}

bool criterion_line_loss_ablation(Ctx& ctx, std::string& detail) {
  AblationConfig cfg;
  cfg.axis = AblationAxis::kLineLoss;
  cfg.seeds = {1, 2, 3};
  cfg.base = ablation_base(60);
  cfg.scene = ablation_scene();
  cfg.train_count = 1000;
  cfg.test_count = 200;
  cfg.workdir = (fs::path(ctx.workdir) / "ablate_line").string();
  auto cells = run_ablation(cfg);
  double with = median_ji(cells, "on");
  double without = median_ji(cells, "off");
  detail = cat("median JI with Line Loss ", with, " vs without ", without, " (3 seeds)");
  return with >= without;
}

bool criterion_fusion_ablation(Ctx& ctx, std::string& detail) {
  std::ostringstream note;
  bool ok = true;
  for (double alpha : {0.25, 0.5}) {
    AblationConfig cfg;
    cfg.axis = AblationAxis::kFusion;
    cfg.seeds = {1, 2, 3};
    cfg.base = ablation_base(60);
    cfg.base.model.alpha = alpha;
    cfg.scene = ablation_scene();
    cfg.train_count = 1000;
    cfg.test_count = 200;
    cfg.workdir = (fs::path(ctx.workdir) / cat("ablate_fusion_", alpha)).string();
    auto cells = run_ablation(cfg);
    double on = median_ji(cells, "on");
    double off = median_ji(cells, "off");
    note << "alpha " << alpha << ": fusion on " << on << " vs off " << off << "; ";
    ok = ok && on >= off;
  }
  detail = note.str();
  return ok;
}

// ---------------------------------------------------------------------------
// Criterion 8: pruning equivalence
// ---------------------------------------------------------------------------

bool criterion_pruning(Ctx&, std::string& detail) {
  ModelConfig cfg;
  cfg.alpha = 0.5;
  cfg.n_points = 28;
  cfg.n_cls = 2;
  cfg.input_hw = 64;
  Checkpoint full = build_model(cfg, 99);
  Checkpoint pruned = prune_for_inference(full);

  int64_t expect = int64_t(2 * (cfg.n_points - 4)) * cfg.fused_width + 2 * (cfg.n_points - 4);
  int64_t got = param_count(full) - param_count(pruned);
  if (got != expect) {
    detail = cat("parameter delta ", got, ", expected ", expect);
    return false;
  }

  Rng rng(839);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor batch = Tensor::zeros({1, 64, 64, 3});
    for (auto& v : batch.data) v = float(rng.uniform(0, 1));
    ModelOutput a = forward(full, batch);
    ModelOutput b = forward(pruned, batch);
    if (a.corners.data != b.corners.data || a.logits.data != b.logits.data) {
      detail = cat("outputs diverged on frame ", trial);
      return false;
    }
  }
  detail = cat("100 frames bitwise equal; parameter delta ", got);
  return true;
}

// ---------------------------------------------------------------------------
// Criterion 9: schedule and optimizer
// ---------------------------------------------------------------------------

bool criterion_schedule_optimizer(Ctx&, std::string& detail) {
  TrainConfig cfg = paper_profile();
  bool sched_ok = lr_schedule(cfg, 0) == 0.001 && lr_schedule(cfg, 249) == 0.001 &&
                  lr_schedule(cfg, 250) == 0.0001 && lr_schedule(cfg, 700) == 0.00005 &&
                  lr_schedule(cfg, 850) == 0.00001 && lr_schedule(cfg, 999) == 0.00001;

  Tensor p = Tensor::full({1}, 1.0f);
  Tensor g = Tensor::full({1}, 1.0f);
  Tensor v = Tensor::zeros({1});
  rmsprop_step(p, g, v, 0.001f, 0.9f, 1e-7f);
  double delta = double(p[0]) - 1.0;
  double expect = -0.001 / (std::sqrt(0.1) + 1e-7);
  bool step_ok = std::abs(delta - expect) < 1e-7;
  detail = cat("schedule ", sched_ok ? "ok" : "WRONG", "; step ", delta, " vs analytic ", expect);
  return sched_ok && step_ok;
}

// ---------------------------------------------------------------------------
// Criterion 10: occlusion robustness and out-of-frame decoding
// ---------------------------------------------------------------------------

bool criterion_occlusion(Ctx& ctx, std::string& detail) {
  if (!ctx.desk_trained) {
    detail = "requires the trained desk model from criterion 5";
    return false;
  }
  std::vector<std::pair<double, std::vector<SceneSample>>> sweep;
  for (double f : {0.0, 0.05, 0.1, 0.2}) {
    SceneConfig cfg;
    cfg.image_hw = 64;
    cfg.seed = 20240601;
    cfg.occlusion_prob = f > 0 ? 1.0 : 0.0;
    cfg.occlusion_fraction = f;
    sweep.push_back({f, gen_samples(cfg, 100)});
  }
  auto curve = occlusion_suite(ctx.desk_model, sweep);
  double ji0 = curve[0].mean_ji, ji20 = curve[3].mean_ji;

  // Out-of-frame decoding: where the true coordinate leaves [0,1] by at
  // least 0.05, the decoded prediction must leave [0,1] too.
  SceneConfig oof;
  oof.image_hw = 64;
  oof.seed = 20240602;
  oof.out_of_frame_prob = 1.0;
  int outside_truth = 0, outside_pred = 0;
  for (const auto& s : gen_samples(oof, 100)) {
    if (s.label.cls == 0) continue;
    auto [quad, cls] = predict_quad(ctx.desk_model, s.image(), s.hw, s.hw);
    for (int c = 0; c < 4; ++c) {
      double tx = s.label.corners_px.corners[size_t(c)].x / s.hw;
      double ty = s.label.corners_px.corners[size_t(c)].y / s.hw;
      double px = quad.corners[size_t(c)].x / s.hw;
      double py = quad.corners[size_t(c)].y / s.hw;
      if (tx < -0.05 || tx > 1.05) {
        ++outside_truth;
        if (px < 0.0 || px > 1.0) ++outside_pred;
      }
      if (ty < -0.05 || ty > 1.05) {
        ++outside_truth;
        if (py < 0.0 || py > 1.0) ++outside_pred;
      }
    }
  }
  double frac = outside_truth > 0 ? double(outside_pred) / outside_truth : 0.0;
  detail = cat("JI by fraction {0: ", ji0, ", 0.05: ", curve[1].mean_ji, ", 0.1: ",
               curve[2].mean_ji, ", 0.2: ", ji20, "} (floor ", kOcclusionJiFloor,
               "); decoded outside [0,1] for ", outside_pred, "/", outside_truth, " = ", frac,
               " of out-of-frame coordinates (floor ", kOutsideDecodeFloor, ")");
  return ji20 >= kOcclusionJiFloor && outside_truth > 20 && frac >= kOutsideDecodeFloor;
}

// ---------------------------------------------------------------------------
// Criterion 11: determinism
// ---------------------------------------------------------------------------

bool criterion_determinism(Ctx& ctx, std::string& detail) {
  // gen-data bit-reproducibility, including on-disk artifacts.
  SceneConfig scene;
  scene.image_hw = 32;
  scene.seed = 4242;
  scene.occlusion_prob = 0.4;
  scene.out_of_frame_prob = 0.2;
  scene.negative_prob = 0.2;
  auto a = gen_samples(scene, 24);
  auto b = gen_samples(scene, 24);
  for (int i = 0; i < 24; ++i)
    if (a[size_t(i)].rgb != b[size_t(i)].rgb) {
      detail = cat("gen-data diverged at sample ", i);
      return false;
    }
  fs::path da = fs::path(ctx.workdir) / "det_a";
  fs::path db = fs::path(ctx.workdir) / "det_b";
  fs::remove_all(da);
  fs::remove_all(db);
  write_dataset(a, da.string(), &scene);
  write_dataset(b, db.string(), &scene);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  if (slurp(da / "index.json") != slurp(db / "index.json")) {
    detail = "dataset checksums differ between identical runs";
    return false;
  }

  // Short training run, twice, bit-identical checkpoints.
  fs::path data_dir = fs::path(ctx.workdir) / "det_train";
  if (!fs::exists(data_dir / "index.json")) {
    SceneConfig tr;
    tr.image_hw = 32;
    tr.seed = 777;
    write_dataset(gen_samples(tr, 24), data_dir.string(), &tr);
  }
  TrainConfig cfg;
  cfg.model.alpha = 0.5;
  cfg.model.n_points = 12;
  cfg.model.input_hw = 32;
  cfg.model.fused_width = 16;
  cfg.model.stage_channels = {8, 8, 8, 16, 16};
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.dataset_dir = data_dir.string();
  cfg.seed = 31;
  std::string run1 = serialize_checkpoint(train(cfg).ckpt);
  std::string run2 = serialize_checkpoint(train(cfg).ckpt);
  if (run1 != run2) {
    detail = "training is not bit-reproducible";
    return false;
  }

  // Evaluation determinism and checkpoint byte round-trip.
  Checkpoint ckpt = deserialize_checkpoint(run1);
  auto eval_samples = read_dataset(data_dir.string());
  std::string e1 = evaluate(ckpt, eval_samples).to_json().dump();
  std::string e2 = evaluate(ckpt, eval_samples).to_json().dump();
  if (e1 != e2) {
    detail = "evaluation is not deterministic";
    return false;
  }
  fs::path ck = fs::path(ctx.workdir) / "det.ckpt";
  save_checkpoint(ckpt, ck.string());
  std::string round = serialize_checkpoint(load_checkpoint(ck.string()));
  if (round != run1) {
    detail = "checkpoint bytes changed across save/load";
    return false;
  }
  detail = "gen-data, train, eval and checkpoint round-trip all bit-stable";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  Ctx ctx;
  ctx.workdir = "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--workdir") == 0 && i + 1 < argc) {
      ctx.workdir = argv[++i];
    } else if (std::strcmp(argv[i], "--reuse") == 0) {
      ctx.reuse = true;
    } else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: ldr_acceptance [--only 1,2,...] [--workdir DIR] [--reuse]\n";
      return 2;
    }
  }
  fs::create_directories(ctx.workdir);

  struct Criterion {
    int id;
    const char* name;
    std::function<bool(Ctx&, std::string&)> fn;
  };
  std::vector<Criterion> criteria = {
      {1, "gradient correctness (reverse mode vs central differences)", criterion_gradients},
      {2, "label self-consistency (equal-division rings have zero Line Loss)",
       criterion_label_consistency},
      {3, "Jaccard index matches the Monte Carlo oracle", criterion_ji_oracle},
      {4, "loss arithmetic (ln 2, single deviation, weighted sum)", criterion_loss_arithmetic},
      {5, "desk-scale training reaches the frozen JI floor inside the time cap",
       criterion_desk_training},
      {6, "Line Loss ablation direction (median over 3 matched seeds)",
       criterion_line_loss_ablation},
      {7, "feature fusion ablation direction at small widths", criterion_fusion_ablation},
      {8, "pruning keeps corners and logits bit-identical with the exact size drop",
       criterion_pruning},
      {9, "learning-rate schedule and RMSprop analytic step", criterion_schedule_optimizer},
      {10, "occlusion robustness and out-of-frame decoding", criterion_occlusion},
      {11, "bit-reproducibility of gen-data, train, eval, checkpoints", criterion_determinism},
  };

  int failures = 0;
  for (auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(ctx, detail);
    } catch (const std::exception& e) {
      detail = cat("exception: ", e.what());
      ok = false;
    }
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name;
    if (!detail.empty()) std::cout << " — " << detail;
    std::cout << "\n" << std::flush;
    if (!ok) ++failures;
  }
  if (failures) std::cout << failures << " criterion(s) failed\n";
  return failures == 0 ? 0 : 1;
}
