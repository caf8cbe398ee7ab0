#include <doctest.h>

#include "ldr/loss.hpp"
#include "test_util.hpp"

using namespace ldr;
using ldrtest::random_convex_quad;

namespace {

// Test-local re-derivations of the loss formulas, kept deliberately separate
// from the library implementations.

double oracle_sim_triple(Point2 a, Point2 b, Point2 c) {
  double v1x = a.x - b.x, v1y = a.y - b.y;
  double v2x = b.x - c.x, v2y = b.y - c.y;
  double n1 = std::hypot(v1x, v1y), n2 = std::hypot(v2x, v2y);
  if (n1 * n2 <= 1e-24) return 0.0;
  return 1.0 - (v1x * v2x + v1y * v2y) / (n1 * n2);
}

// Triples i = 0 .. N/4-3 of each border view, the published bound: the
// border-ending corner never appears in a triple.
double oracle_similarity(const PointRing& ring) {
  const int n = ring.n_total(), q = n / 4;
  double total = 0;
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i <= q - 3; ++i)
      total += oracle_sim_triple(ring.points[size_t((k * q + i) % n)],
                                 ring.points[size_t((k * q + i + 1) % n)],
                                 ring.points[size_t((k * q + i + 2) % n)]);
  return total / (n - 4);
}

double oracle_distance(const PointRing& ring) {
  const int n = ring.n_total(), q = n / 4;
  double total = 0;
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i <= q - 3; ++i) {
      Point2 a = ring.points[size_t((k * q + i) % n)];
      Point2 b = ring.points[size_t((k * q + i + 1) % n)];
      Point2 c = ring.points[size_t((k * q + i + 2) % n)];
      total += std::abs(std::abs(a.x - b.x) - std::abs(b.x - c.x));
      total += std::abs(std::abs(a.y - b.y) - std::abs(b.y - c.y));
    }
  return total / (n - 4);
}

double oracle_regression(const PointRing& pred, const PointRing& gt) {
  double total = 0;
  for (int i = 0; i < pred.n_total(); ++i) {
    total += std::abs(gt.points[size_t(i)].x - pred.points[size_t(i)].x);
    total += std::abs(gt.points[size_t(i)].y - pred.points[size_t(i)].y);
  }
  return total / (pred.n_total() - 4);
}

double oracle_classification(const std::vector<double>& logits, int c) {
  double denom = 0;
  for (double v : logits) denom += std::exp(v);
  return -std::log(std::exp(logits[size_t(c)]) / denom);
}

PointRing random_ring(Rng& rng, int n) {
  PointRing ring;
  for (int i = 0; i < n; ++i) ring.points.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
  return ring;
}

PointRing perturbed_equal_division(Rng& rng, int n, double amount) {
  PointRing ring = equal_division_points(random_convex_quad(rng), n);
  for (auto& p : ring.points) {
    p.x += rng.uniform(-amount, amount);
    p.y += rng.uniform(-amount, amount);
  }
  return ring;
}

}  // namespace

TEST_SUITE_BEGIN("loss");

TEST_CASE("assemble_ring: N=8 layout has corners at even indices") {
  std::vector<double> corners = {0, 0, 0, 1, 1, 1, 1, 0};
  std::vector<double> borders = {10, 11, 20, 21, 30, 31, 40, 41};
  PointRing ring = assemble_ring(corners, borders);
  REQUIRE(ring.n_total() == 8);
  CHECK(ring.points[0].x == 0);
  CHECK(ring.points[2].x == 0);  // corner 1
  CHECK(ring.points[2].y == 1);
  CHECK(ring.points[4].x == 1);  // corner 2
  CHECK(ring.points[6].y == 0);  // corner 3
  CHECK(ring.points[1].x == 10);  // first border interior
  CHECK(ring.points[3].x == 20);
  CHECK(ring.points[5].x == 30);
  CHECK(ring.points[7].x == 40);
}

TEST_CASE("assemble_ring: round trips with split_ring") {
  Rng rng(211);
  std::vector<double> corners(8), borders(2 * (20 - 4));
  for (auto& v : corners) v = rng.uniform(0, 1);
  for (auto& v : borders) v = rng.uniform(0, 1);
  PointRing ring = assemble_ring(corners, borders);
  std::vector<double> c2, b2;
  split_ring(ring, c2, b2);
  CHECK(c2 == corners);
  CHECK(b2 == borders);
}

TEST_CASE("assemble_ring: ground-truth rings pass through losslessly") {
  Rng rng(213);
  PointRing ring = equal_division_points(random_convex_quad(rng), 28);
  std::vector<double> corners, borders;
  split_ring(ring, corners, borders);
  PointRing back = assemble_ring(corners, borders);
  REQUIRE(back.n_total() == ring.n_total());
  for (int i = 0; i < ring.n_total(); ++i) {
    CHECK(back.points[size_t(i)].x == ring.points[size_t(i)].x);
    CHECK(back.points[size_t(i)].y == ring.points[size_t(i)].y);
  }
}

TEST_CASE("assemble_ring: rejects inconsistent lengths") {
  std::vector<double> corners(8, 0.0);
  CHECK_THROWS_AS(assemble_ring(corners, std::vector<double>(7, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(assemble_ring(std::vector<double>(6, 0.0), std::vector<double>(8, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("similarity loss: zero on exact equal-division rings") {
  Rng rng(217);
  for (int trial = 0; trial < 50; ++trial) {
    PointRing ring = equal_division_points(random_convex_quad(rng), 20);
    CHECK(similarity_loss(ring) < 1e-9);
  }
}

TEST_CASE("similarity loss: a right-angle triple contributes exactly 1") {
  CHECK(oracle_sim_triple({0, 0}, {1, 0}, {1, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  // Ring where that triple is the only non-collinear one: loss = 1/(N-4).
  PointRing ring;
  ring.points = {{0, 0}, {1, 0}, {1, 1},          // border 0: right angle at (1,0)
                 {1, 2}, {1 + 2.0 / 3, 2}, {1 + 4.0 / 3, 2},
                 {3, 2}, {3, 4.0 / 3}, {3, 2.0 / 3},
                 {3, 0}, {2, 0}, {1, 0}};
  CHECK(similarity_loss(ring) == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
}

TEST_CASE("similarity loss: matches the independent formula evaluation") {
  Rng rng(219);
  for (int trial = 0; trial < 100; ++trial) {
    PointRing ring = perturbed_equal_division(rng, 28, 0.07);
    CHECK(similarity_loss(ring) == doctest::Approx(oracle_similarity(ring)).epsilon(1e-9));
  }
  for (int trial = 0; trial < 50; ++trial) {
    PointRing ring = random_ring(rng, 12);
    CHECK(similarity_loss(ring) == doctest::Approx(oracle_similarity(ring)).epsilon(1e-9));
  }
}

TEST_CASE("similarity loss: coincident successive points contribute zero") {
  PointRing ring = equal_division_points(
      Quad{{Point2{0, 0}, Point2{0, 1}, Point2{1, 1}, Point2{1, 0}}}, 12);
  ring.points[1] = ring.points[0];  // collapse one segment
  double v = similarity_loss(ring);
  CHECK(std::isfinite(v));
  CHECK(v < 1e-9);  // remaining triples are still collinear
}

TEST_CASE("distance loss: zero at equal division, analytic 1-vs-2 gap case") {
  Rng rng(223);
  for (int trial = 0; trial < 50; ++trial) {
    PointRing ring = equal_division_points(random_convex_quad(rng), 20);
    CHECK(distance_loss(ring) < 1e-9);
  }
  PointRing ring;
  ring.points = {{0, 0}, {1, 0}, {3, 0},  // x-gaps 1 then 2
                 {5, 0}, {5, 1}, {5, 2},
                 {5, 3}, {4, 3}, {3, 3},
                 {2, 3}, {2 - 2.0 / 3, 3 - 1.0}, {2 - 4.0 / 3, 3 - 2.0}};
  CHECK(distance_loss(ring) == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
}

TEST_CASE("distance loss: matches the independent formula evaluation") {
  Rng rng(227);
  for (int trial = 0; trial < 100; ++trial) {
    PointRing ring = perturbed_equal_division(rng, 24, 0.06);
    CHECK(distance_loss(ring) == doctest::Approx(oracle_distance(ring)).epsilon(1e-9));
  }
}

TEST_CASE("line loss terms: translation and scale behavior") {
  Rng rng(229);
  for (int trial = 0; trial < 30; ++trial) {
    PointRing ring = perturbed_equal_division(rng, 20, 0.05);
    PointRing moved = ring;
    Point2 shift{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    for (auto& p : moved.points) p = p + shift;
    CHECK(similarity_loss(moved) == doctest::Approx(similarity_loss(ring)).epsilon(1e-9));
    CHECK(distance_loss(moved) == doctest::Approx(distance_loss(ring)).epsilon(1e-9));

    double scale = rng.uniform(0.5, 3.0);
    PointRing scaled = ring;
    for (auto& p : scaled.points) p = scale * p;
    CHECK(similarity_loss(scaled) == doctest::Approx(similarity_loss(ring)).epsilon(1e-7));
    CHECK(distance_loss(scaled) == doctest::Approx(scale * distance_loss(ring)).epsilon(1e-9));
  }
}

TEST_CASE("regression loss: zero at identity, analytic single deviation for N=100") {
  Rng rng(233);
  PointRing gt = equal_division_points(random_convex_quad(rng), 100);
  CHECK(regression_loss(gt, gt) == 0.0);
  PointRing pred = gt;
  pred.points[37].x += 0.1;
  CHECK(regression_loss(pred, gt) == doctest::Approx(0.1 / 96.0).epsilon(1e-9));
  PointRing wrong_n = equal_division_points(random_convex_quad(rng), 96);
  CHECK_THROWS_AS(regression_loss(pred, wrong_n), std::invalid_argument);
}

TEST_CASE("regression loss: matches the independent evaluation") {
  Rng rng(239);
  for (int trial = 0; trial < 100; ++trial) {
    PointRing a = random_ring(rng, 28);
    PointRing b = random_ring(rng, 28);
    CHECK(regression_loss(a, b) == doctest::Approx(oracle_regression(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("regression loss: squared variant") {
  Rng rng(241);
  PointRing a = random_ring(rng, 12);
  PointRing b = random_ring(rng, 12);
  double expect = 0;
  for (int i = 0; i < 12; ++i) {
    double dx = b.points[size_t(i)].x - a.points[size_t(i)].x;
    double dy = b.points[size_t(i)].y - a.points[size_t(i)].y;
    expect += dx * dx + dy * dy;
  }
  CHECK(regression_loss(a, b, true) == doctest::Approx(expect / 8.0).epsilon(1e-12));
}

TEST_CASE("classification loss: uniform logits give ln 2, saturation is near zero") {
  CHECK(classification_loss({0.3, 0.3}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(classification_loss({0.3, 0.3}, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  double sat = classification_loss({20.0, 0.0}, 0);
  CHECK(sat == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
  CHECK(sat < 1e-8);
  CHECK_THROWS_AS(classification_loss({1.0, 2.0}, 2), std::invalid_argument);
  CHECK_THROWS_AS(classification_loss({1.0, 2.0}, -1), std::invalid_argument);
}

TEST_CASE("classification loss: matches the direct softmax evaluation") {
  Rng rng(251);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(5);
    for (auto& v : logits) v = rng.uniform(-4, 4);
    int c = int(rng.uniform_int(0, 4));
    CHECK(classification_loss(logits, c) ==
          doctest::Approx(oracle_classification(logits, c)).epsilon(1e-9));
  }
}

TEST_CASE("total loss: weighted-sum arithmetic with the published weights") {
  LossWeights w;
  CHECK(w.delta == 0.32);
  CHECK(w.beta == 0.0032);
  CHECK(w.gamma == 0.0032);
  CHECK(combine_loss(w, 1, 1, 1, 1) == doctest::Approx(1.3264).epsilon(1e-9));
  CHECK(combine_loss(w, 0, 0, 0, 0) == 0.0);
}

TEST_CASE("total loss: breakdown satisfies its own weighted-sum invariant") {
  Rng rng(257);
  const int n = 12, b = 3;
  ModelOutput out;
  out.corners = Tensor::zeros({b, 8});
  out.borders = Tensor::zeros({b, 2 * (n - 4)});
  out.logits = Tensor::zeros({b, 2});
  for (auto& v : out.corners.data) v = float(rng.uniform(0.1, 0.9));
  for (auto& v : out.borders.data) v = float(rng.uniform(0.1, 0.9));
  for (auto& v : out.logits.data) v = float(rng.uniform(-2, 2));
  std::vector<SampleLabel> labels;
  for (int i = 0; i < b; ++i) {
    PointRing ring = equal_division_points(random_convex_quad(rng), n);
    for (auto& p : ring.points) {
      p.x = encode_coord(p.x);
      p.y = encode_coord(p.y);
    }
    labels.push_back({ring, 1});
  }
  LossWeights w;
  LossBreakdown bd = total_loss(out, labels, w);
  CHECK(bd.total ==
        doctest::Approx(bd.reg + w.delta * bd.cls + w.beta * bd.sim + w.gamma * bd.dis)
            .epsilon(1e-6));
  CHECK(bd.reg >= 0);
  CHECK(bd.cls >= 0);
  CHECK(bd.sim >= 0);
  CHECK(bd.dis >= 0);
}

TEST_CASE("total loss: negative samples only contribute classification") {
  Rng rng(263);
  const int n = 12;
  ModelOutput out;
  out.corners = Tensor::full({1, 8}, 0.4f);
  out.borders = Tensor::full({1, 2 * (n - 4)}, 0.6f);
  out.logits = Tensor::zeros({1, 2});
  std::vector<SampleLabel> labels = {SampleLabel{{}, 0}};
  LossBreakdown bd = total_loss(out, labels, LossWeights{});
  CHECK(bd.reg == 0.0);
  CHECK(bd.sim == 0.0);
  CHECK(bd.dis == 0.0);
  CHECK(bd.cls == doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("graph route: double-precision graph equals the reference losses") {
  Rng rng(269);
  const int n = 28, b = 3;
  TensorD corners = TensorD::zeros({b, 8});
  TensorD borders = TensorD::zeros({b, 2 * (n - 4)});
  TensorD logits = TensorD::zeros({b, 2});
  for (auto& v : corners.data) v = rng.uniform(0.1, 0.9);
  for (auto& v : borders.data) v = rng.uniform(0.1, 0.9);
  for (auto& v : logits.data) v = rng.uniform(-2, 2);
  std::vector<SampleLabel> labels;
  for (int i = 0; i < b; ++i) {
    if (i == 1) {
      labels.push_back(SampleLabel{{}, 0});  // one negative in the batch
      continue;
    }
    PointRing ring = equal_division_points(random_convex_quad(rng), n);
    for (auto& p : ring.points) {
      p.x = encode_coord(p.x);
      p.y = encode_coord(p.y);
    }
    labels.push_back({ring, 1});
  }

  Graph<double> g;
  HeadNodes<double> head;
  head.corners = g.leaf(corners);
  head.borders = g.leaf(borders);
  head.logits = g.leaf(logits);
  LossWeights w;
  auto nodes = build_total_loss(g, head, labels, w, n);

  // Reference route: per-sample double evaluation with the same masking.
  double reg = 0, sim = 0, dis = 0, cls = 0;
  int positives = 0;
  for (int s = 0; s < b; ++s) {
    std::vector<double> lg = {logits.at2(s, 0), logits.at2(s, 1)};
    cls += classification_loss(lg, labels[size_t(s)].cls);
    if (labels[size_t(s)].cls == 0) continue;
    ++positives;
    std::vector<double> cs(8), bs(size_t(2 * (n - 4)));
    for (int i = 0; i < 8; ++i) cs[size_t(i)] = corners.at2(s, i);
    for (int i = 0; i < 2 * (n - 4); ++i) bs[size_t(i)] = borders.at2(s, i);
    PointRing ring = assemble_ring(cs, bs);
    reg += regression_loss(ring, labels[size_t(s)].ring);
    sim += similarity_loss(ring);
    dis += distance_loss(ring);
  }
  cls /= b;
  reg /= positives;
  sim /= positives;
  dis /= positives;

  CHECK(g.value(nodes.reg)[0] == doctest::Approx(reg).epsilon(1e-9));
  CHECK(g.value(nodes.sim)[0] == doctest::Approx(sim).epsilon(1e-9));
  CHECK(g.value(nodes.dis)[0] == doctest::Approx(dis).epsilon(1e-9));
  CHECK(g.value(nodes.cls)[0] == doctest::Approx(cls).epsilon(1e-9));
  CHECK(g.value(nodes.total)[0] ==
        doctest::Approx(combine_loss(w, reg, cls, sim, dis)).epsilon(1e-9));
}

TEST_CASE("graph route: finite differences of every term and the total") {
  // Central differences straddle the |.| kinks of the regression and
  // distance terms when an operand sits within eps of zero, so draw
  // configurations until every kink has a clear margin.
  const int n = 12, b = 2;
  TensorD corners, borders, logits;
  std::vector<SampleLabel> labels;
  const double kink_margin = 1e-3;
  for (uint64_t attempt = 0;; ++attempt) {
    REQUIRE(attempt < 50);
    Rng rng(271 + attempt);
    corners = TensorD::zeros({b, 8});
    borders = TensorD::zeros({b, 2 * (n - 4)});
    logits = TensorD::zeros({b, 2});
    for (auto& v : corners.data) v = rng.uniform(0.15, 0.85);
    for (auto& v : borders.data) v = rng.uniform(0.15, 0.85);
    for (auto& v : logits.data) v = rng.uniform(-1.5, 1.5);
    labels.clear();
    for (int i = 0; i < b; ++i) {
      PointRing ring = equal_division_points(random_convex_quad(rng), n);
      for (auto& p : ring.points) {
        p.x = encode_coord(p.x);
        p.y = encode_coord(p.y);
      }
      labels.push_back({ring, 1});
    }

    bool clean = true;
    const int q = n / 4;
    for (int s = 0; s < b && clean; ++s) {
      std::vector<double> cs(8), bs(size_t(2 * (n - 4)));
      for (int i = 0; i < 8; ++i) cs[size_t(i)] = corners.at2(s, i);
      for (int i = 0; i < 2 * (n - 4); ++i) bs[size_t(i)] = borders.at2(s, i);
      PointRing ring = assemble_ring(cs, bs);
      for (int i = 0; i < n && clean; ++i) {
        clean = std::abs(ring.points[size_t(i)].x - labels[size_t(s)].ring.points[size_t(i)].x) >
                    kink_margin &&
                std::abs(ring.points[size_t(i)].y - labels[size_t(s)].ring.points[size_t(i)].y) >
                    kink_margin;
      }
      for (int k = 0; k < 4 && clean; ++k)
        for (int i = 0; i + 2 <= q && clean; ++i) {
          Point2 pa = ring.border_point(k, i), pb = ring.border_point(k, i + 1),
                 pc = ring.border_point(k, i + 2);
          Point2 v1 = pa - pb, v2 = pb - pc;
          clean = std::abs(v1.x) > kink_margin && std::abs(v1.y) > kink_margin &&
                  std::abs(v2.x) > kink_margin && std::abs(v2.y) > kink_margin &&
                  std::abs(std::abs(v1.x) - std::abs(v2.x)) > kink_margin &&
                  std::abs(std::abs(v1.y) - std::abs(v2.y)) > kink_margin &&
                  norm(v1) * norm(v2) > kink_margin;
        }
    }
    if (clean) break;
  }

  LossWeights w;
  auto build = [&](auto term_of, double eps) {
    Graph<double> g;
    HeadNodes<double> head;
    head.corners = g.leaf(corners);
    head.borders = g.leaf(borders);
    head.logits = g.leaf(logits);
    auto nodes = build_total_loss(g, head, labels, w, n);
    double worst = 0;
    auto loss = term_of(nodes);
    worst = std::max(worst, finite_difference_check(g, loss, head.corners, eps));
    worst = std::max(worst, finite_difference_check(g, loss, head.borders, eps));
    worst = std::max(worst, finite_difference_check(g, loss, head.logits, eps));
    return worst;
  };

  // reg and dis are piecewise linear: a larger step costs no truncation and
  // keeps roundoff out of the near-zero gradients.
  CHECK(build([](const LossNodes<double>& l) { return l.reg; }, 1e-4) < 1e-6);
  CHECK(build([](const LossNodes<double>& l) { return l.sim; }, 1e-5) < 1e-6);
  CHECK(build([](const LossNodes<double>& l) { return l.dis; }, 1e-4) < 1e-6);
  CHECK(build([](const LossNodes<double>& l) { return l.cls; }, 1e-5) < 1e-6);
  CHECK(build([](const LossNodes<double>& l) { return l.total; }, 1e-5) < 1e-6);
}

TEST_CASE("label self-consistency: encoded equal-division rings have zero Line Loss") {
  Rng rng(277);
  for (int trial = 0; trial < 100; ++trial) {
    PointRing ring = equal_division_points(random_convex_quad(rng), 28);
    for (auto& p : ring.points) {
      p.x = encode_coord(p.x);
      p.y = encode_coord(p.y);
    }
    CHECK(similarity_loss(ring) < 1e-9);
    CHECK(distance_loss(ring) < 1e-9);
  }
}

TEST_SUITE_END();
