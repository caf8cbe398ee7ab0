#pragma once

// Loss terms for training and logging. The Line Loss couples the border
// branch to the corner branch: a similarity term penalizing non-collinear
// successive point triples on each border, and a distance term penalizing
// unequal x/y gaps. Regression is the literal per-coordinate absolute
// deviation with the 1/(N-4) divisor; classification is stabilized softmax
// cross-entropy. The total is reg + delta*cls + beta*sim + gamma*dis.
//
// Two routes exist on purpose: plain double-precision functions on point
// rings (reference, logging, tests) and a Graph builder producing the
// differentiable scalar used by training. Tests hold the two together.

#include <vector>

#include "ldr/geometry.hpp"
#include "ldr/graph.hpp"
#include "ldr/model.hpp"

namespace ldr {

struct LossWeights {
  double delta = 0.32;   // classification
  double beta = 0.0032;  // similarity
  double gamma = 0.0032; // distance
};

struct LossBreakdown {
  double reg = 0, cls = 0, sim = 0, dis = 0, total = 0;
};

inline double combine_loss(const LossWeights& w, double reg, double cls, double sim, double dis) {
  return reg + w.delta * cls + w.beta * sim + w.gamma * dis;
}

// Per-sample training target. Negative samples (cls 0) carry an empty ring;
// only the classification term applies to them.
struct SampleLabel {
  PointRing ring;  // encoded normalized coordinates, empty when cls == 0
  int cls = 0;
};

// -----------------------------------------------------------------------------
// Ring assembly
// -----------------------------------------------------------------------------

// Interleaves the corner branch (4 points) and border branch (N-4 points)
// back into ring order: corners at indices 0, N/4, N/2, 3N/4, border
// interiors in between. Values are (x, y) pairs.
inline PointRing assemble_ring(const std::vector<double>& corners,
                               const std::vector<double>& borders) {
  require(corners.size() == 8, cat("assemble_ring: expected 8 corner values, got ", corners.size()));
  require(borders.size() % 8 == 0,
          cat("assemble_ring: border vector length ", borders.size(), " is not 2*(N-4) for any N"));
  const int n = 4 + int(borders.size()) / 2;
  validate_ring_size(n);
  const int q = n / 4;
  PointRing ring;
  ring.points.resize(size_t(n));
  for (int p = 0; p < n; ++p) {
    if (p % q == 0) {
      int c = p / q;
      ring.points[size_t(p)] = {corners[size_t(2 * c)], corners[size_t(2 * c + 1)]};
    } else {
      int k = p / q, j = p % q;
      int idx = k * (q - 1) + (j - 1);
      ring.points[size_t(p)] = {borders[size_t(2 * idx)], borders[size_t(2 * idx + 1)]};
    }
  }
  return ring;
}

inline void split_ring(const PointRing& ring, std::vector<double>& corners,
                       std::vector<double>& borders) {
  const int n = ring.n_total();
  validate_ring_size(n);
  const int q = n / 4;
  corners.assign(8, 0.0);
  borders.assign(size_t(2 * (n - 4)), 0.0);
  for (int p = 0; p < n; ++p) {
    Point2 pt = ring.points[size_t(p)];
    if (p % q == 0) {
      int c = p / q;
      corners[size_t(2 * c)] = pt.x;
      corners[size_t(2 * c + 1)] = pt.y;
    } else {
      int idx = (p / q) * (q - 1) + (p % q - 1);
      borders[size_t(2 * idx)] = pt.x;
      borders[size_t(2 * idx + 1)] = pt.y;
    }
  }
}

// -----------------------------------------------------------------------------
// Reference losses (double precision)
// -----------------------------------------------------------------------------

// Border triple enumeration. Mode 1 (default) runs the published similarity
// bound, triples i in [0, N/4-3] of each view, which keeps the border-ending
// corner out of the triples; mode 0 takes every consecutive triple of the
// (N/4+1)-point view including both corners; mode 2 uses interior points
// only. Mode 1 measurably tracks corner accuracy best.
#ifndef LDR_TRIPLE_MODE
#define LDR_TRIPLE_MODE 1
#endif

namespace detail {
constexpr int kTripleMode = LDR_TRIPLE_MODE;

inline int triple_begin(int) { return kTripleMode == 2 ? 1 : 0; }
inline int triple_end(int q) {  // one past the last triple start index
  if (kTripleMode == 1) return q - 2;      // last triple covers view index q-1
  if (kTripleMode == 2) return q - 3;      // interiors only
  return q - 1;                            // full view including both corners
}
}  // namespace detail

// Consecutive point triples of each border view, all four borders.
template <typename Fn>
void for_each_border_triple(const PointRing& ring, Fn&& fn) {
  const int q = ring.quarter();
  for (int k = 0; k < 4; ++k)
    for (int i = detail::triple_begin(q); i < detail::triple_end(q); ++i)
      fn(ring.border_point(k, i), ring.border_point(k, i + 1), ring.border_point(k, i + 2));
}

// Sum over border triples of 1 - cos(angle between successive segment
// vectors), divided by N-4. Zero exactly when every border is collinear.
// Coincident successive points contribute 0.
inline double similarity_loss(const PointRing& ring) {
  const int n = ring.n_total();
  require(n >= 12, cat("similarity_loss: need N >= 12 for border triples, got ", n));
  double acc = 0.0;
  for_each_border_triple(ring, [&](Point2 a, Point2 b, Point2 c) {
    Point2 v1 = a - b;
    Point2 v2 = b - c;
    double nn = norm(v1) * norm(v2);
    if (nn > 1e-24) acc += 1.0 - dot(v1, v2) / nn;
  });
  return acc / double(n - 4);
}

// Sum over border triples of ||dx1|-|dx2|| + ||dy1|-|dy2||, divided by N-4.
// Zero exactly at equal division.
inline double distance_loss(const PointRing& ring) {
  const int n = ring.n_total();
  require(n >= 12, cat("distance_loss: need N >= 12 for border triples, got ", n));
  double acc = 0.0;
  for_each_border_triple(ring, [&](Point2 a, Point2 b, Point2 c) {
    acc += std::abs(std::abs(a.x - b.x) - std::abs(b.x - c.x)) +
           std::abs(std::abs(a.y - b.y) - std::abs(b.y - c.y));
  });
  return acc / double(n - 4);
}

// Per-coordinate deviation between predicted and ground-truth rings (both in
// the same normalized/encoded space), divided by N-4. `squared` switches the
// literal |d| to d^2.
inline double regression_loss(const PointRing& pred, const PointRing& gt, bool squared = false) {
  require(pred.n_total() == gt.n_total(),
          cat("regression_loss: ring sizes differ, ", pred.n_total(), " vs ", gt.n_total()));
  const int n = pred.n_total();
  validate_ring_size(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double dx = gt.points[size_t(i)].x - pred.points[size_t(i)].x;
    double dy = gt.points[size_t(i)].y - pred.points[size_t(i)].y;
    acc += squared ? dx * dx + dy * dy : std::abs(dx) + std::abs(dy);
  }
  return acc / double(n - 4);
}

// -log softmax(logits)[cls], max-subtracted.
inline double classification_loss(const std::vector<double>& logits, int cls) {
  require(!logits.empty(), "classification_loss: empty logits");
  require(cls >= 0 && cls < int(logits.size()),
          cat("classification_loss: class ", cls, " out of range ", logits.size()));
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double lse = 0.0;
  for (double v : logits) lse += std::exp(v - mx);
  return mx + std::log(lse) - logits[size_t(cls)];
}

// Batch-mean breakdown of a full model output against labels. Regression and
// Line Loss terms average over positive samples; classification over all.
// Requires an unpruned output (border branch present).
inline LossBreakdown total_loss(const ModelOutput& pred, const std::vector<SampleLabel>& labels,
                                const LossWeights& w, bool squared_reg = false) {
  const int b = pred.corners.dim(0);
  require(int(labels.size()) == b,
          cat("total_loss: ", labels.size(), " labels for batch of ", b));
  require(pred.borders.dim(1) > 0, "total_loss: model output has no border branch (pruned?)");
  LossBreakdown out;
  int positives = 0;
  for (int s = 0; s < b; ++s) {
    std::vector<double> logits(size_t(pred.logits.dim(1)));
    for (int c = 0; c < pred.logits.dim(1); ++c) logits[size_t(c)] = double(pred.logits.at2(s, c));
    out.cls += classification_loss(logits, labels[size_t(s)].cls);
    if (labels[size_t(s)].cls == 0) continue;
    ++positives;
    std::vector<double> corners(8), borders(size_t(pred.borders.dim(1)));
    for (int c = 0; c < 8; ++c) corners[size_t(c)] = double(pred.corners.at2(s, c));
    for (int c = 0; c < pred.borders.dim(1); ++c) borders[size_t(c)] = double(pred.borders.at2(s, c));
    PointRing ring = assemble_ring(corners, borders);
    out.reg += regression_loss(ring, labels[size_t(s)].ring, squared_reg);
    out.sim += similarity_loss(ring);
    out.dis += distance_loss(ring);
  }
  out.cls /= double(b);
  if (positives > 0) {
    out.reg /= double(positives);
    out.sim /= double(positives);
    out.dis /= double(positives);
  }
  out.total = combine_loss(w, out.reg, out.cls, out.sim, out.dis);
  return out;
}

// -----------------------------------------------------------------------------
// Differentiable graph route
// -----------------------------------------------------------------------------

template <typename T>
struct LossNodes {
  typename Graph<T>::NodeId total, reg, cls, sim, dis;
};

namespace detail {

// Column index of ring point p's x coordinate inside concat(corners, borders).
inline int ring_source_col(int p, int n) {
  const int q = n / 4;
  if (p % q == 0) return 2 * (p / q);
  return 8 + 2 * ((p / q) * (q - 1) + (p % q - 1));
}

}  // namespace detail

// Builds the total-loss scalar from the three head branches. `labels` fixes
// the ground-truth rings (encoded space), classes and the positive mask.
template <typename T>
LossNodes<T> build_total_loss(Graph<T>& g, const HeadNodes<T>& head,
                              const std::vector<SampleLabel>& labels, const LossWeights& w,
                              int n_points, bool squared_reg = false) {
  using Id = typename Graph<T>::NodeId;
  const int n = n_points;
  validate_ring_size(n);
  require(n >= 12, "build_total_loss: need N >= 12");
  const int b = int(labels.size());
  const int q = n / 4;

  // Ring tensor [B, 2N] in ring order from the two branches.
  std::vector<int> ring_idx(size_t(2 * n));
  for (int p = 0; p < n; ++p) {
    int src = detail::ring_source_col(p, n);
    ring_idx[size_t(2 * p)] = src;
    ring_idx[size_t(2 * p + 1)] = src + 1;
  }
  Id ring = g.gather_cols(g.concat_cols(head.corners, head.borders), ring_idx);

  // Ground-truth rings and masks.
  TensorT<T> gt = TensorT<T>::zeros({b, 2 * n});
  std::vector<T> pos_mask(size_t(b), T(0));
  std::vector<T> all_mask(size_t(b), T(1));
  std::vector<int> classes(size_t(b), 0);
  for (int s = 0; s < b; ++s) {
    classes[size_t(s)] = labels[size_t(s)].cls;
    if (labels[size_t(s)].cls == 0) continue;
    require(labels[size_t(s)].ring.n_total() == n,
            cat("build_total_loss: label ring has ", labels[size_t(s)].ring.n_total(),
                " points, model expects ", n));
    pos_mask[size_t(s)] = T(1);
    for (int p = 0; p < n; ++p) {
      gt.at2(s, 2 * p) = T(labels[size_t(s)].ring.points[size_t(p)].x);
      gt.at2(s, 2 * p + 1) = T(labels[size_t(s)].ring.points[size_t(p)].y);
    }
  }
  Id gt_ring = g.leaf(std::move(gt));

  // Regression: sum of per-coordinate deviations / (N-4), positives only.
  Id diff = g.sub(ring, gt_ring);
  Id dev = squared_reg ? g.mul(diff, diff) : g.abs(diff);
  Id reg = g.masked_mean(g.scale(g.sum_cols(dev), T(1) / T(n - 4)), pos_mask);

  // Border triples: component tensors for the two successive segment vectors.
  std::vector<int> ax, ay_, bx, by_, cx, cy;
  for (int k = 0; k < 4; ++k)
    for (int i = detail::triple_begin(q); i < detail::triple_end(q); ++i) {
      int pa = (k * q + i) % n, pb = (k * q + i + 1) % n, pc = (k * q + i + 2) % n;
      ax.push_back(2 * pa);
      ay_.push_back(2 * pa + 1);
      bx.push_back(2 * pb);
      by_.push_back(2 * pb + 1);
      cx.push_back(2 * pc);
      cy.push_back(2 * pc + 1);
    }
  Id v1x = g.sub(g.gather_cols(ring, ax), g.gather_cols(ring, bx));
  Id v1y = g.sub(g.gather_cols(ring, ay_), g.gather_cols(ring, by_));
  Id v2x = g.sub(g.gather_cols(ring, bx), g.gather_cols(ring, cx));
  Id v2y = g.sub(g.gather_cols(ring, by_), g.gather_cols(ring, cy));

  Id sim_terms = g.cosine_gap(v1x, v1y, v2x, v2y);
  Id sim = g.masked_mean(g.scale(g.sum_cols(sim_terms), T(1) / T(n - 4)), pos_mask);

  Id dis_terms = g.add(g.abs(g.sub(g.abs(v1x), g.abs(v2x))), g.abs(g.sub(g.abs(v1y), g.abs(v2y))));
  Id dis = g.masked_mean(g.scale(g.sum_cols(dis_terms), T(1) / T(n - 4)), pos_mask);

  Id cls = g.masked_mean(g.softmax_cross_entropy(head.logits, classes), all_mask);

  Id total = g.add(reg, g.add(g.scale(cls, T(w.delta)),
                              g.add(g.scale(sim, T(w.beta)), g.scale(dis, T(w.gamma)))));
  return LossNodes<T>{total, reg, cls, sim, dis};
}

}  // namespace ldr
