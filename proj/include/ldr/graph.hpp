#pragma once

// Minimal reverse-mode automatic differentiation over the op set the model
// and its losses need. A Graph is a define-by-run tape: ops append nodes in
// topological order, each node carrying its output tensor plus re-runnable
// forward and backward closures. backward() walks the tape in reverse;
// recompute() re-runs every forward closure, which is what the finite
// difference checker uses after perturbing a leaf.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ldr/tensor.hpp"

namespace ldr {

enum class Padding { kSame, kValid };

template <typename T>
class Graph {
 public:
  using NodeId = int;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId leaf(TensorT<T> value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr});
    return NodeId(nodes_.size()) - 1;
  }

  const TensorT<T>& value(NodeId id) const { return nodes_[size_t(id)].out; }
  // Leaves only; used to feed inputs and to perturb parameters.
  TensorT<T>& leaf_value(NodeId id) {
    require(!nodes_[size_t(id)].fwd, "leaf_value: node is not a leaf");
    return nodes_[size_t(id)].out;
  }
  const TensorT<T>& grad(NodeId id) const { return nodes_[size_t(id)].grad; }

  int node_count() const { return int(nodes_.size()); }

  // Re-runs every non-leaf forward in tape order.
  void recompute() {
    for (auto& n : nodes_)
      if (n.fwd) n.fwd();
  }

  // Scalar loss only. Allocates/zeroes all gradient buffers, seeds the loss
  // gradient with 1 and walks the tape backwards exactly once.
  void backward(NodeId loss) {
    require(nodes_[size_t(loss)].out.size() == 1,
            cat("backward: loss must be scalar, got shape ", shape_str(nodes_[size_t(loss)].out)));
    for (auto& n : nodes_) n.grad = TensorT<T>::zeros(n.out.shape);
    nodes_[size_t(loss)].grad[0] = T(1);
    for (size_t i = nodes_.size(); i-- > 0;)
      if (nodes_[i].bwd) nodes_[i].bwd();
  }

  // ---------------------------------------------------------------------------
  // Convolutions
  // ---------------------------------------------------------------------------

  NodeId conv2d(NodeId x, NodeId k, int stride, Padding pad) {
    const auto& xs = out(x).shape;
    const auto& ks = out(k).shape;
    require(xs.size() == 4 && ks.size() == 4,
            cat("conv2d: need 4-d input/kernel, got ", shape_str(out(x)), " and ", shape_str(out(k))));
    require(xs[3] == ks[2], cat("conv2d: input channels ", xs[3], " != kernel channels ", ks[2]));
    require(stride >= 1, "conv2d: stride must be >= 1");
    ConvDims d = conv_dims(xs[1], xs[2], ks[0], ks[1], stride, pad);
    NodeId y = alloc({xs[0], d.oh, d.ow, ks[3]});
    Node& n = nodes_[size_t(y)];
    Graph* g = this;
    n.fwd = [g, x, k, y, d]() { g->conv2d_fwd(x, k, y, d); };
    n.bwd = [g, x, k, y, d]() { g->conv2d_bwd(x, k, y, d); };
    n.fwd();
    return y;
  }

  NodeId depthwise_conv2d(NodeId x, NodeId k, int stride, Padding pad) {
    const auto& xs = out(x).shape;
    const auto& ks = out(k).shape;
    require(xs.size() == 4 && ks.size() == 3,
            cat("depthwise_conv2d: need 4-d input and 3-d kernel, got ", shape_str(out(x)), " and ",
                shape_str(out(k))));
    require(xs[3] == ks[2],
            cat("depthwise_conv2d: input channels ", xs[3], " != kernel channels ", ks[2]));
    require(stride >= 1, "depthwise_conv2d: stride must be >= 1");
    ConvDims d = conv_dims(xs[1], xs[2], ks[0], ks[1], stride, pad);
    NodeId y = alloc({xs[0], d.oh, d.ow, xs[3]});
    Node& n = nodes_[size_t(y)];
    Graph* g = this;
    n.fwd = [g, x, k, y, d]() { g->depthwise_fwd(x, k, y, d); };
    n.bwd = [g, x, k, y, d]() { g->depthwise_bwd(x, k, y, d); };
    n.fwd();
    return y;
  }

  // Adds a length-C vector across the trailing dimension.
  NodeId bias_add(NodeId x, NodeId b) {
    const auto& xs = out(x).shape;
    const auto& bs = out(b).shape;
    require(bs.size() == 1 && !xs.empty() && xs.back() == bs[0],
            cat("bias_add: bias ", shape_str(out(b)), " does not match input ", shape_str(out(x))));
    NodeId y = alloc(xs);
    Graph* g = this;
    nodes_[size_t(y)].fwd = [g, x, b, y]() {
      const auto& xv = g->out(x);
      const auto& bv = g->out(b);
      auto& yv = g->out(y);
      const int c = bv.dim(0);
      for (int64_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] + bv[i % c];
    };
    nodes_[size_t(y)].bwd = [g, x, b, y]() {
      const auto& gy = g->gref(y);
      auto& gx = g->gref(x);
      auto& gb = g->gref(b);
      const int c = g->out(b).dim(0);
      for (int64_t i = 0; i < gy.size(); ++i) {
        gx[i] += gy[i];
        gb[i % c] += gy[i];
      }
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  // ---------------------------------------------------------------------------
  // Pooling / shape
  // ---------------------------------------------------------------------------

  NodeId global_avg_pool(NodeId x) {
    const auto& xs = out(x).shape;
    require(xs.size() == 4 && xs[1] >= 1 && xs[2] >= 1,
            cat("global_avg_pool: need 4-d input with spatial extent, got ", shape_str(out(x))));
    return avg_pool_to(x, 1, 1);
  }

  // Block-average downsample. The window tiling must be integral.
  NodeId avg_pool_to(NodeId x, int oh, int ow) {
    const auto& xs = out(x).shape;
    require(xs.size() == 4, cat("avg_pool_to: need 4-d input, got ", shape_str(out(x))));
    require(oh >= 1 && ow >= 1 && oh <= xs[1] && ow <= xs[2],
            cat("avg_pool_to: target ", oh, "x", ow, " out of range for ", shape_str(out(x))));
    require(xs[1] % oh == 0 && xs[2] % ow == 0,
            cat("avg_pool_to: ", xs[1], "x", xs[2], " not divisible by target ", oh, "x", ow));
    const int bh = xs[1] / oh, bw = xs[2] / ow;
    NodeId y = alloc({xs[0], oh, ow, xs[3]});
    Graph* g = this;
    nodes_[size_t(y)].fwd = [g, x, y, oh, ow, bh, bw]() {
      const auto& xv = g->out(x);
      auto& yv = g->out(y);
      const int B = xv.dim(0), C = xv.dim(3);
      const T inv = T(1) / T(bh * bw);
      for (int b = 0; b < B; ++b)
        for (int py = 0; py < oh; ++py)
          for (int px = 0; px < ow; ++px)
            for (int c = 0; c < C; ++c) {
              T acc = 0;
              for (int iy = py * bh; iy < (py + 1) * bh; ++iy)
                for (int ix = px * bw; ix < (px + 1) * bw; ++ix) acc += xv.at4(b, iy, ix, c);
              yv.at4(b, py, px, c) = acc * inv;
            }
    };
    nodes_[size_t(y)].bwd = [g, x, y, oh, ow, bh, bw]() {
      const auto& gy = g->gref(y);
      auto& gx = g->gref(x);
      const int B = gy.dim(0), C = gy.dim(3);
      const T inv = T(1) / T(bh * bw);
      for (int b = 0; b < B; ++b)
        for (int py = 0; py < oh; ++py)
          for (int px = 0; px < ow; ++px)
            for (int c = 0; c < C; ++c) {
              T gv = gy.at4(b, py, px, c) * inv;
              for (int iy = py * bh; iy < (py + 1) * bh; ++iy)
                for (int ix = px * bw; ix < (px + 1) * bw; ++ix) gx.at4(b, iy, ix, c) += gv;
            }
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  NodeId reshape(NodeId x, std::vector<int> shape) {
    require(TensorT<T>::numel(shape) == out(x).size(),
            cat("reshape: cannot view ", shape_str(out(x)), " as requested shape"));
    NodeId y = alloc(shape);
    Graph* g = this;
    nodes_[size_t(y)].fwd = [g, x, y]() { g->out(y).data = g->out(x).data; };
    nodes_[size_t(y)].bwd = [g, x, y]() {
      const auto& gy = g->gref(y);
      auto& gx = g->gref(x);
      for (int64_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  // ---------------------------------------------------------------------------
  // Dense and elementwise
  // ---------------------------------------------------------------------------

  NodeId dense(NodeId x, NodeId w) {
    const auto& xs = out(x).shape;
    const auto& ws = out(w).shape;
    require(xs.size() == 2 && ws.size() == 2 && xs[1] == ws[0],
            cat("dense: shapes ", shape_str(out(x)), " x ", shape_str(out(w)), " do not chain"));
    NodeId y = alloc({xs[0], ws[1]});
    Graph* g = this;
    nodes_[size_t(y)].fwd = [g, x, w, y]() {
      const auto& xv = g->out(x);
      const auto& wv = g->out(w);
      auto& yv = g->out(y);
      const int B = xv.dim(0), D = xv.dim(1), K = wv.dim(1);
      std::fill(yv.data.begin(), yv.data.end(), T(0));
      for (int b = 0; b < B; ++b)
        for (int d = 0; d < D; ++d) {
          T xd = xv.at2(b, d);
          const T* wr = &wv.data[size_t(int64_t(d) * K)];
          T* yr = &yv.data[size_t(int64_t(b) * K)];
          for (int k = 0; k < K; ++k) yr[k] += xd * wr[k];
        }
    };
    nodes_[size_t(y)].bwd = [g, x, w, y]() {
      const auto& xv = g->out(x);
      const auto& wv = g->out(w);
      const auto& gy = g->gref(y);
      auto& gx = g->gref(x);
      auto& gw = g->gref(w);
      const int B = xv.dim(0), D = xv.dim(1), K = wv.dim(1);
      for (int b = 0; b < B; ++b)
        for (int d = 0; d < D; ++d) {
          const T* wr = &wv.data[size_t(int64_t(d) * K)];
          const T* gyr = &gy.data[size_t(int64_t(b) * K)];
          T acc = 0;
          T xd = xv.at2(b, d);
          T* gwr = &gw.data[size_t(int64_t(d) * K)];
          for (int k = 0; k < K; ++k) {
            acc += gyr[k] * wr[k];
            gwr[k] += xd * gyr[k];
          }
          gx.at2(b, d) += acc;
        }
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  NodeId relu6(NodeId x) {
    return unary(x, [](T v) { return v < T(0) ? T(0) : (v > T(6) ? T(6) : v); },
                 [](T v, T) { return (v > T(0) && v < T(6)) ? T(1) : T(0); });
  }

  NodeId sigmoid(NodeId x) {
    return unary(x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
                 [](T, T y) { return y * (T(1) - y); });
  }

  NodeId abs(NodeId x) {
    return unary(x, [](T v) { return v < T(0) ? -v : v; },
                 [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
  }

  NodeId scale(NodeId x, T c) {
    return unary(x, [c](T v) { return c * v; }, [c](T, T) { return c; });
  }

  NodeId add(NodeId a, NodeId b) {
    return binary(a, b, [](T x, T y) { return x + y; },
                  [](T, T, T gy) { return std::pair<T, T>{gy, gy}; });
  }

  NodeId sub(NodeId a, NodeId b) {
    return binary(a, b, [](T x, T y) { return x - y; },
                  [](T, T, T gy) { return std::pair<T, T>{gy, -gy}; });
  }

  NodeId mul(NodeId a, NodeId b) {
    return binary(a, b, [](T x, T y) { return x * y; },
                  [](T x, T y, T gy) { return std::pair<T, T>{gy * y, gy * x}; });
  }

  // ---------------------------------------------------------------------------
  // Column ops on [B, D] tensors
  // ---------------------------------------------------------------------------

  NodeId concat_cols(NodeId a, NodeId b) {
    const auto& as = out(a).shape;
    const auto& bs = out(b).shape;
    require(as.size() == 2 && bs.size() == 2 && as[0] == bs[0],
            cat("concat_cols: shapes ", shape_str(out(a)), " and ", shape_str(out(b)), " do not stack"));
    NodeId y = alloc({as[0], as[1] + bs[1]});
    Graph* g = this;
    nodes_[size_t(y)].fwd = [g, a, b, y]() {
      const auto& av = g->out(a);
      const auto& bv = g->out(b);
      auto& yv = g->out(y);
      const int B = av.dim(0), Da = av.dim(1), Db = bv.dim(1);
      for (int r = 0; r < B; ++r) {
        for (int c = 0; c < Da; ++c) yv.at2(r, c) = av.at2(r, c);
        for (int c = 0; c < Db; ++c) yv.at2(r, Da + c) = bv.at2(r, c);
      }
    };
    nodes_[size_t(y)].bwd = [g, a, b, y]() {
      const auto& gy = g->gref(y);
      auto& ga = g->gref(a);
      auto& gb = g->gref(b);
      const int B = ga.dim(0), Da = ga.dim(1), Db = gb.dim(1);
      for (int r = 0; r < B; ++r) {
        for (int c = 0; c < Da; ++c) ga.at2(r, c) += gy.at2(r, c);
        for (int c = 0; c < Db; ++c) gb.at2(r, c) += gy.at2(r, Da + c);
      }
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  NodeId gather_cols(NodeId x, std::vector<int> idx) {
    const auto& xs = out(x).shape;
    require(xs.size() == 2, cat("gather_cols: need 2-d input, got ", shape_str(out(x))));
    for (int i : idx) require(i >= 0 && i < xs[1], cat("gather_cols: index ", i, " out of range ", xs[1]));
    NodeId y = alloc({xs[0], int(idx.size())});
    Graph* g = this;
    auto ix = std::make_shared<std::vector<int>>(std::move(idx));
    nodes_[size_t(y)].fwd = [g, x, y, ix]() {
      const auto& xv = g->out(x);
      auto& yv = g->out(y);
      const int B = xv.dim(0), M = int(ix->size());
      for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m) yv.at2(b, m) = xv.at2(b, (*ix)[size_t(m)]);
    };
    nodes_[size_t(y)].bwd = [g, x, y, ix]() {
      const auto& gy = g->gref(y);
      auto& gx = g->gref(x);
      const int B = gy.dim(0), M = int(ix->size());
      for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m) gx.at2(b, (*ix)[size_t(m)]) += gy.at2(b, m);
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  NodeId slice_cols(NodeId x, int from, int len) {
    const auto& xs = out(x).shape;
    require(xs.size() == 2 && from >= 0 && len >= 0 && from + len <= xs[1],
            cat("slice_cols: [", from, ", ", from + len, ") out of range for ", shape_str(out(x))));
    std::vector<int> idx(size_t(len), 0);
    for (int i = 0; i < len; ++i) idx[size_t(i)] = from + i;
    return gather_cols(x, std::move(idx));
  }

  // Row sums: [B, M] -> [B].
  NodeId sum_cols(NodeId x) {
    const auto& xs = out(x).shape;
    require(xs.size() == 2, cat("sum_cols: need 2-d input, got ", shape_str(out(x))));
    NodeId y = alloc({xs[0]});
    Graph* g = this;
    nodes_[size_t(y)].fwd = [g, x, y]() {
      const auto& xv = g->out(x);
      auto& yv = g->out(y);
      const int B = xv.dim(0), M = xv.dim(1);
      for (int b = 0; b < B; ++b) {
        T acc = 0;
        for (int m = 0; m < M; ++m) acc += xv.at2(b, m);
        yv[b] = acc;
      }
    };
    nodes_[size_t(y)].bwd = [g, x, y]() {
      const auto& gy = g->gref(y);
      auto& gx = g->gref(x);
      const int B = gx.dim(0), M = gx.dim(1);
      for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m) gx.at2(b, m) += gy[b];
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  // Mean of masked entries of a [B] vector; 0 when the mask is empty.
  NodeId masked_mean(NodeId x, std::vector<T> mask) {
    const auto& xs = out(x).shape;
    require(xs.size() == 1 && xs[0] == int(mask.size()),
            cat("masked_mean: mask size ", mask.size(), " does not match ", shape_str(out(x))));
    NodeId y = alloc({1});
    Graph* g = this;
    auto m = std::make_shared<std::vector<T>>(std::move(mask));
    nodes_[size_t(y)].fwd = [g, x, y, m]() {
      const auto& xv = g->out(x);
      auto& yv = g->out(y);
      T total = 0, count = 0;
      for (size_t i = 0; i < m->size(); ++i) {
        total += (*m)[i] * xv[int64_t(i)];
        count += (*m)[i];
      }
      yv[0] = count > T(0) ? total / count : T(0);
    };
    nodes_[size_t(y)].bwd = [g, x, y, m]() {
      const auto& gy = g->gref(y);
      auto& gx = g->gref(x);
      T count = 0;
      for (T v : *m) count += v;
      if (count <= T(0)) return;
      for (size_t i = 0; i < m->size(); ++i) gx[int64_t(i)] += gy[0] * (*m)[i] / count;
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  // ---------------------------------------------------------------------------
  // Losses
  // ---------------------------------------------------------------------------

  // Per-sample -log softmax(logits)[label], max-subtracted: [B, K] -> [B].
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
    const auto& ls = out(logits).shape;
    require(ls.size() == 2 && ls[0] == int(labels.size()),
            cat("softmax_cross_entropy: ", labels.size(), " labels vs logits ", shape_str(out(logits))));
    for (int c : labels)
      require(c >= 0 && c < ls[1], cat("softmax_cross_entropy: class ", c, " out of range ", ls[1]));
    NodeId y = alloc({ls[0]});
    Graph* g = this;
    auto lab = std::make_shared<std::vector<int>>(std::move(labels));
    nodes_[size_t(y)].fwd = [g, logits, y, lab]() {
      const auto& lv = g->out(logits);
      auto& yv = g->out(y);
      const int B = lv.dim(0), K = lv.dim(1);
      for (int b = 0; b < B; ++b) {
        T mx = lv.at2(b, 0);
        for (int k = 1; k < K; ++k) mx = std::max(mx, lv.at2(b, k));
        T lse = 0;
        for (int k = 0; k < K; ++k) lse += std::exp(lv.at2(b, k) - mx);
        yv[b] = mx + std::log(lse) - lv.at2(b, (*lab)[size_t(b)]);
      }
    };
    nodes_[size_t(y)].bwd = [g, logits, y, lab]() {
      const auto& lv = g->out(logits);
      const auto& gy = g->gref(y);
      auto& gl = g->gref(logits);
      const int B = lv.dim(0), K = lv.dim(1);
      for (int b = 0; b < B; ++b) {
        T mx = lv.at2(b, 0);
        for (int k = 1; k < K; ++k) mx = std::max(mx, lv.at2(b, k));
        T lse = 0;
        for (int k = 0; k < K; ++k) lse += std::exp(lv.at2(b, k) - mx);
        for (int k = 0; k < K; ++k) {
          T soft = std::exp(lv.at2(b, k) - mx) / lse;
          gl.at2(b, k) += gy[b] * (soft - T(k == (*lab)[size_t(b)]));
        }
      }
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  // Collinearity penalty 1 - cos(v1, v2), elementwise over four same-shape
  // [B, M] vector-component tensors. Coincident points (|v1||v2| below the
  // guard) contribute 0 with zero subgradient, which keeps the similarity
  // loss well-defined at its optimum.
  NodeId cosine_gap(NodeId v1x, NodeId v1y, NodeId v2x, NodeId v2y) {
    const auto& s = out(v1x).shape;
    require(s.size() == 2 && out(v1y).shape == s && out(v2x).shape == s && out(v2y).shape == s,
            "cosine_gap: all four component tensors must share one [B, M] shape");
    NodeId y = alloc(s);
    Graph* g = this;
    nodes_[size_t(y)].fwd = [g, v1x, v1y, v2x, v2y, y]() {
      const auto& ax = g->out(v1x);
      const auto& ay = g->out(v1y);
      const auto& bx = g->out(v2x);
      const auto& by = g->out(v2y);
      auto& yv = g->out(y);
      for (int64_t i = 0; i < ax.size(); ++i) {
        T n1 = std::sqrt(ax[i] * ax[i] + ay[i] * ay[i]);
        T n2 = std::sqrt(bx[i] * bx[i] + by[i] * by[i]);
        T nn = n1 * n2;
        yv[i] = nn <= kCoincidentGuard ? T(0) : T(1) - (ax[i] * bx[i] + ay[i] * by[i]) / nn;
      }
    };
    nodes_[size_t(y)].bwd = [g, v1x, v1y, v2x, v2y, y]() {
      const auto& ax = g->out(v1x);
      const auto& ay = g->out(v1y);
      const auto& bx = g->out(v2x);
      const auto& by = g->out(v2y);
      const auto& gy = g->gref(y);
      auto& gax = g->gref(v1x);
      auto& gay = g->gref(v1y);
      auto& gbx = g->gref(v2x);
      auto& gby = g->gref(v2y);
      for (int64_t i = 0; i < ax.size(); ++i) {
        T n1 = std::sqrt(ax[i] * ax[i] + ay[i] * ay[i]);
        T n2 = std::sqrt(bx[i] * bx[i] + by[i] * by[i]);
        T nn = n1 * n2;
        if (nn <= kCoincidentGuard) continue;
        T d = ax[i] * bx[i] + ay[i] * by[i];
        // y = 1 - d/(n1 n2); dy = -(d cos)/dv.
        T gv = gy[i];
        gax[i] += gv * -(bx[i] / nn - d * ax[i] / (n1 * n1 * nn));
        gay[i] += gv * -(by[i] / nn - d * ay[i] / (n1 * n1 * nn));
        gbx[i] += gv * -(ax[i] / nn - d * bx[i] / (n2 * n2 * nn));
        gby[i] += gv * -(ay[i] / nn - d * by[i] / (n2 * n2 * nn));
      }
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

 private:
  static constexpr T kCoincidentGuard = T(1e-12);

  struct Node {
    TensorT<T> out;
    TensorT<T> grad;
    std::function<void()> fwd;
    std::function<void()> bwd;
  };

  std::vector<Node> nodes_;

  TensorT<T>& out(NodeId id) { return nodes_[size_t(id)].out; }
  const TensorT<T>& out(NodeId id) const { return nodes_[size_t(id)].out; }
  TensorT<T>& gref(NodeId id) { return nodes_[size_t(id)].grad; }

  NodeId alloc(std::vector<int> shape) {
    nodes_.push_back(Node{TensorT<T>::zeros(std::move(shape)), {}, nullptr, nullptr});
    return NodeId(nodes_.size()) - 1;
  }

  template <typename F, typename DF>
  NodeId unary(NodeId x, F f, DF df) {
    NodeId y = alloc(out(x).shape);
    Graph* g = this;
    nodes_[size_t(y)].fwd = [g, x, y, f]() {
      const auto& xv = g->out(x);
      auto& yv = g->out(y);
      for (int64_t i = 0; i < xv.size(); ++i) yv[i] = f(xv[i]);
    };
    nodes_[size_t(y)].bwd = [g, x, y, df]() {
      const auto& xv = g->out(x);
      const auto& yv = g->out(y);
      const auto& gy = g->gref(y);
      auto& gx = g->gref(x);
      for (int64_t i = 0; i < xv.size(); ++i) gx[i] += gy[i] * df(xv[i], yv[i]);
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  template <typename F, typename DF>
  NodeId binary(NodeId a, NodeId b, F f, DF df) {
    require(out(a).same_shape(out(b)),
            cat("elementwise op: shape mismatch ", shape_str(out(a)), " vs ", shape_str(out(b))));
    NodeId y = alloc(out(a).shape);
    Graph* g = this;
    nodes_[size_t(y)].fwd = [g, a, b, y, f]() {
      const auto& av = g->out(a);
      const auto& bv = g->out(b);
      auto& yv = g->out(y);
      for (int64_t i = 0; i < av.size(); ++i) yv[i] = f(av[i], bv[i]);
    };
    nodes_[size_t(y)].bwd = [g, a, b, y, df]() {
      const auto& av = g->out(a);
      const auto& bv = g->out(b);
      const auto& gy = g->gref(y);
      auto& ga = g->gref(a);
      auto& gb = g->gref(b);
      for (int64_t i = 0; i < av.size(); ++i) {
        auto [da, db] = df(av[i], bv[i], gy[i]);
        ga[i] += da;
        gb[i] += db;
      }
    };
    nodes_[size_t(y)].fwd();
    return y;
  }

  struct ConvDims {
    int kh, kw, stride, oh, ow, pt, pl;
  };

  static ConvDims conv_dims(int h, int w, int kh, int kw, int stride, Padding pad) {
    ConvDims d{kh, kw, stride, 0, 0, 0, 0};
    if (pad == Padding::kSame) {
      d.oh = (h + stride - 1) / stride;
      d.ow = (w + stride - 1) / stride;
      int ph = std::max(0, (d.oh - 1) * stride + kh - h);
      int pw = std::max(0, (d.ow - 1) * stride + kw - w);
      d.pt = ph / 2;
      d.pl = pw / 2;
    } else {
      require(h >= kh && w >= kw,
              cat("conv: valid padding needs input ", h, "x", w, " >= kernel ", kh, "x", kw));
      d.oh = (h - kh) / stride + 1;
      d.ow = (w - kw) / stride + 1;
    }
    return d;
  }

  void conv2d_fwd(NodeId x, NodeId k, NodeId y, ConvDims d) {
    const auto& xv = out(x);
    const auto& kv = out(k);
    auto& yv = out(y);
    const int B = xv.dim(0), H = xv.dim(1), W = xv.dim(2), Ci = xv.dim(3);
    const int Co = kv.dim(3);
    std::fill(yv.data.begin(), yv.data.end(), T(0));
    for (int b = 0; b < B; ++b)
      for (int oy = 0; oy < d.oh; ++oy)
        for (int ox = 0; ox < d.ow; ++ox) {
          T* yr = &yv.at4(b, oy, ox, 0);
          for (int ky = 0; ky < d.kh; ++ky) {
            int iy = oy * d.stride + ky - d.pt;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < d.kw; ++kx) {
              int ix = ox * d.stride + kx - d.pl;
              if (ix < 0 || ix >= W) continue;
              const T* xr = &xv.at4(b, iy, ix, 0);
              const T* kr = &kv.data[size_t(((int64_t(ky) * d.kw + kx) * Ci) * Co)];
              for (int ci = 0; ci < Ci; ++ci) {
                T xc = xr[ci];
                const T* krow = kr + int64_t(ci) * Co;
                for (int co = 0; co < Co; ++co) yr[co] += xc * krow[co];
              }
            }
          }
        }
  }

  void conv2d_bwd(NodeId x, NodeId k, NodeId y, ConvDims d) {
    const auto& xv = out(x);
    const auto& kv = out(k);
    const auto& gy = gref(y);
    auto& gx = gref(x);
    auto& gk = gref(k);
    const int B = xv.dim(0), H = xv.dim(1), W = xv.dim(2), Ci = xv.dim(3);
    const int Co = kv.dim(3);
    for (int b = 0; b < B; ++b)
      for (int oy = 0; oy < d.oh; ++oy)
        for (int ox = 0; ox < d.ow; ++ox) {
          const T* gyr = &gy.at4(b, oy, ox, 0);
          for (int ky = 0; ky < d.kh; ++ky) {
            int iy = oy * d.stride + ky - d.pt;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < d.kw; ++kx) {
              int ix = ox * d.stride + kx - d.pl;
              if (ix < 0 || ix >= W) continue;
              const T* xr = &xv.at4(b, iy, ix, 0);
              T* gxr = &gx.at4(b, iy, ix, 0);
              const int64_t koff = (int64_t(ky) * d.kw + kx) * Ci * Co;
              for (int ci = 0; ci < Ci; ++ci) {
                const T* krow = &kv.data[size_t(koff + int64_t(ci) * Co)];
                T* gkrow = &gk.data[size_t(koff + int64_t(ci) * Co)];
                T xc = xr[ci];
                T gacc = 0;
                for (int co = 0; co < Co; ++co) {
                  gacc += gyr[co] * krow[co];
                  gkrow[co] += xc * gyr[co];
                }
                gxr[ci] += gacc;
              }
            }
          }
        }
  }

  void depthwise_fwd(NodeId x, NodeId k, NodeId y, ConvDims d) {
    const auto& xv = out(x);
    const auto& kv = out(k);
    auto& yv = out(y);
    const int B = xv.dim(0), H = xv.dim(1), W = xv.dim(2), C = xv.dim(3);
    std::fill(yv.data.begin(), yv.data.end(), T(0));
    for (int b = 0; b < B; ++b)
      for (int oy = 0; oy < d.oh; ++oy)
        for (int ox = 0; ox < d.ow; ++ox) {
          T* yr = &yv.at4(b, oy, ox, 0);
          for (int ky = 0; ky < d.kh; ++ky) {
            int iy = oy * d.stride + ky - d.pt;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < d.kw; ++kx) {
              int ix = ox * d.stride + kx - d.pl;
              if (ix < 0 || ix >= W) continue;
              const T* xr = &xv.at4(b, iy, ix, 0);
              const T* kr = &kv.data[size_t((int64_t(ky) * d.kw + kx) * C)];
              for (int c = 0; c < C; ++c) yr[c] += xr[c] * kr[c];
            }
          }
        }
  }

  void depthwise_bwd(NodeId x, NodeId k, NodeId y, ConvDims d) {
    const auto& xv = out(x);
    const auto& kv = out(k);
    const auto& gy = gref(y);
    auto& gx = gref(x);
    auto& gk = gref(k);
    const int B = xv.dim(0), H = xv.dim(1), W = xv.dim(2), C = xv.dim(3);
    for (int b = 0; b < B; ++b)
      for (int oy = 0; oy < d.oh; ++oy)
        for (int ox = 0; ox < d.ow; ++ox) {
          const T* gyr = &gy.at4(b, oy, ox, 0);
          for (int ky = 0; ky < d.kh; ++ky) {
            int iy = oy * d.stride + ky - d.pt;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < d.kw; ++kx) {
              int ix = ox * d.stride + kx - d.pl;
              if (ix < 0 || ix >= W) continue;
              const T* xr = &xv.at4(b, iy, ix, 0);
              T* gxr = &gx.at4(b, iy, ix, 0);
              const int64_t koff = (int64_t(ky) * d.kw + kx) * C;
              const T* kr = &kv.data[size_t(koff)];
              T* gkr = &gk.data[size_t(koff)];
              for (int c = 0; c < C; ++c) {
                gxr[c] += gyr[c] * kr[c];
                gkr[c] += xr[c] * gyr[c];
              }
            }
          }
        }
  }
};

// Max relative error between reverse-mode and central finite-difference
// gradients of `loss` with respect to every element of leaf `param`.
// Runs backward() itself; restores the leaf afterwards.
template <typename T>
double finite_difference_check(Graph<T>& g, typename Graph<T>::NodeId loss,
                               typename Graph<T>::NodeId param, double eps,
                               double denom_floor = 1e-6) {
  g.recompute();
  g.backward(loss);
  TensorT<T> analytic = g.grad(param);
  TensorT<T>& pv = g.leaf_value(param);
  double worst = 0.0;
  for (int64_t i = 0; i < pv.size(); ++i) {
    T saved = pv[i];
    pv[i] = saved + T(eps);
    g.recompute();
    double up = double(g.value(loss)[0]);
    pv[i] = saved - T(eps);
    g.recompute();
    double dn = double(g.value(loss)[0]);
    pv[i] = saved;
    double fd = (up - dn) / (2.0 * eps);
    double ad = double(analytic[i]);
    double err = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), denom_floor});
    worst = std::max(worst, err);
  }
  g.recompute();
  return worst;
}

}  // namespace ldr
