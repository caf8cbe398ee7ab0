#pragma once

// The document-localization network: a width-scalable depthwise-separable
// backbone with five stride-2 stages, a feature fusion module that pools,
// projects and sums the five taps, and a single dense head emitting the
// corner, border and classification branches as one vector.
//
// Checkpoints are value types holding the architecture config plus named
// weight tensors; the on-disk format is an 8-byte magic, a length-prefixed
// JSON directory and raw little-endian float32 payloads.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldr/geometry.hpp"
#include "ldr/graph.hpp"
#include "ldr/rng.hpp"
#include "ldr/tensor.hpp"

namespace ldr {

// Normalized coordinates are squeezed through an affine map before the
// sigmoid head so that moderately out-of-frame points stay representable:
// frame range [-0.2, 1.2] maps onto (0, 1).
constexpr double kCoordLo = -0.2;
constexpr double kCoordHi = 1.2;

inline double encode_coord(double v) {
  double c = std::clamp(v, kCoordLo, kCoordHi);
  return (c - kCoordLo) / (kCoordHi - kCoordLo);
}

inline double decode_coord(double u) { return u * (kCoordHi - kCoordLo) + kCoordLo; }

struct ModelConfig {
  double alpha = 0.35;
  int n_points = 28;
  int n_cls = 2;
  int input_hw = 64;
  bool fusion_enabled = true;
  bool stage_extra_block = false;  // stride-1 depthwise-separable block per stage
  std::array<int, 5> stage_channels = {16, 24, 32, 96, 320};  // pre-alpha base widths
  int fused_width = 128;
  int tail_channels = 256;

  int stage_width(int s) const {
    return std::max(8, int(std::lround(alpha * stage_channels[size_t(s)])));
  }
  int head_inputs() const { return fusion_enabled ? fused_width : tail_channels; }
  int border_outputs() const { return 2 * (n_points - 4); }
  int head_outputs_full() const { return 8 + border_outputs() + n_cls; }
  int head_outputs_pruned() const { return 8 + n_cls; }

  void validate() const {
    require(alpha > 0.0, cat("model config: alpha must be > 0, got ", alpha));
    require(n_points >= 8 && n_points % 4 == 0,
            cat("model config: n_points must be a multiple of 4 and >= 8, got ", n_points));
    require(n_cls >= 2, cat("model config: n_cls must be >= 2, got ", n_cls));
    require(input_hw >= 32 && input_hw % 32 == 0,
            cat("model config: input_hw must be a positive multiple of 32, got ", input_hw));
    require(fused_width >= 1 && tail_channels >= 1, "model config: head widths must be >= 1");
    for (int c : stage_channels) require(c >= 1, "model config: stage channels must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"alpha", alpha},
            {"n_points", n_points},
            {"n_cls", n_cls},
            {"input_hw", input_hw},
            {"fusion_enabled", fusion_enabled},
            {"stage_extra_block", stage_extra_block},
            {"stage_channels", stage_channels},
            {"fused_width", fused_width},
            {"tail_channels", tail_channels}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.alpha = j.at("alpha").get<double>();
    c.n_points = j.at("n_points").get<int>();
    c.n_cls = j.at("n_cls").get<int>();
    c.input_hw = j.at("input_hw").get<int>();
    c.fusion_enabled = j.at("fusion_enabled").get<bool>();
    c.stage_extra_block = j.value("stage_extra_block", false);
    auto sc = j.at("stage_channels").get<std::vector<int>>();
    require(sc.size() == 5, "model config: stage_channels must have 5 entries");
    std::copy(sc.begin(), sc.end(), c.stage_channels.begin());
    c.fused_width = j.at("fused_width").get<int>();
    c.tail_channels = j.at("tail_channels").get<int>();
    return c;
  }
};

struct Checkpoint {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;  // sorted: directory order on disk
  int format_version = 1;
  bool has_train_state = false;
  int next_epoch = 0;
};

struct ModelOutput {
  Tensor corners;  // [B, 8], sigmoid activated
  Tensor borders;  // [B, 2(N-4)], sigmoid activated; [B, 0] for pruned models
  Tensor logits;   // [B, n_cls], raw
};

// -----------------------------------------------------------------------------
// Parameter inventory
// -----------------------------------------------------------------------------

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in = 0;
  int fan_out = 0;
  bool xavier = false;  // final dense layer
  bool bias = false;
};

inline std::vector<ParamSpec> param_specs(const ModelConfig& cfg, bool pruned = false) {
  cfg.validate();
  std::vector<ParamSpec> specs;
  int cin = 3;
  for (int s = 0; s < 5; ++s) {
    int cout = cfg.stage_width(s);
    std::string base = cat("backbone.s", s);
    specs.push_back({base + ".dw.w", {3, 3, cin}, 9, 9, false, false});
    specs.push_back({base + ".dw.b", {cin}, 9, 0, false, true});
    specs.push_back({base + ".pw.w", {1, 1, cin, cout}, cin, cout, false, false});
    specs.push_back({base + ".pw.b", {cout}, cin, 0, false, true});
    if (cfg.stage_extra_block) {
      specs.push_back({base + ".dw2.w", {3, 3, cout}, 9, 9, false, false});
      specs.push_back({base + ".dw2.b", {cout}, 9, 0, false, true});
      specs.push_back({base + ".pw2.w", {1, 1, cout, cout}, cout, cout, false, false});
      specs.push_back({base + ".pw2.b", {cout}, cout, 0, false, true});
    }
    cin = cout;
  }
  if (cfg.fusion_enabled) {
    for (int s = 0; s < 5; ++s) {
      int w = cfg.stage_width(s);
      specs.push_back(
          {cat("fuse.p", s, ".w"), {1, 1, w, cfg.fused_width}, w, cfg.fused_width, false, false});
      specs.push_back({cat("fuse.p", s, ".b"), {cfg.fused_width}, w, 0, false, true});
    }
  } else {
    specs.push_back({"tail.w", {1, 1, cfg.stage_width(4), cfg.tail_channels},
                     cfg.stage_width(4), cfg.tail_channels, false, false});
    specs.push_back({"tail.b", {cfg.tail_channels}, cfg.stage_width(4), 0, false, true});
  }
  int d = cfg.head_inputs();
  int k = pruned ? cfg.head_outputs_pruned() : cfg.head_outputs_full();
  specs.push_back({"head.w", {d, k}, d, k, true, false});
  specs.push_back({"head.b", {k}, d, 0, false, true});
  return specs;
}

inline bool is_pruned(const Checkpoint& ckpt) {
  auto it = ckpt.tensors.find("head.w");
  require(it != ckpt.tensors.end(), "checkpoint is missing head.w");
  return it->second.dim(1) == ckpt.config.head_outputs_pruned();
}

inline int64_t param_count(const Checkpoint& ckpt) {
  int64_t n = 0;
  for (const auto& [name, t] : ckpt.tensors)
    if (name.rfind("opt.", 0) != 0) n += t.size();
  return n;
}

inline void validate_checkpoint(const Checkpoint& ckpt) {
  bool pruned = is_pruned(ckpt);
  for (const auto& spec : param_specs(ckpt.config, pruned)) {
    auto it = ckpt.tensors.find(spec.name);
    if (it == ckpt.tensors.end()) throw DataError(cat("checkpoint is missing tensor ", spec.name));
    if (it->second.shape != spec.shape)
      throw DataError(cat("checkpoint tensor ", spec.name, " has shape ", shape_str(it->second),
                          ", expected another shape for this config"));
  }
}

// Fan-based uniform init: conv kernels U(+-sqrt(6/fan_in)), the final dense
// layer Xavier U(+-sqrt(6/(fan_in+fan_out))), biases U(+-1/sqrt(fan_in)) of
// their layer. Nonzero biases keep preactivations off the relu6 kinks, which
// matters for the gradient checks. Bit-deterministic for a fixed seed: each
// tensor draws from its own (seed, name-hash) stream.
inline Checkpoint build_model(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Checkpoint ckpt;
  ckpt.config = cfg;
  for (const auto& spec : param_specs(cfg)) {
    Tensor t = Tensor::zeros(spec.shape);
    if (spec.fan_in > 0) {
      double limit = spec.bias ? 1.0 / std::sqrt(double(spec.fan_in))
                   : spec.xavier ? std::sqrt(6.0 / double(spec.fan_in + spec.fan_out))
                                 : std::sqrt(6.0 / double(spec.fan_in));
      Rng rng(seed, stream::kInit ^ fnv1a64(spec.name));
      for (auto& v : t.data) v = float(rng.uniform(-limit, limit));
    }
    ckpt.tensors.emplace(spec.name, std::move(t));
  }
  return ckpt;
}

// -----------------------------------------------------------------------------
// Forward graph
// -----------------------------------------------------------------------------

template <typename T>
struct HeadNodes {
  typename Graph<T>::NodeId corners = -1;
  typename Graph<T>::NodeId borders = -1;  // -1 for pruned checkpoints
  typename Graph<T>::NodeId logits = -1;
};

// Registers every checkpoint weight as a leaf; returns name -> node.
template <typename T>
std::map<std::string, typename Graph<T>::NodeId> weights_to_graph(Graph<T>& g,
                                                                  const Checkpoint& ckpt) {
  std::map<std::string, typename Graph<T>::NodeId> ids;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("opt.", 0) == 0) continue;
    ids.emplace(name, g.leaf(t.template cast<T>()));
  }
  return ids;
}

// Feature fusion: every tap is block-average-pooled to the deepest tap's
// spatial size, projected to fused_width by a 1x1 convolution, the five
// results summed, then globally average-pooled to a [B, fused_width] vector.
template <typename T>
typename Graph<T>::NodeId fuse_features(Graph<T>& g, const ModelConfig& cfg,
                                        const std::map<std::string, typename Graph<T>::NodeId>& w,
                                        const std::array<typename Graph<T>::NodeId, 5>& taps) {
  using Id = typename Graph<T>::NodeId;
  auto p = [&](const std::string& name) {
    auto it = w.find(name);
    require(it != w.end(), cat("fuse_features: missing weight ", name));
    return it->second;
  };
  const int m = g.value(taps[4]).dim(1);  // deepest tap's spatial side
  Id acc = -1;
  for (int s = 0; s < 5; ++s) {
    Id t = g.avg_pool_to(taps[size_t(s)], m, m);
    t = g.bias_add(g.conv2d(t, p(cat("fuse.p", s, ".w")), 1, Padding::kSame),
                   p(cat("fuse.p", s, ".b")));
    acc = s == 0 ? t : g.add(acc, t);
  }
  Id pooled = g.global_avg_pool(acc);
  return g.reshape(pooled, {g.value(pooled).dim(0), cfg.fused_width});
}

template <typename T>
HeadNodes<T> build_forward(Graph<T>& g, const ModelConfig& cfg,
                           const std::map<std::string, typename Graph<T>::NodeId>& w,
                           typename Graph<T>::NodeId images, bool pruned) {
  using Id = typename Graph<T>::NodeId;
  auto p = [&](const std::string& name) {
    auto it = w.find(name);
    require(it != w.end(), cat("forward: missing weight ", name));
    return it->second;
  };

  Id x = images;
  std::array<Id, 5> taps{};
  for (int s = 0; s < 5; ++s) {
    std::string base = cat("backbone.s", s);
    x = g.relu6(g.bias_add(g.depthwise_conv2d(x, p(base + ".dw.w"), 2, Padding::kSame),
                           p(base + ".dw.b")));
    x = g.relu6(g.bias_add(g.conv2d(x, p(base + ".pw.w"), 1, Padding::kSame), p(base + ".pw.b")));
    if (cfg.stage_extra_block) {
      x = g.relu6(g.bias_add(g.depthwise_conv2d(x, p(base + ".dw2.w"), 1, Padding::kSame),
                             p(base + ".dw2.b")));
      x = g.relu6(
          g.bias_add(g.conv2d(x, p(base + ".pw2.w"), 1, Padding::kSame), p(base + ".pw2.b")));
    }
    taps[size_t(s)] = x;
  }

  Id feat;
  if (cfg.fusion_enabled) {
    feat = fuse_features(g, cfg, w, taps);
  } else {
    Id t = g.relu6(g.bias_add(g.conv2d(taps[4], p("tail.w"), 1, Padding::kSame), p("tail.b")));
    Id pooled = g.global_avg_pool(t);
    feat = g.reshape(pooled, {g.value(pooled).dim(0), cfg.tail_channels});
  }

  Id head = g.bias_add(g.dense(feat, p("head.w")), p("head.b"));
  HeadNodes<T> out;
  out.corners = g.sigmoid(g.slice_cols(head, 0, 8));
  if (pruned) {
    out.logits = g.slice_cols(head, 8, cfg.n_cls);
  } else {
    out.borders = g.sigmoid(g.slice_cols(head, 8, cfg.border_outputs()));
    out.logits = g.slice_cols(head, 8 + cfg.border_outputs(), cfg.n_cls);
  }
  return out;
}

// Pure inference forward. Pixel values must be pre-scaled to [0, 1].
inline ModelOutput forward(const Checkpoint& ckpt, const Tensor& images) {
  const auto& s = images.shape;
  require(s.size() == 4 && s[1] == ckpt.config.input_hw && s[2] == ckpt.config.input_hw && s[3] == 3,
          cat("forward: expected images [B,", ckpt.config.input_hw, ",", ckpt.config.input_hw,
              ",3], got ", shape_str(images)));
  bool pruned = is_pruned(ckpt);
  Graph<float> g;
  auto w = weights_to_graph(g, ckpt);
  auto img = g.leaf(images);
  auto head = build_forward(g, ckpt.config, w, img, pruned);
  ModelOutput out;
  out.corners = g.value(head.corners);
  out.borders = pruned ? Tensor::zeros({s[0], 0}) : g.value(head.borders);
  out.logits = g.value(head.logits);
  return out;
}

// De-normalizes the corner branch of a single image to pixel units and takes
// the argmax class.
inline std::pair<Quad, int> predict_quad(const Checkpoint& ckpt, const Tensor& image,
                                         double image_w, double image_h) {
  require(image.rank() == 3, cat("predict_quad: expected one [S,S,3] image, got ", shape_str(image)));
  Tensor batch;
  batch.shape = {1, image.dim(0), image.dim(1), image.dim(2)};
  batch.data = image.data;
  ModelOutput out = forward(ckpt, batch);
  Quad quad;
  for (int i = 0; i < 4; ++i) {
    quad.corners[size_t(i)].x = decode_coord(double(out.corners.at2(0, 2 * i))) * image_w;
    quad.corners[size_t(i)].y = decode_coord(double(out.corners.at2(0, 2 * i + 1))) * image_h;
  }
  int best = 0;
  for (int c = 1; c < ckpt.config.n_cls; ++c)
    if (out.logits.at2(0, c) > out.logits.at2(0, best)) best = c;
  return {quad, best};
}

// Drops the border rows of the final dense layer (unused at inference) and
// any optimizer state. Idempotent.
inline Checkpoint prune_for_inference(const Checkpoint& ckpt) {
  Checkpoint out;
  out.config = ckpt.config;
  out.format_version = ckpt.format_version;
  if (is_pruned(ckpt)) {
    for (const auto& [name, t] : ckpt.tensors)
      if (name.rfind("opt.", 0) != 0) out.tensors.emplace(name, t);
    return out;
  }
  const int nb = ckpt.config.border_outputs();
  const int n_cls = ckpt.config.n_cls;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("opt.", 0) == 0) continue;
    if (name == "head.w") {
      const int d = t.dim(0), k = t.dim(1);
      Tensor w = Tensor::zeros({d, 8 + n_cls});
      for (int r = 0; r < d; ++r) {
        for (int c = 0; c < 8; ++c) w.at2(r, c) = t.at2(r, c);
        for (int c = 0; c < n_cls; ++c) w.at2(r, 8 + c) = t.at2(r, 8 + nb + c);
      }
      (void)k;
      out.tensors.emplace(name, std::move(w));
    } else if (name == "head.b") {
      Tensor b = Tensor::zeros({8 + n_cls});
      for (int c = 0; c < 8; ++c) b[c] = t[c];
      for (int c = 0; c < n_cls; ++c) b[8 + c] = t[8 + nb + c];
      out.tensors.emplace(name, std::move(b));
    } else {
      out.tensors.emplace(name, t);
    }
  }
  return out;
}

// -----------------------------------------------------------------------------
// Checkpoint serialization
// -----------------------------------------------------------------------------

namespace detail {

constexpr char kCkptMagic[8] = {'L', 'D', 'R', 'C', 'K', 'P', 'T', '1'};

inline void put_u64_le(std::string& s, uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

inline uint64_t get_u64_le(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
  return v;
}

inline void append_f32_le(std::string& s, const std::vector<float>& data) {
  static_assert(sizeof(float) == 4);
  if constexpr (std::endian::native == std::endian::little) {
    s.append(reinterpret_cast<const char*>(data.data()), data.size() * 4);
  } else {
    for (float f : data) {
      uint32_t u;
      std::memcpy(&u, &f, 4);
      for (int i = 0; i < 4; ++i) s.push_back(char((u >> (8 * i)) & 0xff));
    }
  }
}

inline std::vector<float> read_f32_le(const unsigned char* p, size_t count) {
  std::vector<float> out(count);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), p, count * 4);
  } else {
    for (size_t i = 0; i < count; ++i) {
      uint32_t u = 0;
      for (int k = 0; k < 4; ++k) u |= uint32_t(p[4 * i + size_t(k)]) << (8 * k);
      std::memcpy(&out[i], &u, 4);
    }
  }
  return out;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json dir = nlohmann::json::object();
  uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    uint64_t bytes = uint64_t(t.size()) * 4;
    dir[name] = {{"dtype", "f32"}, {"shape", t.shape}, {"offset", offset}, {"length", bytes}};
    offset += bytes;
  }
  nlohmann::json header = {{"format_version", ckpt.format_version},
                           {"config", ckpt.config.to_json()},
                           {"tensors", dir}};
  if (ckpt.has_train_state) header["train_state"] = {{"next_epoch", ckpt.next_epoch}};
  std::string head = header.dump();

  std::string out;
  out.reserve(8 + 8 + head.size() + offset);
  out.append(detail::kCkptMagic, 8);
  detail::put_u64_le(out, head.size());
  out += head;
  for (const auto& [name, t] : ckpt.tensors) detail::append_f32_le(out, t.data);
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& origin = "") {
  auto fail = [&](const std::string& why) -> Checkpoint {
    throw DataError(cat("checkpoint ", origin.empty() ? "<memory>" : origin, ": ", why));
  };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), detail::kCkptMagic, 8) != 0)
    fail("bad magic (not a checkpoint file)");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  uint64_t head_len = detail::get_u64_le(p + 8);
  if (16 + head_len > bytes.size()) fail("truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, head_len));
  } catch (const nlohmann::json::exception& e) {
    fail(cat("unparseable header: ", e.what()));
  }
  Checkpoint ckpt;
  try {
    ckpt.format_version = header.at("format_version").get<int>();
    ckpt.config = ModelConfig::from_json(header.at("config"));
    if (header.contains("train_state")) {
      ckpt.has_train_state = true;
      ckpt.next_epoch = header["train_state"].at("next_epoch").get<int>();
    }
    const size_t payload = 16 + head_len;
    for (const auto& [name, meta] : header.at("tensors").items()) {
      if (meta.at("dtype").get<std::string>() != "f32") fail(cat("tensor ", name, ": unsupported dtype"));
      auto shape = meta.at("shape").get<std::vector<int>>();
      uint64_t off = meta.at("offset").get<uint64_t>();
      uint64_t len = meta.at("length").get<uint64_t>();
      if (uint64_t(Tensor::numel(shape)) * 4 != len) fail(cat("tensor ", name, ": length/shape mismatch"));
      if (payload + off + len > bytes.size()) fail(cat("tensor ", name, ": payload out of range"));
      Tensor t;
      t.shape = shape;
      t.data = detail::read_f32_le(p + payload + off, size_t(len / 4));
      ckpt.tensors.emplace(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(cat("malformed header: ", e.what()));
  }
  validate_checkpoint(ckpt);
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(cat("cannot open ", path, " for writing"));
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) throw DataError(cat("short write to ", path));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(cat("cannot open checkpoint ", path));
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, path);
}

}  // namespace ldr
