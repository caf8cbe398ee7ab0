#pragma once

// Synthetic document scenes: a textured rectangle with a distinct border,
// text-like strokes and a content-orientation mark near corner 0, projected
// by a random homography over one of five procedural background families.
// Optional occluder discs over a corner and out-of-frame placement model the
// occlusion robustness protocol. Generation is a pure function of
// (SceneConfig, index).
//
// On disk a dataset is: index.json (config, per-file checksums),
// labels.jsonl (one record per sample, pixel-space corners), and
// images/NNNNNN.ppm (binary P6, 8-bit).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldr/geometry.hpp"
#include "ldr/loss.hpp"
#include "ldr/model.hpp"
#include "ldr/rng.hpp"

namespace ldr {

struct SceneConfig {
  int image_hw = 64;
  int n_cls = 2;
  double aspect_min = 0.65;
  double aspect_max = 1.5;
  double jitter = 0.06;               // per-corner perspective jitter, frame units
  double rotation_max = 0.5235988;    // +-30 degrees, the handheld-capture regime
  double occlusion_prob = 0.0;
  double occlusion_max_fraction = 0.2;
  double occlusion_fraction = -1.0;   // >= 0 pins the fraction instead of sampling
  double out_of_frame_prob = 0.0;
  double negative_prob = 0.0;
  uint64_t seed = 1;

  void validate() const {
    require(image_hw >= 16, cat("scene config: image_hw too small: ", image_hw));
    require(n_cls >= 2, cat("scene config: n_cls must be >= 2, got ", n_cls));
    require(aspect_min > 0 && aspect_max >= aspect_min, "scene config: bad aspect range");
    require(jitter >= 0 && jitter <= 0.25, cat("scene config: jitter out of range: ", jitter));
    require(rotation_max >= 0 && rotation_max <= 3.1415927,
            cat("scene config: rotation_max out of range: ", rotation_max));
    for (double p : {occlusion_prob, out_of_frame_prob, negative_prob})
      require(p >= 0.0 && p <= 1.0, cat("scene config: probability out of [0,1]: ", p));
    require(occlusion_max_fraction >= 0 && occlusion_max_fraction <= 0.5,
            "scene config: occlusion_max_fraction out of range");
  }

  nlohmann::json to_json() const {
    return {{"image_hw", image_hw},
            {"n_cls", n_cls},
            {"aspect_min", aspect_min},
            {"aspect_max", aspect_max},
            {"jitter", jitter},
            {"rotation_max", rotation_max},
            {"occlusion_prob", occlusion_prob},
            {"occlusion_max_fraction", occlusion_max_fraction},
            {"occlusion_fraction", occlusion_fraction},
            {"out_of_frame_prob", out_of_frame_prob},
            {"negative_prob", negative_prob},
            {"seed", seed}};
  }

  static SceneConfig from_json(const nlohmann::json& j) {
    SceneConfig c;
    c.image_hw = j.at("image_hw").get<int>();
    c.n_cls = j.at("n_cls").get<int>();
    c.aspect_min = j.at("aspect_min").get<double>();
    c.aspect_max = j.at("aspect_max").get<double>();
    c.jitter = j.at("jitter").get<double>();
    c.rotation_max = j.at("rotation_max").get<double>();
    c.occlusion_prob = j.at("occlusion_prob").get<double>();
    c.occlusion_max_fraction = j.at("occlusion_max_fraction").get<double>();
    c.occlusion_fraction = j.at("occlusion_fraction").get<double>();
    c.out_of_frame_prob = j.at("out_of_frame_prob").get<double>();
    c.negative_prob = j.at("negative_prob").get<double>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
  }
};

struct QuadLabel {
  Quad corners_px;  // counter-clockwise content order, pixel units
  int cls = 0;      // 0 = no document
  int width = 0;
  int height = 0;
};

struct SceneMeta {
  uint64_t seed = 0;
  int index = 0;
  double occlusion_fraction = 0.0;
  bool out_of_frame = false;
  int background_id = 0;
  double canonical_w = 1.0;  // undistorted document rectangle
  double canonical_h = 1.0;
};

struct SceneSample {
  int hw = 0;
  std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel
  QuadLabel label;
  SceneMeta meta;

  Tensor image() const {
    Tensor t = Tensor::zeros({hw, hw, 3});
    for (size_t i = 0; i < rgb.size(); ++i) t.data[i] = float(rgb[i]) / 255.0f;
    return t;
  }
};

inline Quad canonical_quad(const SceneMeta& meta) {
  return Quad::rect(meta.canonical_w, meta.canonical_h);
}

// The orientation mark sits at this canonical-space point, adjacent to
// corner 0; its placement is what makes corner identity recoverable.
inline Point2 orientation_mark_center(double w, double h) {
  double m = std::min(w, h);
  return {0.18 * m, 0.18 * m};
}

// -----------------------------------------------------------------------------
// Scene generation
// -----------------------------------------------------------------------------

namespace detail {

struct Rgb {
  double r, g, b;
};

inline Rgb random_color(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

inline uint8_t quantize(double v) {
  int q = int(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  return uint8_t(q);
}

// Order-free per-pixel noise so rendering never consumes the main stream.
inline double pixel_noise(uint64_t seed, int index, int px, int py) {
  uint64_t h = mix64(seed ^ (uint64_t(index) << 32) ^ (uint64_t(uint32_t(px)) << 16) ^
                     uint64_t(uint32_t(py)));
  return double(h >> 11) * 0x1.0p-53;
}

inline void paint(std::vector<uint8_t>& rgb, int hw, int px, int py, Rgb c) {
  size_t i = size_t((py * hw + px) * 3);
  rgb[i] = quantize(c.r);
  rgb[i + 1] = quantize(c.g);
  rgb[i + 2] = quantize(c.b);
}

// Hue table for per-class border tinting.
inline Rgb class_border_color(int cls, double dark) {
  static const double hues[8][3] = {{1, 0.2, 0.2}, {0.2, 0.3, 1},  {0.2, 1, 0.3}, {1, 0.8, 0.2},
                                    {0.8, 0.2, 1}, {0.2, 0.9, 0.9}, {1, 0.5, 0.2}, {0.5, 0.5, 0.5}};
  const double* h = hues[(cls - 1) % 8];
  return {h[0] * dark, h[1] * dark, h[2] * dark};
}

}  // namespace detail

inline SceneSample generate_scene(const SceneConfig& cfg, int index) {
  cfg.validate();
  Rng rng(cfg.seed, stream::kScene ^ uint64_t(index));
  const int hw = cfg.image_hw;

  SceneSample sample;
  sample.hw = hw;
  sample.rgb.assign(size_t(hw * hw * 3), 0);
  sample.meta.seed = cfg.seed;
  sample.meta.index = index;

  // Background.
  const int bg = int(rng.uniform_int(0, 4));
  sample.meta.background_id = bg;
  detail::Rgb c0 = detail::random_color(rng, 0.05, 0.70);
  detail::Rgb c1 = detail::random_color(rng, 0.05, 0.70);
  double grad_dx = std::cos(rng.uniform(0, 6.2831853));
  double grad_dy = std::sin(rng.uniform(0, 6.2831853));
  int cell = int(rng.uniform_int(6, 16));
  double noise_amp = rng.uniform(0.08, 0.30);
  double stripe_period = rng.uniform(6.0, 18.0);
  double stripe_angle = rng.uniform(0, 3.1415926);
  for (int py = 0; py < hw; ++py)
    for (int px = 0; px < hw; ++px) {
      detail::Rgb c = c0;
      switch (bg) {
        case 0:
          break;
        case 1: {
          double t = 0.5 + 0.5 * ((px * grad_dx + py * grad_dy) / hw);
          t = std::clamp(t, 0.0, 1.0);
          c = {c0.r + t * (c1.r - c0.r), c0.g + t * (c1.g - c0.g), c0.b + t * (c1.b - c0.b)};
          break;
        }
        case 2:
          c = ((px / cell + py / cell) % 2 == 0) ? c0 : c1;
          break;
        case 3: {
          double n = (detail::pixel_noise(cfg.seed, index, px, py) - 0.5) * 2.0 * noise_amp;
          c = {c0.r + n, c0.g + n, c0.b + n};
          break;
        }
        case 4: {
          double phase = (px * std::cos(stripe_angle) + py * std::sin(stripe_angle)) / stripe_period;
          c = (int64_t(std::floor(phase)) % 2 == 0) ? c0 : c1;
          break;
        }
      }
      detail::paint(sample.rgb, hw, px, py, c);
    }

  double frame_noise = rng.uniform(0.005, 0.03);
  auto add_frame_noise = [&](int px, int py, detail::Rgb c) {
    double n = (detail::pixel_noise(cfg.seed ^ 0x5eed, index, px, py) - 0.5) * 2 * frame_noise;
    detail::paint(sample.rgb, hw, px, py, {c.r + n, c.g + n, c.b + n});
  };

  if (rng.bernoulli(cfg.negative_prob)) {
    sample.label.cls = 0;
    sample.label.width = hw;
    sample.label.height = hw;
    for (int py = 0; py < hw; ++py)
      for (int px = 0; px < hw; ++px) {
        size_t base = size_t((py * hw + px) * 3);
        add_frame_noise(px, py,
                        {sample.rgb[base] / 255.0, sample.rgb[base + 1] / 255.0,
                         sample.rgb[base + 2] / 255.0});
      }
    return sample;
  }

  // Document quad in normalized frame coordinates, rejection-sampled until
  // non-degenerate.
  Quad quad;
  double aspect = 1.0;
  bool oof = rng.bernoulli(cfg.out_of_frame_prob);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    aspect = rng.uniform(cfg.aspect_min, cfg.aspect_max);
    double cx = rng.uniform(0.38, 0.62);
    double cy = rng.uniform(0.38, 0.62);
    double half_diag = rng.uniform(0.26, 0.42);
    double theta = rng.uniform(-cfg.rotation_max, cfg.rotation_max);
    double dn = std::hypot(aspect, 1.0);
    double hx = half_diag * aspect / dn;
    double hy = half_diag / dn;
    const Point2 local[4] = {{-hx, -hy}, {-hx, hy}, {hx, hy}, {hx, -hy}};
    double ct = std::cos(theta), st = std::sin(theta);
    for (int i = 0; i < 4; ++i) {
      Point2 p = local[i];
      quad.corners[size_t(i)] = {cx + p.x * ct - p.y * st + rng.uniform(-cfg.jitter, cfg.jitter),
                                 cy + p.x * st + p.y * ct + rng.uniform(-cfg.jitter, cfg.jitter)};
    }
    if (oof) {
      int corner = int(rng.uniform_int(0, 3));
      bool along_x = rng.bernoulli(0.5);
      bool high_side = rng.bernoulli(0.5);
      double target = high_side ? rng.uniform(1.03, 1.15) : rng.uniform(-0.15, -0.03);
      double delta = target - (along_x ? quad.corners[size_t(corner)].x
                                       : quad.corners[size_t(corner)].y);
      for (auto& p : quad.corners) (along_x ? p.x : p.y) += delta;
    }

    double lo = oof ? kCoordLo + 0.02 : 0.02;
    double hi = oof ? kCoordHi - 0.02 : 0.98;
    bool in_bounds = true;
    for (const auto& p : quad.corners)
      in_bounds = in_bounds && p.x >= lo && p.x <= hi && p.y >= lo && p.y <= hi;
    double min_edge = 1e30;
    for (int i = 0; i < 4; ++i)
      min_edge = std::min(min_edge, norm(quad.corners[size_t((i + 1) % 4)] - quad.corners[size_t(i)]));
    ok = in_bounds && is_convex(quad) && signed_area(quad) > 0.01 && min_edge > 0.05 &&
         min_interior_angle(quad) > 10.0 * 3.1415926 / 180.0;
  }
  if (!ok) throw DataError(cat("generate_scene: no valid quad after 100 attempts (seed ", cfg.seed,
                               ", index ", index, ")"));

  sample.meta.out_of_frame = oof;
  sample.meta.canonical_w = aspect;
  sample.meta.canonical_h = 1.0;

  int cls = cfg.n_cls == 2 ? 1 : 1 + int(rng.uniform_int(0, cfg.n_cls - 2));
  sample.label.cls = cls;
  sample.label.width = hw;
  sample.label.height = hw;
  for (int i = 0; i < 4; ++i)
    sample.label.corners_px.corners[size_t(i)] = {quad.corners[size_t(i)].x * hw,
                                                  quad.corners[size_t(i)].y * hw};

  // Document texture parameters.
  detail::Rgb paper = detail::random_color(rng, 0.75, 0.97);
  detail::Rgb border = detail::class_border_color(cls, rng.uniform(0.10, 0.30));
  detail::Rgb text = detail::random_color(rng, 0.20, 0.45);
  detail::Rgb mark{0.04, 0.04, 0.04};
  int text_rows = int(rng.uniform_int(7, 12));
  double text_phase = rng.uniform(0.0, 1.0);
  double border_width = rng.uniform(0.03, 0.07);
  double shade_amp = rng.uniform(0.0, 0.15);  // lighting gradient across the page
  double shade_dx = std::cos(rng.uniform(0, 6.2831853));
  double shade_dy = std::sin(rng.uniform(0, 6.2831853));

  // Rasterize by inverse-mapping pixels into the canonical rectangle,
  // 2x2 supersampled so document edges are anti-aliased the way a camera
  // would see them.
  Homography to_canon = estimate_homography(quad, Quad::rect(aspect, 1.0));
  Point2 mark_c = orientation_mark_center(aspect, 1.0);
  double m = std::min(aspect, 1.0);
  const double sub[2] = {-0.25, 0.25};
  for (int py = 0; py < hw; ++py)
    for (int px = 0; px < hw; ++px) {
      size_t base = size_t((py * hw + px) * 3);
      detail::Rgb bg{sample.rgb[base] / 255.0, sample.rgb[base + 1] / 255.0,
                     sample.rgb[base + 2] / 255.0};
      detail::Rgb acc{0, 0, 0};
      for (double oy : sub)
        for (double ox : sub) {
          Point2 pn{(px + 0.5 + ox) / hw, (py + 0.5 + oy) / hw};
          const auto& h = to_canon.h;
          detail::Rgb c = bg;
          double wq = h[2][0] * pn.x + h[2][1] * pn.y + h[2][2];
          if (std::abs(wq) >= 1e-9) {
            double cxq = (h[0][0] * pn.x + h[0][1] * pn.y + h[0][2]) / wq;
            double cyq = (h[1][0] * pn.x + h[1][1] * pn.y + h[1][2]) / wq;
            if (cxq >= 0 && cxq <= aspect && cyq >= 0 && cyq <= 1) {
              c = paper;
              double edge = std::min(std::min(cxq, aspect - cxq), std::min(cyq, 1.0 - cyq));
              if (edge < border_width * m) {
                c = border;
              } else if (std::hypot(cxq - mark_c.x, cyq - mark_c.y) < 0.09 * m) {
                c = mark;
              } else if (cyq > 0.30 && cyq < 0.92 && cxq > 0.10 * aspect && cxq < 0.90 * aspect) {
                double t = cyq * text_rows + text_phase;
                if (t - std::floor(t) < 0.32) c = text;
              }
              double shade = 1.0 - shade_amp * 0.5 *
                                       (1.0 + shade_dx * (cxq / aspect * 2 - 1) +
                                        shade_dy * (cyq * 2 - 1)) * 0.5;
              c = {c.r * shade, c.g * shade, c.b * shade};
            }
          }
          acc = {acc.r + 0.25 * c.r, acc.g + 0.25 * c.g, acc.b + 0.25 * c.b};
        }
      add_frame_noise(px, py, acc);
    }

  // Occluder disc over one corner. Pixels only; the label is untouched.
  if (rng.bernoulli(cfg.occlusion_prob)) {
    double f = cfg.occlusion_fraction >= 0 ? cfg.occlusion_fraction
                                           : rng.uniform(0.02, cfg.occlusion_max_fraction);
    sample.meta.occlusion_fraction = f;
    if (f > 0) {
      int corner = int(rng.uniform_int(0, 3));
      detail::Rgb occ = detail::random_color(rng, 0.15, 0.85);
      Point2 center = sample.label.corners_px.corners[size_t(corner)];
      center.x += rng.uniform(-0.01, 0.01) * hw;
      center.y += rng.uniform(-0.01, 0.01) * hw;
      double diag = norm(sample.label.corners_px.corners[2] - sample.label.corners_px.corners[0]);
      double radius = f * diag;
      for (int py = 0; py < hw; ++py)
        for (int px = 0; px < hw; ++px)
          if (std::hypot(px + 0.5 - center.x, py + 0.5 - center.y) < radius)
            add_frame_noise(px, py, occ);
    }
  }
  return sample;
}

// Equal-division ring of the label quad, normalized by image size and mapped
// through the coordinate encoding. Class 0 labels produce an empty ring.
inline SampleLabel make_training_label(const QuadLabel& label, int n_points) {
  if (label.cls == 0) return SampleLabel{{}, 0};
  require(label.width > 0 && label.height > 0, "make_training_label: empty image dimensions");
  Quad norm_quad;
  for (int i = 0; i < 4; ++i)
    norm_quad.corners[size_t(i)] = {label.corners_px.corners[size_t(i)].x / label.width,
                                    label.corners_px.corners[size_t(i)].y / label.height};
  if (signed_area(norm_quad) <= 1e-9)
    throw NumericError("make_training_label: degenerate label quad");
  PointRing ring = equal_division_points(norm_quad, n_points);
  for (auto& p : ring.points) {
    p.x = encode_coord(p.x);
    p.y = encode_coord(p.y);
  }
  return SampleLabel{std::move(ring), label.cls};
}

// -----------------------------------------------------------------------------
// PPM I/O
// -----------------------------------------------------------------------------

inline void write_ppm(const std::string& path, const std::vector<uint8_t>& rgb, int w, int h) {
  require(int(rgb.size()) == w * h * 3, "write_ppm: buffer does not match dimensions");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(cat("cannot open ", path, " for writing"));
  f << "P6\n" << w << " " << h << "\n255\n";
  f.write(reinterpret_cast<const char*>(rgb.data()), std::streamsize(rgb.size()));
  if (!f) throw DataError(cat("short write to ", path));
}

inline std::vector<uint8_t> read_ppm(const std::string& path, int& w, int& h) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(cat("cannot open image ", path));
  std::string magic;
  f >> magic;
  if (magic != "P6") throw DataError(cat(path, ": not a binary PPM (magic ", magic, ")"));
  int maxval = 0;
  f >> w >> h >> maxval;
  if (!f || w <= 0 || h <= 0) throw DataError(cat(path, ": malformed PPM header"));
  if (maxval != 255) throw DataError(cat(path, ": unsupported maxval ", maxval));
  f.get();  // single whitespace after maxval
  std::vector<uint8_t> rgb(size_t(w * h * 3));
  f.read(reinterpret_cast<char*>(rgb.data()), std::streamsize(rgb.size()));
  if (f.gcount() != std::streamsize(rgb.size()))
    throw DataError(cat(path, ": truncated pixel data (", f.gcount(), " of ", rgb.size(), " bytes)"));
  return rgb;
}

// -----------------------------------------------------------------------------
// Dataset directory I/O
// -----------------------------------------------------------------------------

namespace detail {

inline std::string sample_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "images/%06d.ppm", index);
  return buf;
}

inline std::string file_checksum_hex(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(cat("cannot open ", path, " for checksum"));
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)fnv1a64(bytes));
  return buf;
}

inline nlohmann::json label_to_json(const SceneSample& s, const std::string& file) {
  nlohmann::json corners = nlohmann::json::array();
  for (const auto& p : s.label.corners_px.corners) corners.push_back({p.x, p.y});
  return {{"file", file},
          {"class", s.label.cls},
          {"corners", corners},
          {"meta",
           {{"seed", s.meta.seed},
            {"index", s.meta.index},
            {"occlusion_fraction", s.meta.occlusion_fraction},
            {"out_of_frame", s.meta.out_of_frame},
            {"background_id", s.meta.background_id},
            {"canonical_wh", {s.meta.canonical_w, s.meta.canonical_h}}}}};
}

}  // namespace detail

inline void write_dataset(const std::vector<SceneSample>& samples, const std::string& dir,
                          const SceneConfig* cfg = nullptr, const std::string& command_line = "") {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");

  std::map<std::string, std::string> checksums;
  std::string labels_path = (fs::path(dir) / "labels.jsonl").string();
  std::ofstream labels(labels_path, std::ios::trunc);
  if (!labels) throw DataError(cat("cannot open ", labels_path, " for writing"));
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    std::string rel = detail::sample_filename(int(i));
    std::string img_path = (fs::path(dir) / rel).string();
    write_ppm(img_path, s.rgb, s.hw, s.hw);
    checksums[rel] = detail::file_checksum_hex(img_path);
    labels << detail::label_to_json(s, rel).dump() << "\n";
  }
  labels.close();
  checksums["labels.jsonl"] = detail::file_checksum_hex(labels_path);

  nlohmann::json index = {{"count", samples.size()}, {"files", checksums}};
  if (cfg) index["scene_config"] = cfg->to_json();
  if (!command_line.empty()) index["command_line"] = command_line;
  std::ofstream idx((fs::path(dir) / "index.json").string(), std::ios::trunc);
  idx << index.dump(2) << "\n";
  if (!idx) throw DataError(cat("cannot write index.json under ", dir));
}

inline std::vector<SceneSample> read_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::string index_path = (fs::path(dir) / "index.json").string();
  std::ifstream idx(index_path);
  if (!idx) throw DataError(cat("dataset ", dir, ": missing index.json"));
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(idx);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(cat("dataset ", dir, ": malformed index.json: ", e.what()));
  }

  size_t count = 0;
  try {
    count = index.at("count").get<size_t>();
    for (const auto& [rel, sum] : index.at("files").items()) {
      std::string path = (fs::path(dir) / rel).string();
      if (!fs::exists(path)) throw DataError(cat("dataset ", dir, ": missing file ", rel));
      std::string actual = detail::file_checksum_hex(path);
      if (actual != sum.get<std::string>())
        throw DataError(cat("dataset ", dir, ": checksum mismatch for ", rel, " (got ", actual,
                            ", index says ", sum.get<std::string>(), ")"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(cat("dataset ", dir, ": malformed index.json: ", e.what()));
  }

  std::ifstream labels((fs::path(dir) / "labels.jsonl").string());
  if (!labels) throw DataError(cat("dataset ", dir, ": missing labels.jsonl"));
  std::vector<SceneSample> samples;
  std::string line;
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(cat("dataset ", dir, ": bad label line ", samples.size(), ": ", e.what()));
    }
    SceneSample s;
    try {
      std::string rel = rec.at("file").get<std::string>();
      int w = 0, h = 0;
      s.rgb = read_ppm((fs::path(dir) / rel).string(), w, h);
      if (w != h) throw DataError(cat("dataset ", dir, ": ", rel, " is not square"));
      s.hw = w;
      s.label.cls = rec.at("class").get<int>();
      s.label.width = w;
      s.label.height = h;
      const auto& corners = rec.at("corners");
      for (int i = 0; i < 4; ++i)
        s.label.corners_px.corners[size_t(i)] = {corners.at(size_t(i)).at(0).get<double>(),
                                                 corners.at(size_t(i)).at(1).get<double>()};
      const auto& meta = rec.at("meta");
      s.meta.seed = meta.at("seed").get<uint64_t>();
      s.meta.index = meta.at("index").get<int>();
      s.meta.occlusion_fraction = meta.at("occlusion_fraction").get<double>();
      s.meta.out_of_frame = meta.at("out_of_frame").get<bool>();
      s.meta.background_id = meta.at("background_id").get<int>();
      s.meta.canonical_w = meta.at("canonical_wh").at(0).get<double>();
      s.meta.canonical_h = meta.at("canonical_wh").at(1).get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(cat("dataset ", dir, ": bad label record ", samples.size(), ": ", e.what()));
    }
    samples.push_back(std::move(s));
  }
  if (samples.size() != count)
    throw DataError(cat("dataset ", dir, ": index.json says ", count, " samples, labels.jsonl has ",
                        samples.size()));
  return samples;
}

}  // namespace ldr
