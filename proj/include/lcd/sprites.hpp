#pragma once
// Bundled procedural sprites. Nine generic kinds form the default generation-0
// prior pool; two disjoint "group" sets play the role of the objects planted
// in the workspace during deployment and test passes. Generic sprites are
// deliberately flat and hard-edged; group sprites carry texture, gradients
// and softened borders so their harvested appearance differs from the pasted
// generic look. Two generic kinds (slab, stripes) are near-background
// impostors, which is what the prior filter exists to prune.
//
// An ingestion adapter (load_priors_from_dir) accepts external RGBA sprites
// for anyone who wants real object cutouts instead of the bundled ones.

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "lcd/compositor.hpp"
#include "lcd/image.hpp"
#include "lcd/rng.hpp"

namespace lcd {

namespace sprite_detail {

struct Canvas {
  ImageU8 color;
  ImageU8 alpha;
  Canvas(int w, int h) : color(w, h, 3, 0), alpha(w, h, 1, 0) {}

  void put(int x, int y, uint8_t r, uint8_t g, uint8_t b, uint8_t a = 255) {
    if (x < 0 || y < 0 || x >= color.width || y >= color.height) return;
    color.at(x, y, 0) = r;
    color.at(x, y, 1) = g;
    color.at(x, y, 2) = b;
    alpha.at(x, y) = std::max(alpha.at(x, y), a);
  }

  void fill_rect(int x0, int y0, int w, int h, uint8_t r, uint8_t g, uint8_t b,
                 uint8_t a = 255) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) put(x, y, r, g, b, a);
  }

  void fill_ellipse(double cx, double cy, double rx, double ry, uint8_t r, uint8_t g,
                    uint8_t b, uint8_t a = 255) {
    for (int y = 0; y < color.height; ++y)
      for (int x = 0; x < color.width; ++x) {
        double dx = (x - cx) / rx, dy = (y - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) put(x, y, r, g, b, a);
      }
  }

  void cut_ellipse(double cx, double cy, double rx, double ry) {
    for (int y = 0; y < color.height; ++y)
      for (int x = 0; x < color.width; ++x) {
        double dx = (x - cx) / rx, dy = (y - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) alpha.at(x, y) = 0;
      }
  }

  void thick_line(double x0, double y0, double x1, double y1, double radius, uint8_t r,
                  uint8_t g, uint8_t b) {
    int steps = static_cast<int>(std::hypot(x1 - x0, y1 - y0) * 2) + 1;
    for (int s = 0; s <= steps; ++s) {
      double t = static_cast<double>(s) / steps;
      double px = x0 + (x1 - x0) * t, py = y0 + (y1 - y0) * t;
      int lo = static_cast<int>(std::floor(-radius)), hi = static_cast<int>(std::ceil(radius));
      for (int dy = lo; dy <= hi; ++dy)
        for (int dx = lo; dx <= hi; ++dx)
          if (dx * dx + dy * dy <= radius * radius)
            put(static_cast<int>(px) + dx, static_cast<int>(py) + dy, r, g, b);
    }
  }

  void add_color_noise(Rng& rng, int amplitude) {
    for (int y = 0; y < color.height; ++y)
      for (int x = 0; x < color.width; ++x) {
        if (alpha.at(x, y) == 0) continue;
        int n = rng.uniform_int(-amplitude, amplitude);
        for (int c = 0; c < 3; ++c)
          color.at(x, y, c) =
              static_cast<uint8_t>(std::clamp(color.at(x, y, c) + n, 0, 255));
      }
  }

  // Shaves the footprint border down to partial alpha (soft, "real" edge).
  void soften_border(uint8_t edge_alpha) {
    ImageU8 src = alpha;
    for (int y = 0; y < alpha.height; ++y)
      for (int x = 0; x < alpha.width; ++x) {
        if (src.at(x, y) == 0) continue;
        bool border = false;
        for (int dy = -1; dy <= 1 && !border; ++dy)
          for (int dx = -1; dx <= 1 && !border; ++dx) {
            int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= alpha.width || ny >= alpha.height ||
                src.at(nx, ny) == 0)
              border = true;
          }
        if (border) alpha.at(x, y) = edge_alpha;
      }
  }
};

struct Rgb {
  uint8_t r, g, b;
};

inline Rgb pick_color(Rng& rng, int base_r, int base_g, int base_b, int spread) {
  auto jit = [&](int v) {
    return static_cast<uint8_t>(std::clamp(v + rng.uniform_int(-spread, spread), 0, 255));
  };
  return {jit(base_r), jit(base_g), jit(base_b)};
}

}  // namespace sprite_detail

inline const std::vector<std::string>& generic_sprite_kinds() {
  static const std::vector<std::string> kinds = {"disc",  "ring",     "bar",  "stick", "wedge",
                                                 "star",  "crescent", "slab", "stripes"};
  return kinds;
}

// One generic sprite instance: flat colors, hard edges.
inline ObjectPrior make_generic_sprite(const std::string& kind, uint64_t seed) {
  using namespace sprite_detail;
  Rng rng(derive_seed(seed, "generic-" + kind));
  int side = rng.uniform_int(22, 30);
  Canvas cv(side, side);
  double c = side / 2.0;

  if (kind == "disc") {
    Rgb col = pick_color(rng, 200, 60, 60, 50);
    cv.fill_ellipse(c, c, c - 1, c - 1, col.r, col.g, col.b);
  } else if (kind == "ring") {
    Rgb col = pick_color(rng, 70, 120, 200, 50);
    cv.fill_ellipse(c, c, c - 1, c - 1, col.r, col.g, col.b);
    cv.cut_ellipse(c, c, c * 0.5, c * 0.5);
  } else if (kind == "bar") {
    Rgb col = pick_color(rng, 220, 180, 40, 40);
    cv.fill_rect(1, side / 3, side - 2, side / 3, col.r, col.g, col.b);
  } else if (kind == "stick") {
    Rgb col = pick_color(rng, 120, 220, 120, 60);
    cv.fill_rect(side / 2 - 1, 1, 3, side - 2, col.r, col.g, col.b);
  } else if (kind == "wedge") {
    Rgb col = pick_color(rng, 210, 120, 200, 40);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        if (x >= side - 1 - y) cv.put(x, y, col.r, col.g, col.b);
  } else if (kind == "star") {
    Rgb col = pick_color(rng, 240, 220, 90, 15);
    cv.fill_rect(side / 2 - 2, 1, 4, side - 2, col.r, col.g, col.b);
    cv.fill_rect(1, side / 2 - 2, side - 2, 4, col.r, col.g, col.b);
  } else if (kind == "crescent") {
    Rgb col = pick_color(rng, 150, 150, 240, 40);
    cv.fill_ellipse(c, c, c - 1, c - 1, col.r, col.g, col.b);
    cv.cut_ellipse(c + side / 4.0, c, c - 2, c - 2);
  } else if (kind == "slab") {
    // near-background impostor: plain wall-grey block
    Rgb col = pick_color(rng, 165, 160, 150, 12);
    cv.fill_rect(1, 1, side - 2, side - 2, col.r, col.g, col.b);
  } else if (kind == "stripes") {
    // near-background impostor: upholstery-like horizontal stripes
    Rgb a = pick_color(rng, 150, 110, 90, 20);
    Rgb b = pick_color(rng, 110, 80, 70, 20);
    for (int y = 1; y < side - 1; ++y) {
      Rgb col = (y / 3) % 2 ? a : b;
      cv.fill_rect(1, y, side - 2, 1, col.r, col.g, col.b);
    }
  } else {
    fail(ErrorCode::invalid_config, "unknown generic sprite kind: " + kind);
  }
  return make_prior(cv.color, cv.alpha, Provenance::generic, 0);
}

inline const std::vector<std::string>& group_sprite_kinds(const std::string& group_tag) {
  static const std::vector<std::string> g1 = {"slate", "cord", "pad", "stylus"};
  static const std::vector<std::string> g2 = {"cloth", "billfold", "card"};
  if (group_tag == "group1") return g1;
  if (group_tag == "group2") return g2;
  fail(ErrorCode::invalid_config, "unknown group tag: " + group_tag);
}

// One deployment-group sprite: textured, shaded, soft-edged.
inline ObjectPrior make_group_sprite(const std::string& kind, const std::string& group_tag,
                                     uint64_t seed) {
  using namespace sprite_detail;
  Rng rng(derive_seed(seed, "group-" + kind));
  Canvas cv(28, 28);

  if (kind == "slate") {
    Rgb body = pick_color(rng, 40, 42, 48, 10);
    cv.fill_rect(4, 2, 20, 24, body.r, body.g, body.b);
    Rgb panel = pick_color(rng, 90, 130, 170, 40);
    for (int y = 4; y < 23; ++y) {
      int shade = (y - 4) * 3;
      cv.fill_rect(6, y, 16, 1, static_cast<uint8_t>(std::min(255, panel.r + shade)),
                   static_cast<uint8_t>(std::min(255, panel.g + shade)), panel.b);
    }
  } else if (kind == "cord") {
    Rgb col = pick_color(rng, 30, 30, 34, 12);
    double px = 3, py = rng.uniform_int(6, 20);
    for (int seg = 0; seg < 5; ++seg) {
      double nx = px + 5, ny = std::clamp(py + rng.uniform_int(-7, 7), 3.0, 24.0);
      cv.thick_line(px, py, nx, ny, 1.4, col.r, col.g, col.b);
      px = nx;
      py = ny;
    }
  } else if (kind == "pad") {
    Rgb paper = pick_color(rng, 235, 232, 220, 12);
    cv.fill_rect(4, 4, 18, 22, paper.r, paper.g, paper.b);
    for (int y = 8; y < 24; y += 4) cv.fill_rect(6, y, 14, 1, 140, 150, 200);
  } else if (kind == "stylus") {
    Rgb body = pick_color(rng, 190, 70, 60, 40);
    cv.thick_line(4, 24, 23, 5, 1.6, body.r, body.g, body.b);
    cv.thick_line(22, 6, 24, 4, 1.4, 60, 60, 70);
  } else if (kind == "cloth") {
    Rgb base = pick_color(rng, 120, 160, 210, 35);
    cv.fill_rect(3, 3, 22, 22, base.r, base.g, base.b);
    for (int d = 0; d < 44; d += 7)
      cv.thick_line(3, 3 + d, 3 + d, 3, 0.8, static_cast<uint8_t>(base.r * 0.8),
                    static_cast<uint8_t>(base.g * 0.8), static_cast<uint8_t>(base.b * 0.8));
  } else if (kind == "billfold") {
    Rgb hide = pick_color(rng, 110, 70, 45, 25);
    cv.fill_rect(2, 7, 24, 14, hide.r, hide.g, hide.b);
    cv.fill_rect(2, 13, 24, 2, static_cast<uint8_t>(hide.r * 0.7),
                 static_cast<uint8_t>(hide.g * 0.7), static_cast<uint8_t>(hide.b * 0.7));
  } else if (kind == "card") {
    Rgb face = pick_color(rng, 225, 225, 235, 15);
    cv.fill_rect(3, 8, 22, 13, face.r, face.g, face.b);
    Rgb stripe = pick_color(rng, 200, 90, 40, 60);
    cv.fill_rect(3, 11, 22, 3, stripe.r, stripe.g, stripe.b);
    cv.fill_rect(6, 16, 5, 3, 180, 170, 90);
  } else {
    fail(ErrorCode::invalid_config, "unknown group sprite kind: " + kind);
  }

  cv.add_color_noise(rng, 7);
  cv.soften_border(150);
  return make_prior(cv.color, cv.alpha, Provenance::generic, 0, group_tag);
}

inline std::vector<ObjectPrior> make_generic_priors(uint64_t seed, int per_kind) {
  std::vector<ObjectPrior> out;
  for (const auto& kind : generic_sprite_kinds())
    for (int i = 0; i < per_kind; ++i)
      out.push_back(make_generic_sprite(kind, derive_seed(seed, kind, static_cast<uint64_t>(i))));
  return out;
}

inline std::vector<ObjectPrior> make_group_priors(const std::string& group_tag, uint64_t seed,
                                                  int per_kind) {
  std::vector<ObjectPrior> out;
  for (const auto& kind : group_sprite_kinds(group_tag))
    for (int i = 0; i < per_kind; ++i)
      out.push_back(
          make_group_sprite(kind, group_tag, derive_seed(seed, kind, static_cast<uint64_t>(i))));
  return out;
}

// Ingestion adapter for external sprite collections: every *.png in `dir`
// (RGBA, or RGB treated as fully opaque) becomes one generic prior.
inline std::vector<ObjectPrior> load_priors_from_dir(const std::filesystem::path& dir,
                                                     const std::string& group_tag = "") {
  if (!std::filesystem::is_directory(dir))
    fail(ErrorCode::not_found, "prior directory does not exist: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ObjectPrior> out;
  for (const auto& f : files) {
    ImageU8 img = read_png(f);
    ImageU8 color(img.width, img.height, 3);
    ImageU8 alpha(img.width, img.height, 1, 255);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        for (int c = 0; c < 3; ++c) color.at(x, y, c) = img.at(x, y, std::min(c, img.channels - 1));
        if (img.channels == 4) alpha.at(x, y) = img.at(x, y, 3);
      }
    out.push_back(make_prior(color, alpha, Provenance::generic, 0, group_tag));
  }
  if (out.empty()) fail(ErrorCode::empty_knowledge_base, "no sprites found in " + dir.string());
  return out;
}

}  // namespace lcd
