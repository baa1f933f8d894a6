#pragma once
// Procedural stand-in for the data-collection robot: textured workspace
// canvases, pure-translation camera traversals, seeded object planting, and
// exact ground-truth change masks. Frames are fixed-size crops of the canvas
// at interpolated subgoal offsets; residual misalignment is modeled as a
// per-frame integer translation of the live frame (edge-replicated), the
// mask translating with it (zero fill).
//
// With jitter 0 and disjoint placements the mask is exact: a pixel is marked
// iff a changed sprite's alpha>0 footprint covers it.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lcd/compositor.hpp"
#include "lcd/error.hpp"
#include "lcd/image.hpp"
#include "lcd/rng.hpp"

namespace lcd {

enum class TextureStyle { shelf_grid, table_blobs, sofa_stripes, corridor_plain };

inline const char* to_string(TextureStyle s) {
  switch (s) {
    case TextureStyle::shelf_grid: return "shelf_grid";
    case TextureStyle::table_blobs: return "table_blobs";
    case TextureStyle::sofa_stripes: return "sofa_stripes";
    case TextureStyle::corridor_plain: return "corridor_plain";
  }
  return "unknown";
}

inline TextureStyle texture_style_from_string(const std::string& s) {
  if (s == "shelf_grid") return TextureStyle::shelf_grid;
  if (s == "table_blobs") return TextureStyle::table_blobs;
  if (s == "sofa_stripes") return TextureStyle::sofa_stripes;
  if (s == "corridor_plain") return TextureStyle::corridor_plain;
  fail(ErrorCode::invalid_config, "unknown texture style: " + s);
}

struct Workspace {
  std::string id;
  ImageU8 canvas;  // RGB
  int floor_top = 0;     // inclusive
  int floor_bottom = 0;  // exclusive
  uint64_t seed = 0;
  TextureStyle style = TextureStyle::corridor_plain;
};

struct Traversal {
  std::string workspace_id;
  std::vector<int> subgoals;  // horizontal canvas offsets, px
  int frame_h = 64, frame_w = 64;
  int frames_per_segment = 8;
};

struct Placement {
  std::string prior_id;
  int x = 0, y = 0;  // top-left of the scaled sprite on the canvas
  double scale = 1.0;
  std::string group_tag;
};

struct FrameTriple {
  ImageU8 reference;
  ImageU8 live;
  ImageU8 mask;  // {0,255}
};

struct TraversalCapture {
  std::string id;
  std::vector<FrameTriple> frames;
  int jitter = 0;
};

namespace sim_detail {

inline void draw_rect(ImageU8& img, int x0, int y0, int w, int h, uint8_t r, uint8_t g,
                      uint8_t b) {
  int x1 = std::min(img.width, x0 + w), y1 = std::min(img.height, y0 + h);
  for (int y = std::max(0, y0); y < y1; ++y)
    for (int x = std::max(0, x0); x < x1; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
}

inline void draw_ellipse(ImageU8& img, double cx, double cy, double rx, double ry, uint8_t r,
                         uint8_t g, uint8_t b) {
  int x0 = std::max(0, static_cast<int>(cx - rx)), x1 = std::min(img.width - 1, static_cast<int>(cx + rx));
  int y0 = std::max(0, static_cast<int>(cy - ry)), y1 = std::min(img.height - 1, static_cast<int>(cy + ry));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double dx = (x - cx) / rx, dy = (y - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) {
        img.at(x, y, 0) = r;
        img.at(x, y, 1) = g;
        img.at(x, y, 2) = b;
      }
    }
}

inline void speckle(ImageU8& img, Rng& rng, int x0, int y0, int w, int h, int amplitude) {
  int x1 = std::min(img.width, x0 + w), y1 = std::min(img.height, y0 + h);
  for (int y = std::max(0, y0); y < y1; ++y)
    for (int x = std::max(0, x0); x < x1; ++x) {
      int n = rng.uniform_int(-amplitude, amplitude);
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = static_cast<uint8_t>(std::clamp(img.at(x, y, c) + n, 0, 255));
    }
}

}  // namespace sim_detail

inline Workspace generate_workspace(uint64_t seed, TextureStyle style, int height, int width) {
  if (height < 64 || width < 64)
    fail(ErrorCode::invalid_config, "workspace canvas must be at least 64x64");
  using namespace sim_detail;

  Workspace ws;
  ws.seed = seed;
  ws.style = style;
  ws.id = std::string(to_string(style)) + "-" + std::to_string(seed);
  ws.canvas = ImageU8(width, height, 3);
  ws.floor_top = static_cast<int>(height * 0.58);
  ws.floor_bottom = static_cast<int>(height * 0.92);

  Rng rng(derive_seed(seed, "canvas", static_cast<uint64_t>(style)));
  ImageU8& cv = ws.canvas;

  // wall gradient + floor base
  int wall_r = rng.uniform_int(150, 200), wall_g = rng.uniform_int(150, 200),
      wall_b = rng.uniform_int(150, 200);
  int floor_r = rng.uniform_int(90, 140), floor_g = rng.uniform_int(70, 120),
      floor_b = rng.uniform_int(60, 110);
  for (int y = 0; y < height; ++y) {
    double t = static_cast<double>(y) / height;
    bool is_floor = y >= ws.floor_top;
    for (int x = 0; x < width; ++x) {
      int r = is_floor ? floor_r : static_cast<int>(wall_r * (1.0 - 0.25 * t));
      int g = is_floor ? floor_g : static_cast<int>(wall_g * (1.0 - 0.25 * t));
      int b = is_floor ? floor_b : static_cast<int>(wall_b * (1.0 - 0.25 * t));
      cv.at(x, y, 0) = static_cast<uint8_t>(r);
      cv.at(x, y, 1) = static_cast<uint8_t>(g);
      cv.at(x, y, 2) = static_cast<uint8_t>(b);
    }
  }

  switch (style) {
    case TextureStyle::shelf_grid: {
      int shelf_h = std::max(12, ws.floor_top / 4);
      for (int sy = 4; sy + shelf_h < ws.floor_top; sy += shelf_h) {
        draw_rect(cv, 0, sy + shelf_h - 3, width, 3, 90, 70, 50);  // shelf board
        int x = rng.uniform_int(0, 12);
        while (x < width - 6) {  // products
          int pw = rng.uniform_int(4, 12), ph = rng.uniform_int(shelf_h / 2, shelf_h - 4);
          draw_rect(cv, x, sy + shelf_h - 3 - ph, pw, ph,
                    static_cast<uint8_t>(rng.uniform_int(60, 240)),
                    static_cast<uint8_t>(rng.uniform_int(60, 240)),
                    static_cast<uint8_t>(rng.uniform_int(60, 240)));
          x += pw + rng.uniform_int(2, 10);
        }
      }
      for (int x = 0; x < width; x += rng.uniform_int(60, 110))
        draw_rect(cv, x, 0, 2, ws.floor_top, 70, 60, 55);  // uprights
      break;
    }
    case TextureStyle::table_blobs: {
      int n = std::max(6, width / 90);
      for (int i = 0; i < n; ++i) {
        double cx = rng.uniform(0, width), cy = rng.uniform(height * 0.30, height * 0.62);
        double rx = rng.uniform(18, 46), ry = rng.uniform(8, 20);
        uint8_t shade = static_cast<uint8_t>(rng.uniform_int(95, 170));
        draw_ellipse(cv, cx, cy, rx, ry, shade, static_cast<uint8_t>(shade * 0.85),
                     static_cast<uint8_t>(shade * 0.6));
      }
      for (int y = ws.floor_top; y < height; y += 6)  // plank seams
        draw_rect(cv, 0, y, width, 1, static_cast<uint8_t>(floor_r * 0.8),
                  static_cast<uint8_t>(floor_g * 0.8), static_cast<uint8_t>(floor_b * 0.8));
      break;
    }
    case TextureStyle::sofa_stripes: {
      int y = height / 5;
      while (y < ws.floor_top) {
        int sh = rng.uniform_int(4, 9);
        uint8_t r = static_cast<uint8_t>(rng.uniform_int(110, 180));
        draw_rect(cv, 0, y, width, sh, r, static_cast<uint8_t>(r * 0.75),
                  static_cast<uint8_t>(r * 0.65));
        y += sh;
      }
      int n = std::max(3, width / 180);
      for (int i = 0; i < n; ++i)  // cushions
        draw_ellipse(cv, rng.uniform(0, width), height * 0.52, rng.uniform(16, 30),
                     rng.uniform(8, 14), 170, 140, 120);
      break;
    }
    case TextureStyle::corridor_plain: {
      for (int x = rng.uniform_int(30, 80); x < width - 40; x += rng.uniform_int(140, 260)) {
        int dw = rng.uniform_int(22, 34);
        draw_rect(cv, x, ws.floor_top / 4, dw, ws.floor_top - ws.floor_top / 4, 120, 110, 100);
        draw_rect(cv, x + 2, ws.floor_top / 4 + 2, dw - 4, ws.floor_top - ws.floor_top / 4 - 4,
                  140, 130, 118);
      }
      draw_rect(cv, 0, ws.floor_top - 2, width, 2, 80, 75, 70);  // skirting line
      break;
    }
  }

  // guaranteed texture spread: a few strongly speckled patches on otherwise
  // smooth wall/floor regions
  int patches = std::max(2, width / 300);
  for (int i = 0; i < patches; ++i) {
    int px = rng.uniform_int(0, std::max(1, width - 48));
    speckle(cv, rng, px, rng.uniform_int(0, ws.floor_top / 2), 48, 24, 36);
  }
  speckle(cv, rng, 0, ws.floor_top, width, height - ws.floor_top, 5);  // mild floor grain

  return ws;
}

// Rejection-samples n pairwise-disjoint placements inside the floor band.
inline std::vector<Placement> plant_objects(const Workspace& ws,
                                            const std::vector<ObjectPrior>& priors, int n,
                                            double scale_lo, double scale_hi,
                                            uint64_t rng_seed) {
  if (n < 0) fail(ErrorCode::invalid_input, "object count must be >= 0");
  if (n == 0) return {};
  if (priors.empty()) fail(ErrorCode::empty_knowledge_base, "no priors to plant");
  if (scale_lo <= 0.0 || scale_hi < scale_lo)
    fail(ErrorCode::invalid_config, "scale range must be positive and ordered");
  for (const auto& p : priors)
    if (p.area_px == 0) fail(ErrorCode::invalid_input, "prior with empty footprint: " + p.id);

  constexpr int kMaxAttempts = 1000;  // bounded retry per object
  std::vector<Placement> placed;
  std::vector<std::array<int, 4>> boxes;  // x, y, w, h
  Rng rng(derive_seed(rng_seed, "plant"));
  for (int i = 0; i < n; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
      const ObjectPrior& prior = priors[rng.next_below(priors.size())];
      double scale = rng.uniform(scale_lo, scale_hi);
      int ow = static_cast<int>(std::lround(prior.alpha.width * scale));
      int oh = static_cast<int>(std::lround(prior.alpha.height * scale));
      if (ow < 1 || oh < 1 || ow > ws.canvas.width) continue;
      int y_max = std::min(ws.floor_bottom - 1, ws.canvas.height - oh);
      if (y_max < ws.floor_top) continue;
      int x = rng.uniform_int(0, ws.canvas.width - ow);
      int y = rng.uniform_int(ws.floor_top, y_max);
      bool overlap = false;
      for (const auto& b : boxes)
        if (x < b[0] + b[2] && b[0] < x + ow && y < b[1] + b[3] && b[1] < y + oh) {
          overlap = true;
          break;
        }
      if (overlap) continue;
      placed.push_back({prior.id, x, y, scale, prior.group_tag});
      boxes.push_back({x, y, ow, oh});
      ok = true;
    }
    if (!ok)
      fail(ErrorCode::placement_capacity,
           "placed " + std::to_string(placed.size()) + " of " + std::to_string(n) + " objects");
  }
  return placed;
}

struct RenderOptions {
  int jitter = 0;                    // max |dx|,|dy| in px for the live frame
  double brightness_lo = 1.0;        // per-frame live brightness scale range
  double brightness_hi = 1.0;
  uint64_t rng_seed = 0;
};

namespace sim_detail {

inline ImageU8 composite_placements(const ImageU8& canvas,
                                    const std::vector<Placement>& placements,
                                    const std::vector<ObjectPrior>& priors) {
  ImageU8 out = canvas;
  for (const auto& pl : placements) {
    const ObjectPrior* prior = nullptr;
    for (const auto& p : priors)
      if (p.id == pl.prior_id) {
        prior = &p;
        break;
      }
    if (!prior) fail(ErrorCode::not_found, "placement references unknown prior " + pl.prior_id);
    ScaledSprite s = scale_sprite(*prior, pl.scale, 1);
    if (pl.x < 0 || pl.y < 0 || pl.x + s.alpha.width > out.width ||
        pl.y + s.alpha.height > out.height)
      fail(ErrorCode::out_of_bounds, "placement outside canvas");
    composite_sprite(out, nullptr, s, pl.x, pl.y, 1);
  }
  return out;
}

inline bool same_placement(const Placement& a, const Placement& b) {
  return a.prior_id == b.prior_id && a.x == b.x && a.y == b.y && a.scale == b.scale;
}

}  // namespace sim_detail

// Renders reference/live/mask frame triples for one traversal. The mask marks
// the alpha>0 footprints of placements present on exactly one side.
inline TraversalCapture render_traversal(const Workspace& ws, const Traversal& t,
                                         const std::vector<Placement>& placements_reference,
                                         const std::vector<Placement>& placements_live,
                                         const std::vector<ObjectPrior>& priors,
                                         const RenderOptions& opt = {}) {
  if (t.workspace_id != ws.id)
    fail(ErrorCode::not_found, "traversal references unknown workspace " + t.workspace_id);
  if (opt.jitter < 0) fail(ErrorCode::invalid_input, "jitter must be >= 0");
  if (t.subgoals.size() < 2) fail(ErrorCode::invalid_config, "traversal needs >= 2 subgoals");
  if (t.frame_h > ws.canvas.height || t.frame_w > ws.canvas.width)
    fail(ErrorCode::invalid_config, "frame larger than workspace canvas");

  ImageU8 ref_canvas = sim_detail::composite_placements(ws.canvas, placements_reference, priors);
  ImageU8 live_canvas = sim_detail::composite_placements(ws.canvas, placements_live, priors);

  // symmetric difference of the two placement lists defines the change set
  ImageU8 mask_canvas(ws.canvas.width, ws.canvas.height, 1, 0);
  auto mark = [&](const Placement& pl) {
    const ObjectPrior* prior = nullptr;
    for (const auto& p : priors)
      if (p.id == pl.prior_id) prior = &p;
    if (!prior) fail(ErrorCode::not_found, "placement references unknown prior " + pl.prior_id);
    ScaledSprite s = scale_sprite(*prior, pl.scale, 1);
    for (int j = 0; j < s.alpha.height; ++j)
      for (int i = 0; i < s.alpha.width; ++i)
        if (s.alpha.at(i, j) > 0) mask_canvas.at(pl.x + i, pl.y + j) = 255;
  };
  for (const auto& a : placements_live) {
    bool shared = false;
    for (const auto& b : placements_reference) shared |= sim_detail::same_placement(a, b);
    if (!shared) mark(a);
  }
  for (const auto& a : placements_reference) {
    bool shared = false;
    for (const auto& b : placements_live) shared |= sim_detail::same_placement(a, b);
    if (!shared) mark(a);
  }

  // camera vertical window centered on the floor band
  int band_mid = (ws.floor_top + ws.floor_bottom) / 2;
  int v0 = std::clamp(band_mid - t.frame_h / 2, 0, ws.canvas.height - t.frame_h);

  // frame offsets: linear interpolation along consecutive subgoals
  std::vector<int> offsets;
  for (size_t s = 0; s + 1 < t.subgoals.size(); ++s)
    for (int j = 0; j < t.frames_per_segment; ++j) {
      double tt = static_cast<double>(j) / t.frames_per_segment;
      int x = static_cast<int>(std::lround(t.subgoals[s] + (t.subgoals[s + 1] - t.subgoals[s]) * tt));
      offsets.push_back(std::clamp(x, 0, ws.canvas.width - t.frame_w));
    }
  offsets.push_back(std::clamp(t.subgoals.back(), 0, ws.canvas.width - t.frame_w));

  TraversalCapture cap;
  cap.jitter = opt.jitter;
  cap.frames.reserve(offsets.size());
  for (size_t k = 0; k < offsets.size(); ++k) {
    Rng frame_rng(derive_seed(opt.rng_seed, "frame", static_cast<uint64_t>(k)));
    FrameTriple f;
    f.reference = crop(ref_canvas, offsets[k], v0, t.frame_w, t.frame_h);
    f.live = crop(live_canvas, offsets[k], v0, t.frame_w, t.frame_h);
    f.mask = crop(mask_canvas, offsets[k], v0, t.frame_w, t.frame_h);
    if (opt.brightness_lo != 1.0 || opt.brightness_hi != 1.0) {
      double b = frame_rng.uniform(opt.brightness_lo, opt.brightness_hi);
      for (auto& v : f.live.data)
        v = static_cast<uint8_t>(std::clamp(std::lround(v * b), 0L, 255L));
    }
    if (opt.jitter > 0) {
      int dx = frame_rng.uniform_int(-opt.jitter, opt.jitter);
      int dy = frame_rng.uniform_int(-opt.jitter, opt.jitter);
      f.live = translate(f.live, dx, dy, BorderMode::replicate);
      f.mask = translate(f.mask, dx, dy, BorderMode::zero);
    }
    cap.frames.push_back(std::move(f));
  }
  return cap;
}

// ------------------------------------------------------------ capture I/O
// Layout: <run>/workspaces/<id>/canvas.png, <run>/captures/<id>/NNNN_*.png
// plus manifest.json per capture.

inline void save_workspace(const std::filesystem::path& run_root, const Workspace& ws) {
  auto dir = run_root / "workspaces" / ws.id;
  write_png(dir / "canvas.png", ws.canvas);
  nlohmann::json j;
  j["id"] = ws.id;
  j["seed"] = ws.seed;
  j["style"] = to_string(ws.style);
  j["floor_top"] = ws.floor_top;
  j["floor_bottom"] = ws.floor_bottom;
  std::ofstream os(dir / "workspace.json");
  os << j.dump(2) << "\n";
}

inline void save_capture(const std::filesystem::path& run_root, const TraversalCapture& cap,
                         const std::vector<Placement>& placements_reference,
                         const std::vector<Placement>& placements_live,
                         uint64_t rng_seed = 0) {
  auto dir = run_root / "captures" / cap.id;
  std::filesystem::create_directories(dir);
  char name[32];
  for (size_t i = 0; i < cap.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "%04zu", i);
    write_png(dir / (std::string(name) + "_ref.png"), cap.frames[i].reference);
    write_png(dir / (std::string(name) + "_live.png"), cap.frames[i].live);
    write_png(dir / (std::string(name) + "_mask.png"), cap.frames[i].mask);
  }
  auto placement_json = [](const std::vector<Placement>& ps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : ps)
      arr.push_back({{"prior_id", p.prior_id},
                     {"x", p.x},
                     {"y", p.y},
                     {"scale", p.scale},
                     {"group_tag", p.group_tag}});
    return arr;
  };
  nlohmann::json j;
  j["id"] = cap.id;
  j["frames"] = cap.frames.size();
  j["jitter"] = cap.jitter;
  j["seed"] = rng_seed;
  j["placements_reference"] = placement_json(placements_reference);
  j["placements_live"] = placement_json(placements_live);
  std::ofstream os(dir / "manifest.json");
  os << j.dump(2) << "\n";
}

inline TraversalCapture load_capture(const std::filesystem::path& run_root,
                                     const std::string& id) {
  auto dir = run_root / "captures" / id;
  std::ifstream is(dir / "manifest.json");
  if (!is) fail(ErrorCode::not_found, "capture not found: " + id);
  nlohmann::json j;
  is >> j;
  TraversalCapture cap;
  cap.id = id;
  cap.jitter = j["jitter"].get<int>();
  size_t n = j["frames"].get<size_t>();
  char name[32];
  for (size_t i = 0; i < n; ++i) {
    std::snprintf(name, sizeof(name), "%04zu", i);
    FrameTriple f;
    f.reference = read_png(dir / (std::string(name) + "_ref.png"));
    f.live = read_png(dir / (std::string(name) + "_live.png"));
    f.mask = read_png(dir / (std::string(name) + "_mask.png"));
    cap.frames.push_back(std::move(f));
  }
  return cap;
}

}  // namespace lcd
