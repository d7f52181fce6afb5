#include "psc/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psc/errors.hpp"
#include "psc/random.hpp"

namespace psc {

namespace {

// Integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  long x0, y0, x1, y1;
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  Box box() const {
    return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0),
            static_cast<double>(y1 - y0)};
  }
  bool overlaps(const PixelRect& o, long gap = 0) const {
    return x0 < o.x1 + gap && o.x0 < x1 + gap && y0 < o.y1 + gap && o.y0 < y1 + gap;
  }
};

class Canvas {
 public:
  Canvas(std::size_t h, std::size_t w) : h_(h), w_(w), image_({h, w, 3}) {}

  void fill(const PixelRect& r, const std::array<double, 3>& color, double noise, Rng& rng) {
    const long x0 = std::max(0l, r.x0), x1 = std::min(static_cast<long>(w_), r.x1);
    const long y0 = std::max(0l, r.y0), y1 = std::min(static_cast<long>(h_), r.y1);
    for (long y = y0; y < y1; ++y) {
      for (long x = x0; x < x1; ++x) {
        double* px = image_.ptr() + (static_cast<std::size_t>(y) * w_ + static_cast<std::size_t>(x)) * 3;
        for (int c = 0; c < 3; ++c) px[c] = color[static_cast<std::size_t>(c)] + (noise > 0 ? rng.normal(0, noise) : 0.0);
      }
    }
  }

  Tensor take() { return std::move(image_); }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }

 private:
  std::size_t h_, w_;
  Tensor image_;
};

std::array<double, 3> jitter_color(const std::array<double, 3>& base, double amount, Rng& rng) {
  std::array<double, 3> c{};
  for (std::size_t i = 0; i < 3; ++i) c[i] = std::clamp(base[i] + rng.uniform(-amount, amount), 0.0, 1.0);
  return c;
}

std::array<double, 3> random_color(Rng& rng) { return {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)}; }

long round_px(double v) { return static_cast<long>(std::lround(v)); }

using BandOrder = std::array<std::size_t, kNumBodyParts>;

constexpr BandOrder kPedestrianOrder = {0, 1, 2, 3, 4};

// Draws five part bands inside `body`; band i takes the signature of
// order[i], so kPedestrianOrder draws a pedestrian and any other order a decoy.
void draw_figure(Canvas& canvas, const PixelRect& body, double noise, Rng& rng, const BandOrder& order) {
  const auto& sig = part_signatures();
  std::array<std::array<double, 3>, kNumBodyParts> colors{};
  for (std::size_t i = 0; i < kNumBodyParts; ++i) colors[i] = jitter_color(sig[order[i]], 0.06, rng);
  const PartSet parts = partition(body.box());
  auto rect_of = [](const Box& b) {
    return PixelRect{round_px(b.x), round_px(b.y), round_px(b.right()), round_px(b.bottom())};
  };
  const PixelRect head = rect_of(parts[PartKind::Head]);
  const long hw = head.x1 - head.x0;
  canvas.fill({head.x0 + hw / 4, head.y0, head.x1 - hw / 4, head.y1}, colors[index_of(PartKind::Head)], noise, rng);
  for (auto k : {PartKind::Left, PartKind::Mid, PartKind::Right}) {
    canvas.fill(rect_of(parts[k]), colors[index_of(k)], noise, rng);
  }
  const PixelRect foot = rect_of(parts[PartKind::Foot]);
  const long fw = foot.x1 - foot.x0;
  const long leg = std::max(1l, (fw * 2) / 5);
  canvas.fill({foot.x0, foot.y0, foot.x0 + leg, foot.y1}, colors[index_of(PartKind::Foot)], noise, rng);
  canvas.fill({foot.x1 - leg, foot.y0, foot.x1, foot.y1}, colors[index_of(PartKind::Foot)], noise, rng);
}

struct Placement {
  PixelRect body;
  PixelRect occluder{0, 0, 0, 0};
  PixelRect visible{0, 0, 0, 0};
  bool occluded = false;
};

bool place_body(const SceneConfig& cfg, const std::vector<Placement>& others, std::size_t skip, Rng& rng,
                PixelRect& out) {
  const long img_w = static_cast<long>(cfg.image_width), img_h = static_cast<long>(cfg.image_height);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const long h = round_px(rng.uniform(cfg.min_height, cfg.max_height));
    const long w = std::max(6l, round_px(cfg.aspect_ratio * static_cast<double>(h)));
    if (h > img_h || w > img_w) continue;
    const long x = static_cast<long>(rng.uniform_int(0, img_w - w));
    const long y = static_cast<long>(rng.uniform_int(0, img_h - h));
    const PixelRect cand{x, y, x + w, y + h};
    bool clash = false;
    for (std::size_t i = 0; i < others.size() && !clash; ++i) {
      if (i == skip) continue;
      if (others[i].body.overlaps(cand, 2)) clash = true;
      if (others[i].occluded && others[i].occluder.overlaps(cand)) clash = true;
    }
    if (!clash) {
      out = cand;
      return true;
    }
  }
  return false;
}

// One edge occluder hitting `target` visibility; false when every attempt
// collides with another pedestrian.
bool place_occluder(const SceneConfig& cfg, std::vector<Placement>& peds, std::size_t idx, double target, Rng& rng) {
  Placement& p = peds[idx];
  const PixelRect& b = p.body;
  const long w = b.x1 - b.x0, h = b.y1 - b.y0;
  const long img_w = static_cast<long>(cfg.image_width), img_h = static_cast<long>(cfg.image_height);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double side = rng.uniform(0.0, 1.0);
    PixelRect occ{}, vis{};
    if (side < 0.6) {
      const long band = std::clamp(round_px((1.0 - target) * static_cast<double>(h)), 1l, h - 1);
      const long el = rng.uniform_int(0, w / 2), er = rng.uniform_int(0, w / 2), ed = rng.uniform_int(0, 10);
      occ = {b.x0 - el, b.y1 - band, b.x1 + er, b.y1 + ed};
      vis = {b.x0, b.y0, b.x1, b.y1 - band};
    } else {
      const long band = std::clamp(round_px((1.0 - target) * static_cast<double>(w)), 1l, w - 1);
      const long eo = rng.uniform_int(0, w / 2), eu = rng.uniform_int(0, h / 4), ed = rng.uniform_int(0, h / 4);
      if (side < 0.8) {
        occ = {b.x0 - eo, b.y0 - eu, b.x0 + band, b.y1 + ed};
        vis = {b.x0 + band, b.y0, b.x1, b.y1};
      } else {
        occ = {b.x1 - band, b.y0 - eu, b.x1 + eo, b.y1 + ed};
        vis = {b.x0, b.y0, b.x1 - band, b.y1};
      }
    }
    occ = {std::max(0l, occ.x0), std::max(0l, occ.y0), std::min(img_w, occ.x1), std::min(img_h, occ.y1)};
    bool clash = false;
    for (std::size_t i = 0; i < peds.size() && !clash; ++i) {
      if (i != idx && peds[i].body.overlaps(occ)) clash = true;
    }
    if (clash) continue;
    p.occluder = occ;
    p.visible = vis;
    p.occluded = true;
    return true;
  }
  return false;
}

}  // namespace

void SceneConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("scene config: " + what); };
  if (image_height < 16 || image_width < 16) fail("image must be at least 16 x 16");
  if (min_pedestrians > max_pedestrians) fail("min_pedestrians > max_pedestrians");
  if (!(min_height >= kMinPartitionHeight) || !(min_height <= max_height)) fail("invalid pedestrian height range");
  if (max_height > static_cast<double>(image_height)) fail("max_height exceeds image height");
  if (!(aspect_ratio > 0.0) || aspect_ratio * max_height > static_cast<double>(image_width)) {
    fail("invalid aspect ratio");
  }
  if (min_occluders > max_occluders) fail("min_occluders > max_occluders");
  if (!(min_visibility > 0.0 && min_visibility <= max_visibility && max_visibility < 1.0)) {
    fail("target visibility range must satisfy 0 < min <= max < 1");
  }
  if (background_noise < 0.0 || texture_noise < 0.0) fail("noise levels must be non-negative");
}

const std::array<std::array<double, 3>, kNumBodyParts>& part_signatures() {
  static const std::array<std::array<double, 3>, kNumBodyParts> sig = {{
      {0.92, 0.76, 0.62},  // head
      {0.20, 0.32, 0.85},  // left
      {0.85, 0.22, 0.22},  // mid
      {0.22, 0.80, 0.35},  // right
      {0.12, 0.12, 0.16},  // foot
  }};
  return sig;
}

Scene generate_scene(const SceneConfig& cfg, std::size_t image_id, std::uint64_t split_tag) {
  cfg.validate();
  Rng rng(mix_seed(mix_seed(cfg.seed, split_tag), image_id));
  Canvas canvas(cfg.image_height, cfg.image_width);
  const long img_w = static_cast<long>(cfg.image_width), img_h = static_cast<long>(cfg.image_height);

  // Background: base colour plus a horizontal gradient, drawn in vertical strips.
  const auto base = random_color(rng);
  const double tilt = rng.uniform(-0.15, 0.15);
  for (long x = 0; x < img_w; ++x) {
    const double g = tilt * (static_cast<double>(x) / static_cast<double>(img_w) - 0.5);
    canvas.fill({x, 0, x + 1, img_h}, {base[0] + g, base[1] + g, base[2] + g}, cfg.background_noise, rng);
  }

  // Distractors; some borrow a part colour so colour alone does not detect.
  for (std::size_t i = 0; i < cfg.clutter; ++i) {
    const long w = rng.uniform_int(6, 30), h = rng.uniform_int(6, 40);
    const long x = rng.uniform_int(0, std::max(0l, img_w - w)), y = rng.uniform_int(0, std::max(0l, img_h - h));
    const auto color = rng.bernoulli(0.5)
                           ? jitter_color(part_signatures()[static_cast<std::size_t>(rng.uniform_int(0, kNumBodyParts - 1))],
                                          0.06, rng)
                           : random_color(rng);
    canvas.fill({x, y, x + w, y + h}, color, cfg.texture_noise, rng);
  }

  std::vector<Placement> peds;
  const auto want = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(cfg.min_pedestrians), static_cast<std::int64_t>(cfg.max_pedestrians)));
  for (std::size_t i = 0; i < want; ++i) {
    PixelRect body{};
    if (!place_body(cfg, peds, peds.size(), rng, body)) break;
    peds.push_back({body});
  }

  std::vector<std::size_t> order(peds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto occ_count = std::min<std::size_t>(
      peds.size(), static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(cfg.min_occluders),
                                                            static_cast<std::int64_t>(cfg.max_occluders))));
  for (std::size_t k = 0; k < occ_count; ++k) {
    const std::size_t idx = order[k];
    const double target = rng.uniform(cfg.min_visibility, cfg.max_visibility);
    // An infeasible target resamples the pedestrian; after that it stays unoccluded.
    for (int resample = 0; resample < 10; ++resample) {
      if (place_occluder(cfg, peds, idx, target, rng)) break;
      PixelRect body{};
      if (place_body(cfg, peds, idx, rng, body)) peds[idx].body = body;
    }
  }

  // Decoys: pedestrian-shaped figures with the bands out of order, never annotated.
  std::vector<Placement> placed = peds;
  std::vector<Box> decoy_boxes;
  for (std::size_t i = 0; i < cfg.decoys; ++i) {
    PixelRect body{};
    if (!place_body(cfg, placed, placed.size(), rng, body)) break;
    placed.push_back({body});
    BandOrder order = kPedestrianOrder;
    while (order == kPedestrianOrder) std::shuffle(order.begin(), order.end(), rng.engine());
    draw_figure(canvas, body, cfg.texture_noise, rng, order);
    decoy_boxes.push_back(body.box());
  }

  Scene scene;
  scene.id = image_id;
  scene.decoys = std::move(decoy_boxes);
  for (const auto& p : peds) {
    draw_figure(canvas, p.body, cfg.texture_noise, rng, kPedestrianOrder);
    Annotation a;
    a.full = p.body.box();
    a.visible = p.occluded ? p.visible.box() : a.full;
    a.visibility = visibility_ratio(a.full, a.visible);
    a.height = a.full.h;
    scene.annotations.push_back(a);
  }
  for (const auto& p : peds) {
    if (!p.occluded) continue;
    canvas.fill(p.occluder, random_color(rng), cfg.texture_noise, rng);
    scene.occluders.push_back(p.occluder.box());
  }
  scene.image = canvas.take();
  return scene;
}

Dataset generate(const SceneConfig& cfg, std::size_t image_count, std::uint64_t split_tag) {
  Dataset ds;
  ds.scenes.reserve(image_count);
  for (std::size_t i = 0; i < image_count; ++i) ds.scenes.push_back(generate_scene(cfg, i, split_tag));
  return ds;
}

}  // namespace psc
