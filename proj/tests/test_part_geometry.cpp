#include <doctest.h>

#include <cmath>

#include "psc/errors.hpp"
#include "psc/part_geometry.hpp"
#include "psc/random.hpp"

using namespace psc;

namespace {

constexpr std::array<PartKind, kNumBodyParts> kBodyParts = {PartKind::Head, PartKind::Left, PartKind::Mid,
                                                            PartKind::Right, PartKind::Foot};

bool near(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// Two boxes share a boundary segment of positive length.
bool touches(const Box& a, const Box& b) {
  const double ox = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double oy = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  const bool vertical_edge = (near(a.right(), b.x) || near(b.right(), a.x)) && oy > 1e-9;
  const bool horizontal_edge = (near(a.bottom(), b.y) || near(b.bottom(), a.y)) && ox > 1e-9;
  return vertical_edge || horizontal_edge;
}

Box random_box(Rng& rng) {
  return {rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0), rng.uniform(6.0, 300.0), rng.uniform(10.0, 600.0)};
}

}  // namespace

TEST_CASE("partition of a 100 x 200 box") {
  const PartSet p = partition({0, 0, 100, 200});
  CHECK(p[PartKind::Head] == Box{0, 0, 100, 40});
  CHECK(p[PartKind::Foot] == Box{0, 160, 100, 40});
  const Box& l = p[PartKind::Left];
  const Box& m = p[PartKind::Mid];
  const Box& r = p[PartKind::Right];
  CHECK(l.x == 0.0);
  CHECK(l.w == doctest::Approx(33.33).epsilon(1e-3));
  CHECK(m.x == doctest::Approx(33.33).epsilon(1e-3));
  CHECK(m.w == doctest::Approx(33.34).epsilon(1e-3));
  CHECK(r.x == doctest::Approx(66.67).epsilon(1e-3));
  CHECK(r.w == doctest::Approx(33.33).epsilon(1e-3));
  for (const Box* b : {&l, &m, &r}) {
    CHECK(b->y == 40.0);
    CHECK(b->h == 120.0);
  }
  CHECK(p[PartKind::FullBody] == Box{0, 0, 100, 200});
  CHECK(index_of(PartKind::FullBody) == 5);
}

TEST_CASE("partition at the minimum size and below") {
  const PartSet p = partition({10, 20, 6, 10});
  double area = 0.0;
  for (auto k : kBodyParts) area += p[k].area();
  CHECK(near(area, 60.0));
  CHECK(p[PartKind::Head].h == doctest::Approx(2.0));
  CHECK(p[PartKind::Mid].w == doctest::Approx(2.0));
  CHECK_THROWS_AS(partition({0, 0, 5, 9}), DegenerateBoxError);
  CHECK_THROWS_AS(partition({0, 0, 5, 100}), DegenerateBoxError);
  CHECK_THROWS_AS(partition({0, 0, 100, 9}), DegenerateBoxError);
  CHECK_THROWS_AS(partition({0, 0, NAN, 100}), DegenerateBoxError);
}

TEST_CASE("parts tile the full box for random boxes") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Box full = random_box(rng);
    const PartSet p = partition(full);
    double area = 0.0;
    for (auto k : kBodyParts) {
      const Box& b = p[k];
      CHECK(b.valid());
      CHECK(b.x >= full.x - 1e-9);
      CHECK(b.y >= full.y - 1e-9);
      CHECK(b.right() <= full.right() + 1e-9);
      CHECK(b.bottom() <= full.bottom() + 1e-9);
      area += b.area();
    }
    CHECK(near(area, full.area()));
    for (std::size_t i = 0; i < kNumBodyParts; ++i)
      for (std::size_t j = i + 1; j < kNumBodyParts; ++j)
        CHECK(intersection_area(p[kBodyParts[i]], p[kBodyParts[j]]) <= 1e-9 * full.area());
  }
}

TEST_CASE("partition is equivariant under translation and scaling") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Box full = random_box(rng);
    const double dx = rng.uniform(-20, 20), dy = rng.uniform(-20, 20), s = rng.uniform(1.0, 3.0);
    const PartSet base = partition(full);
    const PartSet moved = partition({s * full.x + dx, s * full.y + dy, s * full.w, s * full.h});
    for (auto k : kAllRegions) {
      CHECK(near(moved[k].x, s * base[k].x + dx, 1e-9));
      CHECK(near(moved[k].y, s * base[k].y + dy, 1e-9));
      CHECK(near(moved[k].w, s * base[k].w, 1e-9));
      CHECK(near(moved[k].h, s * base[k].h, 1e-9));
    }
  }
}

TEST_CASE("adjacency template matches geometric touching") {
  const PartGraph& g = adjacency_template();
  const PartSet p = partition({3, 7, 60, 150});
  for (auto a : kBodyParts)
    for (auto b : kBodyParts) {
      CAPTURE(part_name(a));
      CAPTURE(part_name(b));
      CHECK(g.edge(a, b) == (a != b && touches(p[a], p[b])));
    }
  for (auto a : kBodyParts) {
    CHECK(g.edge(PartKind::FullBody, a));
    CHECK(g.edge(a, PartKind::FullBody));
  }
  for (auto a : kAllRegions) {
    CHECK_FALSE(g.edge(a, a));
    for (auto b : kAllRegions) CHECK(g.edge(a, b) == g.edge(b, a));
  }
  CHECK_FALSE(g.edge(PartKind::Head, PartKind::Foot));
  CHECK_FALSE(g.edge(PartKind::Left, PartKind::Right));
  CHECK(g.degree(PartKind::FullBody) == 5);
  CHECK(g.edge_count() == 13);
  CHECK(g.ordered_edges().size() == 26);
}

TEST_CASE("iou and visibility ratio") {
  const Box a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {20, 20, 5, 5}) == 0.0);
  CHECK(iou(a, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0));
  CHECK(iou(a, {10, 0, 10, 10}) == 0.0);
  CHECK(visibility_ratio(a, a) == 1.0);
  CHECK(visibility_ratio(a, {30, 30, 4, 4}) == 0.0);
  CHECK(visibility_ratio(a, {0, 0, 10, 5}) == 0.5);
  CHECK(visibility_ratio(a, {-5, -5, 30, 30}) == 1.0);
  CHECK(visibility_ratio(a, {0, 0, 0, 5}) == 0.0);
  CHECK_THROWS_AS(visibility_ratio({0, 0, 0, 10}, a), DegenerateBoxError);
}
