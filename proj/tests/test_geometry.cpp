#include <doctest.h>

#include <cmath>
#include <random>

#include "lidarsim/bvh.hpp"
#include "lidarsim/error.hpp"
#include "lidarsim/mesh.hpp"

using namespace lidarsim;

namespace {

TriangleMesh single(const Vec3& a, const Vec3& b, const Vec3& c) {
  TriangleMesh m;
  m.vertices = {a, b, c};
  m.indices = {{0, 1, 2}};
  m.tags = {0};
  return m;
}

TriangleMesh random_soup(int n, std::uint64_t seed, double spread = 20, double size = 1.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-spread, spread), off(-size, size);
  TriangleMesh m;
  for (int i = 0; i < n; ++i) {
    Vec3 c{pos(rng), pos(rng), pos(rng)};
    auto base = static_cast<std::uint32_t>(m.vertices.size());
    for (int k = 0; k < 3; ++k) m.vertices.push_back(c + Vec3{off(rng), off(rng), off(rng)});
    m.indices.push_back({base, base + 1, base + 2});
    m.tags.push_back(i % 3);
  }
  return m;
}

Ray random_ray(std::mt19937_64& rng, double spread = 25) {
  std::uniform_real_distribution<double> pos(-spread, spread), u(-1, 1);
  Vec3 d;
  do d = {u(rng), u(rng), u(rng)};
  while (length(d) < 1e-3 || length(d) > 1);
  return Ray{{pos(rng), pos(rng), pos(rng)}, normalize(d)};
}

// Exhaustive scan written against the intersection primitive only.
struct Oracle {
  bool hit = false;
  double t = 0;
  std::uint32_t tri = 0;
};

Oracle exhaustive(const TriangleMesh& m, const Ray& r, std::optional<Tag> tag = std::nullopt) {
  Oracle best;
  for (std::uint32_t i = 0; i < m.triangle_count(); ++i) {
    if (tag && m.tags[i] != *tag) continue;
    auto [a, b, c] = m.triangle(i);
    auto t = intersect_ray_triangle(r, a, b, c);
    if (t && (!best.hit || *t < best.t)) best = {true, *t, i};
  }
  return best;
}

// Plane intersection followed by a signed-area inside test: an
// implementation of ray/triangle that shares no code with Möller-Trumbore.
std::optional<double> plane_oracle(const Ray& r, const Vec3& a, const Vec3& b, const Vec3& c) {
  auto n = cross(b - a, c - a);
  auto denom = dot(n, r.direction);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  auto t = dot(n, a - r.origin) / denom;
  if (t < r.t_min || t > r.t_max) return std::nullopt;
  auto p = r.at(t);
  auto s0 = dot(cross(b - a, p - a), n), s1 = dot(cross(c - b, p - b), n), s2 = dot(cross(a - c, p - c), n);
  if (s0 < 0 || s1 < 0 || s2 < 0) return std::nullopt;
  return t;
}

void check_equivalence(const Bvh& bvh, const TriangleMesh& mesh, int rays, std::uint64_t seed,
                       std::optional<Tag> tag = std::nullopt, double spread = 25) {
  std::mt19937_64 rng(seed);
  int hits = 0;
  for (int i = 0; i < rays; ++i) {
    auto r = random_ray(rng, spread);
    auto got = query_closest_hit(bvh, mesh, r, tag);
    auto want = exhaustive(mesh, r, tag);
    REQUIRE(got.has_value() == want.hit);
    if (!want.hit) continue;
    ++hits;
    CHECK(got->triangle_index == want.tri);
    CHECK(std::abs(got->t - want.t) <= 1e-9 * std::max(1.0, want.t));
    if (tag) CHECK(got->tag == *tag);
  }
  CHECK(hits > rays / 20);
}

}  // namespace

TEST_CASE("ray-triangle examples") {
  Vec3 a{-1, -1, 1}, b{1, -1, 1}, c{0, 1, 1};
  Ray up{{0, 0, 0}, {0, 0, 1}};
  auto t = intersect_ray_triangle(up, a, b, c);
  REQUIRE(t);
  CHECK(*t == 1.0);

  Ray down{{0, 0, 0}, {0, 0, -1}};
  CHECK_FALSE(intersect_ray_triangle(down, a, b, c));

  Ray through_vertex{{0, 1, 0}, {0, 0, 1}};
  auto tv = intersect_ray_triangle(through_vertex, a, b, c);
  REQUIRE(tv);
  CHECK(*tv == doctest::Approx(1.0).epsilon(1e-12));

  Ray through_edge{{0, -1, 0}, {0, 0, 1}};
  CHECK(intersect_ray_triangle(through_edge, a, b, c));
}

TEST_CASE("degenerate triangles never hit") {
  Ray r{{0, 0, 0}, {0, 0, 1}};
  CHECK_FALSE(intersect_ray_triangle(r, {0, 0, 1}, {0, 0, 1}, {0, 0, 1}));
  CHECK_FALSE(intersect_ray_triangle(r, {-1, 0, 1}, {0, 0, 1}, {1, 0, 1}));
}

TEST_CASE("ray interval is respected") {
  Vec3 a{-1, -1, 1}, b{1, -1, 1}, c{0, 1, 1};
  CHECK_FALSE(intersect_ray_triangle(Ray{{0, 0, 0}, {0, 0, 1}, 0, 0.5}, a, b, c));
  CHECK_FALSE(intersect_ray_triangle(Ray{{0, 0, 0}, {0, 0, 1}, 1.5, 3}, a, b, c));
  CHECK(intersect_ray_triangle(Ray{{0, 0, 0}, {0, 0, 1}, 0.5, 1.0}, a, b, c));
}

TEST_CASE("Möller-Trumbore agrees with a plane/half-space oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2, 2);
  int hits = 0, compared = 0;
  for (int i = 0; i < 20000; ++i) {
    Vec3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)}, c{u(rng), u(rng), u(rng)};
    Ray r{{u(rng), u(rng), u(rng) - 4}, normalize(Vec3{u(rng) * 0.3, u(rng) * 0.3, 1})};
    // Skip near-grazing and near-edge configurations where the two
    // formulations legitimately round differently.
    auto n = normalize(cross(b - a, c - a));
    if (std::abs(dot(n, r.direction)) < 1e-3) continue;
    auto got = intersect_ray_triangle(r, a, b, c);
    auto want = plane_oracle(r, a, b, c);
    if (want) {
      auto p = r.at(*want);
      auto edge_dist = [&](const Vec3& x, const Vec3& y) {
        return length(cross(y - x, p - x)) / length(y - x);
      };
      if (std::min({edge_dist(a, b), edge_dist(b, c), edge_dist(c, a)}) < 1e-6) continue;
    }
    ++compared;
    REQUIRE(got.has_value() == want.has_value());
    if (want) {
      ++hits;
      CHECK(*got == doctest::Approx(*want).epsilon(1e-9));
    }
  }
  CHECK(compared > 15000);
  CHECK(hits > 100);
}

TEST_CASE("single-triangle BVH is one leaf with the triangle's box") {
  auto m = single({0, 0, 0}, {1, 0, 0}, {0, 2, 3});
  auto bvh = build_bvh(m);
  REQUIRE(bvh.nodes().size() == 1);
  CHECK(bvh.nodes()[0].is_leaf());
  CHECK(bvh.nodes()[0].box == triangle_bounds({0, 0, 0}, {1, 0, 0}, {0, 2, 3}));
}

TEST_CASE("two distant triangles give two disjoint leaves") {
  auto m = single({0, 0, 0}, {1, 0, 0}, {0, 1, 0});
  m.append(single({100, 0, 0}, {101, 0, 0}, {100, 1, 0}));
  auto bvh = build_bvh(m);
  REQUIRE(bvh.nodes().size() == 3);
  const auto& root = bvh.nodes()[0];
  CHECK_FALSE(root.is_leaf());
  const auto& l = bvh.nodes()[1];
  const auto& r = bvh.nodes()[root.first];
  CHECK(l.is_leaf());
  CHECK(r.is_leaf());
  CHECK((l.box.max.x < r.box.min.x || r.box.max.x < l.box.min.x));
}

TEST_CASE("empty mesh is rejected") {
  TriangleMesh m;
  CHECK_THROWS_AS(build_bvh(m), Error);
  try {
    build_bvh(m);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMesh);
  }
}

TEST_CASE("leaves hold at most four triangles and cover every triangle once") {
  auto m = random_soup(1000, 3);
  auto bvh = build_bvh(m);
  std::vector<int> seen(m.triangle_count(), 0);
  for (const auto& n : bvh.nodes()) {
    if (!n.is_leaf()) continue;
    CHECK(n.count <= Bvh::kMaxLeafSize);
    for (auto k = n.first; k < n.first + n.count; ++k) {
      auto tri = bvh.primitives()[k];
      ++seen[tri];
      auto [a, b, c] = m.triangle(tri);
      CHECK(n.box.contains(triangle_bounds(a, b, c)));
    }
  }
  for (auto s : seen) CHECK(s == 1);
}

TEST_CASE("10k random triangles: BVH equals exhaustive scan") {
  auto m = random_soup(10000, 5);
  auto bvh = build_bvh(m);
  check_equivalence(bvh, m, 2000, 17);
}

TEST_CASE("5k random triangles: 1k random rays match (t, triangle)") {
  auto m = random_soup(5000, 8, 10, 1.0);
  check_equivalence(build_bvh(m), m, 1000, 21);
}

TEST_CASE("tag-filtered queries equal the filtered exhaustive scan") {
  auto m = random_soup(3000, 9);
  auto bvh = build_bvh(m);
  for (Tag tag = 0; tag < 3; ++tag) check_equivalence(bvh, m, 500, 100 + tag, tag);
}

TEST_CASE("parallel walls: closest wins, filter selects the far wall") {
  auto m = make_plane({0, 0, 1}, 4, 4);
  m.set_tags(1);
  auto far = make_plane({0, 0, 2}, 4, 4);
  m.append(far, 2);
  auto bvh = build_bvh(m);
  Ray r{{0.1, 0.2, 0}, {0, 0, 1}};
  auto hit = query_closest_hit(bvh, m, r);
  REQUIRE(hit);
  CHECK(hit->t == doctest::Approx(1.0));
  auto filtered = query_closest_hit(bvh, m, r, 2);
  REQUIRE(filtered);
  CHECK(filtered->t == doctest::Approx(2.0));
  CHECK_FALSE(query_closest_hit(bvh, m, r, 7));
}

TEST_CASE("shared-edge ties resolve to the lowest triangle index") {
  // The ray passes exactly through the diagonal shared by both triangles.
  auto m = make_plane({0, 0, 0}, 2, 2);
  auto bvh = build_bvh(m);
  Ray r{{0, 0, 1}, {0, 0, -1}};
  auto hit = query_closest_hit(bvh, m, r);
  auto want = exhaustive(m, r);
  REQUIRE(hit);
  REQUIRE(want.hit);
  CHECK(hit->triangle_index == want.tri);
  CHECK(hit->triangle_index == 0);
}

TEST_CASE("refit after translation moves every box by the offset") {
  auto m = random_soup(500, 13);
  auto bvh = build_bvh(m);
  auto before = std::vector<BvhNode>(bvh.nodes().begin(), bvh.nodes().end());
  for (auto& v : m.vertices) v = v + Vec3{1, 0, 0};
  bvh.refit(m);
  REQUIRE(bvh.nodes().size() == before.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& a = before[i].box;
    const auto& b = bvh.nodes()[i].box;
    CHECK(b.min.x == doctest::Approx(a.min.x + 1).epsilon(1e-12));
    CHECK(b.max.x == doctest::Approx(a.max.x + 1).epsilon(1e-12));
    CHECK(b.min.y == a.min.y);
    CHECK(b.max.z == a.max.z);
  }
}

TEST_CASE("refit with unchanged vertices is bit-identical") {
  auto m = random_soup(800, 14);
  auto bvh = build_bvh(m);
  auto refitted = refit_bvh(bvh, m);
  REQUIRE(refitted.nodes().size() == bvh.nodes().size());
  for (std::size_t i = 0; i < bvh.nodes().size(); ++i) CHECK(refitted.nodes()[i].box == bvh.nodes()[i].box);
  CHECK(refitted.surface_area_sum() == bvh.surface_area_sum());
}

TEST_CASE("refit rejects a topology change") {
  auto m = random_soup(10, 1);
  auto bvh = build_bvh(m);
  m.append(random_soup(1, 2));
  try {
    bvh.refit(m);
    FAIL("expected TopologyChanged");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TopologyChanged);
  }
}

TEST_CASE("refit after per-entity rigid motion matches exhaustive scan") {
  std::vector<TriangleMesh> parts;
  TriangleMesh m;
  std::vector<std::int32_t> groups;
  for (int e = 0; e < 8; ++e) {
    parts.push_back(make_icosphere({}, 1.0, 2, 0.3, 40 + e));
    m.append(parts.back(), 0);
    groups.insert(groups.end(), parts.back().triangle_count(), e);
  }
  auto bvh = build_bvh(m, groups);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-4, 4), ang(-pi, pi);
  for (int step = 0; step < 5; ++step) {
    m.vertices.clear();
    for (const auto& p : parts) {
      RigidTransform xf{Quat::from_axis_angle(normalize(Vec3{u(rng), u(rng), u(rng)}), ang(rng)),
                        {u(rng), u(rng), u(rng)}};
      for (const auto& v : p.vertices) m.vertices.push_back(xf.apply(v));
    }
    bvh.refit(m);
    check_equivalence(bvh, m, 300, 1000 + step, std::nullopt, 5);
  }
}

TEST_CASE("build and query are deterministic") {
  auto m = random_soup(2000, 6);
  auto a = build_bvh(m), b = build_bvh(m);
  REQUIRE(a.nodes().size() == b.nodes().size());
  for (std::size_t i = 0; i < a.nodes().size(); ++i) {
    CHECK(a.nodes()[i].box == b.nodes()[i].box);
    CHECK(a.nodes()[i].first == b.nodes()[i].first);
    CHECK(a.nodes()[i].count == b.nodes()[i].count);
  }
  CHECK(std::equal(a.primitives().begin(), a.primitives().end(), b.primitives().begin()));
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    auto r = random_ray(rng);
    auto ha = query_closest_hit(a, m, r), hb = query_closest_hit(b, m, r);
    REQUIRE(ha.has_value() == hb.has_value());
    if (ha) {
      CHECK(ha->t == hb->t);
      CHECK(ha->triangle_index == hb->triangle_index);
    }
  }
}

TEST_CASE("mixed tags and groups get separate subtrees") {
  auto m = random_soup(400, 31, 5);
  std::vector<std::int32_t> groups(m.triangle_count());
  for (std::size_t i = 0; i < groups.size(); ++i) groups[i] = static_cast<std::int32_t>(i % 5);
  auto bvh = build_bvh(m, groups);
  for (const auto& n : bvh.nodes()) {
    if (!n.is_leaf() || n.count < 2) continue;
    auto first = bvh.primitives()[n.first];
    for (auto k = n.first; k < n.first + n.count; ++k) {
      CHECK(m.tags[bvh.primitives()[k]] == m.tags[first]);
      CHECK(groups[bvh.primitives()[k]] == groups[first]);
    }
  }
  check_equivalence(bvh, m, 300, 77, std::nullopt, 6);
  std::vector<std::int32_t> short_groups(3, 0);
  CHECK_THROWS_AS(build_bvh(m, short_groups), Error);
}

TEST_CASE("heightfield terrain is watertight for vertical rays") {
  auto m = make_heightfield(-5, -5, 10, 20, [](double x, double y) { return 0.3 * std::sin(x) * std::cos(y); });
  auto bvh = build_bvh(m);
  // Rays aimed at grid vertices and edge midpoints, where leaks would occur.
  for (int j = 0; j <= 40; ++j)
    for (int i = 0; i <= 40; ++i) {
      Ray r{{-5 + i * 0.25, -5 + j * 0.25, 5}, {0, 0, -1}};
      auto hit = query_closest_hit(bvh, m, r);
      REQUIRE(hit);
    }
}

TEST_CASE("mesh validation and generators") {
  auto box = make_box({0, 0, 0}, {1, 2, 3});
  CHECK(box.triangle_count() == 12);
  CHECK_NOTHROW(box.validate());
  auto bad = box;
  bad.indices[0][1] = 99;
  CHECK_THROWS_AS(bad.validate(), Error);
  auto ico = make_icosphere({}, 1.0, 2);
  CHECK(ico.triangle_count() == 320);
  for (const auto& v : ico.vertices) CHECK(length(v) == doctest::Approx(1.0));

  TriangleMesh merged;
  merged.append(box, 3);
  auto first = merged.append(ico, 4);
  CHECK(first == box.vertices.size());
  CHECK(merged.triangle_count() == 332);
  CHECK(merged.tags.front() == 3);
  CHECK(merged.tags.back() == 4);
}
