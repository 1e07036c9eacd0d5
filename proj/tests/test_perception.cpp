#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lidarsim/error.hpp"
#include "lidarsim/perception.hpp"

using namespace lidarsim;

namespace {

ScanFrame frame_from(const std::vector<Vec3>& dirs, const std::vector<double>& ranges, const std::vector<bool>& hits,
                     double max_range = 40) {
  ScanFrame f;
  f.max_range = max_range;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    f.directions.push_back(normalize(dirs[i]));
    f.ranges.push_back(ranges[i]);
    f.hit_flags.push_back(hits[i]);
    f.points_base.push_back(normalize(dirs[i]) * ranges[i]);
    f.hit_entities.push_back(-1);
  }
  return f;
}

ScanFrame random_frame(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> az(-pi, pi), el(-0.6, 0.6), r(0.5, 30), u(0, 1);
  std::vector<Vec3> dirs;
  std::vector<double> ranges;
  std::vector<bool> hits;
  for (std::size_t i = 0; i < n; ++i) {
    dirs.push_back(direction_from_angles(az(rng), el(rng)));
    bool hit = u(rng) < 0.8;
    hits.push_back(hit);
    ranges.push_back(hit ? r(rng) : 40.0);
  }
  return frame_from(dirs, ranges, hits);
}

// Greedy max-min selection recomputed from scratch at every step.
std::vector<std::size_t> fps_oracle(const std::vector<Vec3>& pts, std::size_t k, std::size_t start) {
  std::vector<std::size_t> sel{start};
  while (sel.size() < std::min(k, pts.size())) {
    std::size_t best = 0;
    double best_d = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(sel.begin(), sel.end(), i) != sel.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (auto s : sel) {
        auto v = pts[i] - pts[s];
        d = std::min(d, v.x * v.x + v.y * v.y + v.z * v.z);
      }
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    sel.push_back(best);
  }
  return sel;
}

double min_pairwise(const std::vector<Vec3>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, length(pts[i] - pts[j]));
  return best;
}

SphericalPoint sp(double theta, double phi, double range = 1, bool hit = true) {
  return {theta, phi, range, direction_from_angles(phi, theta) * range, hit};
}

}  // namespace

TEST_CASE("partition threshold semantics") {
  PartitionConfig cfg;
  cfg.theta_threshold = -0.2;
  auto f = frame_from({direction_from_angles(0, -0.5), direction_from_angles(0, 0)}, {3, 3}, {true, true});
  auto p = partition(f, cfg);
  REQUIRE(p.proximal.size() == 1);
  REQUIRE(p.distal.size() == 1);
  CHECK(p.proximal[0].theta == doctest::Approx(0));
  CHECK(p.distal[0].theta == doctest::Approx(-0.5));
}

TEST_CASE("partition of an empty frame is empty") {
  auto p = partition(ScanFrame{}, PartitionConfig{});
  CHECK(p.proximal.empty());
  CHECK(p.distal.empty());
}

TEST_CASE("partition conserves hit points") {
  auto f = random_frame(1000, 3);
  auto p = partition(f, PartitionConfig{});
  auto distal_hits = std::count_if(p.distal.begin(), p.distal.end(), [](const auto& s) { return s.hit; });
  CHECK(p.proximal.size() + static_cast<std::size_t>(distal_hits) == f.hit_count());
  CHECK(p.proximal.size() + p.distal.size() == f.size());
  for (const auto& s : p.proximal) CHECK(s.hit);
}

TEST_CASE("FPS worked example") {
  std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {10, 10, 0}};
  auto idx = farthest_point_indices(pts, 2, 0);
  REQUIRE(idx.size() == 2);
  CHECK(idx[0] == 0);
  CHECK(idx[1] == 3);
}

TEST_CASE("FPS with k >= n returns every point once; k = 1 returns the start") {
  auto f = random_frame(50, 8);
  auto p = partition(f, PartitionConfig{});
  std::vector<SphericalPoint> pts = p.proximal;
  REQUIRE(pts.size() > 3);
  auto all = farthest_point_sample(pts, pts.size() + 10);
  CHECK(all.size() == pts.size());
  auto key = [](const SphericalPoint& a, const SphericalPoint& b) {
    return std::tie(a.theta, a.phi, a.range) < std::tie(b.theta, b.phi, b.range);
  };
  auto sorted_in = pts, sorted_out = all;
  std::sort(sorted_in.begin(), sorted_in.end(), key);
  std::sort(sorted_out.begin(), sorted_out.end(), key);
  CHECK(sorted_in == sorted_out);

  auto one = farthest_point_sample(pts, 1, FpsStart::MaxRange);
  REQUIRE(one.size() == 1);
  auto max_range = std::max_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.range < b.range; });
  CHECK(one[0] == *max_range);
  auto first = farthest_point_sample(pts, 1, FpsStart::FirstIndex);
  CHECK(first[0] == pts[0]);
  CHECK(farthest_point_sample(std::vector<SphericalPoint>{}, 4).empty());
}

TEST_CASE("FPS equals the exhaustive greedy oracle, duplicates included") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> n_dist(1, 120), k_dist(1, 20), grid(-3, 3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 200; ++trial) {
    auto n = static_cast<std::size_t>(n_dist(rng));
    auto k = static_cast<std::size_t>(k_dist(rng));
    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < n; ++i) {
      // Half the clouds sit on an integer lattice to force distance ties.
      if (trial % 2) pts.push_back({double(grid(rng)), double(grid(rng)), double(grid(rng))});
      else pts.push_back({u(rng), u(rng), u(rng)});
    }
    auto start = static_cast<std::size_t>(rng() % n);
    CHECK(farthest_point_indices(pts, k, start) == fps_oracle(pts, k, start));
  }
}

TEST_CASE("FPS subsets are at least as spread as random subsets in >= 95% of trials") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1, 1);
  int wins = 0;
  const int trials = 300;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<Vec3> pts(150);
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
    const std::size_t k = 12;
    std::vector<Vec3> fps, random;
    for (auto i : farthest_point_indices(pts, k, 0)) fps.push_back(pts[i]);
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < k; ++i) random.push_back(pts[perm[i]]);
    if (min_pairwise(fps) >= min_pairwise(random)) ++wins;
  }
  CHECK(wins >= trials * 95 / 100);
}

TEST_CASE("average downsampling examples") {
  DownsampleGrid g{2, 4, {-0.4, 0.0}, {-pi, pi}, 40.0};
  SUBCASE("two points in one bin average") {
    std::vector<SphericalPoint> pts{sp(-0.1, 0.1, 1), sp(-0.15, 0.2, 3)};
    auto out = average_downsample(pts, g);
    REQUIRE(out.size() == 8);
    // theta bin 1 ([-0.2, 0)), phi bin 2 ([0, pi/2)).
    CHECK(out[1 * 4 + 2].range == 2.0);
    CHECK(out[1 * 4 + 2].hit);
    for (std::size_t i = 0; i < out.size(); ++i)
      if (i != 6) CHECK(out[i].range == 40.0);
  }
  SUBCASE("empty input gives all sentinels") {
    auto out = average_downsample(std::vector<SphericalPoint>{}, g);
    REQUIRE(out.size() == 8);
    for (const auto& p : out) {
      CHECK(p.range == 40.0);
      CHECK_FALSE(p.hit);
    }
  }
  SUBCASE("constant range stays constant") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> th(-0.4, 0.0), ph(-pi, pi);
    std::vector<SphericalPoint> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(sp(th(rng), ph(rng), 7.25));
    for (const auto& p : average_downsample(pts, g))
      if (p.hit) CHECK(p.range == 7.25);
  }
  SUBCASE("misses do not contribute") {
    std::vector<SphericalPoint> pts{sp(-0.1, 0.1, 1), sp(-0.1, 0.1, 40, false)};
    CHECK(average_downsample(pts, g)[6].range == 1.0);
  }
}

TEST_CASE("average downsampling matches a direct per-bin mean") {
  DownsampleGrid g;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> th(g.theta.min, g.theta.max), ph(-pi, pi), r(0.5, 20);
  std::vector<SphericalPoint> pts;
  for (int i = 0; i < 3000; ++i) pts.push_back(sp(th(rng), ph(rng), r(rng)));
  auto out = average_downsample(pts, g);
  REQUIRE(out.size() == g.size());
  double dt = g.theta.width() / g.n_theta, dp = g.phi.width() / g.n_phi;
  for (int it = 0; it < g.n_theta; ++it)
    for (int ip = 0; ip < g.n_phi; ++ip) {
      double sum = 0;
      int n = 0;
      for (const auto& p : pts) {
        if (p.theta >= g.theta.min + it * dt && p.theta < g.theta.min + (it + 1) * dt && p.phi >= -pi + ip * dp &&
            p.phi < -pi + (ip + 1) * dp) {
          sum += p.range;
          ++n;
        }
      }
      const auto& cell = out[static_cast<std::size_t>(it * g.n_phi + ip)];
      if (n == 0)
        CHECK(cell.range == g.sentinel);
      else
        CHECK(cell.range == doctest::Approx(sum / n).epsilon(1e-12));
    }
}

TEST_CASE("spherical sort examples") {
  auto out = spherical_sort({sp(1, 0), sp(0, 2), sp(0, 1)});
  REQUIRE(out.size() == 3);
  CHECK(out[0].theta == 0);
  CHECK(out[0].phi == 1);
  CHECK(out[1].phi == 2);
  CHECK(out[2].theta == 1);
  CHECK(spherical_sort(out) == out);
}

TEST_CASE("spherical sort: sorted, same multiset, stable") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> coarse(0, 9);
  std::vector<SphericalPoint> pts;
  for (int i = 0; i < 1000; ++i) pts.push_back(sp(coarse(rng) * 0.1, coarse(rng) * 0.3, i));
  auto out = spherical_sort(pts);
  REQUIRE(out.size() == pts.size());
  for (std::size_t i = 1; i < out.size(); ++i) {
    auto a = std::make_pair(out[i - 1].theta, out[i - 1].phi), b = std::make_pair(out[i].theta, out[i].phi);
    CHECK(a <= b);
    // Ranges encode the input position; equal keys keep input order.
    if (a == b) CHECK(out[i - 1].range < out[i].range);
  }
  auto by_range = [](const auto& a, const auto& b) { return a.range < b.range; };
  std::sort(out.begin(), out.end(), by_range);
  CHECK(out == pts);
}

TEST_CASE("history buffer ring semantics") {
  PartitionConfig cfg;
  cfg.k_proximal = 4;
  cfg.distal = {1, 3, {-0.5, 0}, {-pi, pi}, 40};
  cfg.n_hist = 10;
  HistoryBuffer buf(cfg);
  auto frame = [](double v) {
    return std::make_pair(std::vector<SphericalPoint>(4, sp(0, 0, v)), std::vector<SphericalPoint>(3, sp(0, 0, v)));
  };

  auto [p1, d1] = frame(1);
  auto seq = buf.push_and_assemble(p1, d1);
  REQUIRE(seq.proximal.size() == 10);
  for (int i = 0; i < 9; ++i) {
    CHECK(seq.proximal[i] == std::vector<SphericalPoint>(4));
    CHECK(seq.distal[i] == std::vector<SphericalPoint>(3));
  }
  CHECK(seq.proximal[9] == p1);

  for (int i = 2; i <= 10; ++i) {
    auto [p, d] = frame(i);
    seq = buf.push_and_assemble(p, d);
  }
  for (int i = 0; i < 10; ++i) CHECK(seq.proximal[i][0].range == i + 1);

  auto [p11, d11] = frame(11);
  seq = buf.push_and_assemble(p11, d11);
  CHECK(buf.fill_count() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(seq.proximal[i][0].range == i + 2);
    CHECK(seq.distal[i][0].range == i + 2);
  }

  buf.clear();
  CHECK(buf.fill_count() == 0);
  CHECK(buf.assemble().proximal[9] == std::vector<SphericalPoint>(4));
}

TEST_CASE("identical pushes give identical entries") {
  PartitionConfig cfg;
  HistoryBuffer buf(cfg);
  auto f = process_frame(random_frame(5000, 2), cfg);
  HistorySequences seq;
  for (int i = 0; i < 10; ++i) seq = buf.push_and_assemble(f);
  for (int i = 1; i < 10; ++i) {
    CHECK(seq.proximal[i] == seq.proximal[0]);
    CHECK(seq.distal[i] == seq.distal[0]);
  }
}

TEST_CASE("history buffer rejects wrong shapes") {
  PartitionConfig cfg;
  HistoryBuffer buf(cfg);
  try {
    buf.push_and_assemble(std::vector<SphericalPoint>(3), std::vector<SphericalPoint>(cfg.distal.size()));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("processed frames have fixed shapes for any point count") {
  PartitionConfig cfg;
  HistoryBuffer buf(cfg);
  for (std::size_t n : {0u, 1u, 5u, 127u, 128u, 129u, 4000u}) {
    auto f = process_frame(random_frame(n, n), cfg);
    CHECK(f.proximal.size() == 128);
    CHECK(f.distal.size() == 144);
    auto seq = buf.push_and_assemble(f);
    CHECK(seq.proximal.size() == 10);
    CHECK(seq.distal.size() == 10);
  }
}

TEST_CASE("processed proximal points are sorted FPS picks padded with zeros") {
  PartitionConfig cfg;
  cfg.k_proximal = 16;
  auto frame = random_frame(300, 5);
  auto parts = partition(frame, cfg);
  REQUIRE(parts.proximal.size() > 16);
  auto f = process_frame(frame, cfg);
  auto expected = spherical_sort(farthest_point_sample(parts.proximal, 16));
  CHECK(f.proximal == expected);

  auto small = random_frame(6, 1);
  auto sp_small = process_frame(small, cfg);
  auto real = partition(small, cfg).proximal.size();
  for (std::size_t i = real; i < 16; ++i) CHECK(sp_small.proximal[i] == SphericalPoint{});
}

TEST_CASE("privileged height over a flat plane") {
  SceneWorld w(1);
  w.register_static_mesh(0, make_plane({0, 0, 0}, 10, 10));
  w.update_dynamic({}, 0);
  auto g = sample_privileged_height(w, 0, RigidTransform::from_translation({0.3, -0.2, 0.5}), HeightGridSpec{});
  REQUIRE(g.heights.size() == 17 * 11);
  for (auto h : g.heights) CHECK(h == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("privileged height sees a 0.2 m step, following the base heading") {
  SceneWorld w(1);
  auto m = make_plane({0, 0, 0}, 10, 10);
  m.append(make_box({0.05, -5, 0}, {5, 5, 0.2}));
  w.register_static_mesh(0, m);
  w.update_dynamic({}, 0);
  HeightGridSpec spec;
  SUBCASE("facing +x") {
    auto g = sample_privileged_height(w, 0, RigidTransform::from_translation({0, 0, 0.5}), spec);
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix) {
        double x = (ix - 8) * 0.1;
        CHECK(g.at(ix, iy) == doctest::Approx(x > 0.05 ? -0.3 : -0.5).epsilon(1e-12));
      }
  }
  SUBCASE("yawed by 90 degrees: grid x runs along world y") {
    RigidTransform base{Quat::from_yaw(pi / 2), {0, 0, 0.5}};
    auto g = sample_privileged_height(w, 0, base, spec);
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix) {
        double world_x = -(iy - 5) * 0.1;
        CHECK(g.at(ix, iy) == doctest::Approx(world_x > 0.05 ? -0.3 : -0.5).epsilon(1e-9));
      }
  }
}

TEST_CASE("privileged height over a deep pit reports the miss value") {
  SceneWorld w(1);
  auto m = make_plane({-3, 0, 0}, 4, 10);
  m.append(make_plane({0, 0, -20}, 20, 20));
  w.register_static_mesh(0, m);
  w.update_dynamic({}, 0);
  HeightGridSpec spec;
  auto g = sample_privileged_height(w, 0, RigidTransform::from_translation({0, 0, 0.5}), spec);
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      double x = (ix - 8) * 0.1;
      if (x < -1.0 + 1e-9)
        CHECK(g.at(ix, iy) == doctest::Approx(-0.5));
      else
        CHECK(g.at(ix, iy) == spec.miss_value);
    }
}
