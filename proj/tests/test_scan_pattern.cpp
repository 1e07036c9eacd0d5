#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "lidarsim/error.hpp"
#include "lidarsim/scan_pattern.hpp"

using namespace lidarsim;

namespace {

PatternSpec four_channel_rotating() {
  PatternSpec s;
  s.name = "test-rotating";
  s.kind = PatternKind::Rotating;
  s.rotating.rpm = 600;
  s.rotating.channel_elevations = {deg_to_rad(-15.0), deg_to_rad(-5.0), deg_to_rad(5.0), deg_to_rad(15.0)};
  s.frame_period = 60.0 / s.rotating.rpm;
  s.rays_per_frame = 4 * 360;
  return s;
}

// 1-degree bins touched by a bundle, keyed independently of coverage_fraction.
std::set<std::pair<long, long>> bins_of(const RayBundle& b) {
  std::set<std::pair<long, long>> out;
  for (const auto& d : b.directions) {
    auto az = std::atan2(d.y, d.x) * 180 / pi;
    auto el = std::asin(d.z) * 180 / pi;
    out.insert({static_cast<long>(std::floor(az)), static_cast<long>(std::floor(el))});
  }
  return out;
}

}  // namespace

TEST_CASE("rotating: first column at azimuth 0 with the channel elevations") {
  auto s = four_channel_rotating();
  auto b = generate(s, 0.0);
  REQUIRE(b.directions.size() == 1440);
  for (int ch = 0; ch < 4; ++ch) {
    const auto& d = b.directions[ch];
    CHECK(std::abs(azimuth_of(d)) < 1e-12);
    CHECK(elevation_of(d) == doctest::Approx(s.rotating.channel_elevations[ch]).epsilon(1e-12));
  }
  // Next column is one degree further.
  CHECK(azimuth_of(b.directions[4]) == doctest::Approx(deg_to_rad(1.0)).epsilon(1e-12));
}

TEST_CASE("rotating: one revolution later gives the same directions") {
  auto s = four_channel_rotating();
  double period = 60.0 / s.rotating.rpm;
  for (double t : {0.0, 0.037, 1.25}) {
    auto a = generate(s, t), b = generate(s, t + period);
    REQUIRE(a.directions.size() == b.directions.size());
    for (std::size_t i = 0; i < a.directions.size(); ++i)
      CHECK(length(a.directions[i] - b.directions[i]) < 1e-9);
  }
}

TEST_CASE("non-repetitive frames differ and their union covers more bins") {
  for (auto name : {"mid360-like", "avia-like"}) {
    auto s = pattern_preset(name);
    auto a = generate(s, 0.0), b = generate(s, 0.1);
    CHECK(a.directions != b.directions);
    auto ba = bins_of(a), bb = bins_of(b);
    auto u = ba;
    u.insert(bb.begin(), bb.end());
    CHECK(u.size() > ba.size());
    CHECK(u.size() > bb.size());
  }
}

TEST_CASE("coverage: grid is time independent, rotating is periodic, non-repetitive grows") {
  auto grid = pattern_preset("grid");
  auto g1 = coverage_fraction(grid, 1, 1.0);
  CHECK(g1 > 0);
  CHECK(coverage_fraction(grid, 5, 1.0) == g1);

  auto rot = with_rays_per_frame(pattern_preset("vlp32-like"), 32 * 360);
  CHECK(coverage_fraction(rot, 1, 1.0) == coverage_fraction(rot, 2, 1.0));

  auto mid = pattern_preset("mid360-like");
  double prev = coverage_fraction(mid, 1, 1.0);
  auto first = prev;
  for (int f = 2; f <= 10; ++f) {
    auto c = coverage_fraction(mid, f, 1.0);
    CHECK(c > prev);
    prev = c;
  }
  CHECK(prev >= 1.5 * first);
}

TEST_CASE("coverage on a small grid matches a hand count") {
  PatternSpec s;
  s.name = "hand";
  s.kind = PatternKind::Grid;
  s.grid = {4, 3};
  s.rays_per_frame = 12;
  s.fov_horizontal = {-pi, pi};
  s.fov_vertical = {deg_to_rad(-10.0), deg_to_rad(10.0)};
  // 360 x 20 one-degree bins, 4 azimuths x 3 elevations land in 12 of them.
  CHECK(coverage_fraction(s, 1, 1.0) == doctest::Approx(12.0 / 7200.0).epsilon(1e-15));
  auto b = generate(s, 0);
  std::set<double> az;
  for (const auto& d : b.directions) az.insert(std::round(azimuth_of(d) * 1e9));
  CHECK(az.size() == 4);
}

TEST_CASE("grid elevations include both endpoints") {
  PatternSpec s;
  s.name = "ends";
  s.kind = PatternKind::Grid;
  s.grid = {3, 5};
  s.rays_per_frame = 15;
  s.fov_horizontal = {deg_to_rad(-30.0), deg_to_rad(30.0)};
  s.fov_vertical = {deg_to_rad(-20.0), deg_to_rad(20.0)};
  auto b = generate(s, 0);
  double lo = 1, hi = -1, az_lo = 1, az_hi = -1;
  for (const auto& d : b.directions) {
    lo = std::min(lo, elevation_of(d));
    hi = std::max(hi, elevation_of(d));
    az_lo = std::min(az_lo, azimuth_of(d));
    az_hi = std::max(az_hi, azimuth_of(d));
  }
  CHECK(lo == doctest::Approx(deg_to_rad(-20.0)).epsilon(1e-12));
  CHECK(hi == doctest::Approx(deg_to_rad(20.0)).epsilon(1e-12));
  CHECK(az_lo == doctest::Approx(deg_to_rad(-30.0)).epsilon(1e-12));
  CHECK(az_hi == doctest::Approx(deg_to_rad(30.0)).epsilon(1e-12));
}

TEST_CASE("every preset: unit directions inside the FOV, linear timestamps, pure in t") {
  for (const auto& name : pattern_preset_names()) {
    CAPTURE(name);
    auto s = with_rays_per_frame(pattern_preset(name), 5000);
    for (double t : {0.0, 0.05, 0.7, 13.3}) {
      auto b = generate(s, t);
      REQUIRE(b.directions.size() == static_cast<std::size_t>(s.rays_per_frame));
      REQUIRE(b.timestamps.size() == b.directions.size());
      auto h = s.horizontal_fov(), v = s.vertical_fov();
      for (std::size_t i = 0; i < b.directions.size(); ++i) {
        const auto& d = b.directions[i];
        CHECK(std::abs(length(d) - 1) < 1e-12);
        CHECK(h.contains(azimuth_of(d), 1e-9));
        CHECK(v.contains(elevation_of(d), 1e-9));
        CHECK(b.timestamps[i] >= 0);
        CHECK(b.timestamps[i] < s.frame_period);
        if (i > 0) CHECK(b.timestamps[i] >= b.timestamps[i - 1]);
      }
      auto again = generate(s, t);
      CHECK(again.directions == b.directions);
    }
  }
}

TEST_CASE("with_rays_per_frame keeps shapes valid") {
  auto v = with_rays_per_frame(pattern_preset("vlp32-like"), 4010);
  CHECK(v.rays_per_frame == 4000);
  CHECK_NOTHROW(v.validate());
  auto g = with_rays_per_frame(pattern_preset("grid"), 1000);
  CHECK(g.rays_per_frame == 992);
  CHECK_NOTHROW(g.validate());
  CHECK(with_rays_per_frame(pattern_preset("avia-like"), 777).rays_per_frame == 777);
}

TEST_CASE("invalid specs and presets are rejected") {
  CHECK_THROWS_AS(pattern_preset("nope"), Error);
  auto s = four_channel_rotating();
  s.rays_per_frame = 7;
  CHECK_THROWS_AS(s.validate(), Error);
  auto g = pattern_preset("grid");
  g.grid.azimuth_count = 3;
  CHECK_THROWS_AS(g.validate(), Error);
  auto n = pattern_preset("avia-like");
  n.non_repetitive.rate_a = 0;
  CHECK_THROWS_AS(generate(n, 0), Error);
  CHECK_THROWS_AS(generate(pattern_preset("grid"), -1.0), Error);
  CHECK_THROWS_AS(coverage_fraction(pattern_preset("grid"), 0, 1.0), Error);
  CHECK_THROWS_AS(coverage_fraction(pattern_preset("grid"), 1, 0.0), Error);
}
