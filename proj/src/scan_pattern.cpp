#include "lidarsim/scan_pattern.hpp"

#include <algorithm>
#include <cmath>

#include "lidarsim/error.hpp"

namespace lidarsim {

Vec3 direction_from_angles(double azimuth, double elevation) {
  auto c = std::cos(elevation);
  return {c * std::cos(azimuth), c * std::sin(azimuth), std::sin(elevation)};
}

double azimuth_of(const Vec3& d) { return wrap_angle(std::atan2(d.y, d.x)); }

double elevation_of(const Vec3& d) {
  auto r = length(d);
  if (r == 0) return 0;
  return std::asin(std::clamp(d.z / r, -1.0, 1.0));
}

Interval PatternSpec::horizontal_fov() const {
  if (kind == PatternKind::Rotating) return {-pi, pi};
  return fov_horizontal;
}

Interval PatternSpec::vertical_fov() const {
  if (kind == PatternKind::Rotating && !rotating.channel_elevations.empty()) {
    auto [lo, hi] = std::minmax_element(rotating.channel_elevations.begin(),
                                        rotating.channel_elevations.end());
    return {*lo, *hi};
  }
  return fov_vertical;
}

void PatternSpec::validate() const {
  auto fail = [this](const std::string& why) {
    throw Error(ErrorCode::InvalidSpec, "pattern '" + name + "': " + why);
  };
  if (rays_per_frame < 1) fail("rays_per_frame must be >= 1");
  if (!(frame_period > 0) || !std::isfinite(frame_period)) fail("frame_period must be > 0");
  switch (kind) {
    case PatternKind::Rotating:
      if (rotating.channel_elevations.empty()) fail("rotating pattern needs at least one channel");
      if (!(rotating.rpm > 0)) fail("rpm must be > 0");
      if (rays_per_frame % static_cast<int>(rotating.channel_elevations.size()) != 0)
        fail("rays_per_frame must be a multiple of the channel count");
      for (auto e : rotating.channel_elevations)
        if (!(std::abs(e) <= pi / 2)) fail("channel elevation outside [-pi/2, pi/2]");
      return;
    case PatternKind::NonRepetitive:
      if (!(non_repetitive.rate_a != 0) || !std::isfinite(non_repetitive.rate_b))
        fail("non-repetitive rates must be finite and rate_a non-zero");
      break;
    case PatternKind::Grid:
      if (grid.azimuth_count < 1 || grid.elevation_count < 1) fail("grid counts must be >= 1");
      if (grid.azimuth_count * grid.elevation_count != rays_per_frame)
        fail("grid counts must multiply to rays_per_frame");
      break;
  }
  if (!(fov_horizontal.min < fov_horizontal.max)) fail("horizontal fov min must be < max");
  if (!(fov_vertical.min < fov_vertical.max)) fail("vertical fov min must be < max");
  if (fov_horizontal.width() > 2 * pi + 1e-12) fail("horizontal fov wider than 2*pi");
  if (fov_vertical.min < -pi / 2 || fov_vertical.max > pi / 2) fail("vertical fov outside [-pi/2, pi/2]");
}

namespace {

bool full_circle(const Interval& fov) { return fov.width() >= 2 * pi - 1e-12; }

double clamp_to(const Interval& fov, double v) { return std::clamp(v, fov.min, fov.max); }

void generate_rotating(const PatternSpec& spec, double t, RayBundle& out) {
  const auto& channels = spec.rotating.channel_elevations;
  auto n_channels = static_cast<int>(channels.size());
  auto columns = spec.rays_per_frame / n_channels;
  auto omega = 2 * pi * spec.rotating.rpm / 60.0;
  for (int col = 0; col < columns; ++col) {
    auto ts = spec.frame_period * col / columns;
    auto az = wrap_angle(omega * (t + ts));
    for (int ch = 0; ch < n_channels; ++ch) {
      out.directions.push_back(direction_from_angles(az, channels[ch]));
      out.timestamps.push_back(ts);
    }
  }
}

void generate_non_repetitive(const PatternSpec& spec, double t, RayBundle& out) {
  const auto& nr = spec.non_repetitive;
  const auto& h = spec.fov_horizontal;
  const auto& v = spec.fov_vertical;
  for (int i = 0; i < spec.rays_per_frame; ++i) {
    auto ts = spec.frame_period * i / spec.rays_per_frame;
    auto tau = t + ts;
    double az, el;
    if (nr.sweep == Sweep::Panoramic) {
      az = h.min + std::fmod(nr.rate_a * tau, h.width());
      if (az < h.min) az += h.width();
      if (full_circle(h)) az = wrap_angle(az);
      el = v.center() + 0.5 * v.width() * std::sin(nr.rate_b * tau);
    } else {
      // Two counter-rotating prisms: the deflection is the sum of two
      // unit phasors, so the trace stays inside the FOV ellipse.
      auto a = nr.rate_a * tau, b = nr.rate_b * tau;
      az = h.center() + 0.25 * h.width() * (std::cos(a) + std::cos(b));
      el = v.center() + 0.25 * v.width() * (std::sin(a) + std::sin(b));
    }
    out.directions.push_back(direction_from_angles(clamp_to(h, az), clamp_to(v, el)));
    out.timestamps.push_back(ts);
  }
}

void generate_grid(const PatternSpec& spec, RayBundle& out) {
  const auto& h = spec.fov_horizontal;
  const auto& v = spec.fov_vertical;
  auto n_az = spec.grid.azimuth_count, n_el = spec.grid.elevation_count;
  auto az_step = full_circle(h) ? h.width() / n_az : (n_az > 1 ? h.width() / (n_az - 1) : 0.0);
  auto el_step = n_el > 1 ? v.width() / (n_el - 1) : 0.0;
  auto total = n_az * n_el;
  int i = 0;
  for (int a = 0; a < n_az; ++a) {
    auto az = h.min + a * az_step;
    if (full_circle(h)) az = wrap_angle(az);
    for (int e = 0; e < n_el; ++e, ++i) {
      out.directions.push_back(direction_from_angles(az, v.min + e * el_step));
      out.timestamps.push_back(spec.frame_period * i / total);
    }
  }
}

}  // namespace

RayBundle generate(const PatternSpec& spec, double t) {
  spec.validate();
  if (!(t >= 0)) throw Error(ErrorCode::InvalidSpec, "scan time must be >= 0");
  RayBundle out;
  out.directions.reserve(spec.rays_per_frame);
  out.timestamps.reserve(spec.rays_per_frame);
  switch (spec.kind) {
    case PatternKind::Rotating: generate_rotating(spec, t, out); break;
    case PatternKind::NonRepetitive: generate_non_repetitive(spec, t, out); break;
    case PatternKind::Grid: generate_grid(spec, out); break;
  }
  return out;
}

double coverage_fraction(const PatternSpec& spec, int frames, double bin_deg) {
  if (frames < 1) throw Error(ErrorCode::InvalidSpec, "frames must be >= 1");
  if (!(bin_deg > 0)) throw Error(ErrorCode::InvalidSpec, "bin size must be > 0");
  auto h = spec.horizontal_fov(), v = spec.vertical_fov();
  auto bin = deg_to_rad(bin_deg);
  auto bins_along = [bin](const Interval& fov) {
    return std::max(1L, static_cast<long>(std::ceil(fov.width() / bin - 1e-9)));
  };
  auto n_az = bins_along(h), n_el = bins_along(v);
  // Angles within rounding distance of a bin edge count towards the upper
  // bin, so periodic patterns that sample exactly on edges stay stable.
  auto index = [bin](const Interval& fov, double angle, long n) {
    auto k = static_cast<long>(std::floor((angle - fov.min) / bin + 1e-9));
    return std::clamp(k, 0L, n - 1);
  };

  std::vector<bool> touched(static_cast<std::size_t>(n_az * n_el), false);
  for (int f = 0; f < frames; ++f) {
    auto bundle = generate(spec, f * spec.frame_period);
    for (const auto& d : bundle.directions) {
      auto ia = index(h, azimuth_of(d), n_az);
      auto ie = index(v, elevation_of(d), n_el);
      touched[static_cast<std::size_t>(ie * n_az + ia)] = true;
    }
  }
  auto count = std::count(touched.begin(), touched.end(), true);
  return static_cast<double>(count) / static_cast<double>(touched.size());
}

namespace {

PatternSpec rotating_preset(std::string name, int channels, double el_min_deg, double el_max_deg,
                            int columns, double rpm) {
  PatternSpec s;
  s.name = std::move(name);
  s.kind = PatternKind::Rotating;
  s.rotating.rpm = rpm;
  for (int c = 0; c < channels; ++c)
    s.rotating.channel_elevations.push_back(
        deg_to_rad(el_min_deg + (el_max_deg - el_min_deg) * c / (channels - 1)));
  s.rays_per_frame = channels * columns;
  s.frame_period = 60.0 / rpm;
  s.fov_horizontal = {-pi, pi};
  s.fov_vertical = {deg_to_rad(el_min_deg), deg_to_rad(el_max_deg)};
  return s;
}

}  // namespace

PatternSpec pattern_preset(std::string_view name) {
  if (name == "mid360-like") {
    PatternSpec s;
    s.name = "mid360-like";
    s.kind = PatternKind::NonRepetitive;
    s.rays_per_frame = 20000;
    s.frame_period = 0.1;
    s.fov_horizontal = {-pi, pi};
    s.fov_vertical = {deg_to_rad(-7.0), deg_to_rad(52.0)};
    s.non_repetitive = {Sweep::Panoramic, 2 * pi * 10 * 1.0137, 2 * pi * 10 * 1.0137 * 37.6180339887};
    return s;
  }
  if (name == "avia-like") {
    PatternSpec s;
    s.name = "avia-like";
    s.kind = PatternKind::NonRepetitive;
    s.rays_per_frame = 24000;
    s.frame_period = 0.1;
    s.fov_horizontal = {deg_to_rad(-35.2), deg_to_rad(35.2)};
    s.fov_vertical = {deg_to_rad(-38.6), deg_to_rad(38.6)};
    s.non_repetitive = {Sweep::Rosette, 2 * pi * 17.3205080757, -2 * pi * 11.2360679775};
    return s;
  }
  if (name == "vlp32-like") return rotating_preset("vlp32-like", 32, -25.0, 15.0, 1800, 600);
  if (name == "hdl64-like") return rotating_preset("hdl64-like", 64, -24.9, 2.0, 2048, 600);
  if (name == "ouster64-like") return rotating_preset("ouster64-like", 64, -16.6, 16.6, 1024, 600);
  if (name == "grid") {
    PatternSpec s;
    s.name = "grid";
    s.kind = PatternKind::Grid;
    s.grid = {360, 16};
    s.rays_per_frame = 360 * 16;
    s.fov_horizontal = {-pi, pi};
    s.fov_vertical = {deg_to_rad(-30.0), deg_to_rad(30.0)};
    return s;
  }
  throw Error(ErrorCode::InvalidSpec, "unknown pattern preset '" + std::string(name) + "'");
}

std::vector<std::string> pattern_preset_names() {
  return {"mid360-like", "avia-like", "vlp32-like", "hdl64-like", "ouster64-like", "grid"};
}

PatternSpec with_rays_per_frame(PatternSpec spec, int rays) {
  switch (spec.kind) {
    case PatternKind::Rotating: {
      auto channels = static_cast<int>(spec.rotating.channel_elevations.size());
      spec.rays_per_frame = std::max(1, rays / std::max(channels, 1)) * channels;
      break;
    }
    case PatternKind::NonRepetitive: spec.rays_per_frame = rays; break;
    case PatternKind::Grid: {
      auto el = spec.grid.elevation_count;
      auto az = std::max(1, rays / el);
      spec.grid.azimuth_count = az;
      spec.rays_per_frame = az * el;
      break;
    }
  }
  return spec;
}

}  // namespace lidarsim
