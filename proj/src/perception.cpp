#include "lidarsim/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lidarsim/error.hpp"

namespace lidarsim {

SphericalPoint make_spherical_point(const Vec3& direction, double range, bool hit) {
  auto d = normalize(direction);
  return {elevation_of(d), azimuth_of(d), range, d * range, hit};
}

void PartitionConfig::validate() const {
  if (k_proximal < 1) throw Error(ErrorCode::InvalidConfig, "k_proximal must be >= 1");
  if (distal.n_theta < 1 || distal.n_phi < 1) throw Error(ErrorCode::InvalidConfig, "distal bins must be >= 1");
  if (!(distal.theta.min < distal.theta.max) || !(distal.phi.min < distal.phi.max))
    throw Error(ErrorCode::InvalidConfig, "distal grid intervals must have min < max");
  if (n_hist < 1) throw Error(ErrorCode::InvalidConfig, "n_hist must be >= 1");
}

Partition partition(const ScanFrame& frame, const PartitionConfig& cfg) {
  Partition out;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    auto p = make_spherical_point(frame.directions[i], frame.ranges[i], frame.hit_flags[i]);
    if (p.hit && p.theta > cfg.theta_threshold)
      out.proximal.push_back(p);
    else
      out.distal.push_back(p);
  }
  return out;
}

std::vector<std::size_t> farthest_point_indices(std::span<const Vec3> positions, std::size_t k,
                                                std::size_t start_index) {
  auto n = positions.size();
  std::vector<std::size_t> selected;
  if (n == 0 || k == 0) return selected;
  k = std::min(k, n);
  selected.reserve(k);

  // min_dist[i]: squared distance from i to the nearest selected point.
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  auto current = start_index;
  for (;;) {
    selected.push_back(current);
    taken[current] = true;
    if (selected.size() == k) break;
    const auto& c = positions[current];
    std::size_t best = n;
    double best_dist = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      auto d = positions[i] - c;
      min_dist[i] = std::min(min_dist[i], d.x * d.x + d.y * d.y + d.z * d.z);
      if (min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = i;
      }
    }
    current = best;
  }
  return selected;
}

std::vector<SphericalPoint> farthest_point_sample(std::span<const SphericalPoint> points, std::size_t k,
                                                  FpsStart start) {
  if (points.empty()) return {};
  std::size_t start_index = 0;
  if (start == FpsStart::MaxRange) {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (points[i].range > points[start_index].range) start_index = i;
  }
  std::vector<Vec3> positions(points.size());
  std::transform(points.begin(), points.end(), positions.begin(), [](const auto& p) { return p.position; });
  std::vector<SphericalPoint> out;
  for (auto i : farthest_point_indices(positions, k, start_index)) out.push_back(points[i]);
  return out;
}

std::vector<SphericalPoint> average_downsample(std::span<const SphericalPoint> points,
                                               const DownsampleGrid& grid) {
  auto n = grid.size();
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  auto theta_step = grid.theta.width() / grid.n_theta;
  auto phi_step = grid.phi.width() / grid.n_phi;
  auto bin = [](double v, double lo, double step, int count) {
    auto k = static_cast<long>(std::floor((v - lo) / step));
    return static_cast<std::size_t>(std::clamp(k, 0L, static_cast<long>(count) - 1));
  };
  for (const auto& p : points) {
    if (!p.hit) continue;
    auto it = bin(p.theta, grid.theta.min, theta_step, grid.n_theta);
    auto ip = bin(p.phi, grid.phi.min, phi_step, grid.n_phi);
    auto idx = it * static_cast<std::size_t>(grid.n_phi) + ip;
    sum[idx] += p.range;
    ++count[idx];
  }
  std::vector<SphericalPoint> out;
  out.reserve(n);
  for (int it = 0; it < grid.n_theta; ++it)
    for (int ip = 0; ip < grid.n_phi; ++ip) {
      auto idx = static_cast<std::size_t>(it) * static_cast<std::size_t>(grid.n_phi) + static_cast<std::size_t>(ip);
      auto theta = grid.theta.min + (it + 0.5) * theta_step;
      auto phi = grid.phi.min + (ip + 0.5) * phi_step;
      bool filled = count[idx] > 0;
      auto range = filled ? sum[idx] / static_cast<double>(count[idx]) : grid.sentinel;
      out.push_back({theta, phi, range, direction_from_angles(phi, theta) * range, filled});
    }
  return out;
}

std::vector<SphericalPoint> spherical_sort(std::vector<SphericalPoint> points) {
  std::stable_sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
    return a.theta < b.theta || (a.theta == b.theta && a.phi < b.phi);
  });
  return points;
}

ProcessedFrame process_frame(const ScanFrame& frame, const PartitionConfig& cfg) {
  cfg.validate();
  auto parts = partition(frame, cfg);
  ProcessedFrame out;
  out.proximal = spherical_sort(
      farthest_point_sample(parts.proximal, static_cast<std::size_t>(cfg.k_proximal), cfg.fps_start));
  out.proximal.resize(static_cast<std::size_t>(cfg.k_proximal));
  out.distal = average_downsample(parts.distal, cfg.distal);
  return out;
}

HistoryBuffer::HistoryBuffer(const PartitionConfig& cfg)
    : n_hist_(static_cast<std::size_t>(cfg.n_hist)),
      k_proximal_(static_cast<std::size_t>(cfg.k_proximal)),
      distal_size_(cfg.distal.size()) {
  cfg.validate();
}

HistorySequences HistoryBuffer::push_and_assemble(std::vector<SphericalPoint> proximal,
                                                  std::vector<SphericalPoint> distal) {
  if (proximal.size() != k_proximal_ || distal.size() != distal_size_)
    throw Error(ErrorCode::ShapeMismatch,
                "frame shapes (" + std::to_string(proximal.size()) + ", " + std::to_string(distal.size()) +
                    ") differ from configured (" + std::to_string(k_proximal_) + ", " +
                    std::to_string(distal_size_) + ")");
  proximal_.push_back(std::move(proximal));
  distal_.push_back(std::move(distal));
  if (proximal_.size() > n_hist_) {
    proximal_.pop_front();
    distal_.pop_front();
  }
  return assemble();
}

HistorySequences HistoryBuffer::assemble() const {
  HistorySequences seq;
  auto missing = n_hist_ - proximal_.size();
  seq.proximal.assign(missing, std::vector<SphericalPoint>(k_proximal_));
  seq.distal.assign(missing, std::vector<SphericalPoint>(distal_size_));
  seq.proximal.insert(seq.proximal.end(), proximal_.begin(), proximal_.end());
  seq.distal.insert(seq.distal.end(), distal_.begin(), distal_.end());
  return seq;
}

void HistoryBuffer::clear() {
  proximal_.clear();
  distal_.clear();
}

HeightGrid sample_privileged_height(const SceneWorld& world, int env_id, const RigidTransform& base_pose,
                                    const HeightGridSpec& grid) {
  if (grid.nx < 1 || grid.ny < 1 || !(grid.spacing > 0) || !(grid.probe_depth > 0))
    throw Error(ErrorCode::InvalidConfig, "height grid needs nx, ny >= 1 and positive spacing/depth");
  HeightGrid out{grid.nx, grid.ny, std::vector<double>(static_cast<std::size_t>(grid.nx * grid.ny), grid.miss_value)};
  const auto* bvh = world.static_bvh(env_id);
  if (!bvh) return out;

  auto base_z = base_pose.translation.z;
  auto top = std::max(bvh->bounds().max.z, base_z) + 1.0;
  auto heading = RigidTransform{Quat::from_yaw(yaw_of(base_pose.rotation)), base_pose.translation};
  for (int iy = 0; iy < grid.ny; ++iy)
    for (int ix = 0; ix < grid.nx; ++ix) {
      Vec3 local{(ix - (grid.nx - 1) / 2.0) * grid.spacing, (iy - (grid.ny - 1) / 2.0) * grid.spacing, 0};
      auto p = heading.apply(local);
      Ray ray{{p.x, p.y, top}, {0, 0, -1}, 0, top - base_z + grid.probe_depth};
      if (auto hit = world.cast_static(env_id, ray))
        out.heights[static_cast<std::size_t>(iy * grid.nx + ix)] = hit->point.z - base_z;
    }
  return out;
}

}  // namespace lidarsim
