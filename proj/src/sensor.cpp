#include "lidarsim/sensor.hpp"

#include <algorithm>
#include <cmath>

#include "lidarsim/error.hpp"
#include "lidarsim/rng.hpp"

namespace lidarsim {

void SensorConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (!(min_range >= 0 && min_range < max_range) || !std::isfinite(max_range))
    fail("sensor ranges must satisfy 0 <= min_range < max_range");
  if (!(mask_ratio >= 0 && mask_ratio <= 1)) fail("mask_ratio outside [0, 1]");
  if (!(noise_ratio >= 0 && noise_ratio <= 1)) fail("noise_ratio outside [0, 1]");
  if (!(mask_value_range.min <= mask_value_range.max) || mask_value_range.min < 0)
    fail("mask value range must satisfy 0 <= lo <= hi");
  if (!(noise_rel_magnitude >= 0)) fail("noise magnitude must be >= 0");
  if (!mount.is_valid()) fail("mount rotation is not a unit quaternion");
  pattern.validate();
}

std::size_t ScanFrame::hit_count() const {
  return static_cast<std::size_t>(std::count(hit_flags.begin(), hit_flags.end(), true));
}

void ScanFrame::validate() const {
  auto n = ranges.size();
  if (directions.size() != n || hit_flags.size() != n || points_base.size() != n)
    throw Error(ErrorCode::ShapeMismatch, "scan frame arrays have unequal lengths");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ranges[i] >= 0 && ranges[i] <= max_range))
      throw Error(ErrorCode::ShapeMismatch, "range outside [0, max_range] at point " + std::to_string(i));
    if (!hit_flags[i] && ranges[i] != max_range)
      throw Error(ErrorCode::ShapeMismatch, "miss without sentinel range at point " + std::to_string(i));
  }
}

ScanFrame simulate_scan(const SceneWorld& world, int env_id, const RigidTransform& base_pose,
                        const SensorConfig& config, double t, std::uint64_t frame_index) {
  config.validate();
  auto bundle = generate(config.pattern, t);
  auto sensor_pose = base_pose * config.mount;
  auto n = bundle.directions.size();

  std::vector<Ray> rays(n);
  for (std::size_t i = 0; i < n; ++i)
    rays[i] = Ray{sensor_pose.translation, normalize(sensor_pose.apply_direction(bundle.directions[i])),
                  config.min_range, config.max_range};
  std::vector<std::optional<SceneHit>> hits(n);
  world.cast_batch(env_id, rays, hits);

  ScanFrame frame;
  frame.env_id = env_id;
  frame.t = t;
  frame.frame_index = frame_index;
  frame.max_range = config.max_range;
  frame.directions = std::move(bundle.directions);
  frame.ranges.resize(n);
  frame.hit_flags.resize(n);
  frame.points_base.resize(n);
  frame.hit_entities.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& hit = hits[i];
    frame.ranges[i] = hit ? hit->t : config.max_range;
    frame.hit_flags[i] = hit.has_value();
    if (hit) frame.hit_entities[i] = hit->entity;
    frame.points_base[i] = config.mount.apply(frame.directions[i] * frame.ranges[i]);
  }
  return frame;
}

ScanFrame apply_randomization(const ScanFrame& frame, const SensorConfig& config) {
  config.validate();
  auto out = frame;
  auto rng = CounterRng::keyed(config.rng_seed)
                 .child(static_cast<std::uint64_t>(frame.env_id))
                 .child(frame.frame_index);
  const auto& mask = config.mask_value_range;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto counter = 4 * static_cast<std::uint64_t>(i);
    if (rng.uniform(counter) < config.mask_ratio) {
      out.ranges[i] = std::min(rng.uniform(counter + 1, mask.min, mask.max), frame.max_range);
      out.hit_flags[i] = true;
    } else if (frame.hit_flags[i] && rng.uniform(counter + 2) < config.noise_ratio) {
      auto u = rng.uniform(counter + 3, -config.noise_rel_magnitude, config.noise_rel_magnitude);
      out.ranges[i] = std::clamp(frame.ranges[i] * (1 + u), 0.0, frame.max_range);
    } else {
      continue;
    }
    out.points_base[i] = config.mount.apply(out.directions[i] * out.ranges[i]);
  }
  return out;
}

}  // namespace lidarsim
