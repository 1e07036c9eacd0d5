#pragma once

#include <cstdint>
#include <vector>

#include "lidarsim/scan_pattern.hpp"
#include "lidarsim/scene.hpp"

namespace lidarsim {

struct SensorConfig {
  PatternSpec pattern = pattern_preset("mid360-like");
  double max_range = 40.0;  // m, also the miss sentinel
  double min_range = 0.1;   // m
  RigidTransform mount;     // base -> sensor

  // Point masking: a `mask_ratio` fraction of points is replaced by a short
  // range drawn from `mask_value_range`.
  double mask_ratio = 0.1;
  Interval mask_value_range{0.0, 0.3};
  // Distance noise: a `noise_ratio` fraction of the remaining hits is scaled
  // by (1 + u), u ~ U[-noise_rel_magnitude, noise_rel_magnitude].
  double noise_ratio = 0.1;
  double noise_rel_magnitude = 0.1;
  std::uint64_t rng_seed = 0;

  // Throws Error(InvalidConfig).
  void validate() const;
};

struct ScanFrame {
  int env_id = 0;
  double t = 0;
  std::uint64_t frame_index = 0;
  double max_range = 0;
  std::vector<Vec3> directions;  // sensor frame, unit
  std::vector<double> ranges;
  std::vector<bool> hit_flags;
  std::vector<Vec3> points_base;  // base frame
  // Which entity each ray hit (-1: static geometry or miss). Not part of the
  // randomized payload.
  std::vector<EntityId> hit_entities;

  std::size_t size() const { return ranges.size(); }
  std::size_t hit_count() const;
  // Throws Error(ShapeMismatch) on unequal lengths or sentinel violations.
  void validate() const;
};

// Casts the pattern bundle for time t from base_pose * mount into env_id.
// Misses carry range = max_range and hit = false.
ScanFrame simulate_scan(const SceneWorld& world, int env_id, const RigidTransform& base_pose,
                        const SensorConfig& config, double t, std::uint64_t frame_index = 0);

// Masking then distance noise, keyed by (rng_seed, env_id, frame_index,
// point index); the result does not depend on call order or threading.
ScanFrame apply_randomization(const ScanFrame& frame, const SensorConfig& config);

}  // namespace lidarsim
