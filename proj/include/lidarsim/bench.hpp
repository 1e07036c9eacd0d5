#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lidarsim/bvh.hpp"
#include "lidarsim/scene.hpp"
#include "lidarsim/sensor.hpp"

namespace lidarsim {

// Procedural scene shared by the benchmark, validation and tests.
//   bench  - heightfield terrain + two static walls per env, irregular
//            icosphere obstacles wandering around the sensor
//   random - random triangle soup per env (static_triangles in total over
//            all envs) and small irregular dynamic entities
//   empty  - no geometry at all
struct SceneParams {
  std::string preset = "bench";
  int num_envs = 1;
  int entities_per_env = 6;
  int entity_subdivisions = 4;  // icosphere levels: 20 * 4^n triangles per entity
  int static_triangles = 5000;  // random preset only
  double env_spacing = 24.0;    // m between env origins on a square grid
  std::uint64_t seed = 1;
};

struct SceneLayout {
  struct Entity {
    int env_id = 0;
    TriangleMesh local_mesh;
    RigidTransform initial_pose;
    Aabb roam;  // region the entity origin stays in
  };

  int num_envs = 0;
  std::vector<TriangleMesh> static_meshes;  // per env, may be empty
  std::vector<Entity> entities;
  std::vector<RigidTransform> sensor_bases;  // per env
  std::vector<Aabb> env_boxes;               // per env, where rays are sampled

  std::size_t dynamic_triangle_count() const;
};

SceneLayout make_scene_layout(const SceneParams& params);
std::unique_ptr<SceneWorld> make_world(const SceneLayout& layout);

// Deterministic random walk of every entity inside its roam box: each
// advance() moves and rotates every entity by a random bounded increment.
class EntityMotion {
 public:
  EntityMotion(const SceneLayout& layout, std::uint64_t seed, double step_length = 0.4);

  const std::vector<RigidTransform>& advance();
  const std::vector<RigidTransform>& poses() const { return poses_; }
  std::unordered_map<EntityId, RigidTransform> pose_map() const;

 private:
  const SceneLayout& layout_;
  std::uint64_t seed_;
  double step_length_;
  std::uint64_t step_ = 0;
  std::vector<RigidTransform> poses_;
};

// The alternative the shared mesh is measured against: every env owns its
// dynamic mesh and rebuilds its BVH from scratch on each update.
class PerEnvRebuildScene {
 public:
  explicit PerEnvRebuildScene(const SceneLayout& layout);

  void update(const std::vector<RigidTransform>& entity_poses);
  std::optional<double> cast(int env_id, const Ray& ray) const;
  std::uint64_t rebuild_count() const { return rebuild_count_; }

 private:
  const SceneLayout& layout_;
  std::vector<std::optional<Bvh>> static_bvhs_;
  std::vector<std::vector<std::size_t>> env_entities_;
  std::vector<TriangleMesh> dynamic_meshes_;
  std::vector<std::optional<Bvh>> dynamic_bvhs_;
  std::uint64_t rebuild_count_ = 0;
};

enum class Baseline { SharedDynamic, PerEnvRebuild };
std::string_view to_string(Baseline b);
Baseline baseline_from_string(std::string_view s);

struct BenchConfig {
  std::vector<int> env_counts{1, 16, 64, 256};
  std::vector<int> rays_per_frame{1000, 4000, 16000};
  std::vector<Baseline> baselines{Baseline::SharedDynamic, Baseline::PerEnvRebuild};
  int steps = 20;  // measured steps per repetition
  int warmup_steps = 2;
  int repetitions = 3;
  SceneParams scene;
  std::string pattern = "mid360-like";
  unsigned threads = 0;  // 0: hardware concurrency

  // Throws Error(InvalidConfig).
  void validate() const;
};

struct BenchRecord {
  int envs = 0;
  int rays = 0;
  Baseline baseline = Baseline::SharedDynamic;
  int steps = 0;
  int repetitions = 0;
  double mean_ms = 0;  // per simulation step (update + every env's scan)
  double std_ms = 0;
  double rays_per_second = 0;
  double repetition_cv = 0;  // std/mean of the per-repetition means
  double update_mean_ms = 0;
};

// One record per (envs, rays, baseline), in that nesting order.
std::vector<BenchRecord> run_bench(const BenchConfig& cfg);
void write_bench_csv(const std::vector<BenchRecord>& records, std::ostream& out);

struct ValidateConfig {
  SceneParams scene{.preset = "random", .num_envs = 4, .entities_per_env = 2, .entity_subdivisions = 1};
  int rays = 1000;  // per update step
  int steps = 1;
  std::uint64_t seed = 7;
  bool stale_bvh_hook = false;  // negative control: move vertices without refitting
};

struct ValidateReport {
  std::uint64_t rays_checked = 0;
  std::uint64_t hits = 0;
  std::uint64_t mismatches = 0;
  double max_abs_dt = 0;
  bool pass = false;
};

inline constexpr double kValidateTolerance = 1e-6;

// Casts `rays` random rays, round-robin over envs, through cast() and
// compares each with brute_force_cast. Origins are drawn from each env's
// geometry bounds (padded by 1 m); every other ray is aimed at one of the
// env's dynamic entities. Adds to `report` and recomputes `pass`.
void validate_world(const SceneWorld& world, int rays, std::uint64_t seed, ValidateReport& report);

// Generated scene, entities moved by EntityMotion before each step's rays.
// Pass iff no mismatches and max |dt| <= 1e-6 m.
ValidateReport run_validate(const ValidateConfig& cfg);

}  // namespace lidarsim
