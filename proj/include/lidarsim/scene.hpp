#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "lidarsim/bvh.hpp"
#include "lidarsim/mesh.hpp"

namespace lidarsim {

using EntityId = std::int32_t;

struct DynamicEntity {
  EntityId id = 0;
  int env_id = 0;
  TriangleMesh local_mesh;  // entity frame
  std::uint32_t vertex_begin = 0;
  std::uint32_t triangle_begin = 0;
  RigidTransform pose;

  std::uint32_t vertex_count() const { return static_cast<std::uint32_t>(local_mesh.vertices.size()); }
  std::uint32_t triangle_count() const { return static_cast<std::uint32_t>(local_mesh.triangle_count()); }
};

struct SceneHit {
  double t = 0;
  Vec3 point;
  bool dynamic = false;
  std::uint32_t triangle_index = 0;  // into the static mesh of the env or the global dynamic mesh
  EntityId entity = -1;              // -1 for static geometry
};

// Per-environment static meshes (BVH built once) plus a single dynamic mesh
// shared by all environments, its triangles tagged with their environment.
//
// Phases alternate: update_dynamic() is exclusive, cast() may run from any
// number of threads between updates. Overlap is detected and reported as
// Error(PhaseViolation) instead of racing.
class SceneWorld {
 public:
  explicit SceneWorld(int num_envs);

  int num_envs() const { return num_envs_; }
  double sim_time() const { return sim_time_; }

  // Throws InvalidEnv, AlreadyRegistered, EmptyMesh, TopologyFrozen.
  void register_static_mesh(int env_id, TriangleMesh mesh);
  // Appends to the global dynamic mesh; the shared BVH becomes stale until
  // the next update_dynamic(). Throws InvalidEnv, TopologyFrozen.
  EntityId register_dynamic_entity(int env_id, TriangleMesh local_mesh,
                                   const RigidTransform& initial_pose = RigidTransform::identity());

  // Applies poses (entities not listed keep their previous pose), rewrites
  // the global vertices and performs one refit of the shared BVH (a full
  // build the first time after registration). Throws UnknownEntity,
  // InvalidConfig for non-unit rotations, PhaseViolation.
  void update_dynamic(const std::unordered_map<EntityId, RigidTransform>& poses, double t);

  // Closest hit among env's static mesh and the dynamic triangles tagged
  // env_id. Static wins exact ties. Throws InvalidEnv, StaleDynamicBvh,
  // PhaseViolation.
  std::optional<SceneHit> cast(int env_id, const Ray& ray) const;
  // Same as cast() for many rays under one query-phase guard.
  void cast_batch(int env_id, std::span<const Ray> rays, std::span<std::optional<SceneHit>> out) const;
  // Static geometry only (terrain probes).
  std::optional<SceneHit> cast_static(int env_id, const Ray& ray) const;
  // Exhaustive reference over the same triangle sets as cast().
  std::optional<SceneHit> brute_force_cast(int env_id, const Ray& ray) const;

  const TriangleMesh* static_mesh(int env_id) const;
  const Bvh* static_bvh(int env_id) const;
  const TriangleMesh& dynamic_mesh() const { return dynamic_mesh_; }
  const Bvh* dynamic_bvh() const { return dynamic_bvh_ ? &*dynamic_bvh_ : nullptr; }
  std::span<const DynamicEntity> entities() const { return entities_; }
  const DynamicEntity& entity(EntityId id) const;
  bool dynamic_stale() const { return dynamic_stale_; }
  // Bounds of all geometry registered for env (static and dynamic), if any.
  std::optional<Aabb> env_bounds(int env_id) const;

  std::uint64_t refit_count() const { return refit_count_; }
  std::uint64_t build_count() const { return build_count_; }
  std::uint64_t rebuild_count() const { return rebuild_count_; }

  // Test hook: move vertices on update without touching the BVH, leaving it
  // deliberately inconsistent. Used as a negative control by validation.
  void set_skip_refit_for_testing(bool skip) { skip_refit_ = skip; }

  // Holds the query phase open; update_dynamic() fails while any scope lives.
  class QueryScope {
   public:
    explicit QueryScope(const SceneWorld& world);
    ~QueryScope();
    QueryScope(const QueryScope&) = delete;
    QueryScope& operator=(const QueryScope&) = delete;

   private:
    const SceneWorld& world_;
  };

  // A refit that leaves the node-area sum above this multiple of its
  // build-time value triggers a rebuild.
  static constexpr double kRebuildAreaRatio = 4.0;

 private:
  struct PhaseState {
    std::atomic<int> active_queries{0};
    std::atomic<bool> updating{false};
    std::atomic<bool> frozen{false};
  };

  void check_env(int env_id) const;
  void check_registration_open() const;
  std::optional<SceneHit> cast_unguarded(int env_id, const Ray& ray) const;
  EntityId entity_of_triangle(std::uint32_t tri) const;

  int num_envs_;
  double sim_time_ = 0;
  std::vector<std::optional<TriangleMesh>> static_meshes_;
  std::vector<std::optional<Bvh>> static_bvhs_;
  TriangleMesh dynamic_mesh_;
  std::optional<Bvh> dynamic_bvh_;
  std::vector<DynamicEntity> entities_;
  std::vector<EntityId> triangle_entity_;
  bool dynamic_stale_ = false;
  bool skip_refit_ = false;
  double built_area_sum_ = 0;
  std::uint64_t refit_count_ = 0, build_count_ = 0, rebuild_count_ = 0;
  std::unique_ptr<PhaseState> phase_ = std::make_unique<PhaseState>();
};

}  // namespace lidarsim
