#include "lidarsim/scene.hpp"

#include <string>

#include "lidarsim/error.hpp"
#include "lidarsim/parallel.hpp"

namespace lidarsim {

SceneWorld::SceneWorld(int num_envs) : num_envs_(num_envs) {
  if (num_envs < 0) throw Error(ErrorCode::InvalidEnv, "negative environment count");
  static_meshes_.resize(num_envs);
  static_bvhs_.resize(num_envs);
}

void SceneWorld::check_env(int env_id) const {
  if (env_id < 0 || env_id >= num_envs_)
    throw Error(ErrorCode::InvalidEnv,
                "env " + std::to_string(env_id) + " outside [0, " + std::to_string(num_envs_) + ")");
}

void SceneWorld::check_registration_open() const {
  if (phase_->frozen.load())
    throw Error(ErrorCode::TopologyFrozen, "scene topology is fixed after the first scan");
}

void SceneWorld::register_static_mesh(int env_id, TriangleMesh mesh) {
  check_env(env_id);
  check_registration_open();
  if (static_meshes_[env_id])
    throw Error(ErrorCode::AlreadyRegistered, "static mesh for env " + std::to_string(env_id));
  mesh.set_tags(env_id);
  static_bvhs_[env_id] = build_bvh(mesh);
  static_meshes_[env_id] = std::move(mesh);
}

EntityId SceneWorld::register_dynamic_entity(int env_id, TriangleMesh local_mesh,
                                             const RigidTransform& initial_pose) {
  check_env(env_id);
  check_registration_open();
  local_mesh.set_tags(env_id);
  local_mesh.validate();
  if (!initial_pose.is_valid())
    throw Error(ErrorCode::InvalidConfig, "initial pose rotation is not a unit quaternion");

  DynamicEntity e;
  e.id = static_cast<EntityId>(entities_.size());
  e.env_id = env_id;
  e.pose = initial_pose;
  e.triangle_begin = static_cast<std::uint32_t>(dynamic_mesh_.triangle_count());
  e.vertex_begin = dynamic_mesh_.append(transformed(local_mesh, initial_pose), env_id);
  triangle_entity_.insert(triangle_entity_.end(), local_mesh.triangle_count(), e.id);
  e.local_mesh = std::move(local_mesh);
  entities_.push_back(std::move(e));
  dynamic_stale_ = true;
  return entities_.back().id;
}

const DynamicEntity& SceneWorld::entity(EntityId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entities_.size())
    throw Error(ErrorCode::UnknownEntity, "entity " + std::to_string(id));
  return entities_[id];
}

void SceneWorld::update_dynamic(const std::unordered_map<EntityId, RigidTransform>& poses, double t) {
  for (const auto& [id, pose] : poses) {
    entity(id);
    if (!pose.is_valid())
      throw Error(ErrorCode::InvalidConfig, "pose of entity " + std::to_string(id) +
                                                " is not a unit-quaternion rigid transform");
  }

  if (phase_->updating.exchange(true))
    throw Error(ErrorCode::PhaseViolation, "concurrent update_dynamic calls");
  if (phase_->active_queries.load() != 0) {
    phase_->updating = false;
    throw Error(ErrorCode::PhaseViolation, "update_dynamic while casts are in flight");
  }

  for (const auto& [id, pose] : poses) entities_[id].pose = pose;
  parallel_for(entities_.size(), [this](std::size_t i) {
    const auto& e = entities_[i];
    for (std::uint32_t v = 0; v < e.vertex_count(); ++v)
      dynamic_mesh_.vertices[e.vertex_begin + v] = e.pose.apply(e.local_mesh.vertices[v]);
  }, 8);

  if (!dynamic_mesh_.empty()) {
    if (!dynamic_bvh_ || dynamic_bvh_->triangle_count() != dynamic_mesh_.triangle_count()) {
      dynamic_bvh_ = build_bvh(dynamic_mesh_, triangle_entity_);
      built_area_sum_ = dynamic_bvh_->surface_area_sum();
      ++build_count_;
    } else if (!skip_refit_) {
      dynamic_bvh_->refit(dynamic_mesh_);
      ++refit_count_;
      if (dynamic_bvh_->surface_area_sum() > kRebuildAreaRatio * built_area_sum_) {
        dynamic_bvh_ = build_bvh(dynamic_mesh_, triangle_entity_);
        built_area_sum_ = dynamic_bvh_->surface_area_sum();
        ++rebuild_count_;
      }
    }
  }
  dynamic_stale_ = false;
  sim_time_ = t;
  phase_->updating = false;
}

SceneWorld::QueryScope::QueryScope(const SceneWorld& world) : world_(world) {
  world_.phase_->active_queries.fetch_add(1);
  if (world_.phase_->updating.load()) {
    world_.phase_->active_queries.fetch_sub(1);
    throw Error(ErrorCode::PhaseViolation, "cast during update_dynamic");
  }
  if (world_.dynamic_stale_) {
    world_.phase_->active_queries.fetch_sub(1);
    throw Error(ErrorCode::StaleDynamicBvh, "dynamic entities registered since the last update_dynamic");
  }
  if (!world_.phase_->frozen.load(std::memory_order_relaxed)) world_.phase_->frozen.store(true);
}

SceneWorld::QueryScope::~QueryScope() { world_.phase_->active_queries.fetch_sub(1); }

EntityId SceneWorld::entity_of_triangle(std::uint32_t tri) const { return triangle_entity_[tri]; }

std::optional<SceneHit> SceneWorld::cast_static(int env_id, const Ray& ray) const {
  check_env(env_id);
  const auto& bvh = static_bvhs_[env_id];
  if (!bvh) return std::nullopt;
  auto hit = query_closest_hit(*bvh, *static_meshes_[env_id], ray);
  if (!hit) return std::nullopt;
  return SceneHit{hit->t, hit->point, false, hit->triangle_index, -1};
}

std::optional<SceneHit> SceneWorld::cast_unguarded(int env_id, const Ray& ray) const {
  auto best = cast_static(env_id, ray);
  if (dynamic_bvh_) {
    auto clipped = ray;
    if (best) clipped.t_max = best->t;
    auto hit = query_closest_hit(*dynamic_bvh_, dynamic_mesh_, clipped, env_id);
    if (hit && (!best || hit->t < best->t))
      best = SceneHit{hit->t, hit->point, true, hit->triangle_index, entity_of_triangle(hit->triangle_index)};
  }
  return best;
}

std::optional<SceneHit> SceneWorld::cast(int env_id, const Ray& ray) const {
  check_env(env_id);
  QueryScope scope(*this);
  return cast_unguarded(env_id, ray);
}

void SceneWorld::cast_batch(int env_id, std::span<const Ray> rays,
                            std::span<std::optional<SceneHit>> out) const {
  check_env(env_id);
  if (out.size() != rays.size()) throw Error(ErrorCode::ShapeMismatch, "output span size differs from ray count");
  QueryScope scope(*this);
  for (std::size_t i = 0; i < rays.size(); ++i) out[i] = cast_unguarded(env_id, rays[i]);
}

std::optional<SceneHit> SceneWorld::brute_force_cast(int env_id, const Ray& ray) const {
  check_env(env_id);
  std::optional<SceneHit> best;
  if (static_meshes_[env_id]) {
    if (auto hit = brute_force_closest_hit(*static_meshes_[env_id], ray))
      best = SceneHit{hit->t, hit->point, false, hit->triangle_index, -1};
  }
  if (auto hit = brute_force_closest_hit(dynamic_mesh_, ray, env_id);
      hit && (!best || hit->t < best->t))
    best = SceneHit{hit->t, hit->point, true, hit->triangle_index, entity_of_triangle(hit->triangle_index)};
  return best;
}

const TriangleMesh* SceneWorld::static_mesh(int env_id) const {
  check_env(env_id);
  return static_meshes_[env_id] ? &*static_meshes_[env_id] : nullptr;
}

const Bvh* SceneWorld::static_bvh(int env_id) const {
  check_env(env_id);
  return static_bvhs_[env_id] ? &*static_bvhs_[env_id] : nullptr;
}

std::optional<Aabb> SceneWorld::env_bounds(int env_id) const {
  check_env(env_id);
  Aabb box;
  if (static_bvhs_[env_id]) box.expand(static_bvhs_[env_id]->bounds());
  for (const auto& e : entities_) {
    if (e.env_id != env_id) continue;
    for (std::uint32_t v = 0; v < e.vertex_count(); ++v) box.expand(dynamic_mesh_.vertices[e.vertex_begin + v]);
  }
  if (box.is_empty()) return std::nullopt;
  return box;
}

}  // namespace lidarsim
