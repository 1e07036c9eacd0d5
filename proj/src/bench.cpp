#include "lidarsim/bench.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "lidarsim/error.hpp"
#include "lidarsim/parallel.hpp"
#include "lidarsim/rng.hpp"

namespace lidarsim {

std::size_t SceneLayout::dynamic_triangle_count() const {
  std::size_t n = 0;
  for (const auto& e : entities) n += e.local_mesh.triangle_count();
  return n;
}

namespace {

Vec3 random_in(Rng& rng, const Aabb& box) {
  return {rng.uniform(box.min.x, box.max.x), rng.uniform(box.min.y, box.max.y),
          rng.uniform(box.min.z, box.max.z)};
}

Vec3 random_unit(Rng& rng) {
  auto z = rng.uniform(-1, 1);
  auto a = rng.uniform(0, 2 * pi);
  auto r = std::sqrt(std::max(0.0, 1 - z * z));
  return {r * std::cos(a), r * std::sin(a), z};
}

Quat random_rotation(Rng& rng) { return Quat::from_axis_angle(random_unit(rng), rng.uniform(-pi, pi)); }

Quat renormalized(Quat q) {
  auto n = q.norm();
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Aabb box_around(const Vec3& c, const Vec3& half) { return {c - half, c + half}; }

}  // namespace

SceneLayout make_scene_layout(const SceneParams& p) {
  if (p.num_envs < 0 || p.entities_per_env < 0 || p.entity_subdivisions < 0 || p.static_triangles < 0)
    throw Error(ErrorCode::InvalidConfig, "scene parameters must be non-negative");
  if (p.preset != "bench" && p.preset != "random" && p.preset != "empty")
    throw Error(ErrorCode::InvalidConfig, "unknown scene preset '" + p.preset + "'");

  SceneLayout layout;
  layout.num_envs = p.num_envs;
  layout.static_meshes.resize(static_cast<std::size_t>(p.num_envs));
  Rng rng(p.seed);
  auto cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p.num_envs)))));

  for (int env = 0; env < p.num_envs; ++env) {
    Vec3 origin{(env % cols) * p.env_spacing, (env / cols) * p.env_spacing, 0};
    layout.sensor_bases.push_back(RigidTransform::from_translation(origin + Vec3{0, 0, 0.5}));
    auto& statics = layout.static_meshes[static_cast<std::size_t>(env)];

    if (p.preset == "bench") {
      layout.env_boxes.push_back(box_around(origin + Vec3{0, 0, 1}, {10, 10, 2}));
      auto phase = rng.uniform(0, 2 * pi);
      statics.append(make_heightfield(origin.x - 10, origin.y - 10, 20, 16, [&](double x, double y) {
        return 0.15 * std::sin(0.7 * (x - origin.x) + phase) * std::cos(0.5 * (y - origin.y));
      }));
      statics.append(make_box(origin + Vec3{6, -4, 0}, origin + Vec3{6.3, 4, 2}));
      statics.append(make_box(origin + Vec3{-7.3, -3, 0}, origin + Vec3{-7, 5, 2.5}));
      for (int k = 0; k < p.entities_per_env; ++k) {
        SceneLayout::Entity e;
        e.env_id = env;
        e.local_mesh = make_icosphere({}, 0.5, p.entity_subdivisions, 0.25, rng.next_u64());
        e.roam = box_around(origin + Vec3{0, 0, 1}, {5, 5, 0.5});
        e.initial_pose = {random_rotation(rng), random_in(rng, e.roam)};
        layout.entities.push_back(std::move(e));
      }
    } else if (p.preset == "random") {
      auto box = box_around(origin + Vec3{0, 0, 4}, {8, 8, 8});
      layout.env_boxes.push_back(box);
      auto per_env = p.num_envs > 0 ? p.static_triangles / p.num_envs : 0;
      if (env < p.static_triangles % std::max(1, p.num_envs)) ++per_env;
      for (int t = 0; t < per_env; ++t) {
        auto c = random_in(rng, box);
        auto base = static_cast<std::uint32_t>(statics.vertices.size());
        for (int v = 0; v < 3; ++v) statics.vertices.push_back(c + random_unit(rng) * rng.uniform(0.2, 1.5));
        statics.indices.push_back({base, base + 1, base + 2});
        statics.tags.push_back(0);
      }
      for (int k = 0; k < p.entities_per_env; ++k) {
        SceneLayout::Entity e;
        e.env_id = env;
        e.local_mesh = make_icosphere({}, rng.uniform(0.4, 0.9), p.entity_subdivisions, 0.3, rng.next_u64());
        e.roam = box_around(box.center(), box.extent() * 0.4);
        e.initial_pose = {random_rotation(rng), random_in(rng, e.roam)};
        layout.entities.push_back(std::move(e));
      }
    } else {
      layout.env_boxes.push_back(box_around(origin + Vec3{0, 0, 1}, {10, 10, 2}));
    }
  }
  return layout;
}

std::unique_ptr<SceneWorld> make_world(const SceneLayout& layout) {
  auto world = std::make_unique<SceneWorld>(layout.num_envs);
  for (int env = 0; env < layout.num_envs; ++env)
    if (!layout.static_meshes[static_cast<std::size_t>(env)].empty())
      world->register_static_mesh(env, layout.static_meshes[static_cast<std::size_t>(env)]);
  for (const auto& e : layout.entities) world->register_dynamic_entity(e.env_id, e.local_mesh, e.initial_pose);
  world->update_dynamic({}, 0.0);
  return world;
}

EntityMotion::EntityMotion(const SceneLayout& layout, std::uint64_t seed, double step_length)
    : layout_(layout), seed_(seed), step_length_(step_length) {
  for (const auto& e : layout.entities) poses_.push_back(e.initial_pose);
}

const std::vector<RigidTransform>& EntityMotion::advance() {
  ++step_;
  auto base = CounterRng::keyed(seed_).child(step_);
  for (std::size_t i = 0; i < poses_.size(); ++i) {
    Rng rng(base.bits(i));
    auto& pose = poses_[i];
    const auto& roam = layout_.entities[i].roam;
    auto p = pose.translation + random_unit(rng) * step_length_;
    // Reflect back into the roam box.
    for (int a = 0; a < 3; ++a) {
      if (p[a] < roam.min[a]) p[a] = std::min(roam.max[a], 2 * roam.min[a] - p[a]);
      if (p[a] > roam.max[a]) p[a] = std::max(roam.min[a], 2 * roam.max[a] - p[a]);
    }
    pose.translation = p;
    pose.rotation = renormalized(Quat::from_axis_angle(random_unit(rng), rng.uniform(-0.3, 0.3)) * pose.rotation);
  }
  return poses_;
}

std::unordered_map<EntityId, RigidTransform> EntityMotion::pose_map() const {
  std::unordered_map<EntityId, RigidTransform> map;
  map.reserve(poses_.size());
  for (std::size_t i = 0; i < poses_.size(); ++i) map.emplace(static_cast<EntityId>(i), poses_[i]);
  return map;
}

PerEnvRebuildScene::PerEnvRebuildScene(const SceneLayout& layout) : layout_(layout) {
  auto n = static_cast<std::size_t>(layout.num_envs);
  static_bvhs_.resize(n);
  env_entities_.resize(n);
  dynamic_meshes_.resize(n);
  dynamic_bvhs_.resize(n);
  for (std::size_t env = 0; env < n; ++env)
    if (!layout.static_meshes[env].empty()) static_bvhs_[env] = build_bvh(layout.static_meshes[env]);
  for (std::size_t i = 0; i < layout.entities.size(); ++i) {
    auto env = static_cast<std::size_t>(layout.entities[i].env_id);
    env_entities_[env].push_back(i);
    dynamic_meshes_[env].append(layout.entities[i].local_mesh);
  }
  std::vector<RigidTransform> initial;
  for (const auto& e : layout.entities) initial.push_back(e.initial_pose);
  update(initial);
}

void PerEnvRebuildScene::update(const std::vector<RigidTransform>& poses) {
  parallel_for(dynamic_meshes_.size(), [&](std::size_t env) {
    auto& mesh = dynamic_meshes_[env];
    if (mesh.empty()) return;
    std::size_t v = 0;
    for (auto i : env_entities_[env]) {
      const auto& local = layout_.entities[i].local_mesh.vertices;
      for (const auto& p : local) mesh.vertices[v++] = poses[i].apply(p);
    }
    dynamic_bvhs_[env] = build_bvh(mesh);
  }, 1);
  for (const auto& m : dynamic_meshes_) rebuild_count_ += m.empty() ? 0 : 1;
}

std::optional<double> PerEnvRebuildScene::cast(int env_id, const Ray& ray) const {
  auto env = static_cast<std::size_t>(env_id);
  std::optional<double> best;
  if (static_bvhs_[env])
    if (auto hit = query_closest_hit(*static_bvhs_[env], layout_.static_meshes[env], ray)) best = hit->t;
  if (dynamic_bvhs_[env]) {
    auto clipped = ray;
    if (best) clipped.t_max = *best;
    if (auto hit = query_closest_hit(*dynamic_bvhs_[env], dynamic_meshes_[env], clipped); hit && (!best || hit->t < *best))
      best = hit->t;
  }
  return best;
}

std::string_view to_string(Baseline b) {
  return b == Baseline::SharedDynamic ? "shared_dynamic" : "per_env_rebuild";
}

Baseline baseline_from_string(std::string_view s) {
  if (s == "shared" || s == "shared_dynamic") return Baseline::SharedDynamic;
  if (s == "rebuild" || s == "per_env_rebuild") return Baseline::PerEnvRebuild;
  throw Error(ErrorCode::InvalidConfig, "unknown baseline '" + std::string(s) + "'");
}

void BenchConfig::validate() const {
  auto positive = [](const std::vector<int>& v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](int x) { return x > 0; });
  };
  if (!positive(env_counts)) throw Error(ErrorCode::InvalidConfig, "env counts must be positive");
  if (!positive(rays_per_frame)) throw Error(ErrorCode::InvalidConfig, "ray counts must be positive");
  if (baselines.empty()) throw Error(ErrorCode::InvalidConfig, "at least one baseline required");
  if (steps < 1 || warmup_steps < 0) throw Error(ErrorCode::InvalidConfig, "steps must be >= 1, warm-up >= 0");
  if (repetitions < 3) throw Error(ErrorCode::InvalidConfig, "repetitions must be >= 3");
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct StepTimes {
  double total_ms = 0;
  double update_ms = 0;
};

BenchRecord measure(const BenchConfig& cfg, int envs, int rays, Baseline baseline) {
  auto params = cfg.scene;
  params.num_envs = envs;
  auto layout = make_scene_layout(params);
  auto pattern = with_rays_per_frame(pattern_preset(cfg.pattern), rays);
  auto threads = cfg.threads ? cfg.threads : default_thread_count();
  EntityMotion motion(layout, params.seed ^ 0x5eedull);

  std::unique_ptr<SceneWorld> shared;
  std::unique_ptr<PerEnvRebuildScene> per_env;
  if (baseline == Baseline::SharedDynamic)
    shared = make_world(layout);
  else
    per_env = std::make_unique<PerEnvRebuildScene>(layout);

  std::vector<std::vector<Ray>> env_rays(static_cast<std::size_t>(envs));
  std::vector<std::vector<std::optional<SceneHit>>> env_hits(static_cast<std::size_t>(envs));
  std::vector<double> sink(static_cast<std::size_t>(envs), 0.0);

  std::uint64_t frame = 0;
  auto step = [&]() -> StepTimes {
    auto t = static_cast<double>(frame) * pattern.frame_period;
    auto start = Clock::now();
    const auto& poses = motion.advance();
    if (shared)
      shared->update_dynamic(motion.pose_map(), t);
    else
      per_env->update(poses);
    auto update_ms = ms_since(start);

    auto bundle = generate(pattern, t);
    parallel_for(static_cast<std::size_t>(envs), [&](std::size_t env) {
      const auto& base = layout.sensor_bases[env];
      auto& rs = env_rays[env];
      rs.resize(bundle.directions.size());
      for (std::size_t i = 0; i < rs.size(); ++i)
        rs[i] = Ray{base.translation, base.apply_direction(bundle.directions[i]), 0.1, 40.0};
      double acc = 0;
      if (shared) {
        auto& hs = env_hits[env];
        hs.resize(rs.size());
        shared->cast_batch(static_cast<int>(env), rs, hs);
        for (const auto& h : hs) acc += h ? h->t : 40.0;
      } else {
        for (const auto& r : rs) {
          auto h = per_env->cast(static_cast<int>(env), r);
          acc += h ? *h : 40.0;
        }
      }
      sink[env] = acc;
    }, 1, threads);
    ++frame;
    return {ms_since(start), update_ms};
  };

  for (int i = 0; i < cfg.warmup_steps; ++i) step();

  std::vector<double> samples, rep_means;
  double update_sum = 0;
  for (int r = 0; r < cfg.repetitions; ++r) {
    double rep_sum = 0;
    for (int s = 0; s < cfg.steps; ++s) {
      auto times = step();
      samples.push_back(times.total_ms);
      update_sum += times.update_ms;
      rep_sum += times.total_ms;
    }
    rep_means.push_back(rep_sum / cfg.steps);
  }

  auto mean_of = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  auto std_of = [&](const std::vector<double>& v) {
    auto m = mean_of(v);
    double acc = 0;
    for (auto x : v) acc += (x - m) * (x - m);
    return v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1)) : 0.0;
  };

  BenchRecord rec;
  rec.envs = envs;
  rec.rays = pattern.rays_per_frame;
  rec.baseline = baseline;
  rec.steps = cfg.steps;
  rec.repetitions = cfg.repetitions;
  rec.mean_ms = mean_of(samples);
  rec.std_ms = std_of(samples);
  rec.rays_per_second = rec.mean_ms > 0 ? envs * static_cast<double>(rec.rays) / (rec.mean_ms / 1000.0) : 0;
  rec.repetition_cv = rec.mean_ms > 0 ? std_of(rep_means) / mean_of(rep_means) : 0;
  rec.update_mean_ms = update_sum / static_cast<double>(samples.size());
  return rec;
}

}  // namespace

std::vector<BenchRecord> run_bench(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<BenchRecord> out;
  for (auto envs : cfg.env_counts)
    for (auto rays : cfg.rays_per_frame)
      for (auto baseline : cfg.baselines) out.push_back(measure(cfg, envs, rays, baseline));
  return out;
}

void write_bench_csv(const std::vector<BenchRecord>& records, std::ostream& out) {
  out << "envs,rays,baseline,steps,repetitions,mean_ms,std_ms,rays_per_second,repetition_cv,update_mean_ms\n";
  for (const auto& r : records)
    out << r.envs << ',' << r.rays << ',' << to_string(r.baseline) << ',' << r.steps << ',' << r.repetitions
        << ',' << r.mean_ms << ',' << r.std_ms << ',' << r.rays_per_second << ',' << r.repetition_cv << ','
        << r.update_mean_ms << '\n';
}

void validate_world(const SceneWorld& world, int rays, std::uint64_t seed, ValidateReport& report) {
  Rng rng(seed);
  auto envs = world.num_envs();
  std::vector<Aabb> boxes;
  std::vector<std::vector<const DynamicEntity*>> movers(static_cast<std::size_t>(envs));
  for (int env = 0; env < envs; ++env) {
    auto b = world.env_bounds(env).value_or(Aabb{{-1, -1, -1}, {1, 1, 1}});
    boxes.push_back({b.min - Vec3{1, 1, 1}, b.max + Vec3{1, 1, 1}});
  }
  for (const auto& e : world.entities()) movers[static_cast<std::size_t>(e.env_id)].push_back(&e);

  for (int r = 0; envs > 0 && r < rays; ++r) {
    auto env = r % envs;
    auto origin = random_in(rng, boxes[static_cast<std::size_t>(env)]);
    auto dir = random_unit(rng);
    const auto& candidates = movers[static_cast<std::size_t>(env)];
    if (r % 2 == 1 && !candidates.empty()) {
      const auto* e = candidates[rng.below(candidates.size())];
      auto to = e->pose.translation + random_unit(rng) * 0.3 - origin;
      if (length(to) > 1e-9) dir = normalize(to);
    }
    Ray ray{origin, dir, 0.0, 1e3};
    auto got = world.cast(env, ray);
    auto want = world.brute_force_cast(env, ray);
    ++report.rays_checked;
    if (want) ++report.hits;
    if (got.has_value() != want.has_value()) {
      ++report.mismatches;
      continue;
    }
    if (!got) continue;
    auto dt = std::abs(got->t - want->t);
    report.max_abs_dt = std::max(report.max_abs_dt, dt);
    if (got->dynamic != want->dynamic || got->triangle_index != want->triangle_index || dt > kValidateTolerance)
      ++report.mismatches;
  }
  report.pass = report.mismatches == 0 && report.max_abs_dt <= kValidateTolerance;
}

ValidateReport run_validate(const ValidateConfig& cfg) {
  auto layout = make_scene_layout(cfg.scene);
  auto world = make_world(layout);
  world->set_skip_refit_for_testing(cfg.stale_bvh_hook);
  EntityMotion motion(layout, cfg.seed);

  ValidateReport report;
  for (int step = 0; step < std::max(1, cfg.steps); ++step) {
    motion.advance();
    world->update_dynamic(motion.pose_map(), step + 1.0);
    validate_world(*world, cfg.rays, CounterRng::keyed(cfg.seed).bits(static_cast<std::uint64_t>(step)), report);
  }
  report.pass = report.mismatches == 0 && report.max_abs_dt <= kValidateTolerance;
  return report;
}

}  // namespace lidarsim
