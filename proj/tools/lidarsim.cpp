#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lidarsim/bench.hpp"
#include "lidarsim/error.hpp"
#include "lidarsim/io.hpp"
#include "lidarsim/perception.hpp"
#include "lidarsim/risk_reward.hpp"
#include "lidarsim/sensor.hpp"

using namespace lidarsim;
namespace fs = std::filesystem;

namespace {

RigidTransform parse_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Parse, "bad pose component '" + item + "'");
    }
  }
  if (v.size() != 3 && v.size() != 7) throw Error(ErrorCode::Parse, "pose is x,y,z or x,y,z,qw,qx,qy,qz");
  RigidTransform xf = RigidTransform::from_translation({v[0], v[1], v[2]});
  if (v.size() == 7) {
    Quat q{v[3], v[4], v[5], v[6]};
    auto n = q.norm();
    if (n == 0) throw Error(ErrorCode::Parse, "zero quaternion in pose");
    xf.rotation = {q.w / n, q.x / n, q.y / n, q.z / n};
  }
  return xf;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

bool is_generated_preset(const std::string& s) { return s == "bench" || s == "random" || s == "empty"; }

void write_points_csv(const std::vector<SphericalPoint>& pts, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "theta,phi,range,x,y,z,hit\n";
  char line[256];
  for (const auto& p : pts) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", p.theta, p.phi, p.range,
                  p.position.x, p.position.y, p.position.z, p.hit ? 1 : 0);
    out << line;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR simulation engine: scans, preprocessing, rewards, benchmark and validation"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // bench
  auto* bench = app.add_subcommand("bench", "Time shared-mesh vs per-env-rebuild simulation steps");
  BenchConfig bcfg;
  std::vector<std::string> baselines{"shared", "rebuild"};
  std::string bench_out = "bench.csv";
  bench->add_option("--envs", bcfg.env_counts, "Environment counts")->delimiter(',');
  bench->add_option("--rays", bcfg.rays_per_frame, "Rays per frame")->delimiter(',');
  bench->add_option("--steps", bcfg.steps, "Measured steps per repetition");
  bench->add_option("--warmup", bcfg.warmup_steps, "Warm-up steps (not timed)");
  bench->add_option("--repetitions", bcfg.repetitions, "Repetitions (>= 3)");
  bench->add_option("--baseline", baselines, "shared|rebuild")->delimiter(',');
  bench->add_option("--scene", bcfg.scene.preset, "Scene preset: bench|random|empty");
  bench->add_option("--entities", bcfg.scene.entities_per_env, "Dynamic entities per env");
  bench->add_option("--subdivisions", bcfg.scene.entity_subdivisions, "Icosphere levels per entity");
  bench->add_option("--pattern", bcfg.pattern, "Scan pattern preset");
  bench->add_option("--threads", bcfg.threads, "Worker threads (0: all cores)");
  bench->add_option("--seed", bcfg.scene.seed, "Scene seed");
  bench->add_option("--out", bench_out, "CSV output path");

  // validate
  auto* validate = app.add_subcommand("validate", "Compare BVH casts against brute-force casting");
  ValidateConfig vcfg;
  std::string validate_scene = "random";
  validate->add_option("--scene", validate_scene, "Preset (bench|random|empty) or scene JSON file");
  validate->add_option("--envs", vcfg.scene.num_envs, "Envs for generated presets");
  validate->add_option("--entities", vcfg.scene.entities_per_env, "Entities per env for generated presets");
  validate->add_option("--triangles", vcfg.scene.static_triangles, "Static triangles for the random preset");
  validate->add_option("--rays", vcfg.rays, "Rays per step");
  validate->add_option("--steps", vcfg.steps, "Motion steps for generated presets");
  validate->add_option("--seed", vcfg.seed, "Seed");
  validate->add_flag("--stale-bvh", vcfg.stale_bvh_hook, "Skip refits (negative control, expected to fail)");

  // scan
  auto* scan = app.add_subcommand("scan", "Simulate one frame and write it as PLY or CSV");
  std::string scan_scene, scan_pattern = "mid360-like", scan_pose = "0,0,0", scan_mount = "0,0,0", scan_out;
  int scan_env = 0;
  double scan_time = 0;
  std::uint64_t scan_frame = 0;
  bool scan_randomize = false;
  SensorConfig scfg;
  scan->add_option("--scene", scan_scene, "Scene JSON file or generated preset")->required();
  scan->add_option("--pattern", scan_pattern, "Pattern preset or JSON file");
  scan->add_option("--pose", scan_pose, "Base pose x,y,z[,qw,qx,qy,qz]");
  scan->add_option("--mount", scan_mount, "Sensor mount in the base frame, same format");
  scan->add_option("--env", scan_env, "Environment index");
  scan->add_option("--time", scan_time, "Frame start time in seconds");
  scan->add_option("--frame-index", scan_frame, "Frame index (randomization key)");
  scan->add_option("--max-range", scfg.max_range, "Max range / miss sentinel in m");
  scan->add_option("--min-range", scfg.min_range, "Min range in m");
  scan->add_flag("--randomize", scan_randomize, "Apply masking and distance noise");
  scan->add_option("--seed", scfg.rng_seed, "Randomization seed");
  scan->add_option("--out", scan_out, "Output .ply or .csv")->required();

  // preprocess
  auto* preprocess = app.add_subcommand("preprocess", "Split a frame into sorted proximal / distal arrays");
  std::string pre_in, pre_prox = "proximal.csv", pre_dist = "distal.csv", pre_config, pre_mount = "0,0,0";
  std::optional<double> pre_max_range;
  preprocess->add_option("--in", pre_in, "Frame .ply or .csv")->required();
  preprocess->add_option("--proximal", pre_prox, "Proximal CSV output");
  preprocess->add_option("--distal", pre_dist, "Distal CSV output");
  preprocess->add_option("--config", pre_config, "JSON config with a \"partition\" section");
  preprocess->add_option("--mount", pre_mount, "Sensor mount used to record the frame");
  preprocess->add_option("--max-range", pre_max_range, "Override the frame's max range");

  // rewards
  auto* rewards = app.add_subcommand("rewards", "Evaluate the reward terms for a frame and a robot state");
  std::string rw_frame, rw_state, rw_config, rw_mount = "0,0,0", rw_out;
  std::optional<double> rw_max_range;
  rewards->add_option("--frame", rw_frame, "Frame .ply or .csv")->required();
  rewards->add_option("--state", rw_state, "Robot state JSON")->required();
  rewards->add_option("--config", rw_config, "JSON with risk / weights / partition sections");
  rewards->add_option("--mount", rw_mount, "Sensor mount used to record the frame");
  rewards->add_option("--max-range", rw_max_range, "Override the frame's max range");
  rewards->add_option("--out", rw_out, "Also write the breakdown JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) {
      bcfg.baselines.clear();
      for (const auto& b : baselines) bcfg.baselines.push_back(baseline_from_string(b));
      auto records = run_bench(bcfg);
      std::ofstream out(bench_out);
      if (!out) throw Error(ErrorCode::Io, "cannot write " + bench_out);
      write_bench_csv(records, out);
      write_bench_csv(records, std::cout);
      return 0;
    }

    if (*validate) {
      ValidateReport report;
      if (is_generated_preset(validate_scene)) {
        vcfg.scene.preset = validate_scene;
        report = run_validate(vcfg);
      } else {
        auto world = load_scene(validate_scene);
        world->set_skip_refit_for_testing(vcfg.stale_bvh_hook);
        validate_world(*world, vcfg.rays, vcfg.seed, report);
      }
      std::cout << "rays_checked " << report.rays_checked << "\nhits " << report.hits << "\nmismatches "
                << report.mismatches << "\nmax_abs_dt " << report.max_abs_dt << "\n"
                << (report.pass ? "PASS" : "FAIL") << "\n";
      return report.pass ? 0 : 1;
    }

    if (*scan) {
      std::unique_ptr<SceneWorld> world;
      if (is_generated_preset(scan_scene)) {
        SceneParams p;
        p.preset = scan_scene;
        p.num_envs = scan_env + 1;
        world = make_world(make_scene_layout(p));
      } else {
        world = load_scene(scan_scene);
      }
      scfg.pattern = resolve_pattern(scan_pattern);
      scfg.mount = parse_pose(scan_mount);
      auto frame = simulate_scan(*world, scan_env, parse_pose(scan_pose), scfg, scan_time, scan_frame);
      if (scan_randomize) frame = apply_randomization(frame, scfg);
      write_frame(frame, scan_out);
      std::cout << frame.size() << " rays, " << frame.hit_count() << " hits -> " << scan_out << "\n";
      return 0;
    }

    if (*preprocess) {
      RiskConfig risk;
      RewardWeights weights;
      PartitionConfig part;
      if (!pre_config.empty()) apply_config_json(read_json(pre_config), risk, weights, part);
      auto frame = read_frame(pre_in, parse_pose(pre_mount), pre_max_range);
      auto processed = process_frame(frame, part);
      write_points_csv(processed.proximal, pre_prox);
      write_points_csv(processed.distal, pre_dist);
      return 0;
    }

    if (*rewards) {
      RiskConfig risk;
      RewardWeights weights;
      PartitionConfig part;
      if (!rw_config.empty()) apply_config_json(read_json(rw_config), risk, weights, part);
      auto frame = read_frame(rw_frame, parse_pose(rw_mount), rw_max_range);
      auto state = robot_state_from_json(read_json(rw_state));

      auto mount = parse_pose(rw_mount);
      std::vector<Vec3> proximal;
      for (const auto& p : partition(frame, part).proximal) proximal.push_back(mount.apply(p.position));
      auto sectors = sector_min_distances(z_band_filter(proximal, risk), risk);
      auto v_avoid = avoidance_velocity(sectors, risk);
      auto r_va = reward_vel_avoid(state.v, state.v_cmd, v_avoid, risk);

      auto processed = process_frame(frame, part);
      std::vector<double> ranges;
      for (const auto& p : processed.distal) ranges.push_back(p.range);
      auto r_rays = reward_rays(ranges, risk);

      auto doc = reward_breakdown_to_json(auxiliary_rewards(state, weights, r_va, r_rays));
      std::cout << doc.dump(2) << "\n";
      if (!rw_out.empty()) {
        std::ofstream out(rw_out);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + rw_out);
        out << doc.dump(2) << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 2;
  }
  return 0;
}
