#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "lidarsim/perception.hpp"
#include "lidarsim/risk_reward.hpp"
#include "lidarsim/scan_pattern.hpp"
#include "lidarsim/scene.hpp"
#include "lidarsim/sensor.hpp"

namespace lidarsim {

using Json = nlohmann::json;

// Scene description:
//
//   {
//     "num_envs": 2,
//     "static":  [{"env": 0, "meshes": [<mesh>, ...]}, ...],
//     "static_all_envs": [<mesh>, ...],
//     "dynamic": [{"env": 0, "mesh": <mesh>, "transform": <transform>}, ...]
//   }
//
// <mesh> is an OBJ path (string, relative to the scene file) or one of
//   {"obj": "path"}
//   {"box": {"min": [x,y,z], "max": [x,y,z]}}
//   {"plane": {"center": [x,y,z], "size": [sx, sy]}}
//   {"icosphere": {"center": [x,y,z], "radius": r, "subdivisions": n}}
// <transform> is {"translation": [x,y,z], "rotation": [w,x,y,z]}, both optional.
// Each env's static meshes are merged into one mesh. Throws Error(Parse)
// on schema violations.
std::unique_ptr<SceneWorld> scene_from_json(const Json& doc, const std::filesystem::path& base_dir = {});
std::unique_ptr<SceneWorld> load_scene(const std::filesystem::path& path);

RigidTransform transform_from_json(const Json& j);
Json transform_to_json(const RigidTransform& xf);

// Pattern config: {"preset": "<name>", "rays_per_frame": n} or a full
// description with "kind": "rotating" | "non_repetitive" | "grid".
// Angles in degrees, rates in rad/s.
PatternSpec pattern_from_json(const Json& j);
Json pattern_to_json(const PatternSpec& spec);
// Preset name or path to a JSON pattern file.
PatternSpec resolve_pattern(const std::string& preset_or_path);

// Frame files. PLY is binary little-endian with vertex properties
//   double x, double y, double z, double range, uchar hit
// in that order (base-frame points) and a "comment max_range <value>" header
// line. CSV has the header "x,y,z,range,hit" and %.17g values.
void write_frame_ply(const ScanFrame& frame, std::ostream& out);
void write_frame_csv(const ScanFrame& frame, std::ostream& out);
void write_frame(const ScanFrame& frame, const std::filesystem::path& path);

// Rebuilds a frame from a file. Sensor-frame directions are recovered by
// inverting `mount`; a zero-length point gets direction +x. `max_range`
// overrides the value stored in the file (required for CSV files without
// misses).
ScanFrame read_frame(const std::filesystem::path& path, const RigidTransform& mount = {},
                     std::optional<double> max_range = std::nullopt);

// Robot state for the rewards CLI; every field is optional.
RobotStateSlice robot_state_from_json(const Json& j);
// {"risk": {...}, "weights": {...}, "partition": {...}} with RiskConfig /
// RewardWeights / PartitionConfig field names; missing keys keep defaults.
void apply_config_json(const Json& j, RiskConfig& risk, RewardWeights& weights, PartitionConfig& partition);

// Terms in evaluation order, then the weighted total.
nlohmann::ordered_json reward_breakdown_to_json(const RewardBreakdown& b);

}  // namespace lidarsim
