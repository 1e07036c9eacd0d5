#include "lidarsim/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lidarsim/error.hpp"

namespace lidarsim {

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& why) {
  throw Error(ErrorCode::Parse, where + ": " + why);
}

Vec3 vec3_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
    schema_error(where, "expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json vec3_to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

double number_at(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) schema_error(where, std::string("missing number '") + key + "'");
  return j[key].get<double>();
}

int env_at(const Json& j, const std::string& where) {
  if (!j.contains("env") || !j["env"].is_number_integer()) schema_error(where, "missing integer 'env'");
  return j["env"].get<int>();
}

TriangleMesh mesh_from_json(const Json& j, const std::filesystem::path& base_dir, const std::string& where) {
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() ? base_dir / path : path;
  };
  if (j.is_string()) return load_obj(resolve(j.get<std::string>()));
  if (!j.is_object() || j.size() != 1) schema_error(where, "mesh must be a path or a single-key object");
  const auto& [kind, body] = *j.items().begin();
  if (kind == "obj") {
    if (!body.is_string()) schema_error(where, "'obj' expects a path string");
    return load_obj(resolve(body.get<std::string>()));
  }
  if (kind == "box") return make_box(vec3_from_json(body.value("min", Json()), where + ".box.min"),
                                     vec3_from_json(body.value("max", Json()), where + ".box.max"));
  if (kind == "plane") {
    auto size = body.value("size", Json());
    if (!size.is_array() || size.size() != 2) schema_error(where, "plane.size must be [sx, sy]");
    return make_plane(vec3_from_json(body.value("center", Json()), where + ".plane.center"),
                      size[0].get<double>(), size[1].get<double>());
  }
  if (kind == "icosphere")
    return make_icosphere(vec3_from_json(body.value("center", Json()), where + ".icosphere.center"),
                          number_at(body, "radius", where + ".icosphere"), body.value("subdivisions", 2),
                          body.value("roughness", 0.0), body.value("seed", 0ull));
  schema_error(where, "unknown mesh kind '" + kind + "'");
}

}  // namespace

RigidTransform transform_from_json(const Json& j) {
  RigidTransform xf;
  if (j.is_null()) return xf;
  if (!j.is_object()) schema_error("transform", "expected an object");
  if (j.contains("translation")) xf.translation = vec3_from_json(j["translation"], "transform.translation");
  if (j.contains("rotation")) {
    const auto& r = j["rotation"];
    if (!r.is_array() || r.size() != 4) schema_error("transform.rotation", "expected [w, x, y, z]");
    xf.rotation = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
  }
  if (!xf.is_valid()) schema_error("transform", "rotation must be a unit quaternion");
  return xf;
}

Json transform_to_json(const RigidTransform& xf) {
  const auto& q = xf.rotation;
  return {{"translation", vec3_to_json(xf.translation)}, {"rotation", Json::array({q.w, q.x, q.y, q.z})}};
}

std::unique_ptr<SceneWorld> scene_from_json(const Json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) schema_error("scene", "expected an object");
  if (!doc.contains("num_envs") || !doc["num_envs"].is_number_integer() || doc["num_envs"].get<int>() < 0)
    schema_error("scene", "missing non-negative integer 'num_envs'");
  for (const auto& [key, _] : doc.items())
    if (key != "num_envs" && key != "static" && key != "static_all_envs" && key != "dynamic")
      schema_error("scene", "unknown key '" + key + "'");

  auto num_envs = doc["num_envs"].get<int>();
  auto world = std::make_unique<SceneWorld>(num_envs);
  std::vector<TriangleMesh> statics(static_cast<std::size_t>(num_envs));

  if (doc.contains("static_all_envs")) {
    const auto& all = doc["static_all_envs"];
    if (!all.is_array()) schema_error("scene.static_all_envs", "expected an array");
    for (std::size_t i = 0; i < all.size(); ++i) {
      auto mesh = mesh_from_json(all[i], base_dir, "scene.static_all_envs[" + std::to_string(i) + "]");
      for (auto& s : statics) s.append(mesh);
    }
  }
  if (doc.contains("static")) {
    const auto& entries = doc["static"];
    if (!entries.is_array()) schema_error("scene.static", "expected an array");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto where = "scene.static[" + std::to_string(i) + "]";
      auto env = env_at(entries[i], where);
      if (env < 0 || env >= num_envs) schema_error(where, "env out of range");
      const auto& meshes = entries[i].value("meshes", Json::array());
      if (!meshes.is_array()) schema_error(where, "'meshes' must be an array");
      for (std::size_t m = 0; m < meshes.size(); ++m)
        statics[static_cast<std::size_t>(env)].append(
            mesh_from_json(meshes[m], base_dir, where + ".meshes[" + std::to_string(m) + "]"));
    }
  }
  for (int env = 0; env < num_envs; ++env)
    if (!statics[static_cast<std::size_t>(env)].empty())
      world->register_static_mesh(env, std::move(statics[static_cast<std::size_t>(env)]));

  if (doc.contains("dynamic")) {
    const auto& entries = doc["dynamic"];
    if (!entries.is_array()) schema_error("scene.dynamic", "expected an array");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto where = "scene.dynamic[" + std::to_string(i) + "]";
      auto env = env_at(entries[i], where);
      if (env < 0 || env >= num_envs) schema_error(where, "env out of range");
      if (!entries[i].contains("mesh")) schema_error(where, "missing 'mesh'");
      world->register_dynamic_entity(env, mesh_from_json(entries[i]["mesh"], base_dir, where + ".mesh"),
                                     transform_from_json(entries[i].value("transform", Json())));
    }
  }
  // Bring the shared structure up to date so the scene is ready to scan.
  world->update_dynamic({}, 0.0);
  return world;
}

std::unique_ptr<SceneWorld> load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open scene " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return scene_from_json(doc, path.parent_path());
}

namespace {

std::vector<double> degrees_list(const Json& j, const std::string& where) {
  if (!j.is_array()) schema_error(where, "expected an array of degrees");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(deg_to_rad(v.get<double>()));
  return out;
}

Interval interval_deg(const Json& j, const std::string& where) {
  auto v = degrees_list(j, where);
  if (v.size() != 2) schema_error(where, "expected [min, max] in degrees");
  return {v[0], v[1]};
}

double rad_to_deg(double r) { return r * 180.0 / pi; }

}  // namespace

PatternSpec pattern_from_json(const Json& j) {
  if (!j.is_object()) schema_error("pattern", "expected an object");
  PatternSpec spec;
  if (j.contains("preset")) {
    spec = pattern_preset(j["preset"].get<std::string>());
    if (j.contains("rays_per_frame")) spec = with_rays_per_frame(spec, j["rays_per_frame"].get<int>());
    spec.validate();
    return spec;
  }
  auto kind = j.value("kind", std::string());
  spec.name = j.value("name", kind);
  spec.rays_per_frame = j.value("rays_per_frame", 1);
  spec.frame_period = j.value("frame_period", 0.1);
  if (j.contains("fov_horizontal_deg")) spec.fov_horizontal = interval_deg(j["fov_horizontal_deg"], "pattern.fov_horizontal_deg");
  if (j.contains("fov_vertical_deg")) spec.fov_vertical = interval_deg(j["fov_vertical_deg"], "pattern.fov_vertical_deg");
  if (kind == "rotating") {
    spec.kind = PatternKind::Rotating;
    spec.rotating.rpm = j.value("rpm", 600.0);
    spec.rotating.channel_elevations = degrees_list(j.value("channel_elevations_deg", Json()), "pattern.channel_elevations_deg");
    if (!j.contains("frame_period")) spec.frame_period = 60.0 / spec.rotating.rpm;
  } else if (kind == "non_repetitive") {
    spec.kind = PatternKind::NonRepetitive;
    auto sweep = j.value("sweep", std::string("rosette"));
    if (sweep != "rosette" && sweep != "panoramic") schema_error("pattern.sweep", "expected rosette or panoramic");
    spec.non_repetitive.sweep = sweep == "rosette" ? Sweep::Rosette : Sweep::Panoramic;
    const auto& rates = j.value("rates", Json());
    if (!rates.is_array() || rates.size() != 2) schema_error("pattern.rates", "expected [rate_a, rate_b] in rad/s");
    spec.non_repetitive.rate_a = rates[0].get<double>();
    spec.non_repetitive.rate_b = rates[1].get<double>();
  } else if (kind == "grid") {
    spec.kind = PatternKind::Grid;
    spec.grid.azimuth_count = j.value("azimuth_count", 1);
    spec.grid.elevation_count = j.value("elevation_count", 1);
    if (!j.contains("rays_per_frame")) spec.rays_per_frame = spec.grid.azimuth_count * spec.grid.elevation_count;
  } else {
    schema_error("pattern.kind", "expected rotating, non_repetitive or grid");
  }
  spec.validate();
  return spec;
}

Json pattern_to_json(const PatternSpec& spec) {
  Json j{{"name", spec.name}, {"rays_per_frame", spec.rays_per_frame}, {"frame_period", spec.frame_period}};
  auto fov = [](const Interval& i) { return Json::array({rad_to_deg(i.min), rad_to_deg(i.max)}); };
  j["fov_horizontal_deg"] = fov(spec.fov_horizontal);
  j["fov_vertical_deg"] = fov(spec.fov_vertical);
  switch (spec.kind) {
    case PatternKind::Rotating: {
      j["kind"] = "rotating";
      j["rpm"] = spec.rotating.rpm;
      Json ch = Json::array();
      for (auto e : spec.rotating.channel_elevations) ch.push_back(rad_to_deg(e));
      j["channel_elevations_deg"] = ch;
      break;
    }
    case PatternKind::NonRepetitive:
      j["kind"] = "non_repetitive";
      j["sweep"] = spec.non_repetitive.sweep == Sweep::Rosette ? "rosette" : "panoramic";
      j["rates"] = Json::array({spec.non_repetitive.rate_a, spec.non_repetitive.rate_b});
      break;
    case PatternKind::Grid:
      j["kind"] = "grid";
      j["azimuth_count"] = spec.grid.azimuth_count;
      j["elevation_count"] = spec.grid.elevation_count;
      break;
  }
  return j;
}

PatternSpec resolve_pattern(const std::string& preset_or_path) {
  auto names = pattern_preset_names();
  if (std::find(names.begin(), names.end(), preset_or_path) != names.end()) return pattern_preset(preset_or_path);
  std::ifstream in(preset_or_path);
  if (!in) throw Error(ErrorCode::Io, "'" + preset_or_path + "' is neither a pattern preset nor a readable file");
  try {
    return pattern_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, preset_or_path + ": " + e.what());
  }
}

namespace {

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::Parse, "truncated PLY body");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_frame_ply(const ScanFrame& frame, std::ostream& out) {
  out << "ply\nformat binary_little_endian 1.0\n"
      << "comment max_range " << format_double(frame.max_range) << "\n"
      << "element vertex " << frame.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double range\nproperty uchar hit\nend_header\n";
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const auto& p = frame.points_base[i];
    put(out, p.x);
    put(out, p.y);
    put(out, p.z);
    put(out, frame.ranges[i]);
    put<std::uint8_t>(out, frame.hit_flags[i] ? 1 : 0);
  }
}

void write_frame_csv(const ScanFrame& frame, std::ostream& out) {
  out << "x,y,z,range,hit\n";
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const auto& p = frame.points_base[i];
    out << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.z) << ','
        << format_double(frame.ranges[i]) << ',' << (frame.hit_flags[i] ? 1 : 0) << '\n';
  }
}

void write_frame(const ScanFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  if (path.extension() == ".csv")
    write_frame_csv(frame, out);
  else
    write_frame_ply(frame, out);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

ScanFrame read_frame(const std::filesystem::path& path, const RigidTransform& mount,
                     std::optional<double> max_range) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open frame " + path.string());

  std::vector<Vec3> points;
  std::vector<double> ranges;
  std::vector<bool> hits;
  std::optional<double> stored_max;

  std::string line;
  std::getline(in, line);
  if (line == "ply") {
    std::size_t count = 0;
    std::vector<std::string> props;
    while (std::getline(in, line) && line != "end_header") {
      std::istringstream ls(line);
      std::string word;
      ls >> word;
      if (word == "format") {
        std::string fmt;
        ls >> fmt;
        if (fmt != "binary_little_endian") throw Error(ErrorCode::Parse, "only binary_little_endian PLY is supported");
      } else if (word == "comment") {
        std::string key;
        double value = 0;
        if (ls >> key >> value && key == "max_range") stored_max = value;
      } else if (word == "element") {
        std::string name;
        ls >> name >> count;
      } else if (word == "property") {
        std::string type, name;
        ls >> type >> name;
        props.push_back(type + " " + name);
      }
    }
    const std::vector<std::string> expected = {"double x", "double y", "double z", "double range", "uchar hit"};
    if (props != expected) throw Error(ErrorCode::Parse, "unexpected PLY vertex layout in " + path.string());
    for (std::size_t i = 0; i < count; ++i) {
      Vec3 p;
      p.x = get<double>(in);
      p.y = get<double>(in);
      p.z = get<double>(in);
      points.push_back(p);
      ranges.push_back(get<double>(in));
      hits.push_back(get<std::uint8_t>(in) != 0);
    }
  } else {
    if (line.rfind("x,y,z,range,hit", 0) != 0) throw Error(ErrorCode::Parse, "missing CSV header in " + path.string());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      double v[5];
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3], &v[4]) != 5)
        throw Error(ErrorCode::Parse, "bad CSV row '" + line + "'");
      points.push_back({v[0], v[1], v[2]});
      ranges.push_back(v[3]);
      hits.push_back(v[4] != 0);
    }
    for (std::size_t i = 0; i < ranges.size() && !stored_max; ++i)
      if (!hits[i]) stored_max = ranges[i];
  }

  ScanFrame frame;
  auto resolved_max = max_range ? max_range : stored_max;
  if (!resolved_max) {
    double m = 0;
    for (auto r : ranges) m = std::max(m, r);
    resolved_max = m;
  }
  frame.max_range = *resolved_max;
  auto inv = mount.inverse();
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto local = inv.apply(points[i]);
    frame.directions.push_back(length(local) > 0 ? normalize(local) : Vec3{1, 0, 0});
  }
  frame.points_base = std::move(points);
  frame.ranges = std::move(ranges);
  frame.hit_flags = std::move(hits);
  frame.hit_entities.assign(frame.size(), -1);
  return frame;
}

namespace {

std::vector<double> doubles(const Json& j, const char* key) {
  if (!j.contains(key)) return {};
  if (!j[key].is_array()) schema_error(std::string("state.") + key, "expected an array");
  return j[key].get<std::vector<double>>();
}

std::vector<Vec3> vec3s(const Json& j, const char* key) {
  std::vector<Vec3> out;
  if (!j.contains(key)) return out;
  for (const auto& v : j[key]) out.push_back(vec3_from_json(v, std::string("state.") + key));
  return out;
}

}  // namespace

RobotStateSlice robot_state_from_json(const Json& j) {
  if (!j.is_object()) schema_error("state", "expected an object");
  RobotStateSlice s;
  if (j.contains("v")) s.v = vec3_from_json(j["v"], "state.v");
  if (j.contains("v_cmd")) s.v_cmd = vec3_from_json(j["v_cmd"], "state.v_cmd");
  s.foot_forces = vec3s(j, "foot_forces");
  s.link_forces = vec3s(j, "link_forces");
  s.q = doubles(j, "q");
  s.q_dot = doubles(j, "q_dot");
  s.q_ddot = doubles(j, "q_ddot");
  s.q_min = doubles(j, "q_min");
  s.q_max = doubles(j, "q_max");
  s.action = doubles(j, "action");
  s.action_prev = doubles(j, "action_prev");
  s.action_prev2 = doubles(j, "action_prev2");
  s.torque = doubles(j, "torque");
  return s;
}

void apply_config_json(const Json& j, RiskConfig& risk, RewardWeights& w, PartitionConfig& part) {
  if (j.contains("risk")) {
    const auto& r = j["risk"];
    risk.n_sectors = r.value("n_sectors", risk.n_sectors);
    risk.d_thresh = r.value("d_thresh", risk.d_thresh);
    risk.alpha_avoid = r.value("alpha_avoid", risk.alpha_avoid);
    risk.beta_va = r.value("beta_va", risk.beta_va);
    risk.d_max = r.value("d_max", risk.d_max);
    risk.n_rays = r.value("n_rays", risk.n_rays);
    risk.z_band_min = r.value("z_band_min", risk.z_band_min);
    risk.z_band_max = r.value("z_band_max", risk.z_band_max);
    if (r.contains("v_avoid_max"))
      risk.v_avoid_max = r["v_avoid_max"].is_null() ? std::nullopt : std::optional<double>(r["v_avoid_max"].get<double>());
    risk.validate();
  }
  if (j.contains("weights")) {
    const auto& x = j["weights"];
    w.vel_avoid = x.value("vel_avoid", w.vel_avoid);
    w.rays = x.value("rays", w.rays);
    w.z_velocity = x.value("z_velocity", w.z_velocity);
    w.foot_stumble = x.value("foot_stumble", w.foot_stumble);
    w.link_collision = x.value("link_collision", w.link_collision);
    w.joint_limit = x.value("joint_limit", w.joint_limit);
    w.torque = x.value("torque", w.torque);
    w.joint_velocity = x.value("joint_velocity", w.joint_velocity);
    w.joint_acceleration = x.value("joint_acceleration", w.joint_acceleration);
    w.action_smoothing = x.value("action_smoothing", w.action_smoothing);
    w.action_smoothing_rate = x.value("action_smoothing_rate", w.action_smoothing_rate);
  }
  if (j.contains("partition")) {
    const auto& p = j["partition"];
    part.theta_threshold = p.value("theta_threshold", part.theta_threshold);
    part.k_proximal = p.value("k_proximal", part.k_proximal);
    part.n_hist = p.value("n_hist", part.n_hist);
    part.distal.n_theta = p.value("n_theta", part.distal.n_theta);
    part.distal.n_phi = p.value("n_phi", part.distal.n_phi);
    part.distal.sentinel = p.value("sentinel", part.distal.sentinel);
    if (p.contains("distal_theta")) {
      auto t = p["distal_theta"].get<std::vector<double>>();
      if (t.size() != 2) schema_error("partition.distal_theta", "expected [min, max] in radians");
      part.distal.theta = {t[0], t[1]};
    }
    if (p.contains("fps_start")) {
      auto s = p["fps_start"].get<std::string>();
      if (s != "max_range" && s != "first_index") schema_error("partition.fps_start", "expected max_range or first_index");
      part.fps_start = s == "max_range" ? FpsStart::MaxRange : FpsStart::FirstIndex;
    }
    part.validate();
  }
}

nlohmann::ordered_json reward_breakdown_to_json(const RewardBreakdown& b) {
  nlohmann::ordered_json terms = nlohmann::ordered_json::object();
  for (const auto& t : b.terms)
    terms[t.name] = {{"value", t.value}, {"weight", t.weight}, {"weighted", t.weighted}};
  nlohmann::ordered_json out;
  out["terms"] = std::move(terms);
  out["total"] = b.total;
  return out;
}

}  // namespace lidarsim
