#include "lidarsim/risk_reward.hpp"

#include <algorithm>
#include <cmath>

#include "lidarsim/error.hpp"

namespace lidarsim {

void RiskConfig::validate() const {
  if (n_sectors < 1) throw Error(ErrorCode::InvalidConfig, "n_sectors must be >= 1");
  if (!(d_thresh > 0)) throw Error(ErrorCode::InvalidConfig, "d_thresh must be > 0");
  if (!(d_max > 0)) throw Error(ErrorCode::InvalidConfig, "d_max must be > 0");
  if (n_rays < 0) throw Error(ErrorCode::InvalidConfig, "n_rays must be >= 0");
  if (v_avoid_max && !(*v_avoid_max >= 0)) throw Error(ErrorCode::InvalidConfig, "v_avoid_max must be >= 0");
}

double sector_width(const RiskConfig& cfg) { return 2 * pi / cfg.n_sectors; }

int sector_of(double azimuth, const RiskConfig& cfg) {
  auto w = sector_width(cfg);
  auto a = std::fmod(azimuth + w / 2, 2 * pi);
  if (a < 0) a += 2 * pi;
  auto j = static_cast<int>(std::floor(a / w));
  return std::clamp(j, 0, cfg.n_sectors - 1);
}

Vec3 sector_direction(int j, const RiskConfig& cfg) {
  auto n = cfg.n_sectors;
  if (n % 2 == 0 && j >= n / 2) return -sector_direction(j - n / 2, cfg);
  auto a = j * sector_width(cfg);
  return {std::cos(a), std::sin(a), 0};
}

SectorDistances sector_min_distances(std::span<const Vec3> points_base, const RiskConfig& cfg) {
  cfg.validate();
  SectorDistances d(static_cast<std::size_t>(cfg.n_sectors), cfg.d_max);
  for (const auto& p : points_base) {
    auto r = std::hypot(p.x, p.y);
    if (r == 0) continue;
    auto& slot = d[static_cast<std::size_t>(sector_of(std::atan2(p.y, p.x), cfg))];
    slot = std::min(slot, r);
  }
  return d;
}

std::vector<Vec3> z_band_filter(std::span<const Vec3> points_base, const RiskConfig& cfg) {
  std::vector<Vec3> out;
  for (const auto& p : points_base)
    if (p.z >= cfg.z_band_min && p.z <= cfg.z_band_max) out.push_back(p);
  return out;
}

Vec3 avoidance_velocity(const SectorDistances& d, const RiskConfig& cfg) {
  cfg.validate();
  if (d.size() != static_cast<std::size_t>(cfg.n_sectors))
    throw Error(ErrorCode::LengthMismatch, "sector distance count differs from n_sectors");
  auto magnitude = [&](int j) {
    auto dj = d[static_cast<std::size_t>(j)];
    return dj < cfg.d_thresh ? std::exp(-dj * cfg.alpha_avoid) : 0.0;
  };
  Vec3 v;
  auto n = cfg.n_sectors;
  if (n % 2 == 0) {
    // Opposite sectors share one axis; combining them first makes symmetric
    // layouts cancel exactly.
    for (int j = 0; j < n / 2; ++j) v -= (magnitude(j) - magnitude(j + n / 2)) * sector_direction(j, cfg);
  } else {
    for (int j = 0; j < n; ++j) v -= magnitude(j) * sector_direction(j, cfg);
  }
  if (cfg.v_avoid_max) {
    auto mag = length(v);
    if (mag > *cfg.v_avoid_max) v = v * (*cfg.v_avoid_max / mag);
  }
  return v;
}

double reward_vel_avoid(const Vec3& v, const Vec3& v_cmd, const Vec3& v_avoid, const RiskConfig& cfg) {
  return std::exp(-cfg.beta_va * length_squared(v - (v_cmd + v_avoid)));
}

double reward_rays(std::span<const double> ranges, const RiskConfig& cfg) {
  if (ranges.empty()) throw Error(ErrorCode::EmptyRays, "r_rays needs at least one ray");
  if (cfg.n_rays > 0 && ranges.size() != static_cast<std::size_t>(cfg.n_rays))
    throw Error(ErrorCode::LengthMismatch, "expected " + std::to_string(cfg.n_rays) + " rays, got " +
                                               std::to_string(ranges.size()));
  double sum = 0;
  for (auto r : ranges) sum += std::min(r, cfg.d_max);
  return sum / (static_cast<double>(ranges.size()) * cfg.d_max);
}

const RewardTerm* RewardBreakdown::find(std::string_view name) const {
  auto it = std::find_if(terms.begin(), terms.end(), [&](const auto& t) { return t.name == name; });
  return it == terms.end() ? nullptr : &*it;
}

namespace {

double squared_norm(std::span<const double> a) {
  double s = 0;
  for (auto x : a) s += x * x;
  return s;
}

double horizontal_force_sq(std::span<const Vec3> forces) {
  double s = 0;
  for (const auto& f : forces) s += f.x * f.x + f.y * f.y;
  return s;
}

}  // namespace

RewardBreakdown auxiliary_rewards(const RobotStateSlice& s, const RewardWeights& w,
                                  std::optional<double> r_vel_avoid, std::optional<double> r_rays) {
  auto joints = s.q.size();
  for (const auto* arr : {&s.q_dot, &s.q_ddot, &s.q_min, &s.q_max, &s.torque})
    if (arr->size() != joints) throw Error(ErrorCode::LengthMismatch, "joint arrays differ in length");
  auto actions = s.action.size();
  if (s.action_prev.size() != actions || s.action_prev2.size() != actions)
    throw Error(ErrorCode::LengthMismatch, "action history arrays differ in length");

  double limit_violations = 0;
  for (std::size_t i = 0; i < joints; ++i)
    if (s.q[i] > s.q_max[i] || s.q[i] < s.q_min[i]) limit_violations += 1;

  double smoothing = 0, smoothing_rate = 0;
  for (std::size_t i = 0; i < actions; ++i) {
    auto d1 = s.action_prev[i] - s.action[i];
    auto d2 = s.action_prev2[i] - 2 * s.action_prev[i] + s.action[i];
    smoothing += d1 * d1;
    smoothing_rate += d2 * d2;
  }

  RewardBreakdown out;
  auto add = [&out](std::string name, double value, double weight) {
    out.terms.push_back({std::move(name), value, weight, weight * value});
    out.total += weight * value;
  };
  if (r_vel_avoid) add("vel_avoid", *r_vel_avoid, w.vel_avoid);
  if (r_rays) add("rays", *r_rays, w.rays);
  add("z_velocity", s.v.z * s.v.z, w.z_velocity);
  add("foot_stumble", horizontal_force_sq(s.foot_forces), w.foot_stumble);
  add("link_collision", horizontal_force_sq(s.link_forces), w.link_collision);
  add("joint_limit", limit_violations, w.joint_limit);
  add("torque", squared_norm(s.torque), w.torque);
  add("joint_velocity", squared_norm(s.q_dot), w.joint_velocity);
  add("joint_acceleration", squared_norm(s.q_ddot), w.joint_acceleration);
  add("action_smoothing", smoothing, w.action_smoothing);
  add("action_smoothing_rate", smoothing_rate, w.action_smoothing_rate);
  return out;
}

}  // namespace lidarsim
