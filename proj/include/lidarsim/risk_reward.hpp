#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lidarsim/math.hpp"

namespace lidarsim {

struct RiskConfig {
  int n_sectors = 36;
  double d_thresh = 1.0;     // m
  double alpha_avoid = 3.0;  // 1/m
  double beta_va = 4.0;
  double d_max = 40.0;  // m
  int n_rays = 0;       // expected distal ray count for r_rays; 0 accepts any
  // Cap on |V_avoid| in m/s; nullopt applies the raw vector sum.
  std::optional<double> v_avoid_max = 1.5;
  // Base-frame z band of points that feed the sectors.
  double z_band_min = -0.2;
  double z_band_max = 1.0;

  // Throws Error(InvalidConfig).
  void validate() const;
};

// Sector j spans azimuths [j*w - w/2, j*w + w/2) with w = 2*pi/n_sectors, so
// sector 0 is centred on the base +x axis.
double sector_width(const RiskConfig& cfg);
int sector_of(double azimuth, const RiskConfig& cfg);
// Unit vector towards the centre of sector j. For even n_sectors opposite
// sectors are exact negations of each other.
Vec3 sector_direction(int j, const RiskConfig& cfg);

using SectorDistances = std::vector<double>;

// Minimum horizontal norm per sector, d_max where empty. Points with zero
// horizontal norm are ignored.
SectorDistances sector_min_distances(std::span<const Vec3> points_base, const RiskConfig& cfg);

// Keeps points with z inside the config's band.
std::vector<Vec3> z_band_filter(std::span<const Vec3> points_base, const RiskConfig& cfg);

// Sum over sectors with d < d_thresh of exp(-d * alpha) pointing away from
// the sector, optionally capped in magnitude.
Vec3 avoidance_velocity(const SectorDistances& d, const RiskConfig& cfg);

double reward_vel_avoid(const Vec3& v, const Vec3& v_cmd, const Vec3& v_avoid, const RiskConfig& cfg);

// Mean of min(d_i, d_max) / d_max. Throws Error(EmptyRays).
double reward_rays(std::span<const double> ranges, const RiskConfig& cfg);

struct RobotStateSlice {
  Vec3 v;      // base linear velocity, m/s
  Vec3 v_cmd;  // commanded velocity, m/s
  std::vector<Vec3> foot_forces;  // N, per foot contact
  std::vector<Vec3> link_forces;  // N, per penalised link
  std::vector<double> q, q_dot, q_ddot;
  std::vector<double> q_min, q_max;
  std::vector<double> action, action_prev, action_prev2;  // a_t, a_{t-1}, a_{t-2}
  std::vector<double> torque;
};

struct RewardWeights {
  double vel_avoid = 2.0;
  double rays = 1.5;
  double z_velocity = -3e-4;
  double foot_stumble = -2e-2;
  double link_collision = -0.02;
  double joint_limit = -0.2;
  double torque = -1e-6;
  double joint_velocity = -1e-6;
  double joint_acceleration = -2.5e-7;
  double action_smoothing = -5e-3;
  double action_smoothing_rate = -5e-3;
};

struct RewardTerm {
  std::string name;
  double value = 0;     // unweighted
  double weight = 0;
  double weighted = 0;  // weight * value
};

struct RewardBreakdown {
  std::vector<RewardTerm> terms;
  double total = 0;

  const RewardTerm* find(std::string_view name) const;
};

// Auxiliary penalty terms, plus the two avoidance terms when supplied.
// Throws Error(LengthMismatch) on inconsistent joint/action array lengths.
RewardBreakdown auxiliary_rewards(const RobotStateSlice& state, const RewardWeights& w,
                                  std::optional<double> r_vel_avoid = std::nullopt,
                                  std::optional<double> r_rays = std::nullopt);

}  // namespace lidarsim
