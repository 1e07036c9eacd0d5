#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "lidarsim/scan_pattern.hpp"
#include "lidarsim/scene.hpp"
#include "lidarsim/sensor.hpp"

namespace lidarsim {

// theta: elevation from the sensor x-y plane (positive up); phi: azimuth in
// [-pi, pi). `position` is the Cartesian point in the sensor frame.
struct SphericalPoint {
  double theta = 0;
  double phi = 0;
  double range = 0;
  Vec3 position;
  bool hit = false;

  friend bool operator==(const SphericalPoint&, const SphericalPoint&) = default;
};

SphericalPoint make_spherical_point(const Vec3& direction, double range, bool hit);

enum class FpsStart { MaxRange, FirstIndex };

struct DownsampleGrid {
  int n_theta = 4;
  int n_phi = 36;
  Interval theta{-pi / 2, -0.15};  // distal side of the default threshold
  Interval phi{-pi, pi};
  double sentinel = 40.0;  // d_max for empty bins

  std::size_t size() const { return static_cast<std::size_t>(n_theta) * static_cast<std::size_t>(n_phi); }
};

struct PartitionConfig {
  double theta_threshold = -0.15;  // rad; proximal iff theta > threshold
  int k_proximal = 128;
  DownsampleGrid distal;
  int n_hist = 10;
  FpsStart fps_start = FpsStart::MaxRange;

  // Throws Error(InvalidConfig).
  void validate() const;
};

struct Partition {
  std::vector<SphericalPoint> proximal;
  std::vector<SphericalPoint> distal;
};

// Hits above the threshold go to proximal; everything else, misses
// included at their sentinel range, goes to distal.
Partition partition(const ScanFrame& frame, const PartitionConfig& cfg);

// Greedy max-min selection on Cartesian positions, returned in selection
// order. Ties pick the lowest index. Returns indices into `points`.
std::vector<std::size_t> farthest_point_indices(std::span<const Vec3> positions, std::size_t k,
                                                std::size_t start_index);
std::vector<SphericalPoint> farthest_point_sample(std::span<const SphericalPoint> points, std::size_t k,
                                                  FpsStart start = FpsStart::MaxRange);

// One output per (theta, phi) bin, row-major over theta then phi: mean
// range of the hits in the bin at the bin-centre angles, or the sentinel.
std::vector<SphericalPoint> average_downsample(std::span<const SphericalPoint> points,
                                               const DownsampleGrid& grid);

// Stable lexicographic sort on (theta, phi).
std::vector<SphericalPoint> spherical_sort(std::vector<SphericalPoint> points);

// Fixed-shape per-frame features: k_proximal sorted FPS points (zero-padded)
// and the downsampled distal grid.
struct ProcessedFrame {
  std::vector<SphericalPoint> proximal;
  std::vector<SphericalPoint> distal;
};

ProcessedFrame process_frame(const ScanFrame& frame, const PartitionConfig& cfg);

struct HistorySequences {
  std::vector<std::vector<SphericalPoint>> proximal;  // n_hist x k_proximal, oldest first
  std::vector<std::vector<SphericalPoint>> distal;    // n_hist x (n_theta * n_phi)
};

// Ring of the last n_hist processed frames. Unfilled slots read as
// zero-frames. Single writer.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(const PartitionConfig& cfg);

  // Throws Error(ShapeMismatch) if per-frame sizes differ from the config.
  HistorySequences push_and_assemble(std::vector<SphericalPoint> proximal,
                                     std::vector<SphericalPoint> distal);
  HistorySequences push_and_assemble(ProcessedFrame frame) {
    return push_and_assemble(std::move(frame.proximal), std::move(frame.distal));
  }
  HistorySequences assemble() const;

  std::size_t fill_count() const { return proximal_.size(); }
  std::size_t capacity() const { return n_hist_; }
  void clear();

 private:
  std::size_t n_hist_;
  std::size_t k_proximal_;
  std::size_t distal_size_;
  std::deque<std::vector<SphericalPoint>> proximal_;
  std::deque<std::vector<SphericalPoint>> distal_;
};

struct HeightGridSpec {
  int nx = 17;
  int ny = 11;
  double spacing = 0.1;      // m
  double probe_depth = 5.0;  // m below the base before a probe counts as a miss
  double miss_value = -5.0;  // returned for probes that hit nothing
};

struct HeightGrid {
  int nx = 0;
  int ny = 0;
  std::vector<double> heights;  // row-major, index iy * nx + ix; terrain z - base z

  double at(int ix, int iy) const { return heights[static_cast<std::size_t>(iy * nx + ix)]; }
};

// Cell (ix, iy) sits at ((ix - (nx-1)/2) * spacing, (iy - (ny-1)/2) * spacing)
// in the base's heading frame (yaw only). Each cell is probed straight down
// from above the environment's static geometry.
HeightGrid sample_privileged_height(const SceneWorld& world, int env_id, const RigidTransform& base_pose,
                                    const HeightGridSpec& grid);

}  // namespace lidarsim
