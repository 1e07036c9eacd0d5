#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lidarsim/math.hpp"

namespace lidarsim {

enum class PatternKind { Rotating, NonRepetitive, Grid };

// Shape of the non-repetitive sweep. Rosette: forward-looking prism pair
// (avia-like). Panoramic: continuous azimuth spin with an incommensurate
// elevation oscillation (mid360-like).
enum class Sweep { Rosette, Panoramic };

struct Interval {
  double min = 0;
  double max = 0;

  double width() const { return max - min; }
  double center() const { return 0.5 * (min + max); }
  bool contains(double v, double tol = 0) const { return v >= min - tol && v <= max + tol; }
};

struct PatternSpec {
  std::string name;
  PatternKind kind = PatternKind::Grid;
  int rays_per_frame = 1;
  double frame_period = 0.1;  // s
  // Angles in radians. Azimuth is measured from sensor +x towards +y,
  // elevation from the sensor x-y plane, positive up.
  Interval fov_horizontal{-pi, pi};
  Interval fov_vertical{-pi / 4, pi / 4};

  struct Rotating {
    std::vector<double> channel_elevations;
    double rpm = 600;
  } rotating;

  struct NonRepetitive {
    Sweep sweep = Sweep::Rosette;
    double rate_a = 0;  // rad/s
    double rate_b = 0;  // rad/s
    double rate_ratio() const { return rate_b / rate_a; }
  } non_repetitive;

  struct Grid {
    int azimuth_count = 1;
    int elevation_count = 1;
  } grid;

  // Field of view the generated directions are guaranteed to fall in. For
  // rotating patterns this is derived from the channel list.
  Interval horizontal_fov() const;
  Interval vertical_fov() const;

  // Throws Error(InvalidSpec).
  void validate() const;
};

struct RayBundle {
  std::vector<Vec3> directions;  // unit, sensor frame
  std::vector<double> timestamps;  // s, offsets within the frame
};

Vec3 direction_from_angles(double azimuth, double elevation);
double azimuth_of(const Vec3& d);
double elevation_of(const Vec3& d);

// Directions of the frame that starts at simulation time t. Pure in (spec, t).
RayBundle generate(const PatternSpec& spec, double t);

// Fraction of bin_deg x bin_deg angular bins inside the FOV touched by the
// union of `frames` consecutive frames starting at t = 0.
double coverage_fraction(const PatternSpec& spec, int frames, double bin_deg);

// Named presets: mid360-like, avia-like, vlp32-like, hdl64-like,
// ouster64-like, grid. Throws Error(InvalidSpec) for unknown names.
PatternSpec pattern_preset(std::string_view name);
std::vector<std::string> pattern_preset_names();

// Copy of `spec` with a different ray budget. Rotating patterns keep their
// channels and change the column count (rays rounded down to a multiple of
// the channel count, at least one column).
PatternSpec with_rays_per_frame(PatternSpec spec, int rays);

}  // namespace lidarsim
