#pragma once

#include <array>
#include <cmath>

namespace lidarsim {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
constexpr Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
constexpr Vec3 operator*(double s, const Vec3& a) { return a * s; }
constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
constexpr Vec3& operator+=(Vec3& a, const Vec3& b) { return a = a + b; }
constexpr Vec3& operator-=(Vec3& a, const Vec3& b) { return a = a - b; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
constexpr double length_squared(const Vec3& a) { return dot(a, a); }
inline double length(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalize(const Vec3& a) {
  auto l = length(a);
  return l > 0 ? a / l : a;
}
constexpr Vec3 min(const Vec3& a, const Vec3& b) {
  return {a.x < b.x ? a.x : b.x, a.y < b.y ? a.y : b.y, a.z < b.z ? a.z : b.z};
}
constexpr Vec3 max(const Vec3& a, const Vec3& b) {
  return {a.x > b.x ? a.x : b.x, a.y > b.y ? a.y : b.y, a.z > b.z ? a.z : b.z};
}
inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

// Unit quaternion, scalar first.
struct Quat {
  double w = 1, x = 0, y = 0, z = 0;

  static Quat from_axis_angle(const Vec3& axis, double angle) {
    auto a = normalize(axis);
    auto s = std::sin(angle / 2);
    return {std::cos(angle / 2), a.x * s, a.y * s, a.z * s};
  }
  static Quat from_yaw(double yaw) { return from_axis_angle({0, 0, 1}, yaw); }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  Quat conjugate() const { return {w, -x, -y, -z}; }

  friend constexpr bool operator==(const Quat&, const Quat&) = default;
};

inline Quat operator*(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline Vec3 rotate(const Quat& q, const Vec3& v) {
  // v + 2w(u x v) + 2u x (u x v)
  Vec3 u{q.x, q.y, q.z};
  auto c = cross(u, v);
  return v + 2.0 * q.w * c + 2.0 * cross(u, c);
}

// Yaw of the rotated +x axis about world z.
inline double yaw_of(const Quat& q) {
  auto fwd = rotate(q, {1, 0, 0});
  return std::atan2(fwd.y, fwd.x);
}

struct RigidTransform {
  Quat rotation;
  Vec3 translation;

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Quat{}, t}; }

  Vec3 apply(const Vec3& p) const { return rotate(rotation, p) + translation; }
  Vec3 apply_direction(const Vec3& d) const { return rotate(rotation, d); }

  RigidTransform inverse() const {
    auto inv = rotation.conjugate();
    return {inv, -rotate(inv, translation)};
  }

  bool is_valid(double tol = 1e-9) const {
    return std::abs(rotation.norm() - 1.0) <= tol && is_finite(translation);
  }

  friend constexpr bool operator==(const RigidTransform&, const RigidTransform&) = default;
};

// (a * b).apply(p) == a.apply(b.apply(p))
inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.apply(b.translation)};
}

inline constexpr double pi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * pi / 180.0; }

// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  auto w = std::fmod(a + pi, 2 * pi);
  if (w < 0) w += 2 * pi;
  auto r = w - pi;
  return r >= pi ? -pi : r;
}

}  // namespace lidarsim
