#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lidarsim/math.hpp"

namespace lidarsim {

using Tag = std::int32_t;
using Triangle = std::array<std::uint32_t, 3>;

// Indexed triangle soup. `tags` holds one integer per triangle (environment id
// for the shared dynamic mesh, free-form otherwise).
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> indices;
  std::vector<Tag> tags;

  std::size_t triangle_count() const { return indices.size(); }
  bool empty() const { return indices.empty(); }

  std::array<Vec3, 3> triangle(std::size_t i) const {
    const auto& t = indices[i];
    return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
  }

  // Appends `other`, re-indexing its triangles. Returns the first new vertex index.
  std::uint32_t append(const TriangleMesh& other);
  // Appends `other` with every new triangle tagged `tag`.
  std::uint32_t append(const TriangleMesh& other, Tag tag);

  void set_tags(Tag tag) { tags.assign(indices.size(), tag); }

  // Throws Error(InvalidMesh) on out-of-range indices, tag/index length
  // mismatch or non-finite vertices.
  void validate() const;
};

TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& xf);

struct Aabb {
  Vec3 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
  Vec3 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};

  bool is_empty() const { return min.x > max.x || min.y > max.y || min.z > max.z; }
  void expand(const Vec3& p) {
    min = lidarsim::min(min, p);
    max = lidarsim::max(max, p);
  }
  void expand(const Aabb& b) {
    min = lidarsim::min(min, b.min);
    max = lidarsim::max(max, b.max);
  }
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return (min + max) * 0.5; }
  double surface_area() const {
    if (is_empty()) return 0;
    auto e = extent();
    return 2 * (e.x * e.y + e.x * e.z + e.y * e.z);
  }
  bool contains(const Aabb& b) const {
    return min.x <= b.min.x && min.y <= b.min.y && min.z <= b.min.z && max.x >= b.max.x &&
           max.y >= b.max.y && max.z >= b.max.z;
  }
  int longest_axis() const {
    auto e = extent();
    if (e.x >= e.y && e.x >= e.z) return 0;
    return e.y >= e.z ? 1 : 2;
  }

  friend bool operator==(const Aabb&, const Aabb&) = default;
};

inline Aabb triangle_bounds(const Vec3& a, const Vec3& b, const Vec3& c) {
  Aabb box;
  box.expand(a);
  box.expand(b);
  box.expand(c);
  return box;
}

struct Ray {
  Vec3 origin;
  Vec3 direction{0, 0, 1};
  double t_min = 0;
  double t_max = std::numeric_limits<double>::infinity();

  Vec3 at(double t) const { return origin + direction * t; }
  bool is_valid() const {
    return t_min >= 0 && t_min < t_max && std::abs(length(direction) - 1.0) <= 1e-6 &&
           is_finite(origin);
  }
};

struct Hit {
  double t = 0;
  std::uint32_t triangle_index = 0;
  Tag tag = 0;
  Vec3 point;
};

// Barycentric slack on the edge tests. Hits on shared edges and vertices are
// reported by every incident triangle, so adjacent triangles never leak rays.
inline constexpr double kBarycentricTolerance = 1e-9;

// Möller-Trumbore, edge-inclusive. Returns t in [t_min, t_max] or nothing.
// Zero-area triangles never report a hit.
std::optional<double> intersect_ray_triangle(const Ray& ray, const Vec3& v0, const Vec3& v1,
                                             const Vec3& v2);

// Exhaustive closest hit over all triangles; ties go to the lowest triangle
// index. This is the reference the BVH is validated against.
std::optional<Hit> brute_force_closest_hit(const TriangleMesh& mesh, const Ray& ray,
                                           std::optional<Tag> tag_filter = std::nullopt);

// Mesh generators used by presets, tests and the CLI.
TriangleMesh make_box(const Vec3& min, const Vec3& max);
TriangleMesh make_plane(const Vec3& center, double size_x, double size_y);
// Regular grid heightfield on [x0, x0+size] x [y0, y0+size], `cells` per side.
template <class HeightFn>
TriangleMesh make_heightfield(double x0, double y0, double size, int cells, HeightFn&& height) {
  TriangleMesh mesh;
  auto step = size / cells;
  for (int j = 0; j <= cells; ++j)
    for (int i = 0; i <= cells; ++i) {
      auto x = x0 + i * step, y = y0 + j * step;
      mesh.vertices.push_back({x, y, height(x, y)});
    }
  auto id = [cells](int i, int j) { return static_cast<std::uint32_t>(j * (cells + 1) + i); };
  for (int j = 0; j < cells; ++j)
    for (int i = 0; i < cells; ++i) {
      mesh.indices.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.indices.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  mesh.tags.assign(mesh.indices.size(), 0);
  return mesh;
}
// Icosphere with `subdivisions` levels (20 * 4^s triangles). A non-zero
// `roughness` scales each vertex radius by 1 + roughness * u, u in [-1, 1],
// drawn deterministically from `seed`.
TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions,
                            double roughness = 0.0, std::uint64_t seed = 0);

// ASCII OBJ: `v` and `f` records only (polygons fan-triangulated, 1-based or
// negative indices, `v/vt/vn` forms accepted). Everything else is ignored.
TriangleMesh load_obj(const std::filesystem::path& path);
TriangleMesh parse_obj(std::string_view text);

}  // namespace lidarsim
