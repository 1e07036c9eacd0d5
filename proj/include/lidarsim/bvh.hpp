#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lidarsim/mesh.hpp"

namespace lidarsim {

// Flattened node in depth-first order. Interior nodes keep their left child
// at index + 1 and store the right child explicitly.
struct BvhNode {
  Aabb box;
  std::uint32_t first = 0;  // leaf: first slot in primitive order; interior: right child
  std::uint32_t count = 0;  // > 0 for leaves
  Tag tag_min = 0;
  Tag tag_max = 0;

  bool is_leaf() const { return count > 0; }
};

class Bvh {
 public:
  static constexpr std::uint32_t kMaxLeafSize = 4;

  std::span<const BvhNode> nodes() const { return nodes_; }
  // Triangle indices in leaf order; leaf i covers [first, first + count).
  std::span<const std::uint32_t> primitives() const { return primitives_; }
  std::size_t triangle_count() const { return primitives_.size(); }
  const Aabb& bounds() const { return nodes_.front().box; }
  // Sum of node surface areas; the refit quality metric.
  double surface_area_sum() const { return area_sum_; }

  // Re-tightens every box bottom-up for moved vertices. Throws
  // Error(TopologyChanged) if the triangle count differs from build time.
  void refit(const TriangleMesh& mesh);

  friend Bvh build_bvh(const TriangleMesh& mesh, std::span<const std::int32_t> groups);

 private:
  std::vector<BvhNode> nodes_;
  std::vector<std::uint32_t> primitives_;
  double area_sum_ = 0;
};

// Nodes holding several tags split on the median tag, then nodes holding
// several `groups` keys (one per triangle, optional) split on the median key.
// Uniform nodes take a median split on the longest axis of the centroid
// bounds. At most kMaxLeafSize triangles per leaf. Deterministic.
// Throws Error(EmptyMesh), Error(ShapeMismatch) for a wrong groups length.
Bvh build_bvh(const TriangleMesh& mesh, std::span<const std::int32_t> groups = {});

Bvh refit_bvh(Bvh bvh, const TriangleMesh& mesh);

// Closest hit in [t_min, t_max] among triangles whose tag equals
// `tag_filter` (all triangles when absent). Ties resolve to the lowest
// triangle index, matching brute_force_closest_hit.
std::optional<Hit> query_closest_hit(const Bvh& bvh, const TriangleMesh& mesh, const Ray& ray,
                                     std::optional<Tag> tag_filter = std::nullopt);

}  // namespace lidarsim
