#include "lidarsim/bvh.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "lidarsim/error.hpp"

namespace lidarsim {

namespace {

struct BuildContext {
  const TriangleMesh& mesh;
  std::vector<Aabb> boxes;
  std::vector<Vec3> centroids;
  std::vector<std::uint32_t>& prims;
  std::vector<BvhNode>& nodes;
  std::span<const std::int32_t> groups;
};

// Splits [begin, end) at the median of `key`, keeping equal keys on one side.
template <class Key>
std::uint32_t split_on_key(BuildContext& ctx, std::uint32_t begin, std::uint32_t end, Key key) {
  auto first = ctx.prims.begin() + begin, last = ctx.prims.begin() + end;
  std::nth_element(first, first + (end - begin) / 2, last, [&](std::uint32_t a, std::uint32_t b) {
    auto ka = key(a), kb = key(b);
    return ka < kb || (ka == kb && a < b);
  });
  auto pivot = key(ctx.prims[begin + (end - begin) / 2]);
  auto split = std::stable_partition(first, last, [&](std::uint32_t p) { return key(p) < pivot; });
  if (split == first) split = std::stable_partition(first, last, [&](std::uint32_t p) { return key(p) <= pivot; });
  return static_cast<std::uint32_t>(split - ctx.prims.begin());
}

std::uint32_t build_node(BuildContext& ctx, std::uint32_t begin, std::uint32_t end) {
  auto index = static_cast<std::uint32_t>(ctx.nodes.size());
  ctx.nodes.emplace_back();

  Aabb box, centroid_box;
  Tag tag_min = std::numeric_limits<Tag>::max(), tag_max = std::numeric_limits<Tag>::min();
  for (auto i = begin; i < end; ++i) {
    auto p = ctx.prims[i];
    box.expand(ctx.boxes[p]);
    centroid_box.expand(ctx.centroids[p]);
    tag_min = std::min(tag_min, ctx.mesh.tags[p]);
    tag_max = std::max(tag_max, ctx.mesh.tags[p]);
  }

  auto make_leaf = [&] {
    ctx.nodes[index] = {box, begin, end - begin, tag_min, tag_max};
    return index;
  };
  if (end - begin == 1) return make_leaf();

  bool mixed_groups = false;
  if (!ctx.groups.empty())
    for (auto i = begin + 1; i < end && !mixed_groups; ++i)
      mixed_groups = ctx.groups[ctx.prims[i]] != ctx.groups[ctx.prims[begin]];

  // Tags first, then groups, then space: each tag and each group ends up in
  // its own subtree.
  if (tag_min != tag_max || mixed_groups) {
    auto mid = tag_min != tag_max
                   ? split_on_key(ctx, begin, end, [&](std::uint32_t p) { return ctx.mesh.tags[p]; })
                   : split_on_key(ctx, begin, end, [&](std::uint32_t p) { return ctx.groups[p]; });
    build_node(ctx, begin, mid);
    auto right = build_node(ctx, mid, end);
    ctx.nodes[index] = {box, right, 0, tag_min, tag_max};
    return index;
  }

  auto first = ctx.prims.begin() + begin, last = ctx.prims.begin() + end;
  auto axis = centroid_box.longest_axis();
  auto mid = begin + (end - begin) / 2;
  // Ties on the centroid coordinate fall back to triangle index so the
  // partition is a total order.
  std::nth_element(first, ctx.prims.begin() + mid, last,
                   [&](std::uint32_t a, std::uint32_t b) {
                     auto ca = ctx.centroids[a][axis], cb = ctx.centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });

  // Small nodes stay leaves unless the split actually separates them.
  if (end - begin <= Bvh::kMaxLeafSize) {
    Aabb left_box, right_box;
    for (auto i = begin; i < mid; ++i) left_box.expand(ctx.boxes[ctx.prims[i]]);
    for (auto i = mid; i < end; ++i) right_box.expand(ctx.boxes[ctx.prims[i]]);
    if (left_box.surface_area() + right_box.surface_area() >= box.surface_area()) return make_leaf();
  }

  build_node(ctx, begin, mid);
  auto right = build_node(ctx, mid, end);
  ctx.nodes[index] = {box, right, 0, tag_min, tag_max};
  return index;
}

double sum_areas(const std::vector<BvhNode>& nodes) {
  double sum = 0;
  for (const auto& n : nodes) sum += n.box.surface_area();
  return sum;
}

// Slab test against `box` grown by a small relative margin. Edge-inclusive
// triangle hits may sit up to the barycentric tolerance outside the exact
// triangle bounds; the margin keeps those leaves reachable.
bool enter_box(const Aabb& box, const Ray& ray, const Vec3& inv_dir, double t_limit,
               double& t_enter) {
  auto e = box.extent();
  auto pad = 1e-7 * std::max({e.x, e.y, e.z}) + 1e-12;
  double t0 = ray.t_min, t1 = t_limit;
  for (int a = 0; a < 3; ++a) {
    auto lo = box.min[a] - pad, hi = box.max[a] + pad;
    if (ray.direction[a] == 0) {
      if (ray.origin[a] < lo || ray.origin[a] > hi) return false;
      continue;
    }
    auto ta = (lo - ray.origin[a]) * inv_dir[a];
    auto tb = (hi - ray.origin[a]) * inv_dir[a];
    if (ta > tb) std::swap(ta, tb);
    // Conservative rounding bound on the far plane.
    tb *= 1 + 4 * std::numeric_limits<double>::epsilon();
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  t_enter = t0;
  return true;
}

}  // namespace

Bvh build_bvh(const TriangleMesh& mesh, std::span<const std::int32_t> groups) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "cannot build a BVH over zero triangles");
  mesh.validate();
  if (!groups.empty() && groups.size() != mesh.triangle_count())
    throw Error(ErrorCode::ShapeMismatch, "one group key per triangle required");

  Bvh bvh;
  auto n = static_cast<std::uint32_t>(mesh.triangle_count());
  bvh.primitives_.resize(n);
  std::iota(bvh.primitives_.begin(), bvh.primitives_.end(), 0u);
  bvh.nodes_.reserve(2 * (n / Bvh::kMaxLeafSize + 1));

  BuildContext ctx{mesh, {}, {}, bvh.primitives_, bvh.nodes_, groups};
  ctx.boxes.resize(n);
  ctx.centroids.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto [a, b, c] = mesh.triangle(i);
    ctx.boxes[i] = triangle_bounds(a, b, c);
    ctx.centroids[i] = (a + b + c) / 3.0;
  }
  build_node(ctx, 0, n);
  bvh.area_sum_ = sum_areas(bvh.nodes_);
  return bvh;
}

void Bvh::refit(const TriangleMesh& mesh) {
  if (mesh.triangle_count() != primitives_.size())
    throw Error(ErrorCode::TopologyChanged,
                "BVH built over " + std::to_string(primitives_.size()) + " triangles, mesh has " +
                    std::to_string(mesh.triangle_count()));
  // Children always follow their parent in the node array.
  for (auto i = nodes_.size(); i-- > 0;) {
    auto& node = nodes_[i];
    Aabb box;
    if (node.is_leaf()) {
      for (auto k = node.first; k < node.first + node.count; ++k) {
        auto [a, b, c] = mesh.triangle(primitives_[k]);
        box.expand(triangle_bounds(a, b, c));
      }
    } else {
      box = nodes_[i + 1].box;
      box.expand(nodes_[node.first].box);
    }
    node.box = box;
  }
  area_sum_ = sum_areas(nodes_);
}

Bvh refit_bvh(Bvh bvh, const TriangleMesh& mesh) {
  bvh.refit(mesh);
  return bvh;
}

std::optional<Hit> query_closest_hit(const Bvh& bvh, const TriangleMesh& mesh, const Ray& ray,
                                     std::optional<Tag> tag_filter) {
  auto nodes = bvh.nodes();
  auto prims = bvh.primitives();
  if (nodes.empty()) return std::nullopt;

  Vec3 inv_dir{1 / ray.direction.x, 1 / ray.direction.y, 1 / ray.direction.z};
  auto tag_ok = [&](const BvhNode& n) {
    return !tag_filter || (n.tag_min <= *tag_filter && *tag_filter <= n.tag_max);
  };

  double best_t = ray.t_max;
  std::uint32_t best_tri = std::numeric_limits<std::uint32_t>::max();

  struct Entry {
    std::uint32_t node;
    double t_enter;
  };
  Entry stack[64];
  int top = 0;
  double t_root = 0;
  if (!tag_ok(nodes[0]) || !enter_box(nodes[0].box, ray, inv_dir, best_t, t_root))
    return std::nullopt;
  stack[top++] = {0, t_root};

  while (top > 0) {
    auto entry = stack[--top];
    if (entry.t_enter > best_t) continue;
    const auto& node = nodes[entry.node];
    if (node.is_leaf()) {
      for (auto k = node.first; k < node.first + node.count; ++k) {
        auto tri = prims[k];
        if (tag_filter && mesh.tags[tri] != *tag_filter) continue;
        auto [a, b, c] = mesh.triangle(tri);
        auto t = intersect_ray_triangle(ray, a, b, c);
        if (t && (*t < best_t || (*t == best_t && tri < best_tri))) {
          best_t = *t;
          best_tri = tri;
        }
      }
      continue;
    }
    auto left = entry.node + 1;
    auto right = node.first;
    double t_left = 0, t_right = 0;
    bool hit_left = tag_ok(nodes[left]) && enter_box(nodes[left].box, ray, inv_dir, best_t, t_left);
    bool hit_right = tag_ok(nodes[right]) && enter_box(nodes[right].box, ray, inv_dir, best_t, t_right);
    // Push the far child first so the near one is popped next.
    if (hit_left && hit_right) {
      if (t_left <= t_right) {
        stack[top++] = {right, t_right};
        stack[top++] = {left, t_left};
      } else {
        stack[top++] = {left, t_left};
        stack[top++] = {right, t_right};
      }
    } else if (hit_left) {
      stack[top++] = {left, t_left};
    } else if (hit_right) {
      stack[top++] = {right, t_right};
    }
  }

  if (best_tri == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  return Hit{best_t, best_tri, mesh.tags[best_tri], ray.at(best_t)};
}

}  // namespace lidarsim
