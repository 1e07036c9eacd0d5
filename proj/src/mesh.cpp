#include "lidarsim/mesh.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "lidarsim/error.hpp"
#include "lidarsim/rng.hpp"

namespace lidarsim {

std::uint32_t TriangleMesh::append(const TriangleMesh& other) {
  auto base = static_cast<std::uint32_t>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (auto t : other.indices) indices.push_back({t[0] + base, t[1] + base, t[2] + base});
  if (other.tags.size() == other.indices.size())
    tags.insert(tags.end(), other.tags.begin(), other.tags.end());
  else
    tags.resize(indices.size(), 0);
  return base;
}

std::uint32_t TriangleMesh::append(const TriangleMesh& other, Tag tag) {
  auto base = append(other);
  std::fill(tags.end() - static_cast<std::ptrdiff_t>(other.indices.size()), tags.end(), tag);
  return base;
}

void TriangleMesh::validate() const {
  if (tags.size() != indices.size())
    throw Error(ErrorCode::InvalidMesh, "tag count " + std::to_string(tags.size()) +
                                            " != triangle count " + std::to_string(indices.size()));
  for (const auto& t : indices)
    for (auto i : t)
      if (i >= vertices.size())
        throw Error(ErrorCode::InvalidMesh, "vertex index " + std::to_string(i) + " out of range");
  for (const auto& v : vertices)
    if (!is_finite(v)) throw Error(ErrorCode::InvalidMesh, "non-finite vertex");
}

TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& xf) {
  auto out = mesh;
  for (auto& v : out.vertices) v = xf.apply(v);
  return out;
}

std::optional<double> intersect_ray_triangle(const Ray& ray, const Vec3& v0, const Vec3& v1,
                                             const Vec3& v2) {
  auto e1 = v1 - v0;
  auto e2 = v2 - v0;
  auto p = cross(ray.direction, e2);
  auto det = dot(e1, p);
  // Parallel ray or zero-area triangle.
  if (det == 0 || length_squared(cross(e1, e2)) == 0) return std::nullopt;
  auto inv_det = 1.0 / det;

  auto s = ray.origin - v0;
  auto b1 = dot(s, p) * inv_det;
  if (b1 < -kBarycentricTolerance || b1 > 1 + kBarycentricTolerance) return std::nullopt;

  auto q = cross(s, e1);
  auto b2 = dot(ray.direction, q) * inv_det;
  if (b2 < -kBarycentricTolerance || b1 + b2 > 1 + kBarycentricTolerance) return std::nullopt;

  auto t = dot(e2, q) * inv_det;
  if (!(t >= ray.t_min && t <= ray.t_max)) return std::nullopt;
  return t;
}

std::optional<Hit> brute_force_closest_hit(const TriangleMesh& mesh, const Ray& ray,
                                           std::optional<Tag> tag_filter) {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < mesh.indices.size(); ++i) {
    if (tag_filter && mesh.tags[i] != *tag_filter) continue;
    auto [a, b, c] = mesh.triangle(i);
    auto t = intersect_ray_triangle(ray, a, b, c);
    if (t && (!best || *t < best->t)) best = Hit{*t, static_cast<std::uint32_t>(i), mesh.tags[i], {}};
  }
  if (best) best->point = ray.at(best->t);
  return best;
}

TriangleMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh mesh;
  for (int i = 0; i < 8; ++i)
    mesh.vertices.push_back({(i & 1) ? hi.x : lo.x, (i & 2) ? hi.y : lo.y, (i & 4) ? hi.z : lo.z});
  // Outward-facing quads, split into two triangles each.
  const std::uint32_t quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                     {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    mesh.indices.push_back({q[0], q[1], q[2]});
    mesh.indices.push_back({q[0], q[2], q[3]});
  }
  mesh.tags.assign(mesh.indices.size(), 0);
  return mesh;
}

TriangleMesh make_plane(const Vec3& center, double size_x, double size_y) {
  TriangleMesh mesh;
  auto hx = size_x / 2, hy = size_y / 2;
  mesh.vertices = {{center.x - hx, center.y - hy, center.z},
                   {center.x + hx, center.y - hy, center.z},
                   {center.x + hx, center.y + hy, center.z},
                   {center.x - hx, center.y + hy, center.z}};
  mesh.indices = {{0, 1, 2}, {0, 2, 3}};
  mesh.tags = {0, 0};
  return mesh;
}

TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions, double roughness,
                            std::uint64_t seed) {
  const double g = (1 + std::sqrt(5.0)) / 2;
  std::vector<Vec3> verts = {{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0},
                             {0, -1, g}, {0, 1, g}, {0, -1, -g}, {0, 1, -g},
                             {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
  for (auto& v : verts) v = normalize(v);
  std::vector<Triangle> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      auto key = std::minmax(a, b);
      auto [it, inserted] = midpoints.try_emplace({key.first, key.second}, 0);
      if (inserted) {
        it->second = static_cast<std::uint32_t>(verts.size());
        verts.push_back(normalize((verts[a] + verts[b]) * 0.5));
      }
      return it->second;
    };
    std::vector<Triangle> next;
    next.reserve(faces.size() * 4);
    for (auto f : faces) {
      auto ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  TriangleMesh mesh;
  auto rng = CounterRng::keyed(seed);
  mesh.vertices.reserve(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) {
    auto r = radius * (1 + roughness * rng.uniform(i, -1, 1));
    mesh.vertices.push_back(center + verts[i] * r);
  }
  mesh.indices = std::move(faces);
  mesh.tags.assign(mesh.indices.size(), 0);
  return mesh;
}

namespace {

std::string_view next_token(std::string_view& line) {
  auto start = line.find_first_not_of(" \t\r");
  if (start == std::string_view::npos) {
    line = {};
    return {};
  }
  line.remove_prefix(start);
  auto end = line.find_first_of(" \t\r");
  auto tok = line.substr(0, end);
  line.remove_prefix(end == std::string_view::npos ? line.size() : end);
  return tok;
}

double parse_double(std::string_view tok, std::size_t line_no) {
  // std::from_chars for double is available in libstdc++ 11.
  double value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw Error(ErrorCode::Parse, "bad number '" + std::string(tok) + "' on OBJ line " +
                                      std::to_string(line_no));
  return value;
}

}  // namespace

TriangleMesh parse_obj(std::string_view text) {
  TriangleMesh mesh;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto eol = text.find('\n');
    auto line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    ++line_no;

    auto kind = next_token(line);
    if (kind == "v") {
      Vec3 v;
      for (int i = 0; i < 3; ++i) {
        auto tok = next_token(line);
        if (tok.empty()) throw Error(ErrorCode::Parse, "short vertex on OBJ line " + std::to_string(line_no));
        v[i] = parse_double(tok, line_no);
      }
      mesh.vertices.push_back(v);
    } else if (kind == "f") {
      std::vector<std::uint32_t> poly;
      for (auto tok = next_token(line); !tok.empty(); tok = next_token(line)) {
        auto slash = tok.find('/');
        auto idx_tok = tok.substr(0, slash);
        long long idx = 0;
        auto [ptr, ec] = std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), idx);
        if (ec != std::errc() || idx == 0)
          throw Error(ErrorCode::Parse, "bad face index on OBJ line " + std::to_string(line_no));
        auto n = static_cast<long long>(mesh.vertices.size());
        auto resolved = idx > 0 ? idx - 1 : n + idx;
        if (resolved < 0 || resolved >= n)
          throw Error(ErrorCode::Parse, "face index out of range on OBJ line " + std::to_string(line_no));
        poly.push_back(static_cast<std::uint32_t>(resolved));
      }
      if (poly.size() < 3) throw Error(ErrorCode::Parse, "face with < 3 vertices on OBJ line " + std::to_string(line_no));
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) mesh.indices.push_back({poly[0], poly[i], poly[i + 1]});
    }
  }
  mesh.tags.assign(mesh.indices.size(), 0);
  return mesh;
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_obj(buffer.str());
}

}  // namespace lidarsim
