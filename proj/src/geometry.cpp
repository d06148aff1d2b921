#include "smallscat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "smallscat/parallel.hpp"

namespace smallscat {

namespace {

Vec3 triangle_raw_normal(const Vec3& a, const Vec3& b, const Vec3& c) {
  return (b - a).cross(c - a);
}

std::uint64_t edge_key(int a, int b) {
  auto lo = static_cast<std::uint32_t>(std::min(a, b));
  auto hi = static_cast<std::uint32_t>(std::max(a, b));
  return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

}  // namespace

double SurfaceMesh::body_radius() const {
  double max_sq = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i)
    for (std::size_t j = i + 1; j < vertices.size(); ++j)
      max_sq = std::max(max_sq, (vertices[i] - vertices[j]).squaredNorm());
  return 0.5 * std::sqrt(max_sq);
}

SurfaceMesh SurfaceMesh::scaled(double factor) const {
  std::vector<Vec3> v = vertices;
  for (auto& p : v) p *= factor;
  return make_mesh(std::move(v), triangles);
}

SurfaceMesh SurfaceMesh::rotated(const Mat3& rotation) const {
  std::vector<Vec3> v = vertices;
  for (auto& p : v) p = rotation * p;
  return make_mesh(std::move(v), triangles);
}

SurfaceMesh make_mesh(std::vector<Vec3> vertices,
                      std::vector<std::array<int, 3>> triangles,
                      const std::string& source) {
  const std::string where = source.empty() ? "mesh" : source;
  if (vertices.size() < 4)
    throw Error::validation(where + ": needs at least 4 vertices");
  if (triangles.size() < 4)
    throw Error::validation(where + ": needs at least 4 triangles");

  const int nv = static_cast<int>(vertices.size());
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int c = 0; c < 3; ++c) {
      int idx = triangles[t][c];
      if (idx < 0 || idx >= nv)
        throw Error::validation(where + ": triangle " + std::to_string(t) +
                                " references vertex " + std::to_string(idx) +
                                " out of range");
    }
    if (triangles[t][0] == triangles[t][1] ||
        triangles[t][1] == triangles[t][2] ||
        triangles[t][0] == triangles[t][2])
      throw Error::validation(where + ": triangle " + std::to_string(t) +
                              " repeats a vertex");
  }

  // Closed orientable surface: every undirected edge is shared by exactly two
  // triangles, and the two directed copies run in opposite directions.
  std::unordered_map<std::uint64_t, int> undirected;
  std::unordered_map<std::uint64_t, int> directed;
  undirected.reserve(triangles.size() * 3);
  auto dir_key = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };
  for (const auto& tri : triangles) {
    for (int c = 0; c < 3; ++c) {
      int a = tri[c], b = tri[(c + 1) % 3];
      undirected[edge_key(a, b)]++;
      directed[dir_key(a, b)]++;
    }
  }
  for (const auto& [key, count] : undirected) {
    if (count > 2) {
      int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
      throw Error::validation(where + ": non-manifold edge (" +
                              std::to_string(a) + "," + std::to_string(b) +
                              ") with " + std::to_string(count) +
                              " incident triangles");
    }
  }
  for (const auto& [key, count] : undirected) {
    if (count == 1) {
      int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
      throw Error::validation(where + ": open surface, edge (" +
                              std::to_string(a) + "," + std::to_string(b) +
                              ") has one incident triangle");
    }
  }
  for (const auto& [key, count] : directed) {
    if (count > 1) {
      int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
      throw Error::validation(where + ": inconsistent winding at edge (" +
                              std::to_string(a) + "," + std::to_string(b) + ")");
    }
  }

  double signed_volume = 0.0;
  for (const auto& tri : triangles) {
    const Vec3& a = vertices[static_cast<std::size_t>(tri[0])];
    const Vec3& b = vertices[static_cast<std::size_t>(tri[1])];
    const Vec3& c = vertices[static_cast<std::size_t>(tri[2])];
    signed_volume += a.dot(b.cross(c)) / 6.0;
  }
  if (signed_volume < 0.0) {
    for (auto& tri : triangles) std::swap(tri[1], tri[2]);
    signed_volume = -signed_volume;
  }
  if (!(signed_volume > 0.0))
    throw Error::validation(where + ": degenerate surface, zero volume");

  SurfaceMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.triangles = std::move(triangles);
  const std::size_t nt = mesh.triangles.size();
  mesh.normals.resize(nt);
  mesh.centroids.resize(nt);
  mesh.areas.resize(nt);
  mesh.volume = signed_volume;
  double scale_sq = 0.0;
  for (const auto& p : mesh.vertices) scale_sq = std::max(scale_sq, p.squaredNorm());
  for (std::size_t t = 0; t < nt; ++t) {
    const Vec3& a = mesh.corner(t, 0);
    const Vec3& b = mesh.corner(t, 1);
    const Vec3& c = mesh.corner(t, 2);
    Vec3 raw = triangle_raw_normal(a, b, c);
    double norm = raw.norm();
    if (!(norm > 1e-14 * std::max(scale_sq, 1e-300)))
      throw Error::validation(where + ": triangle " + std::to_string(t) +
                              " is degenerate (zero area)");
    mesh.normals[t] = raw / norm;
    mesh.areas[t] = 0.5 * norm;
    mesh.centroids[t] = (a + b + c) / 3.0;
    mesh.total_area += mesh.areas[t];
  }
  return mesh;
}

namespace {

struct IcoBuilder {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  std::map<std::pair<int, int>, int> midpoint_cache;

  int midpoint(int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint_cache.find(key);
    if (it != midpoint_cache.end()) return it->second;
    Vec3 m = (verts[static_cast<std::size_t>(a)] +
              verts[static_cast<std::size_t>(b)])
                 .normalized();
    verts.push_back(m);
    int idx = static_cast<int>(verts.size()) - 1;
    midpoint_cache.emplace(key, idx);
    return idx;
  }
};

}  // namespace

SurfaceMesh generate_sphere(double radius, int refinement) {
  if (!(radius > 0.0)) throw Error::validation("sphere: radius must be > 0");
  if (refinement < 0) throw Error::validation("sphere: refinement must be >= 0");
  if (refinement > 7) throw Error::validation("sphere: refinement > 7 not supported");

  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  IcoBuilder b;
  b.verts = {
      {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (auto& v : b.verts) v.normalize();
  b.tris = {{0, 11, 5},  {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
            {1, 5, 9},   {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
            {3, 9, 4},   {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
            {4, 9, 5},   {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < refinement; ++level) {
    std::vector<std::array<int, 3>> next;
    next.reserve(b.tris.size() * 4);
    for (const auto& t : b.tris) {
      int ab = b.midpoint(t[0], t[1]);
      int bc = b.midpoint(t[1], t[2]);
      int ca = b.midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    b.tris = std::move(next);
  }

  for (auto& v : b.verts) v *= radius;
  return make_mesh(std::move(b.verts), std::move(b.tris), "icosphere");
}

SurfaceMesh generate_ellipsoid(const Vec3& semiaxes, int refinement) {
  if (!(semiaxes.x() > 0.0 && semiaxes.y() > 0.0 && semiaxes.z() > 0.0))
    throw Error::validation("ellipsoid: semiaxes must be > 0");
  SurfaceMesh unit = generate_sphere(1.0, refinement);
  std::vector<Vec3> verts = std::move(unit.vertices);
  for (auto& v : verts) v = v.cwiseProduct(semiaxes);
  return make_mesh(std::move(verts), std::move(unit.triangles), "ellipsoid");
}

namespace {

// Token stream over an OFF file, skipping '#' comments and tracking lines.
class TokenReader {
public:
  explicit TokenReader(std::istream& in, std::string path)
      : in_(in), path_(std::move(path)) {}

  std::string next() {
    std::string tok;
    while (true) {
      int c = in_.get();
      if (c == EOF) {
        if (tok.empty())
          throw Error::io(path_ + ":" + std::to_string(line_) +
                          ": unexpected end of file");
        return tok;
      }
      if (c == '#') {
        while (c != EOF && c != '\n') c = in_.get();
        ++line_;
        if (!tok.empty()) return tok;
        continue;
      }
      if (std::isspace(c)) {
        if (c == '\n') ++line_;
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
  }

  long next_int() {
    std::string tok = next();
    try {
      std::size_t pos = 0;
      long v = std::stol(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw Error::io(path_ + ":" + std::to_string(line_) +
                      ": expected integer, got '" + tok + "'");
    }
  }

  double next_double() {
    std::string tok = next();
    try {
      std::size_t pos = 0;
      double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw Error::io(path_ + ":" + std::to_string(line_) +
                      ": expected number, got '" + tok + "'");
    }
  }

  int line() const { return line_; }

private:
  std::istream& in_;
  std::string path_;
  int line_ = 1;
};

}  // namespace

SurfaceMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io(path + ": cannot open file");
  TokenReader r(in, path);
  std::string magic = r.next();
  if (magic != "OFF")
    throw Error::io(path + ":1: expected 'OFF' header, got '" + magic + "'");
  long nv = r.next_int();
  long nt = r.next_int();
  (void)r.next_int();  // edge count, ignored
  if (nv < 0 || nt < 0 || nv > 50'000'000 || nt > 50'000'000)
    throw Error::io(path + ": implausible counts nv=" + std::to_string(nv) +
                    " nt=" + std::to_string(nt));
  std::vector<Vec3> verts(static_cast<std::size_t>(nv));
  for (auto& v : verts) {
    v.x() = r.next_double();
    v.y() = r.next_double();
    v.z() = r.next_double();
  }
  std::vector<std::array<int, 3>> tris(static_cast<std::size_t>(nt));
  for (std::size_t t = 0; t < tris.size(); ++t) {
    long arity = r.next_int();
    if (arity != 3)
      throw Error::io(path + ":" + std::to_string(r.line()) +
                      ": only triangles supported, face has " +
                      std::to_string(arity) + " vertices");
    for (int c = 0; c < 3; ++c)
      tris[t][c] = static_cast<int>(r.next_int());
  }
  return make_mesh(std::move(verts), std::move(tris), path);
}

void save_mesh(const SurfaceMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error::io(path + ": cannot open file for writing");
  out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.triangle_count() << " 0\n";
  out.precision(17);
  for (const auto& v : mesh.vertices)
    out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles)
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  if (!out) throw Error::io(path + ": write failed");
}

void panel_nodes(const SurfaceMesh& mesh, std::size_t t, PanelRule rule,
                 std::vector<Vec3>& points, std::vector<double>& weights) {
  points.clear();
  weights.clear();
  const Vec3& a = mesh.corner(t, 0);
  const Vec3& b = mesh.corner(t, 1);
  const Vec3& c = mesh.corner(t, 2);
  const double area = mesh.areas[t];
  if (rule == PanelRule::centroid) {
    points.push_back(mesh.centroids[t]);
    weights.push_back(area);
    return;
  }
  // Degree-2 rule, nodes at (2/3, 1/6, 1/6) barycentric permutations.
  const double w = area / 3.0;
  points.push_back((4.0 * a + b + c) / 6.0);
  points.push_back((a + 4.0 * b + c) / 6.0);
  points.push_back((a + b + 4.0 * c) / 6.0);
  weights.assign(3, w);
}

double triangle_potential(const Vec3& p, const Vec3& a, const Vec3& b,
                          const Vec3& c) {
  const Vec3 verts[3] = {a, b, c};
  Vec3 n = triangle_raw_normal(a, b, c);
  const double two_area = n.norm();
  if (two_area <= 0.0) return 0.0;
  n /= two_area;

  const double d = n.dot(p - a);       // signed height above the plane
  const double abs_d = std::abs(d);
  const Vec3 rho = p - d * n;          // in-plane projection
  const double scale = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});

  double log_part = 0.0;
  double angle_part = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Vec3& v1 = verts[i];
    const Vec3& v2 = verts[(i + 1) % 3];
    Vec3 s_hat = v2 - v1;
    const double len = s_hat.norm();
    if (len <= 0.0) continue;
    s_hat /= len;
    const Vec3 u_hat = s_hat.cross(n);          // in-plane, outward
    const double t0 = (v1 - rho).dot(u_hat);    // > 0 with rho inside
    const double l1 = (v1 - rho).dot(s_hat);
    const double l2 = (v2 - rho).dot(s_hat);
    const double r1 = (p - v1).norm();
    const double r2 = (p - v2).norm();
    const double r0_sq = t0 * t0 + d * d;
    if (r0_sq < 1e-28 * scale * scale) continue;  // on the edge line: limit is 0

    // ln((r2+l2)/(r1+l1)) in the cancellation-free branch, using r^2-l^2=r0^2.
    double f;
    if (l1 + l2 > 0.0)
      f = std::log((r2 + l2) / (r1 + l1));
    else
      f = std::log((r1 - l1) / (r2 - l2));
    log_part += t0 * f;

    angle_part += std::atan(t0 * l2 / (r0_sq + abs_d * r2)) -
                  std::atan(t0 * l1 / (r0_sq + abs_d * r1));
  }
  return log_part - abs_d * angle_part;
}

bool triangles_adjacent(const SurfaceMesh& mesh, std::size_t i, std::size_t j) {
  const auto& a = mesh.triangles[i];
  const auto& b = mesh.triangles[j];
  for (int x : a)
    for (int y : b)
      if (x == y) return true;
  return false;
}

namespace {

struct SubTriangle {
  Vec3 a, b, c;
  Vec3 centroid() const { return (a + b + c) / 3.0; }
  double area() const { return 0.5 * (b - a).cross(c - a).norm(); }
};

void subdivide(const SubTriangle& t, int levels, std::vector<SubTriangle>& out) {
  if (levels == 0) {
    out.push_back(t);
    return;
  }
  const Vec3 ab = 0.5 * (t.a + t.b);
  const Vec3 bc = 0.5 * (t.b + t.c);
  const Vec3 ca = 0.5 * (t.c + t.a);
  subdivide({t.a, ab, ca}, levels - 1, out);
  subdivide({t.b, bc, ab}, levels - 1, out);
  subdivide({t.c, ca, bc}, levels - 1, out);
  subdivide({ab, bc, ca}, levels - 1, out);
}

// psi(t, s) = d/dN_t (1/|s-t|) evaluated with normal `nt` at point `t`.
double psi_kernel(const Vec3& t, const Vec3& nt, const Vec3& s) {
  const Vec3 diff = s - t;
  const double r = diff.norm();
  return nt.dot(diff) / (r * r * r);
}

}  // namespace

double double_surface_integral(const SurfaceMesh& mesh, KernelKind kernel,
                               int p, int q, PanelRule rule) {
  if (p < 0 || p > 2 || q < 0 || q > 2)
    throw Error::validation("double_surface_integral: axes must be 0..2");

  const std::size_t nt = mesh.triangle_count();
  std::vector<double> row_sums(nt, 0.0);

  parallel_for(nt, [&](std::size_t begin, std::size_t end) {
    std::vector<Vec3> outer_pts, inner_pts;
    std::vector<double> outer_w, inner_w;
    std::vector<SubTriangle> subs_i, subs_j;
    for (std::size_t i = begin; i < end; ++i) {
      const double np_i = mesh.normals[i][p];
      double acc = 0.0;
      panel_nodes(mesh, i, rule, outer_pts, outer_w);
      for (std::size_t j = 0; j < nt; ++j) {
        const double nq_j = mesh.normals[j][q];
        const bool near = (i == j) || triangles_adjacent(mesh, i, j);
        if (kernel == KernelKind::newton) {
          if (near) {
            // Outer nodes, exact inner single-layer integral.
            double part = 0.0;
            for (std::size_t g = 0; g < outer_pts.size(); ++g)
              part += outer_w[g] * triangle_potential(outer_pts[g],
                                                      mesh.corner(j, 0),
                                                      mesh.corner(j, 1),
                                                      mesh.corner(j, 2));
            acc += np_i * nq_j * part;
          } else {
            panel_nodes(mesh, j, rule, inner_pts, inner_w);
            double part = 0.0;
            for (std::size_t g = 0; g < outer_pts.size(); ++g)
              for (std::size_t h = 0; h < inner_pts.size(); ++h)
                part += outer_w[g] * inner_w[h] /
                        (outer_pts[g] - inner_pts[h]).norm();
            acc += np_i * nq_j * part;
          }
        } else {  // normal derivative at t; vanishes on the source triangle
          if (i == j) continue;
          const Vec3& n_j = mesh.normals[j];
          if (near) {
            // Bounded but peaked: subdivide both panels 4x in linear size.
            subs_i.clear();
            subs_j.clear();
            subdivide({mesh.corner(i, 0), mesh.corner(i, 1), mesh.corner(i, 2)},
                      2, subs_i);
            subdivide({mesh.corner(j, 0), mesh.corner(j, 1), mesh.corner(j, 2)},
                      2, subs_j);
            double part = 0.0;
            for (const auto& si : subs_i)
              for (const auto& sj : subs_j)
                part += si.area() * sj.area() *
                        psi_kernel(sj.centroid(), n_j, si.centroid());
            acc += np_i * nq_j * part;
          } else {
            panel_nodes(mesh, j, rule, inner_pts, inner_w);
            double part = 0.0;
            for (std::size_t g = 0; g < outer_pts.size(); ++g)
              for (std::size_t h = 0; h < inner_pts.size(); ++h)
                part += outer_w[g] * inner_w[h] *
                        psi_kernel(inner_pts[h], n_j, outer_pts[g]);
            acc += np_i * nq_j * part;
          }
        }
      }
      row_sums[i] = acc;
    }
  });

  double total = 0.0;
  for (double v : row_sums) total += v;
  return total;
}

}  // namespace smallscat
