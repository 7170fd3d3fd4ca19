#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "minresfem/errors.hpp"

namespace minresfem {

enum class FacetTag { Interior, Dirichlet, Neumann };

// Sides of the unit square; used to select the Neumann part of the boundary
// when building the initial mesh.
enum class Side { Bottom, Right, Top, Left };

struct Facet {
  int v0 = -1, v1 = -1;      // endpoint vertices, v0 < v1
  int tri0 = -1, tri1 = -1;  // incident triangles, tri1 = -1 on the boundary
  FacetTag tag = FacetTag::Interior;
};

namespace detail {
inline std::pair<int, int> sorted_edge(int a, int b) {
  return a < b ? std::pair<int, int>{a, b} : std::pair<int, int>{b, a};
}
}  // namespace detail

// Conforming triangulation of a polygonal domain. Triangles store their
// newest vertex in slot 2; the refinement edge for bisection is the edge
// between slots 0 and 1. Instances are immutable after construction;
// refinement routines return new meshes.
class Triangulation {
 public:
  int num_vertices() const { return static_cast<int>(verts_.size()); }
  int num_triangles() const { return static_cast<int>(tris_.size()); }
  int num_facets() const { return static_cast<int>(facets_.size()); }

  const Eigen::Vector2d& vertex(int v) const { return verts_[v]; }
  const std::array<int, 3>& triangle(int t) const { return tris_[t]; }
  const Facet& facet(int f) const { return facets_[f]; }
  int generation(int t) const { return gen_[t]; }

  // Facet opposite local vertex k of triangle t.
  int triangle_facet(int t, int k) const { return tri_facets_[t][k]; }

  int facet_index(int a, int b) const {
    auto it = facet_of_edge_.find(detail::sorted_edge(a, b));
    if (it == facet_of_edge_.end())
      throw ConfigError("facet_index: no facet with the given endpoints");
    return it->second;
  }

  double area(int t) const { return areas_[t]; }

  // Columns are the edge vectors v1-v0 and v2-v0 of the affine map from the
  // reference triangle (0,0),(1,0),(0,1).
  Eigen::Matrix2d jacobian(int t) const {
    const auto& tri = tris_[t];
    Eigen::Matrix2d J;
    J.col(0) = verts_[tri[1]] - verts_[tri[0]];
    J.col(1) = verts_[tri[2]] - verts_[tri[0]];
    return J;
  }

  Eigen::Vector2d centroid(int t) const {
    const auto& tri = tris_[t];
    return (verts_[tri[0]] + verts_[tri[1]] + verts_[tri[2]]) / 3.0;
  }

  // Longest edge length.
  double diameter(int t) const {
    const auto& tri = tris_[t];
    double d = 0;
    for (int k = 0; k < 3; ++k)
      d = std::max(d, (verts_[tri[(k + 1) % 3]] - verts_[tri[(k + 2) % 3]]).norm());
    return d;
  }

  int num_boundary_facets() const {
    int n = 0;
    for (const auto& f : facets_)
      if (f.tri1 < 0) ++n;
    return n;
  }

  // Plain-text dump: header "ntri nvert nfacet", vertex coordinate lines,
  // triangle lines "v0 v1 v2 <newest-vertex-slot>", facet lines "v0 v1 tag"
  // with tag I, D or N.
  std::string dump() const {
    std::string out;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d %d %d\n", num_triangles(), num_vertices(),
                  num_facets());
    out += buf;
    for (const auto& v : verts_) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x(), v.y());
      out += buf;
    }
    for (const auto& t : tris_) {
      std::snprintf(buf, sizeof buf, "%d %d %d 2\n", t[0], t[1], t[2]);
      out += buf;
    }
    for (const auto& f : facets_) {
      const char tag = f.tag == FacetTag::Interior   ? 'I'
                       : f.tag == FacetTag::Dirichlet ? 'D'
                                                      : 'N';
      std::snprintf(buf, sizeof buf, "%d %d %c\n", f.v0, f.v1, tag);
      out += buf;
    }
    return out;
  }

 private:
  Triangulation() = default;

  // Builds facet data and checks mesh validity.
  void finalize() {
    const int nt = num_triangles();
    areas_.resize(nt);
    for (int t = 0; t < nt; ++t) {
      const double det = jacobian(t).determinant();
      if (det <= 0)
        throw ConfigError("triangulation has a non-positively oriented triangle");
      areas_[t] = det / 2.0;
    }

    facets_.clear();
    facet_of_edge_.clear();
    tri_facets_.assign(nt, {-1, -1, -1});
    for (int t = 0; t < nt; ++t) {
      for (int k = 0; k < 3; ++k) {
        const auto e = detail::sorted_edge(tris_[t][(k + 1) % 3], tris_[t][(k + 2) % 3]);
        auto it = facet_of_edge_.find(e);
        if (it == facet_of_edge_.end()) {
          Facet f;
          f.v0 = e.first;
          f.v1 = e.second;
          f.tri0 = t;
          facet_of_edge_.emplace(e, static_cast<int>(facets_.size()));
          tri_facets_[t][k] = static_cast<int>(facets_.size());
          facets_.push_back(f);
        } else {
          Facet& f = facets_[it->second];
          if (f.tri1 >= 0)
            throw ConfigError("non-conforming mesh: facet shared by 3+ triangles");
          f.tri1 = t;
          tri_facets_[t][k] = it->second;
        }
      }
    }

    int nbnd = 0;
    for (auto& f : facets_) {
      const auto key = detail::sorted_edge(f.v0, f.v1);
      auto tagged = boundary_tag_.find(key);
      if (f.tri1 < 0) {
        ++nbnd;
        if (tagged == boundary_tag_.end())
          throw ConfigError("boundary facet without Dirichlet/Neumann tag");
        f.tag = tagged->second;
      } else {
        if (tagged != boundary_tag_.end())
          throw ConfigError("interior facet carries a boundary tag");
        f.tag = FacetTag::Interior;
      }
    }
    if (static_cast<int>(boundary_tag_.size()) != nbnd)
      throw ConfigError("boundary tag registry does not match the boundary");
    if (3 * num_triangles() != 2 * num_facets() - nbnd)
      throw ConfigError("facet incidence count violated");
  }

  std::vector<Eigen::Vector2d> verts_;
  std::vector<std::array<int, 3>> tris_;
  std::vector<int> gen_;
  std::vector<double> areas_;
  std::vector<Facet> facets_;
  std::vector<std::array<int, 3>> tri_facets_;
  std::map<std::pair<int, int>, int> facet_of_edge_;
  // Tags of current boundary edges, carried through refinement by splitting
  // a tagged edge's entry onto its two halves.
  std::map<std::pair<int, int>, FacetTag> boundary_tag_;

  friend Triangulation initial_square_mesh(const std::set<Side>&);
  friend Triangulation bisect(const Triangulation&, const std::vector<int>&);
};

// Four triangles on the unit square, cut along both diagonals. The interior
// vertex is the newest vertex of every triangle, so each initial refinement
// edge lies on the boundary. Sides listed in neumann_sides get Neumann tags,
// the rest Dirichlet.
inline Triangulation initial_square_mesh(const std::set<Side>& neumann_sides = {Side::Left}) {
  Triangulation m;
  m.verts_ = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {0.5, 0.5}};
  m.tris_ = {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}};
  m.gen_ = {0, 0, 0, 0};
  const std::array<std::pair<Side, std::pair<int, int>>, 4> sides = {{
      {Side::Bottom, {0, 1}},
      {Side::Right, {1, 2}},
      {Side::Top, {2, 3}},
      {Side::Left, {0, 3}},
  }};
  for (const auto& [side, edge] : sides)
    m.boundary_tag_[edge] =
        neumann_sides.count(side) ? FacetTag::Neumann : FacetTag::Dirichlet;
  m.finalize();
  return m;
}

// Newest-vertex bisection of the marked triangles, plus the completion needed
// to restore conformity. Each split goes through the midpoint of the
// refinement edge; the midpoint becomes the newest vertex of both children.
inline Triangulation bisect(const Triangulation& mesh, const std::vector<int>& marked) {
  for (int t : marked)
    if (t < 0 || t >= mesh.num_triangles())
      throw ConfigError("bisect: marked triangle index out of range");

  Triangulation m;
  m.verts_ = mesh.verts_;
  m.tris_ = mesh.tris_;
  m.gen_ = mesh.gen_;
  m.boundary_tag_ = mesh.boundary_tag_;

  // Midpoints created in this call, keyed by the edge they split.
  std::map<std::pair<int, int>, int> midpoint;
  auto get_midpoint = [&](int a, int b) {
    const auto key = detail::sorted_edge(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int v = static_cast<int>(m.verts_.size());
    m.verts_.push_back(0.5 * (m.verts_[a] + m.verts_[b]));
    midpoint.emplace(key, v);
    auto tagged = m.boundary_tag_.find(key);
    if (tagged != m.boundary_tag_.end()) {
      const FacetTag tag = tagged->second;
      m.boundary_tag_.erase(tagged);
      m.boundary_tag_[detail::sorted_edge(key.first, v)] = tag;
      m.boundary_tag_[detail::sorted_edge(key.second, v)] = tag;
    }
    return v;
  };

  std::vector<char> split_me(m.tris_.size(), 0);
  for (int t : marked) split_me[t] = 1;

  bool any = !marked.empty();
  int rounds = 0;
  while (any) {
    if (++rounds > 1000)
      throw NumericalError("bisect: completion did not terminate");
    std::vector<std::array<int, 3>> next_tris;
    std::vector<int> next_gen;
    next_tris.reserve(m.tris_.size() * 2);
    next_gen.reserve(m.tris_.size() * 2);
    for (std::size_t t = 0; t < m.tris_.size(); ++t) {
      if (!split_me[t]) {
        next_tris.push_back(m.tris_[t]);
        next_gen.push_back(m.gen_[t]);
        continue;
      }
      const auto [a, b, c] = m.tris_[t];
      const int mid = get_midpoint(a, b);
      next_tris.push_back({c, a, mid});
      next_gen.push_back(m.gen_[t] + 1);
      next_tris.push_back({b, c, mid});
      next_gen.push_back(m.gen_[t] + 1);
    }
    m.tris_ = std::move(next_tris);
    m.gen_ = std::move(next_gen);

    // Any triangle with a split edge hangs and must be bisected as well.
    split_me.assign(m.tris_.size(), 0);
    any = false;
    for (std::size_t t = 0; t < m.tris_.size(); ++t) {
      for (int k = 0; k < 3; ++k) {
        const auto e =
            detail::sorted_edge(m.tris_[t][(k + 1) % 3], m.tris_[t][(k + 2) % 3]);
        if (midpoint.count(e)) {
          split_me[t] = 1;
          any = true;
          break;
        }
      }
    }
  }

  m.finalize();
  return m;
}

// One uniform refinement step: two full bisection sweeps, quadrupling the
// triangle count.
inline Triangulation uniform_refine(const Triangulation& mesh) {
  std::vector<int> all(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) all[t] = t;
  Triangulation half = bisect(mesh, all);
  std::vector<int> all2(half.num_triangles());
  for (int t = 0; t < half.num_triangles(); ++t) all2[t] = t;
  return bisect(half, all2);
}

inline std::vector<double> element_size(const Triangulation& mesh) {
  std::vector<double> h(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) h[t] = mesh.diameter(t);
  return h;
}

// Smallest interior angle over all triangles, in degrees.
inline double min_angle_deg(const Triangulation& mesh) {
  double amin = 180.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d u = mesh.vertex(tri[(k + 1) % 3]) - mesh.vertex(tri[k]);
      const Eigen::Vector2d v = mesh.vertex(tri[(k + 2) % 3]) - mesh.vertex(tri[k]);
      const double ang = std::atan2(std::abs(u.x() * v.y() - u.y() * v.x()), u.dot(v));
      amin = std::min(amin, ang * 180.0 / M_PI);
    }
  }
  return amin;
}

// Unit tangent of a facet, pointing from the lower-index to the higher-index
// endpoint.
inline Eigen::Vector2d facet_direction(const Triangulation& mesh, int f) {
  const Facet& fa = mesh.facet(f);
  return (mesh.vertex(fa.v1) - mesh.vertex(fa.v0)).normalized();
}

inline double facet_length(const Triangulation& mesh, int f) {
  const Facet& fa = mesh.facet(f);
  return (mesh.vertex(fa.v1) - mesh.vertex(fa.v0)).norm();
}

// Unit normal of a facet: the tangent rotated clockwise, except on boundary
// facets where the outward direction is used.
inline Eigen::Vector2d facet_normal(const Triangulation& mesh, int f) {
  const Facet& fa = mesh.facet(f);
  const Eigen::Vector2d d = facet_direction(mesh, f);
  Eigen::Vector2d n(d.y(), -d.x());
  if (fa.tri1 < 0) {
    const Eigen::Vector2d mid = 0.5 * (mesh.vertex(fa.v0) + mesh.vertex(fa.v1));
    if (n.dot(mid - mesh.centroid(fa.tri0)) < 0) n = -n;
  }
  return n;
}

// Reference coordinates, within triangle t, of points on facet f given by the
// parameter values tq in [0,1] measured from the facet's lower-index vertex.
inline Eigen::MatrixXd facet_ref_points(const Triangulation& mesh, int t, int f,
                                        const Eigen::VectorXd& tq) {
  const Facet& fa = mesh.facet(f);
  const Eigen::Vector2d a = mesh.vertex(fa.v0);
  const Eigen::Vector2d b = mesh.vertex(fa.v1);
  const Eigen::Matrix2d Jinv = mesh.jacobian(t).inverse();
  const Eigen::Vector2d p0 = mesh.vertex(mesh.triangle(t)[0]);
  Eigen::MatrixXd pts(tq.size(), 2);
  for (int q = 0; q < tq.size(); ++q) {
    const Eigen::Vector2d x = a + tq[q] * (b - a);
    pts.row(q) = (Jinv * (x - p0)).transpose();
  }
  return pts;
}

}  // namespace minresfem
