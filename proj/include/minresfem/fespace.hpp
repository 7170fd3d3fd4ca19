#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <vector>

#include "minresfem/errors.hpp"
#include "minresfem/mesh.hpp"
#include "minresfem/modal.hpp"
#include "minresfem/quadrature.hpp"

namespace minresfem {

enum class Family { DG, Lagrange, RaviartThomas, CrouzeixRaviart };

// Essential constraints are homogeneous and are imposed by removing dofs:
// traces on Dirichlet-tagged facets (closure rule at vertices) or normal
// traces on Neumann-tagged facets.
enum class Constraint { None, ZeroTraceOnDirichlet, ZeroNormalTraceOnNeumann };

struct ScalarBasisEval {
  Eigen::MatrixXd value, dx, dy;  // npts x local_dim, physical derivatives
};

struct VectorBasisEval {
  Eigen::MatrixXd vx, vy, div;  // npts x local_dim
};

class FESpace;
inline FESpace make_space(const Triangulation& mesh, Family family, int degree,
                          Constraint constraint = Constraint::None);
inline ScalarBasisEval eval_scalar_basis(const FESpace& s, int t,
                                         const Eigen::MatrixXd& pts);
inline VectorBasisEval eval_vector_basis(const FESpace& s, int t,
                                         const Eigen::MatrixXd& pts);

class FESpace {
 public:
  const Triangulation& mesh() const { return *mesh_; }
  Family family() const { return family_; }
  int degree() const { return degree_; }
  Constraint constraint() const { return constraint_; }
  bool is_vector_valued() const { return family_ == Family::RaviartThomas; }

  // Number of unconstrained global dofs.
  int dim() const { return dim_; }
  int local_dim() const { return local_dim_; }

  // Global dof of local dof k on element t; -1 when the dof is constrained.
  int dof(int t, int k) const { return elem_dofs_[static_cast<std::size_t>(t) * local_dim_ + k]; }

 private:
  const Triangulation* mesh_ = nullptr;
  Family family_ = Family::DG;
  int degree_ = 0;
  Constraint constraint_ = Constraint::None;
  int dim_ = 0;
  int local_dim_ = 0;
  std::vector<int> elem_dofs_;

  // Scalar families: local basis in reference monomial coordinates, plus the
  // premultiplied reference-derivative coefficient matrices.
  Eigen::MatrixXd coeffs_, dxc_, dyc_;

  // Raviart-Thomas: quadrature and moment data for the per-element dual basis
  // construction (see rt_span_eval / rt_element_coeffs).
  Eigen::VectorXd rt_edge_t_, rt_edge_w_;
  Eigen::MatrixXd rt_edge_leg_;           // Legendre values at edge nodes
  Eigen::MatrixXd rt_vol_pts_;
  Eigen::VectorXd rt_vol_w_;
  Eigen::MatrixXd rt_interior_test_;      // interior test functions at vol pts
  Eigen::MatrixXd rt_cp_, rt_dxcp_, rt_dycp_;  // degree-p modal and derivatives

  friend FESpace make_space(const Triangulation&, Family, int, Constraint);
  friend ScalarBasisEval eval_scalar_basis(const FESpace&, int, const Eigen::MatrixXd&);
  friend VectorBasisEval eval_vector_basis(const FESpace&, int, const Eigen::MatrixXd&);
  friend VectorBasisEval rt_span_eval(const FESpace&, int, const Eigen::MatrixXd&);
  friend Eigen::MatrixXd rt_element_coeffs(const FESpace&, int);
};

namespace detail {

// Lattice node layout for continuous Lagrange elements: vertices, then edge
// nodes per local facet (ordered away from the facet's first local endpoint),
// then interior nodes.
struct LagrangeLayout {
  Eigen::MatrixXd nodes;             // local_dim x 2 reference coordinates
  std::vector<std::array<int, 2>> edge_node;  // (local facet, slot s=1..p-1), by node
  std::vector<int> kind;             // 0 vertex, 1 edge, 2 interior
};

inline const LagrangeLayout& lagrange_layout(int p) {
  static std::map<int, LagrangeLayout> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(p);
  if (it != cache.end()) return it->second;

  LagrangeLayout lay;
  std::vector<Eigen::Vector2d> nodes;
  auto push = [&](int b0, int b1, int b2, int kind, int lf, int s) {
    (void)b0;
    nodes.emplace_back(static_cast<double>(b1) / p, static_cast<double>(b2) / p);
    lay.kind.push_back(kind);
    lay.edge_node.push_back({lf, s});
  };
  push(p, 0, 0, 0, -1, -1);
  push(0, p, 0, 0, -1, -1);
  push(0, 0, p, 0, -1, -1);
  // local facet lf is opposite vertex lf and joins vertices (lf+1)%3, (lf+2)%3
  for (int lf = 0; lf < 3; ++lf) {
    for (int s = 1; s <= p - 1; ++s) {
      int bary[3] = {0, 0, 0};
      bary[(lf + 1) % 3] = p - s;
      bary[(lf + 2) % 3] = s;
      push(bary[0], bary[1], bary[2], 1, lf, s);
    }
  }
  for (int b1 = 1; b1 <= p - 2; ++b1)
    for (int b2 = 1; b2 <= p - 1 - b1; ++b2)
      push(p - b1 - b2, b1, b2, 2, -1, -1);

  lay.nodes.resize(nodes.size(), 2);
  for (std::size_t i = 0; i < nodes.size(); ++i) lay.nodes.row(i) = nodes[i].transpose();
  return cache.emplace(p, std::move(lay)).first->second;
}

inline void renumber_free_dofs(std::vector<int>& elem_dofs,
                               const std::vector<char>& constrained, int n_global,
                               int* dim_out) {
  std::vector<int> newid(n_global, -1);
  int next = 0;
  for (int g = 0; g < n_global; ++g)
    if (!constrained[g]) newid[g] = next++;
  for (int& d : elem_dofs) d = (d >= 0) ? newid[d] : -1;
  *dim_out = next;
}

}  // namespace detail

// Values, divergences of the local Raviart-Thomas spanning fields
// {(psi_i,0)}, {(0,psi_i)}, {x~ m_k(x~)} at reference points of element t,
// where x~ are centroid-scaled physical coordinates and m_k runs over the
// homogeneous degree-p monomials.
inline VectorBasisEval rt_span_eval(const FESpace& s, int t, const Eigen::MatrixXd& pts) {
  const int p = s.degree_;
  const int np = poly_space_dim(p);
  const int nq = static_cast<int>(pts.rows());
  const int nfields = 2 * np + (p + 1);
  const Triangulation& mesh = *s.mesh_;

  const Eigen::MatrixXd mono = monomial_values(p, pts);
  const Eigen::MatrixXd V = mono * s.rt_cp_;
  const Eigen::MatrixXd Gx = mono * s.rt_dxcp_;
  const Eigen::MatrixXd Gy = mono * s.rt_dycp_;
  const Eigen::Matrix2d Jinv = mesh.jacobian(t).inverse();

  VectorBasisEval out;
  out.vx = Eigen::MatrixXd::Zero(nq, nfields);
  out.vy = Eigen::MatrixXd::Zero(nq, nfields);
  out.div = Eigen::MatrixXd::Zero(nq, nfields);
  out.vx.leftCols(np) = V;
  out.div.leftCols(np) = Jinv(0, 0) * Gx + Jinv(1, 0) * Gy;
  out.vy.middleCols(np, np) = V;
  out.div.middleCols(np, np) = Jinv(0, 1) * Gx + Jinv(1, 1) * Gy;

  const Eigen::Vector2d c = mesh.centroid(t);
  const Eigen::Vector2d v0 = mesh.vertex(mesh.triangle(t)[0]);
  const Eigen::Matrix2d J = mesh.jacobian(t);
  const double h = mesh.diameter(t);
  Eigen::ArrayXd xs(nq), ys(nq);
  for (int q = 0; q < nq; ++q) {
    const Eigen::Vector2d x = v0 + J * pts.row(q).transpose();
    xs(q) = (x.x() - c.x()) / h;
    ys(q) = (x.y() - c.y()) / h;
  }
  Eigen::MatrixXd powx(nq, p + 1), powy(nq, p + 1);
  powx.col(0).setOnes();
  powy.col(0).setOnes();
  for (int j = 1; j <= p; ++j) {
    powx.col(j) = powx.col(j - 1).array() * xs;
    powy.col(j) = powy.col(j - 1).array() * ys;
  }
  for (int k = 0; k <= p; ++k) {
    const int col = 2 * np + k;
    const Eigen::ArrayXd mk = powx.col(k).array() * powy.col(p - k).array();
    out.vx.col(col) = (xs * mk).matrix();
    out.vy.col(col) = (ys * mk).matrix();
    out.div.col(col) = ((p + 2) / h * mk).matrix();
  }
  return out;
}

// Coefficients of the element's dual basis with respect to the spanning
// fields: column i solves moment(j, basis_i) = delta_ij for the facet normal
// moments (Legendre-weighted, unit-normal scaling) and interior moments.
inline Eigen::MatrixXd rt_element_coeffs(const FESpace& s, int t) {
  const int p = s.degree_;
  const int np = poly_space_dim(p);
  const int n = 2 * np + (p + 1);
  const Triangulation& mesh = *s.mesh_;

  Eigen::MatrixXd D(n, n);
  int row = 0;
  for (int lf = 0; lf < 3; ++lf) {
    const int f = mesh.triangle_facet(t, lf);
    const Eigen::Vector2d nrm = facet_normal(mesh, f);
    const double len = facet_length(mesh, f);
    const Eigen::MatrixXd ref = facet_ref_points(mesh, t, f, s.rt_edge_t_);
    const VectorBasisEval fe = rt_span_eval(s, t, ref);
    const Eigen::MatrixXd vn = nrm.x() * fe.vx + nrm.y() * fe.vy;
    for (int k = 0; k <= p; ++k, ++row)
      D.row(row) = (s.rt_edge_w_.cwiseProduct(s.rt_edge_leg_.col(k)) * len)
                       .transpose() * vn;
  }
  if (p > 0) {
    const VectorBasisEval fe = rt_span_eval(s, t, s.rt_vol_pts_);
    const Eigen::VectorXd w = s.rt_vol_w_ * (2.0 * mesh.area(t));
    const int nint = poly_space_dim(p - 1);
    for (int a = 0; a < nint; ++a, ++row)
      D.row(row) = (w.cwiseProduct(s.rt_interior_test_.col(a))).transpose() * fe.vx;
    for (int a = 0; a < nint; ++a, ++row)
      D.row(row) = (w.cwiseProduct(s.rt_interior_test_.col(a))).transpose() * fe.vy;
  }
  return refined_inverse(D);
}

inline ScalarBasisEval eval_scalar_basis(const FESpace& s, int t,
                                         const Eigen::MatrixXd& pts) {
  if (s.family_ == Family::RaviartThomas)
    throw CapabilityError("eval_scalar_basis: space is vector-valued");
  const int deg = (s.family_ == Family::CrouzeixRaviart) ? 1 : s.degree_;
  const Eigen::MatrixXd mono = monomial_values(deg, pts);
  ScalarBasisEval out;
  out.value = mono * s.coeffs_;
  const Eigen::MatrixXd gx = mono * s.dxc_;
  const Eigen::MatrixXd gy = mono * s.dyc_;
  const Eigen::Matrix2d Jinv = s.mesh_->jacobian(t).inverse();
  out.dx = Jinv(0, 0) * gx + Jinv(1, 0) * gy;
  out.dy = Jinv(0, 1) * gx + Jinv(1, 1) * gy;
  return out;
}

inline VectorBasisEval eval_vector_basis(const FESpace& s, int t,
                                         const Eigen::MatrixXd& pts) {
  if (s.family_ != Family::RaviartThomas)
    throw CapabilityError("eval_vector_basis: space is scalar-valued");
  const VectorBasisEval fields = rt_span_eval(s, t, pts);
  const Eigen::MatrixXd C = rt_element_coeffs(s, t);
  VectorBasisEval out;
  out.vx = fields.vx * C;
  out.vy = fields.vy * C;
  out.div = fields.div * C;
  return out;
}

inline FESpace make_space(const Triangulation& mesh, Family family, int degree,
                          Constraint constraint) {
  FESpace s;
  s.mesh_ = &mesh;
  s.family_ = family;
  s.degree_ = degree;
  s.constraint_ = constraint;
  const int nt = mesh.num_triangles();
  const int nf = mesh.num_facets();
  const int nv = mesh.num_vertices();

  switch (family) {
    case Family::DG: {
      if (degree < 0 || degree > 8)
        throw CapabilityError("DG space: degree must be in 0..8");
      if (constraint != Constraint::None)
        throw CapabilityError("DG space: constraints are not supported");
      const int nloc = poly_space_dim(degree);
      s.local_dim_ = nloc;
      s.coeffs_ = modal_coefficients(degree);
      s.dxc_ = detail::derivative_matrices(degree).dx * s.coeffs_;
      s.dyc_ = detail::derivative_matrices(degree).dy * s.coeffs_;
      s.elem_dofs_.resize(static_cast<std::size_t>(nt) * nloc);
      for (int t = 0; t < nt; ++t)
        for (int k = 0; k < nloc; ++k)
          s.elem_dofs_[static_cast<std::size_t>(t) * nloc + k] = t * nloc + k;
      s.dim_ = nt * nloc;
      break;
    }

    case Family::Lagrange: {
      if (degree < 1 || degree > 9)
        throw CapabilityError("Lagrange space: degree must be in 1..9");
      if (constraint == Constraint::ZeroNormalTraceOnNeumann)
        throw CapabilityError("Lagrange space: normal-trace constraint not supported");
      const auto& lay = detail::lagrange_layout(degree);
      const int nloc = static_cast<int>(lay.nodes.rows());
      s.local_dim_ = nloc;
      const Eigen::MatrixXd& cm = modal_coefficients(degree);
      const Eigen::MatrixXd vand = monomial_values(degree, lay.nodes) * cm;
      s.coeffs_ = cm * refined_inverse(vand);
      s.dxc_ = detail::derivative_matrices(degree).dx * s.coeffs_;
      s.dyc_ = detail::derivative_matrices(degree).dy * s.coeffs_;

      const int per_edge = degree - 1;
      const int per_tri = (degree - 1) * (degree - 2) / 2;
      const int n_global = nv + nf * per_edge + nt * per_tri;
      s.elem_dofs_.resize(static_cast<std::size_t>(nt) * nloc);
      for (int t = 0; t < nt; ++t) {
        const auto& tri = mesh.triangle(t);
        int interior_seen = 0;
        for (int k = 0; k < nloc; ++k) {
          int g = -1;
          if (lay.kind[k] == 0) {
            g = tri[k];
          } else if (lay.kind[k] == 1) {
            const int lf = lay.edge_node[k][0];
            const int sparam = lay.edge_node[k][1];
            const int f = mesh.triangle_facet(t, lf);
            const int la_global = tri[(lf + 1) % 3];
            // slot measured from the facet's lower-index endpoint
            const int slot = (la_global == mesh.facet(f).v0) ? sparam - 1
                                                             : per_edge - sparam;
            g = nv + f * per_edge + slot;
          } else {
            g = nv + nf * per_edge + t * per_tri + interior_seen++;
          }
          s.elem_dofs_[static_cast<std::size_t>(t) * nloc + k] = g;
        }
      }

      std::vector<char> constrained(n_global, 0);
      if (constraint == Constraint::ZeroTraceOnDirichlet) {
        for (int f = 0; f < nf; ++f) {
          if (mesh.facet(f).tag != FacetTag::Dirichlet) continue;
          constrained[mesh.facet(f).v0] = 1;
          constrained[mesh.facet(f).v1] = 1;
          for (int j = 0; j < per_edge; ++j) constrained[nv + f * per_edge + j] = 1;
        }
      }
      detail::renumber_free_dofs(s.elem_dofs_, constrained, n_global, &s.dim_);
      break;
    }

    case Family::RaviartThomas: {
      if (degree < 0 || degree > 6)
        throw CapabilityError("Raviart-Thomas space: degree must be in 0..6");
      if (constraint == Constraint::ZeroTraceOnDirichlet)
        throw CapabilityError("Raviart-Thomas space: trace constraint not supported");
      const int p = degree;
      const int np = poly_space_dim(p);
      const int nloc = 2 * np + (p + 1);
      s.local_dim_ = nloc;
      s.rt_cp_ = modal_coefficients(p);
      s.rt_dxcp_ = detail::derivative_matrices(p).dx * s.rt_cp_;
      s.rt_dycp_ = detail::derivative_matrices(p).dy * s.rt_cp_;
      const QuadRule er = edge_rule(2 * p + 2);
      s.rt_edge_t_ = er.points.col(0);
      s.rt_edge_w_ = er.weights;
      s.rt_edge_leg_ = shifted_legendre(p, s.rt_edge_t_);
      const QuadRule vr = triangle_rule(2 * p + 2);
      s.rt_vol_pts_ = vr.points;
      s.rt_vol_w_ = vr.weights;
      if (p > 0)
        s.rt_interior_test_ =
            monomial_values(p - 1, vr.points) * modal_coefficients(p - 1);

      const int per_facet = p + 1;
      const int per_tri = p * (p + 1);
      const int n_global = nf * per_facet + nt * per_tri;
      s.elem_dofs_.resize(static_cast<std::size_t>(nt) * nloc);
      for (int t = 0; t < nt; ++t) {
        int k = 0;
        for (int lf = 0; lf < 3; ++lf) {
          const int f = mesh.triangle_facet(t, lf);
          for (int j = 0; j <= p; ++j, ++k)
            s.elem_dofs_[static_cast<std::size_t>(t) * nloc + k] = f * per_facet + j;
        }
        for (int j = 0; j < per_tri; ++j, ++k)
          s.elem_dofs_[static_cast<std::size_t>(t) * nloc + k] =
              nf * per_facet + t * per_tri + j;
      }

      std::vector<char> constrained(n_global, 0);
      if (constraint == Constraint::ZeroNormalTraceOnNeumann) {
        for (int f = 0; f < nf; ++f)
          if (mesh.facet(f).tag == FacetTag::Neumann)
            for (int j = 0; j <= p; ++j) constrained[f * per_facet + j] = 1;
      }
      detail::renumber_free_dofs(s.elem_dofs_, constrained, n_global, &s.dim_);
      break;
    }

    case Family::CrouzeixRaviart: {
      if (degree != 1)
        throw CapabilityError("Crouzeix-Raviart space: only degree 1 is available");
      if (constraint == Constraint::ZeroNormalTraceOnNeumann)
        throw CapabilityError("Crouzeix-Raviart space: normal-trace constraint not supported");
      s.local_dim_ = 3;
      s.coeffs_.resize(3, 3);
      // psi_k = 1 - 2*lambda_k in monomial coordinates (1, x, y)
      s.coeffs_ << -1, 1, 1,
                    2, -2, 0,
                    2, 0, -2;
      s.dxc_ = detail::derivative_matrices(1).dx * s.coeffs_;
      s.dyc_ = detail::derivative_matrices(1).dy * s.coeffs_;
      s.elem_dofs_.resize(static_cast<std::size_t>(nt) * 3);
      for (int t = 0; t < nt; ++t)
        for (int k = 0; k < 3; ++k)
          s.elem_dofs_[static_cast<std::size_t>(t) * 3 + k] = mesh.triangle_facet(t, k);
      std::vector<char> constrained(nf, 0);
      if (constraint == Constraint::ZeroTraceOnDirichlet) {
        for (int f = 0; f < nf; ++f)
          if (mesh.facet(f).tag == FacetTag::Dirichlet) constrained[f] = 1;
      }
      detail::renumber_free_dofs(s.elem_dofs_, constrained, nf, &s.dim_);
      break;
    }
  }
  return s;
}

// Local coefficients of a global coefficient vector on element t; constrained
// dofs contribute zero.
inline Eigen::VectorXd local_coeffs(const FESpace& s, const Eigen::VectorXd& coef, int t) {
  Eigen::VectorXd c(s.local_dim());
  for (int k = 0; k < s.local_dim(); ++k) {
    const int g = s.dof(t, k);
    c(k) = (g >= 0) ? coef(g) : 0.0;
  }
  return c;
}

struct ScalarFieldEval {
  Eigen::VectorXd value, dx, dy;
};

struct VectorFieldEval {
  Eigen::VectorXd vx, vy, div;
};

inline ScalarFieldEval evaluate_scalar(const FESpace& s, const Eigen::VectorXd& coef,
                                       int t, const Eigen::MatrixXd& pts) {
  const ScalarBasisEval b = eval_scalar_basis(s, t, pts);
  const Eigen::VectorXd c = local_coeffs(s, coef, t);
  return {b.value * c, b.dx * c, b.dy * c};
}

inline VectorFieldEval evaluate_vector(const FESpace& s, const Eigen::VectorXd& coef,
                                       int t, const Eigen::MatrixXd& pts) {
  const VectorBasisEval b = eval_vector_basis(s, t, pts);
  const Eigen::VectorXd c = local_coeffs(s, coef, t);
  return {b.vx * c, b.vy * c, b.div * c};
}

namespace detail {
template <class EvalFn, class RhsFn>
Eigen::VectorXd project_impl(const FESpace& s, EvalFn&& basis_at, RhsFn&& rhs_at,
                             int data_exactness) {
  const Triangulation& mesh = s.mesh();
  const QuadRule rule = triangle_rule(data_exactness);
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s.dim());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
    Eigen::MatrixXd mloc;
    Eigen::VectorXd floc;
    basis_at(t, rule.points, w, rhs_at, &mloc, &floc);
    for (int i = 0; i < s.local_dim(); ++i) {
      const int gi = s.dof(t, i);
      if (gi < 0) continue;
      rhs(gi) += floc(i);
      for (int j = 0; j < s.local_dim(); ++j) {
        const int gj = s.dof(t, j);
        if (gj >= 0) trips.emplace_back(gi, gj, mloc(i, j));
      }
    }
  }
  Eigen::SparseMatrix<double> M(s.dim(), s.dim());
  M.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(M);
  if (llt.info() != Eigen::Success)
    throw NumericalError("l2_project: mass matrix factorization failed");
  return llt.solve(rhs);
}
}  // namespace detail

// L2-orthogonal projection of a scalar function onto the space.
inline Eigen::VectorXd l2_project(const FESpace& s,
                                  const std::function<double(double, double)>& f) {
  if (s.is_vector_valued())
    throw CapabilityError("l2_project: scalar data for a vector-valued space");
  const Triangulation& mesh = s.mesh();
  return detail::project_impl(
      s,
      [&](int t, const Eigen::MatrixXd& pts, const Eigen::VectorXd& w, auto&& fval,
          Eigen::MatrixXd* mloc, Eigen::VectorXd* floc) {
        const ScalarBasisEval b = eval_scalar_basis(s, t, pts);
        Eigen::VectorXd fv(pts.rows());
        const Eigen::Matrix2d J = mesh.jacobian(t);
        const Eigen::Vector2d v0 = mesh.vertex(mesh.triangle(t)[0]);
        for (int q = 0; q < pts.rows(); ++q) {
          const Eigen::Vector2d x = v0 + J * pts.row(q).transpose();
          fv(q) = fval(x.x(), x.y());
        }
        *mloc = b.value.transpose() * w.asDiagonal() * b.value;
        *floc = b.value.transpose() * w.cwiseProduct(fv);
      },
      f, 2 * std::max(s.degree(), 1) + 8);
}

// L2-orthogonal projection of a vector field onto a Raviart-Thomas space.
inline Eigen::VectorXd l2_project(
    const FESpace& s, const std::function<Eigen::Vector2d(double, double)>& f) {
  if (!s.is_vector_valued())
    throw CapabilityError("l2_project: vector data for a scalar-valued space");
  const Triangulation& mesh = s.mesh();
  return detail::project_impl(
      s,
      [&](int t, const Eigen::MatrixXd& pts, const Eigen::VectorXd& w, auto&& fval,
          Eigen::MatrixXd* mloc, Eigen::VectorXd* floc) {
        const VectorBasisEval b = eval_vector_basis(s, t, pts);
        Eigen::VectorXd fx(pts.rows()), fy(pts.rows());
        const Eigen::Matrix2d J = mesh.jacobian(t);
        const Eigen::Vector2d v0 = mesh.vertex(mesh.triangle(t)[0]);
        for (int q = 0; q < pts.rows(); ++q) {
          const Eigen::Vector2d x = v0 + J * pts.row(q).transpose();
          const Eigen::Vector2d v = fval(x.x(), x.y());
          fx(q) = v.x();
          fy(q) = v.y();
        }
        *mloc = b.vx.transpose() * w.asDiagonal() * b.vx +
                b.vy.transpose() * w.asDiagonal() * b.vy;
        *floc = b.vx.transpose() * w.cwiseProduct(fx) +
                b.vy.transpose() * w.cwiseProduct(fy);
      },
      f, 2 * (s.degree() + 1) + 8);
}

}  // namespace minresfem
