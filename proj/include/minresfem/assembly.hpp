#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdio>
#include <functional>
#include <ostream>
#include <vector>

#include "minresfem/errors.hpp"
#include "minresfem/fespace.hpp"
#include "minresfem/parallel.hpp"

namespace minresfem {

using SpMat = Eigen::SparseMatrix<double>;

// Extra quadrature exactness granted to non-polynomial data terms; their
// entries converge under further refinement of the rule.
inline constexpr int kDataExactnessBoost = 6;

namespace detail {

// Element-loop assembly with chunked parallelism. The kernel appends local
// triplets for one element; chunk results are concatenated in chunk order, so
// the final triplet list (and all duplicate summation) is independent of the
// thread count.
template <class Kernel>
SpMat assemble_matrix(int rows, int cols, int nt, Kernel&& kernel) {
  const int nchunks = std::min(max_threads(), std::max(1, nt));
  std::vector<std::vector<Eigen::Triplet<double>>> parts(
      static_cast<std::size_t>(nchunks));
  parallel_chunks(nt, [&](int b, int e, int c) {
    auto& out = parts[static_cast<std::size_t>(c)];
    for (int t = b; t < e; ++t) kernel(t, out);
  });
  std::vector<Eigen::Triplet<double>> trips;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  trips.reserve(total);
  for (const auto& p : parts) trips.insert(trips.end(), p.begin(), p.end());
  SpMat M(rows, cols);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

inline void scatter(const FESpace& si, const FESpace& sj, int t,
                    const Eigen::MatrixXd& mloc, int row_off, int col_off,
                    std::vector<Eigen::Triplet<double>>& out) {
  for (int i = 0; i < si.local_dim(); ++i) {
    const int gi = si.dof(t, i);
    if (gi < 0) continue;
    for (int j = 0; j < sj.local_dim(); ++j) {
      const int gj = sj.dof(t, j);
      if (gj >= 0) out.emplace_back(row_off + gi, col_off + gj, mloc(i, j));
    }
  }
}

inline Eigen::VectorXd physical_values(const Triangulation& mesh, int t,
                                       const Eigen::MatrixXd& ref_pts,
                                       const std::function<double(double, double)>& f) {
  const Eigen::Matrix2d J = mesh.jacobian(t);
  const Eigen::Vector2d v0 = mesh.vertex(mesh.triangle(t)[0]);
  Eigen::VectorXd vals(ref_pts.rows());
  for (int q = 0; q < ref_pts.rows(); ++q) {
    const Eigen::Vector2d x = v0 + J * ref_pts.row(q).transpose();
    vals(q) = f(x.x(), x.y());
  }
  return vals;
}

}  // namespace detail

// L2 Gram matrix of a scalar or vector-valued space.
inline SpMat gram_l2(const FESpace& s) {
  const Triangulation& mesh = s.mesh();
  const QuadRule rule = triangle_rule(2 * (s.degree() + (s.is_vector_valued() ? 1 : 0)) + 2);
  return detail::assemble_matrix(
      s.dim(), s.dim(), mesh.num_triangles(),
      [&](int t, std::vector<Eigen::Triplet<double>>& out) {
        const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
        Eigen::MatrixXd mloc;
        if (s.is_vector_valued()) {
          const VectorBasisEval b = eval_vector_basis(s, t, rule.points);
          mloc = b.vx.transpose() * w.asDiagonal() * b.vx +
                 b.vy.transpose() * w.asDiagonal() * b.vy;
        } else {
          const ScalarBasisEval b = eval_scalar_basis(s, t, rule.points);
          mloc = b.value.transpose() * w.asDiagonal() * b.value;
        }
        detail::scatter(s, s, t, mloc, 0, 0, out);
      });
}

// H1 Gram matrix (mass plus gradient stiffness). For discontinuous families
// the broken elementwise gradient is used; for DG degree 0 the gradient part
// vanishes and the matrix reduces to the mass matrix.
inline SpMat gram_h1(const FESpace& s) {
  if (s.is_vector_valued())
    throw CapabilityError("gram_h1: space has no scalar gradient");
  const Triangulation& mesh = s.mesh();
  const QuadRule rule = triangle_rule(2 * std::max(s.degree(), 1) + 2);
  return detail::assemble_matrix(
      s.dim(), s.dim(), mesh.num_triangles(),
      [&](int t, std::vector<Eigen::Triplet<double>>& out) {
        const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
        const ScalarBasisEval b = eval_scalar_basis(s, t, rule.points);
        const Eigen::MatrixXd mloc = b.value.transpose() * w.asDiagonal() * b.value +
                                     b.dx.transpose() * w.asDiagonal() * b.dx +
                                     b.dy.transpose() * w.asDiagonal() * b.dy;
        detail::scatter(s, s, t, mloc, 0, 0, out);
      });
}

// H(div) Gram matrix (mass plus divergence stiffness) of a Raviart-Thomas
// space.
inline SpMat gram_hdiv(const FESpace& s) {
  if (!s.is_vector_valued())
    throw CapabilityError("gram_hdiv: needs a Raviart-Thomas space");
  const Triangulation& mesh = s.mesh();
  const QuadRule rule = triangle_rule(2 * (s.degree() + 1) + 2);
  return detail::assemble_matrix(
      s.dim(), s.dim(), mesh.num_triangles(),
      [&](int t, std::vector<Eigen::Triplet<double>>& out) {
        const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
        const VectorBasisEval b = eval_vector_basis(s, t, rule.points);
        const Eigen::MatrixXd mloc = b.vx.transpose() * w.asDiagonal() * b.vx +
                                     b.vy.transpose() * w.asDiagonal() * b.vy +
                                     b.div.transpose() * w.asDiagonal() * b.div;
        detail::scatter(s, s, t, mloc, 0, 0, out);
      });
}

// Coupling matrix of the first-order system in ultra-weak form: for trial
// (q, w) and test (z, v),
//   b((q,w),(z,v)) = sum_K int_K q.z + w div z + q.grad v.
// Trial components use the scalar broken space `dg` three times with block
// column layout [qx | qy | w]; test rows are [z (Raviart-Thomas) | v
// (Lagrange)].
inline SpMat ultraweak_operator(const FESpace& dg, const FESpace& rt,
                                const FESpace& lag) {
  if (&dg.mesh() != &rt.mesh() || &dg.mesh() != &lag.mesh())
    throw ConfigError("ultraweak_operator: spaces live on different meshes");
  if (dg.family() != Family::DG || rt.family() != Family::RaviartThomas ||
      lag.family() != Family::Lagrange)
    throw CapabilityError("ultraweak_operator: expects DG trial, RT x Lagrange test");
  const Triangulation& mesh = dg.mesh();
  const int nd = dg.dim();
  const int rows = rt.dim() + lag.dim();
  const int ex = dg.degree() + std::max(rt.degree() + 1, lag.degree()) + 2;
  const QuadRule rule = triangle_rule(ex);
  return detail::assemble_matrix(
      rows, 3 * nd, mesh.num_triangles(),
      [&](int t, std::vector<Eigen::Triplet<double>>& out) {
        const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
        const ScalarBasisEval bd = eval_scalar_basis(dg, t, rule.points);
        const VectorBasisEval bz = eval_vector_basis(rt, t, rule.points);
        const ScalarBasisEval bv = eval_scalar_basis(lag, t, rule.points);
        const Eigen::MatrixXd WV = w.asDiagonal() * bd.value;
        detail::scatter(rt, dg, t, bz.vx.transpose() * WV, 0, 0, out);
        detail::scatter(rt, dg, t, bz.vy.transpose() * WV, 0, nd, out);
        detail::scatter(rt, dg, t, bz.div.transpose() * WV, 0, 2 * nd, out);
        detail::scatter(lag, dg, t, bv.dx.transpose() * WV, rt.dim(), 0, out);
        detail::scatter(lag, dg, t, bv.dy.transpose() * WV, rt.dim(), nd, out);
      });
}

// Volume load and boundary data of the Poisson model problem. Null callables
// mean identically zero.
struct ProblemData {
  std::function<double(double, double)> g;   // volume load
  std::function<double(double, double)> hD;  // Dirichlet trace datum
  std::function<double(double, double)> hN;  // Neumann flux datum
};

// Right-hand side functional of the ultra-weak formulation:
//   f(z, v) = int_GammaD hD z.n ds + int_Omega g v dx + int_GammaN hN v ds,
// with the outward unit normal n. Rows follow the test layout [z | v].
inline Eigen::VectorXd ultraweak_rhs(const FESpace& rt, const FESpace& lag,
                                     const ProblemData& data) {
  if (&rt.mesh() != &lag.mesh())
    throw ConfigError("ultraweak_rhs: spaces live on different meshes");
  const Triangulation& mesh = rt.mesh();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(rt.dim() + lag.dim());

  if (data.g) {
    const QuadRule rule = triangle_rule(lag.degree() + kDataExactnessBoost);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
      const ScalarBasisEval bv = eval_scalar_basis(lag, t, rule.points);
      const Eigen::VectorXd gv = detail::physical_values(mesh, t, rule.points, data.g);
      const Eigen::VectorXd floc = bv.value.transpose() * w.cwiseProduct(gv);
      for (int k = 0; k < lag.local_dim(); ++k) {
        const int g = lag.dof(t, k);
        if (g >= 0) f(rt.dim() + g) += floc(k);
      }
    }
  }

  const QuadRule er =
      edge_rule(std::max(rt.degree(), lag.degree()) + 1 + kDataExactnessBoost);
  for (int fi = 0; fi < mesh.num_facets(); ++fi) {
    const Facet& fa = mesh.facet(fi);
    if (fa.tag == FacetTag::Interior) continue;
    const int t = fa.tri0;
    const double len = facet_length(mesh, fi);
    const Eigen::MatrixXd ref = facet_ref_points(mesh, t, fi, er.points.col(0));
    const Eigen::Vector2d a = mesh.vertex(fa.v0);
    const Eigen::Vector2d b = mesh.vertex(fa.v1);
    Eigen::VectorXd dat(er.points.rows());
    const auto& fn = (fa.tag == FacetTag::Dirichlet) ? data.hD : data.hN;
    if (!fn) continue;
    for (int q = 0; q < er.points.rows(); ++q) {
      const Eigen::Vector2d x = a + er.points(q, 0) * (b - a);
      dat(q) = fn(x.x(), x.y());
    }
    const Eigen::VectorXd w = er.weights * len;
    if (fa.tag == FacetTag::Dirichlet) {
      const VectorBasisEval bz = eval_vector_basis(rt, t, ref);
      const Eigen::Vector2d n = facet_normal(mesh, fi);  // outward on the boundary
      const Eigen::VectorXd floc =
          (n.x() * bz.vx + n.y() * bz.vy).transpose() * w.cwiseProduct(dat);
      for (int k = 0; k < rt.local_dim(); ++k) {
        const int g = rt.dof(t, k);
        if (g >= 0) f(g) += floc(k);
      }
    } else {
      const ScalarBasisEval bv = eval_scalar_basis(lag, t, ref);
      const Eigen::VectorXd floc = bv.value.transpose() * w.cwiseProduct(dat);
      for (int k = 0; k < lag.local_dim(); ++k) {
        const int g = lag.dof(t, k);
        if (g >= 0) f(rt.dim() + g) += floc(k);
      }
    }
  }
  return f;
}

// First-order system least-squares discretization of the mild formulation
// with conforming trial spaces and homogeneous essential boundary conditions:
// minimize ||q - grad w||^2 + ||div q + g||^2 over RT x Lagrange. Returns the
// normal-equation matrix and load vector in block layout [q | w].
struct MildSystem {
  SpMat matrix;
  Eigen::VectorXd rhs;
};

inline MildSystem mild_fosls_system(const FESpace& rt, const FESpace& lag,
                                    const std::function<double(double, double)>& g) {
  if (&rt.mesh() != &lag.mesh())
    throw ConfigError("mild_fosls_system: spaces live on different meshes");
  if (rt.family() != Family::RaviartThomas || lag.family() != Family::Lagrange)
    throw CapabilityError("mild_fosls_system: expects RT x Lagrange trial pair");
  const Triangulation& mesh = rt.mesh();
  const int nq = rt.dim();
  const int n = nq + lag.dim();
  const QuadRule rule =
      triangle_rule(2 * std::max(rt.degree() + 1, lag.degree()) + 2);
  const QuadRule load_rule = triangle_rule(rt.degree() + kDataExactnessBoost);

  MildSystem sys;
  sys.rhs = Eigen::VectorXd::Zero(n);
  sys.matrix = detail::assemble_matrix(
      n, n, mesh.num_triangles(), [&](int t, std::vector<Eigen::Triplet<double>>& out) {
        const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
        const VectorBasisEval bq = eval_vector_basis(rt, t, rule.points);
        const ScalarBasisEval bw = eval_scalar_basis(lag, t, rule.points);
        const Eigen::MatrixXd qq = bq.vx.transpose() * w.asDiagonal() * bq.vx +
                                   bq.vy.transpose() * w.asDiagonal() * bq.vy +
                                   bq.div.transpose() * w.asDiagonal() * bq.div;
        const Eigen::MatrixXd qw = -(bq.vx.transpose() * w.asDiagonal() * bw.dx +
                                     bq.vy.transpose() * w.asDiagonal() * bw.dy);
        const Eigen::MatrixXd ww = bw.dx.transpose() * w.asDiagonal() * bw.dx +
                                   bw.dy.transpose() * w.asDiagonal() * bw.dy;
        detail::scatter(rt, rt, t, qq, 0, 0, out);
        detail::scatter(rt, lag, t, qw, 0, nq, out);
        detail::scatter(lag, rt, t, qw.transpose(), nq, 0, out);
        detail::scatter(lag, lag, t, ww, nq, nq, out);
      });

  if (g) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const Eigen::VectorXd w = load_rule.weights * (2.0 * mesh.area(t));
      const VectorBasisEval bq = eval_vector_basis(rt, t, load_rule.points);
      const Eigen::VectorXd gv = detail::physical_values(mesh, t, load_rule.points, g);
      const Eigen::VectorXd floc = -(bq.div.transpose() * w.cwiseProduct(gv));
      for (int k = 0; k < rt.local_dim(); ++k) {
        const int gd = rt.dof(t, k);
        if (gd >= 0) sys.rhs(gd) += floc(k);
      }
    }
  }
  return sys;
}

inline SpMat sparse_block_diag(const std::vector<const SpMat*>& blocks) {
  int rows = 0, cols = 0;
  for (const SpMat* b : blocks) {
    rows += static_cast<int>(b->rows());
    cols += static_cast<int>(b->cols());
  }
  std::vector<Eigen::Triplet<double>> trips;
  int ro = 0, co = 0;
  for (const SpMat* b : blocks) {
    for (int k = 0; k < b->outerSize(); ++k)
      for (SpMat::InnerIterator it(*b, k); it; ++it)
        trips.emplace_back(ro + static_cast<int>(it.row()),
                           co + static_cast<int>(it.col()), it.value());
    ro += static_cast<int>(b->rows());
    co += static_cast<int>(b->cols());
  }
  SpMat M(rows, cols);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

// Trial and test spaces of the ultra-weak discretization: broken polynomials
// of degree p for all three trial components; Raviart-Thomas times continuous
// Lagrange for the test pair, one degree higher when enriched.
struct UltraweakSpaces {
  FESpace dg, rt, lag;
};

inline UltraweakSpaces ultraweak_spaces(const Triangulation& mesh, int p,
                                        bool enriched) {
  const int prt = enriched ? p + 1 : p;
  const int plag = enriched ? p + 3 : p + 2;
  return {make_space(mesh, Family::DG, p),
          make_space(mesh, Family::RaviartThomas, prt,
                     Constraint::ZeroNormalTraceOnNeumann),
          make_space(mesh, Family::Lagrange, plag, Constraint::ZeroTraceOnDirichlet)};
}

// Assembled saddle-point ingredients: test-space Gram A (block diagonal over
// the H(div) and H1 components), coupling B, trial-space Gram MX, and load f.
struct SystemBlocks {
  SpMat A, B, MX;
  Eigen::VectorXd f;
  int dim_rt = 0, dim_lag = 0, dim_scalar = 0;
};

inline SystemBlocks ultraweak_system(const UltraweakSpaces& sp, const ProblemData& data) {
  SystemBlocks blocks;
  const SpMat a_rt = gram_hdiv(sp.rt);
  const SpMat a_lag = gram_h1(sp.lag);
  blocks.A = sparse_block_diag({&a_rt, &a_lag});
  blocks.B = ultraweak_operator(sp.dg, sp.rt, sp.lag);
  const SpMat mx = gram_l2(sp.dg);
  blocks.MX = sparse_block_diag({&mx, &mx, &mx});
  blocks.f = ultraweak_rhs(sp.rt, sp.lag, data);
  blocks.dim_rt = sp.rt.dim();
  blocks.dim_lag = sp.lag.dim();
  blocks.dim_scalar = sp.dg.dim();
  return blocks;
}

// MatrixMarket coordinate export (1-based indices, one entry per stored
// nonzero, column-major order).
inline void write_matrix_market(const SpMat& M, std::ostream& os) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << M.rows() << " " << M.cols() << " " << M.nonZeros() << "\n";
  char buf[96];
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n",
                    static_cast<long>(it.row()) + 1, static_cast<long>(it.col()) + 1,
                    it.value());
      os << buf;
    }
  }
}

}  // namespace minresfem
