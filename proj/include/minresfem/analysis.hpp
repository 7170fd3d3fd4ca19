#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "minresfem/assembly.hpp"
#include "minresfem/errors.hpp"
#include "minresfem/solve.hpp"

namespace minresfem {

// Above this trial dimension the discrete inf-sup constant is computed by a
// Lanczos iteration instead of a dense generalized eigensolver.
inline constexpr int kInfSupDenseLimit = 2000;

struct InfSupReport {
  double gamma_tilde = 0.0;
  int dim_x = 0, dim_y = 0;
  bool dense = true;
  int iterations = 0;      // Lanczos steps (0 on the dense path)
  double eig_residual = 0.0;
};

// Discrete inf-sup constant of the coupling B between the trial space (Gram
// MX) and the test space (Gram A):
//   gamma~ = sqrt(lambda_min(B^T A^{-1} B v = lambda MX v)).
// Dense trial spaces get the full generalized eigenproblem; larger ones a
// Lanczos iteration on the inverted pencil in the MX inner product.
// force_iterative routes small problems through the Lanczos path as well.
inline InfSupReport infsup_gamma(const SpMat& A, const SpMat& B, const SpMat& MX,
                                 bool force_iterative = false) {
  InfSupReport rep;
  rep.dim_y = static_cast<int>(A.rows());
  rep.dim_x = static_cast<int>(B.cols());
  if (B.rows() != A.rows() || MX.rows() != B.cols() || MX.rows() != MX.cols())
    throw ConfigError("infsup_gamma: inconsistent block dimensions");
  if (rep.dim_x == 0 || rep.dim_y == 0)
    throw ConfigError("infsup_gamma: empty trial or test space");

  Eigen::SimplicialLLT<SpMat> allt(A);
  if (allt.info() != Eigen::Success)
    throw NumericalError("infsup_gamma: test Gram is not positive definite");
  Eigen::SimplicialLLT<SpMat> mxllt(MX);
  if (mxllt.info() != Eigen::Success)
    throw NumericalError("infsup_gamma: trial Gram is not positive definite");

  if (rep.dim_x <= kInfSupDenseLimit && !force_iterative) {
    const Eigen::MatrixXd Bd(B);
    const Eigen::MatrixXd W = allt.solve(Bd);
    Eigen::MatrixXd S = Bd.transpose() * W;
    S = 0.5 * (S + S.transpose()).eval();
    const Eigen::MatrixXd MXd(MX);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(S, MXd);
    if (ges.info() != Eigen::Success)
      throw NumericalError("infsup_gamma: dense eigensolver failed");
    const double lmin = ges.eigenvalues()(0);
    rep.gamma_tilde = std::sqrt(std::max(lmin, 0.0));
    const Eigen::VectorXd v = ges.eigenvectors().col(0);
    rep.eig_residual =
        (S * v - lmin * (MXd * v)).norm() / std::max(1.0, (S * v).norm());
    rep.dense = true;
    return rep;
  }

  // Lanczos on L = S^{-1} MX, self-adjoint in the MX inner product; the
  // largest Ritz value approximates 1/lambda_min of the pencil.
  rep.dense = false;
  auto sapply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return B.transpose() * allt.solve(B * v);
  };
  auto sinv = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
    return pcg(
        rep.dim_x, sapply, r,
        [&](const Eigen::VectorXd& z) { return mxllt.solve(z).eval(); }, 1e-10,
        20000);
  };

  const int max_steps = 250;
  std::vector<Eigen::VectorXd> V;
  // fixed-seed start so runs are reproducible; unstructured so it is not
  // accidentally orthogonal to the extreme eigenvector on symmetric meshes
  std::mt19937 rng(20240613u);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd v(rep.dim_x);
  for (int i = 0; i < rep.dim_x; ++i) v[i] = unif(rng);
  v /= std::sqrt(v.dot(MX * v));
  std::vector<double> alphas, betas;
  double theta = 0.0, bound = 0.0;
  for (int j = 0; j < max_steps; ++j) {
    Eigen::VectorXd w = sinv(MX * v);
    const double alpha = w.dot(MX * v);
    w -= alpha * v;
    if (j > 0) w -= betas.back() * V.back();
    V.push_back(v);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : V) w -= (w.dot(MX * u)) * u;
    alphas.push_back(alpha);
    const double beta = std::sqrt(std::max(w.dot(MX * w), 0.0));

    const int k = static_cast<int>(alphas.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      T(i, i) = alphas[static_cast<std::size_t>(i)];
      if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = betas[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    theta = es.eigenvalues()(k - 1);
    bound = beta * std::abs(es.eigenvectors()(k - 1, k - 1));
    rep.iterations = k;
    if (k >= 5 && bound <= 1e-6 * theta) break;
    if (beta <= 1e-13 * std::abs(theta)) break;  // invariant subspace found
    betas.push_back(beta);
    v = w / beta;
  }
  // the Ritz value error is at most the residual bound (and quadratically
  // smaller with a spectral gap); 1e-4 relative is far below the plateau
  // tolerances this constant feeds into
  if (!(bound <= 1e-4 * theta))
    throw NumericalError("infsup_gamma: Lanczos did not converge (residual bound " +
                         std::to_string(bound / theta) + ")");
  if (!(theta > 0))
    throw NumericalError("infsup_gamma: inverted pencil has no positive eigenvalue");
  rep.gamma_tilde = 1.0 / std::sqrt(theta);
  rep.eig_residual = bound / theta;
  return rep;
}

struct ErrorReport {
  Eigen::VectorXd eta;     // per-element indicators
  double total = 0.0;      // sqrt of the summed squared indicators
  double total_from_gram;  // consistency value sqrt(y' A y)
};

// A posteriori error estimator from the Riesz multipliers y = (mu, lambda):
// eta_T^2 = ||mu||^2_{H(div;T)} + ||lambda||^2_{H1(T)}, summing to
// E^2 = y' A y, the dual norm of the residual in the discretized test spaces.
inline ErrorReport error_estimator(const SolveResult& sol, const SystemBlocks& blocks,
                                   const UltraweakSpaces& sp) {
  if (sol.y.size() == 0)
    throw CapabilityError(
        "error_estimator: no Riesz multipliers in this solve; use solve_saddle or "
        "reduce_spd with the exact-inverse preconditioner, which recovers y = "
        "A^{-1}(f - Bx)");
  if (sol.y.size() != blocks.A.rows())
    throw ConfigError("error_estimator: multiplier size mismatch");
  const Triangulation& mesh = sp.dg.mesh();
  const Eigen::VectorXd ymu = sol.y.head(blocks.dim_rt);
  const Eigen::VectorXd ylam = sol.y.tail(blocks.dim_lag);
  const QuadRule rule =
      triangle_rule(2 * std::max(sp.rt.degree() + 1, sp.lag.degree()) + 2);

  ErrorReport rep;
  rep.eta.resize(mesh.num_triangles());
  double total2 = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
    const VectorFieldEval mu = evaluate_vector(sp.rt, ymu, t, rule.points);
    const ScalarFieldEval lam = evaluate_scalar(sp.lag, ylam, t, rule.points);
    const double eta2 = w.dot((mu.vx.array().square() + mu.vy.array().square() +
                               mu.div.array().square() + lam.value.array().square() +
                               lam.dx.array().square() + lam.dy.array().square())
                                  .matrix());
    rep.eta(t) = std::sqrt(std::max(eta2, 0.0));
    total2 += eta2;
  }
  rep.total = std::sqrt(total2);
  rep.total_from_gram = std::sqrt(std::max(sol.y.dot(blocks.A * sol.y), 0.0));
  return rep;
}

struct HelmholtzReport {
  int dim_rt = 0;        // constrained lowest-order Raviart-Thomas space
  int dim_divfree = 0;   // its divergence-free subspace
  int dim_cr = 0;        // constrained Crouzeix-Raviart space
  int dim_grad = 0;      // rank of its broken-gradient image
  int rank_repr = 0;     // rank of the represented div-free fields
  double max_cross = 0;  // largest singular value of Q1' Q2
  bool dims_additive = false;
};

// Verifies the discrete orthogonal decomposition of piecewise-constant vector
// fields into divergence-free Raviart-Thomas fields and broken gradients of
// Crouzeix-Raviart functions: dimensions must add to 2 #T and the two
// subspaces must be L2-orthogonal. All fields involved are elementwise
// constant, so centroid values scaled by sqrt(area) are exact coordinates in
// an orthonormal basis.
inline HelmholtzReport helmholtz_verify(const Triangulation& mesh) {
  const FESpace rt = make_space(mesh, Family::RaviartThomas, 0,
                                Constraint::ZeroNormalTraceOnNeumann);
  const FESpace cr = make_space(mesh, Family::CrouzeixRaviart, 1,
                                Constraint::ZeroTraceOnDirichlet);
  const int nt = mesh.num_triangles();
  const int nrt = rt.dim();
  const int ncr = cr.dim();

  Eigen::MatrixXd centroid(1, 2);
  centroid << 1.0 / 3.0, 1.0 / 3.0;

  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(nt, nrt);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(2 * nt, nrt);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2 * nt, ncr);
  for (int t = 0; t < nt; ++t) {
    const double s = std::sqrt(mesh.area(t));
    const VectorBasisEval bz = eval_vector_basis(rt, t, centroid);
    for (int k = 0; k < rt.local_dim(); ++k) {
      const int g = rt.dof(t, k);
      if (g < 0) continue;
      D(t, g) += bz.div(0, k) * s;
      R(2 * t, g) += bz.vx(0, k) * s;
      R(2 * t + 1, g) += bz.vy(0, k) * s;
    }
    const ScalarBasisEval bc = eval_scalar_basis(cr, t, centroid);
    for (int k = 0; k < cr.local_dim(); ++k) {
      const int g = cr.dof(t, k);
      if (g < 0) continue;
      G(2 * t, g) += bc.dx(0, k) * s;
      G(2 * t + 1, g) += bc.dy(0, k) * s;
    }
  }

  HelmholtzReport rep;
  rep.dim_rt = nrt;
  rep.dim_cr = ncr;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeFullV);
  const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  int rank_d = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-10 * smax) ++rank_d;
  rep.dim_divfree = nrt - rank_d;

  const Eigen::MatrixXd N = R * svd.matrixV().rightCols(rep.dim_divfree);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrn(N);
  qrn.setThreshold(1e-10);
  rep.rank_repr = static_cast<int>(qrn.rank());
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrg(G);
  qrg.setThreshold(1e-10);
  rep.dim_grad = static_cast<int>(qrg.rank());
  rep.dims_additive =
      (rep.dim_divfree + rep.dim_grad == 2 * nt) && (rep.rank_repr == rep.dim_divfree);

  if (rep.dim_divfree > 0 && rep.dim_grad > 0) {
    const Eigen::MatrixXd q1 =
        qrn.householderQ() * Eigen::MatrixXd::Identity(2 * nt, rep.rank_repr);
    const Eigen::MatrixXd q2 =
        qrg.householderQ() * Eigen::MatrixXd::Identity(2 * nt, rep.dim_grad);
    rep.max_cross =
        Eigen::JacobiSVD<Eigen::MatrixXd>(q1.transpose() * q2).singularValues()(0);
  }
  return rep;
}

// X-norm (componentwise L2) distance between two discrete solutions of the
// ultra-weak problem on the same mesh.
inline double error_vs_reference(const Eigen::VectorXd& x, const UltraweakSpaces& sp,
                                 const Eigen::VectorXd& x_ref,
                                 const UltraweakSpaces& sp_ref) {
  if (&sp.dg.mesh() != &sp_ref.dg.mesh())
    throw ConfigError("error_vs_reference: solutions live on different meshes");
  const Triangulation& mesh = sp.dg.mesh();
  const int nd = sp.dg.dim();
  const int ndr = sp_ref.dg.dim();
  if (x.size() != 3 * nd || x_ref.size() != 3 * ndr)
    throw ConfigError("error_vs_reference: coefficient size mismatch");
  const QuadRule rule = triangle_rule(2 * sp_ref.dg.degree() + 2);
  double err2 = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
    const ScalarBasisEval b = eval_scalar_basis(sp.dg, t, rule.points);
    const ScalarBasisEval br = eval_scalar_basis(sp_ref.dg, t, rule.points);
    for (int c = 0; c < 3; ++c) {
      const Eigen::VectorXd vals =
          b.value * local_coeffs(sp.dg, x.segment(c * nd, nd), t) -
          br.value * local_coeffs(sp_ref.dg, x_ref.segment(c * ndr, ndr), t);
      err2 += w.dot(vals.cwiseAbs2());
    }
  }
  return std::sqrt(err2);
}

// X-norm distance between a discrete solution and exact fields (flux, then
// scalar), by quadrature generous enough for smooth data.
inline double x_error_vs_fields(const Eigen::VectorXd& x, const UltraweakSpaces& sp,
                                const std::function<Eigen::Vector2d(double, double)>& flux,
                                const std::function<double(double, double)>& u) {
  const Triangulation& mesh = sp.dg.mesh();
  const int nd = sp.dg.dim();
  if (x.size() != 3 * nd)
    throw ConfigError("x_error_vs_fields: coefficient size mismatch");
  const QuadRule rule = triangle_rule(std::max(2 * sp.dg.degree() + 2, 24));
  double err2 = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
    const ScalarBasisEval b = eval_scalar_basis(sp.dg, t, rule.points);
    const Eigen::VectorXd px = b.value * local_coeffs(sp.dg, x.head(nd), t);
    const Eigen::VectorXd py = b.value * local_coeffs(sp.dg, x.segment(nd, nd), t);
    const Eigen::VectorXd uu = b.value * local_coeffs(sp.dg, x.tail(nd), t);
    const Eigen::Matrix2d J = mesh.jacobian(t);
    const Eigen::Vector2d v0 = mesh.vertex(mesh.triangle(t)[0]);
    for (int q = 0; q < rule.points.rows(); ++q) {
      const Eigen::Vector2d xp = v0 + J * rule.points.row(q).transpose();
      const Eigen::Vector2d fq = flux(xp.x(), xp.y());
      const double uq = u(xp.x(), xp.y());
      err2 += w(q) * ((px(q) - fq.x()) * (px(q) - fq.x()) +
                      (py(q) - fq.y()) * (py(q) - fq.y()) + (uu(q) - uq) * (uu(q) - uq));
    }
  }
  return std::sqrt(err2);
}

// Experimental orders of convergence between consecutive (size, error) pairs,
// measured against the number of degrees of freedom.
inline std::vector<double> eoc(const std::vector<std::pair<double, double>>& runs) {
  if (runs.size() < 2) throw ConfigError("eoc: need at least two data points");
  std::vector<double> rates;
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    const auto [n0, e0] = runs[i];
    const auto [n1, e1] = runs[i + 1];
    if (!(n0 > 0) || !(n1 > n0) || !(e0 > 0) || !(e1 > 0))
      throw ConfigError("eoc: sizes must increase and errors must be positive");
    rates.push_back(std::log(e0 / e1) / std::log(n1 / n0));
  }
  return rates;
}

}  // namespace minresfem
