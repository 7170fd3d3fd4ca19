#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <cmath>
#include <cstdio>
#include <string>

#include "minresfem/assembly.hpp"
#include "minresfem/errors.hpp"

namespace minresfem {

// Total saddle dimension up to which the indefinite block system is handled
// by a direct sparse LU; larger systems go through the Schur complement.
inline constexpr int kSaddleDirectLimit = 120000;

// Preconditioner K approximating the inverse of the test-space Gram A in the
// symmetric positive definite reduction B^T K B x = B^T K f.
struct PreconditionerSpec {
  enum class Kind { ExactInverse, Jacobi };
  Kind kind = Kind::ExactInverse;
};

struct SolveResult {
  enum class Method { SaddleDirect, SaddleSchur, SPDReduced };
  Eigen::VectorXd x;  // trial coefficients
  Eigen::VectorXd y;  // Riesz multipliers; empty when not recoverable
  Method method = Method::SaddleDirect;
  int iterations = 0;
  double residual = 0.0;  // final true relative residual of the solved system
  // Estimated extreme eigenvalues of K*A (exactly 1 for the exact inverse),
  // bounding the conditioning of the preconditioned reduction.
  double lambda_min_ka = 1.0, lambda_max_ka = 1.0;
};

// Preconditioned conjugate gradients for an SPD operator given as a callable.
// Returns the iterate once the preconditioned residual norm has dropped by
// rel_tol; throws on breakdown or when max_iter is exhausted.
template <class Op, class Prec>
Eigen::VectorXd pcg(Eigen::Index n, Op&& apply, const Eigen::VectorXd& rhs,
                    Prec&& prec, double rel_tol, int max_iter,
                    int* iters_out = nullptr, double* relres_out = nullptr) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (iters_out) *iters_out = 0;
  if (relres_out) *relres_out = 0.0;
  if (rhs.size() != n) throw ConfigError("pcg: right-hand side has wrong size");
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd z = prec(r);
  double rz = r.dot(z);
  const double rz0 = rz;
  if (!(rz0 >= 0)) throw NumericalError("pcg: preconditioner is not positive definite");
  if (rz0 == 0.0) return x;
  Eigen::VectorXd p = z;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd ap = apply(p);
    const double pap = p.dot(ap);
    if (!(pap > 0))
      throw NumericalError("pcg: operator is not positive definite (p'Ap = " +
                           std::to_string(pap) + ")");
    const double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    z = prec(r);
    const double rz_next = r.dot(z);
    if (iters_out) *iters_out = it;
    const double rel = std::sqrt(std::max(rz_next, 0.0) / rz0);
    if (relres_out) *relres_out = rel;
    if (rel <= rel_tol) return x;
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw NumericalError("pcg: no convergence within " + std::to_string(max_iter) +
                       " iterations");
}

// Direct sparse solve: Cholesky when the matrix admits it, LU otherwise. The
// residual is checked; an unresolvable system raises a numerical error naming
// the failure.
inline Eigen::VectorXd sparse_solve(const SpMat& M, const Eigen::VectorXd& rhs) {
  if (M.rows() != M.cols() || M.rows() != rhs.size())
    throw ConfigError("sparse_solve: dimension mismatch");
  const double mmax = M.nonZeros() > 0 ? M.coeffs().abs().maxCoeff() : 0.0;
  const auto residual_ok = [&](const Eigen::VectorXd& x) {
    const double scale = std::max(rhs.norm() + mmax * x.norm(), 1e-300);
    return (M * x - rhs).norm() <= 1e-8 * scale;
  };
  // The Cholesky attempt reads only the lower triangle and so can "succeed"
  // on an unsymmetric matrix; the residual decides whether its answer stands.
  Eigen::SimplicialLLT<SpMat> llt(M);
  if (llt.info() == Eigen::Success) {
    const Eigen::VectorXd x = llt.solve(rhs);
    if (residual_ok(x)) return x;
  }
  Eigen::SparseLU<SpMat> lu(M);
  if (lu.info() != Eigen::Success)
    throw NumericalError("sparse_solve: factorization failed (singular matrix?)");
  const Eigen::VectorXd x = lu.solve(rhs);
  if (!residual_ok(x)) throw NumericalError("sparse_solve: residual check failed");
  return x;
}

namespace detail {

// Extreme Ritz values of the symmetrically preconditioned matrix
// D^{-1/2} A D^{-1/2} via plain Lanczos, used to report spectral bounds for
// the Jacobi-preconditioned reduction.
inline void jacobi_spectral_bounds(const SpMat& A, double* lmin, double* lmax) {
  const Eigen::Index n = A.rows();
  const Eigen::VectorXd dinv_sqrt =
      A.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  auto op = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return dinv_sqrt.asDiagonal() * (A * (dinv_sqrt.asDiagonal() * v));
  };
  const int m = static_cast<int>(std::min<Eigen::Index>(n, 60));
  std::vector<Eigen::VectorXd> V;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
  Eigen::VectorXd alpha(m), beta(m);
  int k = 0;
  for (; k < m; ++k) {
    Eigen::VectorXd w = op(v);
    alpha(k) = v.dot(w);
    w -= alpha(k) * v;
    if (k > 0) w -= beta(k - 1) * V[static_cast<std::size_t>(k - 1)];
    for (const auto& u : V) w -= u.dot(w) * u;  // full reorthogonalization
    w -= v.dot(w) * v;
    V.push_back(v);
    beta(k) = w.norm();
    if (beta(k) < 1e-13) {
      ++k;
      break;
    }
    v = w / beta(k);
  }
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    T(i, i) = alpha(i);
    if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta(i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  *lmin = es.eigenvalues().minCoeff();
  *lmax = es.eigenvalues().maxCoeff();
}

}  // namespace detail

// Solves the saddle-point system [[A, B], [B^T, 0]] [y; x] = [f; 0] coupling
// the Riesz multipliers y with the trial solution x. Small systems use a
// direct LU of the assembled block matrix; larger ones eliminate y through
// the Schur complement with conjugate gradients preconditioned by MX.
inline SolveResult solve_saddle(const SystemBlocks& blocks) {
  const Eigen::Index ny = blocks.A.rows();
  const Eigen::Index nx = blocks.B.cols();
  if (blocks.B.rows() != ny || blocks.MX.rows() != nx || blocks.f.size() != ny)
    throw ConfigError("solve_saddle: inconsistent block dimensions");

  SolveResult res;
  const double fnorm = blocks.f.norm();
  if (fnorm == 0.0) {
    res.x = Eigen::VectorXd::Zero(nx);
    res.y = Eigen::VectorXd::Zero(ny);
    return res;
  }

  if (ny + nx <= kSaddleDirectLimit) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(blocks.A.nonZeros()) +
                  2 * static_cast<std::size_t>(blocks.B.nonZeros()));
    for (int k = 0; k < blocks.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(blocks.A, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
    for (int k = 0; k < blocks.B.outerSize(); ++k)
      for (SpMat::InnerIterator it(blocks.B, k); it; ++it) {
        trips.emplace_back(static_cast<int>(it.row()),
                           static_cast<int>(ny + it.col()), it.value());
        trips.emplace_back(static_cast<int>(ny + it.col()),
                           static_cast<int>(it.row()), it.value());
      }
    SpMat S(ny + nx, ny + nx);
    S.setFromTriplets(trips.begin(), trips.end());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ny + nx);
    rhs.head(ny) = blocks.f;

    // symmetric equilibration keeps the factorization accurate when local
    // refinement spreads the Gram entries over many dyadic scales
    Eigen::VectorXd rowmax = Eigen::VectorXd::Zero(ny + nx);
    for (int k = 0; k < S.outerSize(); ++k)
      for (SpMat::InnerIterator it(S, k); it; ++it)
        rowmax[it.row()] = std::max(rowmax[it.row()], std::abs(it.value()));
    Eigen::VectorXd d(ny + nx);
    for (Eigen::Index i = 0; i < d.size(); ++i)
      d[i] = rowmax[i] > 0.0 ? 1.0 / std::sqrt(rowmax[i]) : 1.0;
    const SpMat Ss = d.asDiagonal() * S * d.asDiagonal();
    const Eigen::VectorXd rhss = d.cwiseProduct(rhs);

    Eigen::SparseLU<SpMat> lu(Ss);
    if (lu.info() != Eigen::Success)
      throw NumericalError("solve_saddle: LU factorization failed");
    Eigen::VectorXd z = lu.solve(rhss);
    for (int round = 0; round < 3; ++round) {
      const Eigen::VectorXd r = rhss - Ss * z;
      if (r.norm() <= 1e-14 * (rhss.norm() + z.norm())) break;
      z += lu.solve(r);
    }
    const Eigen::VectorXd sol = d.cwiseProduct(z);
    res.y = sol.head(ny);
    res.x = sol.tail(nx);
    res.method = SolveResult::Method::SaddleDirect;
  } else {
    Eigen::SimplicialLLT<SpMat> allt(blocks.A);
    if (allt.info() != Eigen::Success)
      throw NumericalError("solve_saddle: test Gram factorization failed");
    Eigen::SimplicialLLT<SpMat> mxllt(blocks.MX);
    if (mxllt.info() != Eigen::Success)
      throw NumericalError("solve_saddle: trial Gram factorization failed");
    auto schur = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return blocks.B.transpose() * allt.solve(blocks.B * v);
    };
    auto prec = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
      return mxllt.solve(r);
    };
    const Eigen::VectorXd rhs = blocks.B.transpose() * allt.solve(blocks.f);
    int iters = 0;
    double rel = 0;
    res.x = pcg(nx, schur, rhs, prec, 1e-12, static_cast<int>(10 * nx + 100), &iters,
                &rel);
    res.y = allt.solve(blocks.f - blocks.B * res.x);
    res.method = SolveResult::Method::SaddleSchur;
    res.iterations = iters;
  }

  const double r1 = (blocks.A * res.y + blocks.B * res.x - blocks.f).norm();
  const double r2 = (blocks.B.transpose() * res.y).norm();
  const double scale = fnorm + blocks.A.norm() * res.y.norm() +
                       blocks.B.norm() * (res.x.norm() + res.y.norm());
  res.residual = std::max(r1, r2) / scale;
  if (!(res.residual <= 1e-9)) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "solve_saddle: block residual %.3e exceeds tolerance",
                  res.residual);
    throw NumericalError(msg);
  }
  return res;
}

// Symmetric positive definite reduction B^T K B x = B^T K f. With the exact
// inverse K = A^{-1} this reproduces the saddle-point solution and recovers
// the multipliers y = K(f - Bx); the Jacobi variant trades that for cheap
// applications and reports spectral bounds of K*A instead.
inline SolveResult reduce_spd(const SystemBlocks& blocks, const PreconditionerSpec& spec,
                              double rel_tol = 1e-12) {
  const Eigen::Index ny = blocks.A.rows();
  const Eigen::Index nx = blocks.B.cols();
  if (blocks.B.rows() != ny || blocks.MX.rows() != nx || blocks.f.size() != ny)
    throw ConfigError("reduce_spd: inconsistent block dimensions");

  SolveResult res;
  res.method = SolveResult::Method::SPDReduced;

  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> kapply;
  Eigen::SimplicialLLT<SpMat> allt;
  Eigen::VectorXd dinv;
  if (spec.kind == PreconditionerSpec::Kind::ExactInverse) {
    allt.compute(blocks.A);
    if (allt.info() != Eigen::Success)
      throw NumericalError("reduce_spd: test Gram factorization failed");
    kapply = [&allt](const Eigen::VectorXd& v) { return allt.solve(v).eval(); };
  } else {
    const Eigen::VectorXd d = blocks.A.diagonal();
    if ((d.array() <= 0).any())
      throw NumericalError("reduce_spd: Jacobi preconditioner needs a positive diagonal");
    dinv = d.cwiseInverse();
    kapply = [&dinv](const Eigen::VectorXd& v) {
      return (dinv.asDiagonal() * v).eval();
    };
    detail::jacobi_spectral_bounds(blocks.A, &res.lambda_min_ka, &res.lambda_max_ka);
  }

  const Eigen::VectorXd rhs = blocks.B.transpose() * kapply(blocks.f);
  if (rhs.norm() == 0.0) {
    res.x = Eigen::VectorXd::Zero(nx);
    if (spec.kind == PreconditionerSpec::Kind::ExactInverse)
      res.y = kapply(blocks.f);
    return res;
  }

  Eigen::SimplicialLLT<SpMat> mxllt(blocks.MX);
  if (mxllt.info() != Eigen::Success)
    throw NumericalError("reduce_spd: trial Gram factorization failed");
  auto op = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return blocks.B.transpose() * kapply(blocks.B * v);
  };
  auto prec = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
    return mxllt.solve(r);
  };
  int iters = 0;
  double rel = 0;
  res.x = pcg(nx, op, rhs, prec, rel_tol, static_cast<int>(10 * nx + 100), &iters, &rel);
  res.iterations = iters;
  res.residual = (blocks.B.transpose() * kapply(blocks.B * res.x - blocks.f)).norm() /
                 rhs.norm();
  if (!(res.residual <= std::max(100.0 * rel_tol, 1e-8))) {
    char msg[96];
    std::snprintf(msg, sizeof msg,
                  "reduce_spd: normal-equation residual %.3e exceeds tolerance",
                  res.residual);
    throw NumericalError(msg);
  }
  if (spec.kind == PreconditionerSpec::Kind::ExactInverse)
    res.y = kapply(blocks.f - blocks.B * res.x);
  return res;
}

}  // namespace minresfem
