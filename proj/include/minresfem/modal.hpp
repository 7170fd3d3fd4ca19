#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <mutex>
#include <vector>

#include "minresfem/errors.hpp"

namespace minresfem {

inline constexpr int kMaxPolyDegree = 10;

inline int poly_space_dim(int p) { return (p + 1) * (p + 2) / 2; }

// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
inline double reference_monomial_integral(int a, int b) {
  // a! b! / (a+b+2)! = prod_{k=1..b} k/(a+k) / ((a+b+1)(a+b+2))
  double val = 1.0;
  for (int k = 1; k <= b; ++k) val *= static_cast<double>(k) / (a + k);
  val /= static_cast<double>(a + b + 1) * (a + b + 2);
  return val;
}

// Exponent pairs of the bivariate monomials up to total degree p, ordered by
// degree and, within a degree, by descending x power:
// (0,0),(1,0),(0,1),(2,0),(1,1),(0,2),...
inline const std::vector<std::array<int, 2>>& monomial_exponents(int p) {
  if (p < 0 || p > kMaxPolyDegree)
    throw CapabilityError("monomial_exponents: degree out of supported range");
  static std::map<int, std::vector<std::array<int, 2>>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(p);
  if (it != cache.end()) return it->second;
  std::vector<std::array<int, 2>> exps;
  exps.reserve(poly_space_dim(p));
  for (int d = 0; d <= p; ++d)
    for (int a = d; a >= 0; --a) exps.push_back({a, d - a});
  return cache.emplace(p, std::move(exps)).first->second;
}

// Values of all monomials up to degree p at reference points (n x 2).
inline Eigen::MatrixXd monomial_values(int p, const Eigen::MatrixXd& pts) {
  const auto& exps = monomial_exponents(p);
  const int n = static_cast<int>(pts.rows());
  Eigen::MatrixXd powx(n, p + 1), powy(n, p + 1);
  powx.col(0).setOnes();
  powy.col(0).setOnes();
  for (int k = 1; k <= p; ++k) {
    powx.col(k) = powx.col(k - 1).cwiseProduct(pts.col(0));
    powy.col(k) = powy.col(k - 1).cwiseProduct(pts.col(1));
  }
  Eigen::MatrixXd V(n, exps.size());
  for (std::size_t j = 0; j < exps.size(); ++j)
    V.col(j) = powx.col(exps[j][0]).cwiseProduct(powy.col(exps[j][1]));
  return V;
}

namespace detail {
struct DerivMatrices {
  Eigen::MatrixXd dx, dy;  // coefficient maps: column j holds d(m_j)/dx, d(m_j)/dy
};

inline const DerivMatrices& derivative_matrices(int p) {
  static std::map<int, DerivMatrices> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(p);
  if (it != cache.end()) return it->second;
  const auto& exps = monomial_exponents(p);
  const int n = static_cast<int>(exps.size());
  std::map<std::array<int, 2>, int> index;
  for (int j = 0; j < n; ++j) index[exps[j]] = j;
  DerivMatrices d;
  d.dx = Eigen::MatrixXd::Zero(n, n);
  d.dy = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const int a = exps[j][0], b = exps[j][1];
    if (a > 0) d.dx(index.at({a - 1, b}), j) = a;
    if (b > 0) d.dy(index.at({a, b - 1}), j) = b;
  }
  return cache.emplace(p, std::move(d)).first->second;
}
}  // namespace detail

// d/dx and d/dy of the monomials, as n x dim matrices.
inline Eigen::MatrixXd monomial_dx(int p, const Eigen::MatrixXd& pts) {
  return monomial_values(p, pts) * detail::derivative_matrices(p).dx;
}

inline Eigen::MatrixXd monomial_dy(int p, const Eigen::MatrixXd& pts) {
  return monomial_values(p, pts) * detail::derivative_matrices(p).dy;
}

// Exact Gram matrix of the monomials in L2 of the reference triangle.
inline Eigen::MatrixXd monomial_gram(int p) {
  const auto& exps = monomial_exponents(p);
  const int n = static_cast<int>(exps.size());
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      G(i, j) = reference_monomial_integral(exps[i][0] + exps[j][0],
                                            exps[i][1] + exps[j][1]);
  return G;
}

namespace detail {
struct ModalData {
  Eigen::MatrixXd coeffs;   // monomial coefficients, column per basis function
  Eigen::VectorXd norms2;   // L2(ref) norms squared of the basis functions
};

// Monic L2(ref)-orthogonal family: psi_0 = 1 and psi_j = m_j + lower-order
// terms. Two Gram-Schmidt sweeps against the exact monomial Gram keep the
// family orthogonal to machine precision at the degrees supported here.
inline const ModalData& modal_data(int p) {
  if (p < 0 || p > kMaxPolyDegree)
    throw CapabilityError("modal basis: degree out of supported range");
  static std::map<int, ModalData> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(p);
  if (it != cache.end()) return it->second;

  const int n = poly_space_dim(p);
  const Eigen::MatrixXd G = monomial_gram(p);
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
  // the monomial Gram is badly conditioned at the top degrees; a third
  // orthogonalization sweep keeps the cross terms near machine precision
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < j; ++i) {
        const double denom = C.col(i).dot(G * C.col(i));
        const double r = C.col(j).dot(G * C.col(i)) / denom;
        C.col(j) -= r * C.col(i);
      }
    }
  }
  ModalData data;
  data.coeffs = C;
  data.norms2.resize(n);
  for (int j = 0; j < n; ++j) data.norms2(j) = C.col(j).dot(G * C.col(j));
  return cache.emplace(p, std::move(data)).first->second;
}
}  // namespace detail

inline const Eigen::MatrixXd& modal_coefficients(int p) {
  return detail::modal_data(p).coeffs;
}

inline const Eigen::VectorXd& modal_norms2(int p) {
  return detail::modal_data(p).norms2;
}

// Inverse by LU with two Newton refinement steps, for the moderately
// conditioned Vandermonde and dof matrices used in element construction.
inline Eigen::MatrixXd refined_inverse(const Eigen::MatrixXd& M) {
  const int n = static_cast<int>(M.rows());
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  Eigen::MatrixXd X = lu.inverse();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (int k = 0; k < 2; ++k) X = X + X * (I - M * X);
  const double resid = (M * X - I).cwiseAbs().maxCoeff();
  if (!(resid < 1e-7))
    throw NumericalError("refined_inverse: matrix is numerically singular");
  return X;
}

// Values of the shifted Legendre polynomials P_k(2t-1), k = 0..k_max, at
// parameters t in [0,1]; result is n x (k_max+1).
inline Eigen::MatrixXd shifted_legendre(int k_max, const Eigen::VectorXd& t) {
  const int n = static_cast<int>(t.size());
  Eigen::MatrixXd P(n, k_max + 1);
  P.col(0).setOnes();
  if (k_max == 0) return P;
  const Eigen::VectorXd x = 2.0 * t.array() - 1.0;
  P.col(1) = x;
  for (int k = 1; k < k_max; ++k)
    P.col(k + 1) =
        ((2 * k + 1) * x.cwiseProduct(P.col(k)) - k * P.col(k - 1)) / (k + 1);
  return P;
}

}  // namespace minresfem
