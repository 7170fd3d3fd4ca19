#pragma once

#include <Eigen/Dense>
#include <map>
#include <mutex>

#include "minresfem/errors.hpp"

namespace minresfem {

inline constexpr int kMaxQuadratureDegree = 50;

// Quadrature rule on the reference triangle (points n x 2, weights summing to
// 1/2) or on the reference edge [0,1] (points n x 1, weights summing to 1).
// exactness is the polynomial degree integrated exactly, at least the degree
// the rule was requested for.
struct QuadRule {
  Eigen::MatrixXd points;
  Eigen::VectorXd weights;
  int exactness = 0;
};

// Gauss-Legendre nodes and weights on [0,1] via the Golub-Welsch eigenvalue
// problem for the Jacobi matrix.
inline QuadRule gauss_legendre_01(int npts) {
  if (npts < 1) throw ConfigError("gauss_legendre_01: need at least one point");
  QuadRule r;
  r.points.resize(npts, 1);
  r.weights.resize(npts);
  r.exactness = 2 * npts - 1;
  if (npts == 1) {
    r.points(0, 0) = 0.5;
    r.weights(0) = 1.0;
    return r;
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(npts, npts);
  for (int k = 1; k < npts; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success)
    throw NumericalError("gauss_legendre_01: eigensolver failed");
  for (int i = 0; i < npts; ++i) {
    r.points(i, 0) = 0.5 * (es.eigenvalues()(i) + 1.0);
    const double v0 = es.eigenvectors()(0, i);
    r.weights(i) = v0 * v0;  // first-component weight, already scaled to [0,1]
  }
  return r;
}

// Rule on the reference triangle exact for polynomials of total degree
// `degree`, built by collapsing a tensor Gauss rule on the unit square through
// the map (u,v) -> (u(1-v), v) with Jacobian (1-v). Degrees 0 and 1 return the
// one-point centroid rule.
inline QuadRule triangle_rule(int degree) {
  if (degree < 0) throw ConfigError("triangle_rule: negative degree");
  if (degree > kMaxQuadratureDegree)
    throw CapabilityError("triangle_rule: degree above supported maximum");

  static std::map<int, QuadRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(degree);
  if (it != cache.end()) return it->second;

  QuadRule r;
  if (degree <= 1) {
    r.points.resize(1, 2);
    r.points << 1.0 / 3.0, 1.0 / 3.0;
    r.weights.resize(1);
    r.weights << 0.5;
    r.exactness = 1;
  } else {
    const int nu = (degree + 2) / 2;  // ceil((degree+1)/2)
    const int nv = (degree + 3) / 2;  // ceil((degree+2)/2); absorbs the Jacobian
    const QuadRule gu = gauss_legendre_01(nu);
    const QuadRule gv = gauss_legendre_01(nv);
    r.points.resize(nu * nv, 2);
    r.weights.resize(nu * nv);
    int q = 0;
    for (int j = 0; j < nv; ++j) {
      const double v = gv.points(j, 0);
      for (int i = 0; i < nu; ++i, ++q) {
        const double u = gu.points(i, 0);
        r.points(q, 0) = u * (1.0 - v);
        r.points(q, 1) = v;
        r.weights(q) = gu.weights(i) * gv.weights(j) * (1.0 - v);
      }
    }
    r.exactness = std::min(2 * nu - 1, 2 * nv - 2);
  }
  cache.emplace(degree, r);
  return r;
}

// Gauss-Legendre rule on [0,1] exact for the given degree.
inline QuadRule edge_rule(int degree) {
  if (degree < 0) throw ConfigError("edge_rule: negative degree");
  if (degree > kMaxQuadratureDegree)
    throw CapabilityError("edge_rule: degree above supported maximum");
  return gauss_legendre_01((degree + 2) / 2);
}

}  // namespace minresfem
