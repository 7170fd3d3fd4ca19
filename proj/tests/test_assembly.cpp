#include <Eigen/Dense>
#include <random>
#include <set>
#include <sstream>

#include "catch2/catch_amalgamated.hpp"
#include "minresfem/minresfem.hpp"

using namespace minresfem;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Conforming but irregular mesh mixing generations, so local Jacobians and
// dof orientations differ across elements.
Triangulation irregular_mesh(const std::set<Side>& neumann) {
  Triangulation mesh = initial_square_mesh(neumann);
  mesh = bisect(mesh, {0, 2});
  mesh = bisect(mesh, {1, 5});
  return uniform_refine(mesh);
}

Eigen::VectorXd random_vector(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = unif(rng);
  return v;
}

double quad_form_direct_scalar(const FESpace& s, const Eigen::VectorXd& coef,
                               bool with_gradient) {
  const Triangulation& mesh = s.mesh();
  const QuadRule rule = triangle_rule(2 * std::max(s.degree(), 1) + 4);
  double total = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
    const ScalarFieldEval fe = evaluate_scalar(s, coef, t, rule.points);
    Eigen::ArrayXd dens = fe.value.array().square();
    if (with_gradient) dens += fe.dx.array().square() + fe.dy.array().square();
    total += w.dot(dens.matrix());
  }
  return total;
}

double quad_form_direct_hdiv(const FESpace& s, const Eigen::VectorXd& coef) {
  const Triangulation& mesh = s.mesh();
  const QuadRule rule = triangle_rule(2 * (s.degree() + 1) + 4);
  double total = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
    const VectorFieldEval fe = evaluate_vector(s, coef, t, rule.points);
    total += w.dot((fe.vx.array().square() + fe.vy.array().square() +
                    fe.div.array().square())
                       .matrix());
  }
  return total;
}

}  // namespace

TEST_CASE("lowest-order broken mass matrix is the diagonal of areas", "[assembly]") {
  Triangulation mesh = initial_square_mesh();
  const FESpace dg = make_space(mesh, Family::DG, 0);
  const SpMat M = gram_l2(dg);
  REQUIRE(M.rows() == 4);
  REQUIRE(M.cols() == 4);
  const Eigen::MatrixXd Md(M);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (i == j)
        REQUIRE_THAT(Md(i, j), WithinAbs(mesh.area(i), 1e-15));
      else
        REQUIRE_THAT(Md(i, j), WithinAbs(0.0, 1e-15));
    }

  const Triangulation fine = uniform_refine(mesh);
  const SpMat Mf = gram_l2(make_space(fine, Family::DG, 0));
  REQUIRE(Mf.rows() == 16);
  REQUIRE_THAT(Eigen::MatrixXd(Mf).diagonal().sum(), WithinAbs(1.0, 1e-14));
}

TEST_CASE("Gram matrices reproduce direct quadrature of the squared fields",
          "[assembly]") {
  const Triangulation mesh = irregular_mesh({Side::Left});
  const FESpace dg = make_space(mesh, Family::DG, 2);
  const FESpace lag =
      make_space(mesh, Family::Lagrange, 3, Constraint::ZeroTraceOnDirichlet);
  const FESpace rt = make_space(mesh, Family::RaviartThomas, 1,
                                Constraint::ZeroNormalTraceOnNeumann);

  const SpMat Ml2 = gram_l2(dg);
  const SpMat Mh1 = gram_h1(lag);
  const SpMat Mhdiv = gram_hdiv(rt);

  for (unsigned seed : {11u, 12u, 13u}) {
    const Eigen::VectorXd cd = random_vector(dg.dim(), seed);
    const Eigen::VectorXd cl = random_vector(lag.dim(), seed + 100);
    const Eigen::VectorXd cr = random_vector(rt.dim(), seed + 200);
    REQUIRE_THAT(cd.dot(Ml2 * cd),
                 WithinRel(quad_form_direct_scalar(dg, cd, false), 1e-12));
    REQUIRE_THAT(cl.dot(Mh1 * cl),
                 WithinRel(quad_form_direct_scalar(lag, cl, true), 1e-12));
    REQUIRE_THAT(cr.dot(Mhdiv * cr), WithinRel(quad_form_direct_hdiv(rt, cr), 1e-12));
  }
}

TEST_CASE("Gram matrices are symmetric positive definite", "[assembly]") {
  const Triangulation mesh = irregular_mesh({Side::Left});
  const FESpace lag =
      make_space(mesh, Family::Lagrange, 2, Constraint::ZeroTraceOnDirichlet);
  const FESpace rt = make_space(mesh, Family::RaviartThomas, 0,
                                Constraint::ZeroNormalTraceOnNeumann);
  for (const SpMat& M : {gram_h1(lag), gram_hdiv(rt), gram_l2(rt)}) {
    const SpMat Mt = SpMat(M.transpose());
    REQUIRE((Eigen::MatrixXd(M) - Eigen::MatrixXd(Mt)).norm() <= 1e-14 * M.norm());
    Eigen::SimplicialLLT<SpMat> llt(M);
    REQUIRE(llt.info() == Eigen::Success);
    REQUIRE(Eigen::MatrixXd(M).diagonal().minCoeff() > 0.0);
  }
}

TEST_CASE("coupling matrix reproduces direct quadrature of the bilinear form",
          "[assembly]") {
  const Triangulation mesh = irregular_mesh({Side::Left});
  const int p = GENERATE(0, 1);
  const bool enriched = GENERATE(false, true);
  const UltraweakSpaces sp = ultraweak_spaces(mesh, p, enriched);
  const SpMat B = ultraweak_operator(sp.dg, sp.rt, sp.lag);
  REQUIRE(B.rows() == sp.rt.dim() + sp.lag.dim());
  REQUIRE(B.cols() == 3 * sp.dg.dim());

  const int nd = sp.dg.dim();
  const QuadRule rule = triangle_rule(20);
  for (unsigned seed : {21u, 22u}) {
    const Eigen::VectorXd x = random_vector(3 * nd, seed);
    const Eigen::VectorXd y = random_vector(static_cast<int>(B.rows()), seed + 50);
    double direct = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
      const ScalarFieldEval qx = evaluate_scalar(sp.dg, x.head(nd), t, rule.points);
      const ScalarFieldEval qy =
          evaluate_scalar(sp.dg, x.segment(nd, nd), t, rule.points);
      const ScalarFieldEval wf = evaluate_scalar(sp.dg, x.tail(nd), t, rule.points);
      const VectorFieldEval z =
          evaluate_vector(sp.rt, y.head(sp.rt.dim()), t, rule.points);
      const ScalarFieldEval v =
          evaluate_scalar(sp.lag, y.tail(sp.lag.dim()), t, rule.points);
      direct += w.dot((qx.value.array() * z.vx.array() +
                       qy.value.array() * z.vy.array() +
                       wf.value.array() * z.div.array() +
                       qx.value.array() * v.dx.array() +
                       qy.value.array() * v.dy.array())
                          .matrix());
    }
    REQUIRE_THAT(y.dot(B * x), WithinRel(direct, 1e-11));
  }
}

TEST_CASE("load vector vanishes for null data", "[assembly]") {
  const Triangulation mesh = irregular_mesh({Side::Left});
  const UltraweakSpaces sp = ultraweak_spaces(mesh, 1, false);
  const Eigen::VectorXd f = ultraweak_rhs(sp.rt, sp.lag, ProblemData{});
  REQUIRE(f.size() == sp.rt.dim() + sp.lag.dim());
  REQUIRE(f.norm() == 0.0);
}

TEST_CASE("unit Dirichlet trace loads exactly the boundary flux moments",
          "[assembly]") {
  // With hD = 1 the z-part of the load is int_GammaD z.n ds. Each lowest-order
  // basis function has unit normal moment on its own facet, oriented outward
  // on the boundary, and zero normal trace on every other facet, so the entry
  // is exactly 1 for each Dirichlet facet and 0 elsewhere.
  const Triangulation mesh = irregular_mesh({Side::Left});
  const FESpace rt = make_space(mesh, Family::RaviartThomas, 0,
                                Constraint::ZeroNormalTraceOnNeumann);
  const FESpace lag =
      make_space(mesh, Family::Lagrange, 2, Constraint::ZeroTraceOnDirichlet);
  ProblemData data;
  data.hD = [](double, double) { return 1.0; };
  const Eigen::VectorXd f = ultraweak_rhs(rt, lag, data);

  std::vector<bool> on_dirichlet(static_cast<std::size_t>(rt.dim()), false);
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int k = 0; k < 3; ++k) {
      const int fi = mesh.triangle_facet(t, k);
      if (mesh.facet(fi).tag != FacetTag::Dirichlet) continue;
      const int g = rt.dof(t, k);
      REQUIRE(g >= 0);
      on_dirichlet[static_cast<std::size_t>(g)] = true;
    }
  int hits = 0;
  for (int g = 0; g < rt.dim(); ++g) {
    if (on_dirichlet[static_cast<std::size_t>(g)]) {
      ++hits;
      REQUIRE_THAT(f(g), WithinAbs(1.0, 1e-13));
    } else {
      REQUIRE_THAT(f(g), WithinAbs(0.0, 1e-13));
    }
  }
  REQUIRE(hits > 0);
  REQUIRE(f.tail(lag.dim()).norm() == 0.0);
}

TEST_CASE("load vector reproduces direct quadrature for polynomial data",
          "[assembly]") {
  const Triangulation mesh = irregular_mesh({Side::Left});
  const int p = GENERATE(0, 1);
  const UltraweakSpaces sp = ultraweak_spaces(mesh, p, p == 1);
  ProblemData data;
  data.g = [](double x, double y) { return x * y; };
  data.hD = [](double x, double y) { return x + 2.0 * y * y; };
  data.hN = [](double, double y) { return y * y * y; };
  const Eigen::VectorXd f = ultraweak_rhs(sp.rt, sp.lag, data);

  const Eigen::VectorXd y = random_vector(static_cast<int>(f.size()), 31u + p);
  const Eigen::VectorXd yrt = y.head(sp.rt.dim());
  const Eigen::VectorXd ylag = y.tail(sp.lag.dim());

  double direct = 0.0;
  const QuadRule vol = triangle_rule(20);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::VectorXd w = vol.weights * (2.0 * mesh.area(t));
    const ScalarFieldEval v = evaluate_scalar(sp.lag, ylag, t, vol.points);
    const Eigen::Matrix2d J = mesh.jacobian(t);
    const Eigen::Vector2d v0 = mesh.vertex(mesh.triangle(t)[0]);
    for (int q = 0; q < vol.points.rows(); ++q) {
      const Eigen::Vector2d xq = v0 + J * vol.points.row(q).transpose();
      direct += w(q) * data.g(xq.x(), xq.y()) * v.value(q);
    }
  }
  const QuadRule er = edge_rule(15);
  for (int fi = 0; fi < mesh.num_facets(); ++fi) {
    const Facet& fa = mesh.facet(fi);
    if (fa.tag == FacetTag::Interior) continue;
    const int t = fa.tri0;
    const double len = facet_length(mesh, fi);
    const Eigen::MatrixXd ref = facet_ref_points(mesh, t, fi, er.points.col(0));
    const Eigen::Vector2d a = mesh.vertex(fa.v0);
    const Eigen::Vector2d b = mesh.vertex(fa.v1);
    if (fa.tag == FacetTag::Dirichlet) {
      const VectorFieldEval z = evaluate_vector(sp.rt, yrt, t, ref);
      const Eigen::Vector2d n = facet_normal(mesh, fi);
      for (int q = 0; q < er.points.rows(); ++q) {
        const Eigen::Vector2d xq = a + er.points(q, 0) * (b - a);
        direct += er.weights(q) * len * data.hD(xq.x(), xq.y()) *
                  (n.x() * z.vx(q) + n.y() * z.vy(q));
      }
    } else {
      const ScalarFieldEval v = evaluate_scalar(sp.lag, ylag, t, ref);
      for (int q = 0; q < er.points.rows(); ++q) {
        const Eigen::Vector2d xq = a + er.points(q, 0) * (b - a);
        direct += er.weights(q) * len * data.hN(xq.x(), xq.y()) * v.value(q);
      }
    }
  }
  REQUIRE_THAT(y.dot(f), WithinRel(direct, 1e-11));
}

TEST_CASE("assembled system blocks match their standalone constituents",
          "[assembly]") {
  const Triangulation mesh = irregular_mesh({Side::Left});
  const UltraweakSpaces sp = ultraweak_spaces(mesh, 0, false);
  ProblemData data;
  data.hD = [](double x, double) { return std::cos(1.5707963267948966 * x); };
  data.hN = [](double, double) { return 1.0; };
  const SystemBlocks blocks = ultraweak_system(sp, data);

  REQUIRE(blocks.dim_rt == sp.rt.dim());
  REQUIRE(blocks.dim_lag == sp.lag.dim());
  REQUIRE(blocks.dim_scalar == sp.dg.dim());
  REQUIRE(blocks.A.rows() == sp.rt.dim() + sp.lag.dim());
  REQUIRE(blocks.MX.rows() == 3 * sp.dg.dim());

  const Eigen::MatrixXd Ad(blocks.A);
  const int nr = sp.rt.dim();
  const int nl = sp.lag.dim();
  REQUIRE((Ad.topLeftCorner(nr, nr) - Eigen::MatrixXd(gram_hdiv(sp.rt))).norm() == 0.0);
  REQUIRE((Ad.bottomRightCorner(nl, nl) - Eigen::MatrixXd(gram_h1(sp.lag))).norm() ==
          0.0);
  REQUIRE(Ad.topRightCorner(nr, nl).norm() == 0.0);
  REQUIRE(Ad.bottomLeftCorner(nl, nr).norm() == 0.0);

  const Eigen::MatrixXd MXd(blocks.MX);
  const Eigen::MatrixXd mscal(gram_l2(sp.dg));
  const int nd = sp.dg.dim();
  for (int c = 0; c < 3; ++c)
    REQUIRE((MXd.block(c * nd, c * nd, nd, nd) - mscal).norm() == 0.0);
  REQUIRE((blocks.f - ultraweak_rhs(sp.rt, sp.lag, data)).norm() == 0.0);
}

TEST_CASE("sparse block diagonal stacks blocks without overlap", "[assembly]") {
  SpMat A(2, 2), Bm(3, 1);
  std::vector<Eigen::Triplet<double>> ta = {{0, 0, 1.0}, {1, 1, 2.0}, {0, 1, -0.5}};
  std::vector<Eigen::Triplet<double>> tb = {{2, 0, 4.0}, {0, 0, 3.0}};
  A.setFromTriplets(ta.begin(), ta.end());
  Bm.setFromTriplets(tb.begin(), tb.end());
  const SpMat D = sparse_block_diag({&A, &Bm});
  REQUIRE(D.rows() == 5);
  REQUIRE(D.cols() == 3);
  const Eigen::MatrixXd Dd(D);
  REQUIRE((Dd.topLeftCorner(2, 2) - Eigen::MatrixXd(A)).norm() == 0.0);
  REQUIRE((Dd.bottomRightCorner(3, 1) - Eigen::MatrixXd(Bm)).norm() == 0.0);
  REQUIRE(Dd.topRightCorner(2, 1).norm() == 0.0);
  REQUIRE(Dd.bottomLeftCorner(3, 2).norm() == 0.0);

  const SpMat empty = sparse_block_diag({});
  REQUIRE(empty.rows() == 0);
  REQUIRE(empty.cols() == 0);
}

TEST_CASE("least-squares system matches direct quadrature of the functional",
          "[assembly]") {
  const Triangulation mesh = irregular_mesh({});
  const FESpace rt = make_space(mesh, Family::RaviartThomas, 1,
                                Constraint::ZeroNormalTraceOnNeumann);
  const FESpace lag =
      make_space(mesh, Family::Lagrange, 2, Constraint::ZeroTraceOnDirichlet);
  const auto g = [](double x, double y) { return x * x - y; };
  const MildSystem sys = mild_fosls_system(rt, lag, g);
  REQUIRE(sys.matrix.rows() == rt.dim() + lag.dim());
  REQUIRE(sys.rhs.size() == sys.matrix.rows());

  Eigen::SimplicialLLT<SpMat> llt(sys.matrix);
  REQUIRE(llt.info() == Eigen::Success);

  const Eigen::VectorXd c = random_vector(static_cast<int>(sys.rhs.size()), 41u);
  const Eigen::VectorXd cq = c.head(rt.dim());
  const Eigen::VectorXd cw = c.tail(lag.dim());
  const QuadRule rule = triangle_rule(20);
  double form = 0.0, load = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
    const VectorFieldEval q = evaluate_vector(rt, cq, t, rule.points);
    const ScalarFieldEval wf = evaluate_scalar(lag, cw, t, rule.points);
    form += w.dot(((q.vx - wf.dx).array().square() + (q.vy - wf.dy).array().square() +
                   q.div.array().square())
                      .matrix());
    const Eigen::Matrix2d J = mesh.jacobian(t);
    const Eigen::Vector2d v0 = mesh.vertex(mesh.triangle(t)[0]);
    for (int qi = 0; qi < rule.points.rows(); ++qi) {
      const Eigen::Vector2d xq = v0 + J * rule.points.row(qi).transpose();
      load -= w(qi) * g(xq.x(), xq.y()) * q.div(qi);
    }
  }
  REQUIRE_THAT(c.dot(sys.matrix * c), WithinRel(form, 1e-11));
  REQUIRE_THAT(c.dot(sys.rhs), WithinRel(load, 1e-11));

  const MildSystem hom = mild_fosls_system(rt, lag, nullptr);
  REQUIRE(hom.rhs.norm() == 0.0);
}

TEST_CASE("least-squares solution converges to the manufactured field",
          "[assembly]") {
  const double pi = 3.14159265358979323846;
  const auto u = [=](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
  const auto g = [=](double x, double y) {
    return 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y);
  };
  const auto err_of = [&](const Triangulation& mesh) {
    const FESpace rt = make_space(mesh, Family::RaviartThomas, 1,
                                  Constraint::ZeroNormalTraceOnNeumann);
    const FESpace lag =
        make_space(mesh, Family::Lagrange, 2, Constraint::ZeroTraceOnDirichlet);
    const MildSystem sys = mild_fosls_system(rt, lag, g);
    const Eigen::VectorXd c = sparse_solve(sys.matrix, sys.rhs);
    const Eigen::VectorXd cw = c.tail(lag.dim());
    const QuadRule rule = triangle_rule(16);
    double err2 = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const Eigen::VectorXd w = rule.weights * (2.0 * mesh.area(t));
      const ScalarFieldEval wf = evaluate_scalar(lag, cw, t, rule.points);
      const Eigen::Matrix2d J = mesh.jacobian(t);
      const Eigen::Vector2d v0 = mesh.vertex(mesh.triangle(t)[0]);
      for (int q = 0; q < rule.points.rows(); ++q) {
        const Eigen::Vector2d xq = v0 + J * rule.points.row(q).transpose();
        const double d = wf.value(q) - u(xq.x(), xq.y());
        err2 += w(q) * d * d;
      }
    }
    return std::sqrt(err2);
  };

  Triangulation coarse = uniform_refine(initial_square_mesh({}));
  Triangulation fine = uniform_refine(coarse);
  const double e0 = err_of(coarse);
  const double e1 = err_of(fine);
  REQUIRE(e1 < 0.3 * e0);
}

TEST_CASE("matrix export uses one-based coordinate format", "[assembly]") {
  SpMat M(2, 3);
  std::vector<Eigen::Triplet<double>> tr = {{0, 0, 1.5}, {1, 2, -0.25}, {1, 0, 3.0}};
  M.setFromTriplets(tr.begin(), tr.end());
  std::ostringstream os;
  write_matrix_market(M, os);
  const std::string expected =
      "%%MatrixMarket matrix coordinate real general\n"
      "2 3 3\n"
      "1 1 1.5\n"
      "2 1 3\n"
      "2 3 -0.25\n";
  REQUIRE(os.str() == expected);
}

TEST_CASE("matrix export round-trips an assembled Gram matrix", "[assembly]") {
  const Triangulation mesh = irregular_mesh({Side::Left});
  const FESpace rt = make_space(mesh, Family::RaviartThomas, 1,
                                Constraint::ZeroNormalTraceOnNeumann);
  const SpMat M = gram_hdiv(rt);
  std::ostringstream os;
  write_matrix_market(M, os);

  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  REQUIRE(header == "%%MatrixMarket matrix coordinate real general");
  long rows = 0, cols = 0, nnz = 0;
  is >> rows >> cols >> nnz;
  REQUIRE(rows == M.rows());
  REQUIRE(cols == M.cols());
  REQUIRE(nnz == M.nonZeros());
  SpMat back(static_cast<int>(rows), static_cast<int>(cols));
  std::vector<Eigen::Triplet<double>> tr;
  for (long k = 0; k < nnz; ++k) {
    long i = 0, j = 0;
    double v = 0.0;
    is >> i >> j >> v;
    tr.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), v);
  }
  back.setFromTriplets(tr.begin(), tr.end());
  REQUIRE((Eigen::MatrixXd(back) - Eigen::MatrixXd(M)).norm() == 0.0);
}

TEST_CASE("assembly is reproducible across thread counts", "[assembly]") {
  const Triangulation mesh = uniform_refine(irregular_mesh({Side::Left}));
  const UltraweakSpaces sp = ultraweak_spaces(mesh, 1, false);
  const int before = max_threads();
  set_max_threads(1);
  const SpMat B1 = ultraweak_operator(sp.dg, sp.rt, sp.lag);
  const SpMat G1 = gram_hdiv(sp.rt);
  set_max_threads(4);
  const SpMat B4 = ultraweak_operator(sp.dg, sp.rt, sp.lag);
  const SpMat G4 = gram_hdiv(sp.rt);
  set_max_threads(before);
  REQUIRE((Eigen::MatrixXd(B1) - Eigen::MatrixXd(B4)).norm() <=
          1e-13 * Eigen::MatrixXd(B1).norm());
  REQUIRE((Eigen::MatrixXd(G1) - Eigen::MatrixXd(G4)).norm() <=
          1e-13 * Eigen::MatrixXd(G1).norm());
}

TEST_CASE("assembly rejects mismatched spaces", "[assembly]") {
  const Triangulation mesh = initial_square_mesh();
  const Triangulation other = initial_square_mesh();
  const FESpace dg = make_space(mesh, Family::DG, 0);
  const FESpace rt = make_space(mesh, Family::RaviartThomas, 0);
  const FESpace lag = make_space(mesh, Family::Lagrange, 2);
  const FESpace rt_other = make_space(other, Family::RaviartThomas, 0);
  const FESpace lag_other = make_space(other, Family::Lagrange, 2);

  REQUIRE_THROWS_AS(gram_h1(rt), CapabilityError);
  REQUIRE_THROWS_AS(gram_hdiv(dg), CapabilityError);
  REQUIRE_THROWS_AS(ultraweak_operator(dg, rt_other, lag_other), ConfigError);
  REQUIRE_THROWS_AS(ultraweak_operator(lag, rt, lag), CapabilityError);
  REQUIRE_THROWS_AS(ultraweak_rhs(rt, lag_other, ProblemData{}), ConfigError);
  REQUIRE_THROWS_AS(mild_fosls_system(dg, lag, nullptr), CapabilityError);
  REQUIRE_THROWS_AS(mild_fosls_system(rt, lag_other, nullptr), ConfigError);
}
