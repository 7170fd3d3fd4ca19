#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "minresfem/analysis.hpp"
#include "minresfem/config.hpp"
#include "minresfem/solve.hpp"

namespace minresfem {

struct MarkResult {
  std::vector<int> marked;  // ascending element indices
  bool converged = false;   // true when every indicator vanishes
};

// Doerfler bulk marking: returns a smallest element set whose squared
// indicators sum to at least theta times the squared total. Ties are broken
// by element index so the result is deterministic.
inline MarkResult doerfler_mark(const Eigen::VectorXd& eta, double theta) {
  if (!(theta > 0.0) || !(theta <= 1.0))
    throw ConfigError("marking parameter theta must lie in (0, 1]");
  const Eigen::Index n = eta.size();
  double total2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(eta[i]) || eta[i] < 0.0)
      throw ConfigError("error indicators must be finite and nonnegative");
    total2 += eta[i] * eta[i];
  }
  MarkResult result;
  if (total2 == 0.0) {
    result.converged = true;
    return result;
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (eta[a] != eta[b]) return eta[a] > eta[b];
    return a < b;
  });
  const double target = theta * total2;
  double acc = 0.0;
  for (int t : order) {
    result.marked.push_back(t);
    acc += eta[t] * eta[t];
    if (acc >= target) break;
  }
  std::sort(result.marked.begin(), result.marked.end());
  return result;
}

struct TraceRow {
  int level = 0;
  int ntri = 0;
  long dofs_x = 0;
  std::optional<double> gamma_tilde;
  double estimator = 0.0;
  std::optional<double> err_ref;
};

struct AdaptiveTrace {
  std::vector<TraceRow> rows;
};

namespace detail {

struct LevelResult {
  TraceRow row;
  Eigen::VectorXd eta;
};

inline LevelResult ultraweak_level(const Triangulation& mesh,
                                   const ExperimentConfig& cfg,
                                   const PresetData& preset) {
  LevelResult out;
  const bool enriched = cfg.test_enrichment == TestEnrichment::Enriched;
  const UltraweakSpaces sp = ultraweak_spaces(mesh, cfg.trial_degree, enriched);
  out.row.dofs_x = 3L * sp.dg.dim();
  const SystemBlocks blocks = ultraweak_system(sp, preset.data);
  const SolveResult sol = solve_saddle(blocks);
  const ErrorReport est = error_estimator(sol, blocks, sp);
  out.row.estimator = est.total;
  out.eta = est.eta;
  if (cfg.compute_gamma)
    out.row.gamma_tilde = infsup_gamma(blocks.A, blocks.B, blocks.MX).gamma_tilde;
  if (cfg.compute_err_ref) {
    const UltraweakSpaces rsp =
        ultraweak_spaces(mesh, cfg.reference_degree, /*enriched=*/true);
    const SystemBlocks rblocks = ultraweak_system(rsp, preset.data);
    const SolveResult rsol =
        reduce_spd(rblocks, {PreconditionerSpec::Kind::ExactInverse}, 1e-9);
    out.row.err_ref = error_vs_reference(sol.x, sp, rsol.x, rsp);
  }
  return out;
}

inline LevelResult mild_level(const Triangulation& mesh,
                              const ExperimentConfig& cfg,
                              const PresetData& preset) {
  LevelResult out;
  const FESpace rt = make_space(mesh, Family::RaviartThomas, cfg.trial_degree,
                                Constraint::ZeroNormalTraceOnNeumann);
  const FESpace lag = make_space(mesh, Family::Lagrange, cfg.trial_degree + 1,
                                 Constraint::ZeroTraceOnDirichlet);
  out.row.dofs_x = rt.dim() + lag.dim();
  const MildSystem sys = mild_fosls_system(rt, lag, preset.data.g);
  const Eigen::VectorXd x = sparse_solve(sys.matrix, sys.rhs);
  const Eigen::VectorXd xq = x.head(rt.dim());
  const Eigen::VectorXd xw = x.tail(lag.dim());

  const int nt = mesh.num_triangles();
  const QuadRule& tq = triangle_rule(2 * (cfg.trial_degree + 2) + 6);
  out.eta.resize(nt);
  double err2 = 0.0;
  const bool have_exact = static_cast<bool>(preset.exact_u);
  for (int t = 0; t < nt; ++t) {
    const VectorBasisEval q_eval = eval_vector_basis(rt, t, tq.points);
    const ScalarBasisEval w_eval = eval_scalar_basis(lag, t, tq.points);
    const Eigen::VectorXd cq = local_coeffs(rt, xq, t);
    const Eigen::VectorXd cw = local_coeffs(lag, xw, t);
    const Eigen::VectorXd qx = q_eval.vx * cq;
    const Eigen::VectorXd qy = q_eval.vy * cq;
    const Eigen::VectorXd dq = q_eval.div * cq;
    const Eigen::VectorXd w = w_eval.value * cw;
    const Eigen::VectorXd wx = w_eval.dx * cw;
    const Eigen::VectorXd wy = w_eval.dy * cw;
    const double jac = 2.0 * mesh.area(t);
    const Eigen::Matrix2d J = mesh.jacobian(t);
    double local2 = 0.0;
    double exact2 = 0.0;
    for (Eigen::Index i = 0; i < tq.weights.size(); ++i) {
      const Eigen::Vector2d phys =
          mesh.vertex(mesh.triangle(t)[0]) + J * tq.points.row(i).transpose();
      const double gval = preset.data.g ? preset.data.g(phys.x(), phys.y()) : 0.0;
      const double rx = qx[i] - wx[i];
      const double ry = qy[i] - wy[i];
      const double rd = dq[i] + gval;
      local2 += tq.weights[i] * jac * (rx * rx + ry * ry + rd * rd);
      if (have_exact) {
        const double u = preset.exact_u(phys.x(), phys.y());
        const Eigen::Vector2d p = preset.exact_flux(phys.x(), phys.y());
        const double ex = qx[i] - p.x();
        const double ey = qy[i] - p.y();
        const double ew = w[i] - u;
        const double egx = wx[i] - p.x();
        const double egy = wy[i] - p.y();
        exact2 += tq.weights[i] * jac *
                  (ex * ex + ey * ey + rd * rd + ew * ew + egx * egx + egy * egy);
      }
    }
    out.eta[t] = std::sqrt(std::max(local2, 0.0));
    err2 += exact2;
  }
  out.row.estimator = out.eta.norm();
  if (cfg.compute_err_ref && have_exact) out.row.err_ref = std::sqrt(err2);
  return out;
}

}  // namespace detail

// Runs the solve / estimate / mark / refine cycle starting from the initial
// mesh of the configured preset. Every completed level is recorded (and
// reported through on_row when given); the loop stops once the next mesh
// would push the trial space past the budget, or, in adaptive mode, when all
// indicators vanish.
inline AdaptiveTrace adaptive_loop(
    const ExperimentConfig& cfg,
    const std::function<void(const TraceRow&)>& on_row = {}) {
  validate_config(cfg);
  const PresetData preset = make_preset(cfg.data);
  Triangulation mesh = initial_square_mesh(preset.neumann_sides);
  AdaptiveTrace trace;
  for (int level = 0;; ++level) {
    detail::LevelResult lev = (cfg.formulation == Formulation::Ultraweak)
                                  ? detail::ultraweak_level(mesh, cfg, preset)
                                  : detail::mild_level(mesh, cfg, preset);
    lev.row.level = level;
    lev.row.ntri = mesh.num_triangles();
    trace.rows.push_back(lev.row);
    if (on_row) on_row(lev.row);

    Triangulation next = [&] {
      if (cfg.refinement == RefinementMode::Uniform) return uniform_refine(mesh);
      const MarkResult mark = doerfler_mark(lev.eta, cfg.theta);
      if (mark.converged) return Triangulation(mesh);
      return bisect(mesh, mark.marked);
    }();
    if (next.num_triangles() == mesh.num_triangles()) break;  // converged
    if (trial_dofs_on(cfg, next) > cfg.dof_budget) break;
    mesh = std::move(next);
  }
  return trace;
}

}  // namespace minresfem
