#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "minresfem/adapt.hpp"

namespace minresfem {

inline std::string csv_header() {
  return "level,ntri,dofs_x,gamma_tilde,estimator,err_ref";
}

namespace detail {

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// One row of the experiment table. Optional columns are left empty.
inline std::string csv_row(const TraceRow& r) {
  std::string out = std::to_string(r.level) + "," + std::to_string(r.ntri) + "," +
                    std::to_string(r.dofs_x) + ",";
  if (r.gamma_tilde) out += detail::format_g17(*r.gamma_tilde);
  out += "," + detail::format_g17(r.estimator) + ",";
  if (r.err_ref) out += detail::format_g17(*r.err_ref);
  return out;
}

inline void emit_csv(const AdaptiveTrace& trace, std::ostream& os) {
  os << csv_header() << "\n";
  for (const TraceRow& r : trace.rows) os << csv_row(r) << "\n";
}

inline std::string join_output_path(const std::string& out_dir,
                                    const std::string& file) {
  const std::string name = file.empty() ? std::string("results.csv") : file;
  if (out_dir.empty() || (!name.empty() && name.front() == '/')) return name;
  if (out_dir.back() == '/') return out_dir + name;
  return out_dir + "/" + name;
}

// Runs the configured refinement study, streaming each completed level to
// stdout and to the CSV file. Returns the full trace.
inline AdaptiveTrace run_experiment(const ExperimentConfig& cfg,
                                    const std::string& out_dir = "") {
  validate_config(cfg);
  const std::string path = join_output_path(out_dir, cfg.output);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << csv_header() << "\n";
  std::printf("%5s %8s %8s %12s %14s %14s\n", "level", "ntri", "dofs_x",
              "gamma_tilde", "estimator", "err_ref");
  const AdaptiveTrace trace = adaptive_loop(cfg, [&](const TraceRow& r) {
    out << csv_row(r) << "\n";
    out.flush();
    std::printf("%5d %8d %8ld %12s %14.6e %14s\n", r.level, r.ntri, r.dofs_x,
                r.gamma_tilde ? detail::format_g17(*r.gamma_tilde).substr(0, 12).c_str()
                              : "-",
                r.estimator,
                r.err_ref ? detail::format_g17(*r.err_ref).substr(0, 14).c_str()
                          : "-");
    std::fflush(stdout);
  });
  if (!out) throw ConfigError("failed while writing output file: " + path);

  auto print_rate = [](const char* label, const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 2) return;
    std::printf("%s rate over final levels: %.3f (in powers of dofs_x)\n", label,
                eoc(pts).back());
  };
  std::vector<std::pair<double, double>> est_pts, err_pts;
  const std::size_t nrows = trace.rows.size();
  const std::size_t first = nrows > 3 ? nrows - 3 : 0;
  for (std::size_t i = first; i < nrows; ++i) {
    const TraceRow& r = trace.rows[i];
    if (r.estimator > 0.0)
      est_pts.emplace_back(static_cast<double>(r.dofs_x), r.estimator);
    if (r.err_ref && *r.err_ref > 0.0)
      err_pts.emplace_back(static_cast<double>(r.dofs_x), *r.err_ref);
  }
  print_rate("estimator", est_pts);
  print_rate("err_ref", err_pts);
  std::printf("wrote %s\n", path.c_str());
  return trace;
}

// Reports the discrete inf-sup constant per refinement level of the
// configured study; reference errors are skipped.
inline AdaptiveTrace run_infsup(ExperimentConfig cfg) {
  if (cfg.formulation != Formulation::Ultraweak)
    throw ConfigError("inf-sup reporting applies to the ultraweak formulation");
  cfg.compute_gamma = true;
  cfg.compute_err_ref = false;
  validate_config(cfg);
  std::printf("%5s %8s %8s %14s\n", "level", "ntri", "dofs_x", "gamma_tilde");
  return adaptive_loop(cfg, [](const TraceRow& r) {
    std::printf("%5d %8d %8ld %14.10f\n", r.level, r.ntri, r.dofs_x,
                r.gamma_tilde.value_or(0.0));
    std::fflush(stdout);
  });
}

// Checks, on a sequence of bisection meshes and for both boundary layouts
// (all-Dirichlet and Neumann on the left side), that the divergence-free
// lowest-order flux space and the nonconforming gradient space decompose the
// piecewise-constant vector fields. Returns false if any level fails.
inline bool run_helmholtz(int levels) {
  if (levels < 1 || levels > 12)
    throw ConfigError("levels must lie in 1..12");
  bool ok = true;
  struct Case {
    const char* label;
    std::set<Side> neumann;
  };
  const Case cases[] = {{"dirichlet-all", {}}, {"neumann-left", {Side::Left}}};
  for (const Case& c : cases) {
    Triangulation mesh = initial_square_mesh(c.neumann);
    for (int lev = 0; lev < levels; ++lev) {
      const HelmholtzReport rep = helmholtz_verify(mesh);
      const bool pass = rep.dims_additive && rep.max_cross <= 1e-10;
      std::printf(
          "%-14s level=%d ntri=%d divfree=%d grad=%d sum=%d target=%d "
          "cross=%.3e %s\n",
          c.label, lev, mesh.num_triangles(), rep.dim_divfree, rep.dim_grad,
          rep.dim_divfree + rep.dim_grad, 2 * mesh.num_triangles(),
          rep.max_cross, pass ? "ok" : "FAIL");
      std::fflush(stdout);
      ok = ok && pass;
      if (lev + 1 < levels) {
        std::vector<int> all(static_cast<std::size_t>(mesh.num_triangles()));
        std::iota(all.begin(), all.end(), 0);
        mesh = bisect(mesh, all);
      }
    }
  }
  return ok;
}

}  // namespace minresfem
