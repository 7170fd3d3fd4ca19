#pragma once

#include <cmath>
#include <set>
#include <string>

#include "minresfem/assembly.hpp"
#include "minresfem/errors.hpp"
#include "minresfem/mesh.hpp"

namespace minresfem {

enum class Formulation { Ultraweak, MildBaseline };
enum class TestEnrichment { Standard, Enriched };
enum class RefinementMode { Uniform, Adaptive };

// Built-in problem presets on the unit square.
//   paper-corner: mixed boundary conditions with Neumann side {0} x [0,1],
//     h_D = cos(pi x / 2), h_N = 1, no volume load; the solution has corner
//     singularities limiting it to H^2.
//   manufactured-smooth: full Dirichlet boundary, u = sin(pi x) sin(pi y),
//     g = 2 pi^2 u, homogeneous boundary data; exact fields available.
enum class DataPreset { PaperCorner, ManufacturedSmooth };

struct ExperimentConfig {
  Formulation formulation = Formulation::Ultraweak;
  int trial_degree = 0;
  TestEnrichment test_enrichment = TestEnrichment::Standard;
  RefinementMode refinement = RefinementMode::Uniform;
  double theta = 0.6;           // Doerfler bulk parameter
  long dof_budget = 10000;      // stop before the trial space exceeds this
  bool compute_gamma = false;   // report the discrete inf-sup constant per level
  bool compute_err_ref = true;  // report the error against a reference solve
  int reference_degree = 4;
  DataPreset data = DataPreset::PaperCorner;
  std::string output;           // CSV file name; "results.csv" when empty
};

struct PresetData {
  ProblemData data;
  std::set<Side> neumann_sides;
  std::function<double(double, double)> exact_u;             // null when unknown
  std::function<Eigen::Vector2d(double, double)> exact_flux;
};

inline PresetData make_preset(DataPreset preset) {
  PresetData p;
  if (preset == DataPreset::PaperCorner) {
    p.neumann_sides = {Side::Left};
    p.data.hD = [](double x, double) { return std::cos(M_PI * x / 2.0); };
    p.data.hN = [](double, double) { return 1.0; };
  } else {
    p.neumann_sides = {};
    p.data.g = [](double x, double y) {
      return 2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y);
    };
    p.exact_u = [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); };
    p.exact_flux = [](double x, double y) {
      return Eigen::Vector2d(M_PI * std::cos(M_PI * x) * std::sin(M_PI * y),
                             M_PI * std::sin(M_PI * x) * std::cos(M_PI * y));
    };
  }
  return p;
}

// Trial-space dimension the configuration would use on the given mesh.
inline long trial_dofs_on(const ExperimentConfig& cfg, const Triangulation& mesh) {
  if (cfg.formulation == Formulation::Ultraweak)
    return 3L * mesh.num_triangles() * poly_space_dim(cfg.trial_degree);
  const FESpace rt = make_space(mesh, Family::RaviartThomas, cfg.trial_degree,
                                Constraint::ZeroNormalTraceOnNeumann);
  const FESpace lag = make_space(mesh, Family::Lagrange, cfg.trial_degree + 1,
                                 Constraint::ZeroTraceOnDirichlet);
  return rt.dim() + lag.dim();
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.trial_degree < 0 || cfg.trial_degree > 3)
    throw ConfigError("trial_degree must be in 0..3");
  if (cfg.reference_degree <= cfg.trial_degree || cfg.reference_degree > 4)
    throw ConfigError("reference_degree must exceed trial_degree and be at most 4");
  if (!(cfg.theta > 0.0) || !(cfg.theta <= 1.0))
    throw ConfigError("theta must lie in (0, 1]");
  if (cfg.formulation == Formulation::MildBaseline &&
      cfg.data == DataPreset::PaperCorner)
    throw ConfigError(
        "the mild baseline imposes homogeneous essential conditions and cannot "
        "represent the paper-corner data; use data = manufactured-smooth");
  if (cfg.dof_budget > 200000)
    throw ConfigError("dof_budget above 200000 is outside the supported scale");
  const PresetData preset = make_preset(cfg.data);
  const Triangulation initial = initial_square_mesh(preset.neumann_sides);
  const long initial_dofs = trial_dofs_on(cfg, initial);
  if (cfg.dof_budget < initial_dofs)
    throw ConfigError("dof_budget " + std::to_string(cfg.dof_budget) +
                      " is below the initial trial dimension " +
                      std::to_string(initial_dofs));
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline ConfigError key_error(int line, const std::string& key, const std::string& msg) {
  return ConfigError("config line " + std::to_string(line) + ", key '" + key +
                     "': " + msg);
}

}  // namespace detail

// Parses the flat key = value configuration format. '#' starts a comment,
// blank lines are skipped, unknown and duplicate keys are rejected. Missing
// keys keep their defaults; the assembled configuration is validated before
// being returned.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
    pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key or value");
    if (!seen.insert(key).second)
      throw detail::key_error(lineno, key, "duplicate key");

    auto as_int = [&](long lo, long hi) {
      try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        if (v < lo || v > hi) throw std::out_of_range("");
        return v;
      } catch (const std::exception&) {
        throw detail::key_error(lineno, key, "expected an integer in [" +
                                                 std::to_string(lo) + ", " +
                                                 std::to_string(hi) + "], got '" +
                                                 value + "'");
      }
    };
    auto as_double = [&]() {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return v;
      } catch (const std::exception&) {
        throw detail::key_error(lineno, key, "expected a number, got '" + value + "'");
      }
    };
    auto as_bool = [&]() {
      if (value == "true") return true;
      if (value == "false") return false;
      throw detail::key_error(lineno, key, "expected true or false, got '" + value + "'");
    };

    if (key == "formulation") {
      if (value == "ultraweak")
        cfg.formulation = Formulation::Ultraweak;
      else if (value == "mild-baseline")
        cfg.formulation = Formulation::MildBaseline;
      else
        throw detail::key_error(lineno, key, "expected ultraweak or mild-baseline");
    } else if (key == "trial_degree") {
      cfg.trial_degree = static_cast<int>(as_int(0, 3));
    } else if (key == "test_enrichment") {
      if (value == "standard")
        cfg.test_enrichment = TestEnrichment::Standard;
      else if (value == "enriched")
        cfg.test_enrichment = TestEnrichment::Enriched;
      else
        throw detail::key_error(lineno, key, "expected standard or enriched");
    } else if (key == "refinement") {
      if (value == "uniform")
        cfg.refinement = RefinementMode::Uniform;
      else if (value == "adaptive")
        cfg.refinement = RefinementMode::Adaptive;
      else
        throw detail::key_error(lineno, key, "expected uniform or adaptive");
    } else if (key == "theta") {
      cfg.theta = as_double();
      if (!(cfg.theta > 0.0) || !(cfg.theta <= 1.0))
        throw detail::key_error(lineno, key, "must lie in (0, 1]");
    } else if (key == "dof_budget") {
      cfg.dof_budget = as_int(1, 1000000000);
    } else if (key == "compute_gamma") {
      cfg.compute_gamma = as_bool();
    } else if (key == "compute_err_ref") {
      cfg.compute_err_ref = as_bool();
    } else if (key == "reference_degree") {
      cfg.reference_degree = static_cast<int>(as_int(1, 4));
    } else if (key == "data") {
      if (value == "paper-corner")
        cfg.data = DataPreset::PaperCorner;
      else if (value == "manufactured-smooth")
        cfg.data = DataPreset::ManufacturedSmooth;
      else
        throw detail::key_error(lineno, key,
                                "expected paper-corner or manufactured-smooth");
    } else if (key == "output") {
      cfg.output = value;
    } else {
      throw detail::key_error(lineno, key, "unknown key");
    }
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace minresfem
