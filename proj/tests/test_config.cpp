#include "catch2/catch_amalgamated.hpp"
#include "minresfem/minresfem.hpp"

using namespace minresfem;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("empty configuration yields the documented defaults", "[config]") {
  const ExperimentConfig cfg = parse_config("");
  REQUIRE(cfg.formulation == Formulation::Ultraweak);
  REQUIRE(cfg.trial_degree == 0);
  REQUIRE(cfg.test_enrichment == TestEnrichment::Standard);
  REQUIRE(cfg.refinement == RefinementMode::Uniform);
  REQUIRE(cfg.theta == 0.6);
  REQUIRE(cfg.dof_budget == 10000);
  REQUIRE_FALSE(cfg.compute_gamma);
  REQUIRE(cfg.compute_err_ref);
  REQUIRE(cfg.reference_degree == 4);
  REQUIRE(cfg.data == DataPreset::PaperCorner);
  REQUIRE(cfg.output.empty());
}

TEST_CASE("configuration keys, comments, and whitespace parse as written",
          "[config]") {
  const std::string text =
      "# refinement study\n"
      "formulation = ultraweak\n"
      "\n"
      "  trial_degree=2   # quadratic trial functions\n"
      "test_enrichment = enriched\n"
      "refinement = adaptive\n"
      "theta = 0.45\n"
      "dof_budget = 9000\n"
      "compute_gamma = true\n"
      "compute_err_ref = false\n"
      "reference_degree = 3\n"
      "data = manufactured-smooth\n"
      "output = run.csv\n";
  const ExperimentConfig cfg = parse_config(text);
  REQUIRE(cfg.trial_degree == 2);
  REQUIRE(cfg.test_enrichment == TestEnrichment::Enriched);
  REQUIRE(cfg.refinement == RefinementMode::Adaptive);
  REQUIRE(cfg.theta == 0.45);
  REQUIRE(cfg.dof_budget == 9000);
  REQUIRE(cfg.compute_gamma);
  REQUIRE_FALSE(cfg.compute_err_ref);
  REQUIRE(cfg.reference_degree == 3);
  REQUIRE(cfg.data == DataPreset::ManufacturedSmooth);
  REQUIRE(cfg.output == "run.csv");

  const ExperimentConfig mild =
      parse_config("formulation = mild-baseline\ndata = manufactured-smooth\n");
  REQUIRE(mild.formulation == Formulation::MildBaseline);
}

TEST_CASE("malformed configuration lines name the offending key and line",
          "[config]") {
  REQUIRE_THROWS_MATCHES(parse_config("x\ny = 1\n"), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("line 1") &&
                             ContainsSubstring("expected key = value")));
  REQUIRE_THROWS_MATCHES(
      parse_config("theta = 0.5\n\nwidgets = 7\n"), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("line 3") &&
                                      ContainsSubstring("widgets") &&
                                      ContainsSubstring("unknown key")));
  REQUIRE_THROWS_MATCHES(
      parse_config("theta = 0.5\ntheta = 0.7\n"), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("duplicate key")));
  REQUIRE_THROWS_MATCHES(
      parse_config("theta =\n"), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("empty key or value")));
}

TEST_CASE("configuration values are type- and range-checked", "[config]") {
  REQUIRE_THROWS_MATCHES(
      parse_config("trial_degree = abc\n"), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("expected an integer")));
  REQUIRE_THROWS_MATCHES(
      parse_config("trial_degree = 7\n"), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("[0, 3]")));
  REQUIRE_THROWS_MATCHES(
      parse_config("theta = 1.5\n"), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("theta") &&
                                      ContainsSubstring("(0, 1]")));
  REQUIRE_THROWS_AS(parse_config("theta = nope\n"), ConfigError);
  REQUIRE_THROWS_MATCHES(
      parse_config("compute_gamma = yes\n"), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("expected true or false")));
  REQUIRE_THROWS_MATCHES(
      parse_config("formulation = weak\n"), ConfigError,
      Catch::Matchers::MessageMatches(
          ContainsSubstring("expected ultraweak or mild-baseline")));
  REQUIRE_THROWS_MATCHES(
      parse_config("data = square\n"), ConfigError,
      Catch::Matchers::MessageMatches(
          ContainsSubstring("expected paper-corner or manufactured-smooth")));
  REQUIRE_THROWS_AS(parse_config("refinement = all\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("test_enrichment = extra\n"), ConfigError);
}

TEST_CASE("cross-field constraints are enforced after parsing", "[config]") {
  REQUIRE_THROWS_MATCHES(
      parse_config("trial_degree = 3\nreference_degree = 3\n"), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("reference_degree")));
  REQUIRE_THROWS_MATCHES(
      parse_config("formulation = mild-baseline\n"), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("mild baseline")));
  REQUIRE_THROWS_MATCHES(
      parse_config("dof_budget = 500000\n"), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("200000")));
  REQUIRE_THROWS_MATCHES(
      parse_config("dof_budget = 4\n"), ConfigError,
      Catch::Matchers::MessageMatches(
          ContainsSubstring("below the initial trial dimension")));

  ExperimentConfig cfg;
  cfg.theta = 0.0;
  REQUIRE_THROWS_AS(validate_config(cfg), ConfigError);
  cfg = ExperimentConfig{};
  cfg.trial_degree = -1;
  REQUIRE_THROWS_AS(validate_config(cfg), ConfigError);
}

TEST_CASE("trial dimension accounting matches the discrete spaces", "[config]") {
  const Triangulation mesh = uniform_refine(initial_square_mesh());
  ExperimentConfig cfg;
  cfg.trial_degree = 2;
  REQUIRE(trial_dofs_on(cfg, mesh) == 3L * 16 * 6);

  cfg.formulation = Formulation::MildBaseline;
  cfg.data = DataPreset::ManufacturedSmooth;
  const Triangulation dmesh = uniform_refine(initial_square_mesh({}));
  const FESpace rt = make_space(dmesh, Family::RaviartThomas, 2,
                                Constraint::ZeroNormalTraceOnNeumann);
  const FESpace lag =
      make_space(dmesh, Family::Lagrange, 3, Constraint::ZeroTraceOnDirichlet);
  REQUIRE(trial_dofs_on(cfg, dmesh) == rt.dim() + lag.dim());
}

TEST_CASE("presets provide the advertised data and boundary split", "[config]") {
  const PresetData corner = make_preset(DataPreset::PaperCorner);
  REQUIRE(corner.neumann_sides == std::set<Side>{Side::Left});
  REQUIRE_FALSE(corner.data.g);
  REQUIRE(corner.data.hD);
  REQUIRE(corner.data.hN);
  REQUIRE_FALSE(corner.exact_u);
  REQUIRE(corner.data.hD(0.0, 0.3) == 1.0);
  REQUIRE(corner.data.hN(0.0, 0.7) == 1.0);

  const PresetData smooth = make_preset(DataPreset::ManufacturedSmooth);
  REQUIRE(smooth.neumann_sides.empty());
  REQUIRE(smooth.data.g);
  REQUIRE(smooth.exact_u);
  REQUIRE(smooth.exact_flux);
  REQUIRE_FALSE(smooth.data.hD);
  // the load equals the negative Laplacian of the exact solution
  const double x = 0.31, y = 0.57;
  REQUIRE(std::abs(smooth.data.g(x, y) -
                   2.0 * M_PI * M_PI * smooth.exact_u(x, y)) < 1e-14);
}

TEST_CASE("table rows serialize with stable headers and blank optionals",
          "[config]") {
  REQUIRE(csv_header() == "level,ntri,dofs_x,gamma_tilde,estimator,err_ref");

  TraceRow r;
  r.level = 2;
  r.ntri = 64;
  r.dofs_x = 192;
  r.estimator = 0.5;
  r.err_ref = 0.25;
  REQUIRE(csv_row(r) == "2,64,192,,0.5,0.25");

  r.gamma_tilde = 0.472;
  r.err_ref.reset();
  REQUIRE(csv_row(r) == "2,64,192,0.47199999999999998,0.5,");

  AdaptiveTrace trace;
  trace.rows.push_back(r);
  std::ostringstream os;
  emit_csv(trace, os);
  REQUIRE(os.str() ==
          "level,ntri,dofs_x,gamma_tilde,estimator,err_ref\n"
          "2,64,192,0.47199999999999998,0.5,\n");
}

TEST_CASE("output paths resolve relative to the output directory", "[config]") {
  REQUIRE(join_output_path("", "") == "results.csv");
  REQUIRE(join_output_path("", "x.csv") == "x.csv");
  REQUIRE(join_output_path("out", "") == "out/results.csv");
  REQUIRE(join_output_path("out", "x.csv") == "out/x.csv");
  REQUIRE(join_output_path("out/", "x.csv") == "out/x.csv");
  REQUIRE(join_output_path("out", "/abs/x.csv") == "/abs/x.csv");
}
