#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "minresfem/minresfem.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw minresfem::ConfigError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int threads_from_env() {
  const char* env = std::getenv("MINRESFEM_THREADS");
  if (!env || !*env) return 1;
  try {
    std::size_t used = 0;
    const int n = std::stoi(env, &used);
    if (used != std::string(env).size() || n < 1)
      throw std::invalid_argument("");
    return n;
  } catch (const std::exception&) {
    throw minresfem::ConfigError(
        std::string("MINRESFEM_THREADS must be a positive integer, got '") +
        env + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual-minimizing finite elements for first-order Poisson systems"};
  app.require_subcommand(1);

  std::string run_config, infsup_config, out_dir;
  bool serial = false;
  int levels = 6;

  CLI::App* run = app.add_subcommand("run", "run a refinement experiment from a config file");
  run->add_option("config", run_config, "config file (key = value lines)")->required();
  run->add_flag("--serial", serial, "single-threaded, bit-reproducible execution");
  run->add_option("--out", out_dir, "directory for the CSV output");

  CLI::App* infsup = app.add_subcommand("infsup", "report the discrete inf-sup constant per level");
  infsup->add_option("config", infsup_config, "config file (key = value lines)")->required();

  CLI::App* helmholtz = app.add_subcommand("helmholtz", "verify the discrete Helmholtz decomposition");
  helmholtz->add_option("levels", levels, "number of bisection levels (1..12)");

  try {
    app.parse(argc, argv);
    minresfem::set_max_threads(serial ? 1 : threads_from_env());
    if (run->parsed()) {
      minresfem::run_experiment(minresfem::parse_config(read_file(run_config)), out_dir);
    } else if (infsup->parsed()) {
      minresfem::run_infsup(minresfem::parse_config(read_file(infsup_config)));
    } else if (helmholtz->parsed()) {
      if (!minresfem::run_helmholtz(levels)) {
        std::cerr << "helmholtz: decomposition check failed\n";
        return 2;
      }
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage message
    return code == 0 ? 0 : 1;
  } catch (const minresfem::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const minresfem::CapabilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const minresfem::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << "\n";
    return 2;
  }
}
