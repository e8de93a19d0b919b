// aaa_cli: seeded experiment runner writing plot-ready CSV.
//
//   aaa_cli variance  --dataset tgauss:sd=0.1 --eps 0.5,1,2,4
//   aaa_cli estimate  --dataset gaussian:n=10000 --runs 50 --seed 7
//   aaa_cli optimize  --dataset point:x=0 --eps 4 --out table.txt
//   aaa_cli sweep     --parameter s --grid 0.05,0.1,0.2,0.4
//   aaa_cli multidim  --dims 3 --k 1
//
// Shared settings may also come from --config FILE (INI/TOML key = value;
// subcommand settings under a [subcommand] section). Flags win over the file.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "aaa/experiment.hpp"

namespace {

struct RawOptions {
  std::vector<std::string> mechanisms{"aaa", "laplace", "duchi", "piecewise", "hybrid"};
  std::vector<double> eps{0.5, 1.0, 2.0, 4.0};
  double beta = 1.0;
  int bins = 16;
  int noise_window = 0;  // 0 selects 4N
  double tail_ratio = 0.5;
  double split = 0.1;
  std::string dataset = "gaussian";
  std::string csv;
  std::vector<int> columns{0};
  int runs = 10;
  std::uint64_t seed = 1;
  std::string out = "-";
  unsigned threads = 0;  // 0 selects the hardware concurrency
  int dims = 1;
  int k = 1;
  std::string sweep_parameter = "s";
  std::vector<double> sweep_grid;
};

aaa::ExperimentConfig resolve(const RawOptions& raw) {
  aaa::ExperimentConfig cfg;
  cfg.mechanisms.clear();
  for (const auto& m : raw.mechanisms) cfg.mechanisms.push_back(aaa::parse_mechanism(m));
  cfg.eps = raw.eps;
  cfg.beta = raw.beta;
  cfg.bins = raw.bins;
  if (raw.noise_window > 0) cfg.noise_window = raw.noise_window;
  cfg.tail_ratio = raw.tail_ratio;
  cfg.split = raw.split;
  cfg.dataset = aaa::DatasetSpec::parse(raw.dataset);
  if (!raw.csv.empty() && raw.dataset == "gaussian") cfg.dataset = aaa::DatasetSpec::parse("csv");
  cfg.csv_path = raw.csv;
  cfg.columns = raw.columns;
  cfg.runs = raw.runs;
  cfg.seed = raw.seed;
  cfg.dims = raw.dims;
  cfg.k = raw.k;
  cfg.threads = raw.threads > 0 ? raw.threads : std::max(1u, std::thread::hardware_concurrency());
  return cfg;
}

// Writes through a buffer so a failed run never leaves a partial file.
template <class Body>
void emit(const std::string& path, Body&& body) {
  std::ostringstream buf;
  body(buf);
  if (path == "-") {
    std::cout << buf.str() << std::flush;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw aaa::Error(aaa::ErrorKind::io_error, "cannot write '" + path + "'");
  f << buf.str();
  if (!f.flush()) throw aaa::Error(aaa::ErrorKind::io_error, "write to '" + path + "' failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution-aware LDP mean estimation experiments"};
  app.set_config("--config", "", "Read settings from an INI/TOML file");
  app.require_subcommand(1);
  app.fallthrough();

  RawOptions raw;
  app.add_option("--mechanisms", raw.mechanisms, "aaa, laplace, duchi, piecewise, hybrid")->delimiter(',')
      ->capture_default_str();
  app.add_option("--eps", raw.eps, "Privacy budgets")->delimiter(',')->capture_default_str();
  app.add_option("--beta", raw.beta, "Domain half-width after rescaling")->capture_default_str();
  app.add_option("--bins", raw.bins, "Number of bins N")->capture_default_str();
  app.add_option("--noise-window", raw.noise_window, "Explicit noise window M (default 4N)");
  app.add_option("--tail-ratio", raw.tail_ratio, "Geometric tail ratio r")->capture_default_str();
  app.add_option("--split", raw.split, "Fraction s of clients in phase 1")->capture_default_str();
  app.add_option("--dataset", raw.dataset,
                 "kind[:key=value,...]; gaussian, exponential, bernoulli, csv, tgauss, sexp, beta, point")
      ->capture_default_str();
  app.add_option("--csv", raw.csv, "CSV input file");
  app.add_option("--column", raw.columns, "Zero-based CSV column(s)")->delimiter(',')->capture_default_str();
  app.add_option("--runs", raw.runs, "Independent runs")->capture_default_str();
  app.add_option("--seed", raw.seed, "Base seed; run r uses seed + r")->capture_default_str();
  app.add_option("--out", raw.out, "Output path, - for stdout")->capture_default_str();
  app.add_option("--threads", raw.threads, "Worker threads for runs (0 = all cores)");

  auto* variance = app.add_subcommand("variance", "Expected variance per mechanism for a true distribution");
  auto* estimate = app.add_subcommand("estimate", "Mean squared error of the estimated mean");
  auto* optimize = app.add_subcommand("optimize", "Solve and dump one noise table");
  auto* sweep = app.add_subcommand("sweep", "Repeat estimate over a hyperparameter grid");
  sweep->add_option("--parameter", raw.sweep_parameter, "s, bin_size or noise_range")->capture_default_str();
  sweep->add_option("--grid", raw.sweep_grid, "Grid values")->delimiter(',')->required();
  auto* multidim = app.add_subcommand("multidim", "Sum of squared errors over d attributes");
  multidim->add_option("--dims", raw.dims, "Attributes d")->capture_default_str();
  multidim->add_option("--k", raw.k, "Attributes reported per client")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (multidim->parsed() && raw.columns.size() == 1 && raw.dims > 1 && !raw.csv.empty()) {
      raw.columns.clear();
      for (int j = 0; j < raw.dims; ++j) raw.columns.push_back(j);
    }
    const aaa::ExperimentConfig cfg = resolve(raw);
    if (variance->parsed()) {
      emit(raw.out, [&](std::ostream& os) { aaa::cmd_variance(cfg, os); });
    } else if (estimate->parsed()) {
      emit(raw.out, [&](std::ostream& os) { aaa::cmd_estimate(cfg, os); });
    } else if (optimize->parsed()) {
      std::ostringstream summary;
      emit(raw.out, [&](std::ostream& os) { aaa::cmd_optimize(cfg, os, summary); });
      (raw.out == "-" ? std::cerr : std::cout) << summary.str() << std::flush;
    } else if (sweep->parsed()) {
      const auto param = aaa::parse_sweep_parameter(raw.sweep_parameter);
      emit(raw.out, [&](std::ostream& os) { aaa::cmd_sweep(cfg, param, raw.sweep_grid, os); });
    } else if (multidim->parsed()) {
      emit(raw.out, [&](std::ostream& os) { aaa::cmd_multidim(cfg, os); });
    }
  } catch (const aaa::Error& e) {
    std::cerr << "aaa_cli: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "aaa_cli: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
