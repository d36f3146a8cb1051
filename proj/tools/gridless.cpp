// Command-line front end: experiment sweeps and one-shot frequency estimation.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridless/atomic_solver.hpp"
#include "gridless/covariance_estimator.hpp"
#include "gridless/dual_localizer.hpp"
#include "gridless/experiments.hpp"
#include "gridless/io.hpp"
#include "gridless/subspace_freq.hpp"

namespace {

using namespace gridless;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitSolver = 3;

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
  bool full = false;
};

struct LocalizeArgs {
  std::string input;
  std::string mode = "atomic";
  std::optional<long> r;
  std::optional<double> lambda;
  std::optional<double> tau;
  double eps = 1e-3;
  std::string out;
};

int cmd_validate(const RunArgs& a) {
  const ExperimentConfig cfg = parse_config(load_json_file(a.config), a.full, a.seed);
  std::cout << "ok: " << to_string(cfg.kind) << ", " << cfg.trials << " trials per point\n";
  return 0;
}

int cmd_run(const RunArgs& a) {
  ExperimentConfig cfg = parse_config(load_json_file(a.config), a.full, a.seed);
  RunOptions opts;
  opts.output_dir = a.out.empty() ? cfg.output_dir : a.out;
  opts.threads = a.threads;
  const RunResult res = run_experiment(cfg, opts);
  std::size_t errors = 0;
  const std::size_t st = res.trials.index_of("status");
  for (std::size_t i = 0; i < res.trials.size(); ++i)
    if (std::get<std::string>(res.trials.row(i)[st]) != "ok") ++errors;
  std::cout << to_string(cfg.kind) << ": " << res.trials.size() << " trials, " << errors << " with errors, written to "
            << opts.output_dir << '\n';
  return 0;
}

bool looks_like_covariance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) return line.rfind('#', 0) == 0;
  return false;
}

json complex_rows(const CMatrix& c) {
  json rows = json::array();
  for (Eigen::Index k = 0; k < c.rows(); ++k) {
    json row = json::array();
    for (Eigen::Index l = 0; l < c.cols(); ++l) row.push_back({c(k, l).real(), c(k, l).imag()});
    rows.push_back(row);
  }
  return rows;
}

json localize_atomic(const LocalizeArgs& a) {
  const EnsembleData data = read_ensemble_file(a.input);
  const Eigen::Index n = data.z.rows();
  const Eigen::Index L = data.z.cols();
  const bool full = data.mask.kind() == ObservationMask::Kind::Full;
  CMatrix y;
  SolveReport report;
  if (a.tau) {
    if (full) {
      const AtomicSolution sol = admm_denoise(data.z, *a.tau);
      y = (data.z - sol.X) / *a.tau;
      report = sol.report;
    } else {
      const AtomicSolution sol = admm_denoise_masked(data.z, data.mask, *a.tau);
      y = mask_project(data.z - sol.X, data.mask) / *a.tau;
      report = sol.report;
    }
  } else {
    const AtomicSolution sol = admm_complete(data.z, data.mask);
    y = mask_project(-2.0 * sol.state.Lambda.topRightCorner(n, L), data.mask);
    report = sol.report;
  }
  std::vector<double> norms;
  FrequencySet freqs = locate_frequencies(y, a.eps, 0, &norms);
  if (a.r && static_cast<long>(freqs.size()) > *a.r) {
    std::vector<std::size_t> idx(freqs.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) { return norms[p] > norms[q]; });
    idx.resize(static_cast<std::size_t>(*a.r));
    std::sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) { return freqs[p] < freqs[q]; });
    std::vector<double> f, nv;
    for (std::size_t k : idx) {
      f.push_back(freqs[k]);
      nv.push_back(norms[k]);
    }
    freqs = FrequencySet(f);
    norms = nv;
  }
  if (freqs.empty()) throw SolverFailure("no dual-polynomial peak reached 1 - eps");
  const CoefficientMatrix amps = recover_amplitudes(freqs, data.z, data.mask);
  json out;
  out["mode"] = "atomic";
  out["n"] = n;
  out["L"] = L;
  out["mask"] = to_string(data.mask.kind());
  out["frequencies"] = freqs.values();
  out["peak_norms"] = norms;
  out["amplitudes"] = complex_rows(amps);
  out["diagnostics"] = {{"dual_norm_max", dual_norm(y)},
                        {"iterations", report.iterations},
                        {"converged", report.converged},
                        {"objective", report.objective},
                        {"program", a.tau ? "denoise" : "complete"}};
  return out;
}

json localize_covariance(const LocalizeArgs& a) {
  CovarianceSample s;
  if (looks_like_covariance(a.input)) {
    s = read_covariance_file(a.input);
  } else {
    const EnsembleData data = read_ensemble_file(a.input);
    if (data.mask.kind() == ObservationMask::Kind::Entrywise)
      throw ValidationError("covariance mode needs the same observed rows in every column");
    std::vector<Eigen::Index> rows;
    if (data.mask.kind() == ObservationMask::Kind::Full) {
      for (Eigen::Index i = 0; i < data.z.rows(); ++i) rows.push_back(i);
    } else {
      rows = data.mask.row_set();
    }
    CMatrix xo(static_cast<Eigen::Index>(rows.size()), data.z.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) xo.row(static_cast<Eigen::Index>(k)) = data.z.row(rows[k]);
    s = sample_covariance(xo, rows, data.z.rows());
  }
  s.validate();
  const double lambda = a.lambda ? *a.lambda : lambda_heuristic(s.L, s.m());
  const CovarianceEstimate est = estimate_toeplitz(s, lambda);
  Eigen::Index r = a.r ? static_cast<Eigen::Index>(*a.r) : estimate_model_order(est.u_hat);
  if (r < 1) throw SolverFailure("estimated model order is zero");
  if (r >= s.n) throw SolverFailure("estimated model order equals n");
  SubspaceSplit split;
  const FrequencySet freqs = root_music(est.u_hat, r, &split);
  const RVector powers = fit_powers(est.u_hat, freqs);
  json out;
  out["mode"] = "covariance";
  out["n"] = s.n;
  out["m"] = s.m();
  out["L"] = s.L;
  out["frequencies"] = freqs.values();
  out["variances"] = std::vector<double>(powers.data(), powers.data() + powers.size());
  out["diagnostics"] = {{"eigen_gap", split.eigen_gap},
                        {"projection_distance", split.projection_distance},
                        {"lambda", lambda},
                        {"model_order", r},
                        {"model_order_source", a.r ? "given" : "eigenvalue threshold"},
                        {"iterations", est.report.iterations},
                        {"converged", est.report.converged},
                        {"fit_residual", est.fit_residual},
                        {"psd_repair", est.psd_repair}};
  return out;
}

int cmd_localize(const LocalizeArgs& a) {
  if (a.r && *a.r < 1) throw DomainError("--r must be positive");
  const json out = a.mode == "atomic" ? localize_atomic(a) : localize_covariance(a);
  if (a.out.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    std::ofstream os(a.out);
    if (!os) throw IoError("cannot write '" + a.out + "'");
    os << out.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gridless line-spectrum estimation for multiple measurement vectors"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto add_run_flags = [&](CLI::App* sub, bool with_output) {
    sub->add_option("--config", run_args.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", run_args.seed, "Override the config seed");
    sub->add_flag("--full", run_args.full, "Use the full-scale trial counts from the config");
    if (with_output) {
      sub->add_option("--out", run_args.out, "Output directory (defaults to the config's output_dir)");
      sub->add_option("--threads", run_args.threads, "Worker threads (default: GRIDLESS_THREADS or all cores)")
          ->check(CLI::PositiveNumber);
    }
  };
  CLI::App* run = app.add_subcommand("run", "Run an experiment sweep and write CSV/JSON artifacts");
  add_run_flags(run, true);
  CLI::App* validate = app.add_subcommand("validate-config", "Check a config and report every invalid field");
  add_run_flags(validate, false);

  LocalizeArgs loc;
  CLI::App* localize = app.add_subcommand("localize", "Estimate frequencies from an ensemble or covariance file");
  localize->add_option("--input", loc.input, "Ensemble CSV or covariance file")->required();
  localize->add_option("--mode", loc.mode, "atomic or covariance")->check(CLI::IsMember({"atomic", "covariance"}));
  localize->add_option("--r", loc.r, "Model order (atomic: keep the r strongest peaks)");
  localize->add_option("--lambda", loc.lambda, "Covariance regularization (default: heuristic)")
      ->check(CLI::NonNegativeNumber);
  localize->add_option("--tau", loc.tau, "Denoise with this weight instead of exact completion")
      ->check(CLI::PositiveNumber);
  localize->add_option("--eps", loc.eps, "Peak threshold 1 - eps")->check(CLI::Range(1e-12, 0.5));
  localize->add_option("--out", loc.out, "Write the JSON result here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*validate) return cmd_validate(run_args);
    if (*localize) return cmd_localize(loc);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return *localize ? kExitIo : kExitUsage;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return *localize ? kExitSolver : kExitIo;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}
