#include "gridless/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "gridless/baselines_metrics.hpp"
#include "gridless/covariance_estimator.hpp"
#include "gridless/dual_localizer.hpp"
#include "gridless/io.hpp"
#include "gridless/rng.hpp"
#include "gridless/subspace_freq.hpp"

#ifndef GRIDLESS_VERSION
#define GRIDLESS_VERSION "0.0.0"
#endif

namespace gridless {

const char* library_version() { return GRIDLESS_VERSION; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::pair<ExperimentKind, const char*>>& kind_names() {
  static const std::vector<std::pair<ExperimentKind, const char*>> names = {
      {ExperimentKind::Complete, "complete"},
      {ExperimentKind::Denoise, "denoise"},
      {ExperimentKind::Covariance, "covariance"},
      {ExperimentKind::PhaseTransition, "phase-transition"},
      {ExperimentKind::CrbCompare, "crb-compare"},
      {ExperimentKind::BaselineCompare, "baseline-compare"},
      {ExperimentKind::Localize, "localize"},
  };
  return names;
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kind_names())
    if (k == kind) return name;
  return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
  for (const auto& [k, n] : kind_names())
    if (name == n) return k;
  throw ValidationError("unknown experiment kind '" + name + "'");
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------- config

namespace {

class FieldReader {
 public:
  explicit FieldReader(const nlohmann::json& j) : j_(j) {}

  template <typename T>
  void scalar(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      errors_.push_back(std::string("field '") + key + "': wrong type");
    }
  }

  /// Accepts a scalar or an array.
  template <typename T>
  void list(const char* key, std::vector<T>& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      const auto& v = j_.at(key);
      if (v.is_array()) {
        out = v.get<std::vector<T>>();
      } else {
        out = {v.get<T>()};
      }
    } catch (const nlohmann::json::exception&) {
      errors_.push_back(std::string("field '") + key + "': wrong type");
    }
  }

  void solver(const char* key, AdmmOptions& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    const auto& s = j_.at(key);
    if (!s.is_object()) {
      errors_.push_back(std::string("field '") + key + "': must be an object");
      return;
    }
    for (const auto& [k, v] : s.items()) {
      try {
        if (k == "rho") {
          out.rho = v.get<double>();
        } else if (k == "max_iters") {
          out.max_iters = v.get<int>();
        } else if (k == "tol") {
          out.tol_primal = out.tol_dual = v.get<double>();
        } else if (k == "tol_primal") {
          out.tol_primal = v.get<double>();
        } else if (k == "tol_dual") {
          out.tol_dual = v.get<double>();
        } else if (k == "adaptive_rho") {
          out.adaptive_rho = v.get<bool>();
        } else {
          errors_.push_back(std::string("field '") + key + "." + k + "': unknown key");
        }
      } catch (const nlohmann::json::exception&) {
        errors_.push_back(std::string("field '") + key + "." + k + "': wrong type");
      }
    }
    out.keep_history = false;
    try {
      out.validate();
    } catch (const DomainError& e) {
      errors_.push_back(std::string("field '") + key + "': " + e.what());
    }
  }

  void check_unknown() {
    for (const auto& [k, v] : j_.items()) {
      if (k == "full") continue;
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end())
        errors_.push_back("field '" + k + "': unknown key");
    }
  }

  void error(const std::string& msg) { errors_.push_back(msg); }
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  const nlohmann::json& j_;
  std::vector<std::string> seen_;
  std::vector<std::string> errors_;
};

template <typename T>
bool all_positive(const std::vector<T>& v) {
  return !v.empty() && std::all_of(v.begin(), v.end(), [](T x) { return x > 0; });
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& input, bool full, std::optional<std::uint64_t> seed_override) {
  if (!input.is_object()) throw ValidationError("config: top level must be a JSON object");
  nlohmann::json j = input;
  if (j.contains("full")) {
    if (!j.at("full").is_object()) throw ValidationError("config: field 'full': must be an object");
    if (full) j.merge_patch(j.at("full"));
    j.erase("full");
  }
  if (seed_override) j["seed"] = *seed_override;

  ExperimentConfig cfg;
  cfg.covariance_solver = covariance_defaults();
  cfg.covariance_solver.keep_history = false;
  cfg.solver.keep_history = false;
  FieldReader rd(j);

  std::string kind;
  rd.scalar("kind", kind);
  if (kind.empty()) {
    rd.error("field 'kind': required");
  } else {
    try {
      cfg.kind = parse_kind(kind);
    } catch (const ValidationError& e) {
      rd.error(std::string("field 'kind': ") + e.what());
    }
  }
  if (cfg.kind == ExperimentKind::Denoise) cfg.solver = AdmmOptions::denoising_defaults();
  cfg.solver.keep_history = false;

  if (!j.contains("seed")) rd.error("field 'seed': required");
  rd.scalar("seed", cfg.seed);
  rd.scalar("n", cfg.n);
  rd.list("m", cfg.m);
  rd.list("L", cfg.L);
  rd.list("r", cfg.r);
  rd.list("sigma", cfg.sigma);
  rd.list("delta", cfg.delta);
  rd.list("freqs", cfg.freqs);
  rd.scalar("min_separation", cfg.min_separation);
  rd.scalar("mask", cfg.mask);
  rd.list("omega", cfg.omega);
  rd.scalar("coefficients", cfg.coefficients);
  rd.scalar("trials", cfg.trials);
  rd.scalar("lambda", cfg.lambda);
  rd.scalar("tau_scale", cfg.tau_scale);
  rd.scalar("eps", cfg.eps);
  rd.scalar("music_tol", cfg.music_tol);
  rd.scalar("oversampling", cfg.oversampling);
  rd.scalar("mu_ratio", cfg.mu_ratio);
  rd.scalar("output_dir", cfg.output_dir);
  rd.solver("solver", cfg.solver);
  rd.solver("covariance_solver", cfg.covariance_solver);
  rd.check_unknown();
  if (!j.contains("m")) cfg.m = {cfg.n};

  if (cfg.n < 2) rd.error("field 'n': must be at least 2");
  if (!all_positive(cfg.m)) rd.error("field 'm': entries must be positive");
  for (auto m : cfg.m)
    if (m > cfg.n) rd.error("field 'm': entries must not exceed n");
  if (!all_positive(cfg.L)) rd.error("field 'L': entries must be positive");
  if (!all_positive(cfg.r)) rd.error("field 'r': entries must be positive");
  for (auto r : cfg.r)
    if (r >= cfg.n) rd.error("field 'r': entries must be below n");
  if (cfg.sigma.empty() || std::any_of(cfg.sigma.begin(), cfg.sigma.end(), [](double s) { return !(s >= 0.0); }))
    rd.error("field 'sigma': entries must be nonnegative");
  for (double d : cfg.delta)
    if (!(d > 0.0 && d < 1.0)) rd.error("field 'delta': entries must lie in (0, 1)");
  if (!cfg.delta.empty() && (cfg.r.size() != 1 || cfg.r[0] != 2)) rd.error("field 'delta': requires r = 2");
  for (double f : cfg.freqs)
    if (!(f >= 0.0 && f < 1.0)) rd.error("field 'freqs': entries must lie in [0, 1)");
  if (!cfg.freqs.empty() && (cfg.r.size() != 1 || static_cast<std::size_t>(cfg.r[0]) != cfg.freqs.size()))
    rd.error("field 'freqs': r must equal the number of frequencies");
  if (!(cfg.min_separation >= 0.0 && cfg.min_separation < 1.0)) rd.error("field 'min_separation': must lie in [0, 1)");
  for (auto r : cfg.r)
    if (cfg.min_separation * static_cast<double>(r) >= 1.0) rd.error("field 'min_separation': too large for r");
  if (cfg.mask != "full" && cfg.mask != "common-rows" && cfg.mask != "entrywise")
    rd.error("field 'mask': must be full, common-rows or entrywise");
  for (auto i : cfg.omega)
    if (i < 0 || i >= cfg.n) rd.error("field 'omega': index out of range");
  if (cfg.coefficients != "unit-phase" && cfg.coefficients != "gaussian" && cfg.coefficients != "orthogonal")
    rd.error("field 'coefficients': must be unit-phase, gaussian or orthogonal");
  if (cfg.coefficients == "orthogonal")
    for (auto L : cfg.L)
      for (auto r : cfg.r)
        if (L < r) rd.error("field 'coefficients': orthogonal rows need L >= r");
  if (cfg.trials < 0) rd.error("field 'trials': must be nonnegative");
  if (!(cfg.tau_scale > 0.0)) rd.error("field 'tau_scale': must be positive");
  if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) rd.error("field 'eps': must lie in (0, 1)");
  if (!(cfg.music_tol > 0.0)) rd.error("field 'music_tol': must be positive");
  if (cfg.oversampling < 1) rd.error("field 'oversampling': must be at least 1");
  if (!(cfg.mu_ratio > 0.0 && cfg.mu_ratio < 1.0)) rd.error("field 'mu_ratio': must lie in (0, 1)");

  const bool needs_noise = cfg.kind == ExperimentKind::Denoise || cfg.kind == ExperimentKind::PhaseTransition ||
                           cfg.kind == ExperimentKind::CrbCompare;
  if (needs_noise)
    for (double s : cfg.sigma)
      if (!(s > 0.0)) rd.error("field 'sigma': this experiment needs positive noise");
  if (cfg.kind == ExperimentKind::CrbCompare && (cfg.r.size() != 1 || cfg.r[0] != 2))
    rd.error("field 'r': crb-compare needs r = 2");
  if (cfg.kind == ExperimentKind::Covariance || cfg.kind == ExperimentKind::PhaseTransition ||
      cfg.kind == ExperimentKind::BaselineCompare) {
    if (cfg.mask == "entrywise") rd.error("field 'mask': covariance estimation needs common rows");
    if (cfg.lambda < 0.0) {
      for (auto L : cfg.L)
        if (L < 2) rd.error("field 'L': the lambda heuristic needs L >= 2");
      for (auto m : cfg.m)
        if (m < 2) rd.error("field 'm': the lambda heuristic needs m >= 2");
    }
  }
  if (!cfg.omega.empty() && (cfg.m.size() != 1 || static_cast<std::size_t>(cfg.m[0]) != cfg.omega.size()))
    rd.error("field 'omega': m must equal the number of indices");

  if (!rd.errors().empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : rd.errors()) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  cfg.effective = j;
  return cfg;
}

// ---------------------------------------------------------------- table

std::size_t Table::index_of(const std::string& name) const {
  for (std::size_t k = 0; k < columns_.size(); ++k)
    if (columns_[k].name == name) return k;
  throw DomainError("table: no column '" + name + "'");
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) throw DomainError("table: row width mismatch");
  rows_.push_back(std::move(row));
}

void Table::set_rows(std::vector<std::vector<Cell>> rows) {
  for (const auto& r : rows)
    if (r.size() != columns_.size()) throw DomainError("table: row width mismatch");
  rows_ = std::move(rows);
}

double Table::number(std::size_t row, const std::string& col) const {
  const Cell& c = rows_.at(row).at(index_of(col));
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* b = std::get_if<bool>(&c)) return *b ? 1.0 : 0.0;
  return kNaN;
}

bool Table::flag(std::size_t row, const std::string& col) const {
  const Cell& c = rows_.at(row).at(index_of(col));
  if (const auto* b = std::get_if<bool>(&c)) return *b;
  throw DomainError("table: column '" + col + "' is not a flag");
}

std::string Table::text(std::size_t row, const std::string& col) const {
  const Cell& c = rows_.at(row).at(index_of(col));
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  throw DomainError("table: column '" + col + "' is not text");
}

namespace {

std::string format_cell(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* b = std::get_if<bool>(&c)) return *b ? "1" : "0";
  if (const auto* d = std::get_if<double>(&c)) {
    if (std::isnan(*d)) return "nan";
    if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *d);
    return buf;
  }
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

}  // namespace

void Table::write_csv(std::ostream& os) const {
  for (std::size_t k = 0; k < columns_.size(); ++k) os << (k ? "," : "") << columns_[k].name;
  os << '\n';
  for (const auto& r : rows_) {
    for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << format_cell(r[k]);
    os << '\n';
  }
}

int default_thread_count() {
  if (const char* env = std::getenv("GRIDLESS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// ---------------------------------------------------------------- trials

namespace {

struct Point {
  Eigen::Index m, L, r;
  double sigma, delta;
};

std::vector<Point> sweep_points(const ExperimentConfig& cfg) {
  std::vector<Point> pts;
  const std::vector<double> deltas = cfg.delta.empty() ? std::vector<double>{kNaN} : cfg.delta;
  for (auto m : cfg.m)
    for (auto L : cfg.L)
      for (auto r : cfg.r)
        for (double s : cfg.sigma)
          for (double d : deltas) pts.push_back({m, L, r, s, d});
  return pts;
}

/// Named values of one trial; filled by the kind-specific routine and laid
/// out against the kind's schema afterwards.
class Record {
 public:
  void set(const std::string& k, Cell v) { vals_[k] = std::move(v); }
  const std::map<std::string, Cell>& values() const { return vals_; }

 private:
  std::map<std::string, Cell> vals_;
};

std::vector<Column> common_columns() {
  return {{"trial", ColumnType::Int, false}, {"trial_seed", ColumnType::Int, false}, {"n", ColumnType::Int, true},
          {"m", ColumnType::Int, true},      {"L", ColumnType::Int, true},           {"r", ColumnType::Int, true},
          {"sigma", ColumnType::Real, true}, {"delta", ColumnType::Real, true},       {"mask", ColumnType::Text, false},
          {"status", ColumnType::Text, false}};
}

std::vector<Column> kind_columns(ExperimentKind kind) {
  auto R = [](const char* n) { return Column{n, ColumnType::Real, false}; };
  auto I = [](const char* n) { return Column{n, ColumnType::Int, false}; };
  auto F = [](const char* n) { return Column{n, ColumnType::Flag, false}; };
  auto T = [](const char* n) { return Column{n, ColumnType::Text, false}; };
  switch (kind) {
    case ExperimentKind::Complete:
      return {R("min_sep"),  R("normalized_error"), F("success"),        I("iterations"),      F("converged"),
              R("dual_norm"), R("off_mask"),       I("peaks_found"),    R("max_peak_deviation"), F("certificate_ok")};
    case ExperimentKind::Denoise:
      return {R("tau"),         R("atomic_norm_star"), R("atomic_norm_gap"), R("mse"),        R("bound"),
              F("within_bound"), R("normalized_error"), I("iterations"),      F("converged"), R("duality_gap")};
    case ExperimentKind::Covariance:
      return {R("lambda"),   R("cov_error"),      I("iterations"),  F("converged"),   R("psd_repair"),
              R("freq_mse"), R("freq_max_error"), F("freq_success"), F("music_ok"),   R("eigen_gap"),
              R("projection_distance")};
    case ExperimentKind::PhaseTransition:
      return {R("tau"), I("atomic_found"), R("atomic_freq_mse"), F("atomic_success"), R("lambda"), R("cov_freq_mse"),
              F("cov_success")};
    case ExperimentKind::CrbCompare:
      return {R("tau"), I("found"), R("freq_mse"), R("crb"), R("crb_f1"), R("crb_f2"), F("freq_success")};
    case ExperimentKind::BaselineCompare:
      return {R("mu"),           I("gl_support"),     R("gl_freq_mse"),  F("gl_success"),   I("atomic_found"),
              R("atomic_freq_mse"), F("atomic_success"), R("lambda"),      R("cov_freq_mse"), R("cov_max_error"),
              F("cov_success")};
    case ExperimentKind::Localize:
      return {T("freqs"), T("ensemble_file"), T("covariance_file")};
  }
  return {};
}

struct Instance {
  FrequencySet freqs;
  CMatrix coeffs;
  CMatrix x_star;
  CMatrix noisy;
};

FrequencySet draw_frequencies(const ExperimentConfig& cfg, const Point& p, CounterRng& rng) {
  if (!cfg.freqs.empty()) return FrequencySet(cfg.freqs);
  if (!std::isnan(p.delta)) return FrequencySet({0.0, p.delta});
  return random_frequencies(p.r, cfg.min_separation, rng);
}

CMatrix draw_coefficients(const ExperimentConfig& cfg, Eigen::Index r, Eigen::Index L, CounterRng& rng) {
  CMatrix c(r, L);
  if (cfg.coefficients == "unit-phase") {
    for (Eigen::Index l = 0; l < L; ++l)
      for (Eigen::Index k = 0; k < r; ++k) c(k, l) = rng.unit_phase();
    return c;
  }
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index k = 0; k < r; ++k) c(k, l) = rng.complex_normal(1.0);
  if (cfg.coefficients == "orthogonal") {
    Eigen::HouseholderQR<CMatrix> qr(c.adjoint());
    const CMatrix q = qr.householderQ() * CMatrix::Identity(L, r);
    c = std::sqrt(static_cast<double>(L)) * q.adjoint();
  }
  return c;
}

Instance draw_instance(const ExperimentConfig& cfg, const Point& p, CounterRng& rng) {
  Instance inst;
  inst.freqs = draw_frequencies(cfg, p, rng);
  const auto r = static_cast<Eigen::Index>(inst.freqs.size());
  inst.coeffs = draw_coefficients(cfg, r, p.L, rng);
  inst.x_star = synthesize(inst.freqs, inst.coeffs, cfg.n);
  inst.noisy = inst.x_star;
  if (p.sigma > 0.0)
    for (Eigen::Index l = 0; l < p.L; ++l)
      for (Eigen::Index i = 0; i < cfg.n; ++i) inst.noisy(i, l) += rng.complex_normal(p.sigma * p.sigma);
  return inst;
}

ObservationMask draw_mask(const ExperimentConfig& cfg, const Point& p, CounterRng& rng) {
  if (cfg.mask == "full" || p.m == cfg.n) return ObservationMask::full(cfg.n, p.L);
  if (cfg.mask == "entrywise") return ObservationMask::random_per_column(cfg.n, p.L, p.m, rng);
  if (!cfg.omega.empty()) {
    std::vector<Eigen::Index> rows = cfg.omega;
    std::sort(rows.begin(), rows.end());
    return ObservationMask::common_rows(cfg.n, p.L, rows);
  }
  return ObservationMask::random_common_rows(cfg.n, p.L, p.m, rng);
}

std::vector<Eigen::Index> observed_rows(const ObservationMask& mask) {
  if (mask.kind() == ObservationMask::Kind::Full) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(mask.rows()));
    for (Eigen::Index i = 0; i < mask.rows(); ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  return mask.row_set();
}

double max_deviation(const FrequencySet& truth, const FrequencySet& est) {
  double worst = 0.0;
  for (double f : truth) {
    double best = 1.0;
    for (double g : est) best = std::min(best, wrap_distance(f, g));
    worst = std::max(worst, best);
  }
  return worst;
}

/// The r peaks with the largest dual-polynomial norm.
FrequencySet top_peaks(const CMatrix& y, Eigen::Index r, double eps, Eigen::Index* found) {
  std::vector<double> norms;
  const FrequencySet all = locate_frequencies(y, eps, 0, &norms);
  if (found) *found = static_cast<Eigen::Index>(all.size());
  std::vector<std::size_t> idx(all.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
  if (static_cast<Eigen::Index>(idx.size()) > r) idx.resize(static_cast<std::size_t>(r));
  std::vector<double> f;
  for (std::size_t k : idx) f.push_back(all[k]);
  return FrequencySet(f);
}

/// Atomic-norm frequency estimate from noisy (possibly masked) data.
FrequencySet atomic_estimate(const CMatrix& z, const ObservationMask& mask, double tau, Eigen::Index r, double eps,
                             const AdmmOptions& opts, Eigen::Index* found) {
  CMatrix y;
  if (mask.kind() == ObservationMask::Kind::Full) {
    const AtomicSolution sol = admm_denoise(z, tau, opts);
    y = (z - sol.X) / tau;
  } else {
    const CMatrix zo = mask_project(z, mask);
    const AtomicSolution sol = admm_denoise_masked(zo, mask, tau, opts);
    y = mask_project(zo - sol.X, mask) / tau;
  }
  return top_peaks(y, r, eps, found);
}

struct CovarianceRun {
  CovarianceEstimate est;
  FrequencySet freqs;
  SubspaceSplit split;
};

CovarianceRun covariance_estimate(const CMatrix& z, const ObservationMask& mask, Eigen::Index n, Eigen::Index r,
                                  double lambda, const AdmmOptions& opts) {
  const std::vector<Eigen::Index> rows = observed_rows(mask);
  CMatrix xo(static_cast<Eigen::Index>(rows.size()), z.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) xo.row(static_cast<Eigen::Index>(k)) = z.row(rows[k]);
  const CovarianceSample s = sample_covariance(xo, rows, n);
  CovarianceRun out;
  out.est = estimate_toeplitz(s, lambda, opts);
  out.freqs = root_music(out.est.u_hat, r, &out.split);
  return out;
}

double lambda_for(const ExperimentConfig& cfg, const Point& p, Eigen::Index m) {
  return cfg.lambda >= 0.0 ? cfg.lambda : lambda_heuristic(p.L, m);
}

void trial_complete(const ExperimentConfig& cfg, const Point& p, CounterRng& rng, Record& rec) {
  Instance inst = draw_instance(cfg, p, rng);
  const ObservationMask mask = draw_mask(cfg, p, rng);
  rec.set("min_sep", inst.freqs.size() > 1 ? min_separation(inst.freqs) : kNaN);
  const CMatrix z = mask_project(inst.noisy, mask);
  const AtomicSolution sol = admm_complete(z, mask, cfg.solver);
  const double err = normalized_error(sol.X, inst.x_star);
  rec.set("normalized_error", err);
  rec.set("success", recovery_success(err));
  rec.set("iterations", static_cast<std::int64_t>(sol.report.iterations));
  rec.set("converged", sol.report.converged);

  const Eigen::Index n = cfg.n;
  const CMatrix raw = -2.0 * sol.state.Lambda.topRightCorner(n, p.L);
  double off = 0.0;
  for (Eigen::Index l = 0; l < p.L; ++l)
    for (Eigen::Index i = 0; i < n; ++i)
      if (!mask.observed(i, l)) off = std::max(off, std::abs(raw(i, l)));
  const CMatrix y = mask_project(raw, mask);
  const double dn = dual_norm(y);
  const FrequencySet peaks = locate_frequencies(y, cfg.eps);
  const double dev = max_deviation(inst.freqs, peaks);
  rec.set("dual_norm", dn);
  rec.set("off_mask", off);
  rec.set("peaks_found", static_cast<std::int64_t>(peaks.size()));
  rec.set("max_peak_deviation", dev);
  rec.set("certificate_ok", dn <= 1.0 + 1e-3 && dev <= 1e-4);
}

void trial_denoise(const ExperimentConfig& cfg, const Point& p, CounterRng& rng, Record& rec) {
  Instance inst = draw_instance(cfg, p, rng);
  const double tau = cfg.tau_scale * tau_theorem3(p.sigma, cfg.n, p.L);
  rec.set("tau", tau);
  const AtomicSolution sol = admm_denoise(inst.noisy, tau, cfg.solver);
  const double mse = per_vector_mse(sol.X, inst.x_star);
  AdmmOptions an = AdmmOptions::completion_defaults();
  an.keep_history = false;
  const AtomicNormBound norm = atomic_norm(inst.x_star, an);
  const double bound = 2.0 * tau * norm.value / static_cast<double>(p.L);
  rec.set("atomic_norm_star", norm.value);
  rec.set("atomic_norm_gap", norm.relative_gap);
  rec.set("mse", mse);
  rec.set("bound", bound);
  rec.set("within_bound", mse <= bound);
  rec.set("normalized_error", normalized_error(sol.X, inst.x_star));
  rec.set("iterations", static_cast<std::int64_t>(sol.report.iterations));
  rec.set("converged", sol.report.converged);
  rec.set("duality_gap", sol.report.duality_gap);
}

void trial_covariance(const ExperimentConfig& cfg, const Point& p, CounterRng& rng, Record& rec) {
  Instance inst = draw_instance(cfg, p, rng);
  const ObservationMask mask = draw_mask(cfg, p, rng);
  const auto m = static_cast<Eigen::Index>(observed_rows(mask).size());
  const double lambda = lambda_for(cfg, p, m);
  rec.set("lambda", lambda);
  const std::vector<double> var(inst.freqs.size(), 1.0);
  const CovarianceRun run = covariance_estimate(inst.noisy, mask, cfg.n, p.r, lambda, cfg.covariance_solver);
  const ToeplitzSpec u_star = covariance_exact(inst.freqs, var, cfg.n);
  rec.set("cov_error", (run.est.u_hat.u() - u_star.u()).norm() / u_star.u().norm());
  rec.set("iterations", static_cast<std::int64_t>(run.est.report.iterations));
  rec.set("converged", run.est.report.converged);
  rec.set("psd_repair", run.est.psd_repair);
  const FrequencyScore sc = freq_mse(run.freqs, inst.freqs);
  rec.set("freq_mse", sc.mse);
  rec.set("freq_max_error", sc.max_error);
  rec.set("freq_success", sc.success);
  rec.set("music_ok", sc.cardinality_match && sc.max_error <= cfg.music_tol);
  rec.set("eigen_gap", run.split.eigen_gap);
  rec.set("projection_distance", run.split.projection_distance);
}

void trial_phase(const ExperimentConfig& cfg, const Point& p, CounterRng& rng, Record& rec) {
  Instance inst = draw_instance(cfg, p, rng);
  const ObservationMask mask = draw_mask(cfg, p, rng);
  const double tau = cfg.tau_scale * tau_theorem3(p.sigma, cfg.n, p.L);
  rec.set("tau", tau);
  try {
    Eigen::Index found = 0;
    const FrequencySet fa = atomic_estimate(inst.noisy, mask, tau, p.r, cfg.eps, cfg.solver, &found);
    const FrequencyScore sa = freq_mse(fa, inst.freqs);
    rec.set("atomic_found", static_cast<std::int64_t>(found));
    rec.set("atomic_freq_mse", sa.mse);
    rec.set("atomic_success", sa.success);
  } catch (const SolverError&) {
    rec.set("atomic_success", false);
  }
  const auto m = static_cast<Eigen::Index>(observed_rows(mask).size());
  const double lambda = lambda_for(cfg, p, m);
  rec.set("lambda", lambda);
  const CovarianceRun run = covariance_estimate(inst.noisy, mask, cfg.n, p.r, lambda, cfg.covariance_solver);
  const FrequencyScore sc = freq_mse(run.freqs, inst.freqs);
  rec.set("cov_freq_mse", sc.mse);
  rec.set("cov_success", sc.success);
}

void trial_crb(const ExperimentConfig& cfg, const Point& p, CounterRng& rng, Record& rec) {
  Instance inst = draw_instance(cfg, p, rng);
  const double tau = cfg.tau_scale * tau_theorem3(p.sigma, cfg.n, p.L);
  rec.set("tau", tau);
  CrbInput in;
  in.freqs = inst.freqs.values();
  in.coeffs = inst.coeffs;
  in.sigma = p.sigma;
  in.n = cfg.n;
  const RMatrix crb = fisher_crb(in);
  rec.set("crb_f1", crb(0, 0));
  rec.set("crb_f2", crb(1, 1));
  rec.set("crb", 0.5 * (crb(0, 0) + crb(1, 1)));
  Eigen::Index found = 0;
  const FrequencySet est =
      atomic_estimate(inst.noisy, ObservationMask::full(cfg.n, p.L), tau, 2, cfg.eps, cfg.solver, &found);
  rec.set("found", static_cast<std::int64_t>(found));
  const FrequencyScore sc = freq_mse(est, inst.freqs);
  rec.set("freq_mse", sc.mse);
  rec.set("freq_success", sc.success);
}

void trial_baseline(const ExperimentConfig& cfg, const Point& p, CounterRng& rng, Record& rec) {
  Instance inst = draw_instance(cfg, p, rng);
  const ObservationMask mask = draw_mask(cfg, p, rng);
  const CMatrix z = mask_project(inst.noisy, mask);

  // Group lasso on the oversampled DFT frame.
  {
    GroupLassoOptions go;
    go.keep_history = false;
    const double mu_max = group_lasso_mu_max(z, mask, cfg.oversampling);
    const double mu = cfg.mu_ratio * mu_max;
    rec.set("mu", mu);
    const GroupLassoResult gl = group_lasso_dft(z, mask, cfg.oversampling, mu, go);
    const RVector norms = group_row_norms(gl.G);
    const double top = norms.maxCoeff();
    rec.set("gl_support", static_cast<std::int64_t>((norms.array() > 1e-3 * top).count()));
    const FrequencyScore sg = freq_mse(grid_peak_frequencies(gl.G, p.r), inst.freqs);
    rec.set("gl_freq_mse", sg.mse);
    rec.set("gl_success", sg.success);
  }
  // Atomic norm: exact completion without noise, masked denoising with it.
  try {
    Eigen::Index found = 0;
    FrequencySet fa;
    if (p.sigma > 0.0) {
      const double tau = cfg.tau_scale * tau_theorem3(p.sigma, cfg.n, p.L);
      fa = atomic_estimate(inst.noisy, mask, tau, p.r, cfg.eps, cfg.solver, &found);
    } else {
      const AtomicSolution sol = admm_complete(z, mask, cfg.solver);
      const CMatrix y = mask_project(-2.0 * sol.state.Lambda.topRightCorner(cfg.n, p.L), mask);
      fa = top_peaks(y, p.r, cfg.eps, &found);
    }
    const FrequencyScore sa = freq_mse(fa, inst.freqs);
    rec.set("atomic_found", static_cast<std::int64_t>(found));
    rec.set("atomic_freq_mse", sa.mse);
    rec.set("atomic_success", sa.success);
  } catch (const SolverError&) {
    rec.set("atomic_success", false);
  }
  const auto m = static_cast<Eigen::Index>(observed_rows(mask).size());
  const double lambda = lambda_for(cfg, p, m);
  rec.set("lambda", lambda);
  const CovarianceRun run = covariance_estimate(inst.noisy, mask, cfg.n, p.r, lambda, cfg.covariance_solver);
  const FrequencyScore sc = freq_mse(run.freqs, inst.freqs);
  rec.set("cov_freq_mse", sc.mse);
  rec.set("cov_max_error", sc.max_error);
  rec.set("cov_success", sc.success);
}

void trial_localize(const ExperimentConfig& cfg, const Point& p, CounterRng& rng, Record& rec, std::size_t index,
                    const std::string& out_dir) {
  Instance inst = draw_instance(cfg, p, rng);
  const ObservationMask mask = draw_mask(cfg, p, rng);
  std::ostringstream fs;
  fs.precision(17);
  for (std::size_t k = 0; k < inst.freqs.size(); ++k) fs << (k ? ";" : "") << inst.freqs[k];
  rec.set("freqs", fs.str());
  if (out_dir.empty()) return;
  const std::string ens = "ensemble_" + std::to_string(index) + ".csv";
  const std::string cov = "covariance_" + std::to_string(index) + ".csv";
  {
    std::ofstream os(std::filesystem::path(out_dir) / ens);
    if (!os) throw IoError("cannot write '" + ens + "'");
    write_ensemble_csv(os, mask_project(inst.noisy, mask), mask);
  }
  {
    const std::vector<Eigen::Index> rows = observed_rows(mask);
    CMatrix xo(static_cast<Eigen::Index>(rows.size()), p.L);
    for (std::size_t k = 0; k < rows.size(); ++k) xo.row(static_cast<Eigen::Index>(k)) = inst.noisy.row(rows[k]);
    std::ofstream os(std::filesystem::path(out_dir) / cov);
    if (!os) throw IoError("cannot write '" + cov + "'");
    write_covariance_csv(os, sample_covariance(xo, rows, cfg.n));
  }
  rec.set("ensemble_file", ens);
  rec.set("covariance_file", cov);
}

Cell empty_cell(ColumnType t) {
  switch (t) {
    case ColumnType::Int:
      return std::int64_t{-1};
    case ColumnType::Real:
      return kNaN;
    case ColumnType::Flag:
      return false;
    case ColumnType::Text:
      return std::string();
  }
  return kNaN;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Table aggregate(const Table& trials, const std::vector<Point>& points, const ExperimentConfig& cfg) {
  std::vector<Column> cols;
  std::vector<std::size_t> metric_idx;
  for (const auto& c : trials.columns())
    if (c.key) cols.push_back(c);
  cols.push_back({"trials", ColumnType::Int, false});
  for (std::size_t k = 0; k < trials.columns().size(); ++k) {
    const Column& c = trials.columns()[k];
    if (c.key || c.name == "trial" || c.name == "trial_seed") continue;
    if (c.type == ColumnType::Real || c.type == ColumnType::Int) {
      cols.push_back({c.name + "_mean", ColumnType::Real, false});
      cols.push_back({c.name + "_median", ColumnType::Real, false});
      metric_idx.push_back(k);
    } else if (c.type == ColumnType::Flag) {
      cols.push_back({c.name + "_rate", ColumnType::Real, false});
      metric_idx.push_back(k);
    }
  }
  cols.push_back({"errors", ColumnType::Int, false});
  Table agg(cols);
  const auto trials_per = static_cast<std::size_t>(cfg.trials);
  const std::size_t status_col = trials.index_of("status");
  for (std::size_t pi = 0; pi < points.size() && trials_per > 0; ++pi) {
    const Point& p = points[pi];
    std::vector<Cell> row = {static_cast<std::int64_t>(cfg.n), static_cast<std::int64_t>(p.m),
                             static_cast<std::int64_t>(p.L), static_cast<std::int64_t>(p.r), p.sigma, p.delta,
                             static_cast<std::int64_t>(trials_per)};
    std::int64_t errors = 0;
    for (std::size_t t = 0; t < trials_per; ++t)
      if (std::get<std::string>(trials.row(pi * trials_per + t)[status_col]) != "ok") ++errors;
    for (std::size_t k : metric_idx) {
      const Column& c = trials.columns()[k];
      std::vector<double> vals;
      for (std::size_t t = 0; t < trials_per; ++t) {
        const Cell& cell = trials.row(pi * trials_per + t)[k];
        double v = kNaN;
        if (const auto* i = std::get_if<std::int64_t>(&cell)) v = *i < 0 ? kNaN : static_cast<double>(*i);
        if (const auto* d = std::get_if<double>(&cell)) v = *d;
        if (const auto* b = std::get_if<bool>(&cell)) v = *b ? 1.0 : 0.0;
        if (std::isfinite(v)) vals.push_back(v);
      }
      double mean = kNaN;
      if (!vals.empty()) {
        mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
      }
      if (c.type == ColumnType::Flag) {
        row.emplace_back(mean);
      } else {
        row.emplace_back(mean);
        row.emplace_back(median(vals));
      }
    }
    row.emplace_back(errors);
    agg.add_row(std::move(row));
  }
  return agg;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  const std::vector<Point> points = sweep_points(cfg);
  std::vector<Column> cols = common_columns();
  for (auto& c : kind_columns(cfg.kind)) cols.push_back(std::move(c));
  const auto trials_per = static_cast<std::size_t>(std::max(cfg.trials, 0));
  const std::size_t total = points.size() * trials_per;

  if (!opts.output_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(opts.output_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + opts.output_dir + "': " + ec.message());
  }

  std::vector<std::vector<Cell>> rows(total);
  std::vector<double> seconds(total, 0.0);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= total) return;
      const Point& p = points[idx / trials_per];
      const std::uint64_t tseed = cfg.seed ^ static_cast<std::uint64_t>(idx);
      CounterRng rng(tseed);
      Record rec;
      std::string status = "ok";
      const auto t0 = std::chrono::steady_clock::now();
      try {
        switch (cfg.kind) {
          case ExperimentKind::Complete:
            trial_complete(cfg, p, rng, rec);
            break;
          case ExperimentKind::Denoise:
            trial_denoise(cfg, p, rng, rec);
            break;
          case ExperimentKind::Covariance:
            trial_covariance(cfg, p, rng, rec);
            break;
          case ExperimentKind::PhaseTransition:
            trial_phase(cfg, p, rng, rec);
            break;
          case ExperimentKind::CrbCompare:
            trial_crb(cfg, p, rng, rec);
            break;
          case ExperimentKind::BaselineCompare:
            trial_baseline(cfg, p, rng, rec);
            break;
          case ExperimentKind::Localize:
            trial_localize(cfg, p, rng, rec, idx, opts.output_dir);
            break;
        }
      } catch (const std::exception& e) {
        status = std::string("error: ") + e.what();
      }
      seconds[idx] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      std::vector<Cell> row;
      row.reserve(cols.size());
      row.emplace_back(static_cast<std::int64_t>(idx % trials_per));
      row.emplace_back(static_cast<std::int64_t>(tseed));
      row.emplace_back(static_cast<std::int64_t>(cfg.n));
      row.emplace_back(static_cast<std::int64_t>(p.m));
      row.emplace_back(static_cast<std::int64_t>(p.L));
      row.emplace_back(static_cast<std::int64_t>(p.r));
      row.emplace_back(p.sigma);
      row.emplace_back(p.delta);
      row.emplace_back(cfg.mask);
      row.emplace_back(status);
      for (std::size_t k = row.size(); k < cols.size(); ++k) {
        const auto it = rec.values().find(cols[k].name);
        row.push_back(it == rec.values().end() ? empty_cell(cols[k].type) : it->second);
      }
      rows[idx] = std::move(row);
    }
  };
  int threads = opts.threads > 0 ? opts.threads : default_thread_count();
  threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), std::max<std::size_t>(total, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  RunResult res;
  res.trials = Table(cols);
  res.trials.set_rows(std::move(rows));
  res.aggregate = aggregate(res.trials, points, cfg);
  res.timings = Table({{"index", ColumnType::Int, false}, {"trial", ColumnType::Int, false}, {"seconds", ColumnType::Real, false}});
  for (std::size_t i = 0; i < total; ++i)
    res.timings.add_row({static_cast<std::int64_t>(i), static_cast<std::int64_t>(i % trials_per), seconds[i]});

  const std::string cfg_text = cfg.effective.dump();
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(cfg_text)));
  res.manifest = {{"tool", "gridless"},
                  {"version", library_version()},
                  {"kind", to_string(cfg.kind)},
                  {"seed", cfg.seed},
                  {"config_hash", std::string("fnv1a64:") + hash},
                  {"config", cfg.effective},
                  {"mask_kind", cfg.mask},
                  {"points", points.size()},
                  {"trials_per_point", trials_per},
                  {"threads", threads},
                  {"trial_seed_rule", "seed xor trial index"}};

  if (!opts.output_dir.empty()) {
    const std::filesystem::path dir(opts.output_dir);
    auto write = [&](const char* name, auto&& fn) {
      std::ofstream os(dir / name);
      if (!os) throw IoError("cannot write '" + (dir / name).string() + "'");
      fn(os);
      if (!os) throw IoError("write failed for '" + (dir / name).string() + "'");
    };
    write("trials.csv", [&](std::ostream& os) { res.trials.write_csv(os); });
    write("aggregate.csv", [&](std::ostream& os) { res.aggregate.write_csv(os); });
    write("timings.csv", [&](std::ostream& os) { res.timings.write_csv(os); });
    write("manifest.json", [&](std::ostream& os) { os << res.manifest.dump(2) << '\n'; });
  }
  return res;
}

}  // namespace gridless
