#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gridless/atomic_solver.hpp"
#include "gridless/common.hpp"

namespace gridless {

const char* library_version();

enum class ExperimentKind { Complete, Denoise, Covariance, PhaseTransition, CrbCompare, BaselineCompare, Localize };

const char* to_string(ExperimentKind kind);
/// Throws ValidationError for unknown names.
ExperimentKind parse_kind(const std::string& name);

/// One sweep configuration. List-valued fields are swept as a Cartesian
/// product in the order m, L, r, sigma, delta; every trial of every point
/// draws a fresh instance.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Complete;
  Eigen::Index n = 64;
  /// Observed rows per column; defaults to n.
  std::vector<Eigen::Index> m{};
  std::vector<Eigen::Index> L{1};
  std::vector<Eigen::Index> r{4};
  std::vector<double> sigma{0.0};
  /// Two-frequency separations f2 - f1 with f1 = 0; empty draws random sets.
  std::vector<double> delta;
  /// Fixed frequencies; overrides random draws when non-empty.
  std::vector<double> freqs;
  /// Minimum wrap-around separation for random frequencies (0 = uniform).
  double min_separation = 0.0;
  /// "full", "common-rows" or "entrywise" (m rows per column, drawn per column).
  std::string mask = "common-rows";
  /// Fixed common row set; overrides random rows when non-empty.
  std::vector<Eigen::Index> omega;
  /// "unit-phase", "gaussian" or "orthogonal" (rows with C C^* = L I).
  std::string coefficients = "gaussian";
  int trials = 20;
  std::uint64_t seed = 0;
  /// Covariance regularization; negative selects the heuristic.
  double lambda = -1.0;
  /// Multiplier on the denoising weight from tau_theorem3.
  double tau_scale = 1.0;
  /// Dual-polynomial peak threshold 1 - eps.
  double eps = 1e-3;
  /// root-MUSIC acceptance: all frequencies within this wrap-around distance.
  double music_tol = 5e-3;
  int oversampling = 4;
  /// Group-lasso weight as a fraction of the smallest weight giving G = 0.
  double mu_ratio = 0.05;
  AdmmOptions solver = AdmmOptions::completion_defaults();
  AdmmOptions covariance_solver;
  std::string output_dir = "out";

  /// Effective configuration after --full and command-line overrides.
  nlohmann::json effective;
};

/// Parses and validates. Unknown keys and every invalid field are reported
/// together in one ValidationError. A "full" object, if present, is merged
/// over the top level when full is true. seed_override replaces "seed";
/// the seed is otherwise mandatory.
ExperimentConfig parse_config(const nlohmann::json& j, bool full = false,
                              std::optional<std::uint64_t> seed_override = std::nullopt);

/// Reads a JSON file; IoError if unreadable or not JSON.
nlohmann::json load_json_file(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);

enum class ColumnType { Int, Real, Flag, Text };

struct Column {
  std::string name;
  ColumnType type;
  /// Sweep keys are grouped on; non-key numeric columns are aggregated.
  bool key = false;
};

using Cell = std::variant<std::int64_t, double, bool, std::string>;

class Table {
 public:
  Table() = default;
  explicit Table(std::vector<Column> columns) : columns_(std::move(columns)) {}

  const std::vector<Column>& columns() const { return columns_; }
  std::size_t size() const { return rows_.size(); }
  const std::vector<Cell>& row(std::size_t i) const { return rows_[i]; }
  std::size_t index_of(const std::string& name) const;

  void add_row(std::vector<Cell> row);
  void set_rows(std::vector<std::vector<Cell>> rows);

  double number(std::size_t row, const std::string& col) const;
  bool flag(std::size_t row, const std::string& col) const;
  std::string text(std::size_t row, const std::string& col) const;

  /// Header plus rows; reals with 17 significant digits, flags as 0/1.
  void write_csv(std::ostream& os) const;

 private:
  std::vector<Column> columns_;
  std::vector<std::vector<Cell>> rows_;
};

struct RunOptions {
  /// Empty disables file output.
  std::string output_dir;
  /// 0 selects GRIDLESS_THREADS, then hardware concurrency.
  int threads = 0;
};

struct RunResult {
  Table trials;
  Table aggregate;
  Table timings;
  nlohmann::json manifest;
};

/// Runs every trial (in parallel across trials) and aggregates per point:
/// count, mean and median of the finite values of real columns, rate of flag columns. Solver
/// exceptions are recorded in the trial's status column. With an output
/// directory, writes trials.csv, aggregate.csv, timings.csv and manifest.json.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Thread count from GRIDLESS_THREADS or the hardware, at least 1.
int default_thread_count();

}  // namespace gridless
