#pragma once

// Experiment configuration, the four experiment runners, result tables and
// CSV emission.

#include "npivlab/counterexamples.hpp"
#include "npivlab/dgp.hpp"
#include "npivlab/estimator.hpp"
#include "npivlab/function_space.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace npivlab {

inline constexpr const char* kVersion = "0.1.0";

enum class Experiment { illposedness_demo, svd_report, estimator_comparison, montecarlo };

std::string_view to_string(Experiment e);
Experiment experiment_from_string(std::string_view name);

struct GridSizes {
  std::size_t quadrature = 128;
  std::size_t inspection = 1001;
  std::size_t z = 128;
  /// Unset: normal_scores for the svd report, Gauss-Legendre otherwise.
  std::optional<GridRule> rule;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::illposedness_demo;
  DgpSpec dgp;
  GridSizes grids;
  Family family = Family::monotone;
  unsigned n_max = 100;
  double epsilon = 0.1;
  double ball_radius = 0.5;
  std::vector<double> lambdas{1e-4};
  /// Shape constraints for the constrained solver; empty means the family's
  /// own set (monotone: monotone; nonneg: nonnegative, monotone, convex).
  std::vector<std::string> constraints;
  double constraint_tolerance = 1e-6;
  Penalty penalty = Penalty::sobolev_first_order;
  std::vector<unsigned> perturbation_ns{0, 5, 10, 20, 50, 100};
  std::vector<std::size_t> svd_sizes{64, 128};
  std::vector<std::size_t> sample_sizes{10000};
  SampledMode bandwidths;
  std::vector<std::string> solvers{"naive", "tir", "constrained"};
  unsigned replications = 1;
  std::uint64_t seed = 20240601;
  std::string output;

  GridRule grid_rule() const;
  std::vector<ShapeConstraint> shape_constraints() const;
};

/// Defaults for an experiment; montecarlo drops the constrained solver.
ExperimentConfig default_config(Experiment e);

/// Throws ErrorCode::config naming the violated rule.
void validate(const ExperimentConfig& cfg);

/// Compact JSON with every field present.
std::string config_to_json(const ExperimentConfig& cfg);
/// Missing fields take the experiment's defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const std::string& text);
/// A JSON file, or a CSV emitted by emit_csv (its "# config:" line).
ExperimentConfig load_config(const std::string& path);
/// Sets one field by dotted path ("dgp.rho", "lambdas") to a JSON value;
/// values that do not parse as JSON are taken as strings.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

using Cell = std::variant<double, std::int64_t, bool, std::string>;

struct Postcondition {
  std::string name;
  bool ok = true;
  std::string detail;
};

class ResultTable {
 public:
  explicit ResultTable(std::vector<std::string> columns = {});

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }
  std::size_t row_count() const { return rows_.size(); }
  /// Throws invalid_argument if the width differs from the header.
  void add_row(std::vector<Cell> row);
  std::size_t column_index(std::string_view name) const;
  double number(std::size_t row, std::string_view column) const;
  const std::string& text(std::size_t row, std::string_view column) const;

  const std::vector<std::pair<std::string, std::string>>& metadata() const { return metadata_; }
  void add_metadata(std::string key, std::string value);

  const std::vector<Postcondition>& postconditions() const { return post_; }
  void add_postcondition(std::string name, bool ok, std::string detail = {});
  bool postconditions_ok() const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
  std::vector<std::pair<std::string, std::string>> metadata_;
  std::vector<Postcondition> post_;
};

std::string format_cell(const Cell& c);

/// Metadata lines ('# key: value'), then the header and the rows. The
/// '# generated_at:' line is omitted when `timestamp` is false.
std::string to_csv(const ResultTable& table, bool timestamp = true);
void emit_csv(const ResultTable& table, const std::string& path);

/// Parses the data part of an emitted CSV (comment lines skipped).
struct ParsedCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;
};
ParsedCsv parse_csv(const std::string& text);

ResultTable run_illposedness_demo(const ExperimentConfig& cfg);
ResultTable run_svd_report(const ExperimentConfig& cfg);
ResultTable run_estimator_comparison(const ExperimentConfig& cfg);
ResultTable run_montecarlo(const ExperimentConfig& cfg);
ResultTable run_experiment(const ExperimentConfig& cfg);

/// NPIVLAB_THREADS, 0 or unset meaning hardware concurrency.
unsigned worker_count();
/// Runs body(i) for i in [0, n) on up to worker_count() threads; the first
/// exception is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace npivlab
