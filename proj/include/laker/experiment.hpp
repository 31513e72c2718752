#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "laker/cartography.hpp"
#include "laker/kernel.hpp"
#include "laker/precond.hpp"
#include "laker/solvers.hpp"

namespace laker {

inline const std::vector<std::string> kAllMethods = {"laker", "jacobi", "gd", "reference", "gprt"};

struct ExperimentConfig {
  std::vector<Index> sizes = {50, 200, 500, 1000, 2000};
  double lambda = kDefaultLambda;
  double gamma = 1e-1;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<std::string> methods = kAllMethods;
  std::string output_dir = "results";
  double pcg_tol = 1e-10;
  double target_tol = 1e-3;
  int gd_budget = 2000;
  double noise_std = 1.5;
  bool compute_kappa = true;
  bool write_histories = true;
  EmbeddingConfig embedding;
  FieldConfig field;
  GprtConfig gprt;
  CccpConfig cccp;  // gamma and seed are overridden per cell
  GridSpec grid;

  void validate() const;
};

// Throws InvalidConfig on unknown keys or wrongly typed values.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct ResultRow {
  Index n = 0;
  std::string method;
  std::uint64_t seed = 0;
  MetricsRecord metrics;
  std::vector<double> residual_history;
  std::vector<double> gap_history;
  std::string history_path;  // relative to the output directory, empty if none
  std::optional<std::string> error;  // set when the cell failed

  bool failed() const { return error.has_value(); }
};

/// Per-cell seeds. Changing the method list never changes another cell's draws.
std::uint64_t field_seed(std::uint64_t seed);
std::uint64_t measurement_seed(std::uint64_t seed, Index n);
std::uint64_t method_seed(std::uint64_t seed, Index n, std::string_view method);

/// Runs every (n, seed) group, then every method in that group. Rows come
/// back ordered by n, then method (config order), then seed. Cell failures
/// are recorded on the row instead of aborting the sweep.
/// Groups run on up to `threads` workers (LAKER_THREADS when unset).
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg,
                                      std::optional<unsigned> threads = std::nullopt);

/// numerical.csv, reconstruction.csv, summary.json and one history file per
/// iterative solve. Throws EmptyRows for an empty row set and Io on write errors.
void emit_tables(const std::vector<ResultRow>& rows, const std::filesystem::path& output_dir);

nlohmann::json summarize(const std::vector<ResultRow>& rows);

std::optional<double> median(std::vector<double> values);

}  // namespace laker
