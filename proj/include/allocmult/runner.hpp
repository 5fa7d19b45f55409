#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "allocmult/data.hpp"
#include "allocmult/domain.hpp"
#include "allocmult/learners.hpp"
#include "allocmult/rashomon.hpp"

namespace allocmult {

struct MethodBudgets {
  int feature_subsets = 100;
  int bootstrap = 100;
  int shuffle = 100;  // snapshot epochs
  int perturbation = 100;
};

// Mapping identifiers accepted in configs:
//   top_k | boundary(<k_frac>,<n_frac>) | sigmoid_logit(v=<v>)
struct MappingSpec {
  std::string id;
  enum class Kind { TopK, Boundary, SigmoidLogit } kind = Kind::TopK;
  double k_frac = 0.25;
  double n_frac = 0.50;
  double v = 2.0;
};

MappingSpec parse_mapping(const std::string& id);

struct ExperimentConfig {
  std::optional<std::string> csv_path;  // when absent, the generator is used
  GeneratorConfig generator;
  std::vector<double> selection_rates = {0.10, 0.25, 0.50};
  std::vector<int> q_values = {1, 2, 3};
  std::vector<SamplingMethod> methods = {SamplingMethod::FeatureSubsets, SamplingMethod::Bootstrap,
                                         SamplingMethod::Shuffle, SamplingMethod::Perturbation};
  std::vector<std::string> mappings = {"top_k", "boundary(0.25,0.50)", "boundary(0.50,1.00)",
                                       "sigmoid_logit(v=2)", "sigmoid_logit(v=5)"};
  double epsilon = 0.01;
  int delta = 0;
  MethodBudgets budgets;
  int lottery_draws = 100;  // stochastic allocations drawn per mapping and cell
  int space_samples = 100;  // equal-utility draws per cell
  SplitPlan split_plan;
  std::uint64_t master_seed = 12022;
  std::string output_dir;  // empty: $ALLOCMULT_OUT or ./allocmult_out
  TrainConfig base_mlp;
  TrainConfig base_scoring;
  PerturbationConfig perturbation;
  bool persist_first_samples = true;
  std::vector<int> risk_illness_levels = {0, 1, 2, 3, 4, 5, 6};
  double budget_scale = 1.0;
  int threads = 0;  // 0 = hardware concurrency

  ExperimentConfig();
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const ExperimentConfig& config, const std::filesystem::path& path);
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

struct MetricRow {
  double rate = 0.0;
  int q = 0;
  std::string source;   // method name, "baseline", or "equal_utility"
  std::string mapping;  // mapping id, "ensemble", "reference", "sample", "analytic"
  std::string metric;
  int reps = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct CellFailure {
  int q = 0;
  int partition = 0;
  int draw = -1;  // -1: the whole partition cell failed
  std::string error;
};

struct ResultsArchive {
  std::filesystem::path root;
  std::vector<MetricRow> rows;
  std::vector<CellFailure> failures;
};

/// Executes the full protocol and writes the archive:
///   <out>/manifest.json, <out>/metrics.csv,
///   <out>/samples/<method>/..., <out>/figures/...
ResultsArchive run_experiment(const ExperimentConfig& config);

std::vector<MetricRow> load_metrics(const std::filesystem::path& archive_root);

/// Writes one tidy CSV for a figure id into <archive>/figures; returns the
/// path. Valid ids: 1-count, table1, fig2, fig3b, fig4c, fig6.
std::filesystem::path emit_plot_data(const std::filesystem::path& archive_root,
                                     const std::string& figure_id);

const std::vector<std::string>& valid_figure_ids();

}  // namespace allocmult
