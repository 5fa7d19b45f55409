// Command-line front end: exact counting, space sampling, experiment runs,
// and figure-data emission.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "allocmult/combinatorics.hpp"
#include "allocmult/data.hpp"
#include "allocmult/runner.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"allocation multiplicity simulator"};
  app.require_subcommand(1);

  // count
  auto* count_cmd = app.add_subcommand("count", "exact number of delta-equal-utility allocations");
  int n = 0, k = 0, n_prime = 0, k_prime = 0, delta = 0;
  count_cmd->add_option("--n", n, "candidates")->required();
  count_cmd->add_option("--k", k, "resources")->required();
  count_cmd->add_option("--n-prime", n_prime, "qualified candidates")->required();
  count_cmd->add_option("--k-prime", k_prime, "selected qualified under the baseline")->required();
  count_cmd->add_option("--delta", delta, "utility tolerance (default 0)");

  // sample-space
  auto* sample_cmd = app.add_subcommand("sample-space", "uniform draws from the equal-utility space");
  int draws = 1;
  std::uint64_t seed = 0;
  std::string pool_csv;
  int pool_q = 1;
  bool with_stats = false;
  sample_cmd->add_option("--n", n, "candidates (qualified ids are 0..n'-1)");
  sample_cmd->add_option("--k", k, "resources")->required();
  sample_cmd->add_option("--n-prime", n_prime, "qualified candidates");
  sample_cmd->add_option("--k-prime", k_prime, "selected qualified")->required();
  sample_cmd->add_option("--delta", delta, "utility tolerance (default 0)");
  sample_cmd->add_option("--draws", draws, "number of allocations to draw");
  sample_cmd->add_option("--seed", seed, "rng seed");
  sample_cmd->add_option("--pool", pool_csv, "optional pool CSV; supplies n, n' and the qualified ids");
  sample_cmd->add_option("--q", pool_q, "qualification threshold for --pool");
  sample_cmd->add_flag("--stats", with_stats, "include analytic marginals and consistency");

  // run
  auto* run_cmd = app.add_subcommand("run", "execute the full experiment protocol");
  std::string config_path, out_override;
  int threads = 0;
  double budget_scale = 1.0;
  run_cmd->add_option("--config", config_path, "experiment config JSON")->required();
  run_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
  run_cmd->add_option("--budget-scale", budget_scale, "scale factor for per-method budgets");
  run_cmd->add_option("--out", out_override, "override the output directory");

  // emit
  auto* emit_cmd = app.add_subcommand("emit", "write tidy CSV data for one figure");
  std::string figure_id, archive_dir;
  emit_cmd->add_option("--figure", figure_id, "figure id")->required();
  emit_cmd->add_option("--archive", archive_dir, "results archive directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (count_cmd->parsed()) {
      const allocmult::EqualUtilitySpace space{n, k, n_prime, k_prime, delta};
      json out;
      out["n"] = n;
      out["k"] = k;
      out["n_prime"] = n_prime;
      out["k_prime"] = k_prime;
      out["delta"] = delta;
      out["count"] = allocmult::count_equal_utility(space).str();
      std::cout << out.dump() << '\n';
      return 0;
    }

    if (sample_cmd->parsed()) {
      std::vector<std::uint8_t> qualified;
      if (!pool_csv.empty()) {
        const allocmult::CandidatePool pool = allocmult::load_csv(pool_csv, pool_q);
        n = pool.n();
        n_prime = pool.n_prime();
        qualified.assign(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i) qualified[static_cast<std::size_t>(i)] = pool.at(i).qualified ? 1 : 0;
      } else {
        if (n <= 0) throw CLI::ValidationError("--n (or --pool) is required");
        qualified.assign(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n_prime; ++i) qualified[static_cast<std::size_t>(i)] = 1;
      }
      const allocmult::EqualUtilitySpace space{n, k, n_prime, k_prime, delta};
      json out;
      out["space"] = {{"n", n}, {"k", k}, {"n_prime", n_prime}, {"k_prime", k_prime}, {"delta", delta}};
      out["count"] = allocmult::count_equal_utility(space).str();
      if (with_stats) {
        const auto stats = allocmult::analytic_space_stats(space);
        out["stats"] = {{"p_qualified", stats.p_qualified},
                        {"p_unqualified", stats.p_unqualified},
                        {"pairwise_consistency", stats.pairwise_consistency}};
      }
      json draws_json = json::array();
      for (int d = 0; d < draws; ++d) {
        const allocmult::Allocation alloc = allocmult::sample_equal_utility(
            space, qualified, allocmult::derive_seed(seed, {static_cast<std::uint64_t>(d)}));
        json selected = json::array();
        for (int i = 0; i < n; ++i) {
          if (alloc.outcomes[static_cast<std::size_t>(i)]) selected.push_back(i);
        }
        draws_json.push_back({{"selected", selected}, {"k_prime", *alloc.k_prime}});
      }
      out["draws"] = draws_json;
      std::cout << out.dump() << '\n';
      return 0;
    }

    if (run_cmd->parsed()) {
      allocmult::ExperimentConfig config = allocmult::load_experiment_config(config_path);
      if (threads > 0) config.threads = threads;
      config.budget_scale = budget_scale;
      if (!out_override.empty()) config.output_dir = out_override;
      const allocmult::ResultsArchive archive = allocmult::run_experiment(config);
      std::cout << "archive: " << archive.root.string() << '\n'
                << "metric rows: " << archive.rows.size() << '\n'
                << "failed cells: " << archive.failures.size() << '\n';
      for (const auto& failure : archive.failures) {
        std::cerr << "  q=" << failure.q << " partition=" << failure.partition
                  << " draw=" << failure.draw << ": " << failure.error << '\n';
      }
      return archive.failures.empty() ? 0 : 2;
    }

    if (emit_cmd->parsed()) {
      if (archive_dir.empty()) {
        if (const char* env = std::getenv("ALLOCMULT_OUT")) archive_dir = env;
        else archive_dir = "allocmult_out";
      }
      const auto path = allocmult::emit_plot_data(archive_dir, figure_id);
      std::cout << path.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
