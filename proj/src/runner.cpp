#include "allocmult/runner.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "allocmult/combinatorics.hpp"
#include "allocmult/mappings.hpp"
#include "allocmult/metrics.hpp"
#include "allocmult/rng.hpp"

namespace allocmult {

using nlohmann::json;

ExperimentConfig::ExperimentConfig() {
  base_mlp.family = ModelFamily::Mlp;
  base_mlp.hidden_sizes = {32};
  base_mlp.learning_rate = 0.05;
  base_mlp.epochs = 20;
  base_mlp.batch_size = 128;
  base_mlp.l2 = 1e-4;
  base_mlp.standardize_columns = schema::cost_columns();

  base_scoring.family = ModelFamily::ScoringSystem;
  base_scoring.learning_rate = 0.5;
  base_scoring.epochs = 60;
  base_scoring.batch_size = 0;  // full batch
  base_scoring.l2 = 1e-4;
  base_scoring.coefficient_bound = 5;
  base_scoring.max_features = 8;
  base_scoring.standardize_columns = schema::cost_columns();
}

MappingSpec parse_mapping(const std::string& id) {
  MappingSpec spec;
  spec.id = id;
  if (id == "top_k") {
    spec.kind = MappingSpec::Kind::TopK;
    return spec;
  }
  if (id.rfind("boundary(", 0) == 0 && id.back() == ')') {
    spec.kind = MappingSpec::Kind::Boundary;
    const std::string args = id.substr(9, id.size() - 10);
    const auto comma = args.find(',');
    if (comma == std::string::npos) throw DataError("bad boundary mapping id: " + id);
    spec.k_frac = std::stod(args.substr(0, comma));
    spec.n_frac = std::stod(args.substr(comma + 1));
    return spec;
  }
  if (id.rfind("sigmoid_logit(v=", 0) == 0 && id.back() == ')') {
    spec.kind = MappingSpec::Kind::SigmoidLogit;
    spec.v = std::stod(id.substr(16, id.size() - 17));
    return spec;
  }
  throw DataError("unknown mapping id: " + id +
                  " (expected top_k, boundary(kf,nf), or sigmoid_logit(v=V))");
}

// ---------------------------------------------------------------------------
// config (de)serialization

namespace {

json to_json(const TrainConfig& c) {
  json j;
  j["family"] = to_string(c.family);
  j["hidden_sizes"] = c.hidden_sizes;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["l2"] = c.l2;
  j["coefficient_bound"] = c.coefficient_bound;
  j["max_features"] = c.max_features;
  return j;
}

void train_config_from_json(const json& j, TrainConfig& c) {
  if (j.contains("family")) {
    const std::string f = j["family"].get<std::string>();
    if (f == "logistic") c.family = ModelFamily::Logistic;
    else if (f == "mlp") c.family = ModelFamily::Mlp;
    else if (f == "scoring_system") c.family = ModelFamily::ScoringSystem;
    else throw DataError("unknown model family: " + f);
  }
  if (j.contains("hidden_sizes")) c.hidden_sizes = j["hidden_sizes"].get<std::vector<int>>();
  if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("l2")) c.l2 = j["l2"].get<double>();
  if (j.contains("coefficient_bound")) c.coefficient_bound = j["coefficient_bound"].get<int>();
  if (j.contains("max_features")) c.max_features = j["max_features"].get<int>();
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  if (c.csv_path) j["csv_path"] = *c.csv_path;
  j["generator"] = {
      {"population", c.generator.population},
      {"seed", c.generator.seed},
      {"bias_mode", c.generator.bias_mode == BiasMode::CostProxyBias ? "cost_proxy_bias" : "unbiased"},
      {"black_fraction", c.generator.black_fraction},
      {"white_fraction", c.generator.white_fraction},
      {"cost_deflation", c.generator.cost_deflation},
  };
  j["selection_rates"] = c.selection_rates;
  j["q_values"] = c.q_values;
  json methods = json::array();
  for (SamplingMethod m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["mappings"] = c.mappings;
  j["epsilon"] = c.epsilon;
  j["delta"] = c.delta;
  j["budgets"] = {{"feature_subsets", c.budgets.feature_subsets},
                  {"bootstrap", c.budgets.bootstrap},
                  {"shuffle", c.budgets.shuffle},
                  {"perturbation", c.budgets.perturbation}};
  j["lottery_draws"] = c.lottery_draws;
  j["space_samples"] = c.space_samples;
  j["split_plan"] = {{"train_frac", c.split_plan.train_frac},
                     {"validation_frac", c.split_plan.validation_frac},
                     {"test_frac", c.split_plan.test_frac},
                     {"num_partitions", c.split_plan.num_partitions},
                     {"draws_per_partition", c.split_plan.draws_per_partition},
                     {"pool_size", c.split_plan.pool_size},
                     {"seed", c.split_plan.seed}};
  j["master_seed"] = c.master_seed;
  j["output_dir"] = c.output_dir;
  j["base_mlp"] = to_json(c.base_mlp);
  j["base_scoring"] = to_json(c.base_scoring);
  j["perturbation"] = {{"step", c.perturbation.step},
                       {"max_steps", c.perturbation.max_steps}};
  j["persist_first_samples"] = c.persist_first_samples;
  j["risk_illness_levels"] = c.risk_illness_levels;
  j["threads"] = c.threads;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("csv_path")) c.csv_path = j["csv_path"].get<std::string>();
  if (j.contains("generator")) {
    const json& g = j["generator"];
    if (g.contains("population")) c.generator.population = g["population"].get<int>();
    if (g.contains("seed")) c.generator.seed = g["seed"].get<std::uint64_t>();
    if (g.contains("bias_mode")) {
      const std::string mode = g["bias_mode"].get<std::string>();
      if (mode == "cost_proxy_bias") c.generator.bias_mode = BiasMode::CostProxyBias;
      else if (mode == "unbiased") c.generator.bias_mode = BiasMode::Unbiased;
      else throw DataError("unknown bias mode: " + mode);
    }
    if (g.contains("black_fraction")) c.generator.black_fraction = g["black_fraction"].get<double>();
    if (g.contains("white_fraction")) c.generator.white_fraction = g["white_fraction"].get<double>();
    if (g.contains("cost_deflation")) c.generator.cost_deflation = g["cost_deflation"].get<double>();
  }
  if (j.contains("selection_rates")) c.selection_rates = j["selection_rates"].get<std::vector<double>>();
  if (j.contains("q_values")) c.q_values = j["q_values"].get<std::vector<int>>();
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& name : j["methods"]) {
      c.methods.push_back(sampling_method_from_string(name.get<std::string>()));
    }
  }
  if (j.contains("mappings")) c.mappings = j["mappings"].get<std::vector<std::string>>();
  if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
  if (j.contains("delta")) c.delta = j["delta"].get<int>();
  if (j.contains("budgets")) {
    const json& b = j["budgets"];
    if (b.contains("feature_subsets")) c.budgets.feature_subsets = b["feature_subsets"].get<int>();
    if (b.contains("bootstrap")) c.budgets.bootstrap = b["bootstrap"].get<int>();
    if (b.contains("shuffle")) c.budgets.shuffle = b["shuffle"].get<int>();
    if (b.contains("perturbation")) c.budgets.perturbation = b["perturbation"].get<int>();
  }
  if (j.contains("lottery_draws")) c.lottery_draws = j["lottery_draws"].get<int>();
  if (j.contains("space_samples")) c.space_samples = j["space_samples"].get<int>();
  if (j.contains("split_plan")) {
    const json& s = j["split_plan"];
    if (s.contains("train_frac")) c.split_plan.train_frac = s["train_frac"].get<double>();
    if (s.contains("validation_frac")) c.split_plan.validation_frac = s["validation_frac"].get<double>();
    if (s.contains("test_frac")) c.split_plan.test_frac = s["test_frac"].get<double>();
    if (s.contains("num_partitions")) c.split_plan.num_partitions = s["num_partitions"].get<int>();
    if (s.contains("draws_per_partition")) c.split_plan.draws_per_partition = s["draws_per_partition"].get<int>();
    if (s.contains("pool_size")) c.split_plan.pool_size = s["pool_size"].get<int>();
    if (s.contains("seed")) c.split_plan.seed = s["seed"].get<std::uint64_t>();
  }
  if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("base_mlp")) train_config_from_json(j["base_mlp"], c.base_mlp);
  if (j.contains("base_scoring")) train_config_from_json(j["base_scoring"], c.base_scoring);
  if (j.contains("perturbation")) {
    const json& p = j["perturbation"];
    if (p.contains("step")) c.perturbation.step = p["step"].get<double>();
    if (p.contains("max_steps")) c.perturbation.max_steps = p["max_steps"].get<int>();
  }
  if (j.contains("persist_first_samples")) c.persist_first_samples = j["persist_first_samples"].get<bool>();
  if (j.contains("risk_illness_levels")) c.risk_illness_levels = j["risk_illness_levels"].get<std::vector<int>>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();
  return c;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  return config_from_json(json::parse(in));
}

void save_experiment_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config " + path.string());
  out << config_to_json(config).dump(2) << '\n';
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv("ALLOCMULT_OUT")) return env;
  return "allocmult_out";
}

// ---------------------------------------------------------------------------
// metric accumulation

namespace {

using MetricKey = std::tuple<double, int, std::string, std::string, std::string>;

struct Accumulator {
  std::map<MetricKey, std::vector<double>> values;

  void add(double rate, int q, const std::string& source, const std::string& mapping,
           const std::string& metric, double value) {
    values[{rate, q, source, mapping, metric}].push_back(value);
  }
  void merge(Accumulator&& other) {
    for (auto& [key, vec] : other.values) {
      auto& dest = values[key];
      dest.insert(dest.end(), vec.begin(), vec.end());
    }
  }
};

struct AgeHistKey {
  double rate;
  int q;
  std::string source;
  auto operator<=>(const AgeHistKey&) const = default;
};

struct AgeHist {
  std::map<AgeHistKey, std::pair<std::array<double, kAgeBrackets>, long>> shares;

  void add(double rate, int q, const std::string& source, const Allocation& alloc,
           const CandidatePool& pool) {
    auto& [sums, count] = shares[{rate, q, source}];
    std::array<double, kAgeBrackets> bracket_counts{};
    int selected = 0;
    for (int i = 0; i < pool.n(); ++i) {
      if (alloc.outcomes[static_cast<std::size_t>(i)]) {
        ++bracket_counts[static_cast<std::size_t>(pool.at(i).age_bracket)];
        ++selected;
      }
    }
    if (selected == 0) return;
    for (int b = 0; b < kAgeBrackets; ++b) sums[static_cast<std::size_t>(b)] += bracket_counts[static_cast<std::size_t>(b)] / selected;
    ++count;
  }
  void merge(AgeHist&& other) {
    for (auto& [key, value] : other.shares) {
      auto& dest = shares[key];
      for (int b = 0; b < kAgeBrackets; ++b) dest.first[static_cast<std::size_t>(b)] += value.first[static_cast<std::size_t>(b)];
      dest.second += value.second;
    }
  }
};

struct TaskResult {
  Accumulator acc;
  AgeHist hist;
  std::vector<CellFailure> failures;
  json fig6;  // non-null only for the designated snapshot cell
};

struct TaskContext {
  const ExperimentConfig* config;
  const std::vector<CandidatePool>* populations;  // one per q value
  const std::vector<SplitTriple>* splits;
  std::filesystem::path output_root;
  int scaled_feature_subsets;
  int scaled_bootstrap;
  int scaled_shuffle;
  int scaled_perturbation;
};

int scaled_budget(int budget, double scale) {
  return std::max(1, static_cast<int>(std::lround(budget * scale)));
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double total = 0.0;
  for (double x : v) total += (x - mean) * (x - mean);
  return std::sqrt(total / static_cast<double>(v.size() - 1));
}

// Allocations from every retained model under the top-k mapping.
std::vector<Allocation> recovered_allocations(const RashomonSample& sample, int k,
                                              const CandidatePool& pool) {
  std::vector<Allocation> allocs;
  allocs.reserve(sample.members.size());
  for (const PredictionVector& member : sample.members) {
    Allocation alloc = top_k(member, k);
    allocation_utility(alloc, pool);
    allocs.push_back(std::move(alloc));
  }
  return allocs;
}

void add_allocation_set_metrics(Accumulator& acc, double rate, int q, const std::string& source,
                                const std::string& mapping, const std::vector<Allocation>& allocs,
                                const CandidatePool& pool) {
  if (allocs.empty()) return;
  double utility_sum = 0.0, entropy_sum = 0.0;
  double min_ratio = 0.0;
  bool have_ratio = false;
  for (const Allocation& alloc : allocs) {
    utility_sum += allocation_utility(alloc, pool);
    entropy_sum += age_entropy(alloc, pool);
    const auto ratio = threshold_test_ratio_or_missing(alloc, pool);
    if (ratio && (!have_ratio || *ratio < min_ratio)) {
      min_ratio = *ratio;
      have_ratio = true;
    }
  }
  acc.add(rate, q, source, mapping, "utility", utility_sum / static_cast<double>(allocs.size()));
  acc.add(rate, q, source, mapping, "age_entropy", entropy_sum / static_cast<double>(allocs.size()));
  if (have_ratio) acc.add(rate, q, source, mapping, "min_threshold_ratio", min_ratio);
  acc.add(rate, q, source, mapping, "n_recovered", unique_allocations(allocs));
  if (allocs.size() >= 2) {
    acc.add(rate, q, source, mapping, "pairwise_consistency", pairwise_consistency(allocs));
    const OutcomeProfile profile = outcome_profile(allocs, pool);
    acc.add(rate, q, source, mapping, "systemic_rejection", profile.systemic_rejection);
    acc.add(rate, q, source, mapping, "multiple_outcomes", profile.multiple_outcomes);
    acc.add(rate, q, source, mapping, "always_accepted", profile.always_accepted);
  }
}

// One (q, partition) cell: trains the per-method model sets once, then walks
// draws, selection rates, and mappings.
TaskResult run_cell(const TaskContext& ctx, std::size_t q_index, int partition) {
  TaskResult result;
  const ExperimentConfig& config = *ctx.config;
  const int q = config.q_values[q_index];
  const CandidatePool& population = (*ctx.populations)[q_index];
  const std::uint64_t qi = static_cast<std::uint64_t>(q_index);
  const std::uint64_t pi = static_cast<std::uint64_t>(partition);

  // gather this partition's splits
  std::vector<const SplitTriple*> draws;
  for (const SplitTriple& triple : *ctx.splits) {
    if (triple.partition == partition) draws.push_back(&triple);
  }
  const LabeledData train_split = gather_data(population, draws.front()->train_idx);
  const LabeledData val_split = gather_data(population, draws.front()->validation_idx);

  // baseline network: perturbation base and the stochastic-mapping model
  TrainConfig baseline_config = config.base_mlp;
  baseline_config.seed = derive_seed(config.master_seed, {qi, pi, 0});
  const TrainedModel baseline = train(baseline_config, train_split, val_split);

  struct MethodModels {
    SamplingMethod method;
    std::vector<TrainedModel> models;
  };
  std::vector<MethodModels> method_models;
  for (SamplingMethod method : config.methods) {
    const std::uint64_t ms = derive_seed(config.master_seed, {qi, pi, 1 + static_cast<std::uint64_t>(method)});
    switch (method) {
      case SamplingMethod::FeatureSubsets:
        method_models.push_back({method, sample_feature_subsets(config.base_scoring, train_split,
                                                                val_split, ctx.scaled_feature_subsets, ms)});
        break;
      case SamplingMethod::Bootstrap:
        method_models.push_back({method, sample_bootstrap(config.base_mlp, train_split, val_split,
                                                          ctx.scaled_bootstrap, ms)});
        break;
      case SamplingMethod::Shuffle:
        method_models.push_back({method, sample_shuffle(config.base_mlp, train_split, val_split,
                                                        ctx.scaled_shuffle, ms)});
        break;
      case SamplingMethod::Perturbation: {
        PerturbationConfig pcfg = config.perturbation;
        pcfg.epsilon = config.epsilon;
        method_models.push_back({method, sample_weight_perturbation(baseline, train_split, val_split,
                                                                    ctx.scaled_perturbation, pcfg, ms)});
        break;
      }
      case SamplingMethod::Baseline:
        break;  // always available via `baseline`
    }
  }

  // keep only models within epsilon of each method's best validation loss
  struct MethodRetained {
    SamplingMethod method;
    std::vector<const TrainedModel*> retained;
    double best_loss;
  };
  std::vector<MethodRetained> retained_sets;
  for (const MethodModels& mm : method_models) {
    if (mm.models.empty()) {
      result.failures.push_back({q, partition, -1, to_string(mm.method) + ": no models produced"});
      continue;
    }
    MethodRetained r;
    r.method = mm.method;
    r.best_loss = mm.models.front().validation_loss;
    for (const TrainedModel& model : mm.models) r.best_loss = std::min(r.best_loss, model.validation_loss);
    for (const TrainedModel& model : mm.models) {
      if (model.validation_loss <= r.best_loss + config.epsilon) r.retained.push_back(&model);
    }
    retained_sets.push_back(std::move(r));
  }

  const bool snapshot_cell = q_index == 0 && partition == 0;

  for (std::size_t d = 0; d < draws.size(); ++d) {
    try {
      const SplitTriple& triple = *draws[d];
      const CandidatePool pool = gather_pool(population, triple.pool_idx);
      const std::uint64_t di = static_cast<std::uint64_t>(d);

      // materialize each method's Rashomon sample on this pool
      std::vector<std::pair<SamplingMethod, RashomonSample>> samples;
      for (const MethodRetained& r : retained_sets) {
        std::vector<PredictionVector> preds;
        preds.reserve(r.retained.size());
        for (const TrainedModel* model : r.retained) {
          PredictionVector pred = predict(*model, pool);
          pred.method_tag = r.method;
          preds.push_back(std::move(pred));
        }
        samples.emplace_back(r.method, filter_epsilon(std::move(preds), config.epsilon));
      }
      PredictionVector baseline_pred = predict(baseline, pool);
      baseline_pred.method_tag = SamplingMethod::Baseline;

      if (snapshot_cell && d == 0 && config.persist_first_samples) {
        for (const auto& [method, sample] : samples) {
          save_sample(sample, method, ctx.output_root / "samples" / to_string(method),
                      config.master_seed);
        }
      }
      if (snapshot_cell && d == 0) {
        // risk-score snapshot for the grouped distribution figure
        const RashomonSample* fig_sample = nullptr;
        std::string fig_method;
        for (const auto& [method, sample] : samples) {
          if (method == SamplingMethod::Bootstrap || fig_sample == nullptr) {
            fig_sample = &sample;
            fig_method = to_string(method);
            if (method == SamplingMethod::Bootstrap) break;
          }
        }
        if (fig_sample != nullptr) {
          json fig;
          fig["q"] = q;
          fig["method"] = fig_method;
          json levels = json::object();
          for (int level : config.risk_illness_levels) {
            const auto groups = risk_by_group(*fig_sample, pool, level);
            json per_race = json::object();
            for (const auto& [race, summary] : groups) {
              per_race[to_string(race)] = {{"count", summary.count},   {"mean", summary.mean},
                                           {"stddev", summary.stddev}, {"q05", summary.q05},
                                           {"q25", summary.q25},       {"q50", summary.q50},
                                           {"q75", summary.q75},       {"q95", summary.q95}};
            }
            levels[std::to_string(level)] = per_race;
          }
          fig["levels"] = levels;
          result.fig6 = fig;
        }
      }

      // per-method risk-score means at each configured illness level
      for (const auto& [method, sample] : samples) {
        for (int level : config.risk_illness_levels) {
          for (const auto& [race, summary] : risk_by_group(sample, pool, level)) {
            result.acc.add(0.0, q, to_string(method), "risk_by_group",
                           "mean_score:" + to_string(race) + "@" + std::to_string(level),
                           summary.mean);
          }
        }
      }

      for (std::size_t ri = 0; ri < config.selection_rates.size(); ++ri) {
        const double rate = config.selection_rates[ri];
        const int k = std::max(1, static_cast<int>(std::lround(rate * pool.n())));
        const std::uint64_t rseed = derive_seed(config.master_seed, {qi, pi, di, 10 + ri});

        std::vector<double> method_mean_utils;
        for (const auto& [method, sample] : samples) {
          const std::string source = to_string(method);
          result.acc.add(rate, q, source, "top_k", "n_models", static_cast<double>(sample.members.size()));
          double loss_sum = 0.0;
          for (const PredictionVector& member : sample.members) loss_sum += member.validation_loss;
          result.acc.add(rate, q, source, "top_k", "validation_loss",
                         loss_sum / static_cast<double>(sample.members.size()));

          const std::vector<Allocation> allocs = recovered_allocations(sample, k, pool);
          add_allocation_set_metrics(result.acc, rate, q, source, "top_k", allocs, pool);

          double util_sum = 0.0;
          for (const Allocation& alloc : allocs) util_sum += static_cast<double>(*alloc.k_prime) / alloc.k;
          method_mean_utils.push_back(util_sum / static_cast<double>(allocs.size()));

          // ensemble of the sample
          Allocation ens = ensemble_allocation(sample, k);
          allocation_utility(ens, pool);
          result.acc.add(rate, q, source, "ensemble", "utility",
                         static_cast<double>(*ens.k_prime) / ens.k);
          result.acc.add(rate, q, source, "ensemble", "age_entropy", age_entropy(ens, pool));
          const auto ens_ratio = threshold_test_ratio_or_missing(ens, pool);
          if (ens_ratio) result.acc.add(rate, q, source, "ensemble", "threshold_ratio", *ens_ratio);
          result.hist.add(rate, q, "ensemble:" + source, ens, pool);
        }

        // baseline top-k and the stochastic mappings
        {
          Allocation base_alloc = top_k(baseline_pred, k);
          allocation_utility(base_alloc, pool);
          std::vector<Allocation> single = {base_alloc};
          add_allocation_set_metrics(result.acc, rate, q, "baseline", "top_k", single, pool);
          result.hist.add(rate, q, "baseline:top_k", base_alloc, pool);
        }
        for (std::size_t mi = 0; mi < config.mappings.size(); ++mi) {
          const MappingSpec spec = parse_mapping(config.mappings[mi]);
          if (spec.kind == MappingSpec::Kind::TopK) continue;  // covered above
          std::vector<Allocation> allocs;
          allocs.reserve(static_cast<std::size_t>(config.lottery_draws));
          for (int t = 0; t < config.lottery_draws; ++t) {
            const std::uint64_t seed = derive_seed(rseed, {100 + mi, static_cast<std::uint64_t>(t)});
            if (spec.kind == MappingSpec::Kind::Boundary) {
              LotteryConfig lottery = LotteryConfig::boundary(k, spec.k_frac, spec.n_frac, seed);
              if (k - lottery.k_tilde + lottery.n_tilde > pool.n()) continue;  // infeasible at this k
              allocs.push_back(boundary_lottery(baseline_pred, k, lottery));
            } else {
              LotteryConfig lottery = LotteryConfig::sigmoid_logit(k, pool.n(), spec.v, seed);
              if (!(lottery.mu > 0.0 && lottery.mu < 1.0)) continue;
              allocs.push_back(sigmoid_logit_lottery(baseline_pred, k, lottery));
            }
          }
          add_allocation_set_metrics(result.acc, rate, q, "baseline", spec.id, allocs, pool);
        }

        // the equal-utility reference: k' from the mean recovered utility
        if (!method_mean_utils.empty()) {
          const double mean_util = mean_of(method_mean_utils);
          int k_prime = static_cast<int>(std::floor(mean_util * k));
          k_prime = std::min({k_prime, k, pool.n_prime()});
          k_prime = std::max(k_prime, k - (pool.n() - pool.n_prime()));
          k_prime = std::max(k_prime, 0);
          const EqualUtilitySpace space{pool.n(), k, pool.n_prime(), k_prime, config.delta};

          result.acc.add(rate, q, "equal_utility", "analytic", "k_prime", k_prime);
          if (config.delta == 0) {
            const SpaceStats stats = analytic_space_stats(space);
            result.acc.add(rate, q, "equal_utility", "analytic", "pairwise_consistency",
                           stats.pairwise_consistency);
            result.acc.add(rate, q, "equal_utility", "analytic", "p_qualified", stats.p_qualified);
            result.acc.add(rate, q, "equal_utility", "analytic", "p_unqualified", stats.p_unqualified);
          }

          std::vector<Allocation> space_allocs;
          space_allocs.reserve(static_cast<std::size_t>(config.space_samples));
          for (int t = 0; t < config.space_samples; ++t) {
            Allocation alloc = sample_equal_utility(space, pool,
                                                    derive_seed(rseed, {7000, static_cast<std::uint64_t>(t)}));
            result.hist.add(rate, q, "equal_utility", alloc, pool);
            space_allocs.push_back(std::move(alloc));
          }
          add_allocation_set_metrics(result.acc, rate, q, "equal_utility", "sample", space_allocs, pool);

          Allocation reference = reference_least_discriminatory(pool, k, k_prime);
          allocation_utility(reference, pool);
          result.acc.add(rate, q, "equal_utility", "reference", "utility",
                         static_cast<double>(*reference.k_prime) / reference.k);
          const auto ref_ratio = threshold_test_ratio_or_missing(reference, pool);
          if (ref_ratio) {
            result.acc.add(rate, q, "equal_utility", "reference", "threshold_ratio", *ref_ratio);
          }
          result.acc.add(rate, q, "equal_utility", "reference", "age_entropy",
                         age_entropy(reference, pool));
        }
      }
    } catch (const std::exception& e) {
      result.failures.push_back({q, partition, static_cast<int>(d), e.what()});
    }
  }
  return result;
}

// RFC-4180 style quoting for cells that may hold commas (mapping ids do).
std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"") == std::string::npos) return cell;
  std::string quoted = "\"";
  for (char c : cell) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "selection_rate,q,source,mapping,metric,reps,mean,sd\n";
  char buffer[40];
  for (const MetricRow& row : rows) {
    std::snprintf(buffer, sizeof buffer, "%.17g", row.rate);
    out << buffer << ',' << row.q << ',' << csv_escape(row.source) << ',' << csv_escape(row.mapping)
        << ',' << csv_escape(row.metric) << ',' << row.reps << ',';
    std::snprintf(buffer, sizeof buffer, "%.17g", row.mean);
    out << buffer << ',';
    std::snprintf(buffer, sizeof buffer, "%.17g", row.sd);
    out << buffer << '\n';
  }
}

}  // namespace

ResultsArchive run_experiment(const ExperimentConfig& config) {
  if (config.methods.empty()) throw DataError("config needs at least one sampling method");
  if (config.selection_rates.empty()) throw DataError("config needs at least one selection rate");
  if (config.q_values.empty()) throw DataError("config needs at least one q value");
  if (!(config.epsilon > 0.0)) throw DataError("epsilon must be positive");
  if (config.delta < 0) throw DataError("delta must be nonnegative");

  const std::filesystem::path root = resolve_output_dir(config);
  std::filesystem::create_directories(root);
  std::filesystem::create_directories(root / "figures");
  std::filesystem::create_directories(root / "samples");

  // source population; qualification labels recomputed per q
  CandidatePool base_population = config.csv_path
                                      ? load_csv(*config.csv_path, config.q_values.front())
                                      : generate_synthetic([&] {
                                          GeneratorConfig g = config.generator;
                                          g.q = config.q_values.front();
                                          return g;
                                        }());
  std::vector<CandidatePool> populations;
  for (int q : config.q_values) populations.push_back(relabel(base_population, q));

  SplitPlan plan = config.split_plan;
  if (plan.seed == 0) plan.seed = derive_seed(config.master_seed, {0xA11C});
  const std::vector<SplitTriple> splits = make_splits(base_population, plan);

  TaskContext ctx;
  ctx.config = &config;
  ctx.populations = &populations;
  ctx.splits = &splits;
  ctx.output_root = root;
  ctx.scaled_feature_subsets = scaled_budget(config.budgets.feature_subsets, config.budget_scale);
  ctx.scaled_bootstrap = scaled_budget(config.budgets.bootstrap, config.budget_scale);
  ctx.scaled_shuffle = scaled_budget(config.budgets.shuffle, config.budget_scale);
  ctx.scaled_perturbation = scaled_budget(config.budgets.perturbation, config.budget_scale);

  struct Task {
    std::size_t q_index;
    int partition;
  };
  std::vector<Task> tasks;
  for (std::size_t qi = 0; qi < config.q_values.size(); ++qi) {
    for (int p = 0; p < plan.num_partitions; ++p) tasks.push_back({qi, p});
  }
  std::vector<TaskResult> task_results(tasks.size());

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                              : std::min<unsigned>(hw, static_cast<unsigned>(tasks.size()));
  std::atomic<std::size_t> next_task{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t t = next_task.fetch_add(1);
      if (t >= tasks.size()) return;
      try {
        task_results[t] = run_cell(ctx, tasks[t].q_index, tasks[t].partition);
      } catch (const std::exception& e) {
        TaskResult failed;
        failed.failures.push_back({config.q_values[tasks[t].q_index], tasks[t].partition, -1, e.what()});
        task_results[t] = std::move(failed);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();

  // deterministic merge in task order
  Accumulator acc;
  AgeHist hist;
  std::vector<CellFailure> failures;
  json fig6 = json::array();
  for (TaskResult& result : task_results) {
    acc.merge(std::move(result.acc));
    hist.merge(std::move(result.hist));
    failures.insert(failures.end(), result.failures.begin(), result.failures.end());
    if (!result.fig6.is_null()) fig6.push_back(result.fig6);
  }

  ResultsArchive archive;
  archive.root = root;
  archive.failures = failures;
  for (const auto& [key, values] : acc.values) {
    MetricRow row;
    row.rate = std::get<0>(key);
    row.q = std::get<1>(key);
    row.source = std::get<2>(key);
    row.mapping = std::get<3>(key);
    row.metric = std::get<4>(key);
    row.reps = static_cast<int>(values.size());
    row.mean = mean_of(values);
    row.sd = sd_of(values, row.mean);
    archive.rows.push_back(std::move(row));
  }
  write_metrics_csv(root / "metrics.csv", archive.rows);

  {
    std::ofstream out(root / "figures" / "age_hist.csv");
    if (!out) throw DataError("cannot write age_hist.csv");
    out << "selection_rate,q,source,age_bracket,mean_share\n";
    char buffer[40];
    for (const auto& [key, value] : hist.shares) {
      for (int b = 0; b < kAgeBrackets; ++b) {
        std::snprintf(buffer, sizeof buffer, "%.17g", key.rate);
        out << buffer << ',' << key.q << ',' << key.source << ',' << b << ',';
        const double share = value.second > 0 ? value.first[static_cast<std::size_t>(b)] / value.second : 0.0;
        std::snprintf(buffer, sizeof buffer, "%.17g", share);
        out << buffer << '\n';
      }
    }
  }
  {
    std::ofstream out(root / "figures" / "risk_by_group.json");
    out << fig6.dump(2) << '\n';
  }

  json manifest;
  manifest["config"] = config_to_json(config);
  manifest["protocol"] = {
      {"repetitions", plan.num_partitions * plan.draws_per_partition},
      {"split_seed", plan.seed},
      {"sd_convention", "across all partition x draw repetitions"},
      {"equal_utility_consistency", "analytic"},
      {"equal_utility_entropy", "sampled"},
      {"reference_tie_rule", kReferenceTieRule},
      {"boundary_lottery_weights", "raw scores"},
      {"k_prime_rule", "floor(mean recovered top-k utility * k), feasibility-clamped"},
  };
  json failure_list = json::array();
  for (const CellFailure& f : failures) {
    failure_list.push_back({{"q", f.q}, {"partition", f.partition}, {"draw", f.draw}, {"error", f.error}});
  }
  manifest["failed_cells"] = failure_list;
  manifest["population"] = {{"n", base_population.n()}, {"csv", config.csv_path.has_value()}};
  std::ofstream mout(root / "manifest.json");
  if (!mout) throw DataError("cannot write manifest.json");
  mout << manifest.dump(2) << '\n';

  return archive;
}

std::vector<MetricRow> load_metrics(const std::filesystem::path& archive_root) {
  std::ifstream in(archive_root / "metrics.csv");
  if (!in) throw DataError("cannot open " + (archive_root / "metrics.csv").string());
  std::vector<MetricRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = csv_split(line);
    if (cells.size() != 8) throw DataError("malformed metrics.csv row: " + line);
    MetricRow row;
    row.rate = std::stod(cells[0]);
    row.q = std::stoi(cells[1]);
    row.source = cells[2];
    row.mapping = cells[3];
    row.metric = cells[4];
    row.reps = std::stoi(cells[5]);
    row.mean = std::stod(cells[6]);
    row.sd = std::stod(cells[7]);
    rows.push_back(std::move(row));
  }
  return rows;
}

const std::vector<std::string>& valid_figure_ids() {
  static const std::vector<std::string> ids = {"1-count", "table1", "fig2", "fig3b", "fig4c", "fig6"};
  return ids;
}

namespace {

std::filesystem::path figure_path(const std::filesystem::path& root, const std::string& id) {
  return root / "figures" / ("fig_" + id + ".csv");
}

void require_archive(const std::filesystem::path& root) {
  if (!std::filesystem::exists(root / "metrics.csv")) {
    throw DataError("no archive at " + root.string() + " (metrics.csv missing)");
  }
}

}  // namespace

std::filesystem::path emit_plot_data(const std::filesystem::path& archive_root,
                                     const std::string& figure_id) {
  std::filesystem::create_directories(archive_root / "figures");
  const std::filesystem::path out_path = figure_path(archive_root, figure_id);

  if (figure_id == "1-count") {
    std::ofstream out(out_path);
    out << "n,k,n_prime,k_prime,delta,count\n";
    out << "10,5,6,4,0," << count_equal_utility({10, 5, 6, 4, 0}).str() << '\n';
    return out_path;
  }
  if (figure_id == "table1") {
    std::ofstream out(out_path);
    out << "n,selection_rate,k,utility,qualification_rate,n_prime,k_prime,count\n";
    for (int n : {100, 1000}) {
      for (double qualification : {0.50, 0.75}) {
        for (double utility : {0.85, 0.95}) {
          for (double rate : {0.10, 0.25, 0.50}) {
            const int k = static_cast<int>(std::lround(rate * n));
            const int n_prime = static_cast<int>(std::lround(qualification * n));
            const int k_prime = static_cast<int>(std::floor(utility * k));
            out << n << ',' << rate << ',' << k << ',' << utility << ',' << qualification << ','
                << n_prime << ',' << k_prime << ','
                << count_equal_utility({n, k, n_prime, k_prime, 0}).str() << '\n';
          }
        }
      }
    }
    return out_path;
  }
  if (figure_id == "fig2") {
    require_archive(archive_root);
    std::ofstream out(out_path);
    out << "selection_rate,q,source,mapping,reps,min_threshold_ratio_mean,min_threshold_ratio_sd\n";
    for (const MetricRow& row : load_metrics(archive_root)) {
      if (row.metric == "min_threshold_ratio" ||
          (row.source == "equal_utility" && row.mapping == "reference" && row.metric == "threshold_ratio")) {
        out << row.rate << ',' << row.q << ',' << csv_escape(row.source) << ','
            << csv_escape(row.mapping) << ',' << row.reps << ',' << row.mean << ',' << row.sd << '\n';
      }
    }
    return out_path;
  }
  if (figure_id == "fig3b") {
    require_archive(archive_root);
    std::ofstream out(out_path);
    out << "selection_rate,q,source,metric,reps,mean,sd\n";
    for (const MetricRow& row : load_metrics(archive_root)) {
      if (row.mapping != "top_k" && row.mapping != "sample") continue;
      if (row.metric == "systemic_rejection" || row.metric == "multiple_outcomes" ||
          row.metric == "always_accepted") {
        out << row.rate << ',' << row.q << ',' << row.source << ',' << row.metric << ','
            << row.reps << ',' << row.mean << ',' << row.sd << '\n';
      }
    }
    return out_path;
  }
  if (figure_id == "fig4c") {
    require_archive(archive_root);
    std::ifstream in(archive_root / "figures" / "age_hist.csv");
    if (!in) throw DataError("age_hist.csv missing from the archive");
    std::ofstream out(out_path);
    std::string line;
    while (std::getline(in, line)) out << line << '\n';
    return out_path;
  }
  if (figure_id == "fig6") {
    std::ifstream in(archive_root / "figures" / "risk_by_group.json");
    if (!in) throw DataError("risk_by_group.json missing from the archive");
    const json cells = json::parse(in);
    std::ofstream out(out_path);
    out << "q,method,illness_level,race,count,mean,stddev,q05,q25,q50,q75,q95\n";
    for (const json& cell : cells) {
      for (const auto& [level, races] : cell.at("levels").items()) {
        for (const auto& [race, s] : races.items()) {
          out << cell.at("q") << ',' << cell.at("method").get<std::string>() << ',' << level << ','
              << race << ',' << s.at("count") << ',' << s.at("mean") << ',' << s.at("stddev") << ','
              << s.at("q05") << ',' << s.at("q25") << ',' << s.at("q50") << ',' << s.at("q75")
              << ',' << s.at("q95") << '\n';
        }
      }
    }
    return out_path;
  }

  std::string valid;
  for (const std::string& id : valid_figure_ids()) valid += (valid.empty() ? "" : ", ") + id;
  throw DataError("unknown figure id '" + figure_id + "'; valid ids: " + valid);
}

}  // namespace allocmult
