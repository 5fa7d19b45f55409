#include "allocmult/rashomon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "allocmult/rng.hpp"

namespace allocmult {

namespace {

std::vector<std::vector<int>> all_subsets(int dim, int size) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) current[static_cast<std::size_t>(i)] = i;
  while (true) {
    out.push_back(current);
    int i = size - 1;
    while (i >= 0 && current[static_cast<std::size_t>(i)] == dim - size + i) --i;
    if (i < 0) break;
    ++current[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < size; ++j) {
      current[static_cast<std::size_t>(j)] = current[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return out;
}

double count_subsets(int dim, int size) {
  double c = 1.0;
  for (int i = 1; i <= size; ++i) c *= static_cast<double>(dim - size + i) / i;
  return c;
}

}  // namespace

std::vector<TrainedModel> sample_feature_subsets(const TrainConfig& base_config,
                                                 const LabeledData& train_split,
                                                 const LabeledData& validation_split, int budget,
                                                 std::uint64_t rng_seed) {
  if (budget < 1) throw DegenerateInputError("budget must be at least 1");
  const int dim = static_cast<int>(train_split.cols);
  const int subset_size = std::min(base_config.max_features, dim);

  std::vector<std::vector<int>> subsets;
  const double distinct = count_subsets(dim, subset_size);
  if (static_cast<double>(budget) >= distinct) {
    if (static_cast<double>(budget) > distinct) {
      std::cerr << "sample_feature_subsets: budget " << budget << " exceeds the "
                << static_cast<long long>(distinct) << " distinct subsets; truncating\n";
    }
    subsets = all_subsets(dim, subset_size);
  } else {
    Rng rng(rng_seed);
    std::set<std::vector<int>> seen;
    while (static_cast<int>(seen.size()) < budget) {
      seen.insert(rng.sample_without_replacement(dim, subset_size));
    }
    subsets.assign(seen.begin(), seen.end());
  }

  std::vector<TrainedModel> models;
  std::set<std::pair<std::vector<double>, double>> seen_parameters;
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    TrainConfig config = base_config;
    config.family = ModelFamily::ScoringSystem;
    config.seed = derive_seed(rng_seed, {s});
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(dim), 0);
    for (int col : subsets[s]) mask[static_cast<std::size_t>(col)] = 1;
    config.feature_mask = mask;

    TrainedModel model = train(config, train_split, validation_split);
    model.model_id = "feature_subsets-" + std::to_string(s);
    if (seen_parameters.insert({model.parameters, model.link_scale}).second) {
      models.push_back(std::move(model));
    }
  }
  return models;
}

std::vector<TrainedModel> sample_bootstrap(const TrainConfig& base_config,
                                           const LabeledData& train_split,
                                           const LabeledData& validation_split, int budget,
                                           std::uint64_t rng_seed) {
  if (budget < 1) throw DegenerateInputError("budget must be at least 1");
  std::vector<TrainedModel> models;
  models.reserve(static_cast<std::size_t>(budget));
  for (int b = 0; b < budget; ++b) {
    Rng resample_rng(derive_seed(rng_seed, {static_cast<std::uint64_t>(b), 0}));
    LabeledData resampled;
    resampled.rows = train_split.rows;
    resampled.cols = train_split.cols;
    resampled.features.reserve(train_split.features.size());
    resampled.labels.reserve(train_split.rows);
    for (std::size_t r = 0; r < train_split.rows; ++r) {
      const std::size_t pick = resample_rng.uniform_below(train_split.rows);
      const double* row = train_split.row(pick);
      resampled.features.insert(resampled.features.end(), row, row + train_split.cols);
      resampled.labels.push_back(train_split.labels[pick]);
    }

    TrainConfig config = base_config;
    config.seed = derive_seed(rng_seed, {static_cast<std::uint64_t>(b), 1});
    TrainedModel model = train(config, resampled, validation_split);
    model.model_id = "bootstrap-" + std::to_string(b);
    models.push_back(std::move(model));
  }
  return models;
}

std::vector<TrainedModel> sample_shuffle(const TrainConfig& base_config,
                                         const LabeledData& train_split,
                                         const LabeledData& validation_split, int epochs,
                                         std::uint64_t rng_seed, int burn_in) {
  if (epochs < 1) throw DegenerateInputError("epochs must be at least 1");
  TrainConfig config = base_config;
  config.seed = rng_seed;
  std::vector<TrainedModel> snapshots =
      train_epoch_snapshots(config, train_split, validation_split, epochs, burn_in);
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    snapshots[i].model_id = "shuffle-e" + std::to_string(burn_in + static_cast<int>(i));
  }
  return snapshots;
}

std::vector<TrainedModel> sample_weight_perturbation(const TrainedModel& base_model,
                                                     const LabeledData& train_split,
                                                     const LabeledData& validation_split,
                                                     int budget, const PerturbationConfig& config,
                                                     std::uint64_t rng_seed) {
  if (budget < 1) throw DegenerateInputError("budget must be at least 1");
  const double bound = base_model.validation_loss + config.epsilon;

  int points = budget;
  if (points > static_cast<int>(validation_split.rows)) {
    std::cerr << "sample_weight_perturbation: budget " << budget
              << " exceeds the validation rows; truncating\n";
    points = static_cast<int>(validation_split.rows);
  }
  Rng rng(rng_seed);
  const std::vector<int> chosen =
      rng.sample_without_replacement(static_cast<int>(validation_split.rows), points);

  std::vector<TrainedModel> models;
  for (std::size_t p = 0; p < chosen.size(); ++p) {
    const double* row = validation_split.row(static_cast<std::size_t>(chosen[p]));
    std::vector<double> params = base_model.parameters;
    std::vector<double> kept;
    double kept_loss = 0.0;
    for (int step = 0; step < config.max_steps; ++step) {
      const std::vector<double> grad =
          score_gradient(base_model, params, row, validation_split.cols);
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      if (norm == 0.0) {
        if (step == 0) {
          std::cerr << "sample_weight_perturbation: zero gradient at validation point "
                    << chosen[p] << "; skipping\n";
        }
        break;
      }
      for (std::size_t i = 0; i < params.size(); ++i) params[i] += config.step * grad[i];
      const double loss = validation_loss_at(base_model, params, validation_split);
      if (!(loss <= bound)) break;
      kept = params;
      kept_loss = loss;
    }
    if (kept.empty()) continue;

    TrainedModel model = base_model;
    model.parameters = std::move(kept);
    model.validation_loss = kept_loss;
    model.train_loss = validation_loss_at(base_model, model.parameters, train_split);
    model.model_id = "perturbation-" + std::to_string(p);
    models.push_back(std::move(model));
  }
  return models;
}

RashomonSample filter_epsilon(std::vector<PredictionVector> candidates, double epsilon) {
  if (candidates.empty()) throw DegenerateInputError("filter_epsilon: empty input");
  if (epsilon < 0.0) throw DegenerateInputError("epsilon must be nonnegative");
  RashomonSample sample;
  sample.epsilon = epsilon;
  sample.best_loss = candidates.front().validation_loss;
  for (const PredictionVector& pred : candidates) {
    sample.best_loss = std::min(sample.best_loss, pred.validation_loss);
  }
  for (PredictionVector& pred : candidates) {
    if (pred.validation_loss <= sample.best_loss + epsilon) {
      sample.members.push_back(std::move(pred));
    }
  }
  return sample;
}

RashomonSample filter_epsilon(const std::vector<TrainedModel>& models, double epsilon,
                              const CandidatePool& pool, SamplingMethod tag) {
  std::vector<PredictionVector> candidates;
  candidates.reserve(models.size());
  for (const TrainedModel& model : models) {
    PredictionVector pred = predict(model, pool);
    pred.method_tag = tag;
    candidates.push_back(std::move(pred));
  }
  return filter_epsilon(std::move(candidates), epsilon);
}

void save_sample(const RashomonSample& sample, SamplingMethod method,
                 const std::filesystem::path& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  manifest["method"] = to_string(method);
  manifest["epsilon"] = sample.epsilon;
  manifest["best_loss"] = sample.best_loss;
  manifest["seed"] = seed;
  manifest["num_members"] = sample.members.size();
  nlohmann::json ids = nlohmann::json::array();
  for (const PredictionVector& member : sample.members) ids.push_back(member.model_id);
  manifest["model_ids"] = ids;
  std::ofstream mout(dir / "manifest.json");
  if (!mout) throw DataError("cannot write " + (dir / "manifest.json").string());
  mout << manifest.dump(2) << '\n';

  std::ofstream out(dir / "scores.csv");
  if (!out) throw DataError("cannot write " + (dir / "scores.csv").string());
  out << "model_id,validation_loss";
  const std::size_t n = sample.members.empty() ? 0 : sample.members.front().scores.size();
  for (std::size_t i = 0; i < n; ++i) out << ",x" << i;
  out << '\n';
  char buffer[40];
  for (const PredictionVector& member : sample.members) {
    out << member.model_id;
    std::snprintf(buffer, sizeof buffer, "%.17g", member.validation_loss);
    out << ',' << buffer;
    for (double s : member.scores) {
      std::snprintf(buffer, sizeof buffer, "%.17g", s);
      out << ',' << buffer;
    }
    out << '\n';
  }
}

RashomonSample load_sample(const std::filesystem::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw DataError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest = nlohmann::json::parse(min);

  RashomonSample sample;
  sample.epsilon = manifest.at("epsilon").get<double>();
  sample.best_loss = manifest.at("best_loss").get<double>();
  const SamplingMethod method = sampling_method_from_string(manifest.at("method").get<std::string>());

  std::ifstream in(dir / "scores.csv");
  if (!in) throw DataError("cannot open " + (dir / "scores.csv").string());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream stream(line);
    std::string cell;
    PredictionVector pred;
    pred.method_tag = method;
    std::getline(stream, cell, ',');
    pred.model_id = cell;
    std::getline(stream, cell, ',');
    pred.validation_loss = std::stod(cell);
    while (std::getline(stream, cell, ',')) pred.scores.push_back(std::stod(cell));
    sample.members.push_back(std::move(pred));
  }
  return sample;
}

}  // namespace allocmult
