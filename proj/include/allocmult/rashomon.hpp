#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "allocmult/domain.hpp"
#include "allocmult/learners.hpp"

namespace allocmult {

/// Scoring systems trained over `budget` distinct random feature subsets of
/// size min(max_features, dim). A budget beyond the number of distinct
/// subsets is truncated with a warning; identical parameter vectors are
/// deduplicated.
std::vector<TrainedModel> sample_feature_subsets(const TrainConfig& base_config,
                                                 const LabeledData& train_split,
                                                 const LabeledData& validation_split, int budget,
                                                 std::uint64_t rng_seed);

/// One model per with-replacement resample of the training split (same
/// size); the validation split is untouched.
std::vector<TrainedModel> sample_bootstrap(const TrainConfig& base_config,
                                           const LabeledData& train_split,
                                           const LabeledData& validation_split, int budget,
                                           std::uint64_t rng_seed);

/// Single training run with the data order reshuffled between epochs; the
/// parameters after each post-burn-in epoch become one candidate model.
std::vector<TrainedModel> sample_shuffle(const TrainConfig& base_config,
                                         const LabeledData& train_split,
                                         const LabeledData& validation_split, int epochs,
                                         std::uint64_t rng_seed, int burn_in = 5);

struct PerturbationConfig {
  double step = 1e-2;   // ascent rate on the chosen point's predicted score
  int max_steps = 200;  // the epsilon bound, not this cap, should normally bind
  double epsilon = 0.01;
};

/// For each of `budget` randomly chosen validation points, ascends the
/// gradient of that point's predicted score from the base parameters and
/// returns the last iterate whose validation loss stays within
/// base loss + epsilon. Points whose first step already exceeds the bound
/// (or with zero gradient) are skipped.
std::vector<TrainedModel> sample_weight_perturbation(const TrainedModel& base_model,
                                                     const LabeledData& train_split,
                                                     const LabeledData& validation_split,
                                                     int budget, const PerturbationConfig& config,
                                                     std::uint64_t rng_seed);

/// Keeps predictions whose validation loss is within epsilon of the best
/// among the inputs. Idempotent for a fixed epsilon.
RashomonSample filter_epsilon(std::vector<PredictionVector> candidates, double epsilon);

/// Materializes each model's predictions on the pool, then filters.
RashomonSample filter_epsilon(const std::vector<TrainedModel>& models, double epsilon,
                              const CandidatePool& pool, SamplingMethod tag);

/// Sample persistence: <dir>/manifest.json + <dir>/scores.csv with one row
/// per model and one column per individual.
void save_sample(const RashomonSample& sample, SamplingMethod method,
                 const std::filesystem::path& dir, std::uint64_t seed);
RashomonSample load_sample(const std::filesystem::path& dir);

}  // namespace allocmult
