#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "allocmult/domain.hpp"

namespace allocmult {

enum class ModelFamily { Logistic, Mlp, ScoringSystem };

std::string to_string(ModelFamily family);

// Row-major feature matrix with binary labels.
struct LabeledData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;
  std::vector<std::uint8_t> labels;

  const double* row(std::size_t r) const { return features.data() + r * cols; }
  double* row(std::size_t r) { return features.data() + r * cols; }
};

/// Feature matrix + qualification labels of a pool.
LabeledData labeled_data_from_pool(const CandidatePool& pool);

struct TrainConfig {
  ModelFamily family = ModelFamily::Logistic;
  std::vector<int> hidden_sizes = {32};  // mlp only
  double learning_rate = 0.1;
  int epochs = 40;
  int batch_size = 128;  // 0 = full batch
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  std::optional<std::vector<std::uint8_t>> feature_mask;
  int coefficient_bound = 5;  // scoring systems
  int max_features = 8;       // scoring systems
  std::vector<int> standardize_columns;  // z-scored on the training split
};

void validate(const TrainConfig& config, std::size_t feature_dim);

// Column-wise z-scoring fitted on a training split; empty = identity.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  bool identity() const { return mean.empty(); }
  void apply_row(double* row, std::size_t cols) const;
  LabeledData apply(const LabeledData& data) const;
};

FeatureScaler fit_scaler(const LabeledData& train, const std::vector<int>& columns);

struct TrainedModel {
  ModelFamily family = ModelFamily::Logistic;
  std::vector<int> layer_sizes;     // mlp: {in, hidden..., 1}; linear: {in, 1}
  std::vector<double> parameters;   // packed; see loss/score evaluators
  double link_scale = 1.0;          // scoring systems: logit multiplier
  FeatureScaler scaler;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  std::vector<double> training_curve;  // train loss after each epoch
  TrainConfig config;
  std::string model_id;
};

/// Mean binary cross-entropy with scores clamped to [1e-12, 1 - 1e-12].
double cross_entropy(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Fits one model. Bit-identical results for identical config, seed, data.
TrainedModel train(const TrainConfig& config, const LabeledData& train_split,
                   const LabeledData& validation_split);

/// One training run that snapshots the model after each epoch following a
/// burn-in; the data order is reshuffled between epochs.
std::vector<TrainedModel> train_epoch_snapshots(const TrainConfig& config,
                                                const LabeledData& train_split,
                                                const LabeledData& validation_split,
                                                int snapshot_epochs, int burn_in);

/// Scores for raw (unscaled) feature rows.
std::vector<double> predict_scores(const TrainedModel& model, const LabeledData& rows);
PredictionVector predict(const TrainedModel& model, const CandidatePool& pool);

// Evaluation of the training objective (mean cross-entropy + l2/2 * ||w||^2,
// biases excluded) at arbitrary parameters of the model's shape. Used by the
// finite-difference checks and the weight-perturbation sampler.
double objective_value(const TrainedModel& model, const std::vector<double>& params,
                       const LabeledData& raw_data);
std::vector<double> objective_gradient(const TrainedModel& model, const std::vector<double>& params,
                                       const LabeledData& raw_data);

/// Gradient of one individual's predicted score with respect to parameters.
std::vector<double> score_gradient(const TrainedModel& model, const std::vector<double>& params,
                                   const double* raw_row, std::size_t cols);

/// Validation cross-entropy of the model's shape at arbitrary parameters.
double validation_loss_at(const TrainedModel& model, const std::vector<double>& params,
                          const LabeledData& raw_validation);

}  // namespace allocmult
