#include "allocmult/learners.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "allocmult/rng.hpp"

namespace allocmult {

std::string to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::Logistic: return "logistic";
    case ModelFamily::Mlp: return "mlp";
    case ModelFamily::ScoringSystem: return "scoring_system";
  }
  return "logistic";
}

LabeledData labeled_data_from_pool(const CandidatePool& pool) {
  LabeledData data;
  data.rows = static_cast<std::size_t>(pool.n());
  data.cols = pool.n() > 0 ? pool.at(0).features.size() : 0;
  data.features.reserve(data.rows * data.cols);
  data.labels.reserve(data.rows);
  for (const Individual& ind : pool.individuals()) {
    data.features.insert(data.features.end(), ind.features.begin(), ind.features.end());
    data.labels.push_back(ind.qualified ? 1 : 0);
  }
  return data;
}

void validate(const TrainConfig& config, std::size_t feature_dim) {
  if (config.learning_rate <= 0.0) throw DataError("learning rate must be positive");
  if (config.epochs <= 0) throw DataError("epochs must be positive");
  if (config.batch_size < 0) throw DataError("batch size must be nonnegative");
  if (config.l2 < 0.0) throw DataError("l2 must be nonnegative");
  if (config.coefficient_bound <= 0) throw DataError("coefficient bound must be positive");
  if (config.max_features <= 0) throw DataError("max features must be positive");
  if (config.family == ModelFamily::Mlp) {
    for (int h : config.hidden_sizes) {
      if (h <= 0) throw DataError("hidden sizes must be positive");
    }
  }
  if (config.feature_mask && config.feature_mask->size() != feature_dim) {
    throw DimensionError("feature mask length does not match feature dimension");
  }
}

void FeatureScaler::apply_row(double* row, std::size_t cols) const {
  if (identity()) return;
  for (std::size_t j = 0; j < cols; ++j) {
    if (scale[j] != 0.0) row[j] = (row[j] - mean[j]) / scale[j];
  }
}

LabeledData FeatureScaler::apply(const LabeledData& data) const {
  LabeledData out = data;
  if (identity()) return out;
  for (std::size_t r = 0; r < out.rows; ++r) apply_row(out.row(r), out.cols);
  return out;
}

FeatureScaler fit_scaler(const LabeledData& train, const std::vector<int>& columns) {
  FeatureScaler scaler;
  if (columns.empty() || train.rows == 0) return scaler;
  scaler.mean.assign(train.cols, 0.0);
  scaler.scale.assign(train.cols, 0.0);  // 0 marks untouched columns
  for (int c : columns) {
    if (c < 0 || static_cast<std::size_t>(c) >= train.cols) {
      throw DimensionError("standardize column index out of range");
    }
    const std::size_t col = static_cast<std::size_t>(c);
    double sum = 0.0;
    for (std::size_t r = 0; r < train.rows; ++r) sum += train.row(r)[col];
    const double mean = sum / static_cast<double>(train.rows);
    double var = 0.0;
    for (std::size_t r = 0; r < train.rows; ++r) {
      const double d = train.row(r)[col] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(train.rows));
    scaler.mean[col] = mean;
    scaler.scale[col] = sd > 0.0 ? sd : 1.0;
  }
  return scaler;
}

double cross_entropy(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
  if (scores.empty()) throw DegenerateInputError("cross entropy of empty vectors");
  constexpr double kClamp = 1e-12;
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], kClamp, 1.0 - kClamp);
    total += labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(scores.size());
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z), overflow-safe
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct MlpShape {
  std::vector<int> sizes;              // {in, hidden..., 1}
  std::vector<std::size_t> w_offset;   // per layer
  std::vector<std::size_t> b_offset;
  std::size_t total = 0;

  explicit MlpShape(const std::vector<int>& layer_sizes) : sizes(layer_sizes) {
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      w_offset.push_back(off);
      off += static_cast<std::size_t>(sizes[l]) * static_cast<std::size_t>(sizes[l + 1]);
      b_offset.push_back(off);
      off += static_cast<std::size_t>(sizes[l + 1]);
    }
    total = off;
  }
  std::size_t layers() const { return sizes.size() - 1; }
};

// Forward pass returning the output logit; optionally stores activations
// (input + each hidden layer output) for backprop.
double mlp_logit(const MlpShape& shape, const std::vector<double>& params, const double* x,
                 std::vector<std::vector<double>>* activations) {
  std::vector<double> current(x, x + shape.sizes[0]);
  if (activations) {
    activations->clear();
    activations->push_back(current);
  }
  for (std::size_t l = 0; l < shape.layers(); ++l) {
    const int in = shape.sizes[l];
    const int out = shape.sizes[l + 1];
    std::vector<double> next(static_cast<std::size_t>(out), 0.0);
    const double* w = params.data() + shape.w_offset[l];
    const double* b = params.data() + shape.b_offset[l];
    for (int o = 0; o < out; ++o) {
      double z = b[o];
      const double* w_row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
      for (int i = 0; i < in; ++i) z += w_row[i] * current[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(o)] = z;
    }
    const bool last = l + 1 == shape.layers();
    if (!last) {
      for (double& z : next) z = std::tanh(z);
    }
    current = std::move(next);
    if (activations && !last) activations->push_back(current);
  }
  return current[0];
}

// Backprop of d(output logit)/d(params) scaled by `upstream`, accumulated
// into grad. Activations must come from mlp_logit on the same row.
void mlp_backprop(const MlpShape& shape, const std::vector<double>& params,
                  const std::vector<std::vector<double>>& activations, double upstream,
                  std::vector<double>& grad) {
  std::vector<double> delta = {upstream};  // d logit / d z at the output layer
  for (std::size_t l = shape.layers(); l-- > 0;) {
    const int in = shape.sizes[l];
    const int out = shape.sizes[l + 1];
    const std::vector<double>& input = activations[l];
    const double* w = params.data() + shape.w_offset[l];
    double* gw = grad.data() + shape.w_offset[l];
    double* gb = grad.data() + shape.b_offset[l];
    std::vector<double> prev_delta(static_cast<std::size_t>(in), 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      gb[o] += d;
      const double* w_row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
      double* gw_row = gw + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
      for (int i = 0; i < in; ++i) {
        gw_row[i] += d * input[static_cast<std::size_t>(i)];
        prev_delta[static_cast<std::size_t>(i)] += d * w_row[i];
      }
    }
    if (l > 0) {
      // derivative through the tanh producing this layer's input
      for (int i = 0; i < in; ++i) {
        const double a = activations[l][static_cast<std::size_t>(i)];
        prev_delta[static_cast<std::size_t>(i)] *= 1.0 - a * a;
      }
    }
    delta = std::move(prev_delta);
  }
}

double linear_logit(const TrainedModel& model, const std::vector<double>& params, const double* x) {
  const std::size_t d = static_cast<std::size_t>(model.layer_sizes[0]);
  double z = params[d];  // intercept
  double dot = 0.0;
  for (std::size_t j = 0; j < d; ++j) dot += params[j] * x[j];
  if (model.family == ModelFamily::ScoringSystem) {
    z += model.link_scale * dot;
  } else {
    z += dot;
  }
  return z;
}

double model_logit(const TrainedModel& model, const std::vector<double>& params, const double* x,
                   std::vector<std::vector<double>>* activations) {
  if (model.family == ModelFamily::Mlp) {
    return mlp_logit(MlpShape(model.layer_sizes), params, x, activations);
  }
  return linear_logit(model, params, x);
}

// Standardize and mask a raw data block the way training saw it.
LabeledData prepare(const TrainedModel& model, const LabeledData& raw) {
  LabeledData data = model.scaler.apply(raw);
  if (model.config.feature_mask) {
    const auto& mask = *model.config.feature_mask;
    if (mask.size() != data.cols) throw DimensionError("feature mask length does not match data");
    for (std::size_t r = 0; r < data.rows; ++r) {
      double* row = data.row(r);
      for (std::size_t j = 0; j < data.cols; ++j) {
        if (!mask[j]) row[j] = 0.0;
      }
    }
  }
  return data;
}

void check_data(const LabeledData& data, const char* which) {
  if (data.rows == 0) throw DataError(std::string(which) + " split is empty");
  if (data.labels.size() != data.rows) throw DimensionError(std::string(which) + " labels length mismatch");
  for (std::size_t r = 0; r < data.rows; ++r) {
    if (data.labels[r] > 1) throw DataError(std::string(which) + " labels must be binary");
    for (std::size_t c = 0; c < data.cols; ++c) {
      if (!std::isfinite(data.row(r)[c])) {
        throw DataError(std::string(which) + " has a non-finite feature at row " + std::to_string(r) +
                        ", column " + std::to_string(c));
      }
    }
  }
}

std::vector<double> scores_on(const TrainedModel& model, const std::vector<double>& params,
                              const LabeledData& prepared) {
  std::vector<double> scores(prepared.rows);
  for (std::size_t r = 0; r < prepared.rows; ++r) {
    scores[r] = sigmoid(model_logit(model, params, prepared.row(r), nullptr));
  }
  return scores;
}

// Objective over a prepared batch: mean softplus cross-entropy + l2/2 ||w||^2
// (biases excluded). The softplus form keeps the analytic gradient exact even
// for saturated scores.
double objective_on_prepared(const TrainedModel& model, const std::vector<double>& params,
                             const LabeledData& prepared) {
  double total = 0.0;
  for (std::size_t r = 0; r < prepared.rows; ++r) {
    const double z = model_logit(model, params, prepared.row(r), nullptr);
    total += softplus(z) - (prepared.labels[r] ? z : 0.0);
  }
  total /= static_cast<double>(prepared.rows);
  if (model.config.l2 > 0.0) {
    double reg = 0.0;
    if (model.family == ModelFamily::Mlp) {
      const MlpShape shape(model.layer_sizes);
      for (std::size_t l = 0; l < shape.layers(); ++l) {
        for (std::size_t i = shape.w_offset[l]; i < shape.b_offset[l]; ++i) reg += params[i] * params[i];
      }
    } else {
      const std::size_t d = static_cast<std::size_t>(model.layer_sizes[0]);
      for (std::size_t j = 0; j < d; ++j) reg += params[j] * params[j];
    }
    total += 0.5 * model.config.l2 * reg;
  }
  return total;
}

void gradient_on_prepared(const TrainedModel& model, const std::vector<double>& params,
                          const LabeledData& prepared, const std::vector<std::size_t>& rows,
                          std::vector<double>& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv = 1.0 / static_cast<double>(rows.size());
  if (model.family == ModelFamily::Mlp) {
    const MlpShape shape(model.layer_sizes);
    std::vector<std::vector<double>> activations;
    for (std::size_t r : rows) {
      const double z = mlp_logit(shape, params, prepared.row(r), &activations);
      const double residual = sigmoid(z) - (prepared.labels[r] ? 1.0 : 0.0);
      mlp_backprop(shape, params, activations, residual * inv, grad);
    }
    if (model.config.l2 > 0.0) {
      for (std::size_t l = 0; l < shape.layers(); ++l) {
        for (std::size_t i = shape.w_offset[l]; i < shape.b_offset[l]; ++i) {
          grad[i] += model.config.l2 * params[i];
        }
      }
    }
  } else {
    const std::size_t d = static_cast<std::size_t>(model.layer_sizes[0]);
    const double gamma = model.family == ModelFamily::ScoringSystem ? model.link_scale : 1.0;
    for (std::size_t r : rows) {
      const double* x = prepared.row(r);
      const double residual = (sigmoid(linear_logit(model, params, x)) -
                               (prepared.labels[r] ? 1.0 : 0.0)) * inv;
      for (std::size_t j = 0; j < d; ++j) grad[j] += residual * gamma * x[j];
      grad[d] += residual;
    }
    if (model.config.l2 > 0.0) {
      for (std::size_t j = 0; j < d; ++j) grad[j] += model.config.l2 * params[j];
    }
  }
}

// Plain SGD over the prepared training data; records the per-epoch train loss.
void run_sgd(TrainedModel& model, const LabeledData& prepared_train, Rng& rng, int epochs,
             const std::function<void(int)>& after_epoch) {
  const std::size_t n = prepared_train.rows;
  const std::size_t batch = model.config.batch_size == 0
                                ? n
                                : std::min<std::size_t>(static_cast<std::size_t>(model.config.batch_size), n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(model.parameters.size());
  std::vector<std::size_t> rows;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (batch < n) {
      for (std::size_t i = n; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
        std::swap(order[i - 1], order[j]);
      }
    }
    for (std::size_t start = 0; start < n; start += batch) {
      rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                  order.begin() + static_cast<std::ptrdiff_t>(std::min(start + batch, n)));
      gradient_on_prepared(model, model.parameters, prepared_train, rows, grad);
      for (std::size_t i = 0; i < model.parameters.size(); ++i) {
        model.parameters[i] -= model.config.learning_rate * grad[i];
      }
    }
    const double loss = cross_entropy(scores_on(model, model.parameters, prepared_train),
                                      prepared_train.labels);
    if (!std::isfinite(loss)) {
      throw TrainingError("training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
                          " with learning rate " + std::to_string(model.config.learning_rate));
    }
    model.training_curve.push_back(loss);
    if (after_epoch) after_epoch(epoch);
  }
}

void init_parameters(TrainedModel& model, Rng& rng) {
  if (model.family == ModelFamily::Mlp) {
    const MlpShape shape(model.layer_sizes);
    model.parameters.assign(shape.total, 0.0);
    for (std::size_t l = 0; l < shape.layers(); ++l) {
      const double bound = std::sqrt(6.0 / (shape.sizes[l] + shape.sizes[l + 1]));
      for (std::size_t i = shape.w_offset[l]; i < shape.b_offset[l]; ++i) {
        model.parameters[i] = (2.0 * rng.uniform01() - 1.0) * bound;
      }
    }
  } else {
    model.parameters.assign(static_cast<std::size_t>(model.layer_sizes[0]) + 1, 0.0);
  }
}

// Newton refit of the intercept for a fixed integer score; convex in b.
void refit_intercept(TrainedModel& model, const LabeledData& prepared) {
  const std::size_t d = static_cast<std::size_t>(model.layer_sizes[0]);
  std::vector<double> base(prepared.rows);
  for (std::size_t r = 0; r < prepared.rows; ++r) {
    const double* x = prepared.row(r);
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += model.parameters[j] * x[j];
    base[r] = model.link_scale * dot;
  }
  double b = model.parameters[d];
  for (int iter = 0; iter < 50; ++iter) {
    double g = 0.0, h = 0.0;
    for (std::size_t r = 0; r < prepared.rows; ++r) {
      const double p = sigmoid(base[r] + b);
      g += p - (prepared.labels[r] ? 1.0 : 0.0);
      h += p * (1.0 - p);
    }
    g /= static_cast<double>(prepared.rows);
    h /= static_cast<double>(prepared.rows);
    if (h < 1e-12) break;
    const double step = g / h;
    b -= step;
    if (std::fabs(step) < 1e-12) break;
  }
  model.parameters[d] = b;
}

}  // namespace

TrainedModel train(const TrainConfig& config, const LabeledData& train_split,
                   const LabeledData& validation_split) {
  check_data(train_split, "train");
  check_data(validation_split, "validation");
  if (train_split.cols != validation_split.cols) {
    throw DimensionError("train and validation feature dimensions differ");
  }
  validate(config, train_split.cols);

  TrainedModel model;
  model.family = config.family;
  model.config = config;
  model.scaler = fit_scaler(train_split, config.standardize_columns);
  model.model_id = to_string(config.family) + "-s" + std::to_string(config.seed);

  if (config.family == ModelFamily::Mlp) {
    model.layer_sizes.push_back(static_cast<int>(train_split.cols));
    for (int h : config.hidden_sizes) model.layer_sizes.push_back(h);
    model.layer_sizes.push_back(1);
  } else {
    model.layer_sizes = {static_cast<int>(train_split.cols), 1};
  }

  const LabeledData prepared_train = prepare(model, train_split);
  const LabeledData prepared_val = prepare(model, validation_split);

  Rng rng(config.seed);
  init_parameters(model, rng);

  if (config.family == ModelFamily::ScoringSystem) {
    // Stage 1: real-valued logistic fit on the masked features.
    run_sgd(model, prepared_train, rng, config.epochs, nullptr);

    const std::size_t d = train_split.cols;
    // Keep the max_features largest-magnitude weights.
    std::vector<std::size_t> by_magnitude(d);
    std::iota(by_magnitude.begin(), by_magnitude.end(), 0);
    std::sort(by_magnitude.begin(), by_magnitude.end(), [&](std::size_t a, std::size_t b) {
      const double ma = std::fabs(model.parameters[a]);
      const double mb = std::fabs(model.parameters[b]);
      if (ma != mb) return ma > mb;
      return a < b;
    });
    for (std::size_t i = static_cast<std::size_t>(config.max_features); i < d; ++i) {
      model.parameters[by_magnitude[i]] = 0.0;
    }

    double max_weight = 0.0;
    for (std::size_t j = 0; j < d; ++j) max_weight = std::max(max_weight, std::fabs(model.parameters[j]));
    if (max_weight > 0.0) {
      const double rescale = static_cast<double>(config.coefficient_bound) / max_weight;
      model.link_scale = 1.0 / rescale;
      for (std::size_t j = 0; j < d; ++j) {
        const double rounded = std::round(model.parameters[j] * rescale);
        model.parameters[j] = std::clamp(rounded, -static_cast<double>(config.coefficient_bound),
                                         static_cast<double>(config.coefficient_bound));
      }
    } else {
      model.link_scale = 1.0;
    }
    refit_intercept(model, prepared_train);
  } else {
    run_sgd(model, prepared_train, rng, config.epochs, nullptr);
  }

  model.train_loss = cross_entropy(scores_on(model, model.parameters, prepared_train),
                                   prepared_train.labels);
  model.validation_loss = cross_entropy(scores_on(model, model.parameters, prepared_val),
                                        prepared_val.labels);
  return model;
}

std::vector<TrainedModel> train_epoch_snapshots(const TrainConfig& config,
                                                const LabeledData& train_split,
                                                const LabeledData& validation_split,
                                                int snapshot_epochs, int burn_in) {
  if (snapshot_epochs < 1) throw DataError("snapshot epochs must be at least 1");
  if (burn_in < 0) throw DataError("burn-in must be nonnegative");
  check_data(train_split, "train");
  check_data(validation_split, "validation");
  validate(config, train_split.cols);

  TrainedModel model;
  model.family = config.family;
  model.config = config;
  model.scaler = fit_scaler(train_split, config.standardize_columns);
  if (config.family == ModelFamily::Mlp) {
    model.layer_sizes.push_back(static_cast<int>(train_split.cols));
    for (int h : config.hidden_sizes) model.layer_sizes.push_back(h);
    model.layer_sizes.push_back(1);
  } else {
    model.layer_sizes = {static_cast<int>(train_split.cols), 1};
  }

  const LabeledData prepared_train = prepare(model, train_split);
  const LabeledData prepared_val = prepare(model, validation_split);

  Rng rng(config.seed);
  init_parameters(model, rng);

  std::vector<TrainedModel> snapshots;
  snapshots.reserve(static_cast<std::size_t>(snapshot_epochs));
  run_sgd(model, prepared_train, rng, burn_in + snapshot_epochs, [&](int epoch) {
    if (epoch < burn_in) return;
    TrainedModel snap = model;
    snap.train_loss = snap.training_curve.back();
    snap.validation_loss = cross_entropy(scores_on(snap, snap.parameters, prepared_val),
                                         prepared_val.labels);
    snap.model_id = to_string(config.family) + "-s" + std::to_string(config.seed) + "-e" +
                    std::to_string(epoch);
    snapshots.push_back(std::move(snap));
  });
  return snapshots;
}

std::vector<double> predict_scores(const TrainedModel& model, const LabeledData& rows) {
  if (static_cast<int>(rows.cols) != model.layer_sizes[0]) {
    throw DimensionError("feature dimension does not match the model");
  }
  const LabeledData prepared = prepare(model, rows);
  return scores_on(model, model.parameters, prepared);
}

PredictionVector predict(const TrainedModel& model, const CandidatePool& pool) {
  PredictionVector pred;
  pred.scores = predict_scores(model, labeled_data_from_pool(pool));
  pred.validation_loss = model.validation_loss;
  pred.model_id = model.model_id;
  return pred;
}

double objective_value(const TrainedModel& model, const std::vector<double>& params,
                       const LabeledData& raw_data) {
  return objective_on_prepared(model, params, prepare(model, raw_data));
}

std::vector<double> objective_gradient(const TrainedModel& model, const std::vector<double>& params,
                                       const LabeledData& raw_data) {
  const LabeledData prepared = prepare(model, raw_data);
  std::vector<std::size_t> rows(prepared.rows);
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<double> grad(params.size());
  gradient_on_prepared(model, params, prepared, rows, grad);
  return grad;
}

std::vector<double> score_gradient(const TrainedModel& model, const std::vector<double>& params,
                                   const double* raw_row, std::size_t cols) {
  LabeledData one;
  one.rows = 1;
  one.cols = cols;
  one.features.assign(raw_row, raw_row + cols);
  one.labels = {0};
  const LabeledData prepared = prepare(model, one);

  std::vector<double> grad(params.size(), 0.0);
  if (model.family == ModelFamily::Mlp) {
    const MlpShape shape(model.layer_sizes);
    std::vector<std::vector<double>> activations;
    const double z = mlp_logit(shape, params, prepared.row(0), &activations);
    const double p = sigmoid(z);
    mlp_backprop(shape, params, activations, p * (1.0 - p), grad);
  } else {
    const std::size_t d = static_cast<std::size_t>(model.layer_sizes[0]);
    const double gamma = model.family == ModelFamily::ScoringSystem ? model.link_scale : 1.0;
    const double z = linear_logit(model, params, prepared.row(0));
    const double p = sigmoid(z);
    for (std::size_t j = 0; j < d; ++j) grad[j] = p * (1.0 - p) * gamma * prepared.row(0)[j];
    grad[d] = p * (1.0 - p);
  }
  return grad;
}

double validation_loss_at(const TrainedModel& model, const std::vector<double>& params,
                          const LabeledData& raw_validation) {
  const LabeledData prepared = prepare(model, raw_validation);
  return cross_entropy(scores_on(model, params, prepared), prepared.labels);
}

}  // namespace allocmult
