#include "allocmult/mappings.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "allocmult/rng.hpp"

namespace allocmult {

LotteryConfig LotteryConfig::boundary(int k, double k_frac, double n_frac, std::uint64_t seed) {
  LotteryConfig config;
  config.kind = MappingKind::Boundary;
  config.k_tilde = std::max(1, static_cast<int>(std::lround(k_frac * k)));
  config.n_tilde = std::max(1, static_cast<int>(std::lround(n_frac * k)));
  config.k_tilde = std::min(config.k_tilde, k);
  config.n_tilde = std::max(config.n_tilde, config.k_tilde);
  config.seed = seed;
  return config;
}

LotteryConfig LotteryConfig::sigmoid_logit(int k, int n, double v, std::uint64_t seed) {
  LotteryConfig config;
  config.kind = MappingKind::SigmoidLogit;
  config.mu = 1.0 - static_cast<double>(k) / static_cast<double>(n);
  config.v = v;
  config.seed = seed;
  return config;
}

void validate(const LotteryConfig& config, int k, int n) {
  if (config.kind == MappingKind::Boundary) {
    if (config.k_tilde < 0 || config.k_tilde > k) throw DegenerateInputError("k_tilde must lie in [0, k]");
    if (config.k_tilde > config.n_tilde) throw DegenerateInputError("k_tilde exceeds the lottery pool n_tilde");
    if (k - config.k_tilde + config.n_tilde > n) {
      throw InfeasibleSpaceError("lottery pool extends past the candidate list");
    }
  }
  if (config.kind == MappingKind::SigmoidLogit) {
    if (!(config.mu > 0.0 && config.mu < 1.0)) throw DegenerateInputError("mu must lie in (0, 1)");
    if (!(config.v > 0.0)) throw DegenerateInputError("v must be positive");
  }
}

namespace {

// Indices ordered by descending score, ascending id on ties.
std::vector<int> ranked_ids(const std::vector<double>& scores) {
  std::vector<int> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return ids;
}

// Sequential weighted draws without replacement; weights renormalize
// implicitly as mass is removed.
std::vector<int> weighted_sample_without_replacement(const std::vector<int>& ids,
                                                     std::vector<double> weights, int draws,
                                                     Rng& rng) {
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) {
    weights.assign(weights.size(), 1.0);  // degenerate weights: uniform fallback
    total = static_cast<double>(weights.size());
  }
  std::vector<int> picked;
  picked.reserve(static_cast<std::size_t>(draws));
  std::vector<bool> used(ids.size(), false);
  for (int d = 0; d < draws; ++d) {
    double ticket = rng.uniform01() * total;
    std::size_t chosen = ids.size();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (used[i]) continue;
      ticket -= weights[i];
      if (ticket < 0.0) {
        chosen = i;
        break;
      }
    }
    if (chosen == ids.size()) {
      // numeric slack put the ticket past the last live entry
      for (std::size_t i = ids.size(); i-- > 0;) {
        if (!used[i]) {
          chosen = i;
          break;
        }
      }
    }
    used[chosen] = true;
    total -= weights[chosen];
    picked.push_back(ids[chosen]);
  }
  return picked;
}

}  // namespace

Allocation top_k(const PredictionVector& pred, int k) {
  const int n = static_cast<int>(pred.scores.size());
  if (k <= 0) throw DegenerateInputError("top_k requires k > 0");
  if (k > n) throw InfeasibleSpaceError("k exceeds the number of candidates");
  const std::vector<int> order = ranked_ids(pred.scores);
  Allocation alloc;
  alloc.outcomes.assign(static_cast<std::size_t>(n), 0);
  alloc.k = k;
  for (int i = 0; i < k; ++i) alloc.outcomes[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  return alloc;
}

Allocation boundary_lottery(const PredictionVector& pred, int k, const LotteryConfig& config) {
  const int n = static_cast<int>(pred.scores.size());
  if (k <= 0) throw DegenerateInputError("boundary_lottery requires k > 0");
  if (k > n) throw InfeasibleSpaceError("k exceeds the number of candidates");
  validate(config, k, n);

  const std::vector<int> order = ranked_ids(pred.scores);
  Allocation alloc;
  alloc.outcomes.assign(static_cast<std::size_t>(n), 0);
  alloc.k = k;

  const int deterministic = k - config.k_tilde;
  for (int i = 0; i < deterministic; ++i) {
    alloc.outcomes[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  }
  if (config.k_tilde == 0) return alloc;

  std::vector<int> pool_ids;
  std::vector<double> pool_weights;
  for (int r = deterministic; r < deterministic + config.n_tilde; ++r) {
    const int id = order[static_cast<std::size_t>(r)];
    pool_ids.push_back(id);
    pool_weights.push_back(std::max(0.0, pred.scores[static_cast<std::size_t>(id)]));
  }
  Rng rng(config.seed);
  for (int id : weighted_sample_without_replacement(pool_ids, pool_weights, config.k_tilde, rng)) {
    alloc.outcomes[static_cast<std::size_t>(id)] = 1;
  }
  return alloc;
}

double sigmoid_logit_weight(double x, double mu, double v) {
  constexpr double kEdge = 1e-9;
  x = std::clamp(x, kEdge, 1.0 - kEdge);
  mu = std::clamp(mu, kEdge, 1.0 - kEdge);
  const double odds = (x * (1.0 - mu)) / (mu * (1.0 - x));
  return 1.0 / (1.0 + std::pow(odds, -v));
}

Allocation sigmoid_logit_lottery(const PredictionVector& pred, int k, const LotteryConfig& config) {
  const int n = static_cast<int>(pred.scores.size());
  if (k <= 0) throw DegenerateInputError("sigmoid_logit_lottery requires k > 0");
  if (k > n) throw InfeasibleSpaceError("k exceeds the number of candidates");
  validate(config, k, n);

  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<double> weights(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    weights[static_cast<std::size_t>(i)] =
        sigmoid_logit_weight(pred.scores[static_cast<std::size_t>(i)], config.mu, config.v);
  }
  Rng rng(config.seed);
  Allocation alloc;
  alloc.outcomes.assign(static_cast<std::size_t>(n), 0);
  alloc.k = k;
  for (int id : weighted_sample_without_replacement(ids, weights, k, rng)) {
    alloc.outcomes[static_cast<std::size_t>(id)] = 1;
  }
  return alloc;
}

}  // namespace allocmult
