#pragma once

#include <cstdint>

#include "allocmult/domain.hpp"

namespace allocmult {

enum class MappingKind { TopK, Boundary, SigmoidLogit };

// Parameters for the stochastic prediction-to-allocation mappings.
//   Boundary: the top k - k_tilde scores are selected outright and the
//   remaining k_tilde resources are raffled over the next n_tilde ranks.
//   SigmoidLogit: all k slots are raffled with weights f(score; mu, v).
struct LotteryConfig {
  MappingKind kind = MappingKind::TopK;
  int k_tilde = 0;
  int n_tilde = 0;
  double mu = 0.5;
  double v = 2.0;
  std::uint64_t seed = 0;

  /// Boundary parameters as fractions of k (e.g. 0.25k randomized over the
  /// next 0.50k ranks). Fractions round to nearest, floored at 1.
  static LotteryConfig boundary(int k, double k_frac, double n_frac, std::uint64_t seed);
  /// Sigmoid-logit lottery with mu = 1 - k/n.
  static LotteryConfig sigmoid_logit(int k, int n, double v, std::uint64_t seed);
};

void validate(const LotteryConfig& config, int k, int n);

/// Deterministic top-k mapping. Ties broken by descending score then
/// ascending id.
Allocation top_k(const PredictionVector& pred, int k);

/// Partial lottery: ranks 1..k-k_tilde deterministic, then k_tilde slots
/// drawn without replacement from the next n_tilde ranks with weights
/// proportional to raw scores. Zero total weight falls back to uniform.
Allocation boundary_lottery(const PredictionVector& pred, int k, const LotteryConfig& config);

/// Weight transform: [1 + (x(1-mu) / (mu(1-x)))^-v]^-1, strictly increasing
/// in x; scores are clamped away from the singular endpoints.
double sigmoid_logit_weight(double x, double mu, double v);

/// Full weighted lottery over all n candidates with sigmoid-logit weights.
Allocation sigmoid_logit_lottery(const PredictionVector& pred, int k, const LotteryConfig& config);

}  // namespace allocmult
