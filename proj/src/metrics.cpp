#include "allocmult/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "allocmult/mappings.hpp"

namespace allocmult {

namespace {

void check_same_length(const std::vector<Allocation>& allocs) {
  for (std::size_t i = 1; i < allocs.size(); ++i) {
    if (allocs[i].outcomes.size() != allocs[0].outcomes.size()) {
      throw DimensionError("allocations differ in length");
    }
  }
}

}  // namespace

int unique_allocations(const std::vector<Allocation>& allocs) {
  check_same_length(allocs);
  std::set<std::vector<std::uint8_t>> distinct;
  for (const Allocation& alloc : allocs) distinct.insert(alloc.outcomes);
  return static_cast<int>(distinct.size());
}

std::optional<double> threshold_test_ratio_or_missing(const Allocation& alloc,
                                                      const CandidatePool& pool) {
  if (static_cast<int>(alloc.outcomes.size()) != pool.n()) {
    throw DimensionError("allocation length does not match pool");
  }
  double black_sum = 0.0, white_sum = 0.0;
  int black_count = 0, white_count = 0;
  for (int i = 0; i < pool.n(); ++i) {
    if (!alloc.outcomes[static_cast<std::size_t>(i)]) continue;
    const Individual& ind = pool.at(i);
    if (ind.race == Race::Black) {
      black_sum += ind.chronic_illnesses;
      ++black_count;
    } else if (ind.race == Race::White) {
      white_sum += ind.chronic_illnesses;
      ++white_count;
    }
  }
  if (black_count == 0 || white_count == 0) return std::nullopt;
  const double white_mean = white_sum / white_count;
  if (white_mean == 0.0) return std::nullopt;
  return (black_sum / black_count) / white_mean;
}

double threshold_test_ratio(const Allocation& alloc, const CandidatePool& pool) {
  const auto ratio = threshold_test_ratio_or_missing(alloc, pool);
  if (!ratio) throw UndefinedRatioError("no selected patients in one of the compared groups");
  return *ratio;
}

double pairwise_consistency(const std::vector<Allocation>& allocs) {
  if (allocs.size() < 2) throw DegenerateInputError("pairwise consistency needs at least 2 allocations");
  check_same_length(allocs);
  const double m = static_cast<double>(allocs.size());
  const double pairs = m * (m - 1.0) / 2.0;
  const std::size_t n = allocs[0].outcomes.size();

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const Allocation& alloc : allocs) s += alloc.outcomes[i];
    // pairs agreeing on individual i: both selected or both rejected
    total += (s * (s - 1.0) / 2.0 + (m - s) * (m - s - 1.0) / 2.0) / pairs;
  }
  return total / static_cast<double>(n);
}

OutcomeProfile outcome_profile(const std::vector<Allocation>& allocs, const CandidatePool& pool) {
  if (allocs.empty()) throw DegenerateInputError("outcome profile needs at least one allocation");
  check_same_length(allocs);
  if (static_cast<int>(allocs[0].outcomes.size()) != pool.n()) {
    throw DimensionError("allocation length does not match pool");
  }
  if (pool.n_prime() == 0) throw DegenerateInputError("pool has no qualified individuals");

  int never = 0, always = 0, mixed = 0;
  for (int i = 0; i < pool.n(); ++i) {
    if (!pool.at(i).qualified) continue;
    int count = 0;
    for (const Allocation& alloc : allocs) count += alloc.outcomes[static_cast<std::size_t>(i)];
    if (count == 0) {
      ++never;
    } else if (count == static_cast<int>(allocs.size())) {
      ++always;
    } else {
      ++mixed;
    }
  }
  OutcomeProfile profile;
  profile.systemic_rejection = static_cast<double>(never) / pool.n_prime();
  profile.multiple_outcomes = static_cast<double>(mixed) / pool.n_prime();
  profile.always_accepted = static_cast<double>(always) / pool.n_prime();
  return profile;
}

double age_entropy(const Allocation& alloc, const CandidatePool& pool) {
  if (static_cast<int>(alloc.outcomes.size()) != pool.n()) {
    throw DimensionError("allocation length does not match pool");
  }
  int counts[kAgeBrackets] = {0};
  int selected = 0;
  for (int i = 0; i < pool.n(); ++i) {
    if (alloc.outcomes[static_cast<std::size_t>(i)]) {
      ++counts[pool.at(i).age_bracket];
      ++selected;
    }
  }
  if (selected == 0) return 0.0;
  double entropy = 0.0;
  for (int bracket = 0; bracket < kAgeBrackets; ++bracket) {
    if (counts[bracket] == 0) continue;
    const double p = static_cast<double>(counts[bracket]) / selected;
    entropy -= p * std::log2(p);
  }
  return entropy;
}

Allocation ensemble_allocation(const RashomonSample& sample, int k) {
  if (sample.members.empty()) throw DegenerateInputError("ensemble of an empty sample");
  const std::size_t n = sample.members[0].scores.size();
  PredictionVector mean;
  mean.scores.assign(n, 0.0);
  for (const PredictionVector& member : sample.members) {
    if (member.scores.size() != n) throw DimensionError("sample members differ in length");
    for (std::size_t i = 0; i < n; ++i) mean.scores[i] += member.scores[i];
  }
  for (double& s : mean.scores) s /= static_cast<double>(sample.members.size());
  return top_k(mean, k);
}

std::map<Race, GroupScoreSummary> risk_by_group(const RashomonSample& sample,
                                                const CandidatePool& pool, int illness_level) {
  std::map<Race, std::vector<double>> strata;
  for (int i = 0; i < pool.n(); ++i) {
    const Individual& ind = pool.at(i);
    if (ind.chronic_illnesses != illness_level) continue;
    auto& scores = strata[ind.race];
    for (const PredictionVector& member : sample.members) {
      if (static_cast<int>(member.scores.size()) != pool.n()) {
        throw DimensionError("sample member length does not match pool");
      }
      scores.push_back(member.scores[static_cast<std::size_t>(i)]);
    }
  }

  std::map<Race, GroupScoreSummary> out;
  for (auto& [race, scores] : strata) {
    if (scores.empty()) continue;
    std::sort(scores.begin(), scores.end());
    GroupScoreSummary summary;
    summary.count = static_cast<int>(scores.size());
    double sum = 0.0;
    for (double s : scores) sum += s;
    summary.mean = sum / scores.size();
    double var = 0.0;
    for (double s : scores) var += (s - summary.mean) * (s - summary.mean);
    summary.stddev = scores.size() > 1 ? std::sqrt(var / (scores.size() - 1)) : 0.0;
    auto quantile = [&scores](double p) {
      const double pos = p * (scores.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, scores.size() - 1);
      const double frac = pos - static_cast<double>(lo);
      return scores[lo] * (1.0 - frac) + scores[hi] * frac;
    };
    summary.q05 = quantile(0.05);
    summary.q25 = quantile(0.25);
    summary.q50 = quantile(0.50);
    summary.q75 = quantile(0.75);
    summary.q95 = quantile(0.95);
    out[race] = summary;
  }
  return out;
}

}  // namespace allocmult
