#pragma once

#include <map>
#include <optional>
#include <vector>

#include "allocmult/domain.hpp"

namespace allocmult {

/// Number of distinct outcome vectors.
int unique_allocations(const std::vector<Allocation>& allocs);

/// Mean chronic illnesses of selected Black patients divided by the mean of
/// selected White patients. Empty on either side -> UndefinedRatioError;
/// other-race patients never enter the ratio.
double threshold_test_ratio(const Allocation& alloc, const CandidatePool& pool);
std::optional<double> threshold_test_ratio_or_missing(const Allocation& alloc, const CandidatePool& pool);

/// Probability that a random individual receives the same outcome under two
/// random allocations from the set, computed exactly from per-individual
/// selection counts over all unordered pairs.
double pairwise_consistency(const std::vector<Allocation>& allocs);

struct OutcomeProfile {
  double systemic_rejection = 0.0;  // qualified, never selected
  double multiple_outcomes = 0.0;   // qualified, selected in some but not all
  double always_accepted = 0.0;     // qualified, selected everywhere
};

/// Outcome fate of qualified individuals across a set of allocations; the
/// three fractions sum to one.
OutcomeProfile outcome_profile(const std::vector<Allocation>& allocs, const CandidatePool& pool);

/// Base-2 Shannon entropy of selected individuals over the 7 age brackets.
double age_entropy(const Allocation& alloc, const CandidatePool& pool);

/// Average member predictions, then top-k.
Allocation ensemble_allocation(const RashomonSample& sample, int k);

struct GroupScoreSummary {
  int count = 0;         // individual-model score observations in the stratum
  double mean = 0.0;
  double stddev = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
};

/// Distribution of member scores per race for individuals with exactly
/// `illness_level` chronic illnesses. Races with no individuals at that
/// level are absent from the map.
std::map<Race, GroupScoreSummary> risk_by_group(const RashomonSample& sample,
                                                const CandidatePool& pool, int illness_level);

}  // namespace allocmult
