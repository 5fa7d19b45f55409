#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "allocmult/domain.hpp"
#include "allocmult/rng.hpp"

namespace allocmult {

using BigInt = boost::multiprecision::cpp_int;

/// Exact binomial coefficient; zero for out-of-range arguments.
BigInt binomial(int n, int k);

struct SpaceCount {
  BigInt value;

  bool empty() const { return value == 0; }
  std::string str() const { return value.str(); }
  /// Leading digit (rounded) and decimal exponent, e.g. 6577... -> {7, 11}.
  /// Rounding can carry: 9.6e11 -> {1, 12}.
  std::pair<int, int> one_significant_figure() const;
};

/// Number of delta-equal-utility allocations:
///   sum_{j = k'-delta}^{k'} C(n', j) * C(n-n', k-j)
/// Terms with impossible arguments contribute zero; an empty space counts 0.
SpaceCount count_equal_utility(const EqualUtilitySpace& space);

/// Uniform draw over the space. `qualified` marks which of the n ids are
/// qualified; the draw picks qualified and unqualified subsets independently,
/// never materializing the space. For delta > 0 the selected-qualified count
/// is first drawn with probability proportional to its term in the count.
Allocation sample_equal_utility(const EqualUtilitySpace& space,
                                const std::vector<std::uint8_t>& qualified,
                                std::uint64_t rng_seed);
Allocation sample_equal_utility(const EqualUtilitySpace& space, const CandidatePool& pool,
                                std::uint64_t rng_seed);

struct SpaceStats {
  double p_qualified = 0.0;       // marginal selection probability, qualified ids
  double p_unqualified = 0.0;     // marginal selection probability, unqualified ids
  double pairwise_consistency = 0.0;  // agreement prob. of two independent draws
};

/// Closed-form marginals and pairwise consistency of the delta = 0 space.
SpaceStats analytic_space_stats(const EqualUtilitySpace& space);

/// Deterministic equal-utility allocation selecting the sickest candidates
/// first: k' qualified then k-k' unqualified, each in descending order of
/// chronic illnesses. Within an equally-ill group that does not fully fit,
/// picks alternate between Black and White patients (starting with the group
/// whose next, strictly less ill candidate is sicker; Black when that ties),
/// with other-race candidates after the alternation, ordered by id.
Allocation reference_least_discriminatory(const CandidatePool& pool, int k, int k_prime);

/// Tie rule identifier recorded in experiment metadata.
inline constexpr const char* kReferenceTieRule = "alternate-black-white/sicker-next-first/black-on-tie/other-by-id";

}  // namespace allocmult
