#include "allocmult/combinatorics.hpp"

#include <algorithm>
#include <map>

namespace allocmult {

BigInt binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  BigInt result = 1;
  for (int i = 1; i <= k; ++i) {
    result *= n - k + i;
    result /= i;  // exact: result is C(n-k+i, i) after this step
  }
  return result;
}

std::pair<int, int> SpaceCount::one_significant_figure() const {
  if (value == 0) return {0, 0};
  const std::string digits = value.str();
  int exponent = static_cast<int>(digits.size()) - 1;
  int leading = digits[0] - '0';
  // round on the second digit
  if (digits.size() > 1 && digits[1] >= '5') ++leading;
  if (leading == 10) {
    leading = 1;
    ++exponent;
  }
  return {leading, exponent};
}

SpaceCount count_equal_utility(const EqualUtilitySpace& space) {
  validate(space);
  BigInt total = 0;
  const int lo = std::max(0, space.k_prime - space.delta);
  for (int j = lo; j <= space.k_prime; ++j) {
    total += binomial(space.n_prime, j) * binomial(space.n - space.n_prime, space.k - j);
  }
  return SpaceCount{total};
}

namespace {

// Uniform BigInt in [0, bound) by rejection on the bit length of bound-1.
BigInt random_below(const BigInt& bound, Rng& rng) {
  const BigInt top = bound - 1;
  const unsigned bits = (top == 0) ? 1 : static_cast<unsigned>(boost::multiprecision::msb(top)) + 1;
  while (true) {
    BigInt draw = 0;
    for (unsigned produced = 0; produced < bits; produced += 64) {
      draw <<= 64;
      draw |= BigInt(rng.next_u64());
    }
    draw >>= (64 - bits % 64) % 64;
    if (draw < bound) return draw;
  }
}

}  // namespace

Allocation sample_equal_utility(const EqualUtilitySpace& space,
                                const std::vector<std::uint8_t>& qualified,
                                std::uint64_t rng_seed) {
  const SpaceCount count = count_equal_utility(space);
  if (count.empty()) throw InfeasibleSpaceError("equal-utility space is empty");
  if (static_cast<int>(qualified.size()) != space.n) {
    throw DimensionError("qualified mask length does not match space n");
  }
  int n_prime = 0;
  for (std::uint8_t fl : qualified) n_prime += fl ? 1 : 0;
  if (n_prime != space.n_prime) {
    throw DimensionError("qualified mask has " + std::to_string(n_prime) +
                         " positives, space expects " + std::to_string(space.n_prime));
  }

  Rng rng(rng_seed);
  int selected_qualified = space.k_prime;
  if (space.delta > 0) {
    // draw the selected-qualified count proportional to its term
    const int lo = std::max(0, space.k_prime - space.delta);
    std::vector<BigInt> terms;
    for (int j = lo; j <= space.k_prime; ++j) {
      terms.push_back(binomial(space.n_prime, j) * binomial(space.n - space.n_prime, space.k - j));
    }
    BigInt ticket = random_below(count.value, rng);
    for (std::size_t idx = 0; idx < terms.size(); ++idx) {
      if (ticket < terms[idx]) {
        selected_qualified = lo + static_cast<int>(idx);
        break;
      }
      ticket -= terms[idx];
    }
  }

  std::vector<int> qualified_ids;
  std::vector<int> unqualified_ids;
  qualified_ids.reserve(static_cast<std::size_t>(space.n_prime));
  unqualified_ids.reserve(static_cast<std::size_t>(space.n - space.n_prime));
  for (int i = 0; i < space.n; ++i) {
    (qualified[static_cast<std::size_t>(i)] ? qualified_ids : unqualified_ids).push_back(i);
  }

  Allocation alloc;
  alloc.outcomes.assign(static_cast<std::size_t>(space.n), 0);
  alloc.k = space.k;
  alloc.k_prime = selected_qualified;
  for (int pick : rng.sample_without_replacement(space.n_prime, selected_qualified)) {
    alloc.outcomes[static_cast<std::size_t>(qualified_ids[static_cast<std::size_t>(pick)])] = 1;
  }
  for (int pick : rng.sample_without_replacement(space.n - space.n_prime, space.k - selected_qualified)) {
    alloc.outcomes[static_cast<std::size_t>(unqualified_ids[static_cast<std::size_t>(pick)])] = 1;
  }
  return alloc;
}

Allocation sample_equal_utility(const EqualUtilitySpace& space, const CandidatePool& pool,
                                std::uint64_t rng_seed) {
  if (pool.n() != space.n || pool.n_prime() != space.n_prime) {
    throw DimensionError("pool (n, n') does not match the equal-utility space");
  }
  std::vector<std::uint8_t> qualified(static_cast<std::size_t>(pool.n()), 0);
  for (int i = 0; i < pool.n(); ++i) qualified[static_cast<std::size_t>(i)] = pool.at(i).qualified ? 1 : 0;
  return sample_equal_utility(space, qualified, rng_seed);
}

SpaceStats analytic_space_stats(const EqualUtilitySpace& space) {
  if (space.delta != 0) throw std::invalid_argument("analytic stats are defined for delta = 0");
  if (count_equal_utility(space).empty()) throw InfeasibleSpaceError("equal-utility space is empty");

  SpaceStats stats;
  const int n_unqualified = space.n - space.n_prime;
  const int k_unqualified = space.k - space.k_prime;
  if (space.n_prime > 0) {
    stats.p_qualified = static_cast<double>(space.k_prime) / space.n_prime;
  }
  if (n_unqualified > 0) {
    stats.p_unqualified = static_cast<double>(k_unqualified) / n_unqualified;
  }
  // Two independent uniform draws agree on an individual with probability
  // p^2 + (1-p)^2, where p is the group's marginal selection probability.
  const double wq = static_cast<double>(space.n_prime) / space.n;
  const double wu = static_cast<double>(n_unqualified) / space.n;
  const double pq = stats.p_qualified;
  const double pu = stats.p_unqualified;
  stats.pairwise_consistency = wq * (pq * pq + (1.0 - pq) * (1.0 - pq)) +
                               wu * (pu * pu + (1.0 - pu) * (1.0 - pu));
  return stats;
}

namespace {

struct RankedCandidate {
  int id;
  int illness;
  Race race;
};

// Selects `want` ids from one qualification class, sickest first. Returns ids.
std::vector<int> select_sickest(std::vector<RankedCandidate> candidates, int want) {
  std::sort(candidates.begin(), candidates.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.illness != b.illness) return a.illness > b.illness;
    return a.id < b.id;
  });

  std::vector<int> taken;
  taken.reserve(static_cast<std::size_t>(want));
  std::size_t pos = 0;
  while (want > 0) {
    // gather the equal-illness level starting at pos
    const int level = candidates[pos].illness;
    std::size_t end = pos;
    while (end < candidates.size() && candidates[end].illness == level) ++end;
    const int level_size = static_cast<int>(end - pos);

    if (level_size <= want) {
      for (std::size_t i = pos; i < end; ++i) taken.push_back(candidates[i].id);
      want -= level_size;
      pos = end;
      continue;
    }

    // Partially taken level: order the tie by alternating Black/White picks,
    // then whatever remains of the longer of the two, then other-race ids.
    std::vector<int> black, white, other;
    for (std::size_t i = pos; i < end; ++i) {
      switch (candidates[i].race) {
        case Race::Black: black.push_back(candidates[i].id); break;
        case Race::White: white.push_back(candidates[i].id); break;
        case Race::Other: other.push_back(candidates[i].id); break;
      }
    }
    // The alternation starts with the group whose next candidate below this
    // level is sicker; equal or absent falls back to Black.
    int black_next = -1, white_next = -1;
    for (std::size_t i = end; i < candidates.size(); ++i) {
      if (black_next < 0 && candidates[i].race == Race::Black) black_next = candidates[i].illness;
      if (white_next < 0 && candidates[i].race == Race::White) white_next = candidates[i].illness;
      if (black_next >= 0 && white_next >= 0) break;
    }
    bool take_black = white_next <= black_next;

    std::vector<int> ordered;
    ordered.reserve(static_cast<std::size_t>(level_size));
    std::size_t bi = 0, wi = 0;
    while (bi < black.size() || wi < white.size()) {
      if (bi < black.size() && (take_black || wi >= white.size())) {
        ordered.push_back(black[bi++]);
      } else {
        ordered.push_back(white[wi++]);
      }
      take_black = !take_black;
    }
    ordered.insert(ordered.end(), other.begin(), other.end());

    taken.insert(taken.end(), ordered.begin(), ordered.begin() + want);
    want = 0;
  }
  return taken;
}

}  // namespace

Allocation reference_least_discriminatory(const CandidatePool& pool, int k, int k_prime) {
  if (k <= 0 || k > pool.n()) throw InfeasibleSpaceError("k out of range for pool");
  if (k_prime < 0 || k_prime > k) throw InfeasibleSpaceError("k' out of range");
  if (k_prime > pool.n_prime() || (k - k_prime) > (pool.n() - pool.n_prime())) {
    throw InfeasibleSpaceError("pool cannot supply k' qualified and k-k' unqualified individuals");
  }

  std::vector<RankedCandidate> qualified, unqualified;
  for (const Individual& ind : pool.individuals()) {
    RankedCandidate c{ind.id, ind.chronic_illnesses, ind.race};
    (ind.qualified ? qualified : unqualified).push_back(c);
  }

  Allocation alloc;
  alloc.outcomes.assign(static_cast<std::size_t>(pool.n()), 0);
  alloc.k = k;
  alloc.k_prime = k_prime;
  if (k_prime > 0) {
    for (int id : select_sickest(qualified, k_prime)) alloc.outcomes[static_cast<std::size_t>(id)] = 1;
  }
  if (k - k_prime > 0) {
    for (int id : select_sickest(unqualified, k - k_prime)) alloc.outcomes[static_cast<std::size_t>(id)] = 1;
  }
  return alloc;
}

}  // namespace allocmult
