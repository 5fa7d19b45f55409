#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <vector>

#include "allocmult/combinatorics.hpp"
#include "allocmult/domain.hpp"
#include "allocmult/rng.hpp"
#include "support/brute_force.hpp"
#include "support/stats.hpp"

using namespace allocmult;

namespace {

std::vector<std::uint8_t> first_qualified_mask(int n, int n_prime) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n_prime; ++i) mask[static_cast<std::size_t>(i)] = 1;
  return mask;
}

CandidatePool pool_of(const std::vector<std::pair<int, Race>>& people, int q) {
  std::vector<Individual> individuals;
  for (const auto& [illness, race] : people) {
    Individual ind;
    ind.features = {0.0};
    ind.chronic_illnesses = illness;
    ind.qualified = illness >= q;
    ind.race = race;
    individuals.push_back(ind);
  }
  return CandidatePool(std::move(individuals), q);
}

}  // namespace

TEST_CASE("binomial coefficients") {
  CHECK(binomial(6, 4) == 15);
  CHECK(binomial(4, 1) == 4);
  CHECK(binomial(0, 0) == 1);
  CHECK(binomial(5, 6) == 0);
  CHECK(binomial(5, -1) == 0);
  CHECK(binomial(1000, 500).str().size() == 300);  // ~9.05e299
}

TEST_CASE("count matches the worked 10-choose-5 scenario") {
  CHECK(count_equal_utility({10, 5, 6, 4, 0}).value == 60);
}

TEST_CASE("count with slack matches brute force") {
  CHECK(count_equal_utility({10, 5, 6, 4, 1}).value == 180);
  const auto mask = first_qualified_mask(10, 6);
  CHECK(testoracle::count_equal_utility_brute(10, 5, mask, 4, 1) == 180);
}

TEST_CASE("tiny space counted exactly") {
  CHECK(count_equal_utility({4, 2, 2, 1, 0}).value == 4);
  const auto mask = first_qualified_mask(4, 2);
  CHECK(testoracle::count_equal_utility_brute(4, 2, mask, 1, 0) == 4);
}

TEST_CASE("large count rounds to one significant figure") {
  const SpaceCount count = count_equal_utility({100, 25, 50, 21, 0});
  const auto [digit, exponent] = count.one_significant_figure();
  CHECK(digit == 2);
  CHECK(exponent == 19);
}

TEST_CASE("empty spaces count zero") {
  CHECK(count_equal_utility({10, 5, 3, 4, 0}).empty());
  CHECK(count_equal_utility({10, 9, 8, 5, 0}).empty());
}

TEST_CASE("count equals enumeration on a small cross-product") {
  for (int n = 2; n <= 9; ++n) {
    for (int k = 1; k <= n; ++k) {
      for (int n_prime = 0; n_prime <= n; ++n_prime) {
        const auto mask = first_qualified_mask(n, n_prime);
        for (int k_prime = 0; k_prime <= k; ++k_prime) {
          for (int delta = 0; delta <= k_prime; ++delta) {
            const long long brute = testoracle::count_equal_utility_brute(n, k, mask, k_prime, delta);
            const SpaceCount count = count_equal_utility({n, k, n_prime, k_prime, delta});
            REQUIRE(count.value == brute);
          }
        }
      }
    }
  }
}

TEST_CASE("degenerate slack sums match brute force") {
  // delta == k' and n' == k': every feasible selected-qualified count allowed
  const auto mask = first_qualified_mask(9, 4);
  const long long brute = testoracle::count_equal_utility_brute(9, 5, mask, 4, 4);
  CHECK(count_equal_utility({9, 5, 4, 4, 4}).value == brute);
}

TEST_CASE("sampler forced choice") {
  EqualUtilitySpace space{2, 1, 1, 1, 0};
  const std::vector<std::uint8_t> mask = {1, 0};
  for (int i = 0; i < 10; ++i) {
    Allocation alloc = sample_equal_utility(space, mask, derive_seed(5, {static_cast<std::uint64_t>(i)}));
    CHECK(alloc.outcomes[0] == 1);
    CHECK(alloc.outcomes[1] == 0);
  }
}

TEST_CASE("sampler rejects empty spaces") {
  const std::vector<std::uint8_t> mask = {1, 1, 1, 0};
  CHECK_THROWS_AS(sample_equal_utility({4, 2, 3, 0, 0}, mask, 1), InfeasibleSpaceError);
}

TEST_CASE("sampler marginals match k'/n' and (k-k')/(n-n')") {
  EqualUtilitySpace space{10, 5, 6, 4, 0};
  const auto mask = first_qualified_mask(10, 6);
  const int draws = 10000;
  std::vector<int> hits(10, 0);
  for (int d = 0; d < draws; ++d) {
    Allocation alloc = sample_equal_utility(space, mask, derive_seed(404, {static_cast<std::uint64_t>(d)}));
    for (int i = 0; i < 10; ++i) hits[static_cast<std::size_t>(i)] += alloc.outcomes[static_cast<std::size_t>(i)];
  }
  const double three_sigma_q = 3.0 * std::sqrt((2.0 / 3.0) * (1.0 / 3.0) / draws);
  const double three_sigma_u = 3.0 * std::sqrt(0.25 * 0.75 / draws);
  for (int i = 0; i < 6; ++i) {
    CHECK(std::fabs(hits[static_cast<std::size_t>(i)] / double(draws) - 2.0 / 3.0) < three_sigma_q);
  }
  for (int i = 6; i < 10; ++i) {
    CHECK(std::fabs(hits[static_cast<std::size_t>(i)] / double(draws) - 0.25) < three_sigma_u);
  }
}

TEST_CASE("sampler is uniform over the enumerated space") {
  EqualUtilitySpace space{10, 5, 6, 4, 0};
  const auto mask = first_qualified_mask(10, 6);

  std::map<std::vector<std::uint8_t>, int> cell_of;
  int next_cell = 0;
  for (const auto& outcomes : testoracle::enumerate_allocations(10, 5)) {
    int selected_qualified = 0;
    for (int i = 0; i < 6; ++i) selected_qualified += outcomes[static_cast<std::size_t>(i)];
    if (selected_qualified == 4) cell_of[outcomes] = next_cell++;
  }
  REQUIRE(next_cell == 60);

  const int draws = 10000;
  std::vector<long> observed(60, 0);
  for (int d = 0; d < draws; ++d) {
    Allocation alloc = sample_equal_utility(space, mask, derive_seed(99, {static_cast<std::uint64_t>(d)}));
    auto it = cell_of.find(alloc.outcomes);
    REQUIRE(it != cell_of.end());
    ++observed[static_cast<std::size_t>(it->second)];
  }
  const double stat = teststat::chi_square_uniform(observed, draws);
  CHECK(teststat::chi_square_pvalue(stat, 59) > 0.001);
}

TEST_CASE("sampler with slack hits every utility band proportionally") {
  EqualUtilitySpace space{10, 5, 6, 4, 1};
  const auto mask = first_qualified_mask(10, 6);
  const int draws = 6000;
  int with_four = 0, with_three = 0;
  for (int d = 0; d < draws; ++d) {
    Allocation alloc = sample_equal_utility(space, mask, derive_seed(7, {static_cast<std::uint64_t>(d)}));
    int selected_qualified = 0;
    for (int i = 0; i < 6; ++i) selected_qualified += alloc.outcomes[static_cast<std::size_t>(i)];
    if (selected_qualified == 4) ++with_four;
    if (selected_qualified == 3) ++with_three;
  }
  CHECK(with_four + with_three == draws);
  // 60 of 180 allocations have k' = 4
  const double share = with_four / double(draws);
  CHECK(std::fabs(share - 1.0 / 3.0) < 3.0 * std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / draws));
}

TEST_CASE("analytic stats reproduce the anchor consistency") {
  const SpaceStats stats = analytic_space_stats({1000, 250, 320, 219, 0});
  CHECK(stats.p_qualified == doctest::Approx(219.0 / 320.0));
  CHECK(stats.p_unqualified == doctest::Approx(31.0 / 680.0));
  CHECK(std::fabs(stats.pairwise_consistency - 0.80) < 0.01);
}

TEST_CASE("analytic consistency is 1 when the space has a single allocation") {
  // k' = n' and k - k' = n - n' force every draw to the same allocation
  const SpaceStats stats = analytic_space_stats({5, 5, 2, 2, 0});
  CHECK(stats.pairwise_consistency == doctest::Approx(1.0));
}

TEST_CASE("analytic consistency matches Monte-Carlo pair agreement") {
  EqualUtilitySpace space{10, 5, 6, 4, 0};
  const auto mask = first_qualified_mask(10, 6);
  const SpaceStats stats = analytic_space_stats(space);

  const int pairs = 50000;
  double agree_sum = 0.0;
  for (int p = 0; p < pairs; ++p) {
    Allocation a = sample_equal_utility(space, mask, derive_seed(11, {static_cast<std::uint64_t>(p), 0}));
    Allocation b = sample_equal_utility(space, mask, derive_seed(11, {static_cast<std::uint64_t>(p), 1}));
    int agree = 0;
    for (int i = 0; i < 10; ++i) {
      if (a.outcomes[static_cast<std::size_t>(i)] == b.outcomes[static_cast<std::size_t>(i)]) ++agree;
    }
    agree_sum += agree / 10.0;
  }
  CHECK(std::fabs(agree_sum / pairs - stats.pairwise_consistency) < 0.005);
}

TEST_CASE("reference allocation takes the sickest when counts are distinct") {
  CandidatePool pool = pool_of({{5, Race::Other}, {4, Race::Other}, {3, Race::Other},
                                {2, Race::Other}, {1, Race::Other}, {0, Race::Other}},
                               3);
  Allocation alloc = reference_least_discriminatory(pool, 3, 2);
  CHECK(alloc.outcomes == std::vector<std::uint8_t>{1, 1, 0, 1, 0, 0});
  CHECK(allocation_utility(alloc, pool) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("reference allocation tie goes to the scheduled group") {
  // Tie at illness 3 between a Black and a White patient, one qualified slot.
  // Black's next candidate (illness 2) is sicker than White's (none), so the
  // alternation starts with Black.
  CandidatePool pool = pool_of({{3, Race::Black}, {3, Race::White}, {2, Race::Black}, {0, Race::White}}, 2);
  Allocation alloc = reference_least_discriminatory(pool, 2, 1);
  CHECK(alloc.outcomes[0] == 1);
  CHECK(alloc.outcomes[1] == 0);
  CHECK(alloc.outcomes[3] == 1);  // the only unqualified candidate

  // Mirror case: White's next candidate is sicker.
  CandidatePool mirrored = pool_of({{3, Race::Black}, {3, Race::White}, {2, Race::White}, {0, Race::White}}, 2);
  Allocation mirrored_alloc = reference_least_discriminatory(mirrored, 2, 1);
  CHECK(mirrored_alloc.outcomes[0] == 0);
  CHECK(mirrored_alloc.outcomes[1] == 1);

  // Equal next candidates fall back to Black.
  CandidatePool balanced = pool_of({{3, Race::Black}, {3, Race::White}, {1, Race::Black}, {1, Race::White}}, 3);
  Allocation balanced_alloc = reference_least_discriminatory(balanced, 2, 1);
  CHECK(balanced_alloc.outcomes[0] == 1);
  CHECK(balanced_alloc.outcomes[1] == 0);
}

TEST_CASE("reference allocation alternates within a partially taken tie") {
  // Five qualified patients all at illness 4: B0, W1, B2, W3, B4; take 4.
  // Alternation (Black first): B0, W1, B2, W3.
  CandidatePool pool = pool_of({{4, Race::Black}, {4, Race::White}, {4, Race::Black},
                                {4, Race::White}, {4, Race::Black}, {0, Race::Other}},
                               1);
  Allocation alloc = reference_least_discriminatory(pool, 4, 4);
  CHECK(alloc.outcomes == std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0});
}

TEST_CASE("reference allocation is deterministic and infeasibility throws") {
  CandidatePool pool = pool_of({{4, Race::Black}, {3, Race::White}, {1, Race::Black}, {0, Race::White}}, 2);
  Allocation a = reference_least_discriminatory(pool, 3, 2);
  Allocation b = reference_least_discriminatory(pool, 3, 2);
  CHECK(a.outcomes == b.outcomes);
  CHECK_THROWS_AS(reference_least_discriminatory(pool, 3, 3), InfeasibleSpaceError);
}
