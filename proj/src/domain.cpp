#include "allocmult/domain.hpp"

#include <cmath>
#include <numeric>

namespace allocmult {

std::string to_string(Race race) {
  switch (race) {
    case Race::Black: return "black";
    case Race::White: return "white";
    case Race::Other: return "other";
  }
  return "other";
}

namespace {

void check_individual(const Individual& ind, int q, int index) {
  if (ind.chronic_illnesses < 0) {
    throw DataError("individual " + std::to_string(index) + ": negative chronic illness count");
  }
  if (ind.qualified != (ind.chronic_illnesses >= q)) {
    throw DataError("individual " + std::to_string(index) +
                    ": qualified flag inconsistent with threshold q=" + std::to_string(q));
  }
  if (ind.age_bracket < 0 || ind.age_bracket >= kAgeBrackets) {
    throw DataError("individual " + std::to_string(index) + ": age bracket out of range");
  }
}

}  // namespace

CandidatePool::CandidatePool(std::vector<Individual> individuals, int q)
    : individuals_(std::move(individuals)), q_(q) {
  if (q_ < 0) throw DataError("qualification threshold q must be nonnegative");
  const std::size_t dim = individuals_.empty() ? 0 : individuals_.front().features.size();
  for (std::size_t i = 0; i < individuals_.size(); ++i) {
    individuals_[i].id = static_cast<int>(i);
    check_individual(individuals_[i], q_, static_cast<int>(i));
    if (individuals_[i].features.size() != dim) {
      throw DimensionError("individual " + std::to_string(i) + ": feature dimension mismatch");
    }
    if (individuals_[i].qualified) ++n_prime_;
  }
}

CandidatePool relabel(const CandidatePool& pool, int q) {
  std::vector<Individual> copy = pool.individuals();
  for (Individual& ind : copy) ind.qualified = ind.chronic_illnesses >= q;
  return CandidatePool(std::move(copy), q);
}

Allocation make_allocation(std::vector<std::uint8_t> outcomes) {
  Allocation alloc;
  alloc.k = 0;
  for (std::uint8_t o : outcomes) {
    if (o > 1) throw DataError("allocation outcomes must be binary");
    alloc.k += o;
  }
  if (alloc.k == 0) throw DegenerateInputError("allocation selects nobody (k == 0)");
  alloc.outcomes = std::move(outcomes);
  return alloc;
}

double allocation_utility(Allocation& alloc, const CandidatePool& pool) {
  if (static_cast<int>(alloc.outcomes.size()) != pool.n()) {
    throw DimensionError("allocation length " + std::to_string(alloc.outcomes.size()) +
                         " does not match pool size " + std::to_string(pool.n()));
  }
  if (alloc.k <= 0) throw DegenerateInputError("allocation has k == 0");
  int selected_qualified = 0;
  for (int i = 0; i < pool.n(); ++i) {
    if (alloc.outcomes[static_cast<std::size_t>(i)] && pool.at(i).qualified) ++selected_qualified;
  }
  alloc.k_prime = selected_qualified;
  return static_cast<double>(selected_qualified) / static_cast<double>(alloc.k);
}

double allocation_utility(const Allocation& alloc, const CandidatePool& pool) {
  Allocation copy = alloc;
  return allocation_utility(copy, pool);
}

std::string to_string(SamplingMethod method) {
  switch (method) {
    case SamplingMethod::FeatureSubsets: return "feature_subsets";
    case SamplingMethod::Bootstrap: return "bootstrap";
    case SamplingMethod::Shuffle: return "shuffle";
    case SamplingMethod::Perturbation: return "perturbation";
    case SamplingMethod::Baseline: return "baseline";
  }
  return "baseline";
}

SamplingMethod sampling_method_from_string(const std::string& name) {
  if (name == "feature_subsets") return SamplingMethod::FeatureSubsets;
  if (name == "bootstrap") return SamplingMethod::Bootstrap;
  if (name == "shuffle") return SamplingMethod::Shuffle;
  if (name == "perturbation") return SamplingMethod::Perturbation;
  if (name == "baseline") return SamplingMethod::Baseline;
  throw DataError("unknown sampling method: " + name);
}

void validate(const PredictionVector& pred) {
  for (double s : pred.scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw DataError("prediction score outside [0, 1]");
  }
  if (!std::isfinite(pred.validation_loss) || pred.validation_loss < 0.0) {
    throw DataError("validation loss must be finite and nonnegative");
  }
}

void validate(const EqualUtilitySpace& space) {
  if (space.n < 0 || space.k < 0 || space.n_prime < 0 || space.k_prime < 0 || space.delta < 0) {
    throw DegenerateInputError("equal-utility space fields must be nonnegative");
  }
  if (space.k > space.n) throw DegenerateInputError("k exceeds n");
  if (space.n_prime > space.n) throw DegenerateInputError("n' exceeds n");
  if (space.k_prime > space.k) throw DegenerateInputError("k' exceeds k");
}

bool space_is_empty(const EqualUtilitySpace& space) {
  validate(space);
  return space.k_prime > space.n_prime || (space.k - space.k_prime) > (space.n - space.n_prime);
}

}  // namespace allocmult
