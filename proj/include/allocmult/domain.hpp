#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace allocmult {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DegenerateInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InfeasibleSpaceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UndefinedRatioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Race { Black, White, Other };

std::string to_string(Race race);

/// Number of age bands in the feature schema (18-24 through 75+).
inline constexpr int kAgeBrackets = 7;

struct Individual {
  int id = 0;                  // index within its pool, [0, n)
  std::vector<double> features;
  bool qualified = false;      // chronic_illnesses >= pool threshold q
  Race race = Race::Other;
  int age_bracket = 0;         // 0..6
  int chronic_illnesses = 0;   // active illnesses realized in the outcome year
};

// Immutable after construction; the constructor re-checks the per-individual
// invariants against the pool threshold q.
class CandidatePool {
 public:
  CandidatePool(std::vector<Individual> individuals, int q);

  int n() const { return static_cast<int>(individuals_.size()); }
  int n_prime() const { return n_prime_; }
  int q() const { return q_; }
  const Individual& at(int i) const { return individuals_.at(static_cast<std::size_t>(i)); }
  const std::vector<Individual>& individuals() const { return individuals_; }

 private:
  std::vector<Individual> individuals_;
  int q_ = 1;
  int n_prime_ = 0;
};

/// Same individuals, qualification flags recomputed for a new threshold q.
CandidatePool relabel(const CandidatePool& pool, int q);

struct Allocation {
  std::vector<std::uint8_t> outcomes;  // binary, exactly k ones
  int k = 0;
  std::optional<int> k_prime;          // selected-qualified count, set once evaluated
};

/// Builds an allocation from a binary vector, deriving k. Throws
/// DegenerateInputError when the vector has no positives.
Allocation make_allocation(std::vector<std::uint8_t> outcomes);

/// Realized utility k'/k of an allocation against a pool (Def. 3 style
/// precision). Stores k' on the allocation as a side effect.
double allocation_utility(Allocation& alloc, const CandidatePool& pool);
double allocation_utility(const Allocation& alloc, const CandidatePool& pool);

enum class SamplingMethod { FeatureSubsets, Bootstrap, Shuffle, Perturbation, Baseline };

std::string to_string(SamplingMethod method);
SamplingMethod sampling_method_from_string(const std::string& name);

struct PredictionVector {
  std::vector<double> scores;   // one per pool individual, each in [0, 1]
  double validation_loss = 0.0; // cross-entropy on the validation split
  SamplingMethod method_tag = SamplingMethod::Baseline;
  std::string model_id;
};

void validate(const PredictionVector& pred);

// Models retained by the epsilon filter for one sampling method.
struct RashomonSample {
  std::vector<PredictionVector> members;
  double epsilon = 0.01;
  double best_loss = 0.0;
};

// The analytic object of the counting formula: n candidates, k resources,
// n' qualified, k' selected-qualified under the baseline, tolerance delta.
struct EqualUtilitySpace {
  int n = 0;
  int k = 0;
  int n_prime = 0;
  int k_prime = 0;
  int delta = 0;
};

/// Throws on malformed spaces (negative counts, k > n, ...). Feasibility is
/// not an error: an infeasible space simply has count zero.
void validate(const EqualUtilitySpace& space);

/// True when no allocation can select k' qualified out of n' and k-k'
/// unqualified out of n-n'.
bool space_is_empty(const EqualUtilitySpace& space);

}  // namespace allocmult
