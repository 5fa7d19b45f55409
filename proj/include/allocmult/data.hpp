#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "allocmult/domain.hpp"
#include "allocmult/learners.hpp"

namespace allocmult {

namespace schema {

/// Model feature columns, in order. Age bands occupy columns 1..7, costs
/// 9..21, prior-year illness count is last. Race is carried separately and
/// never enters the feature matrix.
inline constexpr std::array<const char*, 23> kFeatureColumns = {
    "dem_female",
    "dem_age_band_18-24_tm1",
    "dem_age_band_25-34_tm1",
    "dem_age_band_35-44_tm1",
    "dem_age_band_45-54_tm1",
    "dem_age_band_55-64_tm1",
    "dem_age_band_65-74_tm1",
    "dem_age_band_75+_tm1",
    "hypertension_elixhauser_tm1",
    "cost_dialysis_tm1",
    "cost_emergency_tm1",
    "cost_home_health_tm1",
    "cost_ip_medical_tm1",
    "cost_ip_surgical_tm1",
    "cost_laboratory_tm1",
    "cost_op_primary_care_tm1",
    "cost_op_specialists_tm1",
    "cost_op_surgery_tm1",
    "cost_other_tm1",
    "cost_pharmacy_tm1",
    "cost_physical_therapy_tm1",
    "cost_radiology_tm1",
    "gagne_sum_tm1",
};

inline constexpr const char* kRaceColumn = "race";
inline constexpr const char* kOutcomeColumn = "gagne_sum_t";  // next-year illness count

inline constexpr int kFirstAgeColumn = 1;
inline constexpr int kFirstCostColumn = 9;
inline constexpr int kNumCostColumns = 13;

/// Indices of the cost columns, the ones z-scored before training.
std::vector<int> cost_columns();

}  // namespace schema

/// Reads an Obermeyer-schema CSV. Requires every schema column plus race and
/// the next-year illness column; unknown columns are ignored. Rows with empty
/// cells are dropped; malformed numeric cells raise DataError naming the row
/// and column. Qualification is next-year illnesses >= q.
CandidatePool load_csv(const std::filesystem::path& path, int q);

enum class BiasMode { Unbiased, CostProxyBias };

struct GeneratorConfig {
  int population = 10000;
  std::uint64_t seed = 1;
  int q = 2;
  BiasMode bias_mode = BiasMode::Unbiased;
  double black_fraction = 0.45;
  double white_fraction = 0.45;  // remainder is other
  /// Cost multiplier applied to Black patients in cost-proxy-bias mode:
  /// equally sick patients then present systematically lower cost features.
  double cost_deflation = 0.55;
  // Latent severity: z = intercept + slope * age_bracket + sd * N(0,1).
  // Illness counts are Poisson(exp(z)); constants tuned so qualification
  // rates for q = 1, 2, 3 land near 0.55, 0.32, 0.19.
  double severity_intercept = -1.05;
  double severity_age_slope = 0.25;
  double severity_sd = 1.1;
  double prior_year_drift = 0.1;  // prior-year counts use exp(z - drift)
};

/// Synthetic population with the same schema as the CSV loader's output.
CandidatePool generate_synthetic(const GeneratorConfig& config);

/// Writes a pool as CSV plus a JSON manifest; load_pool round-trips the
/// CSV bit-exactly.
void save_pool(const CandidatePool& pool, const std::filesystem::path& csv_path,
               const std::filesystem::path& manifest_path, const std::string& provenance,
               std::uint64_t seed);
CandidatePool load_pool(const std::filesystem::path& csv_path, int q);

struct SplitPlan {
  double train_frac = 0.6;
  double validation_frac = 0.2;
  double test_frac = 0.2;
  int num_partitions = 10;
  int draws_per_partition = 25;
  int pool_size = 1000;
  std::uint64_t seed = 0;
};

void validate(const SplitPlan& plan, int population_size);

struct SplitTriple {
  int partition = 0;
  int draw = 0;
  std::vector<int> train_idx;
  std::vector<int> validation_idx;
  std::vector<int> pool_idx;  // drawn from the partition's test split
};

/// All (partition x draw) triples of the experiment protocol. Deterministic
/// given plan.seed; splits within a partition are disjoint and exhaustive.
std::vector<SplitTriple> make_splits(const CandidatePool& population, const SplitPlan& plan);

LabeledData gather_data(const CandidatePool& population, const std::vector<int>& idx);
CandidatePool gather_pool(const CandidatePool& population, const std::vector<int>& idx);

}  // namespace allocmult
