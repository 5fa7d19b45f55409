#include "allocmult/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "allocmult/rng.hpp"

namespace allocmult {

namespace schema {

std::vector<int> cost_columns() {
  std::vector<int> cols;
  for (int i = 0; i < kNumCostColumns; ++i) cols.push_back(kFirstCostColumn + i);
  return cols;
}

}  // namespace schema

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

Race parse_race(std::string value) {
  std::transform(value.begin(), value.end(), value.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (value == "black") return Race::Black;
  if (value == "white") return Race::White;
  return Race::Other;
}

int age_bracket_from_features(const std::vector<double>& features, int row) {
  int bracket = -1;
  for (int b = 0; b < kAgeBrackets; ++b) {
    const double v = features[static_cast<std::size_t>(schema::kFirstAgeColumn + b)];
    if (v == 1.0) {
      if (bracket >= 0) {
        throw DataError("row " + std::to_string(row) + ": multiple age bands set");
      }
      bracket = b;
    } else if (v != 0.0) {
      throw DataError("row " + std::to_string(row) + ": age band column must be 0 or 1");
    }
  }
  if (bracket < 0) throw DataError("row " + std::to_string(row) + ": no age band set");
  return bracket;
}

int parse_count(double value, int row, const char* column) {
  if (value < 0.0 || std::fabs(value - std::round(value)) > 1e-9) {
    throw DataError("row " + std::to_string(row) + ", column " + column +
                    ": expected a nonnegative integer count");
  }
  return static_cast<int>(std::llround(value));
}

}  // namespace

CandidatePool load_csv(const std::filesystem::path& path, int q) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError(path.string() + ": empty file");
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();

  const std::vector<std::string> header = split_csv_line(header_line);
  std::map<std::string, int> column_of;
  for (std::size_t i = 0; i < header.size(); ++i) column_of[header[i]] = static_cast<int>(i);

  std::vector<int> feature_cols;
  for (const char* name : schema::kFeatureColumns) {
    auto it = column_of.find(name);
    if (it == column_of.end()) throw DataError(path.string() + ": missing column " + name);
    feature_cols.push_back(it->second);
  }
  const auto race_it = column_of.find(schema::kRaceColumn);
  if (race_it == column_of.end()) throw DataError(path.string() + ": missing column race");
  const auto outcome_it = column_of.find(schema::kOutcomeColumn);
  if (outcome_it == column_of.end()) {
    throw DataError(path.string() + ": missing column " + std::string(schema::kOutcomeColumn));
  }

  std::vector<Individual> people;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() < header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }

    // rows with missing (empty) cells in needed columns are dropped
    bool missing = false;
    auto needed_empty = [&](int col) { return cells[static_cast<std::size_t>(col)].empty(); };
    for (int col : feature_cols) missing = missing || needed_empty(col);
    missing = missing || needed_empty(race_it->second) || needed_empty(outcome_it->second);
    if (missing) continue;

    Individual ind;
    ind.features.resize(schema::kFeatureColumns.size());
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      const std::string& cell = cells[static_cast<std::size_t>(feature_cols[j])];
      try {
        std::size_t used = 0;
        ind.features[j] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError(path.string() + ": row " + std::to_string(row) + ", column " +
                        schema::kFeatureColumns[j] + ": cannot parse '" + cell + "'");
      }
    }
    double outcome = 0.0;
    const std::string& outcome_cell = cells[static_cast<std::size_t>(outcome_it->second)];
    try {
      std::size_t used = 0;
      outcome = std::stod(outcome_cell, &used);
      if (used != outcome_cell.size()) throw std::invalid_argument(outcome_cell);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": row " + std::to_string(row) + ", column " +
                      std::string(schema::kOutcomeColumn) + ": cannot parse '" + outcome_cell + "'");
    }
    ind.chronic_illnesses = parse_count(outcome, row, schema::kOutcomeColumn);
    ind.qualified = ind.chronic_illnesses >= q;
    ind.race = parse_race(cells[static_cast<std::size_t>(race_it->second)]);
    ind.age_bracket = age_bracket_from_features(ind.features, row);
    people.push_back(std::move(ind));
  }
  return CandidatePool(std::move(people), q);
}

namespace {

struct CostModel {
  double usage_intercept;  // usage prob = sigmoid(intercept + slope * z)
  double usage_slope;
  double log_mean;         // cost = exp(log_mean + z_slope * z + sd * noise)
  double z_slope;
  double sd;
  double rounding;         // nearest 10, except "other" costs at 100
};

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// One entry per cost column, in schema order.
constexpr std::array<CostModel, schema::kNumCostColumns> kCostModels = {{
    {-4.0, 0.8, 8.0, 0.3, 0.5, 10.0},  // dialysis: rare, expensive
    {-1.2, 0.7, 6.0, 0.6, 0.9, 10.0},  // emergency
    {-2.0, 0.8, 6.5, 0.6, 0.9, 10.0},  // home health
    {-1.8, 0.9, 7.0, 0.7, 0.9, 10.0},  // inpatient medical
    {-2.2, 0.7, 7.5, 0.5, 0.9, 10.0},  // inpatient surgical
    {1.0, 0.5, 4.8, 0.55, 0.8, 10.0},  // laboratory
    {1.4, 0.4, 5.0, 0.45, 0.7, 10.0},  // outpatient primary care
    {0.2, 0.5, 5.2, 0.55, 0.8, 10.0},  // outpatient specialists
    {-1.5, 0.6, 6.8, 0.5, 0.9, 10.0},  // outpatient surgery
    {0.0, 0.5, 5.0, 0.5, 1.0, 100.0},  // other
    {0.8, 0.5, 5.5, 0.6, 0.9, 10.0},   // pharmacy
    {-1.6, 0.5, 5.8, 0.4, 0.9, 10.0},  // physical therapy
    {0.4, 0.5, 5.0, 0.5, 0.8, 10.0},   // radiology
}};

constexpr std::array<double, kAgeBrackets> kAgeWeights = {0.10, 0.14, 0.15, 0.16, 0.16, 0.15, 0.14};

}  // namespace

CandidatePool generate_synthetic(const GeneratorConfig& config) {
  if (config.population <= 0) throw DataError("population must be positive");
  if (config.black_fraction < 0.0 || config.white_fraction < 0.0 ||
      config.black_fraction + config.white_fraction > 1.0) {
    throw DataError("race fractions must be nonnegative and sum to at most 1");
  }

  Rng rng(config.seed);
  std::vector<Individual> people;
  people.reserve(static_cast<std::size_t>(config.population));

  for (int i = 0; i < config.population; ++i) {
    Individual ind;
    ind.features.assign(schema::kFeatureColumns.size(), 0.0);

    const double race_ticket = rng.uniform01();
    ind.race = race_ticket < config.black_fraction
                   ? Race::Black
                   : (race_ticket < config.black_fraction + config.white_fraction ? Race::White
                                                                                  : Race::Other);

    double age_ticket = rng.uniform01();
    int bracket = kAgeBrackets - 1;
    for (int b = 0; b < kAgeBrackets; ++b) {
      age_ticket -= kAgeWeights[static_cast<std::size_t>(b)];
      if (age_ticket < 0.0) {
        bracket = b;
        break;
      }
    }
    ind.age_bracket = bracket;
    ind.features[static_cast<std::size_t>(schema::kFirstAgeColumn + bracket)] = 1.0;

    ind.features[0] = rng.uniform01() < 0.55 ? 1.0 : 0.0;  // dem_female

    const double z = config.severity_intercept + config.severity_age_slope * bracket +
                     config.severity_sd * rng.normal();

    ind.chronic_illnesses = rng.poisson(std::exp(z));
    ind.qualified = ind.chronic_illnesses >= config.q;

    const int prior_illnesses = rng.poisson(std::exp(z - config.prior_year_drift));
    ind.features[schema::kFeatureColumns.size() - 1] = prior_illnesses;

    ind.features[8] = rng.uniform01() < sigmoid(-1.5 + 0.8 * z) ? 1.0 : 0.0;  // hypertension

    const bool deflate = config.bias_mode == BiasMode::CostProxyBias && ind.race == Race::Black;
    for (int c = 0; c < schema::kNumCostColumns; ++c) {
      const CostModel& m = kCostModels[static_cast<std::size_t>(c)];
      double cost = 0.0;
      if (rng.uniform01() < sigmoid(m.usage_intercept + m.usage_slope * z)) {
        cost = std::exp(m.log_mean + m.z_slope * z + m.sd * rng.normal());
        if (deflate) cost *= config.cost_deflation;
        cost = std::round(cost / m.rounding) * m.rounding;
      }
      ind.features[static_cast<std::size_t>(schema::kFirstCostColumn + c)] = cost;
    }

    people.push_back(std::move(ind));
  }
  return CandidatePool(std::move(people), config.q);
}

void save_pool(const CandidatePool& pool, const std::filesystem::path& csv_path,
               const std::filesystem::path& manifest_path, const std::string& provenance,
               std::uint64_t seed) {
  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot write " + csv_path.string());
  for (std::size_t j = 0; j < schema::kFeatureColumns.size(); ++j) {
    out << schema::kFeatureColumns[j] << ',';
  }
  out << schema::kRaceColumn << ',' << schema::kOutcomeColumn << '\n';
  char buffer[40];
  for (const Individual& ind : pool.individuals()) {
    for (double value : ind.features) {
      std::snprintf(buffer, sizeof buffer, "%.17g", value);
      out << buffer << ',';
    }
    out << to_string(ind.race) << ',' << ind.chronic_illnesses << '\n';
  }
  out.close();

  nlohmann::json manifest;
  manifest["q"] = pool.q();
  manifest["seed"] = seed;
  manifest["provenance"] = provenance;
  manifest["n"] = pool.n();
  manifest["n_prime"] = pool.n_prime();
  std::ofstream mout(manifest_path);
  if (!mout) throw DataError("cannot write " + manifest_path.string());
  mout << manifest.dump(2) << '\n';
}

CandidatePool load_pool(const std::filesystem::path& csv_path, int q) { return load_csv(csv_path, q); }

void validate(const SplitPlan& plan, int population_size) {
  if (std::fabs(plan.train_frac + plan.validation_frac + plan.test_frac - 1.0) > 1e-9) {
    throw DataError("split fractions must sum to 1");
  }
  if (plan.train_frac <= 0.0 || plan.validation_frac <= 0.0 || plan.test_frac <= 0.0) {
    throw DataError("split fractions must be positive");
  }
  if (plan.num_partitions <= 0 || plan.draws_per_partition <= 0 || plan.pool_size <= 0) {
    throw DataError("split plan counts must be positive");
  }
  const int test_size = population_size -
                        static_cast<int>(std::floor(plan.train_frac * population_size)) -
                        static_cast<int>(std::floor(plan.validation_frac * population_size));
  if (plan.pool_size > test_size) {
    throw DataError("pool size " + std::to_string(plan.pool_size) + " exceeds the test split (" +
                    std::to_string(test_size) + ")");
  }
}

std::vector<SplitTriple> make_splits(const CandidatePool& population, const SplitPlan& plan) {
  validate(plan, population.n());
  const int n = population.n();
  const int train_n = static_cast<int>(std::floor(plan.train_frac * n));
  const int val_n = static_cast<int>(std::floor(plan.validation_frac * n));

  std::vector<SplitTriple> triples;
  triples.reserve(static_cast<std::size_t>(plan.num_partitions * plan.draws_per_partition));
  for (int p = 0; p < plan.num_partitions; ++p) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng partition_rng(derive_seed(plan.seed, {static_cast<std::uint64_t>(p)}));
    partition_rng.shuffle(order);

    std::vector<int> train_idx(order.begin(), order.begin() + train_n);
    std::vector<int> val_idx(order.begin() + train_n, order.begin() + train_n + val_n);
    std::vector<int> test_idx(order.begin() + train_n + val_n, order.end());

    for (int d = 0; d < plan.draws_per_partition; ++d) {
      SplitTriple triple;
      triple.partition = p;
      triple.draw = d;
      triple.train_idx = train_idx;
      triple.validation_idx = val_idx;
      Rng draw_rng(derive_seed(plan.seed, {static_cast<std::uint64_t>(p),
                                           1000 + static_cast<std::uint64_t>(d)}));
      for (int pick : draw_rng.sample_without_replacement(static_cast<int>(test_idx.size()),
                                                          plan.pool_size)) {
        triple.pool_idx.push_back(test_idx[static_cast<std::size_t>(pick)]);
      }
      triples.push_back(std::move(triple));
    }
  }
  return triples;
}

LabeledData gather_data(const CandidatePool& population, const std::vector<int>& idx) {
  LabeledData data;
  data.rows = idx.size();
  data.cols = population.n() > 0 ? population.at(0).features.size() : 0;
  data.features.reserve(data.rows * data.cols);
  data.labels.reserve(data.rows);
  for (int i : idx) {
    const Individual& ind = population.at(i);
    data.features.insert(data.features.end(), ind.features.begin(), ind.features.end());
    data.labels.push_back(ind.qualified ? 1 : 0);
  }
  return data;
}

CandidatePool gather_pool(const CandidatePool& population, const std::vector<int>& idx) {
  std::vector<Individual> people;
  people.reserve(idx.size());
  for (int i : idx) people.push_back(population.at(i));
  return CandidatePool(std::move(people), population.q());
}

}  // namespace allocmult
