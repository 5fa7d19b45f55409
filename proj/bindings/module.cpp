// Python bindings for the main operations: exact counting and sampling of the
// equal-utility space, prediction-to-allocation mappings, evaluation metrics,
// the synthetic data generator, model training, and the experiment runner.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "allocmult/combinatorics.hpp"
#include "allocmult/data.hpp"
#include "allocmult/mappings.hpp"
#include "allocmult/metrics.hpp"
#include "allocmult/rashomon.hpp"
#include "allocmult/runner.hpp"

namespace py = pybind11;
using namespace allocmult;

namespace {

EqualUtilitySpace space_of(int n, int k, int n_prime, int k_prime, int delta) {
  return EqualUtilitySpace{n, k, n_prime, k_prime, delta};
}

PredictionVector pred_of(const std::vector<double>& scores) {
  PredictionVector pred;
  pred.scores = scores;
  return pred;
}

Allocation alloc_of(const std::vector<std::uint8_t>& outcomes) {
  return make_allocation(outcomes);
}

std::vector<Allocation> allocs_of(const std::vector<std::vector<std::uint8_t>>& outcome_sets) {
  std::vector<Allocation> allocs;
  allocs.reserve(outcome_sets.size());
  for (const auto& outcomes : outcome_sets) allocs.push_back(make_allocation(outcomes));
  return allocs;
}

RashomonSample sample_of(const std::vector<std::vector<double>>& member_scores,
                         const std::vector<double>& losses, double epsilon) {
  std::vector<PredictionVector> preds;
  for (std::size_t i = 0; i < member_scores.size(); ++i) {
    PredictionVector pred;
    pred.scores = member_scores[i];
    pred.validation_loss = i < losses.size() ? losses[i] : 0.0;
    pred.model_id = "py-" + std::to_string(i);
    preds.push_back(std::move(pred));
  }
  return filter_epsilon(std::move(preds), epsilon);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Equal-utility allocation counting and Rashomon-set sampling evaluation";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", PyExc_ValueError);
  py::register_exception<InfeasibleSpaceError>(m, "InfeasibleSpaceError", PyExc_ValueError);
  py::register_exception<UndefinedRatioError>(m, "UndefinedRatioError", PyExc_ArithmeticError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  py::class_<CandidatePool>(m, "CandidatePool")
      .def_property_readonly("n", &CandidatePool::n)
      .def_property_readonly("n_prime", &CandidatePool::n_prime)
      .def_property_readonly("q", &CandidatePool::q)
      .def("qualified", [](const CandidatePool& pool) {
        std::vector<bool> out;
        for (const Individual& ind : pool.individuals()) out.push_back(ind.qualified);
        return out;
      })
      .def("chronic_illnesses", [](const CandidatePool& pool) {
        std::vector<int> out;
        for (const Individual& ind : pool.individuals()) out.push_back(ind.chronic_illnesses);
        return out;
      })
      .def("races", [](const CandidatePool& pool) {
        std::vector<std::string> out;
        for (const Individual& ind : pool.individuals()) out.push_back(to_string(ind.race));
        return out;
      })
      .def("age_brackets", [](const CandidatePool& pool) {
        std::vector<int> out;
        for (const Individual& ind : pool.individuals()) out.push_back(ind.age_bracket);
        return out;
      })
      .def("features", [](const CandidatePool& pool) {
        std::vector<std::vector<double>> out;
        for (const Individual& ind : pool.individuals()) out.push_back(ind.features);
        return out;
      });

  m.def("relabel", &relabel, py::arg("pool"), py::arg("q"));

  // combinatorics
  m.def(
      "count_equal_utility",
      [](int n, int k, int n_prime, int k_prime, int delta) {
        const std::string digits = count_equal_utility(space_of(n, k, n_prime, k_prime, delta)).str();
        PyObject* value = PyLong_FromString(digits.c_str(), nullptr, 10);
        if (value == nullptr) throw py::error_already_set();
        return py::reinterpret_steal<py::object>(value);
      },
      py::arg("n"), py::arg("k"), py::arg("n_prime"), py::arg("k_prime"), py::arg("delta") = 0,
      "Exact number of delta-equal-utility allocations (arbitrary precision).");

  m.def(
      "sample_equal_utility",
      [](int n, int k, int n_prime, int k_prime, const std::vector<std::uint8_t>& qualified,
         std::uint64_t seed, int delta) {
        return sample_equal_utility(space_of(n, k, n_prime, k_prime, delta), qualified, seed).outcomes;
      },
      py::arg("n"), py::arg("k"), py::arg("n_prime"), py::arg("k_prime"), py::arg("qualified"),
      py::arg("seed") = 0, py::arg("delta") = 0);

  m.def(
      "analytic_space_stats",
      [](int n, int k, int n_prime, int k_prime) {
        const SpaceStats stats = analytic_space_stats(space_of(n, k, n_prime, k_prime, 0));
        py::dict out;
        out["p_qualified"] = stats.p_qualified;
        out["p_unqualified"] = stats.p_unqualified;
        out["pairwise_consistency"] = stats.pairwise_consistency;
        return out;
      },
      py::arg("n"), py::arg("k"), py::arg("n_prime"), py::arg("k_prime"));

  m.def(
      "reference_least_discriminatory",
      [](const CandidatePool& pool, int k, int k_prime) {
        return reference_least_discriminatory(pool, k, k_prime).outcomes;
      },
      py::arg("pool"), py::arg("k"), py::arg("k_prime"));

  m.def(
      "allocation_utility",
      [](const std::vector<std::uint8_t>& outcomes, const CandidatePool& pool) {
        Allocation alloc = alloc_of(outcomes);
        return allocation_utility(alloc, pool);
      },
      py::arg("outcomes"), py::arg("pool"));

  // mappings
  m.def(
      "top_k", [](const std::vector<double>& scores, int k) { return top_k(pred_of(scores), k).outcomes; },
      py::arg("scores"), py::arg("k"));
  m.def(
      "boundary_lottery",
      [](const std::vector<double>& scores, int k, int k_tilde, int n_tilde, std::uint64_t seed) {
        LotteryConfig config;
        config.kind = MappingKind::Boundary;
        config.k_tilde = k_tilde;
        config.n_tilde = n_tilde;
        config.seed = seed;
        return boundary_lottery(pred_of(scores), k, config).outcomes;
      },
      py::arg("scores"), py::arg("k"), py::arg("k_tilde"), py::arg("n_tilde"), py::arg("seed") = 0);
  m.def("sigmoid_logit_weight", &sigmoid_logit_weight, py::arg("x"), py::arg("mu"), py::arg("v"));
  m.def(
      "sigmoid_logit_lottery",
      [](const std::vector<double>& scores, int k, double v, std::uint64_t seed,
         std::optional<double> mu) {
        LotteryConfig config = LotteryConfig::sigmoid_logit(k, static_cast<int>(scores.size()), v, seed);
        if (mu) config.mu = *mu;
        return sigmoid_logit_lottery(pred_of(scores), k, config).outcomes;
      },
      py::arg("scores"), py::arg("k"), py::arg("v") = 2.0, py::arg("seed") = 0,
      py::arg("mu") = py::none());

  // metrics
  m.def(
      "unique_allocations",
      [](const std::vector<std::vector<std::uint8_t>>& sets) { return unique_allocations(allocs_of(sets)); },
      py::arg("allocations"));
  m.def(
      "pairwise_consistency",
      [](const std::vector<std::vector<std::uint8_t>>& sets) { return pairwise_consistency(allocs_of(sets)); },
      py::arg("allocations"));
  m.def(
      "threshold_test_ratio",
      [](const std::vector<std::uint8_t>& outcomes, const CandidatePool& pool) {
        return threshold_test_ratio(alloc_of(outcomes), pool);
      },
      py::arg("outcomes"), py::arg("pool"));
  m.def(
      "age_entropy",
      [](const std::vector<std::uint8_t>& outcomes, const CandidatePool& pool) {
        return age_entropy(alloc_of(outcomes), pool);
      },
      py::arg("outcomes"), py::arg("pool"));
  m.def(
      "outcome_profile",
      [](const std::vector<std::vector<std::uint8_t>>& sets, const CandidatePool& pool) {
        const OutcomeProfile profile = outcome_profile(allocs_of(sets), pool);
        py::dict out;
        out["systemic_rejection"] = profile.systemic_rejection;
        out["multiple_outcomes"] = profile.multiple_outcomes;
        out["always_accepted"] = profile.always_accepted;
        return out;
      },
      py::arg("allocations"), py::arg("pool"));
  m.def(
      "ensemble_allocation",
      [](const std::vector<std::vector<double>>& member_scores, int k) {
        RashomonSample sample = sample_of(member_scores, {}, 1e18);
        return ensemble_allocation(sample, k).outcomes;
      },
      py::arg("member_scores"), py::arg("k"));
  m.def("cross_entropy", &cross_entropy, py::arg("scores"), py::arg("labels"));
  m.def(
      "filter_epsilon",
      [](const std::vector<std::vector<double>>& member_scores, const std::vector<double>& losses,
         double epsilon) {
        const RashomonSample sample = sample_of(member_scores, losses, epsilon);
        py::dict out;
        out["best_loss"] = sample.best_loss;
        out["epsilon"] = sample.epsilon;
        std::vector<std::size_t> kept;
        for (const PredictionVector& member : sample.members) {
          kept.push_back(static_cast<std::size_t>(std::stoul(member.model_id.substr(3))));
        }
        out["kept_indices"] = kept;
        return out;
      },
      py::arg("member_scores"), py::arg("losses"), py::arg("epsilon") = 0.01);

  // data
  m.def(
      "generate_synthetic",
      [](int population, std::uint64_t seed, int q, const std::string& bias_mode) {
        GeneratorConfig config;
        config.population = population;
        config.seed = seed;
        config.q = q;
        config.bias_mode = bias_mode == "cost_proxy_bias" ? BiasMode::CostProxyBias : BiasMode::Unbiased;
        return generate_synthetic(config);
      },
      py::arg("population"), py::arg("seed") = 1, py::arg("q") = 2, py::arg("bias_mode") = "unbiased");
  m.def(
      "load_csv", [](const std::string& path, int q) { return load_csv(path, q); }, py::arg("path"),
      py::arg("q"));

  // learners
  py::class_<TrainedModel>(m, "TrainedModel")
      .def_property_readonly("family", [](const TrainedModel& model) { return to_string(model.family); })
      .def_property_readonly("train_loss", [](const TrainedModel& model) { return model.train_loss; })
      .def_property_readonly("validation_loss",
                             [](const TrainedModel& model) { return model.validation_loss; })
      .def_property_readonly("parameters", [](const TrainedModel& model) { return model.parameters; });

  m.def(
      "train_model",
      [](const std::vector<std::vector<double>>& x, const std::vector<std::uint8_t>& y,
         const std::vector<std::vector<double>>& x_val, const std::vector<std::uint8_t>& y_val,
         const std::string& family, std::uint64_t seed, int epochs, double learning_rate,
         int batch_size, const std::vector<int>& hidden_sizes) {
        LabeledData train_split, val_split;
        train_split.rows = x.size();
        train_split.cols = x.empty() ? 0 : x[0].size();
        for (const auto& row : x) train_split.features.insert(train_split.features.end(), row.begin(), row.end());
        train_split.labels = y;
        val_split.rows = x_val.size();
        val_split.cols = x_val.empty() ? 0 : x_val[0].size();
        for (const auto& row : x_val) val_split.features.insert(val_split.features.end(), row.begin(), row.end());
        val_split.labels = y_val;

        TrainConfig config;
        if (family == "logistic") config.family = ModelFamily::Logistic;
        else if (family == "mlp") config.family = ModelFamily::Mlp;
        else if (family == "scoring_system") config.family = ModelFamily::ScoringSystem;
        else throw DataError("unknown family: " + family);
        config.seed = seed;
        config.epochs = epochs;
        config.learning_rate = learning_rate;
        config.batch_size = batch_size;
        config.hidden_sizes = hidden_sizes;
        return train(config, train_split, val_split);
      },
      py::arg("x"), py::arg("y"), py::arg("x_val"), py::arg("y_val"), py::arg("family") = "logistic",
      py::arg("seed") = 0, py::arg("epochs") = 40, py::arg("learning_rate") = 0.1,
      py::arg("batch_size") = 0, py::arg("hidden_sizes") = std::vector<int>{32});

  m.def(
      "predict_pool",
      [](const TrainedModel& model, const CandidatePool& pool) { return predict(model, pool).scores; },
      py::arg("model"), py::arg("pool"));

  // runner
  m.def(
      "run_experiment",
      [](const std::string& config_path, const std::string& out_dir, double budget_scale, int threads) {
        ExperimentConfig config = load_experiment_config(config_path);
        if (!out_dir.empty()) config.output_dir = out_dir;
        config.budget_scale = budget_scale;
        if (threads > 0) config.threads = threads;
        const ResultsArchive archive = run_experiment(config);
        py::dict out;
        out["root"] = archive.root.string();
        out["rows"] = archive.rows.size();
        out["failures"] = archive.failures.size();
        return out;
      },
      py::arg("config_path"), py::arg("out_dir") = "", py::arg("budget_scale") = 1.0,
      py::arg("threads") = 0);
  m.def(
      "emit_plot_data",
      [](const std::string& archive_root, const std::string& figure_id) {
        return emit_plot_data(archive_root, figure_id).string();
      },
      py::arg("archive_root"), py::arg("figure_id"));
}
