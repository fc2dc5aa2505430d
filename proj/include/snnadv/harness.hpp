#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "snnadv/attacks.hpp"
#include "snnadv/data.hpp"

namespace snnadv {

/// Samples every listed model classifies correctly, class-balanced.
struct EvalSet {
  std::vector<std::size_t> indices;  // into the source dataset, ascending
  Tensor images;
  std::vector<int> labels;
  std::vector<std::size_t> class_histogram;
  std::vector<std::string> model_names;

  std::size_t size() const { return indices.size(); }
};

/// Picks n samples correctly classified by all models, n / classes per class
/// with the remainder spread over seeded-random classes. Throws
/// SelectionError naming starved classes and the achievable count per class.
EvalSet select_eval_set(const ModelList& models, const Dataset& data, std::size_t n,
                        std::uint64_t seed);

/// Throws StateError if any model misclassifies a clean sample of the set.
void verify_eval_set(const ModelList& models, const EvalSet& set);

struct RunOptions {
  std::size_t chunk = 100;  // samples per attack batch
  int jobs = 1;             // worker threads over chunks
};

/// Adversarial examples for one attack. `models` holds the generating model
/// (single-model attacks use models[0]); alpha is used by SAGA.
Tensor generate_adversarial(AttackKind kind, const ModelList& models, const Tensor& x,
                            const std::vector<int>& labels, const AttackConfig& cfg,
                            const RunOptions& opts = {});

/// Fraction of set samples whose adversarial example crafted on `source` is
/// misclassified by `target`.
double transferability(const Model& source, const Model& target, AttackKind attack,
                       const AttackConfig& cfg, const EvalSet& set, const RunOptions& opts = {});

struct TransferMatrix {
  std::vector<std::string> names;
  std::vector<std::string> attacks;
  std::vector<std::vector<std::vector<double>>> per_attack;  // [attack][i][j]
  std::vector<std::vector<double>> max;                      // elementwise max over attacks
  std::vector<std::vector<std::size_t>> set_sizes;           // evalset size per pair
};

/// Pairwise evalsets of size n (each pair selected with both models), every
/// attack run on the row model and evaluated on the column model.
TransferMatrix transfer_matrix(const ModelList& models, const std::vector<AttackKind>& attacks,
                               const Dataset& data, std::size_t n, std::uint64_t seed,
                               const AttackConfig& cfg, const RunOptions& opts = {});

std::string to_csv(const std::vector<std::string>& names, const std::vector<std::vector<double>>& m);
nlohmann::json to_json(const TransferMatrix& tm);

struct SweepGrid {
  std::vector<std::string> surrogates;
  std::vector<double> eps;
  std::vector<std::vector<double>> robust_accuracy;  // [surrogate][eps]
  std::vector<std::vector<double>> success_rate() const;
};

/// PGD against `snn` for every (kernel, eps), forward fixed and only the
/// backward kernel swapped. Step size is step_ratio * eps / steps; every eps
/// restarts from the clean set with the same seed.
SweepGrid surrogate_sweep(const SpikingModel& snn, const std::vector<double>& eps,
                          const std::vector<SurrogateSpec>& specs, const EvalSet& set,
                          const AttackConfig& pgd_cfg, double step_ratio = 2.5,
                          const RunOptions& opts = {});

std::string to_csv(const SweepGrid& grid);
nlohmann::json to_json(const SweepGrid& grid);

struct MultiModelRow {
  std::vector<std::string> names;
  std::size_t n = 0;
  double max_mim = 0.0;
  double max_pgd = 0.0;
  double basic_saga = 0.0;
  double auto_saga = 0.0;
};

/// Joint success rates of single-model MIM / PGD (best generating model),
/// SAGA with equal weights, and Auto-SAGA on one evaluation set.
MultiModelRow multi_model_comparison(const ModelList& models, const EvalSet& set,
                                     const AttackConfig& cfg, const RunOptions& opts = {});

std::string to_csv(const std::vector<MultiModelRow>& rows);
nlohmann::json to_json(const MultiModelRow& row);

}  // namespace snnadv
