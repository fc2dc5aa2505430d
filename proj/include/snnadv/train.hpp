#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "json.hpp"
#include "snnadv/data.hpp"
#include "snnadv/model.hpp"

namespace snnadv {

struct SgdConfig {
  double lr = 0.05;
  double momentum = 0.9;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

using OptimizerConfig = std::variant<SgdConfig, AdamConfig>;

struct TrainConfig {
  OptimizerConfig optimizer = AdamConfig{};
  int epochs = 1;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  /// Backward kernel for spiking models; the model's own one when unset.
  std::optional<SurrogateSpec> surrogate;
  /// Progress lines go here when set.
  std::ostream* log = nullptr;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean training loss over the epoch's batches
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

nlohmann::json to_json(const TrainHistory& history);

/// Mini-batch training on softmax cross entropy with a seeded shuffle per
/// epoch. Throws TrainingError carrying the epoch index on divergence.
TrainHistory train_epochs(Model& model, const Dataset& train, const TrainConfig& config,
                          const Dataset* test = nullptr);

struct Evaluation {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::size_t> class_totals;   // samples per true class
  std::vector<std::size_t> class_correct;  // correct predictions per true class
};

/// Throws ConfigError on an empty dataset.
Evaluation evaluate(const Model& model, const Dataset& data, std::size_t batch_size = 500);

/// Predictions over a dataset in batches.
std::vector<int> predict_all(const Model& model, const Tensor& images,
                             std::size_t batch_size = 500);

}  // namespace snnadv
