#pragma once

#include <vector>

#include "snnadv/ann.hpp"
#include "snnadv/data.hpp"
#include "snnadv/spiking_net.hpp"
#include "snnadv/train.hpp"

namespace snnadv {

enum class BalanceMode { WeightBalance, ThresholdBalance };

struct ConversionConfig {
  BalanceMode mode = BalanceMode::WeightBalance;
  /// Percentile of positive ReLU activations used as the layer scale; 100
  /// gives the strict maximum.
  double percentile = 99.9;
  int timesteps = 16;
  /// Backward kernel attached to the converted network.
  SurrogateSpec surrogate{};
};

struct ConversionResult {
  SpikingNet<float> net;
  std::vector<double> scales;  // one per hidden (ReLU) layer
};

/// Linear-interpolated percentile of `values` (copied, then partially sorted).
double percentile_of(std::vector<float> values, double percentile);

/// Mirrors a ReLU network (linear / ReLU pairs, final linear readout, flatten
/// allowed) as soft-reset IF neurons with lambda = 1.
///
/// WeightBalance: W_l * s_{l-1} / s_l, b_l / s_l, threshold 1.
/// ThresholdBalance: W_l * s_{l-1}, b_l, threshold s_l.
/// The readout gets W_L * s_{L-1}, b_L and integrates without leak.
/// A layer with no positive calibration activation gets scale 1.
ConversionResult convert_ann_to_snn(const AnnNet<float>& ann, const Tensor& calib,
                                    const ConversionConfig& config = {});

struct FineTuneResult {
  TrainHistory history;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  double recovery() const { return accuracy_after - accuracy_before; }
};

/// Surrogate-gradient retraining starting from the current weights.
/// Accuracies are measured on `eval` (the training data when null).
FineTuneResult fine_tune(SpikingModel& snn, const Dataset& data, int epochs,
                         const SurrogateSpec& spec, TrainConfig config = {},
                         const Dataset* eval = nullptr);

}  // namespace snnadv
