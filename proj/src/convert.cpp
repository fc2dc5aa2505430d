#include "snnadv/convert.hpp"

#include <algorithm>
#include <cmath>

#include "snnadv/ops.hpp"

namespace snnadv {

double percentile_of(std::vector<float> values, double percentile) {
  if (values.empty()) throw ConfigError("percentile of an empty set");
  if (!(percentile >= 0 && percentile <= 100)) throw ConfigError("percentile must be in [0, 100]");
  double pos = percentile / 100.0 * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<long>(lo), values.end());
  double a = values[lo];
  if (hi == lo) return a;
  double b = *std::min_element(values.begin() + static_cast<long>(hi), values.end());
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

namespace {

struct Stage {
  LinearLayer<float> op;
  bool relu = false;
};

std::vector<Stage> linear_stages(const AnnNet<float>& ann) {
  std::vector<Stage> stages;
  for (std::size_t i = 0; i < ann.layers.size(); ++i) {
    const auto& layer = ann.layers[i];
    if (const auto* d = std::get_if<DenseLayer<float>>(&layer)) {
      stages.push_back({*d, false});
    } else if (const auto* c = std::get_if<Conv2dLayer<float>>(&layer)) {
      stages.push_back({*c, false});
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      if (stages.empty() || stages.back().relu) {
        throw UnsupportedError("conversion: ReLU at layer " + std::to_string(i) +
                               " does not follow a linear layer");
      }
      stages.back().relu = true;
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      continue;
    } else {
      throw UnsupportedError("conversion: layer " + std::to_string(i) +
                             " is a pooling layer; only linear/ReLU networks convert");
    }
  }
  if (stages.empty()) throw UnsupportedError("conversion: network has no linear layers");
  for (std::size_t i = 0; i + 1 < stages.size(); ++i) {
    if (!stages[i].relu) {
      throw UnsupportedError("conversion: hidden linear stage " + std::to_string(i) +
                             " has no ReLU activation");
    }
  }
  if (stages.back().relu) throw UnsupportedError("conversion: readout must be linear");
  return stages;
}

}  // namespace

ConversionResult convert_ann_to_snn(const AnnNet<float>& ann, const Tensor& calib,
                                    const ConversionConfig& config) {
  ann.validate();
  if (calib.empty() || calib.dim(0) == 0) throw ConfigError("conversion: empty calibration set");
  if (config.timesteps < 1) throw ConfigError("conversion: timesteps must be >= 1");
  config.surrogate.validate();
  auto stages = linear_stages(ann);

  ConversionResult result;
  std::vector<double> scale(stages.size() + 1, 1.0);  // scale[0] is the input
  Tensor act = calib.reshaped({calib.dim(0), calib.row_width()});
  for (std::size_t l = 0; l + 1 < stages.size(); ++l) {
    act = relu_forward(linear_forward(stages[l].op, act));
    std::vector<float> positive;
    for (float v : act.data()) {
      if (v > 0) positive.push_back(v);
    }
    double s = positive.empty() ? 1.0 : percentile_of(std::move(positive), config.percentile);
    if (!(s > 0) || !std::isfinite(s)) s = 1.0;
    scale[l + 1] = s;
    result.scales.push_back(s);
  }

  SpikingNet<float> net;
  net.input_shape = ann.input_shape;
  net.timesteps = config.timesteps;
  net.surrogate = config.surrogate;
  net.readout = Readout::Integrator;
  net.output_leak = 1.0;
  for (std::size_t l = 0; l < stages.size(); ++l) {
    const bool readout = l + 1 == stages.size();
    LinearLayer<float> op = stages[l].op;
    double w_factor = scale[l];
    double b_factor = 1.0;
    NeuronConfig neuron;
    neuron.leak = 1.0;
    neuron.reset = ResetMode::SoftSubtract;
    neuron.threshold = 1.0;
    if (!readout) {
      if (config.mode == BalanceMode::WeightBalance) {
        w_factor = scale[l] / scale[l + 1];
        b_factor = 1.0 / scale[l + 1];
      } else {
        neuron.threshold = scale[l + 1];
      }
    }
    auto& w = layer_weight(op);
    auto& b = layer_bias(op);
    w = mul(w, static_cast<float>(w_factor));
    b = mul(b, static_cast<float>(b_factor));
    net.layers.push_back({std::move(op), neuron, SynapseConfig::identity()});
  }
  net.validate();
  result.net = std::move(net);
  return result;
}

FineTuneResult fine_tune(SpikingModel& snn, const Dataset& data, int epochs,
                         const SurrogateSpec& spec, TrainConfig config, const Dataset* eval) {
  const Dataset& measure = eval ? *eval : data;
  FineTuneResult r;
  r.accuracy_before = evaluate(snn, measure).accuracy;
  config.epochs = epochs;
  config.surrogate = spec;
  r.history = train_epochs(snn, data, config);
  r.accuracy_after = epochs == 0 ? r.accuracy_before : evaluate(snn, measure).accuracy;
  return r;
}

}  // namespace snnadv
