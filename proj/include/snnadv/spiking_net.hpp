#pragma once

#include <optional>
#include <vector>

#include "snnadv/layers.hpp"
#include "snnadv/neuron.hpp"

namespace snnadv {

/// How the readout layer turns its activity into logits.
enum class Readout {
  Integrator,  // non-spiking leaky integrator, logits = V[T] / T
  SpikeCount,  // spiking, logits = spike count / T
};

enum class InputEncoding { Direct };

template <typename T>
struct SpikingLayer {
  LinearLayer<T> op;
  NeuronConfig neuron;
  SynapseConfig synapse;
};

/// Feed-forward spiking network unrolled over `timesteps`. The last layer is
/// the readout; every earlier layer spikes.
template <typename T>
struct SpikingNet {
  Shape input_shape;
  std::vector<SpikingLayer<T>> layers;
  Readout readout = Readout::Integrator;
  double output_leak = 1.0;
  int timesteps = 8;
  /// Kernel substituted for dO/dV in the backward pass. Its threshold field
  /// is ignored inside the network: each layer centers the kernel on its own
  /// firing threshold.
  SurrogateSpec surrogate;
  /// Drop the gradient through reset / inhibition terms.
  bool detach_reset = false;
  /// Replace the spike step with the surrogate antiderivative (gradient checks).
  std::optional<SurrogateSpec> relaxed;

  std::size_t num_classes() const { return out_features(layers.back().op); }
  /// Throws ConfigError / DimensionError on an inconsistent network.
  void validate() const;

  template <typename U>
  SpikingNet<U> cast() const {
    SpikingNet<U> out;
    out.input_shape = input_shape;
    out.readout = readout;
    out.output_leak = output_leak;
    out.timesteps = timesteps;
    out.surrogate = surrogate;
    out.detach_reset = detach_reset;
    out.relaxed = relaxed;
    for (const auto& l : layers) {
      out.layers.push_back({cast_layer<U>(l.op), l.neuron, l.synapse});
    }
    return out;
  }
};

/// Everything the backward pass needs from one layer's forward run.
/// When `constant_input` is set, `x` holds a single entry used at every step.
template <typename T>
struct LayerTrace {
  bool constant_input = false;
  std::vector<BasicTensor<T>> x;  // synapse state X[t], [batch, in]
  std::vector<BasicTensor<T>> v;  // V[t], [batch, out]
  std::vector<BasicTensor<T>> k;  // k[t] (adaptive only)
  std::vector<BasicTensor<T>> o;  // O[t] (spiking layers only)
};

template <typename T>
struct SnnTrace {
  std::size_t batch = 0;
  int timesteps = 0;
  std::vector<LayerTrace<T>> layers;
};

template <typename T>
struct SnnForwardResult {
  BasicTensor<T> logits;
  SnnTrace<T> trace;
};

template <typename T>
struct SnnGradients {
  BasicTensor<T> dinput;
  std::vector<BasicTensor<T>> dweight;
  std::vector<BasicTensor<T>> dbias;
};

/// Runs the network for `timesteps` steps on a batch [n, features] presented
/// as constant input current at every step.
template <typename T>
SnnForwardResult<T> snn_forward(const SpikingNet<T>& net, const BasicTensor<T>& x,
                                int timesteps, InputEncoding encode = InputEncoding::Direct);

template <typename T>
SnnForwardResult<T> snn_forward(const SpikingNet<T>& net, const BasicTensor<T>& x) {
  return snn_forward(net, x, net.timesteps);
}

/// Backpropagation through time with dO/dV replaced by `spec`'s kernel.
template <typename T>
SnnGradients<T> snn_backward(const SpikingNet<T>& net, const SnnTrace<T>& trace,
                             const BasicTensor<T>& dlogits, const SurrogateSpec& spec,
                             bool need_weight_grads = true);

template <typename T>
SnnGradients<T> snn_backward(const SpikingNet<T>& net, const SnnTrace<T>& trace,
                             const BasicTensor<T>& dlogits) {
  return snn_backward(net, trace, dlogits, net.surrogate);
}

/// Dense spiking MLP input -> hidden... -> integrator readout, every hidden
/// layer using `neuron` with an identity synapse.
SpikingNet<float> make_snn_mlp(const Shape& input_shape, const std::vector<std::size_t>& hidden,
                               std::size_t classes, const NeuronConfig& neuron, int timesteps,
                               Rng& rng, double gain = 1.0);

}  // namespace snnadv
