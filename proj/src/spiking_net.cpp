#include "snnadv/spiking_net.hpp"

#include <algorithm>

#include "snnadv/ops.hpp"

namespace snnadv {

template <typename T>
void SpikingNet<T>::validate() const {
  if (layers.empty()) throw ConfigError("spiking net has no layers");
  if (timesteps < 1) throw ConfigError("timesteps must be >= 1");
  if (!(output_leak > 0 && output_leak <= 1)) throw ConfigError("output leak must be in (0, 1]");
  surrogate.validate();
  if (relaxed) relaxed->validate();
  std::size_t width = shape_size(input_shape);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (in_features(l.op) != width) {
      throw DimensionError("spiking layer " + std::to_string(i) + " expects " +
                           std::to_string(in_features(l.op)) + " inputs, previous stage gives " +
                           std::to_string(width));
    }
    l.neuron.validate();
    l.synapse.validate();
    width = out_features(l.op);
  }
}

namespace {

template <typename T>
BasicTensor<T> stack_steps(const std::vector<BasicTensor<T>>& steps) {
  std::size_t rows = steps[0].dim(0), width = steps[0].row_width();
  BasicTensor<T> out({rows * steps.size(), width});
  auto dst = out.data();
  for (std::size_t t = 0; t < steps.size(); ++t) {
    std::copy(steps[t].data().begin(), steps[t].data().end(), dst.begin() + t * rows * width);
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> split_steps(const BasicTensor<T>& stacked, std::size_t steps) {
  std::size_t rows = stacked.dim(0) / steps, width = stacked.row_width();
  std::vector<BasicTensor<T>> out;
  out.reserve(steps);
  auto src = stacked.data();
  for (std::size_t t = 0; t < steps; ++t) {
    auto first = src.begin() + static_cast<long>(t * rows * width);
    out.emplace_back(Shape{rows, width}, std::vector<T>(first, first + static_cast<long>(rows * width)));
  }
  return out;
}

template <typename T>
std::vector<std::vector<T>> to_vectors(const std::vector<BasicTensor<T>>& steps) {
  std::vector<std::vector<T>> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.values());
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> to_tensors(const std::vector<std::vector<T>>& steps, const Shape& shape) {
  std::vector<BasicTensor<T>> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.emplace_back(shape, s);
  return out;
}

SpikeFunction spike_function(const std::optional<SurrogateSpec>& relaxed, double threshold) {
  SpikeFunction fire;
  fire.threshold = threshold;
  if (relaxed) {
    fire.relaxed = *relaxed;
    fire.relaxed->threshold = threshold;
  }
  return fire;
}

}  // namespace

template <typename T>
SnnForwardResult<T> snn_forward(const SpikingNet<T>& net, const BasicTensor<T>& x, int timesteps,
                                InputEncoding) {
  if (timesteps < 1) throw ConfigError("snn_forward: timesteps must be >= 1");
  if (net.layers.empty()) throw ConfigError("snn_forward: network has no layers");
  const std::size_t batch = x.dim(0);
  const auto steps = static_cast<std::size_t>(timesteps);
  require_finite(x, "snn_forward input");

  SnnForwardResult<T> result;
  result.trace.batch = batch;
  result.trace.timesteps = timesteps;

  // Direct encoding: the same current S = x at every step.
  std::vector<BasicTensor<T>> input{x.rank() == 2 ? x : x.reshaped({batch, x.row_width()})};
  bool constant = true;

  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const auto& layer = net.layers[li];
    const bool is_readout = li + 1 == net.layers.size();
    LayerTrace<T> tr;

    if (constant && !layer.synapse.is_identity()) {
      input.assign(steps, input[0]);
      constant = false;
    }
    if (layer.synapse.is_identity()) {
      tr.x = std::move(input);
    } else {
      tr.x = to_tensors(synapse_filter(layer.synapse, to_vectors(input)), input[0].shape());
    }
    tr.constant_input = constant;

    std::vector<BasicTensor<T>> current;
    if (constant) {
      current.assign(steps, linear_forward(layer.op, tr.x[0]));
    } else {
      current = split_steps(linear_forward(layer.op, stack_steps(tr.x)), steps);
    }
    const std::size_t width = out_features(layer.op);
    const Shape out_shape{batch, width};

    if (is_readout && net.readout == Readout::Integrator) {
      const T leak = static_cast<T>(net.output_leak);
      BasicTensor<T> v(out_shape);
      for (std::size_t t = 0; t < steps; ++t) {
        auto vd = v.data();
        auto cd = current[t].data();
        for (std::size_t i = 0; i < vd.size(); ++i) vd[i] = leak * vd[i] + cd[i];
        tr.v.push_back(v);
      }
      result.logits = mul(v, static_cast<T>(1.0 / static_cast<double>(steps)));
    } else {
      const SpikeFunction fire = spike_function(net.relaxed, layer.neuron.threshold);
      auto state = NeuronState<T>::zeros(batch * width);
      for (std::size_t t = 0; t < steps; ++t) {
        state = step_neuron<T>(state, current[t].data(), layer.neuron, fire);
        tr.v.emplace_back(out_shape, state.v);
        if (layer.neuron.adaptation_decay) tr.k.emplace_back(out_shape, state.k);
        tr.o.emplace_back(out_shape, state.o);
      }
      if (is_readout) {
        BasicTensor<T> counts(out_shape);
        for (const auto& o : tr.o) {
          for (std::size_t i = 0; i < o.size(); ++i) counts[i] += o[i];
        }
        result.logits = mul(counts, static_cast<T>(1.0 / static_cast<double>(steps)));
      }
      input = tr.o;
      constant = false;
    }
    result.trace.layers.push_back(std::move(tr));
  }
  require_finite(result.logits, "snn_forward logits");
  return result;
}

namespace {

// Reverse-time adjoint of one spiking layer's neuron dynamics. Takes dL/dO[t]
// from above and returns dL/dI[t] for the layer's input current.
template <typename T>
std::vector<BasicTensor<T>> neuron_backward(const SpikingLayer<T>& layer, const LayerTrace<T>& tr,
                                            const std::vector<BasicTensor<T>>& dout,
                                            const SurrogateSpec& spec, bool detach) {
  const std::size_t steps = tr.v.size();
  const std::size_t n = tr.v[0].size();
  const Shape shape = tr.v[0].shape();
  const T leak = static_cast<T>(layer.neuron.leak);
  const T theta = static_cast<T>(layer.neuron.threshold);
  const T decay = static_cast<T>(layer.neuron.adaptation_decay.value_or(0.0));
  const bool adaptive = layer.neuron.adaptation_decay.has_value();
  const bool hard = !adaptive && layer.neuron.reset == ResetMode::HardZero;
  SurrogateSpec kernel = spec;
  kernel.threshold = layer.neuron.threshold;

  std::vector<BasicTensor<T>> dcurrent(steps);
  std::vector<T> av_next(n, T{0}), ak_next(n, T{0});
  for (std::size_t t = steps; t-- > 0;) {
    BasicTensor<T> di(shape);
    const auto& v = tr.v[t];
    const auto& o = tr.o[t];
    const auto& d_o = dout[t];
    for (std::size_t i = 0; i < n; ++i) {
      const T sg = static_cast<T>(surrogate_kernel(kernel, static_cast<double>(v[i])));
      T a_o = d_o[i];
      T a_v;
      if (adaptive) {
        if (!detach) a_o += ak_next[i];
        a_v = leak * av_next[i] + a_o * sg;
        ak_next[i] = -theta * av_next[i] + decay * ak_next[i];
      } else if (hard) {
        if (!detach) a_o += av_next[i] * (-leak * v[i]);
        a_v = av_next[i] * leak * (T{1} - o[i]) + a_o * sg;
      } else {
        if (!detach) a_o += -theta * av_next[i];
        a_v = leak * av_next[i] + a_o * sg;
      }
      av_next[i] = a_v;
      di[i] = a_v;
    }
    dcurrent[t] = std::move(di);
  }
  return dcurrent;
}

}  // namespace

template <typename T>
SnnGradients<T> snn_backward(const SpikingNet<T>& net, const SnnTrace<T>& trace,
                             const BasicTensor<T>& dlogits, const SurrogateSpec& spec,
                             bool need_weight_grads) {
  if (trace.layers.size() != net.layers.size()) {
    throw StateError("snn_backward: trace has " + std::to_string(trace.layers.size()) +
                     " layers, network has " + std::to_string(net.layers.size()));
  }
  if (trace.timesteps < 1 || dlogits.dim(0) != trace.batch ||
      dlogits.row_width() != net.num_classes()) {
    throw StateError("snn_backward: gradient shape does not match the recorded forward pass");
  }
  for (const auto& tr : trace.layers) {
    if (tr.v.size() != static_cast<std::size_t>(trace.timesteps)) {
      throw StateError("snn_backward: trace length differs from timesteps");
    }
  }
  spec.validate();
  const auto steps = static_cast<std::size_t>(trace.timesteps);
  const T inv_steps = static_cast<T>(1.0 / static_cast<double>(steps));

  SnnGradients<T> grads;
  grads.dweight.resize(net.layers.size());
  grads.dbias.resize(net.layers.size());

  // dL/dO[t] flowing into the current layer from the one above.
  std::vector<BasicTensor<T>> dout;
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const auto& layer = net.layers[li];
    const auto& tr = trace.layers[li];
    const bool is_readout = li + 1 == net.layers.size();

    std::vector<BasicTensor<T>> dcurrent;
    if (is_readout && net.readout == Readout::Integrator) {
      const T leak = static_cast<T>(net.output_leak);
      BasicTensor<T> av = mul(dlogits, inv_steps);
      dcurrent.resize(steps);
      for (std::size_t t = steps; t-- > 0;) {
        dcurrent[t] = av;
        if (t > 0) av = mul(av, leak);
      }
    } else {
      if (is_readout) dout.assign(steps, mul(dlogits, inv_steps));
      if (tr.o.size() != steps) throw StateError("snn_backward: missing spike trace");
      dcurrent = neuron_backward(layer, tr, dout, spec, net.detach_reset);
    }

    const bool need_dx = true;
    std::vector<BasicTensor<T>> dx;
    if (tr.constant_input) {
      BasicTensor<T> total = dcurrent[0];
      for (std::size_t t = 1; t < steps; ++t) total = add(total, dcurrent[t]);
      auto g = linear_backward(layer.op, tr.x[0], total, need_dx);
      if (need_weight_grads) {
        grads.dweight[li] = std::move(g.dweight);
        grads.dbias[li] = std::move(g.dbias);
      }
      if (li == 0) {
        grads.dinput = std::move(g.dx);
        break;
      }
      // A constant input can only come from the encoder, i.e. li == 0.
      throw StateError("snn_backward: constant input above the first layer");
    }
    auto g = linear_backward(layer.op, stack_steps(tr.x), stack_steps(dcurrent), need_dx);
    if (need_weight_grads) {
      grads.dweight[li] = std::move(g.dweight);
      grads.dbias[li] = std::move(g.dbias);
    }
    dx = split_steps(g.dx, steps);
    if (!layer.synapse.is_identity()) {
      dx = to_tensors(synapse_filter_backward(layer.synapse, to_vectors(dx)), dx[0].shape());
    }
    if (li == 0) {
      BasicTensor<T> total = dx[0];
      for (std::size_t t = 1; t < steps; ++t) total = add(total, dx[t]);
      grads.dinput = std::move(total);
    } else {
      dout = std::move(dx);
    }
  }
  require_finite(grads.dinput, "snn_backward input gradient");
  return grads;
}

template struct SpikingNet<float>;
template struct SpikingNet<double>;
template SnnForwardResult<float> snn_forward(const SpikingNet<float>&, const BasicTensor<float>&,
                                             int, InputEncoding);
template SnnForwardResult<double> snn_forward(const SpikingNet<double>&,
                                              const BasicTensor<double>&, int, InputEncoding);
template SnnGradients<float> snn_backward(const SpikingNet<float>&, const SnnTrace<float>&,
                                          const BasicTensor<float>&, const SurrogateSpec&, bool);
template SnnGradients<double> snn_backward(const SpikingNet<double>&, const SnnTrace<double>&,
                                           const BasicTensor<double>&, const SurrogateSpec&, bool);

SpikingNet<float> make_snn_mlp(const Shape& input_shape, const std::vector<std::size_t>& hidden,
                               std::size_t classes, const NeuronConfig& neuron, int timesteps,
                               Rng& rng, double gain) {
  neuron.validate();
  SpikingNet<float> net;
  net.input_shape = input_shape;
  net.timesteps = timesteps;
  std::size_t width = shape_size(input_shape);
  auto add = [&](std::size_t out) {
    LinearLayer<float> op = DenseLayer<float>(width, out);
    init_fan_in_uniform(op, rng, gain);
    net.layers.push_back({std::move(op), neuron, SynapseConfig::identity()});
    width = out;
  };
  for (auto h : hidden) add(h);
  add(classes);
  net.validate();
  return net;
}

}  // namespace snnadv
