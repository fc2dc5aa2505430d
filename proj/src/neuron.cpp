#include "snnadv/neuron.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "snnadv/errors.hpp"

namespace snnadv {

void NeuronConfig::validate() const {
  if (!(leak > 0 && leak <= 1)) throw ConfigError("neuron.leak must be in (0, 1]");
  if (!(threshold > 0) || !std::isfinite(threshold)) {
    throw ConfigError("neuron.threshold must be finite and > 0");
  }
  if (adaptation_decay && !(*adaptation_decay >= 0 && *adaptation_decay < 1)) {
    throw ConfigError("neuron.adaptation must be in [0, 1)");
  }
}

void SynapseConfig::validate() const {
  if (feedforward.empty()) throw ConfigError("synapse needs at least one feedforward coefficient");
  for (double c : feedback) {
    if (!std::isfinite(c)) throw ConfigError("synapse feedback coefficient is not finite");
  }
  for (double c : feedforward) {
    if (!std::isfinite(c)) throw ConfigError("synapse feedforward coefficient is not finite");
  }
  if (feedback.empty()) return;
  // Roots of z^P - a1 z^(P-1) - ... - aP are the eigenvalues of its companion matrix.
  const auto p = static_cast<Eigen::Index>(feedback.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) companion(0, i) = feedback[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (std::abs(solver.eigenvalues()[i]) >= 1.0) {
      throw ConfigError("synapse feedback is unstable: pole of modulus " +
                        std::to_string(std::abs(solver.eigenvalues()[i])));
    }
  }
}

namespace {

template <typename T>
void check_input(std::span<const T> input, std::size_t n) {
  if (input.size() != n) throw DimensionError("neuron step: input width mismatch");
  for (T x : input) {
    if (!std::isfinite(x)) throw NumericError("neuron step: non-finite input current");
  }
}

}  // namespace

template <typename T>
NeuronState<T> step_lif_hard(const NeuronState<T>& prev, std::span<const T> input,
                             const NeuronConfig& cfg, const SpikeFunction& fire) {
  check_input(input, prev.v.size());
  const T leak = static_cast<T>(cfg.leak);
  NeuronState<T> next = NeuronState<T>::zeros(prev.v.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    next.v[i] = leak * (T{1} - prev.o[i]) * prev.v[i] + input[i];
    next.o[i] = static_cast<T>(fire(static_cast<double>(next.v[i])));
  }
  return next;
}

template <typename T>
NeuronState<T> step_lif_soft(const NeuronState<T>& prev, std::span<const T> input,
                             const NeuronConfig& cfg, const SpikeFunction& fire) {
  check_input(input, prev.v.size());
  const T leak = static_cast<T>(cfg.leak);
  const T theta = static_cast<T>(cfg.threshold);
  NeuronState<T> next = NeuronState<T>::zeros(prev.v.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    next.v[i] = leak * prev.v[i] + input[i] - theta * prev.o[i];
    next.o[i] = static_cast<T>(fire(static_cast<double>(next.v[i])));
  }
  return next;
}

template <typename T>
NeuronState<T> step_adaptive(const NeuronState<T>& prev, std::span<const T> input,
                             const NeuronConfig& cfg, const SpikeFunction& fire) {
  check_input(input, prev.v.size());
  const T leak = static_cast<T>(cfg.leak);
  const T theta = static_cast<T>(cfg.threshold);
  const T decay = static_cast<T>(cfg.adaptation_decay.value_or(0.0));
  NeuronState<T> next = NeuronState<T>::zeros(prev.v.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    next.v[i] = leak * prev.v[i] + input[i] - theta * prev.k[i];
    next.k[i] = decay * prev.k[i] + prev.o[i];
    next.o[i] = static_cast<T>(fire(static_cast<double>(next.v[i])));
  }
  return next;
}

template <typename T>
NeuronState<T> step_neuron(const NeuronState<T>& prev, std::span<const T> input,
                           const NeuronConfig& cfg, const SpikeFunction& fire) {
  if (cfg.adaptation_decay) return step_adaptive(prev, input, cfg, fire);
  if (cfg.reset == ResetMode::HardZero) return step_lif_hard(prev, input, cfg, fire);
  return step_lif_soft(prev, input, cfg, fire);
}

template <typename T>
std::vector<T> synapse_iir(const SynapseConfig& cfg, std::span<const std::vector<T>> spike_history,
                           std::span<const std::vector<T>> state_history) {
  if (spike_history.empty()) throw DimensionError("synapse_iir: need S[t]");
  const std::size_t n = spike_history[0].size();
  std::vector<T> x(n, T{0});
  for (std::size_t p = 0; p < cfg.feedback.size() && p < state_history.size(); ++p) {
    const T a = static_cast<T>(cfg.feedback[p]);
    const auto& past = state_history[p];
    if (past.size() != n) throw DimensionError("synapse_iir: state width mismatch");
    for (std::size_t i = 0; i < n; ++i) x[i] += a * past[i];
  }
  for (std::size_t q = 0; q < cfg.feedforward.size() && q < spike_history.size(); ++q) {
    const T b = static_cast<T>(cfg.feedforward[q]);
    const auto& past = spike_history[q];
    if (past.size() != n) throw DimensionError("synapse_iir: spike width mismatch");
    for (std::size_t i = 0; i < n; ++i) x[i] += b * past[i];
  }
  return x;
}

template <typename T>
std::vector<std::vector<T>> synapse_filter(const SynapseConfig& cfg,
                                           const std::vector<std::vector<T>>& spikes) {
  const std::size_t steps = spikes.size();
  std::vector<std::vector<T>> states;
  states.reserve(steps);
  std::vector<std::vector<T>> spike_hist, state_hist;
  for (std::size_t t = 0; t < steps; ++t) {
    spike_hist.clear();
    state_hist.clear();
    for (std::size_t q = 0; q < cfg.feedforward.size() && q <= t; ++q) {
      spike_hist.push_back(spikes[t - q]);
    }
    for (std::size_t p = 1; p <= cfg.feedback.size() && p <= t; ++p) {
      state_hist.push_back(states[t - p]);
    }
    states.push_back(synapse_iir<T>(cfg, spike_hist, state_hist));
  }
  return states;
}

template <typename T>
std::vector<std::vector<T>> synapse_filter_backward(const SynapseConfig& cfg,
                                                    const std::vector<std::vector<T>>& dstate) {
  const std::size_t steps = dstate.size();
  if (steps == 0) return {};
  const std::size_t n = dstate[0].size();
  // Total adjoint of X[t] includes feedback into later X[t+p].
  std::vector<std::vector<T>> ax(steps, std::vector<T>(n));
  for (std::size_t t = steps; t-- > 0;) {
    ax[t] = dstate[t];
    for (std::size_t p = 1; p <= cfg.feedback.size() && t + p < steps; ++p) {
      const T a = static_cast<T>(cfg.feedback[p - 1]);
      for (std::size_t i = 0; i < n; ++i) ax[t][i] += a * ax[t + p][i];
    }
  }
  std::vector<std::vector<T>> ds(steps, std::vector<T>(n));
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t q = 0; q < cfg.feedforward.size() && t + q < steps; ++q) {
      const T b = static_cast<T>(cfg.feedforward[q]);
      for (std::size_t i = 0; i < n; ++i) ds[t][i] += b * ax[t + q][i];
    }
  }
  return ds;
}

#define SNNADV_INSTANTIATE_NEURON(T)                                                          \
  template NeuronState<T> step_lif_hard(const NeuronState<T>&, std::span<const T>,            \
                                        const NeuronConfig&, const SpikeFunction&);           \
  template NeuronState<T> step_lif_soft(const NeuronState<T>&, std::span<const T>,            \
                                        const NeuronConfig&, const SpikeFunction&);           \
  template NeuronState<T> step_adaptive(const NeuronState<T>&, std::span<const T>,            \
                                        const NeuronConfig&, const SpikeFunction&);           \
  template NeuronState<T> step_neuron(const NeuronState<T>&, std::span<const T>,              \
                                      const NeuronConfig&, const SpikeFunction&);             \
  template std::vector<T> synapse_iir(const SynapseConfig&, std::span<const std::vector<T>>,  \
                                      std::span<const std::vector<T>>);                       \
  template std::vector<std::vector<T>> synapse_filter(const SynapseConfig&,                   \
                                                      const std::vector<std::vector<T>>&);    \
  template std::vector<std::vector<T>> synapse_filter_backward(                               \
      const SynapseConfig&, const std::vector<std::vector<T>>&);

SNNADV_INSTANTIATE_NEURON(float)
SNNADV_INSTANTIATE_NEURON(double)

}  // namespace snnadv
