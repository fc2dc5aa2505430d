#pragma once

#include <optional>
#include <span>
#include <vector>

#include "snnadv/surrogate.hpp"

namespace snnadv {

enum class ResetMode { HardZero, SoftSubtract };

/// Leaky integrate-and-fire parameters. With `adaptation_decay` set the
/// neuron follows the adaptive (self-inhibiting) dynamic and `reset` is
/// ignored.
struct NeuronConfig {
  double leak = 1.0;
  double threshold = 1.0;
  ResetMode reset = ResetMode::HardZero;
  std::optional<double> adaptation_decay;

  /// leak in (0, 1], threshold > 0, decay in [0, 1).
  void validate() const;
  bool operator==(const NeuronConfig&) const = default;
};

/// IIR synapse X[t] = sum_p feedback[p-1] X[t-p] + sum_q feedforward[q] S[t-q].
struct SynapseConfig {
  std::vector<double> feedback;          // alpha_1 .. alpha_P
  std::vector<double> feedforward{1.0};  // beta_0 .. beta_Q

  static SynapseConfig identity() { return {}; }
  bool is_identity() const {
    return feedback.empty() && feedforward.size() == 1 && feedforward[0] == 1.0;
  }
  /// Rejects an empty feedforward list and feedback polynomials with a root
  /// on or outside the unit circle.
  void validate() const;
  bool operator==(const SynapseConfig&) const = default;
};

/// How a layer turns membrane potential into output during the forward pass.
/// Relaxed mode swaps the step for the surrogate's antiderivative, which
/// makes the network smooth so finite differences can check the backward.
struct SpikeFunction {
  double threshold = 1.0;
  std::optional<SurrogateSpec> relaxed;

  double operator()(double v) const {
    return relaxed ? relaxed_spike(*relaxed, v) : heaviside(v, threshold);
  }
};

/// Per-neuron state carried between timesteps; all vectors share one length.
template <typename T>
struct NeuronState {
  std::vector<T> v;  // membrane potential V[t]
  std::vector<T> k;  // adaptation variable k[t] (zeros unless adaptive)
  std::vector<T> o;  // output O[t]

  static NeuronState zeros(std::size_t n) {
    return {std::vector<T>(n), std::vector<T>(n), std::vector<T>(n)};
  }
};

/// V' = leak (1 - O) V + input; O' = H(V' - threshold).
template <typename T>
NeuronState<T> step_lif_hard(const NeuronState<T>& prev, std::span<const T> input,
                             const NeuronConfig& cfg, const SpikeFunction& fire = {});

/// V' = leak V + input - threshold O; O' = H(V' - threshold).
template <typename T>
NeuronState<T> step_lif_soft(const NeuronState<T>& prev, std::span<const T> input,
                             const NeuronConfig& cfg, const SpikeFunction& fire = {});

/// V' = leak V + input - threshold k; k' = decay k + O; O' = H(V' - threshold).
template <typename T>
NeuronState<T> step_adaptive(const NeuronState<T>& prev, std::span<const T> input,
                             const NeuronConfig& cfg, const SpikeFunction& fire = {});

/// Dispatches on the configured dynamic.
template <typename T>
NeuronState<T> step_neuron(const NeuronState<T>& prev, std::span<const T> input,
                           const NeuronConfig& cfg, const SpikeFunction& fire = {});

/// One IIR step. spike_history[0] is S[t], [1] is S[t-1], ...;
/// state_history[0] is X[t-1], [1] is X[t-2], .... Missing history counts as
/// zero.
template <typename T>
std::vector<T> synapse_iir(const SynapseConfig& cfg, std::span<const std::vector<T>> spike_history,
                           std::span<const std::vector<T>> state_history);

/// Filters a whole sequence S[0..T) into X[0..T) from zero initial history.
template <typename T>
std::vector<std::vector<T>> synapse_filter(const SynapseConfig& cfg,
                                           const std::vector<std::vector<T>>& spikes);

/// Adjoint of synapse_filter: maps dL/dX[t] to dL/dS[t].
template <typename T>
std::vector<std::vector<T>> synapse_filter_backward(const SynapseConfig& cfg,
                                                    const std::vector<std::vector<T>>& dstate);

}  // namespace snnadv
