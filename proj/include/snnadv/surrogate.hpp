#pragma once

#include <array>
#include <string>
#include <string_view>

#include "snnadv/tensor.hpp"

namespace snnadv {

enum class SurrogateKind {
  Sigmoid,
  Erfc,
  Arctan,
  PiecewiseLinear,
  FastSigmoid,
  PiecewiseExp,
  Rectangular,
};

inline constexpr std::array<SurrogateKind, 7> kAllSurrogateKinds = {
    SurrogateKind::Sigmoid,     SurrogateKind::Erfc,         SurrogateKind::Arctan,
    SurrogateKind::PiecewiseLinear, SurrogateKind::FastSigmoid, SurrogateKind::PiecewiseExp,
    SurrogateKind::Rectangular,
};

/// Lowercase name used in configs and reports ("sigmoid", "erfc", "arctan",
/// "pwl", "fastsigmoid", "pwe", "rectangular").
std::string_view surrogate_name(SurrogateKind kind);
/// Accepts the names above; throws ConfigError otherwise.
SurrogateKind parse_surrogate_kind(std::string_view name);

/// Which smooth stand-in replaces dH/dv in backward passes.
///
/// `alpha` is shared by PiecewiseExp (peak height) and Rectangular (window
/// width, height 1/alpha). `sigma` only affects Erfc, `beta` only PiecewiseExp.
struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::Arctan;
  double threshold = 1.0;
  double sigma = 0.4;
  double alpha = 1.0;
  double beta = 5.0;
  /// PiecewiseExp as 1 / (alpha * exp(-beta |v - threshold|)), which grows
  /// away from threshold. Off by default.
  bool literal_piecewise_exp = false;
  /// FastSigmoid as 1 / (1 + |v - threshold|)^2 instead of
  /// 1 / (1 + (1 + |v - threshold|)^2).
  bool conventional_fast_sigmoid = false;

  static SurrogateSpec of(SurrogateKind kind, double threshold = 1.0) {
    SurrogateSpec s;
    s.kind = kind;
    s.threshold = threshold;
    return s;
  }

  /// Throws ConfigError when a hyperparameter is not strictly positive.
  void validate() const;

  bool operator==(const SurrogateSpec&) const = default;
};

/// Spike function: 1 where v >= threshold, else 0.
template <typename T>
BasicTensor<T> heaviside(const BasicTensor<T>& v, double threshold);

inline double heaviside(double v, double threshold) { return v >= threshold ? 1.0 : 0.0; }

/// Kernel value k(v) standing in for the Heaviside derivative.
double surrogate_kernel(const SurrogateSpec& spec, double v);

/// An antiderivative of the kernel, normalized so it tends to 0 as v -> -inf
/// (except for the literal piecewise-exp form, which is unbounded and is 0 at
/// threshold). Running the forward pass with this in place of the Heaviside
/// step gives a smooth network whose exact gradient is what the surrogate
/// backward computes.
double relaxed_spike(const SurrogateSpec& spec, double v);

template <typename T>
BasicTensor<T> surrogate_grad(const SurrogateSpec& spec, const BasicTensor<T>& v);

}  // namespace snnadv
