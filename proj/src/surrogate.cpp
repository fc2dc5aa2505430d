#include "snnadv/surrogate.hpp"

#include <cmath>

namespace snnadv {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::string_view surrogate_name(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::Sigmoid: return "sigmoid";
    case SurrogateKind::Erfc: return "erfc";
    case SurrogateKind::Arctan: return "arctan";
    case SurrogateKind::PiecewiseLinear: return "pwl";
    case SurrogateKind::FastSigmoid: return "fastsigmoid";
    case SurrogateKind::PiecewiseExp: return "pwe";
    case SurrogateKind::Rectangular: return "rectangular";
  }
  return "unknown";
}

SurrogateKind parse_surrogate_kind(std::string_view name) {
  for (auto kind : kAllSurrogateKinds) {
    if (surrogate_name(kind) == name) return kind;
  }
  if (name == "actfun" || name == "rect") return SurrogateKind::Rectangular;
  if (name == "linear" || name == "piecewise-linear") return SurrogateKind::PiecewiseLinear;
  if (name == "piecewise-exp") return SurrogateKind::PiecewiseExp;
  if (name == "fast-sigmoid") return SurrogateKind::FastSigmoid;
  throw ConfigError("unknown surrogate kind '" + std::string(name) + "'");
}

void SurrogateSpec::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) {
      throw ConfigError(std::string("surrogate.") + name + " must be finite and > 0");
    }
  };
  positive(threshold, "threshold");
  positive(sigma, "sigma");
  positive(alpha, "alpha");
  positive(beta, "beta");
}

template <typename T>
BasicTensor<T> heaviside(const BasicTensor<T>& v, double threshold) {
  BasicTensor<T> out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<double>(v[i]) >= threshold ? T{1} : T{0};
  }
  return out;
}

double surrogate_kernel(const SurrogateSpec& spec, double v) {
  const double d = v - spec.threshold;
  const double ad = std::abs(d);
  switch (spec.kind) {
    case SurrogateKind::Sigmoid: {
      // e^{-|d|} form of e^{-d} / (1 + e^{-d})^2; identical value, no overflow.
      double e = std::exp(-ad);
      return e / ((1 + e) * (1 + e));
    }
    case SurrogateKind::Erfc:
      return std::exp(-(d * d) / (2 * spec.sigma * spec.sigma)) /
             (std::sqrt(2 * kPi) * spec.sigma);
    case SurrogateKind::Arctan:
      return 1.0 / (1.0 + kPi * kPi * d * d);
    case SurrogateKind::PiecewiseLinear:
      return std::max(0.0, 1.0 - ad);
    case SurrogateKind::FastSigmoid:
      if (spec.conventional_fast_sigmoid) return 1.0 / ((1 + ad) * (1 + ad));
      return 1.0 / (1.0 + (1 + ad) * (1 + ad));
    case SurrogateKind::PiecewiseExp:
      if (spec.literal_piecewise_exp) {
        // Saturate instead of overflowing far from threshold.
        return std::min(std::exp(spec.beta * ad) / spec.alpha, 1e30);
      }
      return spec.alpha * std::exp(-spec.beta * ad);
    case SurrogateKind::Rectangular:
      return ad < spec.alpha / 2 ? 1.0 / spec.alpha : 0.0;
  }
  return 0.0;
}

double relaxed_spike(const SurrogateSpec& spec, double v) {
  const double d = v - spec.threshold;
  const double ad = std::abs(d);
  const double sgn = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
  switch (spec.kind) {
    case SurrogateKind::Sigmoid:
      return d >= 0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
    case SurrogateKind::Erfc:
      return 0.5 * std::erfc(-d / (spec.sigma * std::sqrt(2.0)));
    case SurrogateKind::Arctan:
      return std::atan(kPi * d) / kPi + 0.5;
    case SurrogateKind::PiecewiseLinear:
      if (d <= -1) return 0.0;
      if (d >= 1) return 1.0;
      return d < 0 ? 0.5 * (1 + d) * (1 + d) : 1.0 - 0.5 * (1 - d) * (1 - d);
    case SurrogateKind::FastSigmoid:
      if (spec.conventional_fast_sigmoid) return sgn * (1.0 - 1.0 / (1.0 + ad)) + 1.0;
      return sgn * (std::atan(1.0 + ad) - kPi / 4) + kPi / 4;
    case SurrogateKind::PiecewiseExp:
      if (spec.literal_piecewise_exp) {
        return sgn * std::expm1(spec.beta * ad) / (spec.alpha * spec.beta);
      }
      return sgn * (spec.alpha / spec.beta) * -std::expm1(-spec.beta * ad) +
             spec.alpha / spec.beta;
    case SurrogateKind::Rectangular:
      return std::clamp((d + spec.alpha / 2) / spec.alpha, 0.0, 1.0);
  }
  return 0.0;
}

template <typename T>
BasicTensor<T> surrogate_grad(const SurrogateSpec& spec, const BasicTensor<T>& v) {
  BasicTensor<T> out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<T>(surrogate_kernel(spec, static_cast<double>(v[i])));
  }
  return out;
}

template BasicTensor<float> heaviside(const BasicTensor<float>&, double);
template BasicTensor<double> heaviside(const BasicTensor<double>&, double);
template BasicTensor<float> surrogate_grad(const SurrogateSpec&, const BasicTensor<float>&);
template BasicTensor<double> surrogate_grad(const SurrogateSpec&, const BasicTensor<double>&);

}  // namespace snnadv
