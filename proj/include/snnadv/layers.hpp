#pragma once

#include <variant>

#include "snnadv/random.hpp"
#include "snnadv/tensor.hpp"

namespace snnadv {

/// Gradients of a linear layer: input, weight and bias.
template <typename T>
struct LinearGrads {
  BasicTensor<T> dx;
  BasicTensor<T> dweight;
  BasicTensor<T> dbias;
};

/// y = x W^T + b over rows of x. weight is [out, in], bias is [out].
template <typename T>
struct DenseLayer {
  BasicTensor<T> weight;
  BasicTensor<T> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out);

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  BasicTensor<T> forward(const BasicTensor<T>& x) const;
  LinearGrads<T> backward(const BasicTensor<T>& x, const BasicTensor<T>& dy,
                          bool need_dx = true) const;
};

/// 3x3 convolution, stride 1, zero padding 1, over rows laid out as [C, H, W].
/// weight is [out_channels, in_channels * 9], bias is [out_channels].
template <typename T>
struct Conv2dLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  BasicTensor<T> weight;
  BasicTensor<T> bias;

  Conv2dLayer() = default;
  Conv2dLayer(std::size_t in_c, std::size_t out_c, std::size_t h, std::size_t w);

  std::size_t in_features() const { return in_channels * height * width; }
  std::size_t out_features() const { return out_channels * height * width; }

  BasicTensor<T> forward(const BasicTensor<T>& x) const;
  LinearGrads<T> backward(const BasicTensor<T>& x, const BasicTensor<T>& dy,
                          bool need_dx = true) const;
};

/// The weighted stages shared by the conventional and spiking networks.
template <typename T>
using LinearLayer = std::variant<DenseLayer<T>, Conv2dLayer<T>>;

template <typename T>
std::size_t in_features(const LinearLayer<T>& layer) {
  return std::visit([](const auto& l) { return l.in_features(); }, layer);
}
template <typename T>
std::size_t out_features(const LinearLayer<T>& layer) {
  return std::visit([](const auto& l) { return l.out_features(); }, layer);
}
template <typename T>
BasicTensor<T> linear_forward(const LinearLayer<T>& layer, const BasicTensor<T>& x) {
  return std::visit([&](const auto& l) { return l.forward(x); }, layer);
}
template <typename T>
LinearGrads<T> linear_backward(const LinearLayer<T>& layer, const BasicTensor<T>& x,
                               const BasicTensor<T>& dy, bool need_dx = true) {
  return std::visit([&](const auto& l) { return l.backward(x, dy, need_dx); }, layer);
}
template <typename T>
BasicTensor<T>& layer_weight(LinearLayer<T>& layer) {
  return std::visit([](auto& l) -> BasicTensor<T>& { return l.weight; }, layer);
}
template <typename T>
const BasicTensor<T>& layer_weight(const LinearLayer<T>& layer) {
  return std::visit([](const auto& l) -> const BasicTensor<T>& { return l.weight; }, layer);
}
template <typename T>
BasicTensor<T>& layer_bias(LinearLayer<T>& layer) {
  return std::visit([](auto& l) -> BasicTensor<T>& { return l.bias; }, layer);
}
template <typename T>
const BasicTensor<T>& layer_bias(const LinearLayer<T>& layer) {
  return std::visit([](const auto& l) -> const BasicTensor<T>& { return l.bias; }, layer);
}

/// Fan-in scaled uniform init: weights in +-gain*sqrt(3/fan_in), zero bias.
template <typename T>
void init_fan_in_uniform(LinearLayer<T>& layer, Rng& rng, double gain);

/// Element type conversion for layers (used to run 64-bit gradient oracles).
template <typename U, typename T>
LinearLayer<U> cast_layer(const LinearLayer<T>& layer) {
  return std::visit(
      [](const auto& l) -> LinearLayer<U> {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, DenseLayer<T>>) {
          DenseLayer<U> out;
          out.weight = l.weight.template cast<U>();
          out.bias = l.bias.template cast<U>();
          return out;
        } else {
          Conv2dLayer<U> out;
          out.in_channels = l.in_channels;
          out.out_channels = l.out_channels;
          out.height = l.height;
          out.width = l.width;
          out.weight = l.weight.template cast<U>();
          out.bias = l.bias.template cast<U>();
          return out;
        }
      },
      layer);
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x);
/// Gradient passes where the forward input was strictly positive.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy);

/// 2x2 stride-2 pooling over rows laid out as [C, H, W]; H and W must be even.
struct PoolGeometry {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t in_features() const { return channels * height * width; }
  std::size_t out_features() const { return channels * (height / 2) * (width / 2); }
};

template <typename T>
BasicTensor<T> avg_pool2_forward(const PoolGeometry& g, const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> avg_pool2_backward(const PoolGeometry& g, const BasicTensor<T>& dy);
template <typename T>
BasicTensor<T> max_pool2_forward(const PoolGeometry& g, const BasicTensor<T>& x);
/// Routes each pooled gradient to the first maximal input of its window.
template <typename T>
BasicTensor<T> max_pool2_backward(const PoolGeometry& g, const BasicTensor<T>& x,
                                  const BasicTensor<T>& dy);

}  // namespace snnadv
