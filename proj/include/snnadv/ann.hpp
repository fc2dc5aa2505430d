#pragma once

#include <variant>
#include <vector>

#include "snnadv/layers.hpp"

namespace snnadv {

struct ReluLayer {};
/// Marks the switch from [C, H, W] rows to flat feature rows. Rows are stored
/// flat already, so this is a no-op on data.
struct FlattenLayer {};
struct AvgPoolLayer {
  PoolGeometry geometry;
};
struct MaxPoolLayer {
  PoolGeometry geometry;
};

template <typename T>
using AnnLayer =
    std::variant<DenseLayer<T>, Conv2dLayer<T>, ReluLayer, FlattenLayer, AvgPoolLayer, MaxPoolLayer>;

/// Conventional feed-forward classifier.
template <typename T>
struct AnnNet {
  Shape input_shape;
  std::vector<AnnLayer<T>> layers;

  std::size_t num_classes() const;
  void validate() const;

  template <typename U>
  AnnNet<U> cast() const;
};

template <typename T>
struct AnnTrace {
  std::vector<BasicTensor<T>> inputs;  // input to layer i
  BasicTensor<T> logits;
};

template <typename T>
struct AnnGradients {
  BasicTensor<T> dinput;
  std::vector<BasicTensor<T>> dweight;  // empty tensors for parameter-free layers
  std::vector<BasicTensor<T>> dbias;
};

template <typename T>
AnnTrace<T> ann_forward(const AnnNet<T>& net, const BasicTensor<T>& x);

template <typename T>
AnnGradients<T> ann_backward(const AnnNet<T>& net, const AnnTrace<T>& trace,
                             const BasicTensor<T>& dlogits, bool need_weight_grads = true);

/// Dense ReLU network input -> hidden... -> classes, fan-in initialized.
AnnNet<float> make_mlp(const Shape& input_shape, const std::vector<std::size_t>& hidden,
                       std::size_t classes, Rng& rng);

/// conv3x3(c1) relu pool2 conv3x3(c2) relu pool2 flatten dense(classes).
AnnNet<float> make_cnn(const Shape& input_shape, std::size_t c1, std::size_t c2,
                       std::size_t classes, Rng& rng, bool max_pool = false);

template <typename T>
template <typename U>
AnnNet<U> AnnNet<T>::cast() const {
  AnnNet<U> out;
  out.input_shape = input_shape;
  for (const auto& layer : layers) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, DenseLayer<T>>) {
            out.layers.push_back(std::get<DenseLayer<U>>(cast_layer<U, T>(LinearLayer<T>(l))));
          } else if constexpr (std::is_same_v<L, Conv2dLayer<T>>) {
            out.layers.push_back(std::get<Conv2dLayer<U>>(cast_layer<U, T>(LinearLayer<T>(l))));
          } else {
            out.layers.push_back(l);
          }
        },
        layer);
  }
  return out;
}

}  // namespace snnadv
