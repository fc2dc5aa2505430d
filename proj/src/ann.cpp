#include "snnadv/ann.hpp"

#include <cmath>

#include "snnadv/ops.hpp"

namespace snnadv {

namespace {

template <typename T>
std::size_t layer_out_width(const AnnLayer<T>& layer, std::size_t width) {
  return std::visit(
      [&](const auto& l) -> std::size_t {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, DenseLayer<T>> || std::is_same_v<L, Conv2dLayer<T>>) {
          if (l.in_features() != width) {
            throw DimensionError("ann layer expects " + std::to_string(l.in_features()) +
                                 " inputs, previous stage gives " + std::to_string(width));
          }
          return l.out_features();
        } else if constexpr (std::is_same_v<L, AvgPoolLayer> || std::is_same_v<L, MaxPoolLayer>) {
          if (l.geometry.in_features() != width || l.geometry.height % 2 || l.geometry.width % 2) {
            throw DimensionError("pooling geometry does not match its input");
          }
          return l.geometry.out_features();
        } else {
          return width;
        }
      },
      layer);
}

}  // namespace

template <typename T>
void AnnNet<T>::validate() const {
  if (layers.empty()) throw ConfigError("ann has no layers");
  std::size_t width = shape_size(input_shape);
  for (const auto& l : layers) width = layer_out_width(l, width);
}

template <typename T>
std::size_t AnnNet<T>::num_classes() const {
  std::size_t width = shape_size(input_shape);
  for (const auto& l : layers) width = layer_out_width(l, width);
  return width;
}

template <typename T>
AnnTrace<T> ann_forward(const AnnNet<T>& net, const BasicTensor<T>& x) {
  require_finite(x, "ann_forward input");
  AnnTrace<T> trace;
  BasicTensor<T> h = x.rank() == 2 ? x : x.reshaped({x.dim(0), x.row_width()});
  for (const auto& layer : net.layers) {
    trace.inputs.push_back(h);
    h = std::visit(
        [&](const auto& l) -> BasicTensor<T> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, DenseLayer<T>> || std::is_same_v<L, Conv2dLayer<T>>) {
            return l.forward(h);
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            return relu_forward(h);
          } else if constexpr (std::is_same_v<L, AvgPoolLayer>) {
            return avg_pool2_forward(l.geometry, h);
          } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
            return max_pool2_forward(l.geometry, h);
          } else {
            return h;
          }
        },
        layer);
  }
  require_finite(h, "ann_forward logits");
  trace.logits = std::move(h);
  return trace;
}

template <typename T>
AnnGradients<T> ann_backward(const AnnNet<T>& net, const AnnTrace<T>& trace,
                             const BasicTensor<T>& dlogits, bool need_weight_grads) {
  if (trace.inputs.size() != net.layers.size()) {
    throw StateError("ann_backward: trace does not match network");
  }
  if (dlogits.shape() != trace.logits.shape()) {
    throw DimensionError("ann_backward: dlogits shape " + shape_string(dlogits.shape()) +
                         " vs logits " + shape_string(trace.logits.shape()));
  }
  AnnGradients<T> grads;
  grads.dweight.resize(net.layers.size());
  grads.dbias.resize(net.layers.size());
  BasicTensor<T> d = dlogits;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& in = trace.inputs[i];
    d = std::visit(
        [&](const auto& l) -> BasicTensor<T> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, DenseLayer<T>> || std::is_same_v<L, Conv2dLayer<T>>) {
            auto g = l.backward(in, d, true);
            if (need_weight_grads) {
              grads.dweight[i] = std::move(g.dweight);
              grads.dbias[i] = std::move(g.dbias);
            }
            return std::move(g.dx);
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            return relu_backward(in, d);
          } else if constexpr (std::is_same_v<L, AvgPoolLayer>) {
            return avg_pool2_backward(l.geometry, d);
          } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
            return max_pool2_backward(l.geometry, in, d);
          } else {
            return d;
          }
        },
        net.layers[i]);
  }
  require_finite(d, "ann_backward input gradient");
  grads.dinput = std::move(d);
  return grads;
}

AnnNet<float> make_mlp(const Shape& input_shape, const std::vector<std::size_t>& hidden,
                       std::size_t classes, Rng& rng) {
  AnnNet<float> net;
  net.input_shape = input_shape;
  std::size_t width = shape_size(input_shape);
  for (std::size_t h : hidden) {
    LinearLayer<float> layer = DenseLayer<float>(width, h);
    init_fan_in_uniform(layer, rng, std::sqrt(2.0));
    net.layers.push_back(std::get<DenseLayer<float>>(layer));
    net.layers.push_back(ReluLayer{});
    width = h;
  }
  LinearLayer<float> head = DenseLayer<float>(width, classes);
  init_fan_in_uniform(head, rng, 1.0);
  net.layers.push_back(std::get<DenseLayer<float>>(head));
  return net;
}

AnnNet<float> make_cnn(const Shape& input_shape, std::size_t c1, std::size_t c2,
                       std::size_t classes, Rng& rng, bool max_pool) {
  if (input_shape.size() != 3) throw DimensionError("make_cnn: input shape must be [C, H, W]");
  AnnNet<float> net;
  net.input_shape = input_shape;
  std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  auto add_pool = [&](std::size_t ch) {
    PoolGeometry g{ch, h, w};
    if (max_pool) {
      net.layers.push_back(MaxPoolLayer{g});
    } else {
      net.layers.push_back(AvgPoolLayer{g});
    }
    h /= 2;
    w /= 2;
  };
  LinearLayer<float> conv1 = Conv2dLayer<float>(c, c1, h, w);
  init_fan_in_uniform(conv1, rng, std::sqrt(2.0));
  net.layers.push_back(std::get<Conv2dLayer<float>>(conv1));
  net.layers.push_back(ReluLayer{});
  add_pool(c1);
  LinearLayer<float> conv2 = Conv2dLayer<float>(c1, c2, h, w);
  init_fan_in_uniform(conv2, rng, std::sqrt(2.0));
  net.layers.push_back(std::get<Conv2dLayer<float>>(conv2));
  net.layers.push_back(ReluLayer{});
  add_pool(c2);
  net.layers.push_back(FlattenLayer{});
  LinearLayer<float> head = DenseLayer<float>(c2 * h * w, classes);
  init_fan_in_uniform(head, rng, 1.0);
  net.layers.push_back(std::get<DenseLayer<float>>(head));
  return net;
}

template struct AnnNet<float>;
template struct AnnNet<double>;
template AnnTrace<float> ann_forward(const AnnNet<float>&, const BasicTensor<float>&);
template AnnTrace<double> ann_forward(const AnnNet<double>&, const BasicTensor<double>&);
template AnnGradients<float> ann_backward(const AnnNet<float>&, const AnnTrace<float>&,
                                          const BasicTensor<float>&, bool);
template AnnGradients<double> ann_backward(const AnnNet<double>&, const AnnTrace<double>&,
                                           const BasicTensor<double>&, bool);

}  // namespace snnadv
