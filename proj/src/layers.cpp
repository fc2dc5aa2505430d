#include "snnadv/layers.hpp"

#include <cmath>

#include "snnadv/ops.hpp"

namespace snnadv {

namespace {

template <typename T>
void require_width(const BasicTensor<T>& x, std::size_t width, const char* op) {
  if (x.rank() < 1 || x.row_width() != width) {
    throw DimensionError(std::string(op) + ": expected rows of width " + std::to_string(width) +
                         ", got " + shape_string(x.shape()));
  }
}

template <typename T>
BasicTensor<T> as_rows(const BasicTensor<T>& x) {
  if (x.rank() == 2) return x;
  return x.reshaped({x.dim(0), x.row_width()});
}

// Column matrix [in_c * 9, H * W] of one sample's 3x3 neighbourhoods.
template <typename T>
void im2col(const Conv2dLayer<T>& c, std::span<const T> img, BasicTensor<T>& cols) {
  const long h = static_cast<long>(c.height), w = static_cast<long>(c.width);
  std::size_t hw = c.height * c.width;
  for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        std::size_t row = (ch * 9 + static_cast<std::size_t>(ky * 3 + kx)) * hw;
        for (long y = 0; y < h; ++y) {
          long sy = y + ky - 1;
          for (long x = 0; x < w; ++x) {
            long sx = x + kx - 1;
            T v = (sy < 0 || sy >= h || sx < 0 || sx >= w)
                      ? T{0}
                      : img[ch * hw + static_cast<std::size_t>(sy * w + sx)];
            cols[row + static_cast<std::size_t>(y * w + x)] = v;
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const Conv2dLayer<T>& c, const BasicTensor<T>& cols, std::span<T> img) {
  const long h = static_cast<long>(c.height), w = static_cast<long>(c.width);
  std::size_t hw = c.height * c.width;
  for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        std::size_t row = (ch * 9 + static_cast<std::size_t>(ky * 3 + kx)) * hw;
        for (long y = 0; y < h; ++y) {
          long sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (long x = 0; x < w; ++x) {
            long sx = x + kx - 1;
            if (sx < 0 || sx >= w) continue;
            img[ch * hw + static_cast<std::size_t>(sy * w + sx)] +=
                cols[row + static_cast<std::size_t>(y * w + x)];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
DenseLayer<T>::DenseLayer(std::size_t in, std::size_t out)
    : weight({out, in}), bias({out}) {}

template <typename T>
BasicTensor<T> DenseLayer<T>::forward(const BasicTensor<T>& x) const {
  require_width(x, in_features(), "dense forward");
  BasicTensor<T> y = matmul_nt(as_rows(x), weight);
  std::size_t out = out_features();
  auto data = y.data();
  for (std::size_t r = 0; r < y.dim(0); ++r) {
    for (std::size_t j = 0; j < out; ++j) data[r * out + j] += bias[j];
  }
  return y;
}

template <typename T>
LinearGrads<T> DenseLayer<T>::backward(const BasicTensor<T>& x, const BasicTensor<T>& dy,
                                       bool need_dx) const {
  require_width(x, in_features(), "dense backward");
  require_width(dy, out_features(), "dense backward");
  LinearGrads<T> g;
  BasicTensor<T> dy2 = as_rows(dy);
  g.dweight = matmul_tn(dy2, as_rows(x));
  g.dbias = BasicTensor<T>({out_features()});
  for (std::size_t r = 0; r < dy2.dim(0); ++r) {
    auto row = dy2.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) g.dbias[j] += row[j];
  }
  if (need_dx) g.dx = matmul(dy2, weight).reshaped(x.shape());
  return g;
}

template <typename T>
Conv2dLayer<T>::Conv2dLayer(std::size_t in_c, std::size_t out_c, std::size_t h, std::size_t w)
    : in_channels(in_c),
      out_channels(out_c),
      height(h),
      width(w),
      weight({out_c, in_c * 9}),
      bias({out_c}) {}

template <typename T>
BasicTensor<T> Conv2dLayer<T>::forward(const BasicTensor<T>& x) const {
  require_width(x, in_features(), "conv2d forward");
  std::size_t n = x.dim(0), hw = height * width;
  BasicTensor<T> y({n, out_features()});
  BasicTensor<T> cols({in_channels * 9, hw});
  for (std::size_t s = 0; s < n; ++s) {
    im2col(*this, x.row(s), cols);
    BasicTensor<T> out = matmul(weight, cols);
    auto dst = y.row(s);
    for (std::size_t oc = 0; oc < out_channels; ++oc) {
      for (std::size_t p = 0; p < hw; ++p) dst[oc * hw + p] = out[oc * hw + p] + bias[oc];
    }
  }
  return y;
}

template <typename T>
LinearGrads<T> Conv2dLayer<T>::backward(const BasicTensor<T>& x, const BasicTensor<T>& dy,
                                        bool need_dx) const {
  require_width(x, in_features(), "conv2d backward");
  require_width(dy, out_features(), "conv2d backward");
  std::size_t n = x.dim(0), hw = height * width;
  LinearGrads<T> g;
  g.dweight = BasicTensor<T>(weight.shape());
  g.dbias = BasicTensor<T>(bias.shape());
  if (need_dx) g.dx = BasicTensor<T>(x.shape());
  BasicTensor<T> cols({in_channels * 9, hw});
  for (std::size_t s = 0; s < n; ++s) {
    auto src = dy.row(s);
    BasicTensor<T> dout({out_channels, hw}, std::vector<T>(src.begin(), src.end()));
    im2col(*this, x.row(s), cols);
    BasicTensor<T> dw = matmul_nt(dout, cols);
    for (std::size_t i = 0; i < dw.size(); ++i) g.dweight[i] += dw[i];
    for (std::size_t oc = 0; oc < out_channels; ++oc) {
      for (std::size_t p = 0; p < hw; ++p) g.dbias[oc] += dout[oc * hw + p];
    }
    if (need_dx) col2im(*this, matmul_tn(weight, dout), g.dx.row(s));
  }
  return g;
}

template <typename T>
void init_fan_in_uniform(LinearLayer<T>& layer, Rng& rng, double gain) {
  BasicTensor<T>& w = layer_weight(layer);
  double bound = gain * std::sqrt(3.0 / static_cast<double>(w.dim(1)));
  for (auto& v : w.data()) v = static_cast<T>(uniform(rng, -bound, bound));
  for (auto& v : layer_bias(layer).data()) v = T{0};
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy) {
  if (x.shape() != dy.shape()) throw DimensionError("relu backward: shape mismatch");
  BasicTensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T{0} ? dy[i] : T{0};
  return dx;
}

namespace {

void check_pool(const PoolGeometry& g, std::size_t width, const char* op) {
  if (g.height % 2 || g.width % 2) throw DimensionError(std::string(op) + ": odd spatial extent");
  if (width != g.in_features()) {
    throw DimensionError(std::string(op) + ": row width " + std::to_string(width) +
                         " does not match pooling geometry");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> avg_pool2_forward(const PoolGeometry& g, const BasicTensor<T>& x) {
  check_pool(g, x.row_width(), "avg_pool2");
  std::size_t n = x.dim(0), oh = g.height / 2, ow = g.width / 2;
  BasicTensor<T> y({n, g.out_features()});
  for (std::size_t s = 0; s < n; ++s) {
    auto in = x.row(s);
    auto out = y.row(s);
    for (std::size_t c = 0; c < g.channels; ++c) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          std::size_t base = c * g.height * g.width + 2 * i * g.width + 2 * j;
          T acc = in[base] + in[base + 1] + in[base + g.width] + in[base + g.width + 1];
          out[c * oh * ow + i * ow + j] = acc / T{4};
        }
      }
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> avg_pool2_backward(const PoolGeometry& g, const BasicTensor<T>& dy) {
  std::size_t n = dy.dim(0), oh = g.height / 2, ow = g.width / 2;
  if (dy.row_width() != g.out_features()) throw DimensionError("avg_pool2 backward: width");
  BasicTensor<T> dx({n, g.in_features()});
  for (std::size_t s = 0; s < n; ++s) {
    auto d = dy.row(s);
    auto out = dx.row(s);
    for (std::size_t c = 0; c < g.channels; ++c) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          T v = d[c * oh * ow + i * ow + j] / T{4};
          std::size_t base = c * g.height * g.width + 2 * i * g.width + 2 * j;
          out[base] = v;
          out[base + 1] = v;
          out[base + g.width] = v;
          out[base + g.width + 1] = v;
        }
      }
    }
  }
  return dx;
}

namespace {

template <typename T>
std::size_t argmax_window(std::span<const T> in, std::size_t base, std::size_t width) {
  std::size_t cand[4] = {base, base + 1, base + width, base + width + 1};
  std::size_t best = cand[0];
  for (std::size_t k = 1; k < 4; ++k) {
    if (in[cand[k]] > in[best]) best = cand[k];
  }
  return best;
}

}  // namespace

template <typename T>
BasicTensor<T> max_pool2_forward(const PoolGeometry& g, const BasicTensor<T>& x) {
  check_pool(g, x.row_width(), "max_pool2");
  std::size_t n = x.dim(0), oh = g.height / 2, ow = g.width / 2;
  BasicTensor<T> y({n, g.out_features()});
  for (std::size_t s = 0; s < n; ++s) {
    auto in = x.row(s);
    auto out = y.row(s);
    for (std::size_t c = 0; c < g.channels; ++c) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          std::size_t base = c * g.height * g.width + 2 * i * g.width + 2 * j;
          out[c * oh * ow + i * ow + j] = in[argmax_window(in, base, g.width)];
        }
      }
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> max_pool2_backward(const PoolGeometry& g, const BasicTensor<T>& x,
                                  const BasicTensor<T>& dy) {
  check_pool(g, x.row_width(), "max_pool2 backward");
  std::size_t n = x.dim(0), oh = g.height / 2, ow = g.width / 2;
  BasicTensor<T> dx({n, g.in_features()});
  for (std::size_t s = 0; s < n; ++s) {
    auto in = x.row(s);
    auto d = dy.row(s);
    auto out = dx.row(s);
    for (std::size_t c = 0; c < g.channels; ++c) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          std::size_t base = c * g.height * g.width + 2 * i * g.width + 2 * j;
          out[argmax_window(in, base, g.width)] += d[c * oh * ow + i * ow + j];
        }
      }
    }
  }
  return dx;
}

#define SNNADV_INSTANTIATE_LAYERS(T)                                                          \
  template struct DenseLayer<T>;                                                              \
  template struct Conv2dLayer<T>;                                                             \
  template void init_fan_in_uniform(LinearLayer<T>&, Rng&, double);                           \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> avg_pool2_forward(const PoolGeometry&, const BasicTensor<T>&);      \
  template BasicTensor<T> avg_pool2_backward(const PoolGeometry&, const BasicTensor<T>&);     \
  template BasicTensor<T> max_pool2_forward(const PoolGeometry&, const BasicTensor<T>&);      \
  template BasicTensor<T> max_pool2_backward(const PoolGeometry&, const BasicTensor<T>&,      \
                                             const BasicTensor<T>&);

SNNADV_INSTANTIATE_LAYERS(float)
SNNADV_INSTANTIATE_LAYERS(double)

}  // namespace snnadv
