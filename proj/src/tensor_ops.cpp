#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "snnadv/ops.hpp"

namespace snnadv {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMat<T>> as_matrix(const BasicTensor<T>& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.dim(0)),
          static_cast<Eigen::Index>(t.dim(1))};
}

template <typename T>
Eigen::Map<RowMat<T>> as_matrix(BasicTensor<T>& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.dim(0)),
          static_cast<Eigen::Index>(t.dim(1))};
}

template <typename T>
void require_rank2(const BasicTensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 operand, got " +
                         shape_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

template <typename T, typename F>
BasicTensor<T> map_binary(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op, F f) {
  require_same_shape(a, b, op);
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  require_finite(out, op);
  return out;
}

template <typename T, typename F>
BasicTensor<T> map_unary(const BasicTensor<T>& a, const char* op, F f) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  require_finite(out, op);
  return out;
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner extents differ " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  BasicTensor<T> out({a.dim(0), b.dim(1)});
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
  require_finite(out, "matmul");
  return out;
}

template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_nt: inner extents differ " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  }
  BasicTensor<T> out({a.dim(0), b.dim(0)});
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b).transpose();
  require_finite(out, "matmul_nt");
  return out;
}

template <typename T>
BasicTensor<T> matmul_tn(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank2(a, "matmul_tn");
  require_rank2(b, "matmul_tn");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("matmul_tn: inner extents differ " + shape_string(a.shape()) + "^T x " +
                         shape_string(b.shape()));
  }
  BasicTensor<T> out({a.dim(1), b.dim(1)});
  as_matrix(out).noalias() = as_matrix(a).transpose() * as_matrix(b);
  require_finite(out, "matmul_tn");
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return map_binary(a, b, "add", [](T x, T y) { return x + y; });
}
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, T b) {
  return map_unary(a, "add", [b](T x) { return x + b; });
}
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return map_binary(a, b, "sub", [](T x, T y) { return x - y; });
}
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, T b) {
  return map_unary(a, "sub", [b](T x) { return x - b; });
}
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return map_binary(a, b, "mul", [](T x, T y) { return x * y; });
}
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, T b) {
  return map_unary(a, "mul", [b](T x) { return x * b; });
}
template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& a, T lo, T hi) {
  if (!(lo <= hi)) throw ConfigError("clamp: lo > hi");
  return map_unary(a, "clamp", [lo, hi](T x) { return std::clamp(x, lo, hi); });
}
template <typename T>
BasicTensor<T> sign(const BasicTensor<T>& a) {
  return map_unary(a, "sign", [](T x) { return static_cast<T>((x > T{0}) - (x < T{0})); });
}
template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& a) {
  return map_unary(a, "abs", [](T x) { return std::abs(x); });
}

template <typename T>
double sum(const BasicTensor<T>& a) {
  double s = 0;
  for (T v : a.data()) s += static_cast<double>(v);
  return s;
}

template <typename T>
double max_abs(const BasicTensor<T>& a) {
  double m = 0;
  for (T v : a.data()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

template <typename T>
bool all_finite(const BasicTensor<T>& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void require_finite(const BasicTensor<T>& a, const char* what) {
  if (!all_finite(a)) throw NumericError(std::string(what) + ": non-finite value");
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  require_rank2(logits, "softmax");
  BasicTensor<T> out(logits.shape());
  std::size_t c = logits.dim(1);
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    T m = *std::max_element(in.begin(), in.end());
    double z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(static_cast<double>(in[j] - m));
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = static_cast<T>(std::exp(static_cast<double>(in[j] - m)) / z);
    }
  }
  require_finite(out, "softmax");
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const BasicTensor<T>& logits) {
  require_rank2(logits, "argmax_rows");
  std::vector<int> out(logits.dim(0));
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

template <typename T>
LossAndGrad<T> softmax_cross_entropy(const BasicTensor<T>& logits, const std::vector<int>& labels,
                                     Reduction reduction) {
  require_rank2(logits, "softmax_cross_entropy");
  require_finite(logits, "softmax_cross_entropy");
  std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  }
  LossAndGrad<T> result{0.0, BasicTensor<T>(logits.shape())};
  double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(n) : 1.0;
  for (std::size_t r = 0; r < n; ++r) {
    int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw IndexError("softmax_cross_entropy: label " + std::to_string(label) +
                       " outside [0, " + std::to_string(c) + ")");
    }
    auto in = logits.row(r);
    auto g = result.dlogits.row(r);
    double m = static_cast<double>(*std::max_element(in.begin(), in.end()));
    double z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(static_cast<double>(in[j]) - m);
    double log_z = std::log(z) + m;
    result.loss += (log_z - static_cast<double>(in[label])) * scale;
    for (std::size_t j = 0; j < c; ++j) {
      double p = std::exp(static_cast<double>(in[j]) - log_z);
      g[j] = static_cast<T>((p - (static_cast<int>(j) == label ? 1.0 : 0.0)) * scale);
    }
  }
  return result;
}

TensorD finite_difference_grad(const std::function<double(const TensorD&)>& f, const TensorD& x,
                               double h) {
  if (!(h > 0)) throw ConfigError("finite_difference_grad: step must be positive");
  TensorD probe = x;
  TensorD grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = probe[i];
    probe[i] = orig + h;
    double up = f(probe);
    probe[i] = orig - h;
    double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_difference_grad: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

#define SNNADV_INSTANTIATE_OPS(T)                                                           \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);             \
  template BasicTensor<T> matmul_nt(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> matmul_tn(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> add(const BasicTensor<T>&, T);                                    \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> sub(const BasicTensor<T>&, T);                                    \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> mul(const BasicTensor<T>&, T);                                    \
  template BasicTensor<T> clamp(const BasicTensor<T>&, T, T);                               \
  template BasicTensor<T> sign(const BasicTensor<T>&);                                      \
  template BasicTensor<T> abs(const BasicTensor<T>&);                                       \
  template double sum(const BasicTensor<T>&);                                               \
  template double max_abs(const BasicTensor<T>&);                                           \
  template bool all_finite(const BasicTensor<T>&);                                          \
  template void require_finite(const BasicTensor<T>&, const char*);                         \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                   \
  template std::vector<int> argmax_rows(const BasicTensor<T>&);                             \
  template LossAndGrad<T> softmax_cross_entropy(const BasicTensor<T>&, const std::vector<int>&, \
                                                Reduction);

SNNADV_INSTANTIATE_OPS(float)
SNNADV_INSTANTIATE_OPS(double)

}  // namespace snnadv
