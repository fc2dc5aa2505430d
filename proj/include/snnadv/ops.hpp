#pragma once

#include <functional>
#include <vector>

#include "snnadv/tensor.hpp"

namespace snnadv {

// Matrix products over rank-2 tensors. The _nt / _tn variants transpose the
// second / first operand without materializing it.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> matmul_tn(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, T b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, T b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, T b);
template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& a, T lo, T hi);
/// sign(0) == 0.
template <typename T>
BasicTensor<T> sign(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& a);

template <typename T>
double sum(const BasicTensor<T>& a);
template <typename T>
double max_abs(const BasicTensor<T>& a);
template <typename T>
bool all_finite(const BasicTensor<T>& a);
/// Throws NumericError naming `what` if any element is NaN or Inf.
template <typename T>
void require_finite(const BasicTensor<T>& a, const char* what);

/// Row-wise softmax of an [n, c] tensor, max-subtracted.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

/// Index of the largest entry in each row.
template <typename T>
std::vector<int> argmax_rows(const BasicTensor<T>& logits);

enum class Reduction { Mean, Sum };

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  BasicTensor<T> dlogits;
};

/// Cross entropy of softmax(logits) against integer labels.
/// With Reduction::Mean the loss and gradient are averaged over rows;
/// with Reduction::Sum each row's gradient is that sample's own gradient.
template <typename T>
LossAndGrad<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                     const std::vector<int>& labels,
                                     Reduction reduction = Reduction::Mean);

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h for every coordinate.
TensorD finite_difference_grad(const std::function<double(const TensorD&)>& f,
                               const TensorD& x, double h);

/// ||a - b||_2 / max(||a||_2, ||b||_2), zero when both vanish.
template <typename T, typename U>
double relative_error(const BasicTensor<T>& a, const BasicTensor<U>& b) {
  if (a.size() != b.size()) throw DimensionError("relative_error: size mismatch");
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double x = static_cast<double>(a[i]);
    double y = static_cast<double>(b[i]);
    diff += (x - y) * (x - y);
    na += x * x;
    nb += y * y;
  }
  double denom = std::max(na, nb);
  if (denom == 0) return 0.0;
  return std::sqrt(diff / denom);
}

}  // namespace snnadv
