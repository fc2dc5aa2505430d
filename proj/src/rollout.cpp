#include "snnadv/rollout.hpp"

#include <algorithm>

#include "snnadv/ops.hpp"

namespace snnadv {

template <typename T>
BasicTensor<T> mix_heads(const std::vector<BasicTensor<T>>& heads, std::size_t sample) {
  if (heads.empty()) throw DimensionError("mix_heads: no heads recorded");
  const std::size_t n = heads[0].dim(1);
  BasicTensor<T> mixed({n, n});
  const T w = static_cast<T>(0.5 / static_cast<double>(heads.size()));
  for (const auto& h : heads) {
    if (h.rank() != 3 || h.dim(1) != n || h.dim(2) != n || sample >= h.dim(0)) {
      throw DimensionError("mix_heads: inconsistent attention record " + shape_string(h.shape()));
    }
    const T* src = &h[sample * n * n];
    for (std::size_t i = 0; i < n * n; ++i) mixed[i] += w * src[i];
  }
  for (std::size_t i = 0; i < n; ++i) mixed.at(i, i) += T{0.5};
  return mixed;
}

template <typename T>
BasicTensor<T> rollout_matrix(const AttentionRecords<T>& records, std::size_t sample) {
  if (records.empty()) throw DimensionError("rollout: no attention layers recorded");
  BasicTensor<T> r = mix_heads(records[0], sample);
  for (std::size_t l = 1; l < records.size(); ++l) {
    BasicTensor<T> a = mix_heads(records[l], sample);
    if (a.shape() != r.shape()) throw DimensionError("rollout: token count changes across layers");
    r = matmul(a, r);
  }
  return r;
}

template <typename T>
BasicTensor<T> attention_rollout(const AttentionRecords<T>& records, const AttentionConfig& cfg,
                                 const BasicTensor<T>& x) {
  const std::size_t batch = x.dim(0), np = cfg.patches(), p = cfg.patch, gw = cfg.grid_w();
  if (x.row_width() != cfg.input_size()) throw DimensionError("attention_rollout: input width");
  BasicTensor<T> phi(x.shape());
  std::vector<T> weights(np);
  for (std::size_t b = 0; b < batch; ++b) {
    BasicTensor<T> r = rollout_matrix(records, b);
    if (r.dim(0) != cfg.tokens()) {
      throw DimensionError("attention_rollout: records have " + std::to_string(r.dim(0)) +
                           " tokens, config expects " + std::to_string(cfg.tokens()));
    }
    T peak = 0;
    for (std::size_t i = 0; i < np; ++i) {
      weights[i] = r.at(0, i + 1);
      peak = std::max(peak, weights[i]);
    }
    if (peak > T{0}) {
      for (auto& w : weights) w /= peak;
    } else {
      std::fill(weights.begin(), weights.end(), T{1});
    }
    auto in = x.row(b);
    auto out = phi.row(b);
    for (std::size_t c = 0; c < cfg.channels; ++c) {
      for (std::size_t y = 0; y < cfg.height; ++y) {
        for (std::size_t xx = 0; xx < cfg.width; ++xx) {
          std::size_t idx = c * cfg.height * cfg.width + y * cfg.width + xx;
          out[idx] = weights[(y / p) * gw + xx / p] * in[idx];
        }
      }
    }
  }
  return phi;
}

template BasicTensor<float> mix_heads(const std::vector<BasicTensor<float>>&, std::size_t);
template BasicTensor<double> mix_heads(const std::vector<BasicTensor<double>>&, std::size_t);
template BasicTensor<float> rollout_matrix(const AttentionRecords<float>&, std::size_t);
template BasicTensor<double> rollout_matrix(const AttentionRecords<double>&, std::size_t);
template BasicTensor<float> attention_rollout(const AttentionRecords<float>&,
                                              const AttentionConfig&, const BasicTensor<float>&);
template BasicTensor<double> attention_rollout(const AttentionRecords<double>&,
                                               const AttentionConfig&, const BasicTensor<double>&);

}  // namespace snnadv
