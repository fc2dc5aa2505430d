#pragma once

#include "snnadv/attention.hpp"

namespace snnadv {

/// Head average of (0.5 W + 0.5 I) for one layer of one sample.
/// `heads[h]` is [batch, n, n]; returns [n, n].
template <typename T>
BasicTensor<T> mix_heads(const std::vector<BasicTensor<T>>& heads, std::size_t sample);

/// Rollout R = A_L ... A_2 A_1 of the head-mixed layer matrices, [n, n].
template <typename T>
BasicTensor<T> rollout_matrix(const AttentionRecords<T>& records, std::size_t sample);

/// Per-pixel saliency times the input: the class-token row of the rollout over
/// patch tokens, scaled so its peak is 1 (uniform when the row has no mass on
/// patches), spread over each patch's pixels and all channels, then
/// multiplied elementwise with x. Returns a tensor shaped like x.
template <typename T>
BasicTensor<T> attention_rollout(const AttentionRecords<T>& records, const AttentionConfig& cfg,
                                 const BasicTensor<T>& x);

/// All-ones tensor shaped like x; the mask used for non-attention models.
template <typename T>
BasicTensor<T> ones_mask(const BasicTensor<T>& x) {
  return BasicTensor<T>(x.shape(), T{1});
}

}  // namespace snnadv
