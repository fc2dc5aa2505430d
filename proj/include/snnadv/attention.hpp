#pragma once

#include <string>
#include <utility>
#include <vector>

#include "snnadv/layers.hpp"

namespace snnadv {

/// Geometry of the patch-token attention classifier.
struct AttentionConfig {
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;
  std::size_t patch = 4;
  std::size_t embed = 32;
  std::size_t depth = 2;
  std::size_t heads = 2;
  std::size_t mlp_hidden = 64;
  std::size_t classes = 10;

  std::size_t grid_h() const { return height / patch; }
  std::size_t grid_w() const { return width / patch; }
  std::size_t patches() const { return grid_h() * grid_w(); }
  /// Patch tokens plus the leading class token.
  std::size_t tokens() const { return patches() + 1; }
  std::size_t patch_dim() const { return channels * patch * patch; }
  std::size_t head_dim() const { return embed / heads; }
  std::size_t input_size() const { return channels * height * width; }
  /// Throws ConfigError when the image does not split into whole patches or
  /// the embedding does not split across heads.
  void validate() const;
  bool operator==(const AttentionConfig&) const = default;
};

/// Pre-norm transformer block: h += MHA(LN(h)); h += MLP(LN(h)).
template <typename T>
struct AttentionBlock {
  BasicTensor<T> ln1_gamma, ln1_beta;
  DenseLayer<T> qkv;   // [3E, E]: queries, keys, values stacked
  DenseLayer<T> proj;  // [E, E]
  BasicTensor<T> ln2_gamma, ln2_beta;
  DenseLayer<T> fc1;   // [M, E]
  DenseLayer<T> fc2;   // [E, M]
};

/// Small vision-transformer-style classifier whose softmaxed attention
/// matrices are kept for rollout.
template <typename T>
struct TinyAttentionNet {
  AttentionConfig config;
  DenseLayer<T> patch_embed;
  BasicTensor<T> cls_token;  // [E]
  BasicTensor<T> pos_embed;  // [tokens, E]
  std::vector<AttentionBlock<T>> blocks;
  BasicTensor<T> lnf_gamma, lnf_beta;
  DenseLayer<T> head;

  /// Zero-initialized parameters of the right shapes.
  static TinyAttentionNet zeros(const AttentionConfig& cfg);

  std::vector<std::pair<std::string, BasicTensor<T>*>> named_parameters();
  std::vector<std::pair<std::string, const BasicTensor<T>*>> named_parameters() const;

  template <typename U>
  TinyAttentionNet<U> cast() const;
};

template <typename T>
struct LayerNormCache {
  BasicTensor<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
struct BlockCache {
  BasicTensor<T> input;
  LayerNormCache<T> ln1;
  BasicTensor<T> a;
  BasicTensor<T> qkv;
  std::vector<BasicTensor<T>> attention;  // per head, [batch, tokens, tokens]
  BasicTensor<T> ctx;
  BasicTensor<T> h1;
  LayerNormCache<T> ln2;
  BasicTensor<T> c;
  BasicTensor<T> pre;
  BasicTensor<T> f;
};

template <typename T>
struct AttentionTrace {
  std::size_t batch = 0;
  BasicTensor<T> patches;  // [batch * patches, patch_dim]
  std::vector<BlockCache<T>> blocks;
  LayerNormCache<T> lnf;
  BasicTensor<T> cls_norm;  // [batch, E]
  BasicTensor<T> logits;
};

/// Recorded attention weights: records[layer][head] is [batch, tokens, tokens],
/// each row a probability distribution.
template <typename T>
using AttentionRecords = std::vector<std::vector<BasicTensor<T>>>;

template <typename T>
AttentionRecords<T> attention_records(const AttentionTrace<T>& trace);

template <typename T>
AttentionTrace<T> attention_forward(const TinyAttentionNet<T>& net, const BasicTensor<T>& x);

template <typename T>
struct AttentionGradients {
  BasicTensor<T> dinput;
  TinyAttentionNet<T> dparams;  // same layout as the network
};

template <typename T>
AttentionGradients<T> attention_backward(const TinyAttentionNet<T>& net,
                                         const AttentionTrace<T>& trace,
                                         const BasicTensor<T>& dlogits);

TinyAttentionNet<float> make_attention_net(const AttentionConfig& cfg, Rng& rng);

template <typename T>
template <typename U>
TinyAttentionNet<U> TinyAttentionNet<T>::cast() const {
  auto out = TinyAttentionNet<U>::zeros(config);
  auto src = named_parameters();
  auto dst = out.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
  return out;
}

}  // namespace snnadv
