#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "snnadv/ann.hpp"
#include "snnadv/attention.hpp"
#include "snnadv/spiking_net.hpp"

namespace snnadv {

enum class ModelKind : std::uint32_t { Ann = 0, Spiking = 1, Attention = 2 };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct BackwardResult {
  Tensor dinput;
  std::vector<Tensor> dparams;  // same order as Model::parameters()
};

/// One recorded forward evaluation; backward may be called any number of
/// times with different output gradients.
class ForwardPass {
 public:
  virtual ~ForwardPass() = default;
  virtual const Tensor& logits() const = 0;
  virtual BackwardResult backward(const Tensor& dlogits, bool want_param_grads = false) const = 0;
  virtual const AttentionRecords<float>* attention() const { return nullptr; }
};

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;
using ConstNamedParams = std::vector<std::pair<std::string, const Tensor*>>;

/// Classifier with a differentiable (or surrogate-differentiable) forward.
/// Inputs are batches [n, features] with features laid out as input_shape().
class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  virtual Shape input_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::unique_ptr<ForwardPass> forward(const Tensor& x) const = 0;
  virtual NamedParams parameters() = 0;
  virtual ConstNamedParams parameters() const = 0;
  virtual nlohmann::json architecture() const = 0;
  virtual std::unique_ptr<Model> clone() const = 0;

  /// Multiplicative gradient mask phi used by multi-model attacks: the
  /// attention rollout for attention models, ones elsewhere.
  virtual Tensor saliency(const ForwardPass& pass, const Tensor& x) const;

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  Tensor logits(const Tensor& x) const { return forward(x)->logits(); }
  std::vector<int> predict(const Tensor& x) const;

 private:
  std::string name_ = "model";
};

class AnnModel final : public Model {
 public:
  explicit AnnModel(AnnNet<float> net);
  ModelKind kind() const override { return ModelKind::Ann; }
  Shape input_shape() const override { return net_.input_shape; }
  std::size_t num_classes() const override { return net_.num_classes(); }
  std::unique_ptr<ForwardPass> forward(const Tensor& x) const override;
  NamedParams parameters() override;
  ConstNamedParams parameters() const override;
  nlohmann::json architecture() const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<AnnModel>(*this); }

  const AnnNet<float>& net() const { return net_; }
  AnnNet<float>& net() { return net_; }

 private:
  AnnNet<float> net_;
};

class SpikingModel final : public Model {
 public:
  explicit SpikingModel(SpikingNet<float> net);
  ModelKind kind() const override { return ModelKind::Spiking; }
  Shape input_shape() const override { return net_.input_shape; }
  std::size_t num_classes() const override { return net_.num_classes(); }
  std::unique_ptr<ForwardPass> forward(const Tensor& x) const override;
  NamedParams parameters() override;
  ConstNamedParams parameters() const override;
  nlohmann::json architecture() const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<SpikingModel>(*this); }

  /// Swaps the backward kernel; the forward pass is unaffected.
  void set_surrogate(const SurrogateSpec& spec) {
    spec.validate();
    net_.surrogate = spec;
  }
  const SpikingNet<float>& net() const { return net_; }
  SpikingNet<float>& net() { return net_; }

 private:
  SpikingNet<float> net_;
};

class AttentionModel final : public Model {
 public:
  explicit AttentionModel(TinyAttentionNet<float> net);
  ModelKind kind() const override { return ModelKind::Attention; }
  Shape input_shape() const override;
  std::size_t num_classes() const override { return net_.config.classes; }
  std::unique_ptr<ForwardPass> forward(const Tensor& x) const override;
  NamedParams parameters() override { return net_.named_parameters(); }
  ConstNamedParams parameters() const override { return net_.named_parameters(); }
  nlohmann::json architecture() const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<AttentionModel>(*this); }
  Tensor saliency(const ForwardPass& pass, const Tensor& x) const override;

  const TinyAttentionNet<float>& net() const { return net_; }
  TinyAttentionNet<float>& net() { return net_; }

 private:
  TinyAttentionNet<float> net_;
};

/// Rebuilds a zero-weight model from kind + architecture() output.
std::unique_ptr<Model> model_from_architecture(ModelKind kind, const nlohmann::json& arch);

nlohmann::json to_json(const SurrogateSpec& spec);
SurrogateSpec surrogate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NeuronConfig& cfg);
NeuronConfig neuron_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynapseConfig& cfg);
SynapseConfig synapse_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AttentionConfig& cfg);
AttentionConfig attention_config_from_json(const nlohmann::json& j);

}  // namespace snnadv
