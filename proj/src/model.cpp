#include "snnadv/model.hpp"

#include "snnadv/ops.hpp"
#include "snnadv/rollout.hpp"

namespace snnadv {

using nlohmann::json;

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Ann: return "ann";
    case ModelKind::Spiking: return "snn";
    case ModelKind::Attention: return "attention";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "ann") return ModelKind::Ann;
  if (name == "snn") return ModelKind::Spiking;
  if (name == "attention") return ModelKind::Attention;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

Tensor Model::saliency(const ForwardPass&, const Tensor& x) const { return ones_mask(x); }

std::vector<int> Model::predict(const Tensor& x) const { return argmax_rows(logits(x)); }

// ---- json helpers ----

json to_json(const SurrogateSpec& s) {
  return {{"kind", surrogate_name(s.kind)},
          {"threshold", s.threshold},
          {"sigma", s.sigma},
          {"alpha", s.alpha},
          {"beta", s.beta},
          {"literal_piecewise_exp", s.literal_piecewise_exp},
          {"conventional_fast_sigmoid", s.conventional_fast_sigmoid}};
}

SurrogateSpec surrogate_from_json(const json& j) {
  SurrogateSpec s;
  s.kind = parse_surrogate_kind(j.at("kind").get<std::string>());
  s.threshold = j.at("threshold").get<double>();
  s.sigma = j.at("sigma").get<double>();
  s.alpha = j.at("alpha").get<double>();
  s.beta = j.at("beta").get<double>();
  s.literal_piecewise_exp = j.value("literal_piecewise_exp", false);
  s.conventional_fast_sigmoid = j.value("conventional_fast_sigmoid", false);
  s.validate();
  return s;
}

json to_json(const NeuronConfig& c) {
  json j = {{"leak", c.leak},
            {"threshold", c.threshold},
            {"reset", c.reset == ResetMode::HardZero ? "hard" : "soft"}};
  j["adaptation"] = c.adaptation_decay ? json(*c.adaptation_decay) : json(nullptr);
  return j;
}

NeuronConfig neuron_from_json(const json& j) {
  NeuronConfig c;
  c.leak = j.at("leak").get<double>();
  c.threshold = j.at("threshold").get<double>();
  std::string reset = j.at("reset").get<std::string>();
  if (reset == "hard") {
    c.reset = ResetMode::HardZero;
  } else if (reset == "soft") {
    c.reset = ResetMode::SoftSubtract;
  } else {
    throw FormatError("unknown reset mode '" + reset + "'");
  }
  if (j.contains("adaptation") && !j.at("adaptation").is_null()) {
    c.adaptation_decay = j.at("adaptation").get<double>();
  }
  c.validate();
  return c;
}

json to_json(const SynapseConfig& c) { return {{"feedback", c.feedback}, {"feedforward", c.feedforward}}; }

SynapseConfig synapse_from_json(const json& j) {
  SynapseConfig c;
  c.feedback = j.at("feedback").get<std::vector<double>>();
  c.feedforward = j.at("feedforward").get<std::vector<double>>();
  c.validate();
  return c;
}

json to_json(const AttentionConfig& c) {
  return {{"channels", c.channels}, {"height", c.height},   {"width", c.width},
          {"patch", c.patch},       {"embed", c.embed},     {"depth", c.depth},
          {"heads", c.heads},       {"mlp_hidden", c.mlp_hidden}, {"classes", c.classes}};
}

AttentionConfig attention_config_from_json(const json& j) {
  AttentionConfig c;
  c.channels = j.at("channels");
  c.height = j.at("height");
  c.width = j.at("width");
  c.patch = j.at("patch");
  c.embed = j.at("embed");
  c.depth = j.at("depth");
  c.heads = j.at("heads");
  c.mlp_hidden = j.at("mlp_hidden");
  c.classes = j.at("classes");
  c.validate();
  return c;
}

namespace {

json linear_to_json(const LinearLayer<float>& layer) {
  if (const auto* d = std::get_if<DenseLayer<float>>(&layer)) {
    return {{"type", "dense"}, {"in", d->in_features()}, {"out", d->out_features()}};
  }
  const auto& c = std::get<Conv2dLayer<float>>(layer);
  return {{"type", "conv3x3"},
          {"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"height", c.height},
          {"width", c.width}};
}

LinearLayer<float> linear_from_json(const json& j) {
  std::string type = j.at("type");
  if (type == "dense") return DenseLayer<float>(j.at("in"), j.at("out"));
  if (type == "conv3x3") {
    return Conv2dLayer<float>(j.at("in_channels"), j.at("out_channels"), j.at("height"),
                              j.at("width"));
  }
  throw FormatError("unknown linear layer type '" + type + "'");
}

json pool_to_json(const char* type, const PoolGeometry& g) {
  return {{"type", type}, {"channels", g.channels}, {"height", g.height}, {"width", g.width}};
}

PoolGeometry pool_from_json(const json& j) {
  return {j.at("channels").get<std::size_t>(), j.at("height").get<std::size_t>(),
          j.at("width").get<std::size_t>()};
}

}  // namespace

// ---- ANN ----

namespace {

class AnnPass final : public ForwardPass {
 public:
  AnnPass(const AnnModel& model, AnnTrace<float> trace) : model_(model), trace_(std::move(trace)) {}
  const Tensor& logits() const override { return trace_.logits; }
  BackwardResult backward(const Tensor& dlogits, bool want) const override {
    auto g = ann_backward(model_.net(), trace_, dlogits, want);
    BackwardResult r{std::move(g.dinput), {}};
    if (want) {
      for (std::size_t i = 0; i < model_.net().layers.size(); ++i) {
        if (!g.dweight[i].empty()) {
          r.dparams.push_back(std::move(g.dweight[i]));
          r.dparams.push_back(std::move(g.dbias[i]));
        }
      }
    }
    return r;
  }

 private:
  const AnnModel& model_;
  AnnTrace<float> trace_;
};

}  // namespace

AnnModel::AnnModel(AnnNet<float> net) : net_(std::move(net)) {
  net_.validate();
  set_name("ann");
}

std::unique_ptr<ForwardPass> AnnModel::forward(const Tensor& x) const {
  return std::make_unique<AnnPass>(*this, ann_forward(net_, x));
}

namespace {

template <typename Net, typename Out>
Out ann_params(Net& net) {
  Out out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, DenseLayer<float>> ||
                        std::is_same_v<L, Conv2dLayer<float>>) {
            out.emplace_back("layer" + std::to_string(i) + ".weight", &l.weight);
            out.emplace_back("layer" + std::to_string(i) + ".bias", &l.bias);
          }
        },
        net.layers[i]);
  }
  return out;
}

}  // namespace

NamedParams AnnModel::parameters() { return ann_params<AnnNet<float>, NamedParams>(net_); }
ConstNamedParams AnnModel::parameters() const {
  return ann_params<const AnnNet<float>, ConstNamedParams>(net_);
}

json AnnModel::architecture() const {
  json layers = json::array();
  for (const auto& layer : net_.layers) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, DenseLayer<float>> ||
                        std::is_same_v<L, Conv2dLayer<float>>) {
            layers.push_back(linear_to_json(LinearLayer<float>(l)));
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            layers.push_back({{"type", "relu"}});
          } else if constexpr (std::is_same_v<L, FlattenLayer>) {
            layers.push_back({{"type", "flatten"}});
          } else if constexpr (std::is_same_v<L, AvgPoolLayer>) {
            layers.push_back(pool_to_json("avgpool2", l.geometry));
          } else {
            layers.push_back(pool_to_json("maxpool2", l.geometry));
          }
        },
        layer);
  }
  return {{"input_shape", net_.input_shape}, {"layers", layers}};
}

// ---- SNN ----

namespace {

class SpikingPass final : public ForwardPass {
 public:
  SpikingPass(const SpikingModel& model, SnnForwardResult<float> result)
      : model_(model), result_(std::move(result)) {}
  const Tensor& logits() const override { return result_.logits; }
  BackwardResult backward(const Tensor& dlogits, bool want) const override {
    auto g = snn_backward(model_.net(), result_.trace, dlogits, model_.net().surrogate, want);
    BackwardResult r{std::move(g.dinput), {}};
    if (want) {
      for (std::size_t i = 0; i < g.dweight.size(); ++i) {
        r.dparams.push_back(std::move(g.dweight[i]));
        r.dparams.push_back(std::move(g.dbias[i]));
      }
    }
    return r;
  }

 private:
  const SpikingModel& model_;
  SnnForwardResult<float> result_;
};

}  // namespace

SpikingModel::SpikingModel(SpikingNet<float> net) : net_(std::move(net)) {
  net_.validate();
  set_name("snn");
}

std::unique_ptr<ForwardPass> SpikingModel::forward(const Tensor& x) const {
  return std::make_unique<SpikingPass>(*this, snn_forward(net_, x));
}

NamedParams SpikingModel::parameters() {
  NamedParams out;
  for (std::size_t i = 0; i < net_.layers.size(); ++i) {
    out.emplace_back("layer" + std::to_string(i) + ".weight", &layer_weight(net_.layers[i].op));
    out.emplace_back("layer" + std::to_string(i) + ".bias", &layer_bias(net_.layers[i].op));
  }
  return out;
}

ConstNamedParams SpikingModel::parameters() const {
  ConstNamedParams out;
  for (std::size_t i = 0; i < net_.layers.size(); ++i) {
    out.emplace_back("layer" + std::to_string(i) + ".weight", &layer_weight(net_.layers[i].op));
    out.emplace_back("layer" + std::to_string(i) + ".bias", &layer_bias(net_.layers[i].op));
  }
  return out;
}

json SpikingModel::architecture() const {
  json layers = json::array();
  for (const auto& l : net_.layers) {
    layers.push_back(
        {{"op", linear_to_json(l.op)}, {"neuron", to_json(l.neuron)}, {"synapse", to_json(l.synapse)}});
  }
  return {{"input_shape", net_.input_shape},
          {"timesteps", net_.timesteps},
          {"readout", net_.readout == Readout::Integrator ? "integrator" : "spike_count"},
          {"output_leak", net_.output_leak},
          {"detach_reset", net_.detach_reset},
          {"surrogate", to_json(net_.surrogate)},
          {"layers", layers}};
}

// ---- attention ----

namespace {

class AttentionPass final : public ForwardPass {
 public:
  AttentionPass(const AttentionModel& model, AttentionTrace<float> trace)
      : model_(model), trace_(std::move(trace)), records_(attention_records(trace_)) {}
  const Tensor& logits() const override { return trace_.logits; }
  BackwardResult backward(const Tensor& dlogits, bool want) const override {
    auto g = attention_backward(model_.net(), trace_, dlogits);
    BackwardResult r{std::move(g.dinput), {}};
    if (want) {
      for (auto& [name, t] : g.dparams.named_parameters()) r.dparams.push_back(std::move(*t));
    }
    return r;
  }
  const AttentionRecords<float>* attention() const override { return &records_; }

 private:
  const AttentionModel& model_;
  AttentionTrace<float> trace_;
  AttentionRecords<float> records_;
};

}  // namespace

AttentionModel::AttentionModel(TinyAttentionNet<float> net) : net_(std::move(net)) {
  net_.config.validate();
  set_name("attention");
}

Shape AttentionModel::input_shape() const {
  return {net_.config.channels, net_.config.height, net_.config.width};
}

std::unique_ptr<ForwardPass> AttentionModel::forward(const Tensor& x) const {
  return std::make_unique<AttentionPass>(*this, attention_forward(net_, x));
}

json AttentionModel::architecture() const { return {{"config", to_json(net_.config)}}; }

Tensor AttentionModel::saliency(const ForwardPass& pass, const Tensor& x) const {
  const auto* records = pass.attention();
  if (!records) throw StateError("attention saliency needs a pass with recorded attention");
  return attention_rollout(*records, net_.config, x);
}

// ---- factory ----

std::unique_ptr<Model> model_from_architecture(ModelKind kind, const json& arch) {
  switch (kind) {
    case ModelKind::Ann: {
      AnnNet<float> net;
      net.input_shape = arch.at("input_shape").get<Shape>();
      for (const auto& l : arch.at("layers")) {
        std::string type = l.at("type");
        if (type == "dense") {
          net.layers.push_back(std::get<DenseLayer<float>>(linear_from_json(l)));
        } else if (type == "conv3x3") {
          net.layers.push_back(std::get<Conv2dLayer<float>>(linear_from_json(l)));
        } else if (type == "relu") {
          net.layers.push_back(ReluLayer{});
        } else if (type == "flatten") {
          net.layers.push_back(FlattenLayer{});
        } else if (type == "avgpool2") {
          net.layers.push_back(AvgPoolLayer{pool_from_json(l)});
        } else if (type == "maxpool2") {
          net.layers.push_back(MaxPoolLayer{pool_from_json(l)});
        } else {
          throw FormatError("unknown ann layer type '" + type + "'");
        }
      }
      return std::make_unique<AnnModel>(std::move(net));
    }
    case ModelKind::Spiking: {
      SpikingNet<float> net;
      net.input_shape = arch.at("input_shape").get<Shape>();
      net.timesteps = arch.at("timesteps");
      std::string readout = arch.at("readout");
      if (readout == "integrator") {
        net.readout = Readout::Integrator;
      } else if (readout == "spike_count") {
        net.readout = Readout::SpikeCount;
      } else {
        throw FormatError("unknown readout '" + readout + "'");
      }
      net.output_leak = arch.at("output_leak");
      net.detach_reset = arch.value("detach_reset", false);
      net.surrogate = surrogate_from_json(arch.at("surrogate"));
      for (const auto& l : arch.at("layers")) {
        net.layers.push_back({linear_from_json(l.at("op")), neuron_from_json(l.at("neuron")),
                              synapse_from_json(l.at("synapse"))});
      }
      return std::make_unique<SpikingModel>(std::move(net));
    }
    case ModelKind::Attention:
      return std::make_unique<AttentionModel>(
          TinyAttentionNet<float>::zeros(attention_config_from_json(arch.at("config"))));
  }
  throw FormatError("unknown model kind tag");
}

}  // namespace snnadv
