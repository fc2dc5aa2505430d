#pragma once
// Independent reference computations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "snnadv/ann.hpp"
#include "snnadv/attacks.hpp"
#include "snnadv/attention.hpp"
#include "snnadv/model.hpp"
#include "snnadv/ops.hpp"
#include "snnadv/random.hpp"
#include "snnadv/rollout.hpp"
#include "snnadv/spiking_net.hpp"

#ifndef SNNADV_TEST_DATA_DIR
#define SNNADV_TEST_DATA_DIR "data"
#endif

namespace snnadv::oracle {

inline std::string data_path(const std::string& name) {
  return std::string(SNNADV_TEST_DATA_DIR) + "/" + name;
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<float>(uniform(rng, lo, hi));
  return t;
}

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <typename T>
void append(std::vector<double>& out, const BasicTensor<T>& t) {
  for (auto v : t.values()) out.push_back(static_cast<double>(v));
}

inline TensorD as_tensor(const std::vector<double>& v) {
  if (v.empty()) return TensorD({1});
  return TensorD({v.size()}, v);
}

/// Central differences of f with respect to each pointed-to coordinate.
inline std::vector<double> fd_coords(const std::vector<double*>& coords,
                                     const std::function<double()>& f, double h) {
  std::vector<double> out;
  out.reserve(coords.size());
  for (double* p : coords) {
    const double saved = *p;
    *p = saved + h;
    const double fp = f();
    *p = saved - h;
    const double fm = f();
    *p = saved;
    out.push_back((fp - fm) / (2 * h));
  }
  return out;
}

inline void add_coords(std::vector<double*>& coords, TensorD& t) {
  for (auto& v : t.data()) coords.push_back(&v);
}

struct GradCheck {
  double err64 = 0;  // 64-bit analytic vs 64-bit central differences
  double err32 = 0;  // 32-bit analytic vs the same differences
};

inline constexpr double kFdStep = 1e-6;

/// Random dense ReLU MLP (conv == false) or small conv net with pooling;
/// checks input and parameter gradients of sum(R * logits).
inline GradCheck ann_case(Rng& rng, bool conv) {
  AnnNet<float> net32;
  if (conv) {
    std::size_t c = 1 + uniform_index(rng, 2);
    net32 = make_cnn({c, 4, 4}, 2, 2, 3, rng, (rng() & 1) != 0);
  } else {
    std::size_t in = 2 + uniform_index(rng, 5);
    net32 = make_mlp({in}, {2 + uniform_index(rng, 5), 2 + uniform_index(rng, 4)},
                     2 + uniform_index(rng, 3), rng);
  }
  for (auto& layer : net32.layers) {
    if (auto* d = std::get_if<DenseLayer<float>>(&layer)) {
      for (auto& b : d->bias.data()) b = static_cast<float>(uniform(rng, -0.5, 0.5));
    } else if (auto* c = std::get_if<Conv2dLayer<float>>(&layer)) {
      for (auto& b : c->bias.data()) b = static_cast<float>(uniform(rng, -0.5, 0.5));
    }
  }
  const std::size_t batch = 1 + uniform_index(rng, 3);
  Tensor x32 = random_tensor({batch, shape_size(net32.input_shape)}, rng, 0, 1);
  Tensor r32 = random_tensor({batch, net32.num_classes()}, rng, -1, 1);

  AnnNet<double> net = net32.cast<double>();
  TensorD x = x32.cast<double>(), r = r32.cast<double>();

  std::vector<double> a64, a32;
  {
    auto g = ann_backward(net, ann_forward(net, x), r);
    append(a64, g.dinput);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      append(a64, g.dweight[i]);
      append(a64, g.dbias[i]);
    }
    auto g32 = ann_backward(net32, ann_forward(net32, x32), r32);
    append(a32, g32.dinput);
    for (std::size_t i = 0; i < net32.layers.size(); ++i) {
      append(a32, g32.dweight[i]);
      append(a32, g32.dbias[i]);
    }
  }
  std::vector<double*> coords;
  add_coords(coords, x);
  for (auto& layer : net.layers) {
    if (auto* d = std::get_if<DenseLayer<double>>(&layer)) {
      add_coords(coords, d->weight);
      add_coords(coords, d->bias);
    } else if (auto* c = std::get_if<Conv2dLayer<double>>(&layer)) {
      add_coords(coords, c->weight);
      add_coords(coords, c->bias);
    }
  }
  auto fd = fd_coords(coords, [&] { return dot(ann_forward(net, x).logits, r); }, kFdStep);
  return {relative_error(as_tensor(a64), as_tensor(fd)), relative_error(as_tensor(a32), as_tensor(fd))};
}

inline AttentionConfig tiny_attention_config(Rng& rng) {
  AttentionConfig cfg;
  cfg.channels = 1;
  cfg.height = 8;
  cfg.width = 8;
  cfg.patch = 4;
  cfg.embed = 4 * (1 + uniform_index(rng, 2));
  cfg.depth = 1 + uniform_index(rng, 2);
  cfg.heads = 1 + uniform_index(rng, 2);
  cfg.mlp_hidden = 6;
  cfg.classes = 3;
  return cfg;
}

inline GradCheck attention_case(Rng& rng) {
  auto cfg = tiny_attention_config(rng);
  auto net32 = make_attention_net(cfg, rng);
  for (auto& [name, p] : net32.named_parameters()) {
    for (auto& v : p->data()) v += static_cast<float>(uniform(rng, -0.2, 0.2));
  }
  const std::size_t batch = 1 + uniform_index(rng, 2);
  Tensor x32 = random_tensor({batch, cfg.input_size()}, rng, 0, 1);
  Tensor r32 = random_tensor({batch, cfg.classes}, rng, -1, 1);
  auto net = net32.cast<double>();
  TensorD x = x32.cast<double>(), r = r32.cast<double>();

  std::vector<double> a64, a32;
  auto g = attention_backward(net, attention_forward(net, x), r);
  append(a64, g.dinput);
  for (auto& [name, p] : std::as_const(g.dparams).named_parameters()) append(a64, *p);
  auto g32 = attention_backward(net32, attention_forward(net32, x32), r32);
  append(a32, g32.dinput);
  for (auto& [name, p] : std::as_const(g32.dparams).named_parameters()) append(a32, *p);

  std::vector<double*> coords;
  add_coords(coords, x);
  for (auto& [name, p] : net.named_parameters()) add_coords(coords, *p);
  auto fd = fd_coords(coords, [&] { return dot(attention_forward(net, x).logits, r); }, kFdStep);
  return {relative_error(as_tensor(a64), as_tensor(fd)), relative_error(as_tensor(a32), as_tensor(fd))};
}

/// Random spiking net in relaxed mode (spike step replaced by the kernel's
/// antiderivative), so its exact gradient is what BPTT computes.
inline SpikingNet<float> random_relaxed_snn(Rng& rng, SurrogateKind kind) {
  SpikingNet<float> net;
  const std::size_t in = 3 + uniform_index(rng, 3);
  net.input_shape = {in};
  net.timesteps = 2 + static_cast<int>(uniform_index(rng, 4));
  net.readout = (rng() & 1) ? Readout::SpikeCount : Readout::Integrator;
  net.output_leak = uniform(rng, 0.5, 1.0);
  const std::size_t hidden_layers = 1 + uniform_index(rng, 2);
  std::size_t width = in;
  for (std::size_t l = 0; l <= hidden_layers; ++l) {
    const bool last = l == hidden_layers;
    const std::size_t out = last ? 2 + uniform_index(rng, 2) : 2 + uniform_index(rng, 4);
    LinearLayer<float> op = DenseLayer<float>(width, out);
    init_fan_in_uniform(op, rng, 2.0);
    for (auto& b : layer_bias(op).data()) b = static_cast<float>(uniform(rng, -0.3, 0.5));
    NeuronConfig n;
    n.leak = uniform(rng, 0.5, 1.0);
    n.threshold = uniform(rng, 0.5, 1.5);
    switch (uniform_index(rng, 3)) {
      case 0: n.reset = ResetMode::HardZero; break;
      case 1: n.reset = ResetMode::SoftSubtract; break;
      default: n.adaptation_decay = uniform(rng, 0.0, 0.9);
    }
    SynapseConfig syn;
    if (rng() & 1) {
      syn.feedback = {uniform(rng, -0.5, 0.5)};
      syn.feedforward = {1.0, uniform(rng, -0.5, 0.5)};
    }
    net.layers.push_back({std::move(op), n, syn});
    width = out;
  }
  SurrogateSpec spec = SurrogateSpec::of(kind);
  net.surrogate = spec;
  net.relaxed = spec;
  return net;
}

/// Kernels whose antiderivative is continuously differentiable everywhere.
inline std::vector<SurrogateKind> smooth_relaxable_kinds() {
  return {SurrogateKind::Sigmoid,         SurrogateKind::Erfc,        SurrogateKind::Arctan,
          SurrogateKind::PiecewiseLinear, SurrogateKind::FastSigmoid, SurrogateKind::PiecewiseExp};
}

inline GradCheck bptt_case(Rng& rng, SurrogateKind kind) {
  auto net32 = random_relaxed_snn(rng, kind);
  const std::size_t batch = 1 + uniform_index(rng, 2);
  Tensor x32 = random_tensor({batch, shape_size(net32.input_shape)}, rng, 0, 1);
  Tensor r32 = random_tensor({batch, net32.num_classes()}, rng, -1, 1);
  auto net = net32.cast<double>();
  TensorD x = x32.cast<double>(), r = r32.cast<double>();

  std::vector<double> a64, a32;
  auto g = snn_backward(net, snn_forward(net, x).trace, r);
  append(a64, g.dinput);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    append(a64, g.dweight[i]);
    append(a64, g.dbias[i]);
  }
  auto g32 = snn_backward(net32, snn_forward(net32, x32).trace, r32);
  append(a32, g32.dinput);
  for (std::size_t i = 0; i < net32.layers.size(); ++i) {
    append(a32, g32.dweight[i]);
    append(a32, g32.dbias[i]);
  }
  std::vector<double*> coords;
  add_coords(coords, x);
  for (auto& l : net.layers) {
    add_coords(coords, layer_weight(l.op));
    add_coords(coords, layer_bias(l.op));
  }
  auto fd = fd_coords(coords, [&] { return dot(snn_forward(net, x).logits, r); }, kFdStep);
  return {relative_error(as_tensor(a64), as_tensor(fd)), relative_error(as_tensor(a32), as_tensor(fd))};
}

/// Grid checks for one kernel over n points spanning threshold +- half_width.
struct KernelGridResult {
  bool non_negative = true;
  bool symmetric = true;
  bool peak_at_threshold = true;
  double max_asymmetry = 0;
};

inline KernelGridResult kernel_grid(const SurrogateSpec& spec, std::size_t n = 10000,
                                    double half_width = 4.0) {
  KernelGridResult res;
  const double peak = surrogate_kernel(spec, spec.threshold);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = half_width * static_cast<double>(i) / static_cast<double>(n - 1);
    const double up = surrogate_kernel(spec, spec.threshold + d);
    const double down = surrogate_kernel(spec, spec.threshold - d);
    if (up < 0 || down < 0) res.non_negative = false;
    if (up > peak || down > peak) res.peak_at_threshold = false;
    const double asym = std::abs(up - down);
    res.max_asymmetry = std::max(res.max_asymmetry, asym);
    if (asym > 1e-12 * std::max(1.0, peak)) res.symmetric = false;
  }
  return res;
}

/// Iterative FGSM built from input_gradient and project only.
inline std::vector<Tensor> iterative_fgsm(const Model& model, const Tensor& x,
                                          const std::vector<int>& labels, double step, double eps,
                                          int steps) {
  std::vector<Tensor> iterates;
  Tensor cur = x;
  for (int i = 0; i < steps; ++i) {
    Tensor g = input_gradient(model, cur, labels);
    cur = project(add(cur, mul(sign(g), static_cast<float>(step))), x, eps);
    iterates.push_back(cur);
  }
  return iterates;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  return max_abs(sub(a, b));
}

inline double trace_diff(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_abs_diff(a[i], b[i]));
  return m;
}

/// Random row-stochastic [n, n] matrix.
inline TensorD random_stochastic(std::size_t n, Rng& rng) {
  TensorD m({n, n});
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < n; ++c) s += (m.at(r, c) = uniform01(rng) + 1e-3);
    for (std::size_t c = 0; c < n; ++c) m.at(r, c) /= s;
  }
  return m;
}

inline double max_row_sum_error(const TensorD& m) {
  double worst = 0;
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    double s = 0;
    for (std::size_t c = 0; c < m.dim(1); ++c) s += m.at(r, c);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

}  // namespace snnadv::oracle

namespace snnadv::oracle {

/// Model whose prediction is an arbitrary function of the input row; its
/// input gradient is zero.
class LookupModel final : public Model {
 public:
  using Rule = std::function<int(std::span<const float>)>;
  LookupModel(std::size_t features, std::size_t classes, Rule rule)
      : features_(features), classes_(classes), rule_(std::move(rule)) {}
  ModelKind kind() const override { return ModelKind::Ann; }
  Shape input_shape() const override { return {features_}; }
  std::size_t num_classes() const override { return classes_; }
  std::unique_ptr<ForwardPass> forward(const Tensor& x) const override {
    Tensor logits({x.dim(0), classes_});
    for (std::size_t r = 0; r < x.dim(0); ++r) {
      logits.at(r, static_cast<std::size_t>(rule_(x.row(r)))) = 10.0f;
    }
    return std::make_unique<Pass>(std::move(logits), x.shape());
  }
  NamedParams parameters() override { return {}; }
  ConstNamedParams parameters() const override { return {}; }
  nlohmann::json architecture() const override { return nlohmann::json::object(); }
  std::unique_ptr<Model> clone() const override { return std::make_unique<LookupModel>(*this); }

 private:
  class Pass final : public ForwardPass {
   public:
    Pass(Tensor logits, Shape input) : logits_(std::move(logits)), input_(std::move(input)) {}
    const Tensor& logits() const override { return logits_; }
    BackwardResult backward(const Tensor&, bool) const override { return {Tensor(input_), {}}; }

   private:
    Tensor logits_;
    Shape input_;
  };
  std::size_t features_, classes_;
  Rule rule_;
};

struct FuzzResult {
  int configs = 0;
  double max_excess = 0;      // max over runs of ||x_adv - x||_inf - eps
  bool in_range = true;       // every x_adv entry in [0, 1]
  bool alpha_simplex = true;  // Auto-SAGA coefficients >= 0 summing to 1
};

/// Random attack configurations over small conventional, spiking and
/// attention models sharing an 8x8 input.
inline FuzzResult projection_fuzz(int configs, std::uint64_t seed) {
  Rng rng(seed);
  AnnModel ann(make_mlp({1, 8, 8}, {8}, 3, rng));
  NeuronConfig n;
  n.leak = 0.9;
  SpikingModel snn(make_snn_mlp({1, 8, 8}, {8}, 3, n, 4, rng, 2.0));
  AttentionConfig ac;
  ac.height = 8;
  ac.width = 8;
  ac.embed = 8;
  ac.mlp_hidden = 8;
  ac.classes = 3;
  AttentionModel vit(make_attention_net(ac, rng));
  const std::vector<const Model*> zoo{&ann, &snn, &vit};

  FuzzResult res;
  for (int c = 0; c < configs; ++c) {
    const std::size_t batch = 1 + uniform_index(rng, 4);
    Tensor x = random_tensor({batch, 64}, rng, 0, 1);
    for (auto& v : x.data()) {
      double u = uniform01(rng);
      if (u < 0.1) v = 0.0f;
      else if (u < 0.2) v = 1.0f;
    }
    std::vector<int> labels(batch);
    for (auto& l : labels) l = static_cast<int>(uniform_index(rng, 3));
    AttackConfig cfg;
    cfg.eps = uniform(rng, 0.0, 0.5);
    cfg.eps_step = cfg.eps > 0 ? uniform(rng, 0.05, 1.0) * cfg.eps : 0.01;
    cfg.steps = 1 + static_cast<int>(uniform_index(rng, 4));
    cfg.momentum = uniform(rng, 0.0, 1.5);
    cfg.random_start = (rng() & 1) != 0;
    cfg.coef_lr = std::pow(10.0, uniform(rng, 0, 4));
    cfg.kappa = uniform(rng, 0, 0.5);
    cfg.seed = rng();
    const Model* m0 = zoo[uniform_index(rng, zoo.size())];
    const Model* m1 = zoo[uniform_index(rng, zoo.size())];
    Tensor adv;
    switch (uniform_index(rng, 5)) {
      case 0: adv = fgsm(*m0, x, labels, cfg.eps); break;
      case 1: adv = pgd(*m0, x, labels, cfg); break;
      case 2: adv = mim(*m0, x, labels, cfg); break;
      case 3: {
        double a = uniform01(rng);
        adv = saga({m0, m1}, {a, 1 - a}, x, labels, cfg);
        break;
      }
      default: {
        auto r = auto_saga({m0, m1}, x, labels, cfg);
        adv = r.x_adv;
        for (const auto& it : r.alpha_history) {
          for (const auto& row : it) {
            double s = 0;
            for (double a : row) {
              if (a < 0) res.alpha_simplex = false;
              s += a;
            }
            if (std::abs(s - 1.0) > 1e-9) res.alpha_simplex = false;
          }
        }
      }
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(adv[i] >= 0.0f && adv[i] <= 1.0f)) res.in_range = false;
      res.max_excess = std::max(res.max_excess, std::abs(static_cast<double>(adv[i]) - x[i]) - cfg.eps);
    }
    ++res.configs;
  }
  return res;
}

}  // namespace snnadv::oracle
