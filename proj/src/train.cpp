#include "snnadv/train.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

#include "snnadv/ops.hpp"
#include "snnadv/random.hpp"

namespace snnadv {

nlohmann::json to_json(const TrainHistory& history) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : history.epochs) {
    nlohmann::json j = {{"epoch", e.epoch}, {"loss", e.loss}, {"train_accuracy", e.train_accuracy}};
    j["test_accuracy"] = e.test_accuracy ? nlohmann::json(*e.test_accuracy) : nlohmann::json(nullptr);
    out.push_back(j);
  }
  return out;
}

std::vector<int> predict_all(const Model& model, const Tensor& images, std::size_t batch_size) {
  std::vector<int> out;
  out.reserve(images.dim(0));
  std::size_t n = images.dim(0);
  std::size_t w = images.row_width();
  for (std::size_t b = 0; b < n; b += batch_size) {
    std::size_t e = std::min(n, b + batch_size);
    std::vector<float> rows(images.data().begin() + static_cast<std::ptrdiff_t>(b * w),
                            images.data().begin() + static_cast<std::ptrdiff_t>(e * w));
    auto pred = model.predict(Tensor({e - b, w}, std::move(rows)));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

Evaluation evaluate(const Model& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw ConfigError("evaluate: empty dataset");
  auto pred = predict_all(model, data.images, batch_size);
  Evaluation ev;
  ev.total = data.size();
  ev.class_totals.assign(data.num_classes, 0);
  ev.class_correct.assign(data.num_classes, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto c = static_cast<std::size_t>(data.labels[i]);
    ev.class_totals.at(c)++;
    if (pred[i] == data.labels[i]) {
      ev.correct++;
      ev.class_correct[c]++;
    }
  }
  ev.accuracy = static_cast<double>(ev.correct) / static_cast<double>(ev.total);
  return ev;
}

namespace {

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, const NamedParams& params) : cfg_(cfg) {
    for (const auto& [name, t] : params) {
      m_.emplace_back(t->size(), 0.0f);
      v_.emplace_back(t->size(), 0.0f);
    }
  }

  void step(const NamedParams& params, const std::vector<Tensor>& grads) {
    if (grads.size() != params.size()) throw StateError("optimizer: gradient count mismatch");
    ++t_;
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto w = params[p].second->data();
      auto g = grads[p].data();
      if (g.size() != w.size()) throw StateError("optimizer: gradient shape mismatch for " + params[p].first);
      if (const auto* sgd = std::get_if<SgdConfig>(&cfg_)) {
        auto& m = m_[p];
        auto lr = static_cast<float>(sgd->lr);
        auto mu = static_cast<float>(sgd->momentum);
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = mu * m[i] + g[i];
          w[i] -= lr * m[i];
        }
      } else {
        const auto& a = std::get<AdamConfig>(cfg_);
        auto& m = m_[p];
        auto& v = v_[p];
        double c1 = 1.0 - std::pow(a.beta1, t_);
        double c2 = 1.0 - std::pow(a.beta2, t_);
        auto step = static_cast<float>(a.lr * std::sqrt(c2) / c1);
        auto b1 = static_cast<float>(a.beta1);
        auto b2 = static_cast<float>(a.beta2);
        auto eps = static_cast<float>(a.eps * std::sqrt(c2));
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = b1 * m[i] + (1 - b1) * g[i];
          v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
          w[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
        }
      }
    }
  }

 private:
  OptimizerConfig cfg_;
  std::vector<std::vector<float>> m_, v_;
  int t_ = 0;
};

void validate(const TrainConfig& c) {
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.batch_size == 0) throw ConfigError("batch size must be positive");
  std::visit(
      [](const auto& o) {
        if (!(o.lr >= 0) || !std::isfinite(o.lr)) throw ConfigError("learning rate must be >= 0");
      },
      c.optimizer);
  if (const auto* a = std::get_if<AdamConfig>(&c.optimizer)) {
    if (!(a->beta1 >= 0 && a->beta1 < 1 && a->beta2 >= 0 && a->beta2 < 1 && a->eps > 0)) {
      throw ConfigError("adam: need beta in [0,1) and eps > 0");
    }
  }
}

}  // namespace

TrainHistory train_epochs(Model& model, const Dataset& train, const TrainConfig& config,
                          const Dataset* test) {
  validate(config);
  if (train.size() == 0) throw ConfigError("train: empty dataset");
  if (config.surrogate) {
    if (auto* snn = dynamic_cast<SpikingModel*>(&model)) snn->set_surrogate(*config.surrogate);
  }
  auto params = model.parameters();
  Optimizer opt(config.optimizer, params);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::size_t w = train.images.row_width();

  TrainHistory history;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      std::size_t e = std::min(order.size(), b + config.batch_size);
      std::vector<float> rows;
      rows.reserve((e - b) * w);
      std::vector<int> labels;
      for (std::size_t i = b; i < e; ++i) {
        auto r = train.images.row(order[i]);
        rows.insert(rows.end(), r.begin(), r.end());
        labels.push_back(train.labels[order[i]]);
      }
      try {
        auto pass = model.forward(Tensor({e - b, w}, std::move(rows)));
        auto lg = softmax_cross_entropy(pass->logits(), labels);
        if (!std::isfinite(lg.loss)) throw NumericError("loss is not finite");
        auto grads = pass->backward(lg.dlogits, true);
        for (const auto& g : grads.dparams) require_finite(g, "parameter gradient");
        opt.step(params, grads.dparams);
        for (const auto& [name, t] : params) require_finite(*t, name.c_str());
        loss_sum += lg.loss;
        ++batches;
      } catch (const NumericError& err) {
        throw TrainingError(std::string("training diverged: ") + err.what(), epoch);
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(batches);
    rec.train_accuracy = evaluate(model, train).accuracy;
    if (test) rec.test_accuracy = evaluate(model, *test).accuracy;
    if (config.log) {
      *config.log << "epoch " << epoch << " loss " << rec.loss << " train_acc " << rec.train_accuracy;
      if (rec.test_accuracy) *config.log << " test_acc " << *rec.test_accuracy;
      *config.log << '\n';
    }
    history.epochs.push_back(rec);
  }
  return history;
}

}  // namespace snnadv
