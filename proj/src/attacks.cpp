#include "snnadv/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "snnadv/ops.hpp"
#include "snnadv/random.hpp"

namespace snnadv {

std::string_view attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::Fgsm: return "fgsm";
    case AttackKind::Pgd: return "pgd";
    case AttackKind::Mim: return "mim";
    case AttackKind::Saga: return "saga";
    case AttackKind::AutoSaga: return "autosaga";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "fgsm") return AttackKind::Fgsm;
  if (name == "pgd") return AttackKind::Pgd;
  if (name == "mim") return AttackKind::Mim;
  if (name == "saga") return AttackKind::Saga;
  if (name == "autosaga" || name == "auto-saga" || name == "auto_saga") return AttackKind::AutoSaga;
  throw ConfigError("unknown attack kind '" + std::string(name) + "'");
}

void AttackConfig::validate() const {
  if (!(eps >= 0 && eps <= 1)) throw ConfigError("attack eps must be in [0, 1]");
  if (steps < 1) throw ConfigError("attack steps must be >= 1");
  if (eps > 0 && !(eps_step > 0 && eps_step <= eps)) {
    throw ConfigError("attack eps_step must be in (0, eps]");
  }
  if (!(momentum >= 0)) throw ConfigError("attack momentum must be >= 0");
  if (!(kappa >= 0)) throw ConfigError("attack kappa must be >= 0");
  if (!(coef_lr > 0)) throw ConfigError("attack coefficient rate r must be > 0");
  if (!(fit > 0)) throw ConfigError("attack fitting factor u must be > 0");
  for (double a : alpha) {
    if (!(a >= 0) || !std::isfinite(a)) throw ConfigError("attack coefficients must be >= 0");
  }
}

nlohmann::json to_json(const AttackConfig& c) {
  return {{"eps", c.eps},           {"eps_step", c.eps_step},
          {"steps", c.steps},       {"momentum", c.momentum},
          {"kappa", c.kappa},       {"r", c.coef_lr},
          {"u", c.fit},             {"alpha", c.alpha},
          {"random_start", c.random_start}, {"normalize_alpha", c.normalize_alpha},
          {"seed", c.seed}};
}

Tensor project(const Tensor& x_adv, const Tensor& x, double eps) {
  if (x_adv.shape() != x.shape()) throw DimensionError("project: shape mismatch");
  const auto e = static_cast<float>(eps);
  Tensor out(x.shape());
  auto o = out.data();
  auto a = x_adv.data();
  auto c = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    float v = std::clamp(a[i], c[i] - e, c[i] + e);
    o[i] = std::clamp(v, 0.0f, 1.0f);
  }
  return out;
}

Tensor input_gradient(const Model& model, const Tensor& x, const std::vector<int>& labels) {
  auto pass = model.forward(x);
  auto lg = softmax_cross_entropy(pass->logits(), labels, Reduction::Sum);
  return pass->backward(lg.dlogits).dinput.reshaped(x.shape());
}

namespace {

// x + step * direction, elementwise in float.
Tensor step_along(const Tensor& x, const Tensor& direction, float step) {
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + step * direction[i];
  return out;
}

void record(AttackTrace* trace, const Tensor& iterate, const Tensor& direction) {
  if (!trace) return;
  trace->iterates.push_back(iterate);
  trace->directions.push_back(direction);
}

void check_batch(const Tensor& x, const std::vector<int>& labels) {
  if (x.rank() != 2) throw DimensionError("attacks expect a batch [n, features]");
  if (x.dim(0) != labels.size()) throw DimensionError("attack: label count does not match batch");
}

}  // namespace

Tensor fgsm(const Model& model, const Tensor& x, const std::vector<int>& labels, double eps) {
  check_batch(x, labels);
  if (!(eps >= 0 && eps <= 1)) throw ConfigError("fgsm eps must be in [0, 1]");
  Tensor dir = sign(input_gradient(model, x, labels));
  return clamp(step_along(x, dir, static_cast<float>(eps)), 0.0f, 1.0f);
}

Tensor pgd(const Model& model, const Tensor& x, const std::vector<int>& labels,
           const AttackConfig& cfg, AttackTrace* trace) {
  cfg.validate();
  check_batch(x, labels);
  Tensor adv = x;
  if (cfg.random_start && cfg.eps > 0) {
    Rng rng(cfg.seed);
    Tensor noisy(x.shape());
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      noisy[i] = x[i] + static_cast<float>(uniform(rng, -cfg.eps, cfg.eps));
    }
    adv = project(noisy, x, cfg.eps);
  }
  const auto step = static_cast<float>(cfg.eps_step);
  for (int it = 0; it < cfg.steps; ++it) {
    Tensor dir = sign(input_gradient(model, adv, labels));
    adv = project(step_along(adv, dir, step), x, cfg.eps);
    record(trace, adv, dir);
  }
  return adv;
}

Tensor mim(const Model& model, const Tensor& x, const std::vector<int>& labels,
           const AttackConfig& cfg, AttackTrace* trace) {
  cfg.validate();
  check_batch(x, labels);
  const std::size_t n = x.dim(0);
  const std::size_t w = x.row_width();
  const auto step = static_cast<float>(cfg.eps / cfg.steps);
  const auto mu = static_cast<float>(cfg.momentum);
  Tensor adv = x;
  Tensor acc(x.shape());
  for (int it = 0; it < cfg.steps; ++it) {
    Tensor g = input_gradient(model, adv, labels);
    for (std::size_t s = 0; s < n; ++s) {
      double l1 = 0;
      for (std::size_t j = 0; j < w; ++j) l1 += std::abs(g[s * w + j]);
      for (std::size_t j = 0; j < w; ++j) {
        float inc = l1 > 0 ? static_cast<float>(g[s * w + j] / l1) : 0.0f;
        acc[s * w + j] = mu * acc[s * w + j] + inc;
      }
    }
    Tensor dir = sign(acc);
    adv = project(step_along(adv, dir, step), x, cfg.eps);
    record(trace, adv, dir);
  }
  return adv;
}

namespace {

void check_models(const ModelList& models, const Tensor& x) {
  if (models.empty()) throw ConfigError("ensemble attack needs at least one model");
  for (const auto* m : models) {
    if (!m) throw ConfigError("ensemble attack: null model");
    if (shape_size(m->input_shape()) != x.row_width()) {
      throw DimensionError("ensemble attack: model '" + m->name() + "' input width mismatch");
    }
  }
}

struct Evaluated {
  std::unique_ptr<ForwardPass> pass;
  Tensor grad;      // d CE / dx
  Tensor saliency;  // phi
};

Evaluated evaluate_model(const Model& m, const Tensor& x, const std::vector<int>& labels) {
  Evaluated e;
  e.pass = m.forward(x);
  auto lg = softmax_cross_entropy(e.pass->logits(), labels, Reduction::Sum);
  e.grad = e.pass->backward(lg.dlogits).dinput.reshaped(x.shape());
  e.saliency = m.saliency(*e.pass, x);
  return e;
}

}  // namespace

Tensor saga(const ModelList& models, const std::vector<double>& alpha, const Tensor& x,
            const std::vector<int>& labels, const AttackConfig& cfg, AttackTrace* trace) {
  cfg.validate();
  check_batch(x, labels);
  check_models(models, x);
  if (alpha.size() != models.size()) throw ConfigError("saga: need one coefficient per model");
  for (double a : alpha) {
    if (!(a >= 0)) throw ConfigError("saga: coefficients must be >= 0");
  }
  const auto step = static_cast<float>(cfg.eps_step);
  Tensor adv = x;
  for (int it = 0; it < cfg.steps; ++it) {
    Tensor total(x.shape());
    for (std::size_t m = 0; m < models.size(); ++m) {
      auto e = evaluate_model(*models[m], adv, labels);
      const auto a = static_cast<float>(alpha[m]);
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += a * e.saliency[i] * e.grad[i];
    }
    Tensor dir = sign(total);
    adv = project(step_along(adv, dir, step), x, cfg.eps);
    record(trace, adv, dir);
  }
  return adv;
}

std::vector<double> margin_loss(const Tensor& logits, const std::vector<int>& labels, double kappa) {
  Tensor p = softmax(logits);
  const std::size_t c = p.row_width();
  std::vector<double> out(labels.size());
  for (std::size_t s = 0; s < labels.size(); ++s) {
    auto t = static_cast<std::size_t>(labels[s]);
    if (t >= c) throw IndexError("margin_loss: label out of range");
    double best = -1.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j != t) best = std::max(best, static_cast<double>(p.at(s, j)));
    }
    out[s] = std::max(static_cast<double>(p.at(s, t)) - best, -kappa);
  }
  return out;
}

Tensor margin_loss_grad(const Tensor& logits, const std::vector<int>& labels, double kappa) {
  Tensor p = softmax(logits);
  const std::size_t c = p.row_width();
  Tensor g(p.shape());
  for (std::size_t s = 0; s < labels.size(); ++s) {
    auto t = static_cast<std::size_t>(labels[s]);
    if (t >= c) throw IndexError("margin_loss_grad: label out of range");
    std::size_t j_best = t == 0 ? 1 : 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j != t && p.at(s, j) > p.at(s, j_best)) j_best = j;
    }
    double margin = static_cast<double>(p.at(s, t)) - p.at(s, j_best);
    if (margin <= -kappa) continue;  // clamped branch
    const double pt = p.at(s, t), pj = p.at(s, j_best);
    for (std::size_t i = 0; i < c; ++i) {
      double pi = p.at(s, i);
      double d = pt * ((i == t ? 1.0 : 0.0) - pi) - pj * ((i == j_best ? 1.0 : 0.0) - pi);
      g.at(s, i) = static_cast<float>(d);
    }
  }
  return g;
}

std::vector<double> AutoSagaResult::mean_alpha(std::size_t iteration) const {
  const auto& a = alpha_history.at(iteration);
  std::vector<double> out(a.empty() ? 0 : a[0].size(), 0.0);
  for (const auto& row : a) {
    for (std::size_t m = 0; m < row.size(); ++m) out[m] += row[m] / static_cast<double>(a.size());
  }
  return out;
}

AutoSagaResult auto_saga(const ModelList& models, const Tensor& x, const std::vector<int>& labels,
                         const AttackConfig& cfg, AttackTrace* trace) {
  cfg.validate();
  check_batch(x, labels);
  check_models(models, x);
  const std::size_t n_models = models.size();
  const std::size_t n = x.dim(0);
  const std::size_t w = x.row_width();
  std::vector<double> init = cfg.alpha;
  if (init.empty()) init.assign(n_models, 1.0 / static_cast<double>(n_models));
  if (init.size() != n_models) throw ConfigError("auto_saga: need one initial coefficient per model");

  AutoSagaResult result;
  std::vector<std::vector<double>> alpha(n, init);
  result.alpha_history.push_back(alpha);
  const auto step = static_cast<float>(cfg.eps_step);
  const double u = cfg.fit;

  Tensor adv = x;
  std::vector<Evaluated> cur(n_models);
  for (std::size_t m = 0; m < n_models; ++m) cur[m] = evaluate_model(*models[m], adv, labels);

  for (int it = 0; it < cfg.steps; ++it) {
    // Weighted, masked gradient sum and the plain sum used by the sign surrogate.
    Tensor total(x.shape());
    Tensor plain(x.shape());
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t m = 0; m < n_models; ++m) {
        const auto a = static_cast<float>(alpha[s][m]);
        const auto& g = cur[m].grad;
        const auto& phi = cur[m].saliency;
        for (std::size_t j = s * w; j < (s + 1) * w; ++j) {
          total[j] += a * g[j] * phi[j];
          plain[j] += g[j];
        }
      }
    }
    Tensor dir = sign(total);
    adv = project(step_along(adv, dir, step), x, cfg.eps);
    record(trace, adv, dir);

    std::vector<Evaluated> next(n_models);
    Tensor dfdx(x.shape());
    for (std::size_t m = 0; m < n_models; ++m) {
      next[m] = evaluate_model(*models[m], adv, labels);
      Tensor dl = margin_loss_grad(next[m].pass->logits(), labels, cfg.kappa);
      Tensor gx = next[m].pass->backward(dl).dinput;
      for (std::size_t i = 0; i < dfdx.size(); ++i) dfdx[i] += gx[i];
    }

    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t m = 0; m < n_models; ++m) {
        const auto& g = cur[m].grad;
        double df_da = 0.0;
        for (std::size_t j = s * w; j < (s + 1) * w; ++j) {
          double ch = std::cosh(u * plain[j]);
          double dx_da = u * cfg.eps_step * g[j] / (ch * ch);
          df_da += static_cast<double>(dfdx[j]) * dx_da;
        }
        alpha[s][m] -= cfg.coef_lr * df_da;
      }
      if (cfg.normalize_alpha) {
        double total_alpha = 0.0;
        for (auto& a : alpha[s]) {
          a = std::max(a, 0.0);
          total_alpha += a;
        }
        if (!(total_alpha > 0) || !std::isfinite(total_alpha)) {
          alpha[s].assign(n_models, 1.0 / static_cast<double>(n_models));
          result.collapse_resets++;
        } else {
          for (auto& a : alpha[s]) a /= total_alpha;
        }
      }
    }
    result.alpha_history.push_back(alpha);
    cur = std::move(next);
  }
  result.x_adv = std::move(adv);
  return result;
}

AttackReport make_report(const ModelList& models, const Tensor& x, const Tensor& x_adv,
                         const std::vector<int>& labels, int iterations) {
  check_batch(x_adv, labels);
  if (x.shape() != x_adv.shape()) throw DimensionError("report: shape mismatch");
  const std::size_t n = labels.size();
  const std::size_t w = x.row_width();
  AttackReport r;
  r.joint.assign(n, true);
  for (const auto* m : models) {
    r.model_names.push_back(m->name());
    auto pred = m->predict(x_adv);
    std::vector<bool> ok(n);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < n; ++s) {
      ok[s] = pred[s] != labels[s];
      hits += ok[s];
      r.joint[s] = r.joint[s] && ok[s];
    }
    r.success.push_back(std::move(ok));
    r.success_rate.push_back(static_cast<double>(hits) / static_cast<double>(n));
  }
  std::size_t joint = 0;
  for (bool j : r.joint) joint += j;
  r.joint_rate = models.empty() ? 0.0 : static_cast<double>(joint) / static_cast<double>(n);
  r.linf.assign(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < w; ++j) {
      r.linf[s] = std::max(r.linf[s], static_cast<double>(std::abs(x_adv[s * w + j] - x[s * w + j])));
    }
  }
  r.iterations.assign(n, iterations);
  return r;
}

nlohmann::json to_json(const AttackReport& r, bool per_sample) {
  nlohmann::json j = {{"models", r.model_names},
                      {"success_rate", r.success_rate},
                      {"joint_rate", r.joint_rate}};
  if (per_sample) {
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t s = 0; s < r.joint.size(); ++s) {
      std::vector<bool> flags;
      for (const auto& m : r.success) flags.push_back(m[s]);
      samples.push_back({{"success", flags},
                         {"joint", static_cast<bool>(r.joint[s])},
                         {"linf", r.linf[s]},
                         {"iterations", r.iterations[s]}});
    }
    j["samples"] = samples;
  }
  return j;
}

}  // namespace snnadv
