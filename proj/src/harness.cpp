#include "snnadv/harness.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <thread>

#include "snnadv/random.hpp"
#include "snnadv/train.hpp"

namespace snnadv {

EvalSet select_eval_set(const ModelList& models, const Dataset& data, std::size_t n,
                        std::uint64_t seed) {
  if (models.empty()) throw ConfigError("select_eval_set: no models");
  if (n == 0) throw ConfigError("select_eval_set: n must be positive");
  const std::size_t classes = data.num_classes;
  std::vector<bool> ok(data.size(), true);
  for (const auto* m : models) {
    auto pred = predict_all(*m, data.images);
    for (std::size_t i = 0; i < ok.size(); ++i) ok[i] = ok[i] && pred[i] == data.labels[i];
  }
  std::vector<std::vector<std::size_t>> pool(classes);
  for (std::size_t i = 0; i < ok.size(); ++i) {
    if (ok[i]) pool[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }

  Rng rng(seed);
  std::vector<std::size_t> quota(classes, n / classes);
  std::vector<std::size_t> order(classes);
  for (std::size_t c = 0; c < classes; ++c) order[c] = c;
  shuffle(order.begin(), order.end(), rng);
  std::size_t extra = n % classes;
  for (std::size_t c : order) {
    if (extra == 0) break;
    if (pool[c].size() > quota[c]) {
      quota[c]++;
      extra--;
    }
  }
  std::vector<std::size_t> starved;
  for (std::size_t c = 0; c < classes; ++c) {
    if (pool[c].size() < quota[c]) starved.push_back(c);
  }
  if (!starved.empty() || extra > 0) {
    std::ostringstream msg;
    msg << "cannot select " << n << " balanced samples";
    if (!starved.empty()) {
      msg << "; starved class";
      for (auto c : starved) msg << ' ' << c;
    }
    msg << "; qualifying per class:";
    for (std::size_t c = 0; c < classes; ++c) msg << ' ' << c << '=' << pool[c].size();
    throw SelectionError(msg.str());
  }

  EvalSet set;
  for (std::size_t c = 0; c < classes; ++c) {
    shuffle(pool[c].begin(), pool[c].end(), rng);
    set.indices.insert(set.indices.end(), pool[c].begin(), pool[c].begin() + static_cast<long>(quota[c]));
  }
  std::sort(set.indices.begin(), set.indices.end());
  Dataset sub = data.subset(set.indices);
  set.images = std::move(sub.images);
  set.labels = std::move(sub.labels);
  set.class_histogram = quota;
  for (const auto* m : models) set.model_names.push_back(m->name());
  return set;
}

void verify_eval_set(const ModelList& models, const EvalSet& set) {
  for (const auto* m : models) {
    auto pred = predict_all(*m, set.images);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] != set.labels[i]) {
        throw StateError("evaluation set sample " + std::to_string(set.indices[i]) +
                         " is misclassified by '" + m->name() + "'");
      }
    }
  }
}

namespace {

Tensor rows_of(const Tensor& x, std::size_t b, std::size_t e) {
  std::size_t w = x.row_width();
  std::vector<float> d(x.data().begin() + static_cast<long>(b * w), x.data().begin() + static_cast<long>(e * w));
  return Tensor({e - b, w}, std::move(d));
}

Tensor run_chunk(AttackKind kind, const ModelList& models, const Tensor& x,
                 const std::vector<int>& labels, AttackConfig cfg, std::size_t chunk_index) {
  // Random starts stay reproducible for a fixed chunk size.
  cfg.seed = cfg.seed + 0x9E3779B97F4A7C15ull * chunk_index;
  switch (kind) {
    case AttackKind::Fgsm: return fgsm(*models.at(0), x, labels, cfg.eps);
    case AttackKind::Pgd: return pgd(*models.at(0), x, labels, cfg);
    case AttackKind::Mim: return mim(*models.at(0), x, labels, cfg);
    case AttackKind::Saga: {
      std::vector<double> alpha = cfg.alpha;
      if (alpha.empty()) alpha.assign(models.size(), 1.0 / static_cast<double>(models.size()));
      return saga(models, alpha, x, labels, cfg);
    }
    case AttackKind::AutoSaga: return auto_saga(models, x, labels, cfg).x_adv;
  }
  throw ConfigError("unknown attack");
}

}  // namespace

Tensor generate_adversarial(AttackKind kind, const ModelList& models, const Tensor& x,
                            const std::vector<int>& labels, const AttackConfig& cfg,
                            const RunOptions& opts) {
  if (models.empty()) throw ConfigError("generate_adversarial: no models");
  if (opts.chunk == 0 || opts.jobs < 1) throw ConfigError("run options: chunk and jobs must be positive");
  const std::size_t n = x.dim(0);
  const std::size_t chunks = (n + opts.chunk - 1) / opts.chunk;
  std::vector<Tensor> parts(chunks);
  auto work = [&](std::size_t c) {
    std::size_t b = c * opts.chunk, e = std::min(n, b + opts.chunk);
    std::vector<int> lab(labels.begin() + static_cast<long>(b), labels.begin() + static_cast<long>(e));
    parts[c] = run_chunk(kind, models, rows_of(x, b, e), lab, cfg, c);
  };
  if (opts.jobs == 1 || chunks == 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(opts.jobs));
    std::vector<std::thread> pool;
    for (int j = 0; j < opts.jobs; ++j) {
      pool.emplace_back([&, j] {
        try {
          for (std::size_t c = static_cast<std::size_t>(j); c < chunks; c += static_cast<std::size_t>(opts.jobs)) work(c);
        } catch (...) {
          errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<float> out;
  out.reserve(x.size());
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor(x.shape(), std::move(out));
}

double transferability(const Model& source, const Model& target, AttackKind attack,
                       const AttackConfig& cfg, const EvalSet& set, const RunOptions& opts) {
  verify_eval_set({&source, &target}, set);
  Tensor adv = generate_adversarial(attack, {&source}, set.images, set.labels, cfg, opts);
  auto pred = predict_all(target, adv);
  std::size_t miss = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) miss += pred[i] != set.labels[i];
  return static_cast<double>(miss) / static_cast<double>(pred.size());
}

TransferMatrix transfer_matrix(const ModelList& models, const std::vector<AttackKind>& attacks,
                               const Dataset& data, std::size_t n, std::uint64_t seed,
                               const AttackConfig& cfg, const RunOptions& opts) {
  if (models.empty()) throw ConfigError("transfer_matrix: no models");
  if (attacks.empty()) throw ConfigError("transfer_matrix: no attacks");
  const std::size_t m = models.size();
  TransferMatrix tm;
  for (const auto* model : models) tm.names.push_back(model->name());
  for (auto a : attacks) tm.attacks.emplace_back(attack_name(a));
  tm.per_attack.assign(attacks.size(), std::vector<std::vector<double>>(m, std::vector<double>(m, 0.0)));
  tm.max.assign(m, std::vector<double>(m, 0.0));
  tm.set_sizes.assign(m, std::vector<std::size_t>(m, 0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      ModelList pair = i == j ? ModelList{models[i]} : ModelList{models[i], models[j]};
      EvalSet set = select_eval_set(pair, data, n, seed);
      tm.set_sizes[i][j] = set.size();
      for (std::size_t a = 0; a < attacks.size(); ++a) {
        double t = transferability(*models[i], *models[j], attacks[a], cfg, set, opts);
        tm.per_attack[a][i][j] = t;
        tm.max[i][j] = std::max(tm.max[i][j], t);
      }
    }
  }
  return tm;
}

std::string to_csv(const std::vector<std::string>& names, const std::vector<std::vector<double>>& m) {
  std::ostringstream out;
  out << "source";
  for (const auto& n : names) out << ',' << n;
  out << '\n' << std::setprecision(6) << std::fixed;
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << names[i];
    for (double v : m[i]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const TransferMatrix& tm) {
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t a = 0; a < tm.attacks.size(); ++a) per[tm.attacks[a]] = tm.per_attack[a];
  return {{"models", tm.names}, {"attacks", per}, {"max", tm.max}, {"set_sizes", tm.set_sizes}};
}

std::vector<std::vector<double>> SweepGrid::success_rate() const {
  auto out = robust_accuracy;
  for (auto& row : out) {
    for (auto& v : row) v = 1.0 - v;
  }
  return out;
}

SweepGrid surrogate_sweep(const SpikingModel& snn, const std::vector<double>& eps,
                          const std::vector<SurrogateSpec>& specs, const EvalSet& set,
                          const AttackConfig& pgd_cfg, double step_ratio, const RunOptions& opts) {
  if (eps.empty() || specs.empty()) throw ConfigError("surrogate_sweep: empty grid");
  if (!(step_ratio > 0)) throw ConfigError("surrogate_sweep: step ratio must be positive");
  verify_eval_set({&snn}, set);
  SweepGrid grid;
  grid.eps = eps;
  SpikingModel probe = snn;
  for (const auto& spec : specs) {
    grid.surrogates.emplace_back(surrogate_name(spec.kind));
    probe.set_surrogate(spec);
    std::vector<double> row;
    for (double e : eps) {
      if (e == 0) {
        row.push_back(evaluate(probe, {set.images, set.labels, snn.input_shape(), snn.num_classes()}).accuracy);
        continue;
      }
      AttackConfig cfg = pgd_cfg;
      cfg.eps = e;
      cfg.eps_step = std::min(e, step_ratio * e / cfg.steps);
      Tensor adv = generate_adversarial(AttackKind::Pgd, {&probe}, set.images, set.labels, cfg, opts);
      auto pred = predict_all(probe, adv);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == set.labels[i];
      row.push_back(static_cast<double>(correct) / static_cast<double>(pred.size()));
    }
    grid.robust_accuracy.push_back(std::move(row));
  }
  return grid;
}

std::string to_csv(const SweepGrid& grid) {
  std::ostringstream out;
  out << "surrogate";
  for (double e : grid.eps) out << ",robust_acc@" << e;
  for (double e : grid.eps) out << ",success@" << e;
  out << '\n' << std::setprecision(6) << std::fixed;
  auto success = grid.success_rate();
  for (std::size_t s = 0; s < grid.surrogates.size(); ++s) {
    out << grid.surrogates[s];
    for (double v : grid.robust_accuracy[s]) out << ',' << v;
    for (double v : success[s]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const SweepGrid& grid) {
  return {{"surrogates", grid.surrogates},
          {"eps", grid.eps},
          {"robust_accuracy", grid.robust_accuracy},
          {"success_rate", grid.success_rate()}};
}

namespace {

double joint_rate(const ModelList& models, const Tensor& adv, const std::vector<int>& labels) {
  std::vector<bool> joint(labels.size(), true);
  for (const auto* m : models) {
    auto pred = predict_all(*m, adv);
    for (std::size_t i = 0; i < pred.size(); ++i) joint[i] = joint[i] && pred[i] != labels[i];
  }
  return static_cast<double>(std::count(joint.begin(), joint.end(), true)) /
         static_cast<double>(labels.size());
}

}  // namespace

MultiModelRow multi_model_comparison(const ModelList& models, const EvalSet& set,
                                     const AttackConfig& cfg, const RunOptions& opts) {
  if (models.size() < 2) throw ConfigError("multi_model_comparison needs at least two models");
  verify_eval_set(models, set);
  MultiModelRow row;
  row.n = set.size();
  for (const auto* m : models) row.names.push_back(m->name());
  for (const auto* m : models) {
    Tensor a = generate_adversarial(AttackKind::Mim, {m}, set.images, set.labels, cfg, opts);
    row.max_mim = std::max(row.max_mim, joint_rate(models, a, set.labels));
    Tensor b = generate_adversarial(AttackKind::Pgd, {m}, set.images, set.labels, cfg, opts);
    row.max_pgd = std::max(row.max_pgd, joint_rate(models, b, set.labels));
  }
  AttackConfig basic = cfg;
  basic.alpha.assign(models.size(), 1.0 / static_cast<double>(models.size()));
  Tensor s = generate_adversarial(AttackKind::Saga, models, set.images, set.labels, basic, opts);
  row.basic_saga = joint_rate(models, s, set.labels);
  Tensor a = generate_adversarial(AttackKind::AutoSaga, models, set.images, set.labels, cfg, opts);
  row.auto_saga = joint_rate(models, a, set.labels);
  return row;
}

std::string to_csv(const std::vector<MultiModelRow>& rows) {
  std::ostringstream out;
  out << "models,n,max_mim,max_pgd,basic_saga,auto_saga\n" << std::setprecision(6) << std::fixed;
  for (const auto& r : rows) {
    std::string names;
    for (std::size_t i = 0; i < r.names.size(); ++i) names += (i ? "+" : "") + r.names[i];
    out << names << ',' << r.n << ',' << r.max_mim << ',' << r.max_pgd << ',' << r.basic_saga << ','
        << r.auto_saga << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const MultiModelRow& r) {
  return {{"models", r.names},         {"n", r.n},
          {"max_mim", r.max_mim},      {"max_pgd", r.max_pgd},
          {"basic_saga", r.basic_saga}, {"auto_saga", r.auto_saga}};
}

}  // namespace snnadv
