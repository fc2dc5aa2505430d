#include "snnadv/cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "snnadv/checkpoint.hpp"
#include "snnadv/convert.hpp"
#include "snnadv/harness.hpp"
#include "snnadv/ops.hpp"
#include "snnadv/report.hpp"
#include "snnadv/run_config.hpp"
#include "snnadv/train.hpp"

#ifndef SNNADV_DEFAULT_DATA_DIR
#define SNNADV_DEFAULT_DATA_DIR "data"
#endif

namespace snnadv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Command {
  std::string name;
  std::string help;
  std::map<std::string, std::string> aliases;  // flag -> key
};

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = {
      {"train", "train a model on the IDX data", {{"--kind", "model.kind"}, {"--epochs", "train.epochs"}}},
      {"convert", "convert a ReLU ANN checkpoint into a spiking net", {{"--model", "model"}}},
      {"attack",
       "run one attack over an evaluation set",
       {{"--kind", "attack.kind"},
        {"--model", "model"},
        {"--models", "models"},
        {"--eps", "attack.eps"},
        {"--eps-step", "attack.eps_step"},
        {"--steps", "attack.steps"},
        {"--r", "attack.r"},
        {"--u", "attack.u"},
        {"--kappa", "attack.kappa"},
        {"--mu", "attack.mu"},
        {"--alpha", "attack.alpha"}}},
      {"sweep-surrogate",
       "PGD robust accuracy for each backward kernel and budget",
       {{"--model", "model"}, {"--eps", "sweep.eps"}, {"--surrogates", "sweep.surrogates"},
        {"--steps", "attack.steps"}}},
      {"transfer-matrix",
       "pairwise transferability under FGSM, PGD and MIM",
       {{"--models", "models"}, {"--eps", "attack.eps"}, {"--eps-step", "attack.eps_step"},
        {"--steps", "attack.steps"}}},
      {"multi-attack",
       "Max MIM / Max PGD / Basic SAGA / Auto-SAGA joint success",
       {{"--models", "models"}, {"--eps", "attack.eps"}, {"--eps-step", "attack.eps_step"},
        {"--steps", "attack.steps"}, {"--r", "attack.r"}, {"--u", "attack.u"}}},
      {"inspect", "print a checkpoint's architecture and integrity checks", {{"--model", "model"}}},
  };
  return cmds;
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

Dataset load_data(RunConfig& cfg) {
  if (cfg.str("data.images").empty()) {
    cfg.set("data.images", std::string(SNNADV_DEFAULT_DATA_DIR) + "/mnist10k-images-idx3-ubyte");
  }
  if (cfg.str("data.labels").empty()) {
    cfg.set("data.labels", std::string(SNNADV_DEFAULT_DATA_DIR) + "/mnist10k-labels-idx1-ubyte");
  }
  return load_mnist_idx(cfg.str("data.images"), cfg.str("data.labels"));
}

Split load_split(RunConfig& cfg) {
  Dataset all = load_data(cfg);
  return split_dataset(all, static_cast<std::size_t>(cfg.integer("data.train_count")));
}

SurrogateSpec surrogate_from(const RunConfig& cfg, const std::string& kind) {
  SurrogateSpec s;
  s.kind = parse_surrogate_kind(kind);
  s.threshold = cfg.real("surrogate.threshold");
  s.sigma = cfg.real("surrogate.sigma");
  s.alpha = cfg.real("surrogate.alpha");
  s.beta = cfg.real("surrogate.beta");
  s.literal_piecewise_exp = cfg.flag("surrogate.literal_pwe");
  s.conventional_fast_sigmoid = cfg.flag("surrogate.conventional_fastsigmoid");
  s.validate();
  return s;
}

AttackConfig attack_from(const RunConfig& cfg) {
  AttackConfig a;
  a.eps = cfg.real("attack.eps");
  a.eps_step = cfg.real("attack.eps_step");
  a.steps = static_cast<int>(cfg.integer("attack.steps"));
  a.momentum = cfg.real("attack.mu");
  a.kappa = cfg.real("attack.kappa");
  a.coef_lr = cfg.real("attack.r");
  a.fit = cfg.real("attack.u");
  a.alpha = cfg.reals("attack.alpha");
  a.random_start = cfg.flag("attack.random_start");
  a.normalize_alpha = cfg.flag("attack.normalize_alpha");
  a.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  a.validate();
  return a;
}

RunOptions run_options(const RunConfig& cfg) {
  RunOptions o;
  o.jobs = static_cast<int>(cfg.integer("jobs"));
  if (o.jobs < 1) throw ConfigError("jobs: must be >= 1");
  return o;
}

json config_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.values()) j[k] = v;
  return j;
}

std::vector<std::unique_ptr<Model>> load_models(const RunConfig& cfg, std::size_t min_count) {
  std::vector<std::string> paths = cfg.strings("models");
  if (paths.empty() && !cfg.str("model").empty()) paths.push_back(cfg.str("model"));
  if (paths.size() < min_count) {
    throw ConfigError("models: need at least " + std::to_string(min_count) + " checkpoint(s)");
  }
  std::vector<std::unique_ptr<Model>> out;
  std::map<std::string, int> seen;
  for (const auto& p : paths) {
    auto ck = load_checkpoint(p);
    if (int n = seen[ck.model->name()]++; n > 0) ck.model->set_name(ck.model->name() + "#" + std::to_string(n + 1));
    out.push_back(std::move(ck.model));
  }
  return out;
}

ModelList raw(const std::vector<std::unique_ptr<Model>>& models) {
  ModelList out;
  for (const auto& m : models) out.push_back(m.get());
  return out;
}

void begin_run(const std::string& command, RunConfig& cfg) {
  fs::path out = cfg.str("out");
  fs::create_directories(out);
  write_text(out / "config.txt", cfg.echo());
  write_json(out / "run.json", {{"command", command}, {"seed", cfg.integer("seed")}});
}

int cmd_train(RunConfig& cfg, std::ostream& out) {
  auto split = load_split(cfg);
  begin_run("train", cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  Rng rng(seed);
  const std::string kind = cfg.str("model.kind");
  const auto hidden = static_cast<std::size_t>(cfg.integer("model.hidden"));
  const Shape shape = split.train.sample_shape;
  const std::size_t classes = split.train.num_classes;
  std::unique_ptr<Model> model;
  bool adam = true;
  if (kind == "ann") {
    model = std::make_unique<AnnModel>(make_mlp(shape, {hidden}, classes, rng));
    adam = false;
  } else if (kind == "cnn") {
    model = std::make_unique<AnnModel>(make_cnn(shape, 8, 16, classes, rng));
    adam = false;
  } else if (kind == "snn") {
    NeuronConfig neuron;
    neuron.leak = cfg.real("model.leak");
    neuron.threshold = cfg.real("model.threshold");
    const std::string reset = cfg.str("model.reset");
    if (reset != "hard" && reset != "soft") throw ConfigError("model.reset: expected hard or soft");
    neuron.reset = reset == "hard" ? ResetMode::HardZero : ResetMode::SoftSubtract;
    auto net = make_snn_mlp(shape, {hidden}, classes, neuron,
                            static_cast<int>(cfg.integer("model.timesteps")), rng);
    const std::string readout = cfg.str("model.readout");
    if (readout == "spikecount") {
      net.readout = Readout::SpikeCount;
      net.layers.back().neuron = neuron;
    } else if (readout != "integrator") {
      throw ConfigError("model.readout: expected integrator or spikecount, got '" + readout + "'");
    }
    net.surrogate = surrogate_from(cfg, cfg.str("surrogate.kind"));
    model = std::make_unique<SpikingModel>(std::move(net));
  } else if (kind == "attention") {
    AttentionConfig ac;
    ac.channels = shape.at(0);
    ac.height = shape.at(1);
    ac.width = shape.at(2);
    ac.classes = classes;
    model = std::make_unique<AttentionModel>(make_attention_net(ac, rng));
  } else {
    throw ConfigError("model.kind: expected ann, cnn, snn or attention, got '" + kind + "'");
  }
  model->set_name(cfg.str("model.name").empty() ? kind : cfg.str("model.name"));

  TrainConfig tc;
  const std::string opt = cfg.str("train.optimizer");
  if (opt == "sgd" || (opt.empty() && !adam)) {
    SgdConfig s;
    if (cfg.real("train.lr") > 0) s.lr = cfg.real("train.lr");
    s.momentum = cfg.real("train.momentum");
    tc.optimizer = s;
  } else if (opt == "adam" || opt.empty()) {
    AdamConfig a;
    if (cfg.real("train.lr") > 0) a.lr = cfg.real("train.lr");
    tc.optimizer = a;
  } else {
    throw ConfigError("train.optimizer: expected adam or sgd, got '" + opt + "'");
  }
  tc.epochs = static_cast<int>(cfg.integer("train.epochs"));
  tc.batch_size = static_cast<std::size_t>(cfg.integer("train.batch"));
  tc.seed = seed;
  tc.log = &out;
  auto history = train_epochs(*model, split.train, tc, &split.test);
  fs::path dir = cfg.str("out");
  save_checkpoint((dir / "model.snnm").string(), *model, config_json(cfg), seed);
  write_json(dir / "history.json", to_json(history));
  auto ev = evaluate(*model, split.test);
  out << "test_accuracy " << ev.accuracy << "\n";
  return 0;
}

int cmd_convert(RunConfig& cfg, std::ostream& out) {
  auto split = load_split(cfg);
  begin_run("convert", cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  auto ck = load_checkpoint(cfg.str("model"));
  auto* ann = dynamic_cast<AnnModel*>(ck.model.get());
  if (!ann) throw UnsupportedError("convert: checkpoint is not a conventional network");
  ConversionConfig cc;
  const std::string mode = cfg.str("convert.mode");
  if (mode == "weight") {
    cc.mode = BalanceMode::WeightBalance;
  } else if (mode == "threshold") {
    cc.mode = BalanceMode::ThresholdBalance;
  } else {
    throw ConfigError("convert.mode: expected weight or threshold, got '" + mode + "'");
  }
  cc.percentile = cfg.real("convert.percentile");
  cc.timesteps = static_cast<int>(cfg.integer("convert.timesteps"));
  cc.surrogate = surrogate_from(cfg, cfg.str("surrogate.kind"));
  auto calib_n = std::min<std::size_t>(static_cast<std::size_t>(cfg.integer("convert.calib")), split.train.size());
  auto conv = convert_ann_to_snn(ann->net(), split.train.slice(0, calib_n).images, cc);
  SpikingModel snn(std::move(conv.net));
  snn.set_name(cfg.str("model.name").empty() ? ann->name() + "-snn" : cfg.str("model.name"));
  TrainConfig tc;
  AdamConfig a;
  a.lr = cfg.real("train.lr") > 0 ? cfg.real("train.lr") : 1e-4;
  tc.optimizer = a;
  tc.batch_size = static_cast<std::size_t>(cfg.integer("train.batch"));
  tc.seed = seed;
  tc.log = &out;
  auto ft = fine_tune(snn, split.train, static_cast<int>(cfg.integer("convert.finetune_epochs")),
                      cc.surrogate, tc, &split.test);
  fs::path dir = cfg.str("out");
  save_checkpoint((dir / "converted.snnm").string(), snn, config_json(cfg), seed);
  json report = {{"scales", conv.scales},
                 {"ann_test_accuracy", evaluate(*ann, split.test).accuracy},
                 {"snn_test_accuracy_before", ft.accuracy_before},
                 {"snn_test_accuracy_after", ft.accuracy_after},
                 {"history", to_json(ft.history)}};
  write_json(dir / "convert.json", report);
  out << "converted test_accuracy " << ft.accuracy_after << "\n";
  return 0;
}

int cmd_attack(RunConfig& cfg, std::ostream& out) {
  auto split = load_split(cfg);
  begin_run("attack", cfg);
  auto owned = load_models(cfg, 1);
  auto models = raw(owned);
  auto kind = parse_attack_kind(cfg.str("attack.kind"));
  auto acfg = attack_from(cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  auto set = select_eval_set(models, split.test, static_cast<std::size_t>(cfg.integer("eval.n")), seed);
  verify_eval_set(models, set);
  const bool ensemble = kind == AttackKind::Saga || kind == AttackKind::AutoSaga;
  ModelList gen = ensemble ? models : ModelList{models[0]};
  Tensor adv = generate_adversarial(kind, gen, set.images, set.labels, acfg, run_options(cfg));
  int iterations = kind == AttackKind::Fgsm ? 1 : acfg.steps;
  auto report = make_report(models, set.images, adv, set.labels, iterations);
  json j = to_json(report);
  j["attack"] = attack_name(kind);
  j["config"] = to_json(acfg);
  j["indices"] = set.indices;
  fs::path dir = cfg.str("out");
  write_json(dir / "report.json", j);
  std::ostringstream csv;
  csv << "model,success_rate\n";
  for (std::size_t m = 0; m < models.size(); ++m) csv << report.model_names[m] << ',' << report.success_rate[m] << '\n';
  csv << "joint," << report.joint_rate << '\n';
  write_text(dir / "summary.csv", csv.str());
  out << csv.str();
  return 0;
}

int cmd_sweep(RunConfig& cfg, std::ostream& out) {
  auto split = load_split(cfg);
  begin_run("sweep-surrogate", cfg);
  auto owned = load_models(cfg, 1);
  auto* snn = dynamic_cast<SpikingModel*>(owned[0].get());
  if (!snn) throw UnsupportedError("sweep-surrogate: checkpoint is not a spiking network");
  std::vector<SurrogateSpec> specs;
  for (const auto& name : cfg.strings("sweep.surrogates")) specs.push_back(surrogate_from(cfg, name));
  auto acfg = attack_from(cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  auto set = select_eval_set({snn}, split.test, static_cast<std::size_t>(cfg.integer("eval.n")), seed);
  auto grid = surrogate_sweep(*snn, cfg.reals("sweep.eps"), specs, set, acfg, cfg.real("sweep.step_ratio"),
                              run_options(cfg));
  fs::path dir = cfg.str("out");
  write_text(dir / "sweep.csv", to_csv(grid));
  write_json(dir / "sweep.json", to_json(grid));
  out << to_csv(grid);
  return 0;
}

int cmd_transfer(RunConfig& cfg, std::ostream& out) {
  auto split = load_split(cfg);
  begin_run("transfer-matrix", cfg);
  auto owned = load_models(cfg, 1);
  auto models = raw(owned);
  auto acfg = attack_from(cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  auto tm = transfer_matrix(models, {AttackKind::Fgsm, AttackKind::Pgd, AttackKind::Mim}, split.test,
                            static_cast<std::size_t>(cfg.integer("eval.n")), seed, acfg, run_options(cfg));
  fs::path dir = cfg.str("out");
  for (std::size_t a = 0; a < tm.attacks.size(); ++a) {
    write_text(dir / ("transfer_" + tm.attacks[a] + ".csv"), to_csv(tm.names, tm.per_attack[a]));
  }
  write_text(dir / "transfer_max.csv", to_csv(tm.names, tm.max));
  write_json(dir / "transfer.json", to_json(tm));
  out << to_csv(tm.names, tm.max);
  return 0;
}

int cmd_multi(RunConfig& cfg, std::ostream& out) {
  auto split = load_split(cfg);
  begin_run("multi-attack", cfg);
  auto owned = load_models(cfg, 2);
  auto models = raw(owned);
  auto acfg = attack_from(cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  auto set = select_eval_set(models, split.test, static_cast<std::size_t>(cfg.integer("eval.n")), seed);
  auto row = multi_model_comparison(models, set, acfg, run_options(cfg));
  fs::path dir = cfg.str("out");
  write_text(dir / "multi.csv", to_csv(std::vector<MultiModelRow>{row}));
  write_json(dir / "multi.json", to_json(row));
  out << to_csv(std::vector<MultiModelRow>{row});
  return 0;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  auto bytes_in = read_text(path);
  std::vector<std::uint8_t> bytes(bytes_in.begin(), bytes_in.end());
  auto ck = decode_checkpoint(bytes);
  const Model& m = *ck.model;
  out << "name " << m.name() << "\n";
  out << "kind " << model_kind_name(m.kind()) << "\n";
  out << "input_shape " << shape_string(m.input_shape()) << "\n";
  out << "classes " << m.num_classes() << "\n";
  out << "seed " << ck.seed << "\n";
  std::size_t count = 0;
  bool finite = true;
  for (const auto& [name, t] : m.parameters()) {
    out << "tensor " << name << ' ' << shape_string(t->shape()) << "\n";
    count += t->size();
    finite = finite && all_finite(*t);
  }
  out << "parameters " << count << "\n";
  out << "architecture " << m.architecture().dump() << "\n";
  out << "config " << ck.config.dump() << "\n";
  bool roundtrip = encode_checkpoint(m, ck.config, ck.seed) == bytes;
  bool probe_ok = true;
  try {
    Tensor probe({1, shape_size(m.input_shape())}, 0.5f);
    auto logits = m.logits(probe);
    probe_ok = all_finite(logits) && logits.row_width() == m.num_classes();
  } catch (const std::exception&) {
    probe_ok = false;
  }
  out << "check finite_weights " << (finite ? "pass" : "FAIL") << "\n";
  out << "check roundtrip " << (roundtrip ? "pass" : "FAIL") << "\n";
  out << "check forward " << (probe_ok ? "pass" : "FAIL") << "\n";
  return finite && roundtrip && probe_ok ? 0 : 1;
}

std::string category(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const SelectionError*>(&e)) return "selection";
  if (dynamic_cast<const TrainingError*>(&e)) return "training";
  if (dynamic_cast<const UnsupportedError*>(&e)) return "unsupported";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const StateError*>(&e)) return "state";
  return "internal";
}

int exit_code(const std::string& cat) {
  if (cat == "config") return 2;
  if (cat == "format") return 3;
  if (cat == "selection") return 4;
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"spiking network adversarial toolkit", "snnadv"};
  app.require_subcommand(1);
  struct Bound {
    CLI::App* app = nullptr;
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> keys;
    std::map<std::string, std::string> aliases;
    std::string checkpoint;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& c : commands()) {
    auto b = std::make_unique<Bound>();
    b->app = app.add_subcommand(c.name, c.help);
    b->app->add_option("--config", b->config_file, "key = value file");
    b->app->add_option("--set", b->sets, "key=value override")->allow_extra_args(false);
    for (const auto& [flag, key] : c.aliases) b->app->add_option(flag, b->aliases[flag], "same as --" + key);
    for (const auto& k : config_keys()) {
      if (c.aliases.count("--" + k.key)) continue;
      b->app->add_option("--" + k.key, b->keys[k.key], k.help);
    }
    if (c.name == "inspect") b->app->add_option("checkpoint", b->checkpoint, "checkpoint path");
    bound.push_back(std::move(b));
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::ParseError& e) {
      for (const auto& b : bound) {
        if (b->app->parsed() && (e.get_name() == "CallForHelp")) {
          out << b->app->help();
          return 0;
        }
      }
      throw ConfigError(e.what());
    }
    for (std::size_t i = 0; i < bound.size(); ++i) {
      Bound& b = *bound[i];
      if (!b.app->parsed()) continue;
      const auto& cmd = commands()[i];
      if (cmd.name == "inspect") {
        std::string path = b.checkpoint;
        if (path.empty() && b.app->count("--model")) path = b.aliases["--model"];
        if (path.empty()) throw ConfigError("inspect: checkpoint path required");
        return cmd_inspect(path, out);
      }
      RunConfig cfg;
      if (!b.config_file.empty()) cfg.merge_file(b.config_file);
      cfg.merge_process_env();
      std::vector<std::string> problems;
      auto apply = [&](const std::string& key, const std::string& value) {
        try {
          cfg.set(key, value);
        } catch (const ConfigError& e) {
          problems.push_back(e.what());
        }
      };
      for (const auto& k : config_keys()) {
        if (b.keys.count(k.key) && b.app->count("--" + k.key)) apply(k.key, b.keys[k.key]);
      }
      for (const auto& [flag, key] : cmd.aliases) {
        if (b.app->count(flag)) apply(key, b.aliases[flag]);
      }
      for (const auto& s : b.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos) {
          problems.push_back("--set " + s + ": expected key=value");
          continue;
        }
        apply(s.substr(0, eq), s.substr(eq + 1));
      }
      if (!problems.empty()) {
        std::string msg;
        for (const auto& p : problems) msg += (msg.empty() ? "" : " ") + p;
        throw ConfigError(msg);
      }
      cfg.validate();
      if (cmd.name == "train") return cmd_train(cfg, out);
      if (cmd.name == "convert") return cmd_convert(cfg, out);
      if (cmd.name == "attack") return cmd_attack(cfg, out);
      if (cmd.name == "sweep-surrogate") return cmd_sweep(cfg, out);
      if (cmd.name == "transfer-matrix") return cmd_transfer(cfg, out);
      if (cmd.name == "multi-attack") return cmd_multi(cfg, out);
    }
    throw ConfigError("no subcommand given");
  } catch (const std::exception& e) {
    std::string cat = category(e);
    err << "error: " << cat << ": " << one_line(e.what()) << "\n";
    return exit_code(cat);
  }
}

}  // namespace snnadv
