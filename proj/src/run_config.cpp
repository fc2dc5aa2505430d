#include "snnadv/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "snnadv/errors.hpp"

extern char** environ;

namespace snnadv {

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"data.images", KeyType::String, "", "IDX image file"},
      {"data.labels", KeyType::String, "", "IDX label file"},
      {"data.train_count", KeyType::Int, "8000", "leading samples used for training"},
      {"model", KeyType::String, "", "checkpoint to load"},
      {"models", KeyType::StringList, "", "comma separated checkpoints"},
      {"model.kind", KeyType::String, "snn", "ann | cnn | snn | attention"},
      {"model.hidden", KeyType::Int, "128", "hidden width of dense nets"},
      {"model.timesteps", KeyType::Int, "8", "SNN simulation steps"},
      {"model.leak", KeyType::Real, "0.9", "SNN membrane leak"},
      {"model.threshold", KeyType::Real, "1.0", "SNN firing threshold"},
      {"model.reset", KeyType::String, "hard", "hard | soft"},
      {"model.readout", KeyType::String, "integrator", "integrator | spikecount"},
      {"model.name", KeyType::String, "", "name stored in the checkpoint"},
      {"train.epochs", KeyType::Int, "5", "training epochs"},
      {"train.batch", KeyType::Int, "64", "mini-batch size"},
      {"train.optimizer", KeyType::String, "", "adam | sgd (default by model kind)"},
      {"train.lr", KeyType::Real, "0", "learning rate (0 = optimizer default)"},
      {"train.momentum", KeyType::Real, "0.9", "SGD momentum"},
      {"surrogate.kind", KeyType::String, "arctan", "backward kernel"},
      {"surrogate.threshold", KeyType::Real, "1.0", "kernel centre"},
      {"surrogate.sigma", KeyType::Real, "0.4", "erfc width"},
      {"surrogate.alpha", KeyType::Real, "1.0", "pwe scale / rectangular width"},
      {"surrogate.beta", KeyType::Real, "5.0", "pwe decay"},
      {"surrogate.literal_pwe", KeyType::Bool, "false", "reciprocal piecewise-exp form"},
      {"surrogate.conventional_fastsigmoid", KeyType::Bool, "false", "1/(1+|d|)^2 form"},
      {"attack.kind", KeyType::String, "pgd", "fgsm | pgd | mim | saga | autosaga"},
      {"attack.eps", KeyType::Real, "0.031", "l-inf budget"},
      {"attack.eps_step", KeyType::Real, "0.01", "per-iteration step"},
      {"attack.steps", KeyType::Int, "40", "iterations"},
      {"attack.mu", KeyType::Real, "1.0", "MIM momentum"},
      {"attack.kappa", KeyType::Real, "0", "Auto-SAGA confidence"},
      {"attack.r", KeyType::Real, "10000", "Auto-SAGA coefficient rate"},
      {"attack.u", KeyType::Real, "1.0", "Auto-SAGA fitting factor"},
      {"attack.alpha", KeyType::RealList, "", "SAGA weights / Auto-SAGA init"},
      {"attack.random_start", KeyType::Bool, "true", "PGD random start"},
      {"attack.normalize_alpha", KeyType::Bool, "true", "Auto-SAGA clamp + renormalize"},
      {"convert.mode", KeyType::String, "weight", "weight | threshold balancing"},
      {"convert.percentile", KeyType::Real, "99.9", "activation percentile"},
      {"convert.timesteps", KeyType::Int, "16", "converted SNN steps"},
      {"convert.finetune_epochs", KeyType::Int, "1", "surrogate fine-tune epochs"},
      {"convert.calib", KeyType::Int, "1000", "calibration samples"},
      {"eval.n", KeyType::Int, "200", "evaluation set size"},
      {"sweep.eps", KeyType::RealList, "0.0062,0.0124,0.0186,0.0248,0.031", "sweep budgets"},
      {"sweep.surrogates", KeyType::StringList, "sigmoid,erfc,arctan,pwl,fastsigmoid,pwe,rectangular",
       "sweep kernels"},
      {"sweep.step_ratio", KeyType::Real, "2.5", "PGD step = ratio * eps / steps"},
      {"seed", KeyType::Int, "0", "master seed"},
      {"out", KeyType::String, "out", "output directory"},
      {"jobs", KeyType::Int, "1", "worker threads"},
  };
  return keys;
}

namespace {

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : config_keys()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

bool parse_int(const std::string& s, long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtol(s.c_str(), &end, 10);
  return end == s.c_str() + s.size();
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

std::string check_value(const KeySpec& k, const std::string& v) {
  double d;
  long l;
  bool b;
  switch (k.type) {
    case KeyType::String:
    case KeyType::StringList: return "";
    case KeyType::Int: return parse_int(v, l) ? "" : "expected an integer";
    case KeyType::Real: return parse_real(v, d) ? "" : "expected a number";
    case KeyType::Bool: return parse_bool(v, b) ? "" : "expected true/false";
    case KeyType::RealList:
      for (const auto& item : split_list(v)) {
        if (!parse_real(item, d)) return "expected a comma separated list of numbers";
      }
      return "";
  }
  return "";
}

}  // namespace

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string env_name(const std::string& key) {
  std::string out = "SNNADV_";
  for (char c : key) {
    out += (c == '.' || c == '-') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.key] = k.default_value;
}

void RunConfig::stage(const std::string& key, const std::string& value, const std::string& origin) {
  const KeySpec* spec = find_key(key);
  if (!spec) {
    pending_errors_.push_back(key + ": unknown key (" + origin + ")");
    return;
  }
  std::string problem = check_value(*spec, value);
  if (!problem.empty()) {
    pending_errors_.push_back(key + ": " + problem + ", got '" + value + "' (" + origin + ")");
    return;
  }
  values_[key] = value;
}

void RunConfig::flush_errors() {
  if (pending_errors_.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& e : pending_errors_) msg += " [" + e + "]";
  pending_errors_.clear();
  throw ConfigError(msg);
}

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) {
      pending_errors_.push_back(line + ": missing '=' (" + where + ")");
      continue;
    }
    stage(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
  }
  flush_errors();
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str(), path);
}

void RunConfig::merge_env(const std::vector<std::string>& entries) {
  std::map<std::string, std::string> by_env;
  for (const auto& k : config_keys()) by_env[env_name(k.key)] = k.key;
  for (const auto& e : entries) {
    if (e.rfind("SNNADV_", 0) != 0) continue;
    auto eq = e.find('=');
    std::string name = e.substr(0, eq);
    std::string value = eq == std::string::npos ? "" : e.substr(eq + 1);
    auto it = by_env.find(name);
    if (it == by_env.end()) {
      pending_errors_.push_back(name + ": unknown key (environment)");
      continue;
    }
    stage(it->second, value, "environment");
  }
  flush_errors();
}

void RunConfig::merge_process_env() {
  std::vector<std::string> entries;
  for (char** e = environ; e && *e; ++e) entries.emplace_back(*e);
  merge_env(entries);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  stage(key, value, "command line");
  flush_errors();
}

void RunConfig::validate() const {
  std::vector<std::string> errors;
  for (const auto& [key, value] : values_) {
    const KeySpec* spec = find_key(key);
    if (!spec) {
      errors.push_back(key + ": unknown key");
      continue;
    }
    std::string problem = check_value(*spec, value);
    if (!problem.empty()) errors.push_back(key + ": " + problem);
  }
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += " [" + e + "]";
    throw ConfigError(msg);
  }
}

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key + ": unknown key");
  return it->second;
}

long RunConfig::integer(const std::string& key) const {
  long v;
  if (!parse_int(str(key), v)) throw ConfigError(key + ": expected an integer");
  return v;
}

double RunConfig::real(const std::string& key) const {
  double v;
  if (!parse_real(str(key), v)) throw ConfigError(key + ": expected a number");
  return v;
}

bool RunConfig::flag(const std::string& key) const {
  bool v;
  if (!parse_bool(str(key), v)) throw ConfigError(key + ": expected true/false");
  return v;
}

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(str(key))) {
    double v;
    if (!parse_real(item, v)) throw ConfigError(key + ": expected numbers");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> RunConfig::strings(const std::string& key) const { return split_list(str(key)); }

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace snnadv
