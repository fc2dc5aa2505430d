#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "snnadv/model.hpp"

namespace snnadv {

enum class AttackKind { Fgsm, Pgd, Mim, Saga, AutoSaga };

std::string_view attack_name(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);

struct AttackConfig {
  double eps = 0.031;       // l-inf budget
  double eps_step = 0.01;   // per-iteration step (PGD, SAGA, Auto-SAGA)
  int steps = 40;
  double momentum = 1.0;    // MIM decay mu
  double kappa = 0.0;       // Auto-SAGA margin confidence
  double coef_lr = 10000;   // Auto-SAGA coefficient learning rate r
  double fit = 1.0;         // Auto-SAGA sech^2 fitting factor u
  std::vector<double> alpha;  // SAGA weights / Auto-SAGA init; uniform when empty
  bool random_start = true;   // PGD only
  bool normalize_alpha = true;  // Auto-SAGA: clamp >= 0 and renormalize each step
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const AttackConfig& cfg);

/// Per-iteration record for trace comparisons.
struct AttackTrace {
  std::vector<Tensor> iterates;    // x_adv after each iteration
  std::vector<Tensor> directions;  // sign pattern added in each iteration
};

/// Clamp into [x - eps, x + eps], then into [0, 1].
Tensor project(const Tensor& x_adv, const Tensor& x, double eps);

/// Gradient of the summed cross entropy with respect to the input.
Tensor input_gradient(const Model& model, const Tensor& x, const std::vector<int>& labels);

Tensor fgsm(const Model& model, const Tensor& x, const std::vector<int>& labels, double eps);

Tensor pgd(const Model& model, const Tensor& x, const std::vector<int>& labels,
           const AttackConfig& cfg, AttackTrace* trace = nullptr);

/// Momentum iterative method with step eps / steps.
Tensor mim(const Model& model, const Tensor& x, const std::vector<int>& labels,
           const AttackConfig& cfg, AttackTrace* trace = nullptr);

using ModelList = std::vector<const Model*>;

/// Fixed-weight ensemble attack; attention models enter through their
/// rollout saliency, others through the ones mask.
Tensor saga(const ModelList& models, const std::vector<double>& alpha, const Tensor& x,
            const std::vector<int>& labels, const AttackConfig& cfg, AttackTrace* trace = nullptr);

struct AutoSagaResult {
  Tensor x_adv;
  /// alpha_history[i][s][m]: coefficient of model m for sample s before
  /// iteration i; the last entry holds the final coefficients.
  std::vector<std::vector<std::vector<double>>> alpha_history;
  std::size_t collapse_resets = 0;

  std::vector<double> mean_alpha(std::size_t iteration) const;
};

AutoSagaResult auto_saga(const ModelList& models, const Tensor& x, const std::vector<int>& labels,
                         const AttackConfig& cfg, AttackTrace* trace = nullptr);

/// max(s_t - max_{j != t} s_j, -kappa) on softmax probabilities, per row.
/// Positive while the row is classified correctly.
std::vector<double> margin_loss(const Tensor& logits, const std::vector<int>& labels, double kappa);

/// d(margin_loss summed over rows)/d logits.
Tensor margin_loss_grad(const Tensor& logits, const std::vector<int>& labels, double kappa);

struct AttackReport {
  std::vector<std::string> model_names;
  std::vector<std::vector<bool>> success;  // [model][sample]: prediction != label
  std::vector<bool> joint;                 // misclassified by every model
  std::vector<double> linf;                // final l-inf distance per sample
  std::vector<int> iterations;             // iterations run per sample
  std::vector<double> success_rate;        // per model
  double joint_rate = 0.0;
};

AttackReport make_report(const ModelList& models, const Tensor& x, const Tensor& x_adv,
                         const std::vector<int>& labels, int iterations);

nlohmann::json to_json(const AttackReport& report, bool per_sample = true);

}  // namespace snnadv
