#include "ecgadv/attacks.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "ecgadv/error.hpp"
#include "ecgadv/eval.hpp"

namespace ecgadv {

namespace {

constexpr std::array<std::string_view, 3> kMethodNames = {"fgsm", "pgd", "sap"};

// +1 ascends the true-class loss (untargeted), -1 descends the target loss.
double direction(const std::optional<RhythmClass>& target) { return target ? -1.0 : 1.0; }

RhythmClass loss_class(RhythmClass y, const std::optional<RhythmClass>& target) { return target.value_or(y); }

AttackResult finish(const Model& model, const Signal& x, RhythmClass y, AttackMethod method,
                    std::optional<RhythmClass> target, std::vector<double> perturbation, Prediction before) {
  std::vector<double> adv(x.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = x[i] + perturbation[i];
  Signal adversarial(std::move(adv), x.sample_rate_hz());
  const Prediction after = predict(model.spec, model.params, adversarial);

  double linf = 0.0;
  for (double p : perturbation) linf = std::max(linf, std::abs(p));
  const double msd = max_abs_second_difference(perturbation);

  return AttackResult{
      .id = {},
      .label = y,
      .method = method,
      .target = target,
      .original = x,
      .adversarial = std::move(adversarial),
      .perturbation = std::move(perturbation),
      .theta = {},
      .pred_before = before,
      .pred_after = after,
      .eligible = before.cls == y,
      .success = is_adversarial(after.cls, y, target),
      .linf_norm = linf,
      .max_second_diff = msd,
      .trajectory = {},
  };
}

// Runs the PGD recursion in signal space; returns the last iterate.
std::vector<double> pgd_iterate(const Model& model, const Signal& x, RhythmClass y, const AttackConfig& cfg,
                                int steps, std::vector<std::vector<double>>* trajectory) {
  const auto& xs = x.samples();
  const double dir = direction(cfg.target);
  const RhythmClass lc = loss_class(y, cfg.target);
  std::vector<double> cur = xs;
  for (int step = 0; step < steps; ++step) {
    const Tensor g = grad_input(model.spec, model.params, std::span<const double>(cur), lc);
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += dir * cfg.alpha * sign(g[i]);
    cur = clip_inf(cur, xs, cfg.epsilon);
    if (trajectory) trajectory->push_back(cur);
  }
  return cur;
}

}  // namespace

std::string_view to_string(AttackMethod m) noexcept { return kMethodNames[static_cast<std::size_t>(m)]; }

std::optional<AttackMethod> attack_method_from_string(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kMethodNames.size(); ++i) {
    if (kMethodNames[i] == s) return static_cast<AttackMethod>(i);
  }
  return std::nullopt;
}

void AttackConfig::validate(AttackMethod method) const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be positive");
  if (method == AttackMethod::FGSM) return;
  if (!(alpha > 0.0) || alpha > epsilon) throw InvalidArgument("alpha must satisfy 0 < alpha <= epsilon");
  if (steps < 1) throw InvalidArgument("steps must be at least 1");
  if (method == AttackMethod::SAP && init_steps < 0) throw InvalidArgument("init_steps must be non-negative");
}

std::vector<double> clip_inf(std::span<const double> value, std::span<const double> center, double epsilon) {
  if (value.size() != center.size()) {
    throw InvalidArgument("clip_inf: value has " + std::to_string(value.size()) + " entries, center has " +
                          std::to_string(center.size()));
  }
  std::vector<double> out(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    out[i] = std::clamp(value[i], center[i] - epsilon, center[i] + epsilon);
  }
  return out;
}

std::vector<double> clip_inf(std::span<const double> value, double epsilon) {
  std::vector<double> out(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) out[i] = std::clamp(value[i], -epsilon, epsilon);
  return out;
}

AttackResult fgsm(const Model& model, const Signal& x, RhythmClass y, double epsilon,
                  std::optional<RhythmClass> target) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be non-negative");
  const Prediction before = predict(model.spec, model.params, x);
  const Tensor g = grad_input(model.spec, model.params, x, loss_class(y, target));
  const double dir = direction(target);
  std::vector<double> perturbation(x.size());
  for (std::size_t i = 0; i < perturbation.size(); ++i) perturbation[i] = dir * epsilon * sign(g[i]);
  return finish(model, x, y, AttackMethod::FGSM, target, std::move(perturbation), before);
}

AttackResult pgd(const Model& model, const Signal& x, RhythmClass y, const AttackConfig& cfg) {
  cfg.validate(AttackMethod::PGD);
  const Prediction before = predict(model.spec, model.params, x);
  std::vector<std::vector<double>> trajectory;
  const auto last = pgd_iterate(model, x, y, cfg, cfg.steps, cfg.record_trajectory ? &trajectory : nullptr);

  std::vector<double> perturbation(x.size());
  for (std::size_t i = 0; i < perturbation.size(); ++i) perturbation[i] = last[i] - x[i];
  auto result = finish(model, x, y, AttackMethod::PGD, cfg.target, std::move(perturbation), before);
  result.trajectory = std::move(trajectory);
  return result;
}

std::vector<double> sap_theta_gradient(const Model& model, const Signal& x, std::span<const double> theta,
                                       RhythmClass loss_class, const KernelBank& bank) {
  if (theta.size() != x.size()) throw InvalidArgument("theta and signal lengths differ");
  const auto smoothed = bank_smooth(theta, bank);
  std::vector<double> adv(x.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = x[i] + smoothed[i];
  const Tensor g = grad_input(model.spec, model.params, std::span<const double>(adv), loss_class);
  return bank_smooth_adjoint(g.data, bank);
}

AttackResult sap(const Model& model, const Signal& x, RhythmClass y, const AttackConfig& cfg, const KernelBank& bank) {
  cfg.validate(AttackMethod::SAP);
  const Prediction before = predict(model.spec, model.params, x);
  std::vector<std::vector<double>> trajectory;
  auto* traj = cfg.record_trajectory ? &trajectory : nullptr;

  // Warm start: theta is the PGD perturbation of x.
  std::vector<double> theta(x.size(), 0.0);
  if (cfg.init_steps > 0) {
    const auto warm = pgd_iterate(model, x, y, cfg, cfg.init_steps, traj);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = warm[i] - x[i];
  }

  const double dir = direction(cfg.target);
  const RhythmClass lc = loss_class(y, cfg.target);
  for (int step = 0; step < cfg.steps; ++step) {
    const auto g = sap_theta_gradient(model, x, theta, lc, bank);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += dir * cfg.alpha * sign(g[i]);
    theta = clip_inf(theta, cfg.epsilon);
    if (traj) {
      const auto smoothed = bank_smooth(theta, bank);
      std::vector<double> adv(x.size());
      for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = x[i] + smoothed[i];
      traj->push_back(std::move(adv));
    }
  }

  auto result = finish(model, x, y, AttackMethod::SAP, cfg.target, bank_smooth(theta, bank), before);
  result.theta = std::move(theta);
  result.trajectory = std::move(trajectory);
  return result;
}

}  // namespace ecgadv
