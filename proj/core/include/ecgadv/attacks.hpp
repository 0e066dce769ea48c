#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecgadv/data.hpp"
#include "ecgadv/kernels.hpp"
#include "ecgadv/nn.hpp"

namespace ecgadv {

enum class AttackMethod { FGSM, PGD, SAP };

std::string_view to_string(AttackMethod m) noexcept;
std::optional<AttackMethod> attack_method_from_string(std::string_view s) noexcept;

struct AttackConfig {
  double epsilon = 10.0;  // infinity-norm budget, raw signal units
  double alpha = 1.0;     // step size
  int steps = 20;         // PGD iterations, or theta iterations for SAP
  int init_steps = 20;    // SAP only: PGD iterations used to warm-start theta
  /// nullopt: untargeted (ascend the loss of the true class).
  /// Otherwise descend the loss of the target class.
  std::optional<RhythmClass> target;
  /// Keep every iterate in AttackResult::trajectory.
  bool record_trajectory = false;

  static AttackConfig pgd_defaults() { return {}; }
  static AttackConfig sap_defaults() { return {10.0, 1.0, 40, 20, std::nullopt, false}; }

  /// Throws InvalidArgument unless epsilon > 0, 0 < alpha <= epsilon, steps >= 1.
  void validate(AttackMethod method) const;
};

struct AttackResult {
  std::string id;
  RhythmClass label;
  AttackMethod method;
  std::optional<RhythmClass> target;
  Signal original;
  Signal adversarial;                   // original + perturbation, elementwise
  std::vector<double> perturbation;
  std::vector<double> theta;            // SAP parameter; empty for FGSM/PGD
  Prediction pred_before;
  Prediction pred_after;
  bool eligible;                        // model was correct before the attack
  bool success;                         // goal reached after the attack
  double linf_norm;
  double max_second_diff;
  std::vector<std::vector<double>> trajectory;  // adversarial iterates, when recorded
};

/// sign(0) == 0.
inline double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Clamps each value[i] into [center[i] - epsilon, center[i] + epsilon].
std::vector<double> clip_inf(std::span<const double> value, std::span<const double> center, double epsilon);
/// Clamps around zero.
std::vector<double> clip_inf(std::span<const double> value, double epsilon);

/// Single signed-gradient step of size epsilon.
AttackResult fgsm(const Model& model, const Signal& x, RhythmClass y, double epsilon,
                  std::optional<RhythmClass> target = std::nullopt);

/// Projected gradient descent in signal space, starting from x.
AttackResult pgd(const Model& model, const Signal& x, RhythmClass y, const AttackConfig& cfg);

/// Smooth adversarial perturbation: theta is warm-started with
/// pgd(init_steps), then iterated in theta space with the clip around zero.
/// The adversarial example is x + bank_smooth(theta).
AttackResult sap(const Model& model, const Signal& x, RhythmClass y, const AttackConfig& cfg, const KernelBank& bank);

/// The gradient of the attack objective w.r.t. theta at x + bank_smooth(theta).
/// Exposed for verification.
std::vector<double> sap_theta_gradient(const Model& model, const Signal& x, std::span<const double> theta,
                                       RhythmClass loss_class, const KernelBank& bank);

/// Goal test shared by attacks and the existence experiments.
inline bool is_adversarial(RhythmClass predicted, RhythmClass label, std::optional<RhythmClass> target) noexcept {
  return target ? predicted == *target : predicted != label;
}

}  // namespace ecgadv
