#pragma once

#include <optional>
#include <vector>

#include "ecgadv/attacks.hpp"
#include "ecgadv/eval.hpp"

namespace ecgadv {

struct CampaignSummary {
  AttackMethod method;
  AttackConfig config;
  SuccessRate success;
  SmoothnessStats smoothness;
};

struct Campaign {
  std::vector<AttackResult> results;
  CampaignSummary summary;
};

/// Attacks every example in `dataset`. AF recordings are pushed towards Normal;
/// the other classes are attacked untargeted. `cfg.target` is ignored and set
/// per example. `bank` is only used by SAP and defaults to KernelBank::standard().
Campaign attack_campaign(const Model& model, const Dataset& dataset, AttackMethod method, const AttackConfig& cfg,
                         const std::optional<KernelBank>& bank = std::nullopt);

/// The goal the campaign uses for an example of class `label`.
std::optional<RhythmClass> campaign_target(RhythmClass label) noexcept;

}  // namespace ecgadv
