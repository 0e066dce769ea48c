#include "ecgadv/campaign.hpp"

namespace ecgadv {

std::optional<RhythmClass> campaign_target(RhythmClass label) noexcept {
  if (label == RhythmClass::AF) return RhythmClass::Normal;
  return std::nullopt;
}

Campaign attack_campaign(const Model& model, const Dataset& dataset, AttackMethod method, const AttackConfig& cfg,
                         const std::optional<KernelBank>& bank) {
  cfg.validate(method);
  const KernelBank smoothing = bank.value_or(KernelBank::standard());

  Campaign campaign;
  campaign.results.reserve(dataset.size());
  for (const auto& ex : dataset) {
    AttackConfig per = cfg;
    per.target = campaign_target(ex.label);
    AttackResult r = [&] {
      switch (method) {
        case AttackMethod::FGSM: return fgsm(model, ex.signal, ex.label, per.epsilon, per.target);
        case AttackMethod::PGD: return pgd(model, ex.signal, ex.label, per);
        case AttackMethod::SAP: return sap(model, ex.signal, ex.label, per, smoothing);
      }
      return pgd(model, ex.signal, ex.label, per);
    }();
    r.id = ex.id;
    campaign.results.push_back(std::move(r));
  }
  campaign.summary = {method, cfg, success_rate(campaign.results), smoothness_stats(campaign.results)};
  campaign.summary.config.target.reset();
  return campaign;
}

}  // namespace ecgadv
