#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecgadv/attacks.hpp"
#include "ecgadv/campaign.hpp"
#include "ecgadv/eval.hpp"
#include "ecgadv/existence.hpp"

namespace ecgadv {

// Campaign JSONL: one AttackResult per line, signals inline.
std::string attack_result_to_json(const AttackResult& r);
AttackResult attack_result_from_json(std::string_view line);
std::string campaign_to_jsonl(std::span<const AttackResult> results);
/// Throws ParseError naming the offending line.
std::vector<AttackResult> campaign_from_jsonl(std::string_view text);

std::string campaign_summary_to_json(const CampaignSummary& summary, const std::optional<KernelBank>& bank);

/// `id` names the attacked example and is included when non-empty.
std::string existence_report_to_json(const ExistenceReport& report, const std::string& id = {});
struct IdentifiedExistenceReport {
  std::string id;
  ExistenceReport report;
};
IdentifiedExistenceReport existence_report_from_json(std::string_view text);

std::string metrics_report_to_json(const MetricsReport& report);
/// Aligned plain-text rendering of a metrics report.
std::string metrics_report_table(const MetricsReport& report);

}  // namespace ecgadv
