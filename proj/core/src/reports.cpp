#include "ecgadv/reports.hpp"

#include <iomanip>
#include <sstream>

#include "ecgadv/error.hpp"
#include "json.hpp"

namespace ecgadv {

using json = nlohmann::ordered_json;

namespace {

json prediction_json(const Prediction& p) { return {{"class", std::string(to_string(p.cls))}, {"confidence", p.confidence}}; }

Prediction prediction_from(const json& j) {
  const auto cls = rhythm_from_string(j.at("class").get<std::string>());
  if (!cls) throw ValidationError("unknown class in prediction");
  return {*cls, j.at("confidence").get<double>()};
}

json distribution_json(const Distribution& d) {
  return {{"mean", d.mean}, {"p50", d.p50}, {"p90", d.p90}, {"max", d.max}};
}

json optional_rate(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string attack_result_to_json(const AttackResult& r) {
  json j;
  j["id"] = r.id;
  j["label"] = std::string(to_string(r.label));
  j["method"] = std::string(to_string(r.method));
  j["target"] = r.target ? json(std::string(to_string(*r.target))) : json(nullptr);
  j["fs"] = r.original.sample_rate_hz();
  j["original"] = r.original.samples();
  j["adversarial"] = r.adversarial.samples();
  j["perturbation"] = r.perturbation;
  j["theta"] = r.theta;
  j["pred_before"] = prediction_json(r.pred_before);
  j["pred_after"] = prediction_json(r.pred_after);
  j["eligible"] = r.eligible;
  j["success"] = r.success;
  j["linf_norm"] = r.linf_norm;
  j["max_second_diff"] = r.max_second_diff;
  return j.dump();
}

AttackResult attack_result_from_json(std::string_view line) {
  const json j = json::parse(line);
  const auto label = rhythm_from_string(j.at("label").get<std::string>());
  const auto method = attack_method_from_string(j.at("method").get<std::string>());
  if (!label) throw ValidationError("unknown label in attack record");
  if (!method) throw ValidationError("unknown attack method in attack record");
  std::optional<RhythmClass> target;
  if (!j.at("target").is_null()) {
    target = rhythm_from_string(j.at("target").get<std::string>());
    if (!target) throw ValidationError("unknown target class in attack record");
  }
  const double fs = j.at("fs").get<double>();
  return AttackResult{
      .id = j.at("id").get<std::string>(),
      .label = *label,
      .method = *method,
      .target = target,
      .original = Signal(j.at("original").get<std::vector<double>>(), fs),
      .adversarial = Signal(j.at("adversarial").get<std::vector<double>>(), fs),
      .perturbation = j.at("perturbation").get<std::vector<double>>(),
      .theta = j.at("theta").get<std::vector<double>>(),
      .pred_before = prediction_from(j.at("pred_before")),
      .pred_after = prediction_from(j.at("pred_after")),
      .eligible = j.at("eligible").get<bool>(),
      .success = j.at("success").get<bool>(),
      .linf_norm = j.at("linf_norm").get<double>(),
      .max_second_diff = j.at("max_second_diff").get<double>(),
      .trajectory = {},
  };
}

std::string campaign_to_jsonl(std::span<const AttackResult> results) {
  std::string out;
  for (const auto& r : results) {
    out += attack_result_to_json(r);
    out += '\n';
  }
  return out;
}

std::vector<AttackResult> campaign_from_jsonl(std::string_view text) {
  std::vector<AttackResult> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(attack_result_from_json(line));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad attack record: ") + e.what(), line_no);
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

std::string campaign_summary_to_json(const CampaignSummary& summary, const std::optional<KernelBank>& bank) {
  json config;
  config["epsilon"] = summary.config.epsilon;
  if (summary.method != AttackMethod::FGSM) {
    config["alpha"] = summary.config.alpha;
    config["steps"] = summary.config.steps;
  }
  if (summary.method == AttackMethod::SAP) {
    config["init_steps"] = summary.config.init_steps;
    if (bank) {
      json sizes = json::array(), sigmas = json::array();
      for (const auto& k : bank->kernels()) {
        sizes.push_back(k.size());
        sigmas.push_back(k.sigma());
      }
      config["kernel_sizes"] = sizes;
      config["kernel_sigmas"] = sigmas;
    }
  }
  json j;
  j["method"] = std::string(to_string(summary.method));
  j["config"] = config;
  j["n_eligible"] = summary.success.n_eligible;
  j["n_success"] = summary.success.n_success;
  j["success_rate"] = optional_rate(summary.success.rate);
  j["smoothness_stats"] = {{"count", summary.smoothness.count},
                           {"max_second_diff", distribution_json(summary.smoothness.max_second_diff)},
                           {"total_variation", distribution_json(summary.smoothness.total_variation)}};
  return j.dump(2) + "\n";
}

std::string existence_report_to_json(const ExistenceReport& report, const std::string& id) {
  json j;
  if (!id.empty()) j["id"] = id;
  j["n"] = report.n;
  j["frac_gaussian_adversarial"] = report.frac_gaussian_adversarial;
  j["frac_uniform_adversarial"] = report.frac_uniform_adversarial;
  j["frac_concat_adversarial"] = optional_rate(report.frac_concat_adversarial);
  j["n_concat"] = report.n_concat;
  j["band"] = {{"min", report.band.min}, {"max", report.band.max}};
  j["seed"] = report.seed;
  return j.dump() + "\n";
}

IdentifiedExistenceReport existence_report_from_json(std::string_view text) {
  IdentifiedExistenceReport out;
  try {
    const json j = json::parse(text);
    if (j.contains("id")) out.id = j["id"].get<std::string>();
    auto& r = out.report;
    r.n = j.at("n").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.frac_gaussian_adversarial = j.at("frac_gaussian_adversarial").get<double>();
    r.frac_uniform_adversarial = j.at("frac_uniform_adversarial").get<double>();
    if (!j.at("frac_concat_adversarial").is_null()) {
      r.frac_concat_adversarial = j["frac_concat_adversarial"].get<double>();
    }
    r.n_concat = j.value("n_concat", std::size_t{0});
    r.band.min = j.at("band").at("min").get<std::vector<double>>();
    r.band.max = j.at("band").at("max").get<std::vector<double>>();
    r.band.n = r.n;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad existence report: ") + e.what(), 1);
  }
  return out;
}

std::string metrics_report_to_json(const MetricsReport& report) {
  json j;
  j["accuracy"] = report.accuracy;
  json f1, degenerate;
  for (RhythmClass c : kAllClasses) {
    f1[std::string(to_string(c))] = report.f1.f1[index_of(c)];
    degenerate[std::string(to_string(c))] = report.f1.degenerate[index_of(c)];
  }
  j["f1"] = f1;
  j["f1_degenerate"] = degenerate;
  j["mean_f1"] = report.f1.mean_rhythm;
  json rows = json::array();
  for (const auto& row : report.confusion.counts) rows.push_back(row);
  j["confusion"] = rows;
  j["n"] = report.confusion.total();
  if (report.attack_success) {
    j["attack_success_rate"] = optional_rate(report.attack_success->rate);
    j["n_eligible"] = report.attack_success->n_eligible;
    j["n_success"] = report.attack_success->n_success;
  }
  if (report.smoothness) {
    j["smoothness"] = {{"max_second_diff", distribution_json(report.smoothness->max_second_diff)},
                       {"total_variation", distribution_json(report.smoothness->total_variation)}};
  }
  return j.dump(2) + "\n";
}

std::string metrics_report_table(const MetricsReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "accuracy  " << report.accuracy << "   (n = " << report.confusion.total() << ")\n";
  out << "mean F1   " << report.f1.mean_rhythm << "   (Normal, AF, Other)\n\n";
  out << std::left << std::setw(10) << "true\\pred";
  for (RhythmClass c : kAllClasses) out << std::right << std::setw(8) << to_string(c);
  out << std::right << std::setw(10) << "F1" << "\n";
  for (RhythmClass r : kAllClasses) {
    out << std::left << std::setw(10) << to_string(r);
    for (RhythmClass c : kAllClasses) out << std::right << std::setw(8) << report.confusion.counts[index_of(r)][index_of(c)];
    out << std::right << std::setw(10) << report.f1.f1[index_of(r)];
    if (report.f1.degenerate[index_of(r)]) out << " (absent)";
    out << "\n";
  }
  return out.str();
}

}  // namespace ecgadv
