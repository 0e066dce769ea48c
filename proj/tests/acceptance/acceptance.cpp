// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "ecgadv/attacks.hpp"
#include "ecgadv/campaign.hpp"
#include "ecgadv/data.hpp"
#include "ecgadv/eval.hpp"
#include "ecgadv/existence.hpp"
#include "ecgadv/kernels.hpp"
#include "ecgadv/nn.hpp"
#include "ecgadv/reports.hpp"
#include "support.hpp"

using namespace ecgadv;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double linf_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double linf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Every attack run in this binary is recorded here for the projection check.
struct ProjectionLedger {
  std::size_t attacks = 0;
  std::size_t violations = 0;
  double worst_excess = -INFINITY;

  void record(const AttackResult& r, double epsilon) {
    ++attacks;
    double norm = linf_diff(r.adversarial.samples(), r.original.samples());
    if (r.method == AttackMethod::SAP) norm = std::max(norm, linf(r.theta));
    worst_excess = std::max(worst_excess, norm - epsilon);
    if (norm > epsilon + 1e-9) ++violations;
  }
  void record(std::span<const AttackResult> rs, double epsilon) {
    for (const auto& r : rs) record(r, epsilon);
  }
};

ProjectionLedger projections;

// Shared between criteria 4 through 8.
struct State {
  std::optional<Model> model;
  std::optional<Dataset> attack_set;
  std::optional<Campaign> pgd_campaign;
  std::optional<Campaign> sap_campaign;
};

State state;

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  testing::GradCheck input, param;
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = testing::random_tiny_spec(rng);
    const auto params = testing::random_params(spec, rng);
    const auto x = testing::random_signal(spec.input_length(), 1.0, rng);
    const auto y = class_at(static_cast<std::size_t>(trial) % kNumClasses);
    input += testing::check_input_gradient(spec, params, x, y, spec.input_length(), rng);
    param += testing::check_param_gradient(spec, params, x, y, 60, rng);
  }
  const double secs = seconds_since(t0);
  const bool ok = input.pass_fraction() >= 0.99 && param.pass_fraction() >= 0.99 && secs < 30.0;
  return {ok, fmt("input %zu/%zu, params %zu/%zu agree (%zu kink-adjacent excluded), worst rel %.2e, %.1f s",
                  input.passed, input.checked, param.passed, param.checked, input.excluded + param.excluded,
                  std::max(input.worst_rel, param.worst_rel), secs)};
}

Verdict kernel_properties() {
  double worst_sum = 0.0, worst_uniform = 0.0, worst_delta = 0.0;
  const auto bank = KernelBank::standard();
  for (const auto& k : bank.kernels()) {
    const auto& w = k.weights();
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
  }
  for (std::size_t size : {3, 5, 7, 11, 15, 19, 41}) {
    const auto wide = gaussian_kernel(size, 1e9);
    for (double v : wide.weights()) worst_uniform = std::max(worst_uniform, std::abs(v - 1.0 / static_cast<double>(size)));
    const auto narrow = gaussian_kernel(size, 1e-6);
    for (std::size_t m = 0; m < size; ++m) {
      const double expected = m == size / 2 ? 1.0 : 0.0;
      worst_delta = std::max(worst_delta, std::abs(narrow.weights()[m] - expected));
    }
    const auto& w = narrow.weights();
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
  }
  const bool ok = worst_sum <= 1e-12 && worst_uniform <= 1e-9 && worst_delta <= 1e-9;
  return {ok, fmt("|sum-1| %.1e, uniform limit %.1e, delta limit %.1e", worst_sum, worst_uniform, worst_delta)};
}

Verdict toy_pipeline() {
  const auto t0 = Clock::now();
  const auto data = generate_synthetic(50, 512, 3);
  const auto [train_set, test_set] = split(data, 0.1, 3);
  const auto spec = ModelSpec::default_architecture(512);
  const auto params = train(spec, train_set, TrainHyper{50, 16, 4e-3, 1});
  const double secs = seconds_since(t0);
  state.model = Model{spec, params};
  const double acc = confusion(*state.model, test_set).accuracy();
  return {acc >= 0.95 && secs < 60.0,
          fmt("test accuracy %.3f on %zu held-out examples, %.1f s", acc, test_set.size(), secs)};
}

Verdict attack_efficacy() {
  if (!state.model) return {false, "no trained model"};
  const auto t0 = Clock::now();
  state.attack_set = generate_synthetic(15, 512, 99);
  auto pgd_cfg = AttackConfig::pgd_defaults();
  pgd_cfg.epsilon = 10.0;
  pgd_cfg.alpha = 1.0;
  pgd_cfg.steps = 20;
  state.pgd_campaign = attack_campaign(*state.model, *state.attack_set, AttackMethod::PGD, pgd_cfg);
  const auto sap_cfg = AttackConfig::sap_defaults();
  state.sap_campaign = attack_campaign(*state.model, *state.attack_set, AttackMethod::SAP, sap_cfg);
  const double secs = seconds_since(t0);
  projections.record(state.pgd_campaign->results, pgd_cfg.epsilon);
  projections.record(state.sap_campaign->results, sap_cfg.epsilon);

  const auto& p = state.pgd_campaign->summary.success;
  const auto& s = state.sap_campaign->summary.success;
  const double pr = p.rate.value_or(0.0), sr = s.rate.value_or(0.0);
  return {pr >= 0.70 && sr >= 0.60 && secs < 300.0,
          fmt("PGD %zu/%zu = %.3f, SAP %zu/%zu = %.3f on %zu unseen examples, %.1f s", p.n_success, p.n_eligible, pr,
              s.n_success, s.n_eligible, sr, state.attack_set->size(), secs)};
}

Verdict smoothness_contrast() {
  if (!state.pgd_campaign || !state.sap_campaign) return {false, "no campaigns"};
  std::vector<double> pgd_d, sap_d;
  for (std::size_t i = 0; i < state.attack_set->size(); ++i) {
    pgd_d.push_back(max_abs_second_difference(state.pgd_campaign->results[i].perturbation));
    sap_d.push_back(max_abs_second_difference(state.sap_campaign->results[i].perturbation));
  }
  const double mp = median(pgd_d), ms = median(sap_d);
  return {pgd_d.size() >= 50 && ms < mp,
          fmt("median max |second difference|: SAP %.4f vs PGD %.4f over %zu examples", ms, mp, pgd_d.size())};
}

Verdict sap_reduction() {
  if (!state.model) return {false, "no trained model"};
  const KernelBank delta({gaussian_kernel(5, 1e-6)});
  auto s = AttackConfig::sap_defaults();
  s.record_trajectory = true;
  auto p = AttackConfig::pgd_defaults();
  p.epsilon = s.epsilon;
  p.alpha = s.alpha;
  p.steps = s.init_steps + s.steps;
  p.record_trajectory = true;
  double worst = 0.0;
  std::size_t iterates = 0;
  bool shapes_match = true;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& ex = (*state.attack_set)[i * 12];
    s.target = p.target = campaign_target(ex.label);
    const auto a = sap(*state.model, ex.signal, ex.label, s, delta);
    const auto b = pgd(*state.model, ex.signal, ex.label, p);
    projections.record(a, s.epsilon);
    projections.record(b, p.epsilon);
    if (a.trajectory.size() != b.trajectory.size() || a.trajectory.empty()) {
      shapes_match = false;
      continue;
    }
    for (std::size_t k = 0; k < a.trajectory.size(); ++k) worst = std::max(worst, linf_diff(a.trajectory[k], b.trajectory[k]));
    worst = std::max(worst, linf_diff(a.adversarial.samples(), b.adversarial.samples()));
    iterates += a.trajectory.size();
  }
  return {shapes_match && worst <= 1e-9,
          fmt("max elementwise gap %.2e over %zu iterates on 5 fixtures", worst, iterates)};
}

Verdict existence() {
  if (!state.sap_campaign) return {false, "no SAP campaign"};
  const auto t0 = Clock::now();
  const auto bank = KernelBank::standard();
  std::vector<const AttackResult*> fixtures;
  for (const auto& r : state.sap_campaign->results) {
    if (r.eligible && r.success && fixtures.size() < 10) fixtures.push_back(&r);
  }
  if (fixtures.size() < 10) return {false, fmt("only %zu adversarial examples", fixtures.size())};

  auto run_all = [&] {
    std::vector<ExistenceReport> out;
    for (std::size_t i = 0; i < fixtures.size(); ++i) {
      const auto& r = *fixtures[i];
      ExistenceConfig cfg;
      cfg.n = 1000;
      cfg.seed = 100 + i;
      out.push_back(existence_experiment(*state.model, r.original, r.adversarial, r.label, r.target, bank, cfg));
    }
    return out;
  };
  const auto first = run_all();
  const double secs = seconds_since(t0);
  const auto second = run_all();

  bool identical = true;
  for (std::size_t i = 0; i < first.size(); ++i) {
    identical = identical && first[i] == second[i] &&
                existence_report_to_json(first[i]) == existence_report_to_json(second[i]);
  }
  double g = 0.0, u = 0.0, c = 0.0;
  std::size_t n_c = 0;
  for (const auto& r : first) {
    g += r.frac_gaussian_adversarial;
    u += r.frac_uniform_adversarial;
    if (r.frac_concat_adversarial) {
      c += *r.frac_concat_adversarial;
      ++n_c;
    }
  }
  const double k = static_cast<double>(first.size());
  g /= k;
  u /= k;
  const double cm = n_c ? c / static_cast<double>(n_c) : 0.0;
  return {g >= 0.5 && identical && secs < 600.0,
          fmt("mean fractions over %zu examples: gaussian %.3f, uniform %.3f, concatenated %.3f; rerun %s; %.1f s",
              first.size(), g, u, cm, identical ? "bit-exact" : "DIFFERS", secs)};
}

Verdict metric_oracles() {
  using RC = RhythmClass;
  const std::vector<RC> truth{RC::Normal, RC::Normal, RC::AF, RC::AF, RC::Other, RC::Noise};
  const std::vector<RC> pred{RC::Normal, RC::AF, RC::AF, RC::AF, RC::Normal, RC::Noise};
  std::vector<LabeledExample> ex;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ex.push_back({"e" + std::to_string(i), truth[i], Signal(std::vector<double>(16, static_cast<double>(i)), 1.0)});
  }
  const auto cm = confusion(Dataset(ex), [&](const Signal& s) { return pred[static_cast<std::size_t>(s[0])]; });
  std::vector<std::string> failures;

  const std::array<std::array<std::size_t, 4>, 4> expected{{{1, 1, 0, 0}, {0, 2, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}}};
  if (cm.counts != expected) failures.push_back("confusion");
  if (cm.accuracy() != 4.0 / 6.0) failures.push_back("accuracy");

  const auto f1 = f1_scores(cm);
  const std::array<double, 4> f1_expected{2.0 / 4.0, 4.0 / 5.0, 0.0, 1.0};
  if (f1.f1 != f1_expected) failures.push_back("f1");
  if (std::abs(f1.mean_rhythm - (0.5 + 0.8) / 3.0) > 1e-15) failures.push_back("mean f1");

  const auto pair = f1_scores(ConfusionMatrix{{{{2, 1, 0, 0}, {1, 2, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}}});
  if (pair.f1[0] != 2.0 / 3.0 || pair.f1[1] != 2.0 / 3.0 || !pair.degenerate[2]) failures.push_back("f1 pair");

  auto outcome = [](bool eligible, bool success) {
    const Signal flat(std::vector<double>(16, 0.0), 1.0);
    return AttackResult{.id = "r",
                        .label = RC::Normal,
                        .method = AttackMethod::PGD,
                        .target = std::nullopt,
                        .original = flat,
                        .adversarial = flat,
                        .perturbation = std::vector<double>(16, 0.0),
                        .theta = {},
                        .pred_before = {RC::Normal, 1.0},
                        .pred_after = {RC::Normal, 1.0},
                        .eligible = eligible,
                        .success = success,
                        .linf_norm = 0.0,
                        .max_second_diff = 0.0,
                        .trajectory = {}};
  };
  const std::vector<AttackResult> mixed{outcome(true, true), outcome(true, false), outcome(false, false),
                                        outcome(true, true)};
  const auto sr = success_rate(mixed);
  if (sr.n_eligible != 3 || sr.n_success != 2 || sr.rate != 2.0 / 3.0) failures.push_back("success rate");
  const std::vector<AttackResult> none{outcome(false, false), outcome(false, false)};
  const auto sn = success_rate(none);
  if (sn.n_eligible != 0 || sn.rate.has_value()) failures.push_back("success rate with nothing eligible");

  std::string detail = "confusion, accuracy, F1, mean F1 and success rate match hand tallies";
  if (!failures.empty()) {
    detail = "mismatch:";
    for (const auto& f : failures) detail += " " + f;
  }
  return {failures.empty(), detail};
}

// Runs the full command-line pipeline inside `dir` with relative paths.
bool run_pipeline(const fs::path& dir, std::string& log) {
  const auto previous = fs::current_path();
  fs::current_path(dir);
  const std::vector<std::vector<std::string>> steps{
      {"gen-data", "--out", "data", "--n-per-class", "8", "--seed", "5"},
      {"train", "--data", "data/dataset.jsonl", "--out", "model", "--epochs", "8", "--test-fraction", "0.25",
       "--seed", "5"},
      {"eval", "--model", "model/model.sapw", "--data", "model/test.jsonl", "--out", "eval"},
      {"attack", "--model", "model/model.sapw", "--data", "model/test.jsonl", "--out", "sap", "--method", "sap"},
      {"attack", "--model", "model/model.sapw", "--data", "model/test.jsonl", "--out", "pgd", "--method", "pgd"},
      {"band", "--model", "model/model.sapw", "--campaign", "sap/campaign.jsonl", "--out", "band", "--n", "200",
       "--max-examples", "2", "--seed", "5"},
  };
  bool ok = true;
  std::ostringstream out, err;
  for (const auto& args : steps) {
    if (cli::run(args, out, err) != cli::kExitOk) {
      ok = false;
      log = args[0] + ": " + err.str();
      break;
    }
  }
  if (ok) {
    std::vector<std::string> plot{"plot", "--campaign", "sap/campaign.jsonl", "--out", "plots", "--limit", "4",
                                  "--bands"};
    for (const auto& e : fs::directory_iterator("band")) {
      const auto name = e.path().filename().string();
      if (name.starts_with("band_") && name != "band_summary.json") plot.push_back("band/" + name);
    }
    std::sort(plot.begin() + 8, plot.end());
    if (cli::run(plot, out, err) != cli::kExitOk) {
      ok = false;
      log = "plot: " + err.str();
    }
  }
  fs::current_path(previous);
  return ok;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = testing::slurp(e.path());
  }
  return files;
}

Verdict determinism() {
  testing::TempDir a("accept-a"), b("accept-b");
  std::string log;
  if (!run_pipeline(a.path(), log) || !run_pipeline(b.path(), log)) return {false, "pipeline failed: " + log};
  const auto fa = snapshot(a.path()), fb = snapshot(b.path());

  for (const char* dir : {"sap", "pgd"}) {
    const auto results = campaign_from_jsonl(fa.at(std::string(dir) + "/campaign.jsonl"));
    projections.record(results, 10.0);
  }

  std::size_t svgs = 0;
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : fa) {
    const auto it = fb.find(name);
    if (it == fb.end() || it->second != bytes) differing.push_back(name);
    svgs += name.ends_with(".svg");
  }
  for (const auto& [name, bytes] : fb) {
    if (!fa.count(name)) differing.push_back(name);
  }
  const bool has_all = fa.count("model/model.sapw") && fa.count("sap/campaign.jsonl") &&
                       fa.count("band/band_summary.json") && fa.count("eval/metrics.json") && svgs > 0;
  if (!differing.empty()) return {false, "differs: " + differing.front()};
  return {has_all, fmt("%zu files identical across two runs (%zu SVGs)", fa.size(), svgs)};
}

Verdict projection_invariant() {
  return {projections.violations == 0 && projections.attacks > 0,
          fmt("%zu violations over %zu attacks, max excess over epsilon %.2e", projections.violations,
              projections.attacks, projections.worst_excess)};
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    std::function<Verdict()> check;
  };
  // The projection check runs last so that it covers every attack above.
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness},
      {3, "kernel properties", kernel_properties},
      {4, "toy pipeline", toy_pipeline},
      {5, "attack efficacy", attack_efficacy},
      {6, "smoothness contrast", smoothness_contrast},
      {7, "SAP reduction", sap_reduction},
      {8, "existence experiment", existence},
      {9, "metric oracles", metric_oracles},
      {10, "determinism", determinism},
      {2, "projection invariant", projection_invariant},
  };
  std::map<int, std::pair<std::string, Verdict>> results;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cerr << "  [" << c.number << "] done\n";
    results[c.number] = {c.name, v};
  }
  int failed = 0;
  for (const auto& [number, entry] : results) {
    const auto& [name, v] = entry;
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << number << ". " << name << ": " << v.detail << '\n';
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << '\n';
  return failed ? 1 : 0;
}
