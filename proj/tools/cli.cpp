#include "cli.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "ecgadv/campaign.hpp"
#include "ecgadv/data.hpp"
#include "ecgadv/error.hpp"
#include "ecgadv/eval.hpp"
#include "ecgadv/existence.hpp"
#include "ecgadv/nn.hpp"
#include "ecgadv/reports.hpp"
#include "json.hpp"
#include "svg.hpp"

namespace ecgadv::cli {

namespace fs = std::filesystem;

namespace {

struct GenDataArgs {
  fs::path out;
  std::size_t n_per_class = 50;
  std::size_t length = 512;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  fs::path data;
  fs::path out;
  int epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 4e-3;
  double test_fraction = 0.1;
  std::size_t input_length = 512;
  std::uint64_t seed = 0;
};

struct EvalArgs {
  fs::path model;
  fs::path data;
  fs::path out;
  std::uint64_t seed = 0;
};

struct AttackArgs {
  fs::path model;
  fs::path data;
  fs::path out;
  std::string method = "sap";
  double epsilon = 10.0;
  double alpha = 1.0;
  std::optional<int> steps;
  int init_steps = 20;
  std::vector<std::size_t> kernel_sizes{5, 7, 11, 15, 19};
  std::vector<double> kernel_sigmas{1.0, 3.0, 5.0, 7.0, 10.0};
  std::uint64_t seed = 0;
};

struct BandArgs {
  fs::path model;
  fs::path campaign;
  fs::path out;
  std::size_t n = 1000;
  std::size_t max_examples = 10;
  double epsilon = 10.0;
  double variance = 25.0;
  std::size_t max_concat_pairs = 100;
  std::vector<std::size_t> kernel_sizes{5, 7, 11, 15, 19};
  std::vector<double> kernel_sigmas{1.0, 3.0, 5.0, 7.0, 10.0};
  std::uint64_t seed = 0;
};

struct PlotArgs {
  fs::path campaign;
  fs::path out;
  std::vector<fs::path> bands;
  std::size_t limit = 10;
  std::uint64_t seed = 0;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

void prepare_out_dir(const fs::path& dir) {
  if (dir.empty()) throw Error("output directory must not be empty");
  fs::create_directories(dir);
}

// Resolved options of the invoked subcommand, in the same TOML layout that
// --config accepts.
void write_resolved_config(const CLI::App& sub, const fs::path& dir) {
  std::ostringstream s;
  s << "[" << sub.get_name() << "]\n";
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    const auto& name = opt->get_lnames().front();
    const auto results = opt->results();
    std::string value = results.empty() ? opt->get_default_str() : "";
    if (!results.empty()) {
      if (results.size() == 1) {
        value = results.front();
      } else {
        value = std::accumulate(std::next(results.begin()), results.end(), results.front(),
                                [](std::string a, const std::string& b) { return a + "," + b; });
      }
    }
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
    if (value.empty()) continue;
    s << name << " = \"" << value << "\"\n";
  }
  write_file(dir / (sub.get_name() + ".config.toml"), s.str());
}

KernelBank make_bank(const std::vector<std::size_t>& sizes, const std::vector<double>& sigmas) {
  return KernelBank(sizes, sigmas);
}

std::uint64_t example_seed(std::uint64_t seed, const std::string& id) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (unsigned char c : id) words.push_back(c);
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string percent(std::optional<double> v) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * *v << "%";
  return s.str();
}

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  prepare_out_dir(a.out);
  const auto dataset = generate_synthetic(a.n_per_class, a.length, a.seed);
  const auto path = a.out / "dataset.jsonl";
  save_dataset(dataset, path);
  out << "gen-data: wrote " << dataset.size() << " examples (" << a.n_per_class << " per class, length "
      << a.length << ") to " << path.string() << "\n";
  return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  prepare_out_dir(a.out);
  const auto dataset = load_dataset(a.data);
  auto [train_set, test_set] = split(dataset, a.test_fraction, a.seed);
  save_dataset(train_set, a.out / "train.jsonl");
  save_dataset(test_set, a.out / "test.jsonl");

  const auto spec = ModelSpec::default_architecture(a.input_length);
  const TrainHyper hyper{a.epochs, a.batch_size, a.learning_rate, a.seed};
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  const auto params = train(spec, train_set, hyper, [&](int epoch, double mean_loss) {
    log.push_back({{"epoch", epoch}, {"mean_loss", mean_loss}});
  });
  save_params(a.out / "model.sapw", spec, params);

  const Model model{spec, params};
  const auto report = make_metrics_report(confusion(model, test_set));
  write_file(a.out / "test_metrics.json", metrics_report_to_json(report));
  write_file(a.out / "train_log.json", log.dump(2) + "\n");
  out << "train: " << train_set.size() << " train / " << test_set.size() << " test, test accuracy "
      << std::fixed << std::setprecision(4) << report.accuracy << ", mean F1 " << report.f1.mean_rhythm
      << "; weights in " << (a.out / "model.sapw").string() << "\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  prepare_out_dir(a.out);
  const auto model = load_params(a.model);
  const auto dataset = load_dataset(a.data);
  const auto report = make_metrics_report(confusion(model, dataset));
  write_file(a.out / "metrics.json", metrics_report_to_json(report));
  out << metrics_report_table(report);
  return kExitOk;
}

int cmd_attack(const AttackArgs& a, std::ostream& out) {
  const auto method = attack_method_from_string(a.method);
  if (!method) throw InvalidArgument("unknown attack method '" + a.method + "'");
  prepare_out_dir(a.out);
  const auto model = load_params(a.model);
  const auto dataset = load_dataset(a.data);

  AttackConfig cfg = *method == AttackMethod::SAP ? AttackConfig::sap_defaults() : AttackConfig::pgd_defaults();
  cfg.epsilon = a.epsilon;
  cfg.alpha = a.alpha;
  cfg.init_steps = a.init_steps;
  if (a.steps) cfg.steps = *a.steps;
  std::optional<KernelBank> bank;
  if (*method == AttackMethod::SAP) bank = make_bank(a.kernel_sizes, a.kernel_sigmas);

  const auto campaign = attack_campaign(model, dataset, *method, cfg, bank);
  write_file(a.out / "campaign.jsonl", campaign_to_jsonl(campaign.results));
  write_file(a.out / "summary.json", campaign_summary_to_json(campaign.summary, bank));

  const auto& sr = campaign.summary.success;
  out << "attack " << a.method << ": " << sr.n_success << "/" << sr.n_eligible << " eligible flipped ("
      << percent(sr.rate) << "), median max|second diff| " << std::fixed << std::setprecision(3)
      << campaign.summary.smoothness.max_second_diff.p50 << "\n";
  return kExitOk;
}

int cmd_band(const BandArgs& a, std::ostream& out) {
  prepare_out_dir(a.out);
  const auto model = load_params(a.model);
  const auto results = campaign_from_jsonl(read_file(a.campaign));
  const auto bank = make_bank(a.kernel_sizes, a.kernel_sigmas);

  nlohmann::ordered_json examples = nlohmann::ordered_json::array();
  double sum_g = 0.0, sum_u = 0.0, sum_c = 0.0;
  std::size_t used = 0, with_concat = 0;
  for (const auto& r : results) {
    if (used >= a.max_examples) break;
    if (!r.eligible || !r.success) continue;
    ExistenceConfig cfg;
    cfg.n = a.n;
    cfg.epsilon = a.epsilon;
    cfg.noise.variance = a.variance;
    cfg.max_concat_pairs = a.max_concat_pairs;
    cfg.seed = example_seed(a.seed, r.id);
    const auto report = existence_experiment(model, r.original, r.adversarial, r.label, r.target, bank, cfg);
    write_file(a.out / ("band_" + r.id + ".json"), existence_report_to_json(report, r.id));

    nlohmann::ordered_json row;
    row["id"] = r.id;
    row["frac_gaussian_adversarial"] = report.frac_gaussian_adversarial;
    row["frac_uniform_adversarial"] = report.frac_uniform_adversarial;
    row["frac_concat_adversarial"] =
        report.frac_concat_adversarial ? nlohmann::ordered_json(*report.frac_concat_adversarial) : nullptr;
    row["n_concat"] = report.n_concat;
    examples.push_back(row);
    sum_g += report.frac_gaussian_adversarial;
    sum_u += report.frac_uniform_adversarial;
    if (report.frac_concat_adversarial) {
      sum_c += *report.frac_concat_adversarial;
      ++with_concat;
    }
    ++used;
  }
  if (used == 0) throw Error("campaign has no successful attacks on correctly classified examples");

  nlohmann::ordered_json summary;
  summary["n"] = a.n;
  summary["seed"] = a.seed;
  summary["n_examples"] = used;
  summary["mean_frac_gaussian_adversarial"] = sum_g / static_cast<double>(used);
  summary["mean_frac_uniform_adversarial"] = sum_u / static_cast<double>(used);
  summary["mean_frac_concat_adversarial"] =
      with_concat ? nlohmann::ordered_json(sum_c / static_cast<double>(with_concat)) : nullptr;
  summary["examples"] = examples;
  write_file(a.out / "band_summary.json", summary.dump(2) + "\n");

  out << "band: " << used << " examples x " << a.n << " draws; adversarial fractions gaussian "
      << percent(sum_g / static_cast<double>(used)) << ", uniform " << percent(sum_u / static_cast<double>(used))
      << ", concat "
      << percent(with_concat ? std::optional<double>(sum_c / static_cast<double>(with_concat)) : std::nullopt)
      << "\n";
  return kExitOk;
}

int cmd_plot(const PlotArgs& a, std::ostream& out) {
  prepare_out_dir(a.out);
  const auto results = campaign_from_jsonl(read_file(a.campaign));
  std::size_t written = 0;
  for (const auto& r : results) {
    if (written >= a.limit) break;
    write_file(a.out / (r.id + ".svg"), plot::attack_svg(r));
    ++written;
  }
  for (const auto& band_path : a.bands) {
    const auto band = existence_report_from_json(read_file(band_path));
    const auto it = std::find_if(results.begin(), results.end(), [&](const auto& r) { return r.id == band.id; });
    if (it == results.end()) throw Error("band report '" + band_path.string() + "' names unknown example '" + band.id + "'");
    std::ostringstream title;
    title << band.id << ": band of " << band.report.n << " resamples, adversarial "
          << percent(band.report.frac_gaussian_adversarial);
    write_file(a.out / ("band_" + band.id + ".svg"), plot::band_svg(title.str(), it->original.samples(), band.report.band));
    ++written;
  }
  out << "plot: wrote " << written << " SVG files to " << a.out.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Smooth adversarial perturbations against a 1D CNN rhythm classifier", "ecgadv"};
  app.set_config("--config", "", "TOML file with one [subcommand] section of option values; flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic labelled dataset (JSONL)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--n-per-class", gen.n_per_class, "Recordings per rhythm class")->capture_default_str();
  gen_cmd->add_option("--length", gen.length, "Samples per recording")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Split a dataset and train the default CNN");
  train_cmd->add_option("--data", tr.data, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", tr.batch_size)->capture_default_str();
  train_cmd->add_option("--learning-rate", tr.learning_rate)->capture_default_str();
  train_cmd->add_option("--test-fraction", tr.test_fraction)->capture_default_str();
  train_cmd->add_option("--input-length", tr.input_length)->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "Seed for the split, initialisation and shuffling")->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Confusion matrix, accuracy and F1 of a model on a dataset");
  eval_cmd->add_option("--model", ev.model, "Weights file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ev.out, "Output directory")->required();
  eval_cmd->add_option("--seed", ev.seed, "Unused; accepted for uniformity")->capture_default_str();

  AttackArgs at;
  auto* attack_cmd = app.add_subcommand("attack", "Run an FGSM, PGD or SAP campaign over a dataset");
  attack_cmd->add_option("--model", at.model, "Weights file")->required()->check(CLI::ExistingFile);
  attack_cmd->add_option("--data", at.data, "Dataset JSONL to attack")->required()->check(CLI::ExistingFile);
  attack_cmd->add_option("--out", at.out, "Output directory")->required();
  attack_cmd->add_option("--method", at.method)->check(CLI::IsMember({"fgsm", "pgd", "sap"}))->capture_default_str();
  attack_cmd->add_option("--epsilon", at.epsilon)->capture_default_str();
  attack_cmd->add_option("--alpha", at.alpha)->capture_default_str();
  attack_cmd->add_option("--steps", at.steps, "Iterations (default 20 for pgd, 40 for sap)");
  attack_cmd->add_option("--init-steps", at.init_steps, "SAP warm-start PGD iterations")->capture_default_str();
  attack_cmd->add_option("--kernel-sizes", at.kernel_sizes)->delimiter(',')->capture_default_str();
  attack_cmd->add_option("--kernel-sigmas", at.kernel_sigmas)->delimiter(',')->capture_default_str();
  attack_cmd->add_option("--seed", at.seed, "Unused by the deterministic attacks")->capture_default_str();

  BandArgs bd;
  auto* band_cmd = app.add_subcommand("band", "Existence experiments around successful attacks");
  band_cmd->add_option("--model", bd.model, "Weights file")->required()->check(CLI::ExistingFile);
  band_cmd->add_option("--campaign", bd.campaign, "campaign.jsonl from `attack`")->required()->check(CLI::ExistingFile);
  band_cmd->add_option("--out", bd.out, "Output directory")->required();
  band_cmd->add_option("--n", bd.n, "Gaussian resamples and uniform draws per example")->capture_default_str();
  band_cmd->add_option("--max-examples", bd.max_examples)->capture_default_str();
  band_cmd->add_option("--epsilon", bd.epsilon)->capture_default_str();
  band_cmd->add_option("--variance", bd.variance, "Variance of the Gaussian noise")->capture_default_str();
  band_cmd->add_option("--max-concat-pairs", bd.max_concat_pairs)->capture_default_str();
  band_cmd->add_option("--kernel-sizes", bd.kernel_sizes)->delimiter(',')->capture_default_str();
  band_cmd->add_option("--kernel-sigmas", bd.kernel_sigmas)->delimiter(',')->capture_default_str();
  band_cmd->add_option("--seed", bd.seed)->capture_default_str();

  PlotArgs pl;
  auto* plot_cmd = app.add_subcommand("plot", "Render attack and band SVGs");
  plot_cmd->add_option("--campaign", pl.campaign, "campaign.jsonl from `attack`")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", pl.out, "Output directory")->required();
  plot_cmd->add_option("--bands", pl.bands, "band_<id>.json reports to render")->check(CLI::ExistingFile);
  plot_cmd->add_option("--limit", pl.limit, "Attack plots to write")->capture_default_str();
  plot_cmd->add_option("--seed", pl.seed, "Unused; accepted for uniformity")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) {
      prepare_out_dir(gen.out);
      write_resolved_config(*gen_cmd, gen.out);
      return cmd_gen_data(gen, out);
    }
    if (train_cmd->parsed()) {
      prepare_out_dir(tr.out);
      write_resolved_config(*train_cmd, tr.out);
      return cmd_train(tr, out);
    }
    if (eval_cmd->parsed()) {
      prepare_out_dir(ev.out);
      write_resolved_config(*eval_cmd, ev.out);
      return cmd_eval(ev, out);
    }
    if (attack_cmd->parsed()) {
      prepare_out_dir(at.out);
      write_resolved_config(*attack_cmd, at.out);
      return cmd_attack(at, out);
    }
    if (band_cmd->parsed()) {
      prepare_out_dir(bd.out);
      write_resolved_config(*band_cmd, bd.out);
      return cmd_band(bd, out);
    }
    if (plot_cmd->parsed()) {
      prepare_out_dir(pl.out);
      write_resolved_config(*plot_cmd, pl.out);
      return cmd_plot(pl, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ecgadv::cli
