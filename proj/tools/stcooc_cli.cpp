// stcooc command line: dataset generation, flow, training, fusion, SVM
// fitting, evaluation and reporting, one subcommand per stage.

#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "stcooc/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, Common& opts) {
  cmd->add_option("--config", opts.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "overrides the config seed");
  cmd->add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
}

stcooc::ExperimentConfig resolve(const Common& opts) {
  stcooc::ExperimentConfig cfg = stcooc::load_config(opts.config);
  if (opts.seed) stcooc::override_seed(cfg, *opts.seed);
  if (opts.jobs) cfg.jobs = *opts.jobs;
  return cfg;
}

void print_summary(const std::vector<stcooc::EvalReport>& reports) { std::cout << stcooc::summary_text(reports); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal co-occurrence fusion toolkit"};
  app.require_subcommand(1);
  Common opts;

  struct Command {
    const char* name;
    const char* help;
    std::function<void(const stcooc::ExperimentConfig&)> run;
  };
  const std::vector<Command> commands = {
      {"gen", "generate the synthetic dataset",
       [](const auto& cfg) {
         const stcooc::Manifest m = stcooc::stage_gen(cfg);
         std::cout << "manifest: " << stcooc::manifest_path(cfg).string() << " (" << m.train.size() << " train, "
                   << m.test.size() << " test clips)\n";
       }},
      {"flow", "precompute flow maps", [](const auto& cfg) { stcooc::stage_flow(cfg); }},
      {"train", "train the stream networks",
       [](const auto& cfg) {
         for (const auto& [stream, report] : stcooc::stage_train(cfg)) {
           std::cout << stcooc::to_string(stream) << ": final loss ";
           std::printf("%.4f\n", report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back());
           std::cout.flush();
         }
       }},
      {"fuse", "extract fused features and write dumps", [](const auto& cfg) { stcooc::stage_fuse(cfg); }},
      {"fit-svm", "fit SVMs on fused training features", [](const auto& cfg) { stcooc::stage_fit_svm(cfg); }},
      {"eval", "classify the test split", [](const auto& cfg) { print_summary(stcooc::stage_eval(cfg)); }},
      {"experiment", "run every stage in order", [](const auto& cfg) { print_summary(stcooc::run_experiment(cfg)); }},
      {"report", "re-render summaries from stored reports",
       [](const auto& cfg) { print_summary(stcooc::stage_report(cfg)); }},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, opts);
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const stcooc::ExperimentConfig cfg = resolve(opts);
    for (std::size_t k = 0; k < subs.size(); ++k)
      if (subs[k]->parsed()) commands[k].run(cfg);
  } catch (const stcooc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const stcooc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
