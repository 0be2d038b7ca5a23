// Command-line driver for the correspondence benchmark. Stages mirror the
// pipeline (generate, correspond, evaluate, validate, report); `run` chains
// them all. Every stage restarts from the artifacts already on disk, so a
// failed run can be resumed stage by stage.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ssm/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct StageArgs {
  std::string config_path;
  std::string out_dir;
  std::string method;  // empty means every configured method
};

ssm::ExperimentConfig load_config(const StageArgs& args) {
  return ssm::parse_experiment_config(args.config_path);
}

std::vector<std::string> selected_methods(const ssm::ExperimentConfig& config,
                                          const StageArgs& args) {
  if (args.method.empty()) return config.methods;
  if (std::find(config.methods.begin(), config.methods.end(), args.method) ==
      config.methods.end())
    throw ssm::ConfigError("method '" + args.method + "' is not in the config's method list");
  return {args.method};
}

void add_common(CLI::App* cmd, StageArgs& args, bool with_method) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  if (with_method)
    cmd->add_option("--method", args.method,
                    "restrict to one method (default: all configured methods)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"statistical shape model correspondence benchmark"};
  app.require_subcommand(1);

  StageArgs args;
  std::string report_dir;

  CLI::App* generate = app.add_subcommand("generate", "synthesize and preprocess the ensemble");
  add_common(generate, args, false);
  CLI::App* correspond = app.add_subcommand("correspond", "fit correspondence models");
  add_common(correspond, args, true);
  CLI::App* evaluate = app.add_subcommand("evaluate", "model metrics, modes, and mode walks");
  add_common(evaluate, args, true);
  CLI::App* validate = app.add_subcommand("validate", "cluster subjects and test measurements");
  add_common(validate, args, false);
  CLI::App* report = app.add_subcommand("report", "rebuild the cross-method summary");
  report->add_option("--out", report_dir, "run directory to summarize")->required();
  CLI::App* run = app.add_subcommand("run", "all stages in order");
  add_common(run, args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      ssm::stage_report(report_dir);
      return 0;
    }

    ssm::ExperimentConfig config = load_config(args);
    if (generate->parsed()) {
      ssm::stage_generate(config, args.out_dir);
    } else if (correspond->parsed()) {
      for (const std::string& m : selected_methods(config, args))
        ssm::stage_correspond(config, args.out_dir, m);
    } else if (evaluate->parsed()) {
      for (const std::string& m : selected_methods(config, args))
        ssm::stage_evaluate(config, args.out_dir, m);
    } else if (validate->parsed()) {
      ssm::stage_validate(config, args.out_dir);
    } else if (run->parsed()) {
      ssm::ExperimentResult result = ssm::run_experiment(config, args.out_dir);
      if (!result.all_succeeded()) {
        std::cerr << "run finished with failures; see run.json\n";
        return kExitStage;
      }
    }
  } catch (const ssm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
