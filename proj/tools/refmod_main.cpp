#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "refmod/config.hpp"
#include "refmod/harness.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string seed;
  std::string episodes;
  std::string out;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "run configuration file")
      ->required();
  sub->add_option("--seed", args.seed, "override run.seed");
  sub->add_option("--episodes", args.episodes, "override run.episodes");
  sub->add_option("--out", args.out, "override the output directory");
}

refmod::Config load_with_overrides(const CommonArgs& args) {
  refmod::Config cfg = refmod::Config::load(args.config_path);
  if (!args.seed.empty()) cfg.set("run.seed", args.seed);
  if (!args.episodes.empty()) cfg.set("run.episodes", args.episodes);
  if (!args.out.empty()) cfg.set("run.out", args.out);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid local planner: training, evaluation, global planning "
               "and plotting"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, plan_args, plot_args;
  CLI::App* train = app.add_subcommand("train", "train the TD3 policy");
  add_common(train, train_args);
  CLI::App* eval = app.add_subcommand("eval", "run evaluation episodes");
  add_common(eval, eval_args);
  CLI::App* plan = app.add_subcommand("plan", "generate global plans and maps");
  add_common(plan, plan_args);
  CLI::App* plot = app.add_subcommand("plot", "render episode SVG plots");
  add_common(plot, plot_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) refmod::cmd_train(load_with_overrides(train_args));
    if (eval->parsed()) refmod::cmd_eval(load_with_overrides(eval_args));
    if (plan->parsed()) refmod::cmd_plan(load_with_overrides(plan_args));
    if (plot->parsed()) refmod::cmd_plot(load_with_overrides(plot_args));
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 0;
}
