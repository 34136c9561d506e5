#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "evodef/cli.hpp"

using namespace evodef;

int main(int argc, char** argv) {
  CLI::App app{"evodef: attacker-defender co-evolution on a desk-scale process plant"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand name

  cli::CommonOptions opts;
  app.add_option("--config", opts.config_path, "configuration file")->envname("EVODEF_CONFIG");
  app.add_option("--seed", opts.seed, "campaign seed")->envname("EVODEF_SEED");
  app.add_option("--out", opts.out_dir, "output directory")->envname("EVODEF_OUT");
  app.add_option("--jobs", opts.jobs, "worker count for independent campaigns")
      ->envname("EVODEF_JOBS");

  auto* simulate = app.add_subcommand("simulate", "golden nominal trace + statistics");

  std::size_t n_episodes = 30;
  auto* collect = app.add_subcommand("collect", "record predictor training episodes");
  collect->add_option("--episodes", n_episodes, "episode count")->envname("EVODEF_EPISODES");

  std::string episodes_dir;
  auto* trainp = app.add_subcommand("train-predictor", "train the forecast model");
  trainp->add_option("--episodes-dir", episodes_dir, "collect output directory")->required();

  std::string predictor_path, golden_path;
  std::size_t n_attacks = 20;
  bool no_ga = false;
  auto* fuzz = app.add_subcommand("fuzz", "attack generation campaign without the defender");
  fuzz->add_option("--predictor", predictor_path, "predictor checkpoint")->required();
  fuzz->add_option("--golden", golden_path, "golden trace csv")->required();
  fuzz->add_option("--attacks", n_attacks, "number of attacks");
  fuzz->add_flag("--no-ga", no_ga, "random search only");

  std::optional<long> rounds_override;
  std::string toggles_str;
  auto* evolve_cmd = app.add_subcommand("evolve", "attacker-defender co-evolution campaign");
  evolve_cmd->add_option("--predictor", predictor_path, "predictor checkpoint")->required();
  evolve_cmd->add_option("--golden", golden_path, "golden trace csv")->required();
  long rounds_opt = -1;
  evolve_cmd->add_option("--rounds", rounds_opt, "round cap override")->envname("EVODEF_ROUNDS");
  evolve_cmd->add_option("--toggles", toggles_str, "comma list of cbl,exe,cbp (or 'none')")
      ->envname("EVODEF_TOGGLES");

  std::string detector_path, campaign_dir;
  std::size_t eval_eff = 20, eval_ineff = 20;
  auto* eval_cmd = app.add_subcommand("eval", "metrics over held-out pools");
  eval_cmd->add_option("--predictor", predictor_path, "predictor checkpoint")->required();
  eval_cmd->add_option("--golden", golden_path, "golden trace csv")->required();
  eval_cmd->add_option("--detector", detector_path, "detector checkpoint (omit: fresh random)");
  eval_cmd->add_option("--campaign", campaign_dir, "evolve output dir for seen-scenario replay");
  eval_cmd->add_option("--effective", eval_eff, "unseen effective traces");
  eval_cmd->add_option("--ineffective", eval_ineff, "unseen ineffective traces");

  auto* ablate = app.add_subcommand("ablate", "eight-configuration module ablation");
  ablate->add_option("--predictor", predictor_path, "predictor checkpoint")->required();
  ablate->add_option("--golden", golden_path, "golden trace csv")->required();

  std::string grid;
  auto* sweep = app.add_subcommand("sweep", "detector width x stride sweep");
  sweep->add_option("--predictor", predictor_path, "predictor checkpoint")->required();
  sweep->add_option("--golden", golden_path, "golden trace csv")->required();
  sweep->add_option("--grid", grid, "grid as 'w1,w2,..xs1,s2,..'")->envname("EVODEF_GRID");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cli::run_simulate(opts);
    if (collect->parsed()) return cli::run_collect(opts, n_episodes);
    if (trainp->parsed()) return cli::run_train_predictor(opts, episodes_dir);
    if (fuzz->parsed())
      return cli::run_fuzz(opts, predictor_path, golden_path, n_attacks, !no_ga);
    if (evolve_cmd->parsed()) {
      if (rounds_opt >= 0) rounds_override = rounds_opt;
      return cli::run_evolve(opts, predictor_path, golden_path, rounds_override,
                             cli::parse_toggles(toggles_str));
    }
    if (eval_cmd->parsed())
      return cli::run_eval(opts, predictor_path, golden_path, detector_path, campaign_dir,
                           eval_eff, eval_ineff);
    if (ablate->parsed()) return cli::run_ablate(opts, predictor_path, golden_path);
    if (sweep->parsed()) return cli::run_sweep(opts, predictor_path, golden_path, grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
