// Command-line front end: dataset simulation, network training, online NMSE
// evaluation, complexity sweeps and figure-style CSV reproduction.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isac/harness.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool full_scale = false;
};

isac::ExperimentConfig resolve_config(const GlobalOptions& opts, isac::ExperimentConfig base) {
  base.full_scale = base.full_scale || opts.full_scale;
  if (!opts.config_path.empty()) base = isac::load_experiment_config(opts.config_path, base);
  if (opts.seed_given) base.system.seed = opts.seed;
  if (!opts.out_path.empty()) base.out_path = opts.out_path;
  return base;
}

std::ofstream open_output(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open output file " + path);
  return os;
}

int run_simulate(const isac::ExperimentConfig& cfg, int stage, int pair_type, double snr_db) {
  const isac::SampleSet set =
      isac::make_pooled_dataset(stage, pair_type, cfg.system,
                                std::vector<double>{snr_db}, cfg.originals, cfg.copies,
                                isac::derive_seed(cfg.system.seed, 0x73696dULL,
                                                  std::uint64_t(stage) * 2 + std::uint64_t(pair_type)));
  isac::save_sample_set(set, cfg.out_path);
  std::cout << "wrote " << set.pairs.size() << " samples (stage " << stage << ", type " << pair_type
            << ", " << snr_db << " dB) to " << cfg.out_path << "\n";
  return 0;
}

int run_train(const isac::ExperimentConfig& cfg, int stage, int pair_type) {
  const auto specs = stage == 1 ? isac::de_cnn_specs(isac::target_length(stage, cfg.system))
                                : isac::re_cnn_specs(isac::target_length(stage, cfg.system));
  const std::size_t params =
      isac::planned_parameter_count(specs, isac::input_length(stage, pair_type, cfg.system));
  if (params > 50'000'000) {
    const double gib = double(params) * 8.0 * 4.0 / (1024.0 * 1024.0 * 1024.0);
    std::cout << "note: this architecture holds " << params << " parameters (roughly "
              << isac::format_value(gib) << " GiB for tensors plus optimizer state); "
              << "reduce L or M if that exceeds this machine\n";
  }

  // chain priors from already-trained models of the same input type
  isac::ModelBundle prior1, prior2;
  const isac::ModelBundle* p1 = nullptr;
  const isac::ModelBundle* p2 = nullptr;
  if (stage >= 2) {
    const std::string base1 = isac::model_base_path(cfg.model_dir, 1, pair_type);
    if (isac::model_bundle_exists(base1)) {
      prior1 = isac::load_model_bundle(base1);
      p1 = &prior1;
    }
  }
  if (stage == 3) {
    const std::string base2 = isac::model_base_path(cfg.model_dir, 2, pair_type);
    if (isac::model_bundle_exists(base2)) {
      prior2 = isac::load_model_bundle(base2);
      p2 = &prior2;
    }
  }
  const isac::DlPriors priors(cfg.system, p1, p2);

  isac::TrainHistory history;
  const isac::ModelBundle bundle = isac::train_stage_model(cfg, stage, pair_type, priors, &history);
  std::filesystem::create_directories(cfg.model_dir);
  const std::string base = isac::model_base_path(cfg.model_dir, stage, pair_type);
  isac::save_model_bundle(bundle, base);

  auto history_csv = open_output(base + ".history.csv");
  history_csv << "epoch,train_mse,val_mse\n";
  for (const isac::EpochRecord& rec : history.epochs)
    history_csv << rec.epoch << ',' << isac::format_value(rec.train_mse) << ','
                << isac::format_value(rec.val_mse) << '\n';

  std::cout << "trained stage " << stage << " type " << pair_type << " ("
            << bundle.net.parameter_count() << " parameters), best val MSE "
            << isac::format_value(history.best_val_mse) << " at epoch " << history.best_epoch
            << "; saved to " << base << ".nn\n";
  return 0;
}

int run_evaluate(const isac::ExperimentConfig& cfg) {
  const std::vector<isac::EvalRow> rows = isac::run_pipeline(cfg);
  auto os = open_output(cfg.out_path);
  isac::write_eval_csv(rows, os);
  std::cout << "wrote " << rows.size() << " NMSE rows to " << cfg.out_path << "\n";
  return 0;
}

int run_complexity(const isac::ExperimentConfig& cfg) {
  std::vector<std::pair<std::size_t, std::size_t>> grid;
  for (std::size_t m : {2, 4, 8})
    for (std::size_t l : {4, 8, 15, 30}) grid.emplace_back(m, l);
  auto os = open_output(cfg.out_path);
  isac::write_cost_sweep_csv(os, grid, cfg.system.c_s1);
  std::cout << "wrote cost sweep (" << grid.size() << " scenarios) to " << cfg.out_path << "\n";
  return 0;
}

int run_figure(const GlobalOptions& opts, int id) {
  isac::ExperimentConfig cfg = resolve_config(opts, isac::figure_defaults(id, opts.full_scale));
  auto os = open_output(cfg.out_path);
  isac::reproduce_figure(id, cfg, os);
  std::cout << "wrote figure " << id << " CSV to " << cfg.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-stage channel estimation toolkit for an IRS-assisted ISAC system"};
  app.require_subcommand(1);
  app.fallthrough();  // accept global flags after the subcommand name

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "JSON experiment configuration file");
  app.add_option("--out", opts.out_path, "output path (overrides the config)");
  auto* seed_opt = app.add_option("--seed", opts.seed, "master seed (overrides the config)");
  app.add_flag("--full", opts.full_scale, "paper-scale dimensions instead of desk scale");

  int stage = 1;
  int pair_type = 2;
  double snr_db = 10.0;

  auto* simulate = app.add_subcommand("simulate", "generate a dataset file");
  simulate->add_option("--stage", stage, "estimation stage (1-3)")->check(CLI::Range(1, 3));
  simulate->add_option("--pair", pair_type, "input-output pair type (1-2)")->check(CLI::Range(1, 2));
  simulate->add_option("--snr", snr_db, "dataset SNR in dB");

  auto* train = app.add_subcommand("train", "train one stage network");
  train->add_option("--stage", stage, "estimation stage (1-3)")->check(CLI::Range(1, 3));
  train->add_option("--pair", pair_type, "input-output pair type (1-2)")->check(CLI::Range(1, 2));

  auto* evaluate = app.add_subcommand("evaluate", "online NMSE over the test SNR grid");
  auto* complexity = app.add_subcommand("complexity", "operation-count sweep CSV");
  auto* figure = app.add_subcommand("reproduce-figure", "NMSE/complexity figure CSV");
  int figure_id = 8;
  figure->add_option("id", figure_id, "figure id (5-8)")->required()->check(CLI::Range(5, 8));

  CLI11_PARSE(app, argc, argv);
  opts.seed_given = seed_opt->count() > 0;

  try {
    if (figure->parsed()) return run_figure(opts, figure_id);
    const isac::ExperimentConfig cfg = resolve_config(opts, isac::ExperimentConfig{});
    if (simulate->parsed()) return run_simulate(cfg, stage, pair_type, snr_db);
    if (train->parsed()) return run_train(cfg, stage, pair_type);
    if (evaluate->parsed()) return run_evaluate(cfg);
    if (complexity->parsed()) return run_complexity(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
