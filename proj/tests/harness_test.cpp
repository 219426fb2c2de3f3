#include "isac/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

using isac::CMat;
using isac::cxd;

isac::ExperimentConfig micro_config() {
  isac::ExperimentConfig cfg;
  cfg.system = isac::SystemConfig::make(2, 2);
  cfg.system.seed = 404;
  cfg.train_snr_grid_db = {10.0, 20.0};
  cfg.test_snr_grid_db = {0.0, 10.0};
  cfg.originals = 12;
  cfg.copies = 2;
  cfg.eval_trials = 4;
  cfg.train.max_epochs = 3;
  cfg.train.batch_size = 8;
  cfg.train.learning_rate = 1e-3;
  cfg.model_dir.clear();
  return cfg;
}

TEST(Nmse, TrivialRatios) {
  isac::Rng rng = isac::substream(1, 111);
  CMat truth(3, 2);
  for (auto& e : truth.entries()) e = isac::complex_gaussian(rng, 1.0);
  EXPECT_EQ(isac::nmse(truth, truth), 0.0);
  EXPECT_NEAR(isac::nmse(CMat(3, 2), truth), 1.0, 1e-14);
  EXPECT_NEAR(isac::nmse(truth * cxd{2.0}, truth), 1.0, 1e-12);
  EXPECT_THROW(isac::nmse(CMat(2, 2), truth), std::invalid_argument);
  EXPECT_THROW(isac::nmse(CMat(3, 2), CMat(3, 2)), std::invalid_argument);
}

TEST(RunPipeline, LsNearPerfectAtExtremeSnr) {
  isac::ExperimentConfig cfg;
  cfg.system = isac::SystemConfig::make(4, 8);
  cfg.system.seed = 7;
  cfg.test_snr_grid_db = {200.0};
  cfg.eval_trials = 3;
  cfg.estimator = "ls";
  const auto rows = isac::run_pipeline(cfg);
  ASSERT_EQ(rows.size(), 4u);  // one row per channel
  for (const auto& row : rows) EXPECT_LE(row.value, 1e-15) << row.channel;
}

TEST(RunPipeline, LsNmseMonotoneInSnr) {
  isac::ExperimentConfig cfg;
  cfg.system = isac::SystemConfig::make(2, 4);
  cfg.system.seed = 8;
  cfg.test_snr_grid_db = {0.0, 10.0, 20.0};
  cfg.eval_trials = 150;
  const auto rows = isac::run_pipeline(cfg);
  ASSERT_EQ(rows.size(), 12u);
  for (const char* channel :
       {"direct-sensing", "direct-comm", "reflected-comm", "reflected-sensing"}) {
    std::vector<double> curve;
    for (const auto& row : rows)
      if (row.channel == channel) curve.push_back(row.value);
    ASSERT_EQ(curve.size(), 3u);
    EXPECT_GT(curve[0], curve[1]) << channel;
    EXPECT_GT(curve[1], curve[2]) << channel;
  }
}

TEST(RunPipeline, MonteCarloEstimateStabilizes) {
  isac::ExperimentConfig cfg;
  cfg.system = isac::SystemConfig::make(2, 4);
  cfg.system.seed = 9;
  cfg.test_snr_grid_db = {10.0};
  cfg.eval_trials = 400;
  const auto base = isac::run_pipeline(cfg);
  cfg.eval_trials = 800;
  const auto doubled = isac::run_pipeline(cfg);
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double rel = std::abs(doubled[i].value - base[i].value) / base[i].value;
    EXPECT_LT(rel, 0.10) << base[i].channel;
  }
}

TEST(RunPipeline, MissingDlModelsRejected) {
  isac::ExperimentConfig cfg = micro_config();
  cfg.estimator = "dl-type2";
  cfg.model_dir = (std::filesystem::temp_directory_path() / "isac_no_models").string();
  EXPECT_THROW(isac::run_pipeline(cfg), std::runtime_error);
  cfg.estimator = "nonsense";
  EXPECT_THROW(isac::run_pipeline(cfg), std::invalid_argument);
}

TEST(ExperimentConfig, JsonRoundTripAndDerivedSpans) {
  const auto path = std::filesystem::temp_directory_path() / "isac_cfg_test.json";
  {
    std::ofstream os(path);
    os << R"({
      "system": {"tx_antennas": 2, "irs_elements": 4, "seed": 99,
                 "geometry": {"distance_m": [2, 120, 120, 40, 40]}},
      "train_snr_grid_db": [5, 15],
      "estimator": "dl-type1",
      "originals": 50,
      "train": {"max_epochs": 7, "batch_size": 25}
    })";
  }
  const auto cfg = isac::load_experiment_config(path.string());
  EXPECT_EQ(cfg.system.tx_antennas, 2u);
  EXPECT_EQ(cfg.system.irs_elements, 4u);
  EXPECT_EQ(cfg.system.c_s2, 5u);  // c_s1 + L
  EXPECT_EQ(cfg.system.c_s3, 9u);
  EXPECT_EQ(cfg.system.p_s1, 4u);
  EXPECT_EQ(cfg.system.seed, 99u);
  EXPECT_NEAR(cfg.system.geometry.distance_m[1], 120.0, 0.0);
  EXPECT_NEAR(cfg.system.geometry.bs_target_angle, std::acos(2.0 / 40.0), 1e-12);
  EXPECT_EQ(cfg.estimator, "dl-type1");
  EXPECT_EQ(cfg.originals, 50u);
  EXPECT_EQ(cfg.train.max_epochs, 7u);
  EXPECT_EQ(cfg.train.batch_size, 25u);
  EXPECT_EQ(cfg.train.patience, 5u);  // untouched default
  std::filesystem::remove(path);

  isac::ExperimentConfig bad;
  nlohmann::json j;
  j["test_snr_grid_db"] = nlohmann::json::array();
  EXPECT_THROW(isac::apply_json(bad, j), std::invalid_argument);
}

TEST(ModelBundle, SaveLoadRoundTrip) {
  isac::ModelBundle bundle;
  bundle.stage = 1;
  bundle.pair_type = 2;
  bundle.net = isac::build_de_cnn(8, 8, 5);
  bundle.input_mean.assign(8, 0.25);
  bundle.input_std.assign(8, 2.0);
  bundle.output_scale = 1e4;

  const auto dir = std::filesystem::temp_directory_path() / "isac_bundle_test";
  std::filesystem::create_directories(dir);
  const std::string base = isac::model_base_path(dir.string(), 1, 2);
  isac::save_model_bundle(bundle, base);
  EXPECT_TRUE(isac::model_bundle_exists(base));

  const auto loaded = isac::load_model_bundle(base);
  EXPECT_EQ(loaded.stage, 1);
  EXPECT_EQ(loaded.pair_type, 2);
  EXPECT_EQ(loaded.input_mean, bundle.input_mean);
  EXPECT_EQ(loaded.input_std, bundle.input_std);
  EXPECT_EQ(loaded.net.weights, bundle.net.weights);
  EXPECT_THROW(isac::load_model_bundle(base + "missing"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST(DlPriors, FallsBackToLsWithoutBundles) {
  const auto cfg = isac::SystemConfig::make(2, 4);
  const auto plan = isac::build_plan(cfg);
  isac::Rng rng = isac::substream(cfg.seed, 112);
  const auto ch = isac::realize(cfg, rng);
  const auto obs = isac::receive_stage1(plan, ch, 1e-10, cfg.stage1_subframes(), rng);

  const isac::DlPriors priors(cfg, nullptr, nullptr);
  const auto [echo_dl, direct_dl] = priors.estimate_stage1(obs, plan);
  const auto [echo_ls, direct_ls] = isac::ls_stage1(obs, plan);
  EXPECT_LE(isac::max_abs_diff(echo_dl, echo_ls), 0.0);
  EXPECT_LE(isac::max_abs_diff(direct_dl, direct_ls), 0.0);
}

TEST(PooledDataset, SplitsOriginalsAcrossGrid) {
  const auto cfg = isac::SystemConfig::make(2, 2);
  const std::vector<double> grid{0.0, 10.0, 20.0};
  const auto set = isac::make_pooled_dataset(1, 2, cfg, grid, 5, 3, 113);
  EXPECT_EQ(set.originals, 5u);
  EXPECT_EQ(set.pairs.size(), 15u);  // (2+2+1 originals) * 3 copies
}

TEST(TrainStageModel, DeterministicAndUsableInChain) {
  const auto cfg = micro_config();
  const auto bundle_a = isac::train_stage_model(cfg, 1, 2);
  const auto bundle_b = isac::train_stage_model(cfg, 1, 2);
  EXPECT_EQ(bundle_a.net.weights, bundle_b.net.weights);
  EXPECT_EQ(bundle_a.input_mean, bundle_b.input_mean);

  // run the trained stage-1 model inside the online chain
  const auto plan = isac::build_plan(cfg.system);
  isac::Rng rng = isac::substream(cfg.system.seed, 114);
  const auto trial = isac::simulate_trial(cfg.system, plan, 10.0, rng);
  isac::DlChain chain;
  chain.s1 = &bundle_a;
  const auto est = isac::estimate_dl(trial, plan, cfg.system, chain);
  EXPECT_EQ(est.echo.rows(), cfg.system.tx_antennas);
  EXPECT_EQ(est.direct.cols(), cfg.system.tx_antennas);
  EXPECT_TRUE(est.reflected_comm.empty());  // chain truncated at stage 1
}

TEST(EvaluateGrid, DeterministicRowsAndSharedDraws) {
  const auto cfg = micro_config();
  const std::vector<isac::EstimatorSetup> setups{{"ls", {}}};
  const auto a = isac::evaluate_grid(cfg.system, cfg.test_snr_grid_db, 6, setups, 42);
  const auto b = isac::evaluate_grid(cfg.system, cfg.test_snr_grid_db, 6, setups, 42);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].value, b[i].value);
    EXPECT_EQ(a[i].channel, b[i].channel);
  }
}

TEST(FigureDefaults, Figure5GridHasThirteenSnrPoints) {
  const auto cfg = isac::figure_defaults(5, false);
  EXPECT_EQ(cfg.test_snr_grid_db.size(), 13u);
  EXPECT_EQ(cfg.test_snr_grid_db.front(), -10.0);
  EXPECT_EQ(cfg.test_snr_grid_db.back(), 20.0);
  EXPECT_EQ(cfg.system.irs_elements, 8u);
  EXPECT_EQ(isac::figure_defaults(5, true).system.irs_elements, 30u);
  EXPECT_THROW(isac::figure_defaults(3, false), std::invalid_argument);
}

TEST(ReproduceFigure, Figure8DeterministicWithExpectedCurves) {
  isac::ExperimentConfig cfg = isac::figure_defaults(8, false);
  std::ostringstream a, b;
  isac::reproduce_figure(8, cfg, a);
  isac::reproduce_figure(8, cfg, b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, 14), "x,curve,value\n");
  EXPECT_NE(a.str().find("vsL:s1:dl-type2:adds"), std::string::npos);
  EXPECT_NE(a.str().find("vsM:s3:ls:mults"), std::string::npos);
  // 13 sweep points, 3 stages, 6 curves each
  std::size_t lines = 0;
  for (char c : a.str())
    if (c == '\n') ++lines;
  EXPECT_EQ(lines, 1u + 13u * 3u * 6u);
}

TEST(ReproduceFigure, Figure5MicroRunIsDeterministic) {
  isac::ExperimentConfig cfg = micro_config();
  cfg.figure = 5;
  std::ostringstream a, b;
  isac::reproduce_figure(5, cfg, a);
  isac::reproduce_figure(5, cfg, b);
  EXPECT_EQ(a.str(), b.str());
  // LS curves cover all four channels; DL curves cover the direct ones
  EXPECT_NE(a.str().find("ls:reflected-sensing"), std::string::npos);
  EXPECT_NE(a.str().find("dl-type1:direct-sensing"), std::string::npos);
  EXPECT_NE(a.str().find("dl-type2:direct-comm"), std::string::npos);
  EXPECT_EQ(a.str().find("dl-type1:reflected-comm"), std::string::npos);
  EXPECT_THROW(isac::reproduce_figure(4, cfg, a), std::invalid_argument);
}

TEST(ReproduceFigure, Figure7TrainsDirectNetworksPerAntennaCount) {
  isac::ExperimentConfig cfg = micro_config();
  cfg.eval_trials = 3;
  std::ostringstream os;
  isac::reproduce_figure(7, cfg, os);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, 14), "M,curve,value\n");
  EXPECT_NE(csv.find("dl-type2:direct-sensing@10dB"), std::string::npos);
  EXPECT_NE(csv.find("ls:reflected-sensing@0dB"), std::string::npos);
  // both sweep points present
  EXPECT_EQ(csv.find("dl-type1:reflected-comm"), std::string::npos);
  EXPECT_NE(csv.find("\n2,"), std::string::npos);
  EXPECT_NE(csv.find("\n4,"), std::string::npos);
}

TEST(ReproduceFigure, Figure6LsOnlySweep) {
  isac::ExperimentConfig cfg = micro_config();
  std::ostringstream os;
  isac::reproduce_figure(6, cfg, os);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, 14), "L,curve,value\n");
  EXPECT_NE(csv.find("ls:reflected-comm@0dB"), std::string::npos);
  EXPECT_NE(csv.find("ls:reflected-sensing@10dB"), std::string::npos);
  EXPECT_EQ(csv.find("dl-type"), std::string::npos);  // reflected networks not requested
}

}  // namespace
