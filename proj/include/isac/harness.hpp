#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "isac/airsim.hpp"
#include "isac/channels.hpp"
#include "isac/cmat.hpp"
#include "isac/config.hpp"
#include "isac/costmodel.hpp"
#include "isac/features.hpp"
#include "isac/lsbase.hpp"
#include "isac/neuralnet.hpp"
#include "isac/protocol.hpp"
#include "isac/rng.hpp"

namespace isac {

/// Eq.-style normalized error for one trial: ||est - true||_F^2 / ||true||_F^2.
/// Callers average over Monte-Carlo trials.
inline double nmse(const CMat& estimated, const CMat& truth) {
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols())
    throw std::invalid_argument("nmse: shape mismatch");
  const double denom = frobenius(truth);
  if (denom == 0.0) throw std::invalid_argument("nmse: zero-norm truth");
  const double num = frobenius(estimated - truth);
  return (num * num) / (denom * denom);
}

// ---- experiment configuration ---------------------------------------------

struct ExperimentConfig {
  SystemConfig system = SystemConfig::make(4, 8);
  std::vector<double> train_snr_grid_db{10.0, 15.0, 20.0};
  std::vector<double> test_snr_grid_db{-10.0, -7.5, -5.0, -2.5, 0.0,  2.5,  5.0,
                                       7.5,   10.0, 12.5, 15.0, 17.5, 20.0};
  std::size_t originals = 200;   // V (total across the training grid)
  std::size_t copies = 5;        // U
  std::size_t eval_trials = 200; // online Monte-Carlo trials per SNR point
  std::string estimator = "ls";  // ls | dl-type1 | dl-type2
  int figure = 0;                // 0 = none
  std::string out_path = "out.csv";
  std::string model_dir = "models";
  TrainConfig train;
  bool full_scale = false;
  bool reflected_dl = false;  // also train/evaluate the reflected-channel networks
};

inline void apply_json(ExperimentConfig& cfg, const nlohmann::json& j) {
  using nlohmann::json;
  if (j.contains("system")) {
    const json& s = j.at("system");
    std::size_t m = s.value("tx_antennas", cfg.system.tx_antennas);
    std::size_t l = s.value("irs_elements", cfg.system.irs_elements);
    std::size_t c1 = s.value("c_s1", std::size_t{1});
    SystemConfig sys = SystemConfig::make(m, l, c1);
    sys.c_s2 = s.value("c_s2", sys.c_s2);
    sys.c_s3 = s.value("c_s3", sys.c_s3);
    sys.bs_power_dbm = s.value("bs_power_dbm", cfg.system.bs_power_dbm);
    sys.ue_power_dbm = s.value("ue_power_dbm", cfg.system.ue_power_dbm);
    sys.aug_snr_db = s.value("aug_snr_db", cfg.system.aug_snr_db);
    sys.output_scale = s.value("output_scale", cfg.system.output_scale);
    sys.seed = s.value("seed", cfg.system.seed);
    sys.geometry = cfg.system.geometry;
    if (s.contains("geometry")) {
      const json& g = s.at("geometry");
      Geometry& geo = sys.geometry;
      if (g.contains("distance_m")) g.at("distance_m").get_to(geo.distance_m);
      if (g.contains("pathloss_exponent")) g.at("pathloss_exponent").get_to(geo.pathloss_exponent);
      geo.ref_loss_db = g.value("ref_loss_db", geo.ref_loss_db);
      geo.ref_distance_m = g.value("ref_distance_m", geo.ref_distance_m);
      geo.spacing_ratio = g.value("spacing_ratio", geo.spacing_ratio);
      geo.derive_angles();
      geo.bs_target_angle = g.value("bs_target_angle", geo.bs_target_angle);
      geo.target_irs_angle = g.value("target_irs_angle", geo.target_irs_angle);
      geo.irs_bs_angle = g.value("irs_bs_angle", geo.irs_bs_angle);
    }
    cfg.system = sys;
  }
  if (j.contains("train_snr_grid_db")) j.at("train_snr_grid_db").get_to(cfg.train_snr_grid_db);
  if (j.contains("test_snr_grid_db")) j.at("test_snr_grid_db").get_to(cfg.test_snr_grid_db);
  cfg.originals = j.value("originals", cfg.originals);
  cfg.copies = j.value("copies", cfg.copies);
  cfg.eval_trials = j.value("eval_trials", cfg.eval_trials);
  cfg.estimator = j.value("estimator", cfg.estimator);
  cfg.figure = j.value("figure", cfg.figure);
  cfg.out_path = j.value("out", cfg.out_path);
  cfg.model_dir = j.value("model_dir", cfg.model_dir);
  cfg.full_scale = j.value("full_scale", cfg.full_scale);
  cfg.reflected_dl = j.value("reflected_dl", cfg.reflected_dl);
  if (j.contains("train")) {
    const nlohmann::json& t = j.at("train");
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
    cfg.train.patience = t.value("patience", cfg.train.patience);
    cfg.train.validation_fraction = t.value("validation_fraction", cfg.train.validation_fraction);
  }
  if (cfg.train_snr_grid_db.empty() || cfg.test_snr_grid_db.empty())
    throw std::invalid_argument("config: SNR grids must be non-empty");
  if (cfg.eval_trials < 1) throw std::invalid_argument("config: eval_trials must be >= 1");
  cfg.system.validate();
}

inline ExperimentConfig load_experiment_config(const std::string& path,
                                               ExperimentConfig base = ExperimentConfig{}) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(is);
  apply_json(base, j);
  return base;
}

// ---- deterministic CSV formatting ------------------------------------------

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return std::string(buf);
}

// ---- trained model bundle ---------------------------------------------------
//
// A trained estimator is the spec'd weight file plus a small sidecar holding
// the preprocessing fitted on its training split (magic "ISACST1").

struct ModelBundle {
  int stage = 0;
  int pair_type = 0;
  NetworkState net;
  std::vector<double> input_mean, input_std;
  double output_scale = 1e4;
};

inline std::string model_base_path(const std::string& dir, int stage, int pair_type) {
  return dir + "/s" + std::to_string(stage) + "i" + std::to_string(pair_type);
}

inline void save_model_bundle(const ModelBundle& bundle, const std::string& base_path) {
  save_network(bundle.net, base_path + ".nn");
  std::ofstream os(base_path + ".stats", std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_model_bundle: cannot open " + base_path + ".stats");
  os.write("ISACST1", 7);
  detail::write_u32(os, std::uint32_t(bundle.stage));
  detail::write_u32(os, std::uint32_t(bundle.pair_type));
  detail::write_u32(os, std::uint32_t(bundle.input_mean.size()));
  detail::write_f64(os, bundle.input_mean);
  detail::write_f64(os, bundle.input_std);
  const double scale[1] = {bundle.output_scale};
  detail::write_f64(os, scale);
  if (!os) throw std::runtime_error("save_model_bundle: write failed");
}

inline ModelBundle load_model_bundle(const std::string& base_path) {
  ModelBundle bundle;
  bundle.net = load_network(base_path + ".nn");
  std::ifstream is(base_path + ".stats", std::ios::binary);
  if (!is) throw std::runtime_error("load_model_bundle: missing " + base_path + ".stats");
  char magic[7];
  is.read(magic, 7);
  if (!is || std::memcmp(magic, "ISACST1", 7) != 0)
    throw std::runtime_error("load_model_bundle: bad stats magic");
  bundle.stage = int(detail::read_u32(is));
  bundle.pair_type = int(detail::read_u32(is));
  const std::size_t dim = detail::read_u32(is);
  bundle.input_mean.resize(dim);
  bundle.input_std.resize(dim);
  detail::read_f64(is, bundle.input_mean);
  detail::read_f64(is, bundle.input_std);
  double scale[1];
  detail::read_f64(is, scale);
  bundle.output_scale = scale[0];
  if (bundle.net.input_len != dim) throw std::runtime_error("load_model_bundle: stats/net mismatch");
  return bundle;
}

inline bool model_bundle_exists(const std::string& base_path) {
  return std::filesystem::exists(base_path + ".nn") && std::filesystem::exists(base_path + ".stats");
}

// ---- chained estimation -------------------------------------------------------

/// Per-trial channel estimates; reflected parts may be empty when the chain
/// was only evaluated through stage 1.
struct ChannelEstimates {
  CMat echo, direct, reflected_comm, reflected_sensing;
};

namespace harness_detail {

inline std::vector<double> run_bundle(const ModelBundle& bundle, const std::vector<double>& raw) {
  const std::vector<double> standardized = standardized_input(raw, bundle.input_mean, bundle.input_std);
  return forward(bundle.net, standardized);
}

}  // namespace harness_detail

/// Stage-1/2 priors produced by trained networks, for chaining into later
/// stage inputs. Falls back to the LS chain for stages without a bundle.
class DlPriors : public PriorEstimator {
 public:
  DlPriors(const SystemConfig& sys, const ModelBundle* s1, const ModelBundle* s2)
      : sys_(sys), s1_(s1), s2_(s2) {}

  std::pair<CMat, CMat> estimate_stage1(const StageObservation& obs, const PilotPlan& plan) const override {
    if (!s1_) return PriorEstimator::estimate_stage1(obs, plan);
    std::vector<double> raw;
    if (s1_->pair_type == 1) {
      raw = build_input_s1t1(obs);
    } else {
      const auto [echo_bar, direct_bar] = ls_stage1(obs, plan);
      raw = build_input_s1t2(echo_bar, direct_bar);
    }
    const std::vector<double> out = harness_detail::run_bundle(*s1_, raw);
    return postprocess_stage1(out, s1_->output_scale, sys_.tx_antennas);
  }

  CMat estimate_stage2(const StageObservation& obs, const PilotPlan& plan,
                       const CMat& direct_hat) const override {
    if (!s2_) return PriorEstimator::estimate_stage2(obs, plan, direct_hat);
    const std::vector<double> raw = s2_->pair_type == 1
                                        ? build_input_s2t1(obs, direct_hat)
                                        : build_input_s2t2(ls_stage2(obs, plan, direct_hat));
    const std::vector<double> out = harness_detail::run_bundle(*s2_, raw);
    return postprocess_stage2(out, s2_->output_scale, sys_.irs_elements, sys_.tx_antennas);
  }

 private:
  SystemConfig sys_;
  const ModelBundle* s1_;
  const ModelBundle* s2_;
};

/// One online trial: a fresh channel realization observed through all three
/// stages at the same nominal SNR.
struct TrialData {
  ChannelRealization truth;
  StageObservation obs1, obs2, obs3;
};

inline TrialData simulate_trial(const SystemConfig& sys, const PilotPlan& plan, double snr_db, Rng& rng) {
  TrialData trial;
  trial.truth = realize(sys, rng);
  trial.obs1 = receive_stage1(plan, trial.truth, noise_variance(1, sys, snr_db), sys.stage1_subframes(), rng);
  trial.obs1.snr_db = snr_db;
  trial.obs2 = receive_stage2(plan, trial.truth, noise_variance(2, sys, snr_db), rng);
  trial.obs2.snr_db = snr_db;
  trial.obs3 = receive_stage3(plan, trial.truth, noise_variance(3, sys, snr_db), rng);
  trial.obs3.snr_db = snr_db;
  return trial;
}

/// The LS baseline chain: every later stage consumes the LS estimates of the
/// earlier ones.
inline ChannelEstimates estimate_ls(const TrialData& trial, const PilotPlan& plan) {
  ChannelEstimates est;
  auto [echo_bar, direct_bar] = ls_stage1(trial.obs1, plan);
  est.echo = std::move(echo_bar);
  est.direct = std::move(direct_bar);
  est.reflected_comm = ls_stage2(trial.obs2, plan, est.direct);
  est.reflected_sensing = ls_stage3(trial.obs3, plan, est.echo, est.direct, est.reflected_comm);
  return est;
}

/// One trained network per stage; later entries may be null, truncating the
/// chain (their estimates stay empty).
struct DlChain {
  const ModelBundle* s1 = nullptr;
  const ModelBundle* s2 = nullptr;
  const ModelBundle* s3 = nullptr;
};

inline ChannelEstimates estimate_dl(const TrialData& trial, const PilotPlan& plan, const SystemConfig& sys,
                                    const DlChain& chain) {
  if (!chain.s1) throw std::invalid_argument("estimate_dl: stage-1 model required");
  ChannelEstimates est;
  const DlPriors priors(sys, chain.s1, chain.s2);
  auto [echo_hat, direct_hat] = priors.estimate_stage1(trial.obs1, plan);
  est.echo = std::move(echo_hat);
  est.direct = std::move(direct_hat);
  if (!chain.s2) return est;
  est.reflected_comm = priors.estimate_stage2(trial.obs2, plan, est.direct);
  if (!chain.s3) return est;
  const std::vector<double> raw =
      chain.s3->pair_type == 1
          ? build_input_s3t1(trial.obs3, est.direct, est.echo, est.reflected_comm)
          : build_input_s3t2(ls_stage3(trial.obs3, plan, est.echo, est.direct, est.reflected_comm));
  const std::vector<double> out = harness_detail::run_bundle(*chain.s3, raw);
  est.reflected_sensing = postprocess_stage3(out, chain.s3->output_scale, sys.tx_antennas, sys.irs_elements);
  return est;
}

// ---- training orchestration ---------------------------------------------------

/// Pooled dataset across the training SNR grid: `originals_total` channel
/// draws distributed as evenly as possible over the grid conditions.
inline SampleSet make_pooled_dataset(int stage, int pair_type, const SystemConfig& sys,
                                     std::span<const double> snr_grid_db, std::size_t originals_total,
                                     std::size_t copies, std::uint64_t seed,
                                     const PriorEstimator& priors = ls_priors()) {
  if (snr_grid_db.empty()) throw std::invalid_argument("make_pooled_dataset: empty SNR grid");
  constexpr std::uint64_t kPoolTag = 0x706fULL;
  SampleSet pooled;
  pooled.copies_per_original = copies;
  pooled.output_scale = sys.output_scale;
  const std::size_t base = originals_total / snr_grid_db.size();
  const std::size_t extra = originals_total % snr_grid_db.size();
  for (std::size_t gi = 0; gi < snr_grid_db.size(); ++gi) {
    const std::size_t share = base + (gi < extra ? 1 : 0);
    if (share == 0) continue;
    SampleSet part = make_dataset(stage, pair_type, sys, snr_grid_db[gi], share, copies,
                                  derive_seed(seed, kPoolTag, gi), priors);
    pooled.originals += part.originals;
    for (IoPair& pair : part.pairs) pooled.pairs.push_back(std::move(pair));
  }
  return pooled;
}

/// Train one (stage, pair type) network on the pooled training grid:
/// deterministic shuffle/split, standardization fitted on the training rows
/// only, DE-CNN for stage 1 and RE-CNN for stages 2-3.
inline ModelBundle train_stage_model(const ExperimentConfig& cfg, int stage, int pair_type,
                                     const PriorEstimator& priors = ls_priors(),
                                     TrainHistory* history_out = nullptr) {
  constexpr std::uint64_t kDataTag = 0x7464ULL;
  constexpr std::uint64_t kSplitTag = 0x7370ULL;
  constexpr std::uint64_t kNetTag = 0x6e74ULL;
  constexpr std::uint64_t kEpochTag = 0x6570ULL;
  const std::uint64_t model_id = std::uint64_t(stage) * 2 + std::uint64_t(pair_type);

  SampleSet set = make_pooled_dataset(stage, pair_type, cfg.system, cfg.train_snr_grid_db,
                                      cfg.originals, cfg.copies,
                                      derive_seed(cfg.system.seed, kDataTag, model_id), priors);
  if (set.pairs.size() < 2) throw std::invalid_argument("train_stage_model: need at least two samples");

  // deterministic shuffled split, validation tail
  std::vector<std::size_t> order(set.pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng = substream(cfg.system.seed, kSplitTag, model_id);
  for (std::size_t i = order.size(); i-- > 1;) {
    const std::size_t j = std::size_t(split_rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  std::size_t val_count = std::size_t(std::lround(double(order.size()) * cfg.train.validation_fraction));
  val_count = std::max<std::size_t>(1, std::min(val_count, order.size() - 1));
  const std::vector<std::size_t> train_rows(order.begin(), order.end() - long(val_count));
  const std::vector<std::size_t> val_rows(order.end() - long(val_count), order.end());

  fit_standardization(set, train_rows);
  apply_preprocessing(set);

  const std::size_t in_len = set.pairs.front().input.size();
  const std::size_t out_len = set.pairs.front().target.size();
  const std::uint64_t net_seed = derive_seed(cfg.system.seed, kNetTag, model_id);
  NetworkState net = stage == 1 ? build_de_cnn(in_len, out_len, net_seed)
                                : build_re_cnn(in_len, out_len, net_seed);

  auto views = [&set](const std::vector<std::size_t>& rows) {
    std::vector<Sample> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back({set.pairs[r].input, set.pairs[r].target});
    return out;
  };
  const std::vector<Sample> train_view = views(train_rows);
  const std::vector<Sample> val_view = views(val_rows);
  TrainHistory history =
      train(net, train_view, val_view, cfg.train, derive_seed(cfg.system.seed, kEpochTag, model_id));
  if (history_out) *history_out = std::move(history);

  ModelBundle bundle;
  bundle.stage = stage;
  bundle.pair_type = pair_type;
  bundle.net = std::move(net);
  bundle.input_mean = set.input_mean;
  bundle.input_std = set.input_std;
  bundle.output_scale = set.output_scale;
  return bundle;
}

// ---- evaluation ------------------------------------------------------------------

struct EvalRow {
  double x = 0.0;  // SNR in dB (or the sweep value for figures)
  std::string channel;
  std::string estimator;
  double value = 0.0;
};

/// An estimator entered into an evaluation run. LS when chain.s1 is null.
struct EstimatorSetup {
  std::string name;
  DlChain chain;
};

/// Average NMSE of every (estimator, channel) over shared Monte-Carlo trials:
/// all estimators see identical channel and noise draws per trial. Channels
/// whose chain is truncated are skipped for that estimator.
inline std::vector<EvalRow> evaluate_grid(const SystemConfig& sys, std::span<const double> snr_grid_db,
                                          std::size_t trials, std::span<const EstimatorSetup> estimators,
                                          std::uint64_t seed) {
  constexpr std::uint64_t kEvalTag = 0x6576ULL;
  const PilotPlan plan = build_plan(sys);
  std::vector<EvalRow> rows;
  for (std::size_t si = 0; si < snr_grid_db.size(); ++si) {
    const double snr_db = snr_grid_db[si];
    // accumulators per estimator: {echo, direct, reflected_comm, reflected_sensing}
    std::vector<std::array<double, 4>> sums(estimators.size(), {0.0, 0.0, 0.0, 0.0});
    std::vector<std::array<std::size_t, 4>> counts(estimators.size(), {0, 0, 0, 0});
    for (std::size_t t = 0; t < trials; ++t) {
      Rng rng = substream(derive_seed(seed, kEvalTag, si), 0, t);
      const TrialData trial = simulate_trial(sys, plan, snr_db, rng);
      for (std::size_t ei = 0; ei < estimators.size(); ++ei) {
        const EstimatorSetup& setup = estimators[ei];
        const ChannelEstimates est = setup.chain.s1 ? estimate_dl(trial, plan, sys, setup.chain)
                                                    : estimate_ls(trial, plan);
        const CMat* estimates[4] = {&est.echo, &est.direct, &est.reflected_comm, &est.reflected_sensing};
        const CMat* truths[4] = {&trial.truth.echo, &trial.truth.direct_comm,
                                 &trial.truth.reflected_comm, &trial.truth.reflected_sensing};
        for (std::size_t ci = 0; ci < 4; ++ci) {
          if (estimates[ci]->empty()) continue;
          sums[ei][ci] += nmse(*estimates[ci], *truths[ci]);
          counts[ei][ci] += 1;
        }
      }
    }
    static const char* kChannelNames[4] = {"direct-sensing", "direct-comm", "reflected-comm",
                                           "reflected-sensing"};
    for (std::size_t ei = 0; ei < estimators.size(); ++ei)
      for (std::size_t ci = 0; ci < 4; ++ci)
        if (counts[ei][ci] > 0)
          rows.push_back({snr_db, kChannelNames[ci], estimators[ei].name,
                          sums[ei][ci] / double(counts[ei][ci])});
  }
  return rows;
}

/// Full online pipeline for the configured estimator over the test SNR grid.
/// DL estimators require all three stage models in model_dir.
inline std::vector<EvalRow> run_pipeline(const ExperimentConfig& cfg) {
  std::vector<EstimatorSetup> estimators;
  ModelBundle s1, s2, s3;
  if (cfg.estimator == "ls") {
    estimators.push_back({"ls", {}});
  } else if (cfg.estimator == "dl-type1" || cfg.estimator == "dl-type2") {
    const int pair_type = cfg.estimator == "dl-type1" ? 1 : 2;
    s1 = load_model_bundle(model_base_path(cfg.model_dir, 1, pair_type));
    s2 = load_model_bundle(model_base_path(cfg.model_dir, 2, pair_type));
    s3 = load_model_bundle(model_base_path(cfg.model_dir, 3, pair_type));
    estimators.push_back({cfg.estimator, {&s1, &s2, &s3}});
  } else {
    throw std::invalid_argument("run_pipeline: unknown estimator " + cfg.estimator);
  }
  return evaluate_grid(cfg.system, cfg.test_snr_grid_db, cfg.eval_trials, estimators, cfg.system.seed);
}

inline void write_eval_csv(std::span<const EvalRow> rows, std::ostream& os, const char* x_name = "snr_db") {
  os << x_name << ",channel,estimator,nmse\n";
  for (const EvalRow& row : rows)
    os << format_value(row.x) << ',' << row.channel << ',' << row.estimator << ','
       << format_value(row.value) << '\n';
}

// ---- figure reproduction -----------------------------------------------------------

/// Scenario defaults for one figure id at desk or paper scale. CLI overrides
/// are applied on top of the returned config.
inline ExperimentConfig figure_defaults(int id, bool full_scale) {
  ExperimentConfig cfg;
  cfg.figure = id;
  cfg.full_scale = full_scale;
  cfg.model_dir.clear();  // figures train fresh unless a config names a model cache
  switch (id) {
    case 5:
      cfg.system = full_scale ? SystemConfig::make(4, 30) : SystemConfig::make(4, 8);
      cfg.train_snr_grid_db = {10.0, 15.0, 20.0};
      break;
    case 6:
    case 7:
      cfg.system = full_scale ? SystemConfig::make(4, 15) : SystemConfig::make(4, 8);
      cfg.train_snr_grid_db = {0.0, 10.0};
      cfg.test_snr_grid_db = {0.0, 10.0};
      break;
    case 8:
      cfg.system = SystemConfig::make(4, 15);
      break;
    default:
      throw std::invalid_argument("figure_defaults: known figures are 5, 6, 7, 8");
  }
  if (full_scale) {
    cfg.originals = 1000 * cfg.train_snr_grid_db.size();  // 10^3 originals per SNR condition
    cfg.copies = 10;
    cfg.eval_trials = 1000;
  }
  return cfg;
}

namespace harness_detail {

inline void write_figure_header(std::ostream& os, const char* x_name) {
  os << x_name << ",curve,value\n";
}

inline void append_rows(std::ostream& os, std::span<const EvalRow> rows, double x_override,
                        bool use_row_x, const std::string& suffix = "") {
  for (const EvalRow& row : rows) {
    const double x = use_row_x ? row.x : x_override;
    os << format_value(x) << ',' << row.estimator << ':' << row.channel << suffix << ','
       << format_value(row.value) << '\n';
  }
}

/// Train (or reuse from model_dir) the networks of one stage for both pair
/// types; returns loaded bundles keyed by pair type.
inline std::map<int, ModelBundle> obtain_stage_models(const ExperimentConfig& cfg, int stage,
                                                      const std::map<int, ModelBundle>* stage1,
                                                      const std::map<int, ModelBundle>* stage2) {
  std::map<int, ModelBundle> out;
  for (int pair_type : {1, 2}) {
    const std::string base = model_base_path(cfg.model_dir, stage, pair_type);
    if (!cfg.model_dir.empty() && model_bundle_exists(base)) {
      out[pair_type] = load_model_bundle(base);
      continue;
    }
    const ModelBundle* prior1 =
        stage1 && stage1->count(pair_type) ? &stage1->at(pair_type) : nullptr;
    const ModelBundle* prior2 =
        stage2 && stage2->count(pair_type) ? &stage2->at(pair_type) : nullptr;
    const DlPriors priors(cfg.system, prior1, prior2);
    out[pair_type] = train_stage_model(cfg, stage, pair_type, priors);
    if (!cfg.model_dir.empty()) {
      std::filesystem::create_directories(cfg.model_dir);
      save_model_bundle(out[pair_type], base);
    }
  }
  return out;
}

inline std::vector<EstimatorSetup> dl_and_ls_estimators(const std::map<int, ModelBundle>& s1,
                                                        const std::map<int, ModelBundle>* s2,
                                                        const std::map<int, ModelBundle>* s3) {
  std::vector<EstimatorSetup> setups;
  setups.push_back({"ls", {}});
  for (int pair_type : {1, 2}) {
    if (!s1.count(pair_type)) continue;
    DlChain chain;
    chain.s1 = &s1.at(pair_type);
    if (s2 && s2->count(pair_type)) chain.s2 = &s2->at(pair_type);
    if (chain.s2 && s3 && s3->count(pair_type)) chain.s3 = &s3->at(pair_type);
    setups.push_back({"dl-type" + std::to_string(pair_type), chain});
  }
  return setups;
}

}  // namespace harness_detail

/// Figure 5: NMSE versus SNR. Trains the stage-1 networks (both input
/// types); the reflected-stage networks are included only with
/// reflected_dl, whose parameter count is prohibitive at realistic L.
inline void reproduce_figure5(const ExperimentConfig& cfg, std::ostream& os) {
  const auto s1 = harness_detail::obtain_stage_models(cfg, 1, nullptr, nullptr);
  std::map<int, ModelBundle> s2, s3;
  if (cfg.reflected_dl) {
    s2 = harness_detail::obtain_stage_models(cfg, 2, &s1, nullptr);
    s3 = harness_detail::obtain_stage_models(cfg, 3, &s1, &s2);
  }
  const auto setups = harness_detail::dl_and_ls_estimators(s1, &s2, &s3);
  const auto rows = evaluate_grid(cfg.system, cfg.test_snr_grid_db, cfg.eval_trials, setups,
                                  cfg.system.seed);
  harness_detail::write_figure_header(os, "snr_db");
  harness_detail::append_rows(os, rows, 0.0, true);
}

/// Same scenario scalars with a different array/surface size.
inline SystemConfig resized_system(const SystemConfig& base, std::size_t m, std::size_t l) {
  SystemConfig sys = SystemConfig::make(m, l);
  sys.bs_power_dbm = base.bs_power_dbm;
  sys.ue_power_dbm = base.ue_power_dbm;
  sys.geometry = base.geometry;
  sys.aug_snr_db = base.aug_snr_db;
  sys.output_scale = base.output_scale;
  sys.seed = base.seed;
  return sys;
}

/// Figures 6 and 7: NMSE versus channel dimension (L or M) at fixed test
/// SNRs. Each sweep point gets its own scenario and, when networks are
/// requested, its own training run.
inline void reproduce_figure_dimension(int id, const ExperimentConfig& cfg, std::ostream& os) {
  const bool sweep_l = id == 6;
  std::vector<std::size_t> sweep;
  if (sweep_l) {
    sweep = cfg.full_scale ? std::vector<std::size_t>{5, 10, 15, 20, 25, 30}
                           : std::vector<std::size_t>{2, 4, 8};
  } else {
    sweep = cfg.full_scale ? std::vector<std::size_t>{2, 4, 6, 8} : std::vector<std::size_t>{2, 4};
  }
  harness_detail::write_figure_header(os, sweep_l ? "L" : "M");
  for (std::size_t value : sweep) {
    ExperimentConfig point = cfg;
    point.system = sweep_l ? resized_system(cfg.system, cfg.system.tx_antennas, value)
                           : resized_system(cfg.system, value, cfg.system.irs_elements);
    point.model_dir.clear();  // per-point scenarios do not share model files

    std::map<int, ModelBundle> s1, s2, s3;
    if (!sweep_l) s1 = harness_detail::obtain_stage_models(point, 1, nullptr, nullptr);
    if (cfg.reflected_dl) {
      if (sweep_l) s1 = harness_detail::obtain_stage_models(point, 1, nullptr, nullptr);
      s2 = harness_detail::obtain_stage_models(point, 2, &s1, nullptr);
      s3 = harness_detail::obtain_stage_models(point, 3, &s1, &s2);
    }
    std::vector<EstimatorSetup> setups =
        s1.empty() ? std::vector<EstimatorSetup>{{"ls", {}}}
                   : harness_detail::dl_and_ls_estimators(s1, &s2, &s3);
    const auto rows =
        evaluate_grid(point.system, cfg.test_snr_grid_db, cfg.eval_trials, setups, point.system.seed);
    for (const EvalRow& row : rows) {
      // one curve per estimator/channel/SNR combination
      os << format_value(double(value)) << ',' << row.estimator << ':' << row.channel << '@'
         << format_value(row.x) << "dB," << format_value(row.value) << '\n';
    }
  }
}

/// Figure 8: operation counts versus L (at M = 4) and versus M (at L = 15).
/// LS curves cost the type-2 preprocessing; dl-type1 costs the network
/// alone; dl-type2 adds the preprocessing to the network.
inline void reproduce_figure8(const ExperimentConfig&, std::ostream& os) {
  harness_detail::write_figure_header(os, "x");
  const std::vector<std::size_t> l_sweep{5, 10, 15, 20, 25, 30};
  const std::vector<std::size_t> m_sweep{2, 3, 4, 5, 6, 7, 8};

  auto emit = [&os](const std::string& sweep_name, std::size_t x, std::size_t m, std::size_t l) {
    const SystemConfig sys = SystemConfig::make(m, l);
    const SubframeSpans spans = SubframeSpans::of(sys);
    for (int stage = 1; stage <= 3; ++stage) {
      const CnnArch arch = stage == 1 ? CnnArch::direct : CnnArch::reflected;
      const std::string group = "s" + std::to_string(stage);
      const CostReport ls = input_gen_cost(stage, 2, m, l, spans);
      const CostReport cnn1 = cnn_cost(arch, input_length(stage, 1, sys), target_length(stage, sys));
      const CostReport cnn2 = cnn_cost(arch, input_length(stage, 2, sys), target_length(stage, sys));
      auto row = [&](const std::string& label, double v) {
        os << x << ',' << sweep_name << ':' << group << ':' << label << ',' << format_value(v) << '\n';
      };
      row("ls:adds", ls.adds);
      row("ls:mults", ls.mults);
      row("dl-type1:adds", cnn1.adds);
      row("dl-type1:mults", cnn1.mults);
      row("dl-type2:adds", ls.adds + cnn2.adds);
      row("dl-type2:mults", ls.mults + cnn2.mults);
    }
  };
  for (std::size_t l : l_sweep) emit("vsL", l, 4, l);
  for (std::size_t m : m_sweep) emit("vsM", m, m, 15);
}

inline void reproduce_figure(int id, const ExperimentConfig& cfg, std::ostream& os) {
  switch (id) {
    case 5: reproduce_figure5(cfg, os); break;
    case 6:
    case 7: reproduce_figure_dimension(id, cfg, os); break;
    case 8: reproduce_figure8(cfg, os); break;
    default: throw std::invalid_argument("reproduce_figure: known figures are 5, 6, 7, 8");
  }
}

}  // namespace isac
