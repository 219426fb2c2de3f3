#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isac/airsim.hpp"
#include "isac/channels.hpp"
#include "isac/cmat.hpp"
#include "isac/config.hpp"
#include "isac/lsbase.hpp"
#include "isac/protocol.hpp"
#include "isac/rng.hpp"

namespace isac {

/// One training/testing sample: flattened real input and target vectors.
/// Layout of both is [all real parts..., all imaginary parts...].
struct IoPair {
  int stage = 0;
  int pair_type = 0;
  std::vector<double> input;
  std::vector<double> target;
};

/// A generated dataset plus the preprocessing state fitted on it.
struct SampleSet {
  std::vector<IoPair> pairs;
  std::size_t originals = 0;           // V
  std::size_t copies_per_original = 0; // U
  std::vector<double> input_mean;
  std::vector<double> input_std;
  double output_scale = 1e4;
};

namespace detail {

inline std::vector<double> split_re_im(const std::vector<cxd>& seq) {
  std::vector<double> out(2 * seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    out[i] = seq[i].real();
    out[seq.size() + i] = seq[i].imag();
  }
  return out;
}

inline void append_row_entries(std::vector<cxd>& seq, const CMat& row_or_col) {
  seq.insert(seq.end(), row_or_col.entries().begin(), row_or_col.entries().end());
}

}  // namespace detail

// ---- input construction ------------------------------------------------

/// Type 1, stage 1: the raw received sub-frame rows. Length 4*M*C_s1.
inline std::vector<double> build_input_s1t1(const StageObservation& obs) {
  std::vector<cxd> seq;
  for (const CMat& block : obs.blocks) detail::append_row_entries(seq, block);
  return detail::split_re_im(seq);
}

/// Type 2, stage 1: the stage-1 LS estimates [echoᵀ, direct]. Length 4M.
inline std::vector<double> build_input_s1t2(const CMat& echo_bar, const CMat& direct_bar) {
  std::vector<cxd> seq;
  detail::append_row_entries(seq, echo_bar);
  detail::append_row_entries(seq, direct_bar);
  return detail::split_re_im(seq);
}

/// Type 1, stage 2: received rows plus the chained direct-channel estimate.
/// Length 2M(C_s2 - C_s1 + 1).
inline std::vector<double> build_input_s2t1(const StageObservation& obs, const CMat& direct_hat) {
  std::vector<cxd> seq;
  for (const CMat& block : obs.blocks) detail::append_row_entries(seq, block);
  detail::append_row_entries(seq, direct_hat);
  return detail::split_re_im(seq);
}

/// Type 2, stage 2: vec of the LS reflected-communication estimate. Length 2ML.
inline std::vector<double> build_input_s2t2(const CMat& reflected_comm_bar) {
  return detail::split_re_im(vec_column_major(reflected_comm_bar));
}

/// Type 1, stage 3: received rows plus every chained estimate.
/// Length 2M(C_s3 - C_s2 + L + 2).
inline std::vector<double> build_input_s3t1(const StageObservation& obs, const CMat& direct_hat,
                                            const CMat& echo_hat, const CMat& reflected_comm_hat) {
  std::vector<cxd> seq;
  for (const CMat& block : obs.blocks) detail::append_row_entries(seq, block);
  detail::append_row_entries(seq, direct_hat);
  detail::append_row_entries(seq, echo_hat);
  const auto vec = vec_column_major(reflected_comm_hat);
  seq.insert(seq.end(), vec.begin(), vec.end());
  return detail::split_re_im(seq);
}

/// Type 2, stage 3: vec of the LS reflected-sensing estimate. Length 2ML.
inline std::vector<double> build_input_s3t2(const CMat& reflected_sensing_bar) {
  return detail::split_re_im(vec_column_major(reflected_sensing_bar));
}

/// Ground-truth target for a stage: stage 1 packs [echoᵀ, direct], stages 2
/// and 3 pack vec of the reflected channel.
inline std::vector<double> build_target(int stage, const ChannelRealization& ch) {
  std::vector<cxd> seq;
  switch (stage) {
    case 1:
      detail::append_row_entries(seq, ch.echo);
      detail::append_row_entries(seq, ch.direct_comm);
      break;
    case 2:
      seq = vec_column_major(ch.reflected_comm);
      break;
    case 3:
      seq = vec_column_major(ch.reflected_sensing);
      break;
    default:
      throw std::invalid_argument("build_target: stage must be 1, 2 or 3");
  }
  return detail::split_re_im(seq);
}

// ---- augmentation --------------------------------------------------------

namespace detail {

inline void perturb(CMat& channel, double snr_lin, Rng& rng) {
  if (channel.empty()) return;
  double power = 0.0;
  for (const auto& e : channel.entries()) power += std::norm(e);
  power /= double(channel.size());
  const double noise_var = power / snr_lin;
  for (auto& e : channel.entries()) e += complex_gaussian(rng, noise_var);
}

}  // namespace detail

/// The original realization followed by copies - 1 noisy variants. Every
/// stored channel matrix is perturbed independently with synthetic noise at
/// cfg.aug_snr_db relative to that matrix's own mean entry power. Copies do
/// not satisfy the cascade composition identities; the received-signal
/// equations consume the reflected channels directly.
inline std::vector<ChannelRealization> augment(const ChannelRealization& ch, const SystemConfig& cfg,
                                               std::size_t copies, Rng& rng) {
  if (copies < 1) throw std::invalid_argument("augment: need at least one variant");
  const double snr_lin = db_to_linear(cfg.aug_snr_db);
  std::vector<ChannelRealization> out;
  out.reserve(copies);
  out.push_back(ch);
  for (std::size_t u = 1; u < copies; ++u) {
    ChannelRealization copy = ch;
    detail::perturb(copy.echo, snr_lin, rng);
    detail::perturb(copy.direct_comm, snr_lin, rng);
    detail::perturb(copy.target_irs, snr_lin, rng);
    detail::perturb(copy.irs_bs, snr_lin, rng);
    detail::perturb(copy.ue_irs, snr_lin, rng);
    detail::perturb(copy.self_interference, snr_lin, rng);
    detail::perturb(copy.reflected_sensing, snr_lin, rng);
    detail::perturb(copy.reflected_comm, snr_lin, rng);
    out.push_back(std::move(copy));
  }
  return out;
}

// ---- chained prior estimates ---------------------------------------------

/// Supplies the previous-stage channel estimates embedded in stage-2/3
/// inputs. The base class chains the LS estimators; the DL harness overrides
/// both hooks with trained networks.
class PriorEstimator {
 public:
  virtual ~PriorEstimator() = default;

  /// (echo_hat, direct_hat) from the stage-1 observation.
  virtual std::pair<CMat, CMat> estimate_stage1(const StageObservation& obs, const PilotPlan& plan) const {
    return ls_stage1(obs, plan);
  }

  /// reflected_comm_hat from the stage-2 observation and a direct estimate.
  virtual CMat estimate_stage2(const StageObservation& obs, const PilotPlan& plan,
                               const CMat& direct_hat) const {
    return ls_stage2(obs, plan, direct_hat);
  }
};

inline const PriorEstimator& ls_priors() {
  static const PriorEstimator chain;
  return chain;
}

// ---- dataset generation ----------------------------------------------------

/// Generate originals x copies samples for one (stage, pair type, SNR)
/// condition. Each original v owns the substream (seed, v): channel draw,
/// augmentation noise and observation noise all come from it, so the set is
/// reproducible sample-by-sample. Copies share the original's target.
inline SampleSet make_dataset(int stage, int pair_type, const SystemConfig& cfg, double snr_db,
                              std::size_t originals, std::size_t copies, std::uint64_t seed,
                              const PriorEstimator& priors = ls_priors()) {
  if (stage < 1 || stage > 3) throw std::invalid_argument("make_dataset: stage must be 1, 2 or 3");
  if (pair_type < 1 || pair_type > 2) throw std::invalid_argument("make_dataset: pair type must be 1 or 2");
  const PilotPlan plan = build_plan(cfg);
  const double sigma2_s1 = noise_variance(1, cfg, snr_db);
  const double sigma2_s2 = stage >= 2 ? noise_variance(2, cfg, snr_db) : 0.0;
  const double sigma2_s3 = stage == 3 ? noise_variance(3, cfg, snr_db) : 0.0;

  constexpr std::uint64_t kDatasetTag = 0x6473ULL;
  SampleSet set;
  set.originals = originals;
  set.copies_per_original = copies;
  set.output_scale = cfg.output_scale;
  set.pairs.reserve(originals * copies);

  for (std::size_t v = 0; v < originals; ++v) {
    Rng rng = substream(seed, kDatasetTag, v);
    const ChannelRealization original = realize(cfg, rng);
    const auto variants = augment(original, cfg, copies, rng);
    const std::vector<double> target = build_target(stage, original);

    for (const ChannelRealization& variant : variants) {
      IoPair pair;
      pair.stage = stage;
      pair.pair_type = pair_type;
      pair.target = target;

      const StageObservation obs1 = receive_stage1(plan, variant, sigma2_s1, cfg.stage1_subframes(), rng);
      if (stage == 1) {
        if (pair_type == 1) {
          pair.input = build_input_s1t1(obs1);
        } else {
          const auto [echo_bar, direct_bar] = ls_stage1(obs1, plan);
          pair.input = build_input_s1t2(echo_bar, direct_bar);
        }
      } else {
        const auto [echo_hat, direct_hat] = priors.estimate_stage1(obs1, plan);
        const StageObservation obs2 = receive_stage2(plan, variant, sigma2_s2, rng);
        if (stage == 2) {
          pair.input = pair_type == 1 ? build_input_s2t1(obs2, direct_hat)
                                      : build_input_s2t2(ls_stage2(obs2, plan, direct_hat));
        } else {
          const CMat reflected_comm_hat = priors.estimate_stage2(obs2, plan, direct_hat);
          const StageObservation obs3 = receive_stage3(plan, variant, sigma2_s3, rng);
          pair.input = pair_type == 1
                           ? build_input_s3t1(obs3, direct_hat, echo_hat, reflected_comm_hat)
                           : build_input_s3t2(ls_stage3(obs3, plan, echo_hat, direct_hat, reflected_comm_hat));
        }
      }
      set.pairs.push_back(std::move(pair));
    }
  }
  return set;
}

// ---- standardization and postprocessing -----------------------------------

/// Fit per-feature mean/std over the given rows (all rows when empty).
/// Standard deviations are floored at 1e-12.
inline void fit_standardization(SampleSet& set, std::span<const std::size_t> rows = {}) {
  if (set.pairs.empty()) throw std::invalid_argument("fit_standardization: empty sample set");
  const std::size_t dim = set.pairs.front().input.size();
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(set.pairs.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  set.input_mean.assign(dim, 0.0);
  set.input_std.assign(dim, 0.0);
  for (std::size_t r : rows)
    for (std::size_t i = 0; i < dim; ++i) set.input_mean[i] += set.pairs[r].input[i];
  for (double& m : set.input_mean) m /= double(rows.size());
  for (std::size_t r : rows)
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = set.pairs[r].input[i] - set.input_mean[i];
      set.input_std[i] += d * d;
    }
  for (double& s : set.input_std) s = std::max(std::sqrt(s / double(rows.size())), 1e-12);
}

inline std::vector<double> standardized_input(std::span<const double> raw,
                                              std::span<const double> mean,
                                              std::span<const double> stdev) {
  if (raw.size() != mean.size() || raw.size() != stdev.size())
    throw std::invalid_argument("standardized_input: length mismatch");
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean[i]) / stdev[i];
  return out;
}

inline std::vector<double> scaled_target(std::span<const double> raw, double output_scale) {
  std::vector<double> out(raw.begin(), raw.end());
  for (double& x : out) x *= output_scale;
  return out;
}

/// Standardize every input and scale every target in place, using the stats
/// already fitted on the set.
inline void apply_preprocessing(SampleSet& set) {
  if (set.input_mean.empty()) throw std::logic_error("apply_preprocessing: fit_standardization first");
  for (IoPair& pair : set.pairs) {
    pair.input = standardized_input(pair.input, set.input_mean, set.input_std);
    pair.target = scaled_target(pair.target, set.output_scale);
  }
}

namespace detail {

inline std::vector<cxd> recombine(std::span<const double> output, double output_scale) {
  if (output.size() % 2 != 0) throw std::invalid_argument("postprocess: odd output length");
  const std::size_t n = output.size() / 2;
  std::vector<cxd> seq(n);
  for (std::size_t i = 0; i < n; ++i) seq[i] = cxd{output[i], output[n + i]} / output_scale;
  return seq;
}

}  // namespace detail

/// Undo the output scaling and recombine real/imaginary halves into the
/// stage-1 channel estimates (echo M x 1, direct 1 x M).
inline std::pair<CMat, CMat> postprocess_stage1(std::span<const double> output, double output_scale,
                                                std::size_t m) {
  if (output.size() != 4 * m) throw std::invalid_argument("postprocess_stage1: length mismatch");
  const auto seq = detail::recombine(output, output_scale);
  CMat echo(m, 1);
  CMat direct(1, m);
  for (std::size_t i = 0; i < m; ++i) {
    echo(i, 0) = seq[i];
    direct(0, i) = seq[m + i];
  }
  return {std::move(echo), std::move(direct)};
}

inline CMat postprocess_stage2(std::span<const double> output, double output_scale, std::size_t l,
                               std::size_t m) {
  if (output.size() != 2 * l * m) throw std::invalid_argument("postprocess_stage2: length mismatch");
  return from_column_major(detail::recombine(output, output_scale), l, m);
}

inline CMat postprocess_stage3(std::span<const double> output, double output_scale, std::size_t m,
                               std::size_t l) {
  if (output.size() != 2 * l * m) throw std::invalid_argument("postprocess_stage3: length mismatch");
  return from_column_major(detail::recombine(output, output_scale), m, l);
}

// ---- dataset file format ----------------------------------------------------
//
// Flat little-endian binary: magic "ISACDS1"; stage, pair_type, V, U,
// input_len, target_len as uint32; all inputs row-major float64, then all
// targets; then input_mean, input_std and the output scale.

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("dataset: truncated header");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

inline void write_f64(std::ostream& os, std::span<const double> values) {
  os.write(reinterpret_cast<const char*>(values.data()), std::streamsize(values.size() * sizeof(double)));
}

inline void read_f64(std::istream& is, std::span<double> values) {
  is.read(reinterpret_cast<char*>(values.data()), std::streamsize(values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("dataset: truncated payload");
}

}  // namespace detail

inline void save_sample_set(const SampleSet& set, const std::string& path) {
  if (set.pairs.empty()) throw std::invalid_argument("save_sample_set: empty sample set");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_sample_set: cannot open " + path);
  const std::size_t input_len = set.pairs.front().input.size();
  const std::size_t target_len = set.pairs.front().target.size();
  os.write("ISACDS1", 7);
  detail::write_u32(os, std::uint32_t(set.pairs.front().stage));
  detail::write_u32(os, std::uint32_t(set.pairs.front().pair_type));
  detail::write_u32(os, std::uint32_t(set.originals));
  detail::write_u32(os, std::uint32_t(set.copies_per_original));
  detail::write_u32(os, std::uint32_t(input_len));
  detail::write_u32(os, std::uint32_t(target_len));
  for (const IoPair& pair : set.pairs) detail::write_f64(os, pair.input);
  for (const IoPair& pair : set.pairs) detail::write_f64(os, pair.target);
  std::vector<double> mean = set.input_mean, stdev = set.input_std;
  mean.resize(input_len, 0.0);
  stdev.resize(input_len, 1.0);
  detail::write_f64(os, mean);
  detail::write_f64(os, stdev);
  const double scale[1] = {set.output_scale};
  detail::write_f64(os, scale);
  if (!os) throw std::runtime_error("save_sample_set: write failed");
}

inline SampleSet load_sample_set(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_sample_set: cannot open " + path);
  char magic[7];
  is.read(magic, 7);
  if (!is || std::memcmp(magic, "ISACDS1", 7) != 0)
    throw std::runtime_error("load_sample_set: bad magic");
  const int stage = int(detail::read_u32(is));
  const int pair_type = int(detail::read_u32(is));
  SampleSet set;
  set.originals = detail::read_u32(is);
  set.copies_per_original = detail::read_u32(is);
  const std::size_t input_len = detail::read_u32(is);
  const std::size_t target_len = detail::read_u32(is);
  const std::size_t count = set.originals * set.copies_per_original;
  set.pairs.resize(count);
  for (IoPair& pair : set.pairs) {
    pair.stage = stage;
    pair.pair_type = pair_type;
    pair.input.resize(input_len);
    detail::read_f64(is, pair.input);
  }
  for (IoPair& pair : set.pairs) {
    pair.target.resize(target_len);
    detail::read_f64(is, pair.target);
  }
  set.input_mean.resize(input_len);
  set.input_std.resize(input_len);
  detail::read_f64(is, set.input_mean);
  detail::read_f64(is, set.input_std);
  double scale[1];
  detail::read_f64(is, scale);
  set.output_scale = scale[0];
  return set;
}

}  // namespace isac
