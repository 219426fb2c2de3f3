#include "isac/features.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace {

using isac::CMat;
using isac::cxd;

isac::SystemConfig cfg48() { return isac::SystemConfig::make(4, 8); }

isac::ChannelRealization draw(const isac::SystemConfig& cfg, std::uint64_t idx = 0) {
  isac::Rng rng = isac::substream(cfg.seed, 61, idx);
  return isac::realize(cfg, rng);
}

TEST(BuildInput, Stage1Type1Length) {
  const auto cfg = cfg48();  // C_s1 = 1
  const auto plan = isac::build_plan(cfg);
  const auto ch = draw(cfg);
  isac::Rng rng = isac::substream(cfg.seed, 62);
  const auto obs = isac::receive_stage1(plan, ch, 0.0, cfg.stage1_subframes(), rng);
  const auto input = isac::build_input_s1t1(obs);
  EXPECT_EQ(input.size(), 16u);  // 4 M C_s1
  EXPECT_EQ(input.size(), isac::input_length(1, 1, cfg));
}

TEST(BuildInput, AllZeroObservationGivesZeroInput) {
  const auto cfg = cfg48();
  isac::StageObservation obs;
  obs.stage = 1;
  obs.blocks.assign(cfg.stage1_subframes(), CMat(1, 2 * cfg.tx_antennas));
  for (double x : isac::build_input_s1t1(obs)) EXPECT_EQ(x, 0.0);
}

TEST(BuildInput, Stage3Type1LengthFormula) {
  const auto cfg = cfg48();  // spans = L = 8
  const auto plan = isac::build_plan(cfg);
  const auto ch = draw(cfg);
  isac::Rng rng = isac::substream(cfg.seed, 63);
  const auto obs3 = isac::receive_stage3(plan, ch, 0.0, rng);
  const auto input = isac::build_input_s3t1(obs3, ch.direct_comm, ch.echo, ch.reflected_comm);
  EXPECT_EQ(input.size(), 144u);  // 2 M (span + L + 2) = 2*4*(8+8+2)
  EXPECT_EQ(input.size(), isac::input_length(3, 1, cfg));
}

TEST(BuildInput, RealPartsPrecedeImaginaryParts) {
  CMat echo(2, 1);
  echo(0, 0) = cxd{1.0, 5.0};
  echo(1, 0) = cxd{2.0, 6.0};
  CMat direct(1, 2);
  direct(0, 0) = cxd{3.0, 7.0};
  direct(0, 1) = cxd{4.0, 8.0};
  const auto input = isac::build_input_s1t2(echo, direct);
  const std::vector<double> expected{1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
  EXPECT_EQ(input, expected);
}

TEST(BuildTarget, LengthsAndRoundTrip) {
  const auto cfg = cfg48();
  const auto ch = draw(cfg);
  const auto t1 = isac::build_target(1, ch);
  EXPECT_EQ(t1.size(), 16u);  // 4M
  const auto t2 = isac::build_target(2, ch);
  EXPECT_EQ(t2.size(), 64u);  // 2ML

  // reassembling the complex channels from the flat layout is exact
  const auto [echo, direct] = isac::postprocess_stage1(isac::scaled_target(t1, cfg.output_scale),
                                                       cfg.output_scale, cfg.tx_antennas);
  EXPECT_LE(isac::max_abs_diff(echo, ch.echo), 1e-15);
  EXPECT_LE(isac::max_abs_diff(direct, ch.direct_comm), 1e-15);

  const CMat gu = isac::postprocess_stage2(isac::scaled_target(t2, cfg.output_scale),
                                           cfg.output_scale, cfg.irs_elements, cfg.tx_antennas);
  EXPECT_LE(isac::max_abs_diff(gu, ch.reflected_comm), 1e-12);

  const auto t3 = isac::build_target(3, ch);
  const CMat gt = isac::postprocess_stage3(isac::scaled_target(t3, cfg.output_scale),
                                           cfg.output_scale, cfg.tx_antennas, cfg.irs_elements);
  EXPECT_LE(isac::max_abs_diff(gt, ch.reflected_sensing), 1e-12);
}

TEST(BuildTarget, ZeroChannelsGiveZeroTarget) {
  isac::ChannelRealization ch;
  ch.echo = CMat(4, 1);
  ch.direct_comm = CMat(1, 4);
  for (double x : isac::build_target(1, ch)) EXPECT_EQ(x, 0.0);
}

TEST(Postprocess, ZeroVectorGivesZeroChannelsAndLengthIsChecked) {
  const std::vector<double> zero(16, 0.0);
  const auto [echo, direct] = isac::postprocess_stage1(zero, 1e4, 4);
  EXPECT_EQ(isac::frobenius(echo), 0.0);
  EXPECT_EQ(isac::frobenius(direct), 0.0);
  EXPECT_THROW(isac::postprocess_stage1(std::vector<double>(10, 0.0), 1e4, 4), std::invalid_argument);
}

TEST(Augment, SingleCopyIsOriginal) {
  const auto cfg = cfg48();
  const auto ch = draw(cfg);
  isac::Rng rng = isac::substream(cfg.seed, 64);
  const auto variants = isac::augment(ch, cfg, 1, rng);
  ASSERT_EQ(variants.size(), 1u);
  EXPECT_LE(isac::max_abs_diff(variants[0].reflected_comm, ch.reflected_comm), 0.0);
}

TEST(Augment, CopiesDifferFromOriginal) {
  const auto cfg = cfg48();
  const auto ch = draw(cfg);
  isac::Rng rng = isac::substream(cfg.seed, 65);
  const auto variants = isac::augment(ch, cfg, 3, rng);
  ASSERT_EQ(variants.size(), 3u);
  EXPECT_GT(isac::max_abs_diff(variants[1].echo, ch.echo), 0.0);
  EXPECT_GT(isac::max_abs_diff(variants[2].ue_irs, ch.ue_irs), 0.0);
  EXPECT_GT(isac::max_abs_diff(variants[1].reflected_sensing, ch.reflected_sensing), 0.0);
}

TEST(Augment, EmpiricalSnrMatchesConfig) {
  const auto cfg = cfg48();  // aug_snr_db = 30
  const auto ch = draw(cfg);
  double signal = 0.0, noise = 0.0;
  const int batches = 2500;  // 4 copies each -> 1e4 copies
  for (int i = 0; i < batches; ++i) {
    isac::Rng rng = isac::substream(cfg.seed, 66, std::uint64_t(i));
    const auto variants = isac::augment(ch, cfg, 5, rng);
    for (std::size_t u = 1; u < variants.size(); ++u) {
      const double s = isac::frobenius(ch.reflected_comm);
      const double n = isac::frobenius(variants[u].reflected_comm - ch.reflected_comm);
      signal += s * s;
      noise += n * n;
    }
  }
  const double snr_db = 10.0 * std::log10(signal / noise);
  EXPECT_NEAR(snr_db, 30.0, 1.0);
}

TEST(MakeDataset, CountsAndLayoutAudit) {
  const auto cfg = cfg48();
  const auto set = isac::make_dataset(2, 2, cfg, 10.0, 10, 10, 77);
  EXPECT_EQ(set.pairs.size(), 100u);
  for (const auto& pair : set.pairs) {
    ASSERT_EQ(pair.input.size(), isac::input_length(2, 2, cfg));
    ASSERT_EQ(pair.target.size(), isac::target_length(2, cfg));
  }
}

TEST(MakeDataset, TableLengthAuditAcrossStagesAndTypes) {
  const auto cfg = isac::SystemConfig::make(2, 4);
  for (int stage : {1, 2, 3}) {
    for (int pair_type : {1, 2}) {
      const auto set = isac::make_dataset(stage, pair_type, cfg, 15.0, 2, 2, 78);
      ASSERT_EQ(set.pairs.size(), 4u);
      for (const auto& pair : set.pairs) {
        ASSERT_EQ(pair.input.size(), isac::input_length(stage, pair_type, cfg))
            << "stage " << stage << " type " << pair_type;
        ASSERT_EQ(pair.target.size(), isac::target_length(stage, cfg));
      }
    }
  }
}

TEST(MakeDataset, CopiesShareTheOriginalTarget) {
  const auto cfg = cfg48();
  const auto set = isac::make_dataset(1, 1, cfg, 10.0, 3, 4, 79);
  ASSERT_EQ(set.pairs.size(), 12u);
  for (std::size_t v = 0; v < 3; ++v)
    for (std::size_t u = 1; u < 4; ++u)
      EXPECT_EQ(set.pairs[v * 4 + u].target, set.pairs[v * 4].target);
  EXPECT_NE(set.pairs[0].target, set.pairs[4].target);
}

TEST(MakeDataset, DeterministicRegeneration) {
  const auto cfg = cfg48();
  const auto a = isac::make_dataset(3, 2, cfg, 5.0, 4, 3, 80);
  const auto b = isac::make_dataset(3, 2, cfg, 5.0, 4, 3, 80);
  ASSERT_EQ(a.pairs.size(), b.pairs.size());
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    EXPECT_EQ(a.pairs[i].input, b.pairs[i].input);
    EXPECT_EQ(a.pairs[i].target, b.pairs[i].target);
  }
}

TEST(Standardize, TrainRowsHaveZeroMeanUnitStd) {
  const auto cfg = cfg48();
  auto set = isac::make_dataset(1, 2, cfg, 10.0, 20, 5, 81);
  isac::fit_standardization(set);
  isac::apply_preprocessing(set);
  const std::size_t dim = set.pairs.front().input.size();
  for (std::size_t i = 0; i < dim; ++i) {
    double mean = 0.0;
    for (const auto& pair : set.pairs) mean += pair.input[i];
    mean /= double(set.pairs.size());
    double var = 0.0;
    for (const auto& pair : set.pairs) {
      const double d = pair.input[i] - mean;
      var += d * d;
    }
    var /= double(set.pairs.size());
    EXPECT_LE(std::abs(mean), 1e-10);
    EXPECT_NEAR(std::sqrt(var), 1.0, 1e-6);
  }
}

TEST(Standardize, TargetScaling) {
  const std::vector<double> raw{1e-4};
  EXPECT_NEAR(isac::scaled_target(raw, 1e4)[0], 1.0, 1e-15);
}

TEST(Standardize, RefitOnStandardizedDataIsIdempotent) {
  const auto cfg = cfg48();
  auto set = isac::make_dataset(1, 2, cfg, 10.0, 10, 5, 82);
  isac::fit_standardization(set);
  isac::apply_preprocessing(set);

  isac::SampleSet again = set;
  isac::fit_standardization(again);
  // already standardized: refit is a no-op transform
  for (std::size_t i = 0; i < again.input_mean.size(); ++i) {
    EXPECT_LE(std::abs(again.input_mean[i]), 1e-10);
    EXPECT_NEAR(again.input_std[i], 1.0, 1e-6);
  }
  for (std::size_t p = 0; p < set.pairs.size(); ++p) {
    const auto twice = isac::standardized_input(set.pairs[p].input, again.input_mean, again.input_std);
    for (std::size_t i = 0; i < twice.size(); ++i)
      EXPECT_NEAR(twice[i], set.pairs[p].input[i], 1e-6);
  }
}

TEST(DatasetFile, RoundTripAndBadMagic) {
  const auto cfg = isac::SystemConfig::make(2, 4);
  auto set = isac::make_dataset(2, 1, cfg, 12.0, 3, 2, 83);
  isac::fit_standardization(set);

  const auto path = std::filesystem::temp_directory_path() / "isac_features_test.ds";
  isac::save_sample_set(set, path.string());
  const auto loaded = isac::load_sample_set(path.string());
  ASSERT_EQ(loaded.pairs.size(), set.pairs.size());
  EXPECT_EQ(loaded.originals, set.originals);
  EXPECT_EQ(loaded.copies_per_original, set.copies_per_original);
  EXPECT_EQ(loaded.output_scale, set.output_scale);
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    EXPECT_EQ(loaded.pairs[i].input, set.pairs[i].input);
    EXPECT_EQ(loaded.pairs[i].target, set.pairs[i].target);
    EXPECT_EQ(loaded.pairs[i].stage, 2);
    EXPECT_EQ(loaded.pairs[i].pair_type, 1);
  }
  EXPECT_EQ(loaded.input_mean, set.input_mean);
  EXPECT_EQ(loaded.input_std, set.input_std);

  // corrupt the magic
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("BOGUS!!", 7);
  }
  EXPECT_THROW(isac::load_sample_set(path.string()), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
