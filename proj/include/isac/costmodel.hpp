#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "isac/config.hpp"

namespace isac {

/// Real-operation counts for one processing step. `fractional` marks counts
/// whose closed form is not an integer for the given parameters; the value
/// is reported as printed rather than rounded.
struct CostReport {
  double adds = 0.0;
  double mults = 0.0;
  std::string context;
  bool fractional = false;
};

namespace cost_detail {

inline CostReport from_thirds(long long adds_num, long long mults_num, std::string context) {
  CostReport report;
  report.adds = double(adds_num) / 3.0;
  report.mults = double(mults_num) / 3.0;
  report.context = std::move(context);
  report.fractional = (adds_num % 3 != 0) || (mults_num % 3 != 0);
  return report;
}

}  // namespace cost_detail

/// Cost of inverting a complex q x q matrix:
/// adds = (2/3) q (3q^2 + 3q - 1), mults = (1/3) q (4q^2 + 15q - 1).
inline CostReport inverse_cost(std::size_t q_size) {
  if (q_size < 1) throw std::invalid_argument("inverse_cost: q must be >= 1");
  const long long q = (long long)q_size;
  const long long adds_num = 2 * q * (3 * q * q + 3 * q - 1);
  const long long mults_num = q * (4 * q * q + 15 * q - 1);
  return cost_detail::from_thirds(adds_num, mults_num, "inverse:q=" + std::to_string(q_size));
}

struct SubframeSpans {
  std::size_t s1 = 1;  // C_s1
  std::size_t s2 = 0;  // C_s2 - C_s1
  std::size_t s3 = 0;  // C_s3 - C_s2

  static SubframeSpans of(const SystemConfig& cfg) {
    return {cfg.stage1_subframes(), cfg.stage2_subframes(), cfg.stage3_subframes()};
  }
};

/// Pre-processing cost of one input sample. Type-1 inputs reuse the raw
/// received signal and cost nothing; type-2 inputs pay for the LS estimate.
inline CostReport input_gen_cost(int stage, int pair_type, std::size_t m_size, std::size_t l_size,
                                 const SubframeSpans& spans) {
  if (m_size < 1 || l_size < 1) throw std::invalid_argument("input_gen_cost: M and L must be >= 1");
  const std::string context =
      "s" + std::to_string(stage) + "i" + std::to_string(pair_type) + ":inputgen";
  if (pair_type == 1) return {0.0, 0.0, context, false};
  if (pair_type != 2) throw std::invalid_argument("input_gen_cost: pair type must be 1 or 2");
  const long long m = (long long)m_size;
  const long long l = (long long)l_size;
  switch (stage) {
    case 1: {
      const long long c1 = (long long)spans.s1;
      const long long adds_num = 10 * c1 * m * (2 * m * m - 1) - 6 * m;
      const long long mults_num = 2 * c1 * m * (52 * m * m + 39 * m - 1) + 12 * m + 6;
      return cost_detail::from_thirds(adds_num, mults_num, context);
    }
    case 2: {
      const long long span = (long long)spans.s2;
      const long long adds_num =
          2 * span * (9 * m * m * m + 3 * m * m - 4 * m + 6 * l * l - 3 * l) + 2 * l * (3 * l * l - 1);
      const long long mults_num =
          span * (22 * m * m * m + 39 * m * m - m + 24 * l * l) + (4 * l * l + 15 * l + 1);
      return cost_detail::from_thirds(adds_num, mults_num, context);
    }
    case 3: {
      const long long span = (long long)spans.s3;
      const long long adds_num =
          2 * span * (9 * m * m * m + 6 * m * m - 4 * m + 3 * m * l + 6 * l * l - 3 * l) +
          2 * (3 * l * l - 1);
      const long long mults_num =
          span * (22 * m * m * m + 51 * m * m - m + 12 * m * l + 24 * l * l) +
          l * (4 * l * l + 15 * l - 1);
      return cost_detail::from_thirds(adds_num, mults_num, context);
    }
    default:
      throw std::invalid_argument("input_gen_cost: stage must be 1, 2 or 3");
  }
}

enum class CnnArch { direct, reflected };

// Table-fixed architecture constants shared with the network builders.
inline constexpr long long kCnnKernel = 4;
inline constexpr long long kDeConvFilters = 128;
inline constexpr long long kDeHiddenUnits = 200;
inline constexpr long long kReConvFilters1 = 128;
inline constexpr long long kReConvFilters2 = 64;
inline constexpr long long kReHiddenUnits1 = 600;
inline constexpr long long kReHiddenUnits2 = 900;

/// Inference cost of one forward pass; each activation counts as one real
/// addition.
inline CostReport cnn_cost(CnnArch arch, std::size_t input_len, std::size_t output_len) {
  const long long eta1 = (long long)input_len;
  const long long out = (long long)output_len;
  if (eta1 < kCnnKernel) throw std::invalid_argument("cnn_cost: input shorter than kernel");
  if (arch == CnnArch::direct) {
    const long long eta_f2 = eta1 - kCnnKernel + 1;
    const long long flat = kDeConvFilters * eta_f2;
    CostReport report;
    report.adds = double(flat * (kCnnKernel + kDeHiddenUnits + 1) + out * (kDeHiddenUnits + 1) +
                         kDeHiddenUnits);
    report.mults = double(flat * (kCnnKernel + kDeHiddenUnits) + kDeHiddenUnits * out);
    report.context = "de-cnn";
    return report;
  }
  const long long eta_f2 = eta1 - kCnnKernel + 1;
  const long long flat2 = kReConvFilters1 * eta_f2;
  if (flat2 < kCnnKernel) throw std::invalid_argument("cnn_cost: flattened input shorter than kernel");
  const long long eta_f3 = flat2 - kCnnKernel + 1;
  const long long flat3 = kReConvFilters2 * eta_f3;
  CostReport report;
  report.adds = double(flat2 * (kCnnKernel + 1) + flat3 * (kCnnKernel + 1) +
                       kReHiddenUnits2 * (kReHiddenUnits1 + 1) + out * (kReHiddenUnits2 + 1) +
                       kReHiddenUnits1 * (flat3 + 1));
  report.mults = double(flat2 * kCnnKernel + flat3 * kCnnKernel + kReHiddenUnits2 * kReHiddenUnits1 +
                        out * kReHiddenUnits2 + flat3 * kReHiddenUnits1);
  report.context = "re-cnn";
  return report;
}

/// Every per-sample cost entry of one (M, L) scenario: input generation and
/// CNN inference for both pair types of all three stages.
inline std::vector<CostReport> scenario_costs(std::size_t m, std::size_t l, std::size_t c1 = 1) {
  const SystemConfig cfg = SystemConfig::make(m, l, c1);
  const SubframeSpans spans = SubframeSpans::of(cfg);
  std::vector<CostReport> out;
  for (int stage = 1; stage <= 3; ++stage) {
    for (int pair_type = 1; pair_type <= 2; ++pair_type) {
      out.push_back(input_gen_cost(stage, pair_type, m, l, spans));
      const CnnArch arch = stage == 1 ? CnnArch::direct : CnnArch::reflected;
      CostReport cnn = cnn_cost(arch, input_length(stage, pair_type, cfg), target_length(stage, cfg));
      cnn.context = "s" + std::to_string(stage) + "i" + std::to_string(pair_type) + ":cnn";
      out.push_back(cnn);
    }
  }
  return out;
}

/// Cost sweep over (M, L) scenarios. Columns: context, M, L, adds, mults.
inline void write_cost_sweep_csv(std::ostream& os,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& grid,
                                 std::size_t c1 = 1) {
  auto fmt = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  os << "context,M,L,adds,mults\n";
  for (const auto& [m, l] : grid)
    for (const CostReport& report : scenario_costs(m, l, c1))
      os << report.context << ',' << m << ',' << l << ',' << fmt(report.adds) << ','
         << fmt(report.mults) << '\n';
}

}  // namespace isac
