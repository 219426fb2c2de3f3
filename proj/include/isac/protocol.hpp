#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "isac/cmat.hpp"
#include "isac/config.hpp"

namespace isac {

/// Pilot matrices, IRS phase-shift schedules and on/off switches for the
/// three estimation stages. Stage 1: BS on / IRS off; stage 2: BS off / IRS
/// on; stage 3: both on.
struct PilotPlan {
  CMat bs_pilot_s1;    // M x 2M, scaled by sqrt(BS power)
  CMat ue_pilot_s1;    // M x 2M, orthogonal to bs_pilot_s1, scaled by sqrt(UE power)
  CMat ue_pilot_s2;    // M x M
  CMat bs_pilot_s3;    // M x M
  CMat ue_pilot_s3;    // M x M
  CMat irs_phases_s2;  // (c_s2 - c_s1) x L, unit-modulus entries
  CMat irs_phases_s3;  // (c_s3 - c_s2) x L
  std::array<bool, 3> bs_tx_on{true, false, true};
  std::array<bool, 3> irs_on{false, true, true};
};

inline PilotPlan build_plan(const SystemConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.tx_antennas;
  const std::size_t l = cfg.irs_elements;
  const double inv_sqrt_m = 1.0 / std::sqrt(double(m));
  const double bs_amp = std::sqrt(cfg.bs_power_mw());
  const double ue_amp = std::sqrt(cfg.ue_power_mw());

  PilotPlan plan;

  // Stage 1: split a 2M x 2M DFT matrix into BS rows (first M) and UE rows
  // (last M); distinct rows are orthogonal, which decouples the two signals.
  const CMat stacked = dft_matrix(2 * m, 2 * m, inv_sqrt_m);
  plan.bs_pilot_s1 = take_rows(stacked, 0, m) * cxd{bs_amp};
  plan.ue_pilot_s1 = take_rows(stacked, m, 2 * m) * cxd{ue_amp};

  const CMat square = dft_matrix(m, m, inv_sqrt_m);
  plan.ue_pilot_s2 = square * cxd{ue_amp};
  plan.bs_pilot_s3 = square * cxd{bs_amp};
  plan.ue_pilot_s3 = square * cxd{ue_amp};

  const std::size_t span2 = cfg.stage2_subframes();
  const std::size_t span3 = cfg.stage3_subframes();
  plan.irs_phases_s2 = take_rows(dft_matrix(std::max(span2, l), l, 1.0), 0, span2);
  plan.irs_phases_s3 = take_rows(dft_matrix(std::max(span3, l), l, 1.0), 0, span3);

  return plan;
}

}  // namespace isac
