#pragma once

#include <stdexcept>
#include <utility>

#include "isac/airsim.hpp"
#include "isac/cmat.hpp"
#include "isac/protocol.hpp"

namespace isac {

/// Stage-1 least-squares estimates (echo M x 1, direct_comm 1 x M): project
/// each sub-frame row onto the pseudoinverses of the two orthogonal pilot
/// blocks and average over sub-frames.
inline std::pair<CMat, CMat> ls_stage1(const StageObservation& obs, const PilotPlan& plan) {
  if (obs.blocks.empty()) throw std::invalid_argument("ls_stage1: no sub-frames");
  const CMat bs_pinv = pinv(plan.bs_pilot_s1);
  const CMat ue_pinv = pinv(plan.ue_pilot_s1);
  CMat echo_bar(plan.bs_pilot_s1.rows(), 1);
  CMat direct_bar(1, plan.ue_pilot_s1.rows());
  for (const CMat& row : obs.blocks) {
    echo_bar += hermitian(matmul(row, bs_pinv));
    direct_bar += matmul(row, ue_pinv);
  }
  const cxd inv_count = 1.0 / double(obs.blocks.size());
  echo_bar *= inv_count;
  direct_bar *= inv_count;
  return {std::move(echo_bar), std::move(direct_bar)};
}

/// Stage-2 least-squares estimate of the reflected communication channel
/// (L x M). The direct contribution direct_hat * Z is removed from every
/// sub-frame, the pilot is peeled off via its pseudoinverse, and the stacked
/// rows are solved against the IRS phase schedule.
inline CMat ls_stage2(const StageObservation& obs, const PilotPlan& plan, const CMat& direct_hat) {
  const std::size_t subframes = plan.irs_phases_s2.rows();
  if (obs.blocks.size() != subframes) throw std::invalid_argument("ls_stage2: sub-frame count mismatch");
  const CMat pilot_pinv = pinv(plan.ue_pilot_s2);
  const CMat direct_part = matmul(direct_hat, plan.ue_pilot_s2);
  CMat stacked(subframes, plan.ue_pilot_s2.rows());
  for (std::size_t c = 0; c < subframes; ++c)
    stacked.set_row(c, matmul(obs.blocks[c] - direct_part, pilot_pinv));
  return matmul(pinv(plan.irs_phases_s2), stacked);
}

/// Stage-3 least-squares estimate of the reflected sensing channel (M x L).
/// Prior estimates cancel the stage-1 channels and the reflected
/// communication path; what remains is stacked = V * Gᴴ, solved as
/// G = stackedᴴ * pinv(Vᴴ).
inline CMat ls_stage3(const StageObservation& obs, const PilotPlan& plan, const CMat& echo_hat,
                      const CMat& direct_hat, const CMat& reflected_comm_hat) {
  const std::size_t subframes = plan.irs_phases_s3.rows();
  if (obs.blocks.size() != subframes) throw std::invalid_argument("ls_stage3: sub-frame count mismatch");
  const CMat pilot_pinv = pinv(plan.bs_pilot_s3);
  const CMat echo_part = matmul(hermitian(echo_hat), plan.bs_pilot_s3);
  CMat stacked(subframes, plan.bs_pilot_s3.rows());
  for (std::size_t c = 0; c < subframes; ++c) {
    const CMat v = plan.irs_phases_s3.row(c);
    const CMat comm_part = matmul(direct_hat + matmul(v, reflected_comm_hat), plan.ue_pilot_s3);
    stacked.set_row(c, matmul(obs.blocks[c] - comm_part - echo_part, pilot_pinv));
  }
  return matmul(hermitian(stacked), pinv(hermitian(plan.irs_phases_s3)));
}

}  // namespace isac
