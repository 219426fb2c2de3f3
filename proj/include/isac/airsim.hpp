#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "isac/channels.hpp"
#include "isac/cmat.hpp"
#include "isac/config.hpp"
#include "isac/protocol.hpp"
#include "isac/rng.hpp"

namespace isac {

/// Received pilot blocks of one stage: one 1 x P row per sub-frame.
struct StageObservation {
  int stage = 0;
  std::vector<CMat> blocks;
  double noise_var = 0.0;  // linear power
  double snr_db = 0.0;
};

/// Nominal received signal power of a stage (linear mW), combining transmit
/// powers with the per-link path losses of the direct and cascaded paths.
inline double stage_rx_power_mw(int stage, const SystemConfig& cfg) {
  const Geometry& geo = cfg.geometry;
  const double rho1 = link_path_loss(geo, 0);
  const double rho2 = link_path_loss(geo, 1);
  const double rho3 = link_path_loss(geo, 2);
  const double rho4 = link_path_loss(geo, 3);
  const double rho5 = link_path_loss(geo, 4);
  const double pb = cfg.bs_power_mw();
  const double pu = cfg.ue_power_mw();
  switch (stage) {
    case 1: return pb * rho2 + pu * rho4;
    case 2: return pu * (rho4 + rho1 * rho5);
    case 3: return pb * (rho2 + rho1 * rho3) + pu * (rho4 + rho1 * rho5);
    default: throw std::invalid_argument("stage_rx_power_mw: stage must be 1, 2 or 3");
  }
}

inline double noise_variance(int stage, const SystemConfig& cfg, double snr_db) {
  return stage_rx_power_mw(stage, cfg) / db_to_linear(snr_db);
}

namespace detail {

inline void add_noise(CMat& row, double variance, Rng& rng) {
  for (auto& e : row.entries()) e += complex_gaussian(rng, variance);
}

}  // namespace detail

/// Stage 1 (IRS off): y_c = echoᴴ X + direct_comm Z + noise, per sub-frame.
inline StageObservation receive_stage1(const PilotPlan& plan, const ChannelRealization& ch,
                                       double noise_var, std::size_t subframes, Rng& rng) {
  const CMat signal = matmul(hermitian(ch.echo), plan.bs_pilot_s1) +
                      matmul(ch.direct_comm, plan.ue_pilot_s1);
  StageObservation obs;
  obs.stage = 1;
  obs.noise_var = noise_var;
  obs.blocks.reserve(subframes);
  for (std::size_t c = 0; c < subframes; ++c) {
    CMat row = signal;
    detail::add_noise(row, noise_var, rng);
    obs.blocks.push_back(std::move(row));
  }
  return obs;
}

/// Stage 2 (BS off): y_c = (direct_comm + v_c reflected_comm) Z + noise.
inline StageObservation receive_stage2(const PilotPlan& plan, const ChannelRealization& ch,
                                       double noise_var, Rng& rng) {
  StageObservation obs;
  obs.stage = 2;
  obs.noise_var = noise_var;
  const std::size_t subframes = plan.irs_phases_s2.rows();
  obs.blocks.reserve(subframes);
  for (std::size_t c = 0; c < subframes; ++c) {
    const CMat effective = ch.direct_comm + matmul(plan.irs_phases_s2.row(c), ch.reflected_comm);
    CMat row = matmul(effective, plan.ue_pilot_s2);
    detail::add_noise(row, noise_var, rng);
    obs.blocks.push_back(std::move(row));
  }
  return obs;
}

/// Stage 3 (both on): y_c = (echoᴴ + v_c reflected_sensingᴴ) X +
/// (direct_comm + v_c reflected_comm) Z + noise.
inline StageObservation receive_stage3(const PilotPlan& plan, const ChannelRealization& ch,
                                       double noise_var, Rng& rng) {
  StageObservation obs;
  obs.stage = 3;
  obs.noise_var = noise_var;
  const std::size_t subframes = plan.irs_phases_s3.rows();
  const CMat echo_row = hermitian(ch.echo);
  const CMat sensing_refl = hermitian(ch.reflected_sensing);
  obs.blocks.reserve(subframes);
  for (std::size_t c = 0; c < subframes; ++c) {
    const CMat v = plan.irs_phases_s3.row(c);
    const CMat sensing = matmul(echo_row + matmul(v, sensing_refl), plan.bs_pilot_s3);
    const CMat comm = matmul(ch.direct_comm + matmul(v, ch.reflected_comm), plan.ue_pilot_s3);
    CMat row = sensing + comm;
    detail::add_noise(row, noise_var, rng);
    obs.blocks.push_back(std::move(row));
  }
  return obs;
}

}  // namespace isac
