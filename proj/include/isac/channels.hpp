#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "isac/cmat.hpp"
#include "isac/config.hpp"
#include "isac/rng.hpp"

namespace isac {

// Rician K-factors of the §V-A-style scenario: the IRS-BS link has a strong
// line-of-sight component, the UE links are Rayleigh.
inline constexpr double kIrsBsRicianK = 10.0;
inline constexpr double kCommRicianK = 0.0;

/// One draw of every link channel, path loss applied.
struct ChannelRealization {
  CMat echo;                // M x 1, BS-target-BS
  CMat direct_comm;         // 1 x M, UE-BS
  CMat target_irs;          // M x L, BS-target-IRS
  CMat irs_bs;              // 1 x L
  CMat ue_irs;              // L x M, UE-IRS
  CMat self_interference;   // M x 1, stored only; assumed compensated at the receiver
  CMat reflected_sensing;   // M x L, target_irs * diag(conj(irs_bs))
  CMat reflected_comm;      // L x M, diag(irs_bs) * ue_irs
};

/// Array response a(theta): element m = exp(j 2 pi spacing_ratio m sin theta).
inline CMat steering_vector(double theta, std::size_t n, double spacing_ratio) {
  if (n < 1) throw std::invalid_argument("steering_vector: empty array");
  CMat out(n, 1);
  const double step = 2.0 * std::numbers::pi * spacing_ratio * std::sin(theta);
  for (std::size_t m = 0; m < n; ++m) out(m, 0) = std::polar(1.0, step * double(m));
  return out;
}

/// Sensing channels before path loss: the rank-1 BS-target-IRS matrix and the
/// BS-target-BS echo, both with unit-modulus reflection coefficients of
/// uniformly random phase.
inline std::pair<CMat, CMat> sample_sensing(const Geometry& geo, std::size_t m, std::size_t l, Rng& rng) {
  const cxd alpha1 = std::polar(1.0, uniform_phase(rng));
  const cxd alpha2 = std::polar(1.0, uniform_phase(rng));
  const CMat toward_target = steering_vector(geo.bs_target_angle, m, geo.spacing_ratio);
  const CMat toward_irs = steering_vector(geo.target_irs_angle, l, geo.spacing_ratio);
  CMat a = matmul(toward_target, hermitian(toward_irs));
  a *= alpha1;
  CMat b = toward_target;
  b *= alpha2;
  return {std::move(a), std::move(b)};
}

/// sqrt(K/(K+1)) * los + sqrt(1/(K+1)) * n with n entries i.i.d. CN(0, 1).
inline CMat sample_rician(double k_factor, const CMat& los, Rng& rng) {
  if (k_factor < 0.0) throw std::invalid_argument("sample_rician: K must be non-negative");
  const double los_gain = std::sqrt(k_factor / (k_factor + 1.0));
  const double nlos_gain = std::sqrt(1.0 / (k_factor + 1.0));
  CMat out(los.rows(), los.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.entries()[i] = los_gain * los.entries()[i] + nlos_gain * complex_gaussian(rng, 1.0);
  return out;
}

/// Linear power ratio rho0 * (d/d0)^(-gamma).
inline double path_loss(double distance_m, double exponent, const Geometry& geo) {
  if (!(distance_m > 0.0)) throw std::invalid_argument("path_loss: distance must be positive");
  return db_to_linear(geo.ref_loss_db) * std::pow(distance_m / geo.ref_distance_m, -exponent);
}

inline double link_path_loss(const Geometry& geo, std::size_t link_index) {
  return path_loss(geo.distance_m[link_index], geo.pathloss_exponent[link_index], geo);
}

/// Draw a full channel realization and apply per-link amplitude scaling
/// sqrt(rho). The reflected channels are composed from the scaled parts, so
/// the cascaded links carry the product of the per-hop losses.
inline ChannelRealization realize(const SystemConfig& cfg, Rng& rng) {
  const Geometry& geo = cfg.geometry;
  const std::size_t m = cfg.tx_antennas;
  const std::size_t l = cfg.irs_elements;

  ChannelRealization ch;
  auto [target_irs, echo] = sample_sensing(geo, m, l, rng);
  ch.target_irs = std::move(target_irs);
  ch.echo = std::move(echo);

  const CMat irs_bs_los = hermitian(steering_vector(geo.irs_bs_angle, l, geo.spacing_ratio));
  ch.irs_bs = sample_rician(kIrsBsRicianK, irs_bs_los, rng);
  ch.direct_comm = sample_rician(kCommRicianK, CMat(1, m), rng);
  ch.ue_irs = sample_rician(kCommRicianK, CMat(l, m), rng);

  ch.self_interference = CMat(m, 1);
  for (auto& e : ch.self_interference.entries()) e = complex_gaussian(rng, 1.0);

  ch.irs_bs *= std::sqrt(link_path_loss(geo, 0));
  ch.echo *= std::sqrt(link_path_loss(geo, 1));
  ch.target_irs *= std::sqrt(link_path_loss(geo, 2));
  ch.direct_comm *= std::sqrt(link_path_loss(geo, 3));
  ch.ue_irs *= std::sqrt(link_path_loss(geo, 4));

  ch.reflected_sensing = CMat(m, l);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < l; ++c)
      ch.reflected_sensing(r, c) = ch.target_irs(r, c) * std::conj(ch.irs_bs(0, c));

  ch.reflected_comm = CMat(l, m);
  for (std::size_t r = 0; r < l; ++r)
    for (std::size_t c = 0; c < m; ++c)
      ch.reflected_comm(r, c) = ch.irs_bs(0, r) * ch.ue_irs(r, c);

  return ch;
}

}  // namespace isac
