#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace isac {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Scenario geometry: link distances d1..d5, per-link path-loss exponents,
/// reference loss, azimuth angles and element spacing.
struct Geometry {
  // d1: BS-IRS, d2: BS-target (echo), d3: target-IRS, d4: UE-BS, d5: UE-IRS. Meters.
  std::array<double, 5> distance_m{2.0, 140.0, 140.0, 50.0, 50.0};
  std::array<double, 5> pathloss_exponent{2.0, 3.5, 2.3, 3.0, 2.2};
  double ref_loss_db = -30.0;   // path loss at the reference distance, dB
  double ref_distance_m = 1.0;
  double bs_target_angle = 0.0;   // radians
  double target_irs_angle = 0.0;
  double irs_bs_angle = 0.0;
  double spacing_ratio = 0.5;   // element spacing over wavelength

  /// bs_target = arccos(d1/d5), target_irs = -arccos(d1/d5), irs_bs = pi.
  void derive_angles() {
    const double ratio = distance_m[0] / distance_m[4];
    if (!(ratio >= -1.0 && ratio <= 1.0)) throw std::invalid_argument("derive_angles: d1/d5 outside [-1, 1]");
    bs_target_angle = std::acos(ratio);
    target_irs_angle = -bs_target_angle;
    irs_bs_angle = std::numbers::pi;
  }

  void validate() const {
    for (double d : distance_m)
      if (!(d > 0.0)) throw std::invalid_argument("geometry: distances must be positive");
    if (!(ref_distance_m > 0.0)) throw std::invalid_argument("geometry: reference distance must be positive");
    if (!(spacing_ratio > 0.0)) throw std::invalid_argument("geometry: spacing ratio must be positive");
    for (double a : {bs_target_angle, target_irs_angle, irs_bs_angle})
      if (!(a >= -std::numbers::pi - 1e-12 && a <= std::numbers::pi + 1e-12))
        throw std::invalid_argument("geometry: angles must lie in [-pi, pi]");
  }

  static Geometry defaults() {
    Geometry g;
    g.derive_angles();
    return g;
  }
};

/// All scalars of one scenario. Sub-frame counters are cumulative boundaries:
/// stage 1 spans sub-frames [1, c_s1], stage 2 (c_s1, c_s2], stage 3 (c_s2, c_s3].
struct SystemConfig {
  std::size_t tx_antennas = 4;    // M, at both the BS and the UE
  std::size_t irs_elements = 30;  // L
  std::size_t c_s1 = 1;
  std::size_t c_s2 = 31;
  std::size_t c_s3 = 61;
  std::size_t p_s1 = 8;  // slots per sub-frame, stage 1 (= 2M)
  std::size_t p_s2 = 4;  // = M
  std::size_t p_s3 = 4;  // = M
  double bs_power_dbm = 20.0;
  double ue_power_dbm = 15.0;
  Geometry geometry = Geometry::defaults();
  double aug_snr_db = 30.0;    // synthetic-noise SNR for training-copy generation
  double output_scale = 1e4;   // target scaling factor applied before training
  std::uint64_t seed = 1;

  /// Config with minimal pilot overhead: c_s2 - c_s1 = c_s3 - c_s2 = L.
  static SystemConfig make(std::size_t m, std::size_t l, std::size_t c1 = 1) {
    SystemConfig cfg;
    cfg.tx_antennas = m;
    cfg.irs_elements = l;
    cfg.c_s1 = c1;
    cfg.c_s2 = c1 + l;
    cfg.c_s3 = c1 + 2 * l;
    cfg.p_s1 = 2 * m;
    cfg.p_s2 = m;
    cfg.p_s3 = m;
    return cfg;
  }

  std::size_t stage1_subframes() const { return c_s1; }
  std::size_t stage2_subframes() const { return c_s2 - c_s1; }
  std::size_t stage3_subframes() const { return c_s3 - c_s2; }

  double bs_power_mw() const { return db_to_linear(bs_power_dbm); }
  double ue_power_mw() const { return db_to_linear(ue_power_dbm); }

  void validate() const {
    if (tx_antennas < 1 || irs_elements < 1) throw std::invalid_argument("config: M and L must be >= 1");
    if (c_s1 < 1) throw std::invalid_argument("config: stage 1 needs at least one sub-frame");
    if (p_s1 != 2 * tx_antennas) throw std::invalid_argument("config: stage-1 sub-frame must have 2M slots");
    if (p_s2 != tx_antennas || p_s3 != tx_antennas)
      throw std::invalid_argument("config: stage-2/3 sub-frames must have M slots");
    if (c_s2 < c_s1 + irs_elements) throw std::invalid_argument("config: stage 2 needs at least L sub-frames");
    if (c_s3 < c_s2 + irs_elements) throw std::invalid_argument("config: stage 3 needs at least L sub-frames");
    geometry.validate();
  }
};

/// Flattened real input length of each (stage, pair type) sample.
inline std::size_t input_length(int stage, int pair_type, const SystemConfig& cfg) {
  const std::size_t m = cfg.tx_antennas;
  const std::size_t l = cfg.irs_elements;
  if (stage == 1) return pair_type == 1 ? 4 * m * cfg.stage1_subframes() : 4 * m;
  if (stage == 2) return pair_type == 1 ? 2 * m * (cfg.stage2_subframes() + 1) : 2 * m * l;
  if (stage == 3) return pair_type == 1 ? 2 * m * (cfg.stage3_subframes() + l + 2) : 2 * m * l;
  throw std::invalid_argument("input_length: stage must be 1, 2 or 3");
}

/// Flattened real target length of a stage.
inline std::size_t target_length(int stage, const SystemConfig& cfg) {
  return stage == 1 ? 4 * cfg.tx_antennas : 2 * cfg.tx_antennas * cfg.irs_elements;
}

}  // namespace isac
