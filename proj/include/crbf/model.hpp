#pragma once

// Physical model of the secondary downlink: channels, beamformers, rates,
// interference and per-antenna power. Every evaluator here is exact; the
// concave surrogates used by the optimizer live in surrogate.hpp.
//
// Conventions:
//   * Channels and beamformers are N_t x K (or N_t x M) complex matrices with
//     one user per column. Row n of the beamforming matrix is the per-antenna
//     slice (the n-th weight of every user).
//   * Rates are in nats. Convert with to_bps() only when reporting.
//   * Powers are linear and normalized to the noise power.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace crbf {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline double to_bps(double nats) { return nats / std::numbers::ln2; }
inline double from_bps(double bps) { return bps * std::numbers::ln2; }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }
inline double to_db(double linear) { return 10.0 * std::log10(linear); }

/// SU and PU channel vectors for one network draw.
class ChannelSet {
 public:
  ChannelSet() = default;

  /// Columns of `su` are h_k, columns of `pu` are g_m. Throws
  /// std::invalid_argument on shape mismatch, K = 0, N_t = 0, non-finite
  /// entries, or an all-zero SU channel.
  ChannelSet(ComplexMatrix su, ComplexMatrix pu)
      : su_(std::move(su)), pu_(std::move(pu)) {
    if (su_.rows() < 1 || su_.cols() < 1) {
      throw std::invalid_argument("ChannelSet: need N_t >= 1 and K >= 1");
    }
    if (pu_.size() == 0) pu_.resize(su_.rows(), 0);
    if (pu_.rows() != su_.rows()) {
      throw std::invalid_argument(
          "ChannelSet: PU channels must have the same length as SU channels");
    }
    if (!su_.allFinite() || !pu_.allFinite()) {
      throw std::invalid_argument("ChannelSet: non-finite channel entry");
    }
    for (Index k = 0; k < su_.cols(); ++k) {
      if (su_.col(k).squaredNorm() == 0.0) {
        throw std::invalid_argument("ChannelSet: SU channel " +
                                    std::to_string(k) + " is identically zero");
      }
    }
  }

  Index n_antennas() const { return su_.rows(); }
  Index n_sus() const { return su_.cols(); }
  Index n_pus() const { return pu_.cols(); }

  const ComplexMatrix& su() const { return su_; }
  const ComplexMatrix& pu() const { return pu_; }
  auto h(Index k) const { return su_.col(k); }
  auto g(Index m) const { return pu_.col(m); }

  bool operator==(const ChannelSet& other) const {
    return su_ == other.su_ && pu_ == other.pu_;
  }

 private:
  ComplexMatrix su_;
  ComplexMatrix pu_;
};

struct ProblemConfig {
  Index n_antennas = 6;
  Index n_sus = 3;
  Index n_pus = 3;
  double power_budget = 100.0;
  std::vector<double> interference_caps;
  std::vector<double> rate_floors;  // nats
  std::vector<double> noise_powers;
  double omega = 100.0;

  /// Builds a config with equal caps, floors and unit noise, the usual
  /// simulation setting.
  static ProblemConfig uniform(Index n_antennas, Index n_sus, Index n_pus,
                               double power_budget, double interference_cap,
                               double rate_floor_nats) {
    ProblemConfig cfg;
    cfg.n_antennas = n_antennas;
    cfg.n_sus = n_sus;
    cfg.n_pus = n_pus;
    cfg.power_budget = power_budget;
    cfg.interference_caps.assign(static_cast<size_t>(n_pus), interference_cap);
    cfg.rate_floors.assign(static_cast<size_t>(n_sus), rate_floor_nats);
    cfg.noise_powers.assign(static_cast<size_t>(n_sus), 1.0);
    return cfg;
  }

  double interference_cap(Index m) const {
    return interference_caps.at(static_cast<size_t>(m));
  }
  double rate_floor(Index k) const { return rate_floors.at(static_cast<size_t>(k)); }
  double noise_power(Index k) const { return noise_powers.at(static_cast<size_t>(k)); }

  void validate() const {
    if (n_antennas < 1 || n_sus < 1 || n_pus < 0) {
      throw std::invalid_argument("ProblemConfig: invalid dimensions");
    }
    if (static_cast<Index>(interference_caps.size()) != n_pus ||
        static_cast<Index>(rate_floors.size()) != n_sus ||
        static_cast<Index>(noise_powers.size()) != n_sus) {
      throw std::invalid_argument("ProblemConfig: list length mismatch");
    }
    if (!(power_budget > 0.0) || !(omega > 0.0)) {
      throw std::invalid_argument("ProblemConfig: power budget and omega must be positive");
    }
    for (double v : interference_caps) {
      if (!(v > 0.0)) throw std::invalid_argument("ProblemConfig: interference caps must be positive");
    }
    for (double v : noise_powers) {
      if (!(v > 0.0)) throw std::invalid_argument("ProblemConfig: noise powers must be positive");
    }
    for (double v : rate_floors) {
      if (!(v >= 0.0)) throw std::invalid_argument("ProblemConfig: rate floors must be nonnegative");
    }
  }

  void check_matches(const ChannelSet& ch) const {
    validate();
    if (ch.n_antennas() != n_antennas || ch.n_sus() != n_sus || ch.n_pus() != n_pus) {
      throw std::invalid_argument("ProblemConfig does not match ChannelSet dimensions");
    }
  }
};

/// N_t x K; column k is w_k, row n is the per-antenna slice.
using BeamformingMatrix = ComplexMatrix;

struct SelectionState {
  RealVector alpha;  // in [0, 1]
  RealVector rho;    // soft power levels, >= 0
};

// ---------------------------------------------------------------------------
// Channel generation

namespace detail {

inline Complex standard_complex_normal(std::mt19937_64& rng) {
  // Each real component has variance 1/2 so that E|x|^2 = 1.
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  const double re = normal(rng);
  const double im = normal(rng);
  return {re, im};
}

inline ComplexMatrix complex_normal_matrix(Index rows, Index cols,
                                           std::mt19937_64& rng) {
  ComplexMatrix out(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) out(r, c) = standard_complex_normal(rng);
  }
  return out;
}

}  // namespace detail

/// I.i.d. CN(0, 1) entries for every SU and PU channel.
inline ChannelSet generate_channels(const ProblemConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ComplexMatrix su = detail::complex_normal_matrix(cfg.n_antennas, cfg.n_sus, rng);
  ComplexMatrix pu = detail::complex_normal_matrix(cfg.n_antennas, cfg.n_pus, rng);
  return ChannelSet(std::move(su), std::move(pu));
}

// ---------------------------------------------------------------------------
// Exact evaluators

/// Matrix of cross gains: entry (k, j) is h_k^H w_j.
inline ComplexMatrix cross_gains(const ChannelSet& ch, const BeamformingMatrix& w) {
  return ch.su().adjoint() * w;
}

/// Interference-plus-noise seen by user k.
inline double interference_plus_noise(const ComplexMatrix& gains, Index k,
                                      double noise_power) {
  double sum = noise_power;
  for (Index j = 0; j < gains.cols(); ++j) {
    if (j != k) sum += std::norm(gains(k, j));
  }
  return sum;
}

inline double achievable_rate(const ChannelSet& ch, const BeamformingMatrix& w,
                              Index k, double noise_power) {
  const ComplexMatrix gains = cross_gains(ch, w);
  const double signal = std::norm(gains(k, k));
  return std::log1p(signal / interference_plus_noise(gains, k, noise_power));
}

inline RealVector user_rates(const ChannelSet& ch, const BeamformingMatrix& w,
                             const ProblemConfig& cfg) {
  const ComplexMatrix gains = cross_gains(ch, w);
  RealVector rates(ch.n_sus());
  for (Index k = 0; k < ch.n_sus(); ++k) {
    rates(k) = std::log1p(std::norm(gains(k, k)) /
                          interference_plus_noise(gains, k, cfg.noise_power(k)));
  }
  return rates;
}

inline double sum_rate(const ChannelSet& ch, const BeamformingMatrix& w,
                       const ProblemConfig& cfg) {
  return user_rates(ch, w, cfg).sum();
}

/// Sum over users of |g_m^H w_k|^2.
inline double interference_at_pu(const ChannelSet& ch, const BeamformingMatrix& w,
                                 Index m) {
  return (ch.g(m).adjoint() * w).squaredNorm();
}

inline RealVector pu_interference(const ChannelSet& ch, const BeamformingMatrix& w) {
  RealVector out(ch.n_pus());
  for (Index m = 0; m < ch.n_pus(); ++m) out(m) = interference_at_pu(ch, w, m);
  return out;
}

/// ||w~_n||^2, the power radiated by antenna n over all users.
inline double antenna_power(const BeamformingMatrix& w, Index n) {
  double sum = 0.0;
  for (Index k = 0; k < w.cols(); ++k) sum += std::norm(w(n, k));
  return sum;
}

/// Total radiated power, summed antenna by antenna (n outer, k inner), i.e.
/// exactly the sum of antenna_power(w, n) over n.
inline double total_power(const BeamformingMatrix& w) {
  double sum = 0.0;
  for (Index n = 0; n < w.rows(); ++n) sum += antenna_power(w, n);
  return sum;
}

/// Rotates every w_k so that h_k^H w_k is real and nonnegative. Columns with
/// h_k^H w_k = 0 are left untouched.
inline BeamformingMatrix phase_align(const ChannelSet& ch, const BeamformingMatrix& w) {
  BeamformingMatrix out = w;
  for (Index k = 0; k < w.cols(); ++k) {
    const Complex gain = ch.h(k).dot(w.col(k));
    const double mag = std::abs(gain);
    if (mag > 0.0) out.col(k) *= std::conj(gain) / mag;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSI errors

namespace detail {

// Uniform sample from the complex ball {d in C^n : ||d||^2 <= radius_sq}.
inline ComplexVector uniform_complex_ball(Index n, double radius_sq,
                                          std::mt19937_64& rng) {
  ComplexVector dir(n);
  double norm_sq = 0.0;
  do {
    for (Index i = 0; i < n; ++i) dir(i) = standard_complex_normal(rng);
    norm_sq = dir.squaredNorm();
  } while (norm_sq == 0.0);
  dir /= std::sqrt(norm_sq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Radius density proportional to r^(2n - 1) in real dimension 2n.
  const double radius = std::sqrt(radius_sq) *
                        std::pow(unit(rng), 1.0 / (2.0 * static_cast<double>(n)));
  return radius * dir;
}

}  // namespace detail

/// Returns f + df for every channel, with ||dh_k||^2 <= eps_su ||h_k||^2 and
/// ||dg_m||^2 <= eps_pu ||g_m||^2. The error is uniform in the ball.
inline ChannelSet perturb_channels(const ChannelSet& ch, double eps_su, double eps_pu,
                                   std::uint64_t seed) {
  if (!(eps_su >= 0.0 && eps_su < 1.0 && eps_pu >= 0.0 && eps_pu < 1.0)) {
    throw std::invalid_argument("perturb_channels: uncertainties must lie in [0, 1)");
  }
  std::mt19937_64 rng(seed);
  ComplexMatrix su = ch.su();
  ComplexMatrix pu = ch.pu();
  const Index n = ch.n_antennas();
  for (Index k = 0; k < su.cols(); ++k) {
    if (eps_su > 0.0) {
      su.col(k) += detail::uniform_complex_ball(n, eps_su * ch.h(k).squaredNorm(), rng);
    }
  }
  for (Index m = 0; m < pu.cols(); ++m) {
    if (eps_pu > 0.0) {
      pu.col(m) += detail::uniform_complex_ball(n, eps_pu * ch.g(m).squaredNorm(), rng);
    }
  }
  return ChannelSet(std::move(su), std::move(pu));
}

}  // namespace crbf
