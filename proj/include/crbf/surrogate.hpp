#pragma once

// Concave lower bounds of the per-user rate and the convex upper bound of
// the bilinear antenna power term. All functions take the expansion point
// explicitly; none of them keeps state.
//
// Real layout of a beamforming matrix (shared with the cone builders):
// entry w_k[n] occupies indices 2 (k N_t + n) (real part) and
// 2 (k N_t + n) + 1 (imaginary part).

#include "crbf/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace crbf {

inline Index real_index(Index n_antennas, Index k, Index n) {
  return 2 * (k * n_antennas + n);
}

inline RealVector to_real(const BeamformingMatrix& w) {
  RealVector x(2 * w.size());
  for (Index k = 0; k < w.cols(); ++k) {
    for (Index n = 0; n < w.rows(); ++n) {
      const Index i = real_index(w.rows(), k, n);
      x(i) = w(n, k).real();
      x(i + 1) = w(n, k).imag();
    }
  }
  return x;
}

inline BeamformingMatrix from_real(const RealVector& x, Index n_antennas, Index n_users) {
  BeamformingMatrix w(n_antennas, n_users);
  for (Index k = 0; k < n_users; ++k) {
    for (Index n = 0; n < n_antennas; ++n) {
      const Index i = real_index(n_antennas, k, n);
      w(n, k) = Complex(x(i), x(i + 1));
    }
  }
  return w;
}

struct SurrogateCoefficients {
  double a = 0.0;
  double b = 0.0;
  double phi = 0.0;
  double t_ref = 0.0;  // Re{h_k^H w_k} at the expansion point
};

/// Interference-plus-noise over squared real signal amplitude.
/// Requires Re{h_k^H w_k} > 0, i.e. a phase-aligned beamformer.
inline double varphi(const ChannelSet& ch, const BeamformingMatrix& w, Index k,
                     double noise_power) {
  const ComplexMatrix gains = cross_gains(ch, w);
  const double re = gains(k, k).real();
  if (!(re > 0.0)) {
    throw std::domain_error("varphi: Re{h^H w} must be positive for user " +
                            std::to_string(k));
  }
  return interference_plus_noise(gains, k, noise_power) / (re * re);
}

inline SurrogateCoefficients surrogate_coeffs(const ChannelSet& ch,
                                              const BeamformingMatrix& w_prev,
                                              Index k, double noise_power) {
  SurrogateCoefficients c;
  c.phi = varphi(ch, w_prev, k, noise_power);
  c.t_ref = ch.h(k).dot(w_prev.col(k)).real();
  c.a = std::log1p(1.0 / c.phi) + 1.0 / (1.0 + c.phi);
  c.b = 1.0 / (c.phi * c.phi + c.phi);
  return c;
}

/// Linearized squared signal amplitude: t_ref (2 Re{h_k^H w_k} - t_ref).
/// The trust region is t > 0.
inline double trust_region_value(const ChannelSet& ch, const BeamformingMatrix& w_prev,
                                 const BeamformingMatrix& w, Index k) {
  const double t_ref = ch.h(k).dot(w_prev.col(k)).real();
  const double re = ch.h(k).dot(w.col(k)).real();
  return t_ref * (2.0 * re - t_ref);
}

/// Concave minorant of the rate of user k, tight at w = w_prev.
inline double surrogate_rate(const ChannelSet& ch, const BeamformingMatrix& w_prev,
                             const BeamformingMatrix& w, Index k, double noise_power) {
  const double t = trust_region_value(ch, w_prev, w, k);
  if (!(t > 0.0)) {
    throw std::domain_error("surrogate_rate: point outside the trust region for user " +
                            std::to_string(k));
  }
  const SurrogateCoefficients c = surrogate_coeffs(ch, w_prev, k, noise_power);
  const ComplexMatrix gains = cross_gains(ch, w);
  return c.a - c.b * interference_plus_noise(gains, k, noise_power) / t;
}

/// Gradient of surrogate_rate with respect to the real layout of w.
inline RealVector surrogate_rate_gradient(const ChannelSet& ch,
                                          const BeamformingMatrix& w_prev,
                                          const BeamformingMatrix& w, Index k,
                                          double noise_power) {
  const Index nt = ch.n_antennas();
  const SurrogateCoefficients c = surrogate_coeffs(ch, w_prev, k, noise_power);
  const ComplexMatrix gains = cross_gains(ch, w);
  const double interference = interference_plus_noise(gains, k, noise_power);
  const double t = c.t_ref * (2.0 * gains(k, k).real() - c.t_ref);
  const auto h = ch.h(k);

  RealVector grad = RealVector::Zero(2 * w.size());
  for (Index j = 0; j < w.cols(); ++j) {
    for (Index n = 0; n < nt; ++n) {
      const Index i = real_index(nt, j, n);
      const Complex dz_dre = std::conj(h(n));
      const Complex dz_dim = Complex(0.0, 1.0) * std::conj(h(n));
      if (j == k) {
        // d t / dx = 2 t_ref d Re{z} / dx
        const double dt_re = 2.0 * c.t_ref * dz_dre.real();
        const double dt_im = 2.0 * c.t_ref * dz_dim.real();
        grad(i) = c.b * interference * dt_re / (t * t);
        grad(i + 1) = c.b * interference * dt_im / (t * t);
      } else {
        const Complex zc = std::conj(gains(k, j));
        grad(i) = -c.b * 2.0 * (zc * dz_dre).real() / t;
        grad(i + 1) = -c.b * 2.0 * (zc * dz_dim).real() / t;
      }
    }
  }
  return grad;
}

/// Convex majorant of alpha * rho expanded at (alpha_prev, rho_prev).
inline double chi_bound(double alpha, double rho, double alpha_prev, double rho_prev) {
  if (!(alpha_prev > 0.0) || !(rho_prev > 0.0)) {
    throw std::domain_error("chi_bound: expansion point must be positive");
  }
  const double r = alpha_prev / rho_prev;
  return alpha * alpha / (2.0 * r) + 0.5 * r * rho * rho;
}

}  // namespace crbf
