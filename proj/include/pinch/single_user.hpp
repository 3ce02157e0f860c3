// Single-user placement: closed-form optimum along one waveguide, the three
// placement schemes, the per-waveguide MISO extension and the analytical
// rate-loss expressions for neglecting attenuation.

#pragma once

#include "pinch/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pinch {

enum class PlacementScheme { IgnoreAttenuation, OptimalClosedForm, LongWaveguideApprox };

struct SingleUserResult {
  double antenna_x = 0.0;
  double snr = 0.0;
  double rate_bps_hz = 0.0;
  // LongWaveguideApprox only: 4 alpha^2 C >= 1, antenna placed at the feed.
  bool fallback = false;
  // LongWaveguideApprox only: the unconstrained point fell outside [0, x_max].
  bool clamped = false;
};

// Path-loss denominator ((x - xbar)^2 + C) e^{2 alpha x}; SNR = rho eta / cost.
inline double placement_cost(double alpha, double user_x, double c, double antenna_x) {
  const double dx = antenna_x - user_x;
  return (dx * dx + c) * std::exp(2.0 * alpha * antenna_x);
}

inline double received_snr(double rho, double eta, double alpha, double user_x, double c,
                           double antenna_x) {
  return rho * eta / placement_cost(alpha, user_x, c, antenna_x);
}

// Stationary point x2 = xbar + (-1 + sqrt(1 - 4 alpha^2 C)) / (2 alpha) of the
// cost, written without the cancellation of the textbook form. Requires
// 4 alpha^2 C < 1; alpha = 0 gives xbar.
inline double interior_stationary_point(double alpha, double user_x, double c) {
  const double t = 4.0 * alpha * alpha * c;
  if (t >= 1.0) throw std::domain_error("no interior stationary point: 4 alpha^2 C >= 1");
  return user_x - 2.0 * alpha * c / (1.0 + std::sqrt(1.0 - t));
}

// Globally optimal antenna coordinate on [0, x_max].
//
// The cost is increasing everywhere when 4 alpha^2 C >= 1. Otherwise its
// derivative vanishes at x1 < x2 (local max, local min), so the minimum over
// the interval is either the feed point or x2 clamped to x_max. Comparing the
// two covers users far down the waveguide (x1 > 0), where the feed point can
// still win even though x2 > 0.
inline double optimal_placement(double alpha, double user_x, double c, double x_max) {
  if (alpha == 0.0) return std::clamp(user_x, 0.0, x_max);
  if (4.0 * alpha * alpha * c >= 1.0) return 0.0;
  const double x2 = interior_stationary_point(alpha, user_x, c);
  if (x2 <= 0.0) return 0.0;
  const double candidate = std::min(x2, x_max);
  return placement_cost(alpha, user_x, c, candidate) < placement_cost(alpha, user_x, c, 0.0)
             ? candidate
             : 0.0;
}

// Exhaustive search over {0, step, 2 step, ...} within [0, x_max]; ties go to
// the smaller coordinate.
inline double grid_oracle(double alpha, double user_x, double c, double x_max, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be > 0");
  const auto count = static_cast<long long>(std::floor(x_max / step + 1e-9));
  double best_x = 0.0;
  double best_cost = placement_cost(alpha, user_x, c, 0.0);
  for (long long k = 1; k <= count; ++k) {
    const double x = static_cast<double>(k) * step;
    const double cost = placement_cost(alpha, user_x, c, x);
    if (cost < best_cost) {
      best_cost = cost;
      best_x = x;
    }
  }
  return best_x;
}

// SNR when the antenna sits directly above the user but attenuation applies.
inline double snr_scheme1(double rho, double eta, double alpha, double user_x, double c) {
  return rho * eta / (c * std::exp(2.0 * alpha * user_x));
}

// Small-attenuation approximation of the SNR at the long-waveguide placement.
// It upper-bounds the exact SNR at x = xbar - alpha C.
inline double snr_scheme3_approx(double rho, double eta, double alpha, double user_x, double c) {
  const double a = alpha * alpha * c;
  if (a >= 1.0) throw std::domain_error("snr_scheme3_approx requires alpha^2 C < 1");
  return rho * eta / (c * (1.0 - a) * std::exp(2.0 * alpha * user_x));
}

// Average rate loss (bps/Hz) of ignoring attenuation during placement, for a
// user uniform over a D x D region under a waveguide at height d_v.
inline double expected_rate_loss(double alpha, double region_side, double height) {
  return alpha * alpha / std::numbers::ln2 * (region_side * region_side / 12.0 + height * height);
}

// Largest region side keeping expected_rate_loss at or below epsilon.
inline double max_region_for_loss(double epsilon, double alpha, double height) {
  if (!(alpha > 0.0) || !(epsilon > 0.0))
    throw std::domain_error("max_region_for_loss requires epsilon > 0 and alpha > 0");
  const double budget = epsilon * std::numbers::ln2 / (alpha * alpha) - height * height;
  if (budget < 0.0)
    throw std::domain_error("rate-loss target infeasible: epsilon ln2 / alpha^2 < d_v^2");
  return std::sqrt(12.0 * budget);
}

inline double rate_from_snr(double snr) { return std::log2(1.0 + snr); }

inline SingleUserResult placement_by_scheme(PlacementScheme scheme, const SystemParams& p,
                                            const Position& user) {
  const double alpha = p.atten_np_per_m;
  const double c = lateral_offset_sq(p, p.waveguide_y(0), user);
  SingleUserResult r;
  switch (scheme) {
    case PlacementScheme::IgnoreAttenuation:
      r.antenna_x = user.x;
      break;
    case PlacementScheme::OptimalClosedForm:
      r.antenna_x = optimal_placement(alpha, user.x, c, p.x_max());
      break;
    case PlacementScheme::LongWaveguideApprox:
      if (4.0 * alpha * alpha * c >= 1.0) {
        r.antenna_x = 0.0;
        r.fallback = true;
      } else {
        const double x2 = interior_stationary_point(alpha, user.x, c);
        r.antenna_x = std::clamp(x2, 0.0, p.x_max());
        r.clamped = r.antenna_x != x2;
      }
      break;
  }
  r.snr = received_snr(p.snr_scale(), p.eta(), alpha, user.x, c, r.antenna_x);
  r.rate_bps_hz = rate_from_snr(r.snr);
  return r;
}

// Rate at the unconstrained long-waveguide point, allowing the antenna to sit
// behind the feed (x < 0). This is the optimistic curve of the three-scheme
// comparison; it is not a feasible placement.
inline double long_waveguide_unconstrained_rate(const SystemParams& p, const Position& user) {
  const double alpha = p.atten_np_per_m;
  const double c = lateral_offset_sq(p, p.waveguide_y(0), user);
  const double x = 4.0 * alpha * alpha * c >= 1.0 ? 0.0 : interior_stationary_point(alpha, user.x, c);
  return rate_from_snr(received_snr(p.snr_scale(), p.eta(), alpha, user.x, c, x));
}

struct MisoResult {
  AntennaPlacement placement;
  double snr = 0.0;
};

// One antenna per waveguide serving a single user with MRC. The SNR is
// separable across waveguides, so each antenna takes its own closed form.
inline MisoResult miso_placement(const SystemParams& p, const Position& user) {
  MisoResult r;
  r.placement.x_coords.resize(static_cast<std::size_t>(p.num_waveguides));
  double gain = 0.0;
  for (int n = 0; n < p.num_waveguides; ++n) {
    const double c = lateral_offset_sq(p, p.waveguide_y(n), user);
    r.placement[n] = optimal_placement(p.atten_np_per_m, user.x, c, p.x_max());
    gain += p.eta() / placement_cost(p.atten_np_per_m, user.x, c, r.placement[n]);
  }
  r.snr = p.snr_scale() * gain;
  return r;
}

}  // namespace pinch
