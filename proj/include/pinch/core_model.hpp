// Geometry, unit conversions and the attenuated line-of-sight channel shared
// by every solver in the library.
//
// Coordinate frame: waveguides run parallel to the x-axis at height d_v, each
// fed at x = 0. Users live on the ground plane inside the square
// [L, L + D] x [-D/2, D/2], where L is the (optional) entry length routed
// outside the service region.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace pinch {

using cplx = std::complex<double>;
using ChannelMatrix = Eigen::MatrixXcd;   // M x N, row m is h_m^T
using BeamMatrix = Eigen::MatrixXcd;      // N x M, column m is v_m

inline constexpr double kSpeedOfLight = 299792458.0;

// Invalid user-supplied parameters. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Broken internal invariant (a bug, not bad input). The CLI maps this to 1.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline double atten_db_per_m_to_np(double a_db) {
  if (!(a_db >= 0.0)) throw std::domain_error("attenuation must be non-negative (dB/m)");
  return a_db * std::numbers::ln10 / 20.0;
}

inline double dbm_to_watts(double p_dbm) { return std::pow(10.0, (p_dbm - 30.0) / 10.0); }
inline double watts_to_dbm(double p_w) { return 10.0 * std::log10(p_w) + 30.0; }

struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct SystemParams {
  double carrier_freq_hz = 28e9;
  double atten_np_per_m = 0.08 * std::numbers::ln10 / 20.0;
  double n_eff = 1.4;
  double waveguide_height_m = 3.0;
  double region_side_m = 10.0;
  double entry_length_m = 0.0;
  int num_waveguides = 1;
  int num_users = 1;
  double total_power_w = 10.0;
  double noise_power_w = 1e-10;

  double wavelength() const { return kSpeedOfLight / carrier_freq_hz; }
  double guided_wavelength() const { return wavelength() / n_eff; }

  // Free-space gain constant, (lambda / 4 pi)^2, so that eta / d^2 is the
  // dimensionless Friis gain.
  double eta() const {
    const double a = wavelength() / (4.0 * std::numbers::pi);
    return a * a;
  }

  double x_max() const { return entry_length_m + region_side_m; }

  double waveguide_spacing() const {
    return num_waveguides > 1 ? region_side_m / (num_waveguides - 1) : 0.0;
  }

  // y-coordinate of waveguide n (0-based). A single waveguide sits at y = 0.
  double waveguide_y(int n) const {
    if (num_waveguides == 1) return 0.0;
    return n * waveguide_spacing() - region_side_m / 2.0;
  }

  double snr_scale() const { return total_power_w / noise_power_w; }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ValidationError(what);
    };
    require(carrier_freq_hz > 0.0, "carrier_freq_hz must be > 0");
    require(atten_np_per_m >= 0.0, "atten_np_per_m must be >= 0");
    require(n_eff >= 1.0, "n_eff must be >= 1");
    require(waveguide_height_m > 0.0, "waveguide_height_m must be > 0");
    require(region_side_m > 0.0, "region_side_m must be > 0");
    require(entry_length_m >= 0.0, "entry_length_m must be >= 0");
    require(num_waveguides >= 1, "num_waveguides must be >= 1");
    require(num_users >= 1, "num_users must be >= 1");
    require(total_power_w > 0.0, "total_power_w must be > 0");
    require(noise_power_w > 0.0, "noise_power_w must be > 0");
  }
};

struct UserLayout {
  std::vector<Position> positions;

  int size() const { return static_cast<int>(positions.size()); }
  const Position& operator[](int m) const { return positions[static_cast<std::size_t>(m)]; }

  bool inside(const SystemParams& p, double tol = 1e-9) const {
    const double half = p.region_side_m / 2.0;
    for (const auto& u : positions) {
      if (u.x < p.entry_length_m - tol || u.x > p.x_max() + tol) return false;
      if (u.y < -half - tol || u.y > half + tol) return false;
      if (u.z != 0.0) return false;
    }
    return true;
  }
};

struct AntennaPlacement {
  std::vector<double> x_coords;

  int size() const { return static_cast<int>(x_coords.size()); }
  double operator[](int n) const { return x_coords[static_cast<std::size_t>(n)]; }
  double& operator[](int n) { return x_coords[static_cast<std::size_t>(n)]; }

  bool feasible(const SystemParams& p) const {
    for (double x : x_coords)
      if (x < 0.0 || x > p.x_max()) return false;
    return true;
  }
};

// Squared horizontal+vertical offset between waveguide line at antenna_y and
// the user: the C term of the path-loss denominator.
inline double lateral_offset_sq(const SystemParams& p, double antenna_y, const Position& user) {
  const double dy = antenna_y - user.y;
  return dy * dy + p.waveguide_height_m * p.waveguide_height_m;
}

// h = sqrt(eta) e^{-alpha x} e^{-j(2pi/lambda d + 2pi/lambda_g x)} / d
inline cplx channel_coeff(const SystemParams& p, double antenna_x, double antenna_y,
                          const Position& user) {
  const double dx = antenna_x - user.x;
  const double d = std::sqrt(dx * dx + lateral_offset_sq(p, antenna_y, user));
  const double amp = std::sqrt(p.eta()) * std::exp(-p.atten_np_per_m * antenna_x) / d;
  const double phase = 2.0 * std::numbers::pi * (d / p.wavelength() + antenna_x / p.guided_wavelength());
  return std::polar(amp, -phase);
}

inline ChannelMatrix channel_matrix(const SystemParams& p, const AntennaPlacement& placement,
                                    const UserLayout& users) {
  if (placement.size() != p.num_waveguides)
    throw std::invalid_argument("placement has " + std::to_string(placement.size()) +
                                " antennas but params declare " +
                                std::to_string(p.num_waveguides) + " waveguides");
  ChannelMatrix h(users.size(), placement.size());
  for (int m = 0; m < users.size(); ++m)
    for (int n = 0; n < placement.size(); ++n)
      h(m, n) = channel_coeff(p, placement[n], p.waveguide_y(n), users[m]);
  return h;
}

// Per-user SINR with the plain-transpose signal model y_m = h_m^T v_m s_m + ...
inline Eigen::VectorXd sinr(const ChannelMatrix& h, const BeamMatrix& v, const Eigen::VectorXd& noise) {
  const Eigen::MatrixXd g = (h * v).cwiseAbs2();   // g(m, i) = |h_m^T v_i|^2
  Eigen::VectorXd out(h.rows());
  for (Eigen::Index m = 0; m < h.rows(); ++m) {
    const double interference = g.row(m).sum() - g(m, m);
    out(m) = g(m, m) / (interference + noise(m));
  }
  return out;
}

inline double sum_rate(const ChannelMatrix& h, const BeamMatrix& v, const Eigen::VectorXd& noise) {
  double total = 0.0;
  for (double s : sinr(h, v, noise)) total += std::log2(1.0 + s);
  return total;
}

inline double sum_rate(const ChannelMatrix& h, const BeamMatrix& v, double noise) {
  return sum_rate(h, v, Eigen::VectorXd::Constant(h.rows(), noise));
}

}  // namespace pinch
