// Joint beamforming and antenna placement by block coordinate descent on the
// weighted-MSE reformulation of sum-rate maximization.
//
// Blocks per outer iteration, in order: receivers u, weights w, beamformers V,
// then each antenna coordinate (ascending n) by exhaustive grid search. Every
// block is an exact minimizer of
//
//   F(x, V, u, w) = sum_m w_m e_m - ln w_m
//
// over its own variables, so F never increases.

#pragma once

#include "pinch/core_model.hpp"
#include "pinch/single_user.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pinch {

struct WmmseOptions {
  double grid_step_m = 0.0;  // <= 0 selects lambda_g / 50
  int max_iterations = 20;
  double tolerance = 1e-4;
  bool freeze_positions = false;
  std::optional<BeamMatrix> initial_beamformers;
  bool record_block_trace = true;
};

struct WmmseState {
  BeamMatrix v;
  Eigen::VectorXcd u;
  Eigen::VectorXd w;
  AntennaPlacement placement;
  std::vector<double> objective_trace;  // F after each outer iteration
  std::vector<double> block_trace;      // F after every block update, starting from the initial point
  std::vector<double> rate_trace;       // sum rate after each outer iteration
  std::vector<double> time_trace;       // seconds since the solve started, per outer iteration
  int iteration = 0;
  double sum_rate = 0.0;
};

inline Eigen::VectorXd uniform_noise(const SystemParams& p, Eigen::Index users) {
  return Eigen::VectorXd::Constant(users, p.noise_power_w);
}

inline double default_grid_step(const SystemParams& p) { return p.guided_wavelength() / 50.0; }

inline double mse(const ChannelMatrix& h, const BeamMatrix& v, const Eigen::VectorXcd& u,
                  const Eigen::VectorXd& noise, Eigen::Index m) {
  const Eigen::RowVectorXcd hv = h.row(m) * v;
  double e = std::norm(1.0 - u(m) * hv(m)) + noise(m) * std::norm(u(m));
  for (Eigen::Index i = 0; i < v.cols(); ++i)
    if (i != m) e += std::norm(u(m) * hv(i));
  return e;
}

inline Eigen::VectorXd mse_all(const ChannelMatrix& h, const BeamMatrix& v, const Eigen::VectorXcd& u,
                               const Eigen::VectorXd& noise) {
  Eigen::VectorXd e(h.rows());
  for (Eigen::Index m = 0; m < h.rows(); ++m) e(m) = mse(h, v, u, noise, m);
  return e;
}

inline double wmmse_objective(const ChannelMatrix& h, const BeamMatrix& v, const Eigen::VectorXcd& u,
                              const Eigen::VectorXd& w, const Eigen::VectorXd& noise) {
  const Eigen::VectorXd e = mse_all(h, v, u, noise);
  double f = 0.0;
  for (Eigen::Index m = 0; m < e.size(); ++m) f += w(m) * e(m) - std::log(w(m));
  return f;
}

// MMSE receivers u_m = (h_m^T v_m)^* / (sum_i |h_m^T v_i|^2 + sigma_m^2), the
// exact minimiser of e_m over u_m.
inline Eigen::VectorXcd update_receivers(const ChannelMatrix& h, const BeamMatrix& v,
                                         const Eigen::VectorXd& noise) {
  const ChannelMatrix hv = h * v;
  Eigen::VectorXcd u(h.rows());
  for (Eigen::Index m = 0; m < h.rows(); ++m)
    u(m) = std::conj(hv(m, m)) / (hv.row(m).cwiseAbs2().sum() + noise(m));
  return u;
}

inline Eigen::VectorXd update_weights(const Eigen::VectorXd& e) {
  Eigen::VectorXd w(e.size());
  for (Eigen::Index m = 0; m < e.size(); ++m) {
    if (!(e(m) > 0.0)) throw InternalError("non-positive MSE in weight update");
    w(m) = 1.0 / e(m);
  }
  return w;
}

// Minimizes sum_m w_m e_m subject to sum_m ||v_m||^2 <= p_max.
//
// Stationarity gives v_m = w_m u_m^* (A + mu I)^{-1} h_m^* with
// A = sum_k w_k |u_k|^2 h_k^* h_k^T. In the eigenbasis of A the transmit power
// is sum_j c_j / (lambda_j + mu)^2, which is bisected for mu when the
// unconstrained (mu = 0) solution is over budget.
inline BeamMatrix update_beamformers(const ChannelMatrix& h, const Eigen::VectorXcd& u,
                                     const Eigen::VectorXd& w, double p_max) {
  const Eigen::Index n_ant = h.cols();
  const Eigen::VectorXd d = (w.array() * u.cwiseAbs2().array()).matrix();
  const Eigen::MatrixXcd a = h.adjoint() * d.asDiagonal() * h;
  const Eigen::VectorXcd coeff = (w.array().cast<cplx>() * u.conjugate().array()).matrix();
  const Eigen::MatrixXcd rhs = h.adjoint() * coeff.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(a);
  if (eig.info() != Eigen::Success) throw InternalError("eigendecomposition failed in beamformer update");
  const Eigen::MatrixXcd& basis = eig.eigenvectors();
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXcd proj = basis.adjoint() * rhs;
  const Eigen::VectorXd weight = proj.rowwise().squaredNorm();

  const double lambda_max = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
  const double zero_eig = 1e-12 * std::max(lambda_max, std::numeric_limits<double>::min());
  const double weight_floor = 1e-24 * std::max(weight.sum(), std::numeric_limits<double>::min());

  auto power = [&](double mu) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < n_ant; ++j) {
      const double denom = lambda(j) + mu;
      if (denom <= zero_eig) {
        if (weight(j) > weight_floor) return std::numeric_limits<double>::infinity();
        continue;
      }
      total += weight(j) / (denom * denom);
    }
    return total;
  };
  auto solution = [&](double mu) {
    Eigen::VectorXd inv(n_ant);
    for (Eigen::Index j = 0; j < n_ant; ++j) {
      const double denom = lambda(j) + mu;
      inv(j) = denom <= zero_eig ? 0.0 : 1.0 / denom;
    }
    return BeamMatrix(basis * inv.asDiagonal() * proj);
  };

  if (power(0.0) <= p_max) return solution(0.0);

  double lo = 0.0;
  double hi = std::max(a.trace().real(), std::sqrt(weight.sum() / p_max));
  for (int k = 0; power(hi) > p_max; ++k) {
    if (k > 2000) throw InternalError("could not bracket the power multiplier");
    lo = hi;
    hi *= 2.0;
  }
  for (int k = 0; k < 500; ++k) {
    if ((p_max - power(hi)) / p_max < 1e-8) return solution(hi);
    const double mid = 0.5 * (lo + hi);
    if (power(mid) > p_max)
      lo = mid;
    else
      hi = mid;
  }
  return solution(hi);
}

// The WMMSE objective as a function of antenna n's coordinate, everything else
// held fixed. Only the terms depending on x_n are kept exactly; adding
// sum_m w_m (sigma_m^2 |u_m|^2 + 1) - ln w_m recovers F.
class PositionObjective {
 public:
  PositionObjective(const SystemParams& p, const UserLayout& users, const ChannelMatrix& h,
                    const BeamMatrix& v, const Eigen::VectorXcd& u, const Eigen::VectorXd& w, int n)
      : sqrt_eta_(std::sqrt(p.eta())),
        alpha_(p.atten_np_per_m),
        k_free_(2.0 * std::numbers::pi / p.wavelength()),
        k_guided_(2.0 * std::numbers::pi / p.guided_wavelength()) {
    const Eigen::Index m_users = h.rows();
    const ChannelMatrix hv = h * v;
    const double s = v.row(n).cwiseAbs2().sum();
    terms_.reserve(static_cast<std::size_t>(m_users));
    constant_ = 0.0;
    for (Eigen::Index m = 0; m < m_users; ++m) {
      // beta_{m,i} = u_m sum_{j != n} h_{m,j} v_{i,j}; gamma_m = beta_{m,m}
      cplx t = 0.0;
      double b = 0.0;
      for (Eigen::Index i = 0; i < v.cols(); ++i) {
        const cplx beta = u(m) * (hv(m, i) - h(m, n) * v(n, i));
        t += v(n, i) * std::conj(beta);
        b += std::norm(beta);
      }
      const cplx gamma = u(m) * (hv(m, m) - h(m, n) * v(n, m));
      Term term;
      term.user_x = users[static_cast<int>(m)].x;
      term.offset_sq = lateral_offset_sq(p, p.waveguide_y(n), users[static_cast<int>(m)]);
      term.quad = w(m) * std::norm(u(m)) * s;
      term.cross = 2.0 * w(m) * u(m) * (t - v(n, m));
      terms_.push_back(term);
      constant_ += w(m) * (b - 2.0 * gamma.real());
    }
  }

  double operator()(double x) const {
    const double decay = sqrt_eta_ * std::exp(-alpha_ * x);
    double value = constant_;
    for (const auto& t : terms_) {
      const double dx = x - t.user_x;
      const double d = std::sqrt(dx * dx + t.offset_sq);
      const double amp = decay / d;
      const double theta = k_free_ * d + k_guided_ * x;
      // h = amp e^{-j theta};  Re{h * cross} = amp (cr cos + ci sin)
      value += t.quad * amp * amp + amp * (t.cross.real() * std::cos(theta) + t.cross.imag() * std::sin(theta));
    }
    return value;
  }

 private:
  struct Term {
    double user_x = 0.0;
    double offset_sq = 0.0;
    double quad = 0.0;
    cplx cross;
  };
  double sqrt_eta_;
  double alpha_;
  double k_free_;
  double k_guided_;
  double constant_ = 0.0;
  std::vector<Term> terms_;
};

inline double position_objective(const SystemParams& p, const UserLayout& users, const ChannelMatrix& h,
                                 const WmmseState& s, int n, double x) {
  return PositionObjective(p, users, h, s.v, s.u, s.w, n)(x);
}

// Argmin over {0, step, 2 step, ..., x_max} together with the current
// coordinate, so the update never increases F even from an off-grid start.
// Ties go to the smaller coordinate.
inline double linear_search(const PositionObjective& objective, double x_max, double step, double current) {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be > 0");
  const auto count = static_cast<long long>(std::floor(x_max / step + 1e-9));
  double best_x = 0.0;
  double best = objective(0.0);
  for (long long k = 1; k <= count; ++k) {
    const double x = static_cast<double>(k) * step;
    const double value = objective(x);
    if (value < best) {
      best = value;
      best_x = x;
    }
  }
  if (static_cast<double>(count) * step < x_max) {
    const double value = objective(x_max);
    if (value < best) {
      best = value;
      best_x = x_max;
    }
  }
  const double at_current = objective(current);
  if (at_current < best || (at_current == best && current < best_x)) best_x = current;
  return best_x;
}

inline double update_position_linear_search(const SystemParams& p, const UserLayout& users,
                                            const ChannelMatrix& h, const WmmseState& s, int n,
                                            double grid_step) {
  const PositionObjective objective(p, users, h, s.v, s.u, s.w, n);
  return linear_search(objective, p.x_max(), grid_step, s.placement[n]);
}

inline std::vector<std::pair<double, double>> position_objective_profile(const PositionObjective& objective,
                                                                         double x_max, double step) {
  std::vector<std::pair<double, double>> out;
  const auto count = static_cast<long long>(std::floor(x_max / step + 1e-9));
  out.reserve(static_cast<std::size_t>(count + 1));
  for (long long k = 0; k <= count; ++k) {
    const double x = static_cast<double>(k) * step;
    out.emplace_back(x, objective(x));
  }
  return out;
}

inline void write_profile_csv(const std::string& path, const std::vector<std::pair<double, double>>& profile) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "x,objective\n";
  char buf[64];
  for (const auto& [x, f] : profile) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", x, f);
    out << buf;
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// Waveguide n targets the user closest to its line (smallest C, ties to the
// lower index) and takes the single-user closed form for that user.
inline AntennaPlacement nearest_user_placement(const SystemParams& p, const UserLayout& users) {
  AntennaPlacement placement;
  placement.x_coords.resize(static_cast<std::size_t>(p.num_waveguides));
  for (int n = 0; n < p.num_waveguides; ++n) {
    int best = 0;
    double best_c = std::numeric_limits<double>::infinity();
    for (int m = 0; m < users.size(); ++m) {
      const double c = lateral_offset_sq(p, p.waveguide_y(n), users[m]);
      if (c < best_c) {
        best_c = c;
        best = m;
      }
    }
    placement[n] = optimal_placement(p.atten_np_per_m, users[best].x, best_c, p.x_max());
  }
  return placement;
}

// Matched-filter directions with an equal power split.
inline BeamMatrix mrc_equal_power(const ChannelMatrix& h, double p_max) {
  BeamMatrix v(h.cols(), h.rows());
  const double per_user = std::sqrt(p_max / static_cast<double>(h.rows()));
  for (Eigen::Index m = 0; m < h.rows(); ++m) {
    const double norm = h.row(m).norm();
    if (norm > 0.0)
      v.col(m) = (per_user / norm) * h.row(m).adjoint();
    else
      v.col(m).setZero();
  }
  return v;
}

namespace detail {

template <typename PositionStep>
WmmseState run_wmmse(const SystemParams& p, ChannelMatrix& h, BeamMatrix v0, AntennaPlacement placement,
                     const WmmseOptions& opt, PositionStep&& update_positions) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const Eigen::VectorXd noise = uniform_noise(p, h.rows());

  WmmseState s;
  s.placement = std::move(placement);
  s.v = std::move(v0);
  s.u = Eigen::VectorXcd::Zero(h.rows());
  s.w = Eigen::VectorXd::Ones(h.rows());

  auto record = [&] {
    if (opt.record_block_trace) s.block_trace.push_back(wmmse_objective(h, s.v, s.u, s.w, noise));
  };
  record();

  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int t = 0; t < opt.max_iterations; ++t) {
    s.u = update_receivers(h, s.v, noise);
    record();
    s.w = update_weights(mse_all(h, s.v, s.u, noise));
    record();
    s.v = update_beamformers(h, s.u, s.w, p.total_power_w);
    record();
    update_positions(s, record);

    const double f = wmmse_objective(h, s.v, s.u, s.w, noise);
    s.objective_trace.push_back(f);
    s.rate_trace.push_back(sum_rate(h, s.v, noise));
    s.time_trace.push_back(std::chrono::duration<double>(clock::now() - start).count());
    s.iteration = t + 1;
    if (t > 0 && std::abs(f - previous) < opt.tolerance) break;
    previous = f;
  }
  s.sum_rate = sum_rate(h, s.v, noise);
  return s;
}

}  // namespace detail

// Beamforming-only WMMSE on a fixed channel (no placement degrees of freedom).
inline WmmseState solve_wmmse_fixed_channel(const SystemParams& p, ChannelMatrix h, const WmmseOptions& opt) {
  BeamMatrix v0 = opt.initial_beamformers ? *opt.initial_beamformers : mrc_equal_power(h, p.total_power_w);
  return detail::run_wmmse(p, h, std::move(v0), AntennaPlacement{}, opt, [](WmmseState&, auto&&) {});
}

inline WmmseState solve_wmmse(const SystemParams& p, const UserLayout& users, const AntennaPlacement& init,
                              const WmmseOptions& opt) {
  p.validate();
  if (users.size() != p.num_users) throw ValidationError("user layout size does not match num_users");
  ChannelMatrix h = channel_matrix(p, init, users);
  BeamMatrix v0 = opt.initial_beamformers ? *opt.initial_beamformers : mrc_equal_power(h, p.total_power_w);
  const double step = opt.grid_step_m > 0.0 ? opt.grid_step_m : default_grid_step(p);

  auto positions = [&](WmmseState& s, auto&& record) {
    if (opt.freeze_positions) return;
    for (int n = 0; n < p.num_waveguides; ++n) {
      s.placement[n] = update_position_linear_search(p, users, h, s, n, step);
      for (int m = 0; m < users.size(); ++m)
        h(m, n) = channel_coeff(p, s.placement[n], p.waveguide_y(n), users[m]);
      record();
    }
  };
  return detail::run_wmmse(p, h, std::move(v0), init, opt, positions);
}

}  // namespace pinch
