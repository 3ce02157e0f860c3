// Low-complexity placement with matched-filter beamforming v_m = sqrt(kappa_m) h_m^*.
//
// Antenna coordinates climb a phase-free surrogate of the sum rate in which
// every cross term |h_m^T h_i^*|^2 is replaced by its Cauchy-Schwarz bound
// ||h_m||^2 ||h_i||^2. Power coefficients then climb the exact sum rate over
//
//   K = { kappa >= 0 : sum_m kappa_m ||h_m||^2 = P_max }.
//
// The two-stage solver freezes the resulting placement and refines the
// beamformers with WMMSE.

#pragma once

#include "pinch/core_model.hpp"
#include "pinch/line_search.hpp"
#include "pinch/wmmse.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace pinch {

struct MrcOptions {
  int max_iterations = 20;
  double tolerance = 1e-4;
  AscentOptions inner;
  // Attenuation assumed while placing antennas; unset means the true value.
  // Setting 0 gives the attenuation-blind design.
  std::optional<double> placement_atten_np_per_m;
};

struct MrcState {
  AntennaPlacement initial_placement;
  AntennaPlacement placement;
  Eigen::VectorXd kappa;
  std::vector<double> rate_trace;    // exact MRC sum rate after each outer iteration
  std::vector<double> approx_trace;  // surrogate value before and after each antenna sweep (pairs)
  std::vector<double> time_trace;
  int iteration = 0;
};

// Power coefficients scaled so that kappa_m ||h_m||^2 = p_max / M.
inline Eigen::VectorXd equal_power_kappa(const Eigen::VectorXd& norms_sq, double p_max) {
  const double share = p_max / static_cast<double>(norms_sq.size());
  return (share / norms_sq.array()).matrix();
}

inline Eigen::VectorXd channel_norms_sq(const ChannelMatrix& h) { return h.rowwise().squaredNorm(); }

// Sum rate of signal/cross coefficient pairs
//   f(z) = sum_m log2(1 + z_m s_m / (sum_{i != m} z_i c(m, i) + sigma^2)).
// With z = kappa, s = ||h||^4, c = |h_m^T h_i^*|^2 this is the exact MRC rate;
// with z = p = kappa ||h||^2 the coefficients absorb the scaling.
class PowerObjective {
 public:
  PowerObjective(Eigen::VectorXd signal, Eigen::MatrixXd cross, double noise)
      : signal_(std::move(signal)), cross_(std::move(cross)), noise_(noise) {}

  // Exact MRC rate in kappa coordinates.
  static PowerObjective in_kappa(const ChannelMatrix& h, double noise) {
    const Eigen::MatrixXd gram = (h * h.adjoint()).cwiseAbs2();
    return {gram.diagonal(), gram, noise};
  }

  // Exact MRC rate in per-user transmit-power coordinates p_m = kappa_m ||h_m||^2.
  static PowerObjective in_power(const ChannelMatrix& h, double noise) {
    const Eigen::MatrixXd gram = (h * h.adjoint()).cwiseAbs2();
    const Eigen::VectorXd norms = gram.diagonal().cwiseSqrt();
    Eigen::MatrixXd cross = gram;
    for (Eigen::Index i = 0; i < cross.cols(); ++i) cross.col(i) /= norms(i);
    return {norms, cross, noise};
  }

  double operator()(const Eigen::VectorXd& z) const {
    double f = 0.0;
    for (Eigen::Index m = 0; m < z.size(); ++m) {
      const double interference = this->interference(z, m);
      f += std::log2(1.0 + z(m) * signal_(m) / interference);
    }
    return f;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& z) const {
    const Eigen::Index m_users = z.size();
    Eigen::VectorXd inv_total(m_users), inv_interference(m_users);
    for (Eigen::Index m = 0; m < m_users; ++m) {
      const double i_m = interference(z, m);
      inv_interference(m) = 1.0 / i_m;
      inv_total(m) = 1.0 / (i_m + z(m) * signal_(m));
    }
    Eigen::VectorXd g(m_users);
    for (Eigen::Index k = 0; k < m_users; ++k) {
      double acc = signal_(k) * inv_total(k);
      for (Eigen::Index m = 0; m < m_users; ++m)
        if (m != k) acc += cross_(m, k) * (inv_total(m) - inv_interference(m));
      g(k) = acc / std::numbers::ln2;
    }
    return g;
  }

 private:
  double interference(const Eigen::VectorXd& z, Eigen::Index m) const {
    double acc = noise_;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      if (i != m) acc += z(i) * cross_(m, i);
    return acc;
  }

  Eigen::VectorXd signal_;
  Eigen::MatrixXd cross_;
  double noise_;
};

inline double mrc_rate_exact(const ChannelMatrix& h, const Eigen::VectorXd& kappa, double noise) {
  return PowerObjective::in_kappa(h, noise)(kappa);
}

inline Eigen::VectorXd mrc_sinr_exact(const ChannelMatrix& h, const Eigen::VectorXd& kappa, double noise) {
  const Eigen::MatrixXd gram = (h * h.adjoint()).cwiseAbs2();
  Eigen::VectorXd out(h.rows());
  for (Eigen::Index m = 0; m < h.rows(); ++m) {
    double interference = noise;
    for (Eigen::Index i = 0; i < h.rows(); ++i)
      if (i != m) interference += kappa(i) * gram(m, i);
    out(m) = kappa(m) * gram(m, m) / interference;
  }
  return out;
}

// g_{m,n}(x) = eta / (((x - x_m)^2 + C_{m,n}) e^{2 alpha x}): the channel power
// between antenna n at coordinate x and user m, phases stripped.
inline double antenna_gain(const SystemParams& p, const Position& user, int n, double x) {
  const double dx = x - user.x;
  return p.eta() * std::exp(-2.0 * p.atten_np_per_m * x) / (dx * dx + lateral_offset_sq(p, p.waveguide_y(n), user));
}

inline Eigen::VectorXd gain_norms(const SystemParams& p, const AntennaPlacement& placement, const UserLayout& users) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(users.size());
  for (int m = 0; m < users.size(); ++m)
    for (int n = 0; n < placement.size(); ++n) g(m) += antenna_gain(p, users[m], n, placement[n]);
  return g;
}

inline Eigen::VectorXd mrc_sinr_approx(const Eigen::VectorXd& norms_sq, const Eigen::VectorXd& kappa, double noise) {
  Eigen::VectorXd out(norms_sq.size());
  for (Eigen::Index m = 0; m < norms_sq.size(); ++m) {
    double interference = noise;
    for (Eigen::Index i = 0; i < norms_sq.size(); ++i)
      if (i != m) interference += kappa(i) * norms_sq(m) * norms_sq(i);
    out(m) = kappa(m) * norms_sq(m) * norms_sq(m) / interference;
  }
  return out;
}

inline double mrc_rate_approx(const SystemParams& p, const AntennaPlacement& placement, const UserLayout& users,
                              const Eigen::VectorXd& kappa) {
  double rate = 0.0;
  for (double s : mrc_sinr_approx(gain_norms(p, placement, users), kappa, p.noise_power_w)) rate += std::log2(1.0 + s);
  return rate;
}

// Surrogate rate as a function of antenna n's coordinate, the other antennas'
// contributions A_{m,-n} = sum_{j != n} g_{m,j}(x_j) frozen.
class AntennaSubproblem {
 public:
  AntennaSubproblem(const SystemParams& p, const UserLayout& users, const AntennaPlacement& placement,
                    const Eigen::VectorXd& kappa, int n)
      : eta_(p.eta()), alpha_(p.atten_np_per_m), noise_(p.noise_power_w), kappa_(kappa) {
    const int m_users = users.size();
    user_x_.resize(m_users);
    offset_sq_.resize(m_users);
    others_.resize(m_users);
    for (int m = 0; m < m_users; ++m) {
      user_x_(m) = users[m].x;
      offset_sq_(m) = lateral_offset_sq(p, p.waveguide_y(n), users[m]);
      double a = 0.0;
      for (int j = 0; j < placement.size(); ++j)
        if (j != n) a += antenna_gain(p, users[m], j, placement[j]);
      others_(m) = a;
    }
  }

  double operator()(double x) const {
    const Eigen::VectorXd g = norms(x);
    double f = 0.0;
    const double total = kappa_.dot(g);
    for (Eigen::Index m = 0; m < g.size(); ++m) {
      const double interference = g(m) * (total - kappa_(m) * g(m)) + noise_;
      f += std::log2(1.0 + kappa_(m) * g(m) * g(m) / interference);
    }
    return f;
  }

  double derivative(double x) const {
    const Eigen::Index m_users = user_x_.size();
    Eigen::VectorXd g(m_users), dg(m_users);
    const double decay = std::exp(-2.0 * alpha_ * x);
    for (Eigen::Index m = 0; m < m_users; ++m) {
      const double dx = x - user_x_(m);
      const double q = dx * dx + offset_sq_(m);
      const double own = eta_ * decay / q;
      g(m) = own + others_(m);
      dg(m) = own * (-2.0 * dx / q - 2.0 * alpha_);
    }
    const double total = kappa_.dot(g);
    const double dtotal = kappa_.dot(dg);
    double acc = 0.0;
    for (Eigen::Index m = 0; m < m_users; ++m) {
      const double rest = total - kappa_(m) * g(m);
      const double drest = dtotal - kappa_(m) * dg(m);
      const double interference = g(m) * rest + noise_;
      const double dinterference = dg(m) * rest + g(m) * drest;
      const double received = interference + kappa_(m) * g(m) * g(m);
      const double dreceived = dinterference + 2.0 * kappa_(m) * g(m) * dg(m);
      acc += dreceived / received - dinterference / interference;
    }
    return acc / std::numbers::ln2;
  }

 private:
  Eigen::VectorXd norms(double x) const {
    const double decay = std::exp(-2.0 * alpha_ * x);
    Eigen::VectorXd g(user_x_.size());
    for (Eigen::Index m = 0; m < g.size(); ++m) {
      const double dx = x - user_x_(m);
      g(m) = eta_ * decay / (dx * dx + offset_sq_(m)) + others_(m);
    }
    return g;
  }

  double eta_;
  double alpha_;
  double noise_;
  Eigen::VectorXd kappa_;
  Eigen::VectorXd user_x_;
  Eigen::VectorXd offset_sq_;
  Eigen::VectorXd others_;
};

inline double update_antenna_gp(const SystemParams& p, const UserLayout& users, const MrcState& s, int n,
                                const AscentOptions& opt = {}) {
  const AntennaSubproblem sub(p, users, s.placement, s.kappa, n);
  const double x_max = p.x_max();
  auto result = projected_gradient_ascent(
      s.placement[n], [&](double x) { return sub(x); }, [&](double x) { return sub.derivative(x); },
      [x_max](double x) { return std::clamp(x, 0.0, x_max); }, opt);
  return result.x;
}

// Euclidean projection of p onto the scaled simplex {p >= 0, sum p = total}
// by sort and threshold.
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, double total) {
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - total) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) threshold = candidate;
  }
  return (v.array() - threshold).cwiseMax(0.0).matrix();
}

// Projection onto K, carried out in p_m = kappa_m ||h_m||^2 coordinates where
// K is a scaled simplex.
inline Eigen::VectorXd project_power(const Eigen::VectorXd& kappa_raw, const Eigen::VectorXd& norms_sq, double p_max) {
  const Eigen::VectorXd p = project_simplex((kappa_raw.array() * norms_sq.array()).matrix(), p_max);
  return (p.array() / norms_sq.array()).matrix();
}

// Gradient projection on the exact MRC rate over K. Steps are taken in
// per-user power coordinates, which keeps the unit initial step on the scale
// of the power budget regardless of the channel gain. The rate is not concave
// in the powers (equal splits can sit in a valley between single-user
// corners), so the ascent is also started from every corner of K and the best
// end point is kept. The run from the incoming point is always a candidate,
// so the rate never drops below its starting value.
inline Eigen::VectorXd update_power_gp(const Eigen::VectorXd& kappa, const ChannelMatrix& h, double p_max,
                                       double noise, const AscentOptions& opt = {}) {
  const Eigen::VectorXd norms_sq = channel_norms_sq(h);
  const PowerObjective objective = PowerObjective::in_power(h, noise);
  const auto ascend = [&](const Eigen::VectorXd& start) {
    return projected_gradient_ascent(
        start, [&](const Eigen::VectorXd& p) { return objective(p); },
        [&](const Eigen::VectorXd& p) { return objective.gradient(p); },
        [p_max](const Eigen::VectorXd& p) { return project_simplex(p, p_max); }, opt);
  };
  auto best = ascend(project_simplex((kappa.array() * norms_sq.array()).matrix(), p_max));
  for (Eigen::Index m = 0; m < norms_sq.size() && norms_sq.size() > 1; ++m) {
    Eigen::VectorXd corner = Eigen::VectorXd::Zero(norms_sq.size());
    corner(m) = p_max;
    auto candidate = ascend(corner);
    if (candidate.value > best.value) best = std::move(candidate);
  }
  return (best.x.array() / norms_sq.array()).matrix();
}

// Greedy one-to-one matching of waveguides to users by lateral offset: the
// closest unmatched (waveguide, user) pair is fixed first, ties to lower
// indices. With more waveguides than users the matching restarts over all
// users for the remaining waveguides. Each antenna takes the single-user
// closed form for its user.
inline AntennaPlacement matched_user_placement(const SystemParams& p, const UserLayout& users) {
  const int n_wg = p.num_waveguides;
  const int n_users = users.size();
  AntennaPlacement placement;
  placement.x_coords.assign(static_cast<std::size_t>(n_wg), 0.0);
  std::vector<bool> wg_done(static_cast<std::size_t>(n_wg), false);
  std::vector<bool> user_taken(static_cast<std::size_t>(n_users), false);
  for (int assigned = 0; assigned < n_wg; ++assigned) {
    if (assigned % n_users == 0) std::fill(user_taken.begin(), user_taken.end(), false);
    int best_n = -1, best_m = -1;
    double best_c = std::numeric_limits<double>::infinity();
    for (int n = 0; n < n_wg; ++n) {
      if (wg_done[static_cast<std::size_t>(n)]) continue;
      for (int m = 0; m < n_users; ++m) {
        if (user_taken[static_cast<std::size_t>(m)]) continue;
        const double c = lateral_offset_sq(p, p.waveguide_y(n), users[m]);
        if (c < best_c) {
          best_c = c;
          best_n = n;
          best_m = m;
        }
      }
    }
    wg_done[static_cast<std::size_t>(best_n)] = true;
    user_taken[static_cast<std::size_t>(best_m)] = true;
    placement[best_n] = optimal_placement(p.atten_np_per_m, users[best_m].x, best_c, p.x_max());
  }
  return placement;
}

inline MrcState solve_mrc(const SystemParams& truth, const UserLayout& users, const MrcOptions& opt = {}) {
  truth.validate();
  if (users.size() != truth.num_users) throw ValidationError("user layout size does not match num_users");
  SystemParams p = truth;
  if (opt.placement_atten_np_per_m) p.atten_np_per_m = *opt.placement_atten_np_per_m;

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  MrcState s;
  s.initial_placement = matched_user_placement(p, users);
  s.placement = s.initial_placement;
  ChannelMatrix h = channel_matrix(p, s.placement, users);
  s.kappa = equal_power_kappa(channel_norms_sq(h), p.total_power_w);

  double previous = 0.0;
  for (int t = 0; t < opt.max_iterations; ++t) {
    s.approx_trace.push_back(mrc_rate_approx(p, s.placement, users, s.kappa));
    for (int n = 0; n < p.num_waveguides; ++n) s.placement[n] = update_antenna_gp(p, users, s, n, opt.inner);
    s.approx_trace.push_back(mrc_rate_approx(p, s.placement, users, s.kappa));

    h = channel_matrix(p, s.placement, users);
    s.kappa = update_power_gp(s.kappa, h, p.total_power_w, p.noise_power_w, opt.inner);
    const double rate = mrc_rate_exact(h, s.kappa, p.noise_power_w);
    s.rate_trace.push_back(rate);
    s.time_trace.push_back(std::chrono::duration<double>(clock::now() - start).count());
    s.iteration = t + 1;
    if (t > 0 && std::abs(rate - previous) < opt.tolerance) break;
    previous = rate;
  }
  return s;
}

struct TwoStageOptions {
  MrcOptions mrc;
  WmmseOptions wmmse;
  // Also run stage 2 on the placement stage 1 started from.
  bool initial_placement_candidate = true;
};

enum class StageTwoStart {
  MrcPowers,         // stage-1 placement, sqrt(kappa_m) h_m^* beams
  EqualPower,        // stage-1 placement, equal-power matched filters
  InitialPlacement,  // stage-1 starting placement, equal-power matched filters
};

struct TwoStageResult {
  MrcState stage1;
  WmmseState stage2;  // time_trace includes all earlier work
  double stage1_seconds = 0.0;
  StageTwoStart start = StageTwoStart::MrcPowers;
};

// Stage 1 places the antennas with solve_mrc; stage 2 runs WMMSE beamforming
// on the true channel with the placement frozen, starting from
// sqrt(kappa_m) h_m^* scaled to the full power budget.
//
// Extra stage-2 runs, best sum rate kept:
// - equal-power matched filters on the same placement (a user with
//   kappa_m = 0 starts with a zero beam, which WMMSE never revives);
// - equal-power matched filters on stage 1's starting placement (the power
//   step tends to give all power to one user, after which the antenna step
//   pulls every antenna towards that user).
inline TwoStageResult solve_two_stage(const SystemParams& p, const UserLayout& users, const TwoStageOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  TwoStageResult r;
  r.stage1 = solve_mrc(p, users, opt.mrc);
  r.stage1_seconds = std::chrono::duration<double>(clock::now() - start).count();

  const ChannelMatrix h = channel_matrix(p, r.stage1.placement, users);
  BeamMatrix v0 = h.adjoint() * r.stage1.kappa.cwiseSqrt().asDiagonal();
  const double power = v0.squaredNorm();
  if (power > 0.0) v0 *= std::sqrt(p.total_power_w / power);

  WmmseOptions wopt = opt.wmmse;
  wopt.freeze_positions = true;
  wopt.initial_beamformers = std::move(v0);
  r.stage2 = solve_wmmse(p, users, r.stage1.placement, wopt);
  for (double& t : r.stage2.time_trace) t += r.stage1_seconds;

  const auto try_start = [&](const AntennaPlacement& placement, StageTwoStart kind) {
    const double elapsed = std::chrono::duration<double>(clock::now() - start).count();
    wopt.initial_beamformers = mrc_equal_power(channel_matrix(p, placement, users), p.total_power_w);
    WmmseState alt = solve_wmmse(p, users, placement, wopt);
    if (alt.sum_rate > r.stage2.sum_rate) {
      for (double& t : alt.time_trace) t += elapsed;
      r.stage2 = std::move(alt);
      r.start = kind;
    }
  };
  try_start(r.stage1.placement, StageTwoStart::EqualPower);
  if (opt.initial_placement_candidate && r.stage1.initial_placement.x_coords != r.stage1.placement.x_coords)
    try_start(r.stage1.initial_placement, StageTwoStart::InitialPlacement);
  return r;
}

}  // namespace pinch
