// Monte Carlo experiment runner: seeded user drops, per-scheme solves and
// aggregation into a ResultTable.

#pragma once

#include "pinch/baseline.hpp"
#include "pinch/core_model.hpp"
#include "pinch/csv.hpp"
#include "pinch/mrc.hpp"
#include "pinch/single_user.hpp"
#include "pinch/wmmse.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace pinch {

// SplitMix64 finalizer used in counter mode: the i-th draw of stream
// (seed, drop, stream) is mix(key + (i + 1) * gamma).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t drop, std::uint64_t stream)
      : key_(mix(mix(seed) ^ mix(drop * kGamma + 0x632be59bd9b4e019ULL) ^ mix(~stream))) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() { return mix(key_ + (++counter_) * kGamma); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline constexpr std::uint64_t kLayoutStream = 0;

// Users in index order, x then y: x = L + D u1, y = -D/2 + D u2.
inline UserLayout draw_layout(const SystemParams& p, std::uint64_t seed, std::uint64_t drop) {
  CounterRng rng(seed, drop, kLayoutStream);
  UserLayout users;
  users.positions.resize(static_cast<std::size_t>(p.num_users));
  for (auto& u : users.positions) {
    u.x = p.entry_length_m + p.region_side_m * rng.uniform();
    u.y = -p.region_side_m / 2.0 + p.region_side_m * rng.uniform();
    u.z = 0.0;
  }
  return users;
}

enum class ExperimentId {
  Fig2RateVsD,
  Fig3GapVsD,
  Fig4Profile,
  Fig5RateVsPower,
  Fig6RateVsD,
  Fig7MrcVsWmmse,
  Fig8Timing,
  Fig9AttnVsNoAttn,
  Fig10RateVsUsers,
  Fig11EntryLength,
  Custom
};

inline const std::vector<std::pair<std::string, ExperimentId>>& experiment_names() {
  static const std::vector<std::pair<std::string, ExperimentId>> names = {
      {"fig2", ExperimentId::Fig2RateVsD},       {"fig3", ExperimentId::Fig3GapVsD},
      {"fig4", ExperimentId::Fig4Profile},       {"fig5", ExperimentId::Fig5RateVsPower},
      {"fig6", ExperimentId::Fig6RateVsD},       {"fig7", ExperimentId::Fig7MrcVsWmmse},
      {"fig8", ExperimentId::Fig8Timing},        {"fig9", ExperimentId::Fig9AttnVsNoAttn},
      {"fig10", ExperimentId::Fig10RateVsUsers}, {"fig11", ExperimentId::Fig11EntryLength},
      {"custom", ExperimentId::Custom}};
  return names;
}

inline ExperimentId parse_experiment_id(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& [key, id] : experiment_names())
    if (key == lower) return id;
  throw ValidationError("unknown experiment id '" + name + "'");
}

inline std::string experiment_name(ExperimentId id) {
  for (const auto& [key, value] : experiment_names())
    if (value == id) return key;
  return "custom";
}

struct Axis {
  std::string variable;
  std::vector<double> values;
};

struct ExperimentSpec {
  ExperimentId id = ExperimentId::Custom;
  SystemParams params;
  Axis sweep;
  std::optional<Axis> series;
  int drops = 20;
  std::uint64_t seed = 1;
  std::vector<std::string> schemes;
  WmmseOptions wmmse;
  MrcOptions mrc;
  int threads = 1;
  int profile_antenna = 2;
};

inline const std::vector<std::string>& known_variables() {
  static const std::vector<std::string> v = {"power_dbm", "region_m",       "users",     "waveguides", "entry_m",
                                             "atten_db_per_m", "height_m", "freq_ghz", "noise_dbm",  "n_eff"};
  return v;
}

inline const std::vector<std::string>& known_schemes() {
  static const std::vector<std::string> v = {"scheme1", "scheme2",   "scheme3",         "scheme3_unclamped",
                                             "gap",     "gap_analytic", "wmmse",        "wmmse_mrc",
                                             "wmmse_mrc_blind", "mrc", "fixed_ula"};
  return v;
}

inline int integral_value(const std::string& name, double value) {
  if (value != std::floor(value) || value < 1.0 || value > 1e6)
    throw ValidationError(name + " must be a positive integer, got " + format_number(value));
  return static_cast<int>(value);
}

inline void apply_variable(SystemParams& p, const std::string& name, double value) {
  if (name == "power_dbm") {
    p.total_power_w = dbm_to_watts(value);
  } else if (name == "region_m") {
    p.region_side_m = value;
  } else if (name == "users") {
    p.num_users = integral_value(name, value);
  } else if (name == "waveguides") {
    p.num_waveguides = integral_value(name, value);
  } else if (name == "entry_m") {
    p.entry_length_m = value;
  } else if (name == "atten_db_per_m") {
    if (!(value >= 0.0)) throw ValidationError("atten_db_per_m must be >= 0");
    p.atten_np_per_m = atten_db_per_m_to_np(value);
  } else if (name == "height_m") {
    p.waveguide_height_m = value;
  } else if (name == "freq_ghz") {
    p.carrier_freq_hz = value * 1e9;
  } else if (name == "noise_dbm") {
    p.noise_power_w = dbm_to_watts(value);
  } else if (name == "n_eff") {
    p.n_eff = value;
  } else {
    throw ValidationError("unknown variable '" + name + "'");
  }
}

inline std::vector<double> range_values(double first, double last, double step) {
  std::vector<double> out;
  for (double v = first; v <= last + 1e-9; v += step) out.push_back(v);
  return out;
}

// Common simulation defaults: 0.08 dB/m, -70 dBm noise, 28 GHz, d_v = 3 m, n_eff = 1.4.
inline SystemParams default_params() {
  SystemParams p;
  p.atten_np_per_m = atten_db_per_m_to_np(0.08);
  p.noise_power_w = dbm_to_watts(-70.0);
  p.carrier_freq_hz = 28e9;
  p.waveguide_height_m = 3.0;
  p.n_eff = 1.4;
  p.total_power_w = dbm_to_watts(40.0);
  return p;
}

inline void set_antennas(SystemParams& p, int m, int n) {
  p.num_users = m;
  p.num_waveguides = n;
}

inline ExperimentSpec default_spec(ExperimentId id) {
  ExperimentSpec s;
  s.id = id;
  s.params = default_params();
  auto single_user = [&] {
    s.params.atten_np_per_m = 0.0092;
    s.params.waveguide_height_m = 10.0;
    s.params.total_power_w = 10.0;
    set_antennas(s.params, 1, 1);
    s.drops = 10000;
  };
  switch (id) {
    case ExperimentId::Fig2RateVsD:
      single_user();
      s.sweep = {"region_m", range_values(10, 90, 10)};
      s.schemes = {"scheme1", "scheme2", "scheme3", "scheme3_unclamped"};
      break;
    case ExperimentId::Fig3GapVsD:
      single_user();
      s.sweep = {"region_m", range_values(20, 90, 10)};
      s.schemes = {"gap", "gap_analytic"};
      break;
    case ExperimentId::Fig4Profile:
      s.params.carrier_freq_hz = 6e9;
      set_antennas(s.params, 8, 8);
      s.params.region_side_m = 5.0;
      s.sweep = {"region_m", {5.0}};
      s.drops = 1;
      break;
    case ExperimentId::Fig5RateVsPower:
      set_antennas(s.params, 8, 8);
      s.sweep = {"power_dbm", {30, 35, 40, 45}};
      s.series = Axis{"region_m", {10, 30}};
      s.schemes = {"wmmse_mrc", "fixed_ula"};
      break;
    case ExperimentId::Fig6RateVsD:
      set_antennas(s.params, 8, 8);
      s.sweep = {"region_m", range_values(5, 30, 5)};
      s.schemes = {"wmmse_mrc", "fixed_ula"};
      break;
    case ExperimentId::Fig7MrcVsWmmse:
      set_antennas(s.params, 4, 4);
      s.sweep = {"power_dbm", {30, 35, 40, 45}};
      s.series = Axis{"region_m", {10, 20}};
      s.schemes = {"wmmse", "wmmse_mrc"};
      break;
    case ExperimentId::Fig8Timing:
      set_antennas(s.params, 4, 4);
      s.params.region_side_m = 5.0;
      s.sweep = {"region_m", {5.0}};
      s.schemes = {"wmmse", "wmmse_mrc"};
      break;
    case ExperimentId::Fig9AttnVsNoAttn:
      set_antennas(s.params, 8, 8);
      s.sweep = {"power_dbm", {30, 35, 40, 45}};
      s.series = Axis{"region_m", {10, 30}};
      s.schemes = {"wmmse_mrc", "wmmse_mrc_blind"};
      break;
    case ExperimentId::Fig10RateVsUsers:
      set_antennas(s.params, 2, 12);
      s.params.total_power_w = dbm_to_watts(35.0);
      s.params.region_side_m = 10.0;
      s.sweep = {"users", range_values(2, 12, 2)};
      s.schemes = {"wmmse_mrc", "wmmse_mrc_blind"};
      break;
    case ExperimentId::Fig11EntryLength:
      set_antennas(s.params, 8, 8);
      s.params.total_power_w = dbm_to_watts(45.0);
      s.sweep = {"entry_m", {0, 10, 20, 30}};
      s.series = Axis{"region_m", {10, 30}};
      s.schemes = {"wmmse_mrc", "wmmse_mrc_blind"};
      break;
    case ExperimentId::Custom:
      set_antennas(s.params, 4, 4);
      s.sweep = {"power_dbm", {40}};
      s.schemes = {"wmmse_mrc"};
      break;
  }
  return s;
}

inline void validate_axis(const Axis& axis, const char* role) {
  if (std::find(known_variables().begin(), known_variables().end(), axis.variable) == known_variables().end())
    throw ValidationError(std::string(role) + " variable '" + axis.variable + "' is not recognised");
  if (axis.values.empty()) throw ValidationError(std::string(role) + " has no values");
  for (std::size_t i = 1; i < axis.values.size(); ++i)
    if (!(axis.values[i] > axis.values[i - 1]))
      throw ValidationError(std::string(role) + " values must be strictly increasing");
}

inline bool is_single_user_scheme(const std::string& s) {
  return s == "scheme1" || s == "scheme2" || s == "scheme3" || s == "scheme3_unclamped" || s == "gap" ||
         s == "gap_analytic";
}

// Parameters at one (series, sweep) grid point.
inline SystemParams point_params(const ExperimentSpec& spec, std::optional<double> series_value, double sweep_value) {
  SystemParams p = spec.params;
  if (spec.series && series_value) apply_variable(p, spec.series->variable, *series_value);
  apply_variable(p, spec.sweep.variable, sweep_value);
  return p;
}

inline std::vector<std::optional<double>> series_points(const ExperimentSpec& spec) {
  std::vector<std::optional<double>> out;
  if (spec.series)
    for (double v : spec.series->values) out.emplace_back(v);
  else
    out.emplace_back(std::nullopt);
  return out;
}

inline void validate_spec(const ExperimentSpec& spec) {
  if (spec.drops < 1) throw ValidationError("drops must be >= 1");
  if (spec.threads < 1) throw ValidationError("threads must be >= 1");
  if (spec.wmmse.grid_step_m < 0.0) throw ValidationError("grid_step_m must be >= 0");
  validate_axis(spec.sweep, "sweep");
  if (spec.series) {
    validate_axis(*spec.series, "series");
    if (spec.series->variable == spec.sweep.variable)
      throw ValidationError("series and sweep must use different variables");
  }
  if (spec.id != ExperimentId::Fig4Profile && spec.schemes.empty()) throw ValidationError("no schemes selected");
  for (const auto& s : spec.schemes)
    if (std::find(known_schemes().begin(), known_schemes().end(), s) == known_schemes().end())
      throw ValidationError("unknown scheme '" + s + "'");
  for (const auto& sv : series_points(spec)) {
    for (double v : spec.sweep.values) {
      const SystemParams p = point_params(spec, sv, v);
      p.validate();
      for (const auto& s : spec.schemes)
        if (is_single_user_scheme(s) && (p.num_users != 1 || p.num_waveguides != 1))
          throw ValidationError("scheme '" + s + "' requires users = 1 and waveguides = 1");
    }
  }
  if (spec.id == ExperimentId::Fig4Profile &&
      (spec.profile_antenna < 0 || spec.profile_antenna >= spec.params.num_waveguides))
    throw ValidationError("profile_antenna must index an existing waveguide");
}

inline double relative_rate_loss(double r_with, double r_without) {
  if (!(r_with > 0.0)) throw std::domain_error("relative_rate_loss requires r_with > 0");
  return (r_with - r_without) / r_with * 100.0;
}

struct DropOutcome {
  double rate = 0.0;
  double seconds = 0.0;
};

inline double run_scheme(const std::string& scheme, const SystemParams& p, const UserLayout& users,
                         const ExperimentSpec& spec) {
  if (scheme == "scheme1") return placement_by_scheme(PlacementScheme::IgnoreAttenuation, p, users[0]).rate_bps_hz;
  if (scheme == "scheme2") return placement_by_scheme(PlacementScheme::OptimalClosedForm, p, users[0]).rate_bps_hz;
  if (scheme == "scheme3") return placement_by_scheme(PlacementScheme::LongWaveguideApprox, p, users[0]).rate_bps_hz;
  if (scheme == "scheme3_unclamped") return long_waveguide_unconstrained_rate(p, users[0]);
  if (scheme == "gap")
    return placement_by_scheme(PlacementScheme::OptimalClosedForm, p, users[0]).rate_bps_hz -
           placement_by_scheme(PlacementScheme::IgnoreAttenuation, p, users[0]).rate_bps_hz;
  if (scheme == "gap_analytic") return expected_rate_loss(p.atten_np_per_m, p.region_side_m, p.waveguide_height_m);
  if (scheme == "wmmse") return solve_wmmse(p, users, nearest_user_placement(p, users), spec.wmmse).sum_rate;
  if (scheme == "wmmse_mrc") return solve_two_stage(p, users, {spec.mrc, spec.wmmse}).stage2.sum_rate;
  if (scheme == "wmmse_mrc_blind") {
    MrcOptions blind = spec.mrc;
    blind.placement_atten_np_per_m = 0.0;
    return solve_two_stage(p, users, {blind, spec.wmmse}).stage2.sum_rate;
  }
  if (scheme == "mrc") {
    const MrcState s = solve_mrc(p, users, spec.mrc);
    return mrc_rate_exact(channel_matrix(p, s.placement, users), s.kappa, p.noise_power_w);
  }
  if (scheme == "fixed_ula") return solve_fixed_baseline(p, users, spec.wmmse).sum_rate;
  throw ValidationError("unknown scheme '" + scheme + "'");
}

// Runs body(k) for k in [0, count) on up to `threads` workers. Results must be
// written by index so the outcome does not depend on scheduling.
template <typename Body>
void parallel_for(int count, int threads, Body&& body) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (int k = next++; k < count && !failed; k = next++) {
        try {
          body(k);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  sd = 0.0;
  if (v.size() > 1 && *std::min_element(v.begin(), v.end()) != *std::max_element(v.begin(), v.end())) {
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
  }
}

inline std::string series_label(const ExperimentSpec& spec, const std::string& scheme, std::optional<double> sv) {
  if (!sv) return scheme;
  return scheme + "@" + spec.series->variable + "=" + format_number(*sv);
}

// x-coordinates of strict local minima of a sampled profile.
inline std::vector<double> local_minima(const std::vector<std::pair<double, double>>& profile) {
  std::vector<double> out;
  for (std::size_t k = 1; k + 1 < profile.size(); ++k)
    if (profile[k].second < profile[k - 1].second && profile[k].second < profile[k + 1].second)
      out.push_back(profile[k].first);
  return out;
}

// Position objective of one antenna after a single receiver/weight/beamformer
// pass from the nearest-user placement with matched-filter beamformers, on
// drop 0 of the experiment's base parameters.
inline std::vector<std::pair<double, double>> objective_profile(const ExperimentSpec& spec) {
  const SystemParams& p = spec.params;
  p.validate();
  if (spec.profile_antenna < 0 || spec.profile_antenna >= p.num_waveguides)
    throw ValidationError("profile_antenna must index an existing waveguide");
  const UserLayout users = draw_layout(p, spec.seed, 0);
  const AntennaPlacement placement = nearest_user_placement(p, users);
  const ChannelMatrix h = channel_matrix(p, placement, users);
  const Eigen::VectorXd noise = uniform_noise(p, h.rows());
  const BeamMatrix v0 = mrc_equal_power(h, p.total_power_w);
  const Eigen::VectorXcd u = update_receivers(h, v0, noise);
  const Eigen::VectorXd w = update_weights(mse_all(h, v0, u, noise));
  const BeamMatrix v = update_beamformers(h, u, w, p.total_power_w);
  const PositionObjective objective(p, users, h, v, u, w, spec.profile_antenna);
  const double step = spec.wmmse.grid_step_m > 0.0 ? spec.wmmse.grid_step_m : default_grid_step(p);
  return position_objective_profile(objective, p.x_max(), step);
}

inline ResultTable run_profile_summary(const ExperimentSpec& spec) {
  const auto profile = objective_profile(spec);
  const std::vector<double> minima = local_minima(profile);
  std::vector<double> gaps;
  for (std::size_t k = 1; k < minima.size(); ++k) gaps.push_back(minima[k] - minima[k - 1]);
  std::sort(gaps.begin(), gaps.end());
  const double median = gaps.empty() ? 0.0 : gaps[gaps.size() / 2];
  ResultTable t;
  const double x = spec.params.region_side_m;
  t.rows.push_back({x, "profile_minima_per_m", static_cast<double>(minima.size()) / spec.params.x_max(), 0.0, 0.0});
  t.rows.push_back({x, "profile_median_spacing_over_lambda_g", median / spec.params.guided_wavelength(), 0.0, 0.0});
  return t;
}

// Per-iteration sum rate and cumulative time, averaged over drops. Runs that
// stop early hold their final value.
inline ResultTable run_timing(const ExperimentSpec& spec) {
  const SystemParams& p = spec.params;
  ResultTable t;
  for (const auto& scheme : spec.schemes) {
    if (scheme != "wmmse" && scheme != "wmmse_mrc")
      throw ValidationError("timing experiment supports schemes wmmse and wmmse_mrc only");
    std::vector<WmmseState> runs(static_cast<std::size_t>(spec.drops));
    parallel_for(spec.drops, spec.threads, [&](int k) {
      const UserLayout users = draw_layout(p, spec.seed, static_cast<std::uint64_t>(k));
      runs[static_cast<std::size_t>(k)] =
          scheme == "wmmse" ? solve_wmmse(p, users, nearest_user_placement(p, users), spec.wmmse)
                            : solve_two_stage(p, users, {spec.mrc, spec.wmmse}).stage2;
    });
    std::size_t longest = 0;
    for (const auto& r : runs) longest = std::max(longest, r.rate_trace.size());
    for (std::size_t it = 0; it < longest; ++it) {
      std::vector<double> rates, times;
      for (const auto& r : runs) {
        const std::size_t j = std::min(it, r.rate_trace.size() - 1);
        rates.push_back(r.rate_trace[j]);
        times.push_back(r.time_trace[j]);
      }
      ResultRow row;
      row.sweep = static_cast<double>(it + 1);
      row.scheme = scheme;
      mean_std(rates, row.mean_rate, row.std_rate);
      double sd_time = 0.0;
      mean_std(times, row.mean_runtime_s, sd_time);
      t.rows.push_back(row);
    }
  }
  return t;
}

inline ResultTable run_experiment(const ExperimentSpec& spec) {
  validate_spec(spec);
  if (spec.id == ExperimentId::Fig4Profile) return run_profile_summary(spec);
  if (spec.id == ExperimentId::Fig8Timing) return run_timing(spec);

  ResultTable table;
  const bool with_loss = std::find(spec.schemes.begin(), spec.schemes.end(), "wmmse_mrc") != spec.schemes.end() &&
                         std::find(spec.schemes.begin(), spec.schemes.end(), "wmmse_mrc_blind") != spec.schemes.end();
  const std::size_t n_schemes = spec.schemes.size();
  for (const auto& sv : series_points(spec)) {
    for (double x : spec.sweep.values) {
      const SystemParams p = point_params(spec, sv, x);
      std::vector<DropOutcome> outcomes(static_cast<std::size_t>(spec.drops) * n_schemes);
      parallel_for(spec.drops, spec.threads, [&](int k) {
        const UserLayout users = draw_layout(p, spec.seed, static_cast<std::uint64_t>(k));
        for (std::size_t s = 0; s < n_schemes; ++s) {
          const auto start = std::chrono::steady_clock::now();
          DropOutcome& o = outcomes[static_cast<std::size_t>(k) * n_schemes + s];
          o.rate = run_scheme(spec.schemes[s], p, users, spec);
          o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
      });
      double mean_with = 0.0, mean_without = 0.0;
      for (std::size_t s = 0; s < n_schemes; ++s) {
        std::vector<double> rates, times;
        for (int k = 0; k < spec.drops; ++k) {
          rates.push_back(outcomes[static_cast<std::size_t>(k) * n_schemes + s].rate);
          times.push_back(outcomes[static_cast<std::size_t>(k) * n_schemes + s].seconds);
        }
        ResultRow row;
        row.sweep = x;
        row.scheme = series_label(spec, spec.schemes[s], sv);
        mean_std(rates, row.mean_rate, row.std_rate);
        double sd_time = 0.0;
        mean_std(times, row.mean_runtime_s, sd_time);
        if (spec.schemes[s] == "wmmse_mrc") mean_with = row.mean_rate;
        if (spec.schemes[s] == "wmmse_mrc_blind") mean_without = row.mean_rate;
        table.rows.push_back(row);
      }
      if (with_loss && spec.id == ExperimentId::Fig11EntryLength)
        table.rows.push_back({x, series_label(spec, "rel_loss_pct", sv), relative_rate_loss(mean_with, mean_without),
                              0.0, 0.0});
    }
  }
  return table;
}

}  // namespace pinch
