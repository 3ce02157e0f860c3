#include "pinch/baseline.hpp"
#include "pinch/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace pinch;

namespace {

SystemParams ula_params(int m) {
  SystemParams p = default_params();
  p.num_users = m;
  p.num_waveguides = m;
  p.region_side_m = 10.0;
  return p;
}

}  // namespace

TEST(UlaGeometry, HalfWavelengthSpacingCentredOverRegion) {
  SystemParams p = ula_params(4);
  p.entry_length_m = 2.0;
  const auto pos = ula_positions(p);
  ASSERT_EQ(pos.size(), 4u);
  double mean_x = 0.0;
  for (std::size_t k = 0; k < pos.size(); ++k) {
    mean_x += pos[k].x / 4.0;
    EXPECT_EQ(pos[k].y, 0.0);
    EXPECT_EQ(pos[k].z, p.waveguide_height_m);
    if (k > 0) EXPECT_NEAR(pos[k].x - pos[k - 1].x, p.wavelength() / 2.0, 1e-15);
  }
  EXPECT_NEAR(mean_x, 7.0, 1e-12);
}

TEST(UlaGeometry, ElementCountFollowsUsers) {
  for (int m : {1, 2, 5, 8}) EXPECT_EQ(ula_positions(ula_params(m)).size(), static_cast<std::size_t>(m));
}

TEST(UlaChannel, SingleElementUserDirectlyBelow) {
  SystemParams p = ula_params(1);
  const UserLayout users{{{5.0, 0.0, 0.0}}};
  const ChannelMatrix h = ula_channel(p, users);
  const double d = p.waveguide_height_m;
  EXPECT_NEAR(std::abs(h(0, 0)), std::sqrt(p.eta()) / d, 1e-18);
  const std::complex<double> expected = std::polar(std::sqrt(p.eta()) / d, -2.0 * std::numbers::pi * d / p.wavelength());
  EXPECT_LT(std::abs(h(0, 0) - expected), 1e-12 * std::abs(expected));
}

TEST(UlaChannel, MatchesPerEntryFreeSpaceFormula) {
  const SystemParams p = ula_params(3);
  const UserLayout users{{{1.0, -2.0, 0.0}, {9.0, 4.5, 0.0}, {5.2, 0.3, 0.0}}};
  const ChannelMatrix h = ula_channel(p, users);
  const auto pos = ula_positions(p);
  const double lambda = 299792458.0 / p.carrier_freq_hz;
  const double amp = lambda / (4.0 * std::numbers::pi);
  for (int m = 0; m < 3; ++m)
    for (int n = 0; n < 3; ++n) {
      const double d = std::hypot(pos[n].x - users[m].x, pos[n].y - users[m].y, pos[n].z);
      const std::complex<double> expected = amp / d * std::exp(std::complex<double>(0.0, -2.0 * std::numbers::pi * d / lambda));
      EXPECT_LT(std::abs(h(m, n) - expected), 1e-12 * std::abs(expected));
    }
}

TEST(UlaChannel, IndependentOfWaveguideAttenuation) {
  SystemParams a = ula_params(4);
  SystemParams b = a;
  b.atten_np_per_m = 0.5;
  b.n_eff = 1.9;
  const UserLayout users = draw_layout(a, 3, 0);
  EXPECT_TRUE(ula_channel(a, users) == ula_channel(b, users));
  EXPECT_EQ(solve_fixed_baseline(a, users).sum_rate, solve_fixed_baseline(b, users).sum_rate);
}

TEST(FixedBaseline, DeterministicAndMonotone) {
  const SystemParams p = ula_params(4);
  const UserLayout users = draw_layout(p, 11, 2);
  const auto r1 = solve_fixed_baseline(p, users);
  const auto r2 = solve_fixed_baseline(p, users);
  EXPECT_EQ(r1.sum_rate, r2.sum_rate);
  EXPECT_EQ(r1.objective_trace, r2.objective_trace);
  for (std::size_t k = 1; k < r1.objective_trace.size(); ++k)
    EXPECT_LE(r1.objective_trace[k], r1.objective_trace[k - 1] + 1e-9);
  EXPECT_LE(r1.v.squaredNorm(), p.total_power_w * (1.0 + 1e-8));
  EXPECT_GT(r1.sum_rate, 0.0);
}

TEST(FixedBaseline, SumRateMatchesReportedBeamformers) {
  const SystemParams p = ula_params(3);
  const UserLayout users = draw_layout(p, 5, 1);
  const auto r = solve_fixed_baseline(p, users);
  EXPECT_NEAR(r.sum_rate, sum_rate(ula_channel(p, users), r.v, p.noise_power_w), 1e-9);
}

TEST(FixedBaseline, RejectsLayoutSizeMismatch) {
  const SystemParams p = ula_params(3);
  const UserLayout users{{{1.0, 0.0, 0.0}}};
  EXPECT_THROW(solve_fixed_baseline(p, users), ValidationError);
}
