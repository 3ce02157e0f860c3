// Conventional fixed-position benchmark: an M-element half-wavelength ULA
// centred over the service region, beamforming only.

#pragma once

#include "pinch/core_model.hpp"
#include "pinch/wmmse.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace pinch {

// Element k at x = L + D/2 + (k - (M-1)/2) lambda/2, y = 0, z = d_v.
inline std::vector<Position> ula_positions(const SystemParams& p) {
  const int count = p.num_users;
  const double center = p.entry_length_m + p.region_side_m / 2.0;
  const double spacing = p.wavelength() / 2.0;
  std::vector<Position> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    out[static_cast<std::size_t>(k)] = {center + (k - (count - 1) / 2.0) * spacing, 0.0, p.waveguide_height_m};
  return out;
}

// Free-space LoS channel with no waveguide: sqrt(eta) e^{-j 2pi d / lambda} / d.
inline ChannelMatrix ula_channel(const SystemParams& p, const UserLayout& users) {
  const std::vector<Position> array = ula_positions(p);
  const double amp0 = std::sqrt(p.eta());
  const double k = 2.0 * std::numbers::pi / p.wavelength();
  ChannelMatrix h(users.size(), static_cast<Eigen::Index>(array.size()));
  for (int m = 0; m < users.size(); ++m) {
    for (std::size_t n = 0; n < array.size(); ++n) {
      const double dx = array[n].x - users[m].x;
      const double dy = array[n].y - users[m].y;
      const double dz = array[n].z - users[m].z;
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      h(m, static_cast<Eigen::Index>(n)) = std::polar(amp0 / d, -k * d);
    }
  }
  return h;
}

inline WmmseState solve_fixed_baseline(const SystemParams& p, const UserLayout& users, WmmseOptions opt = {}) {
  p.validate();
  if (users.size() != p.num_users) throw ValidationError("user layout size does not match num_users");
  opt.freeze_positions = true;
  return solve_wmmse_fixed_channel(p, ula_channel(p, users), opt);
}

}  // namespace pinch
