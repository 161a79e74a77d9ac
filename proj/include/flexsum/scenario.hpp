#pragma once

// Seeded scenario generation: device-mix tables, per-type parameter ranges,
// and ensemble construction for the verification corpora and runtime sweeps.
//
// All randomness flows through one mt19937_64 whose output is mapped to
// canonical doubles explicitly ((x >> 11) * 2^-53) rather than through
// std::uniform_real_distribution, whose algorithm is implementation-defined;
// a seed therefore reproduces the exact same ensemble on every toolchain.

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "flexsum/der_models.hpp"

namespace flexsum {

// Percentage shares of device classes across a service territory. Rows do
// not sum to 100; draws normalize by the row total.
struct MixRow {
  double hvac = 0.0;
  double solar = 0.0;
  double wind = 0.0;
  double ewh = 0.0;
  double bev = 0.0;
};

inline constexpr std::array<MixRow, 8> kMixTable = {{
    {78.9, 9.6, 15.3, 41.4, 30.6},
    {78.9, 48.1, 16.0, 41.4, 47.4},
    {89.8, 8.5, 12.6, 55.4, 30.6},
    {89.8, 45.8, 13.2, 55.4, 47.4},
    {81.7, 9.6, 15.3, 36.2, 36.2},
    {81.7, 48.1, 16.0, 36.2, 51.5},
    {92.6, 8.5, 12.6, 50.2, 36.2},
    {92.6, 45.8, 13.2, 50.2, 51.5},
}};

// Installed fleet capacity behind the mix shares. Reporting context only:
// aggregation operates on per-device domains and never scales by it.
inline constexpr double kTotalInstalledCapacityGw = 1074.64;

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Per-type parameter ranges for drawn devices. Apparent-power ratings and
// wind cut-offs are fixed multiples of the drawn active rating.
struct ParamRanges {
  ParamRange hvac_p_on{2.0, 6.0};
  ParamRange hvac_gamma{0.2, 0.5};
  ParamRange ewh_p_on{3.0, 5.0};
  ParamRange ewh_gamma{0.05, 0.2};
  ParamRange battery_p_max{3.0, 10.0};  // BEV draws map to Battery
  double battery_s_scale = 1.1;
  ParamRange pv_p_max{2.0, 8.0};
  double pv_s_scale = 1.1;
  ParamRange wind_p_max{2.0, 8.0};
  double wind_s_scale = 1.2;  // both cut-off ratings
  double wind_alpha = 1.0;
  double wind_p0_frac = 0.05;
  double wind_q0_frac = 0.05;
};

enum class DeviceClass { Hvac, Solar, Wind, Ewh, Bev };

namespace detail {

inline double canonical(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double draw(std::mt19937_64& rng, ParamRange r) {
  if (!(r.lo <= r.hi)) throw std::invalid_argument("scenario: inverted parameter range");
  return r.lo + (r.hi - r.lo) * canonical(rng);
}

}  // namespace detail

inline DerSpec draw_device(DeviceClass cls, std::mt19937_64& rng, const ParamRanges& pr) {
  switch (cls) {
    case DeviceClass::Hvac: {
      const double p_on = detail::draw(rng, pr.hvac_p_on);
      return SwitchingLoad{p_on, detail::draw(rng, pr.hvac_gamma)};
    }
    case DeviceClass::Solar: {
      const double p_max = detail::draw(rng, pr.pv_p_max);
      return PvInverter{p_max, pr.pv_s_scale * p_max};
    }
    case DeviceClass::Wind: {
      const double p_max = detail::draw(rng, pr.wind_p_max);
      return WindInverter{p_max,
                          pr.wind_s_scale * p_max,
                          pr.wind_s_scale * p_max,
                          pr.wind_alpha,
                          pr.wind_p0_frac * p_max,
                          pr.wind_q0_frac * p_max};
    }
    case DeviceClass::Ewh: {
      const double p_on = detail::draw(rng, pr.ewh_p_on);
      return SwitchingLoad{p_on, detail::draw(rng, pr.ewh_gamma)};
    }
    case DeviceClass::Bev: {
      const double p_max = detail::draw(rng, pr.battery_p_max);
      return Battery{p_max, pr.battery_s_scale * p_max};
    }
  }
  throw std::logic_error("scenario: unknown device class");
}

// Draws n devices whose classes follow the mix row's normalized shares
// (cumulative order: hvac, solar, wind, ewh, bev) and whose parameters are
// uniform over the configured ranges. Deterministic in the seed.
inline EnsembleSpec generate_ensemble(const MixRow& mix, std::size_t n, std::uint64_t seed,
                                      const ParamRanges& pr = {}) {
  const std::array<double, 5> shares = {mix.hvac, mix.solar, mix.wind, mix.ewh, mix.bev};
  double total = 0.0;
  for (const double s : shares) {
    if (s < 0.0) throw std::invalid_argument("scenario: negative mix share");
    total += s;
  }
  if (!(total > 0.0)) throw std::invalid_argument("scenario: mix row is all zero");

  EnsembleSpec out;
  out.seed = seed;
  out.provenance = "mix-draw";
  out.ders.reserve(n);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = detail::canonical(rng) * total;
    double cum = 0.0;
    DeviceClass cls = DeviceClass::Bev;
    for (std::size_t k = 0; k < shares.size(); ++k) {
      cum += shares[k];
      if (u < cum) {
        cls = static_cast<DeviceClass>(k);
        break;
      }
    }
    out.ders.push_back(draw_device(cls, rng, pr));
  }
  return out;
}

// Fixed ten-device composition used by the runtime sweeps: one switching
// HVAC, two EWHs, two batteries, two wind inverters, three PV inverters,
// repeated `copies` times with independently drawn parameters.
inline EnsembleSpec base_mix_ensemble(std::size_t copies, std::uint64_t seed,
                                      const ParamRanges& pr = {}) {
  static constexpr std::array<DeviceClass, 10> pattern = {
      DeviceClass::Hvac, DeviceClass::Ewh,  DeviceClass::Ewh,   DeviceClass::Bev,
      DeviceClass::Bev,  DeviceClass::Wind, DeviceClass::Wind,  DeviceClass::Solar,
      DeviceClass::Solar, DeviceClass::Solar};
  EnsembleSpec out;
  out.seed = seed;
  out.provenance = "base-mix x" + std::to_string(copies);
  out.ders.reserve(10 * copies);
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < copies; ++c)
    for (const DeviceClass cls : pattern) out.ders.push_back(draw_device(cls, rng, pr));
  return out;
}

}  // namespace flexsum
