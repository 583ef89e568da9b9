// SPDX-License-Identifier: Apache-2.0
//
// Synthetic metro generator. Stations get residential / commercial / mixed
// roles with double-peak daily inflow curves. Every entering passenger is
// routed to a station exactly `od_hops` edges away (residential to
// commercial, commercial to residential, mixed to anyone) and exits after a
// travel lag, so outflow is the routed inflow of distant stations. Day-level
// and intraday fluctuations are shared by stations of the same role.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pbgru/data/dataset.hpp"
#include "pbgru/graph/graph_builder.hpp"

namespace pbgru::data {

enum class StationRole { residential, commercial, mixed };
const char* to_string(StationRole role);

struct ProfileMix {
  double residential = 0.4;
  double commercial = 0.4;
  double mixed = 0.2;
};

struct SynthOptions {
  std::size_t n = 8;
  std::size_t days = 20;
  std::size_t steps_per_day = 64;
  int interval_minutes = 15;
  int day_start_minute = 6 * 60;
  std::string start_date = "2019-01-01";
  std::uint64_t seed = 0;
  ProfileMix mix;
  std::size_t od_hops = 2;
  double minutes_per_hop = 6.0;
  double base_volume = 400.0;
  double scale_spread = 0.15;  // station scale drawn from base * U(1 - spread, 1 + spread)
  double extra_edge_ratio = 0.25;
  double day_factor_sd = 0.1;
  double role_shock_sd = 0.15;
  double role_shock_rho = 0.8;
  double station_noise_sd = 0.1;
  double station_noise_rho = 0.7;
  bool poisson = true;
};

struct SynthMetro {
  RidershipDataset dataset;
  graph::StationGraph graph;
  std::vector<StationRole> roles;
  std::vector<double> station_scale;
  std::vector<std::vector<graph::Trip>> daily_trips;    // one aggregated log per day
  std::vector<std::vector<graph::Trip>> morning_trips;  // same, entries before noon only
  std::size_t travel_lag_steps = 0;
};

SynthMetro synth_metro(const SynthOptions& options);

/// Trip totals over days [first, first + count), one entry per (origin,
/// destination) pair with a nonzero count, ordered by origin then destination.
std::vector<graph::Trip> aggregate_trips(const SynthMetro& metro, std::size_t first_day, std::size_t count);

/// Largest-remainder split of `total` items in proportion to `weights`.
std::vector<std::uint64_t> apportion(std::uint64_t total, std::span<const double> weights);

}  // namespace pbgru::data
