// SPDX-License-Identifier: Apache-2.0
#include "pbgru/data/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/rng.hpp"

namespace pbgru::data {

namespace {

double bump(double minute, double centre, double width) {
  const double z = (minute - centre) / width;
  return std::exp(-0.5 * z * z);
}

double inflow_profile(StationRole role, double minute) {
  constexpr double floor = 0.12;
  switch (role) {
    case StationRole::residential:
      return floor + bump(minute, 8 * 60, 50) + 0.3 * bump(minute, 18 * 60, 70);
    case StationRole::commercial:
      return floor + 0.3 * bump(minute, 8.5 * 60, 50) + 0.25 * bump(minute, 12.5 * 60, 60) + bump(minute, 18 * 60, 70);
    case StationRole::mixed:
      return floor + 0.6 * bump(minute, 8 * 60, 50) + 0.6 * bump(minute, 18 * 60, 70);
  }
  return floor;
}

std::vector<StationRole> assign_roles(const SynthOptions& o, Rng& rng) {
  const ProfileMix& m = o.mix;
  if (m.residential < 0 || m.commercial < 0 || m.mixed < 0) throw DataError("profile mix weights must be nonnegative");
  const double total = m.residential + m.commercial + m.mixed;
  if (!(total > 0)) throw DataError("profile mix weights sum to zero");
  const double nn = static_cast<double>(o.n);
  std::size_t n_res = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(nn * m.residential / total)));
  std::size_t n_com = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(nn * m.commercial / total)));
  while (n_res + n_com > o.n) (n_res >= n_com ? n_res : n_com) -= 1;
  std::vector<StationRole> roles(o.n, StationRole::mixed);
  std::fill_n(roles.begin(), n_res, StationRole::residential);
  std::fill_n(roles.begin() + static_cast<std::ptrdiff_t>(n_res), n_com, StationRole::commercial);
  rng.shuffle(std::span(roles));
  return roles;
}

enum Period { kMorning, kEvening, kOffPeak, kPeriods };

Period period_of(double minute) {
  if (minute < 11 * 60) return kMorning;
  if (minute >= 16 * 60) return kEvening;
  return kOffPeak;
}

// Commuters leave home for work in the morning and return in the evening.
double role_preference(StationRole from, StationRole to, Period p) {
  const StationRole home = StationRole::residential, work = StationRole::commercial;
  if ((p == kMorning && from == home) || (p == kEvening && from == work)) {
    const StationRole target = from == home ? work : home;
    if (to == target) return 1.0;
    return to == StationRole::mixed ? 0.3 : 0.05;
  }
  return 1.0;
}

graph::StationGraph random_connected_graph(std::size_t n, double extra_ratio, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  graph::StationGraph g{n, {}};
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t a = order[i], b = order[rng.below(i)];
    g.edges.emplace_back(std::min(a, b), std::max(a, b));
    seen.insert(g.edges.back());
  }
  const auto extra = static_cast<std::size_t>(std::lround(extra_ratio * static_cast<double>(n)));
  for (std::size_t tries = 0, added = 0; added < extra && tries < 50 * (extra + 1); ++tries) {
    std::size_t a = rng.below(n), b = rng.below(n);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (seen.insert({a, b}).second) {
      g.edges.emplace_back(a, b);
      ++added;
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

}  // namespace

const char* to_string(StationRole role) {
  switch (role) {
    case StationRole::residential:
      return "residential";
    case StationRole::commercial:
      return "commercial";
    case StationRole::mixed:
      return "mixed";
  }
  return "mixed";
}

std::vector<std::uint64_t> apportion(std::uint64_t total, std::span<const double> weights) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::uint64_t> out(weights.size(), 0);
  if (weights.empty() || !(wsum > 0)) return out;
  std::vector<double> frac(weights.size());
  std::uint64_t given = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double exact = static_cast<double>(total) * weights[j] / wsum;
    out[j] = static_cast<std::uint64_t>(std::floor(exact));
    frac[j] = exact - static_cast<double>(out[j]);
    given += out[j];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t r = 0; given < total; ++r, ++given) ++out[order[r % order.size()]];
  return out;
}

SynthMetro synth_metro(const SynthOptions& o) {
  if (o.n < 4) throw DataError("synthetic metro needs at least 4 stations, got " + std::to_string(o.n));
  if (o.days == 0 || o.steps_per_day == 0 || o.interval_minutes <= 0) throw DataError("synthetic grid is empty");
  if (o.od_hops < 1) throw DataError("od_hops must be >= 1");
  if (o.scale_spread < 0 || o.scale_spread >= 1) throw DataError("scale_spread must lie in [0, 1)");
  if (o.day_start_minute + static_cast<int>(o.steps_per_day) * o.interval_minutes > 24 * 60 + o.interval_minutes) {
    throw DataError("synthetic service day runs past midnight");
  }

  Rng root(o.seed);
  Rng role_rng = root.fork(1), graph_rng = root.fork(2), scale_rng = root.fork(3), route_rng = root.fork(4),
      noise_rng = root.fork(5);

  SynthMetro out;
  out.roles = assign_roles(o, role_rng);

  // Regenerate until every station has some station exactly od_hops away, and
  // residential and commercial stations each see the opposite role there.
  std::vector<std::vector<int>> dist;
  bool ok = false;
  for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
    out.graph = random_connected_graph(o.n, o.extra_edge_ratio, graph_rng);
    dist = graph::hop_distances(out.graph);
    ok = true;
    for (std::size_t i = 0; i < o.n && ok; ++i) {
      bool any = false, opposite = out.roles[i] == StationRole::mixed;
      for (std::size_t j = 0; j < o.n; ++j) {
        if (dist[i][j] != static_cast<int>(o.od_hops)) continue;
        any = true;
        if (out.roles[j] != out.roles[i] && out.roles[j] != StationRole::mixed) opposite = true;
      }
      ok = any && opposite;
    }
  }
  if (!ok) throw DataError("could not build a network with " + std::to_string(o.od_hops) + "-hop OD pairs");

  out.station_scale.resize(o.n);
  for (double& s : out.station_scale) s = o.base_volume * scale_rng.uniform(1.0 - o.scale_spread, 1.0 + o.scale_spread);

  // Destination weights: role preference by period times a per-pair affinity,
  // then one attraction factor per destination, fitted so expected daily
  // arrivals are proportional to the station's own scale.
  std::vector<std::vector<std::size_t>> dest(o.n);
  std::vector<std::array<std::vector<double>, kPeriods>> dest_w(o.n);
  for (std::size_t i = 0; i < o.n; ++i)
    for (std::size_t j = 0; j < o.n; ++j)
      if (dist[i][j] == static_cast<int>(o.od_hops)) {
        dest[i].push_back(j);
        const double affinity = route_rng.uniform(0.5, 1.5);
        for (int p = 0; p < kPeriods; ++p)
          dest_w[i][p].push_back(affinity * role_preference(out.roles[i], out.roles[j], static_cast<Period>(p)));
      }
  std::vector<std::array<double, kPeriods>> departures(o.n);
  double total_departures = 0.0;
  for (std::size_t i = 0; i < o.n; ++i) {
    departures[i].fill(0.0);
    for (std::size_t s = 0; s < o.steps_per_day; ++s) {
      const double minute = o.day_start_minute + static_cast<double>(s) * o.interval_minutes;
      departures[i][period_of(minute)] += out.station_scale[i] * inflow_profile(out.roles[i], minute);
    }
    for (double v : departures[i]) total_departures += v;
  }
  const double scale_sum = std::accumulate(out.station_scale.begin(), out.station_scale.end(), 0.0);
  std::vector<double> attraction(o.n, 1.0);
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<double> arrivals(o.n, 0.0);
    for (std::size_t i = 0; i < o.n; ++i)
      for (int p = 0; p < kPeriods; ++p) {
        double norm = 0.0;
        for (std::size_t k = 0; k < dest[i].size(); ++k) norm += dest_w[i][p][k] * attraction[dest[i][k]];
        if (norm <= 0.0) continue;
        for (std::size_t k = 0; k < dest[i].size(); ++k)
          arrivals[dest[i][k]] += departures[i][p] * dest_w[i][p][k] * attraction[dest[i][k]] / norm;
      }
    for (std::size_t j = 0; j < o.n; ++j) {
      const double target = total_departures * out.station_scale[j] / scale_sum;
      if (arrivals[j] > 0.0) attraction[j] *= std::sqrt(target / arrivals[j]);
    }
  }
  for (std::size_t i = 0; i < o.n; ++i)
    for (int p = 0; p < kPeriods; ++p)
      for (std::size_t k = 0; k < dest[i].size(); ++k) dest_w[i][p][k] *= attraction[dest[i][k]];

  out.travel_lag_steps = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(static_cast<double>(o.od_hops) * o.minutes_per_hop / o.interval_minutes)));

  RidershipDataset& ds = out.dataset;
  ds.n = o.n;
  ds.interval_minutes = o.interval_minutes;
  ds.day_start_minute = o.day_start_minute;
  ds.steps_per_day = o.steps_per_day;
  ds.days.assign(o.days, std::vector<double>(ds.day_size(), 0.0));
  out.daily_trips.resize(o.days);
  out.morning_trips.resize(o.days);

  constexpr std::size_t kRoles = 3;
  for (std::size_t d = 0; d < o.days; ++d) {
    ds.day_labels.push_back(add_days(o.start_date, static_cast<int>(d)));
    double day_factor[kRoles];
    for (double& f : day_factor) f = std::exp(noise_rng.normal(0.0, o.day_factor_sd));
    const double shock_innov = o.role_shock_sd * std::sqrt(1.0 - o.role_shock_rho * o.role_shock_rho);
    const double noise_innov = o.station_noise_sd * std::sqrt(1.0 - o.station_noise_rho * o.station_noise_rho);
    double shock[kRoles];
    for (double& s : shock) s = noise_rng.normal(0.0, o.role_shock_sd);
    std::vector<double> noise(o.n);
    for (double& e : noise) e = noise_rng.normal(0.0, o.station_noise_sd);
    std::map<std::pair<std::size_t, std::size_t>, double> tally, morning;

    for (std::size_t s = 0; s < o.steps_per_day; ++s) {
      if (s > 0) {
        for (double& sh : shock) sh = o.role_shock_rho * sh + noise_rng.normal(0.0, shock_innov);
        for (double& e : noise) e = o.station_noise_rho * e + noise_rng.normal(0.0, noise_innov);
      }
      const double minute = o.day_start_minute + static_cast<double>(s) * o.interval_minutes;
      for (std::size_t i = 0; i < o.n; ++i) {
        const auto r = static_cast<std::size_t>(out.roles[i]);
        const double lambda =
            out.station_scale[i] * inflow_profile(out.roles[i], minute) * day_factor[r] * std::exp(shock[r] + noise[i]);
        const std::uint64_t entering =
            o.poisson ? noise_rng.poisson(lambda) : static_cast<std::uint64_t>(std::llround(lambda));
        ds.at(d, s, i, 0) = static_cast<double>(entering);
        const auto split = apportion(entering, dest_w[i][period_of(minute)]);
        const std::size_t arrive = s + out.travel_lag_steps;
        for (std::size_t k = 0; k < split.size(); ++k) {
          if (split[k] == 0) continue;
          tally[{i, dest[i][k]}] += static_cast<double>(split[k]);
          if (minute < 12 * 60) morning[{i, dest[i][k]}] += static_cast<double>(split[k]);
          if (arrive < o.steps_per_day) ds.at(d, arrive, dest[i][k], 1) += static_cast<double>(split[k]);
        }
      }
    }
    for (const auto& [od, count] : tally) out.daily_trips[d].push_back({od.first, od.second, count});
    for (const auto& [od, count] : morning) out.morning_trips[d].push_back({od.first, od.second, count});
  }
  return out;
}

std::vector<graph::Trip> aggregate_trips(const SynthMetro& metro, std::size_t first_day, std::size_t count) {
  if (first_day + count > metro.daily_trips.size()) throw DataError("trip aggregation runs past the last day");
  std::map<std::pair<std::size_t, std::size_t>, double> tally;
  for (std::size_t d = first_day; d < first_day + count; ++d)
    for (const auto& t : metro.daily_trips[d]) tally[{t.origin, t.destination}] += t.count;
  std::vector<graph::Trip> out;
  for (const auto& [od, c] : tally) out.push_back({od.first, od.second, c});
  return out;
}

}  // namespace pbgru::data
