// SPDX-License-Identifier: Apache-2.0
//
// Ridership data on a fixed per-day time grid, plus the plain-text formats the
// pipeline reads and writes:
//
//   ridership CSV  timestamp,station_id,in,out   (timestamp YYYY-MM-DDTHH:MM:SS)
//   edges CSV      a,b
//   trips CSV      origin,destination,count
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pbgru/graph/graph_builder.hpp"

namespace pbgru::data {

inline constexpr std::size_t kChannels = 2;  // 0 = inflow, 1 = outflow

struct RidershipDataset {
  std::size_t n = 0;
  int interval_minutes = 15;
  int day_start_minute = 0;  // minute of day of step 0
  std::size_t steps_per_day = 0;
  std::vector<std::string> day_labels;    // YYYY-MM-DD
  std::vector<std::vector<double>> days;  // [steps][n][2] row-major per day

  std::size_t num_days() const { return days.size(); }
  std::size_t day_size() const { return steps_per_day * n * kChannels; }
  double at(std::size_t day, std::size_t step, std::size_t station, std::size_t channel) const {
    return days[day][(step * n + station) * kChannels + channel];
  }
  double& at(std::size_t day, std::size_t step, std::size_t station, std::size_t channel) {
    return days[day][(step * n + station) * kChannels + channel];
  }
  /// Throws DataError if any invariant is broken.
  void validate() const;
};

struct LoadOptions {
  std::size_t n = 0;  // 0 infers max station id + 1
  int interval_minutes = 15;
  int day_start_minute = -1;      // <0 infers earliest time of day seen
  std::size_t steps_per_day = 0;  // 0 infers from the latest time of day seen
};

struct LoadReport {
  std::size_t rows = 0;
  std::size_t filled_cells = 0;  // (time, station) cells absent from the file
};

RidershipDataset parse_ridership_csv(std::string_view text, const LoadOptions& options, LoadReport* report = nullptr);
RidershipDataset load_ridership_csv(const std::filesystem::path& path, const LoadOptions& options,
                                    LoadReport* report = nullptr);
/// Canonical form: every cell, ordered by day, step, station.
std::string ridership_to_csv(const RidershipDataset& ds);
void save_ridership_csv(const std::filesystem::path& path, const RidershipDataset& ds);

graph::StationGraph parse_edges_csv(std::string_view text, std::size_t n);
std::string edges_to_csv(const graph::StationGraph& g);
std::vector<graph::Trip> parse_trips_csv(std::string_view text);
std::string trips_to_csv(std::span<const graph::Trip> trips);

/// Days [first, first + count).
RidershipDataset slice_days(const RidershipDataset& ds, std::size_t first, std::size_t count);

struct Split {
  RidershipDataset train, val, test;
};
Split chronological_split(const RidershipDataset& ds, std::size_t train_days, std::size_t val_days,
                          std::size_t test_days);

struct WindowSample {
  std::size_t day = 0;
  std::size_t start = 0;  // first input step
  std::vector<double> x;  // [T_in][n][2]
  std::vector<double> y;  // [T_out][n][2]
};

std::size_t windows_per_day(std::size_t steps_per_day, std::size_t t_in, std::size_t t_out);
std::vector<WindowSample> make_windows(const RidershipDataset& ds, std::size_t t_in, std::size_t t_out);

struct ZScoreStats {
  std::vector<double> mean;  // per channel
  std::vector<double> std;
  std::string fit_first_day, fit_last_day;
};

inline constexpr double kStdFloor = 1e-8;

ZScoreStats fit_zscore(const RidershipDataset& train);
RidershipDataset apply_zscore(const RidershipDataset& ds, const ZScoreStats& stats);
/// Values are channel-interleaved (channel is the fastest axis).
void zscore_in_place(std::span<double> values, const ZScoreStats& stats);
void inverse_zscore_in_place(std::span<double> values, const ZScoreStats& stats);
std::string zscore_to_json(const ZScoreStats& stats);
ZScoreStats zscore_from_json(std::string_view text);

enum class SeriesChannels { both, inflow, outflow };

/// Per-station series over all days in order; with `both`, the whole inflow
/// series is followed by the whole outflow series.
std::vector<std::vector<double>> station_series(const RidershipDataset& ds, SeriesChannels channels);

SeriesChannels series_channels_from_string(std::string_view s);
const char* to_string(SeriesChannels c);

/// Calendar helpers on YYYY-MM-DD labels.
std::string add_days(std::string_view date, int days);
std::string format_timestamp(std::string_view date, int minute_of_day);

}  // namespace pbgru::data
