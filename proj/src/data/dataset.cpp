// SPDX-License-Identifier: Apache-2.0
#include "pbgru/data/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/io_util.hpp"

namespace pbgru::data {

namespace {

using nlohmann::json;

std::string row_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

std::chrono::year_month_day parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw DataError("bad date '" + std::string(text) + "'");
  const int y = static_cast<int>(parse_int(text.substr(0, 4), "year"));
  const int m = static_cast<int>(parse_int(text.substr(5, 2), "month"));
  const int d = static_cast<int>(parse_int(text.substr(8, 2), "day"));
  std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(static_cast<unsigned>(m)),
                                  std::chrono::day(static_cast<unsigned>(d))};
  if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(text) + "'");
  return ymd;
}

std::string format_date(std::chrono::year_month_day ymd) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

struct Stamp {
  std::string date;
  int minute = 0;
};

Stamp parse_timestamp(std::string_view text) {
  if (text.size() != 19 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':') {
    throw DataError("timestamp '" + std::string(text) + "' is not YYYY-MM-DDTHH:MM:SS");
  }
  Stamp s;
  s.date = format_date(parse_date(text.substr(0, 10)));
  const long long hh = parse_int(text.substr(11, 2), "hour");
  const long long mm = parse_int(text.substr(14, 2), "minute");
  const long long ss = parse_int(text.substr(17, 2), "second");
  if (hh > 23 || mm > 59 || ss != 0) throw DataError("timestamp '" + std::string(text) + "' is off the minute grid");
  s.minute = static_cast<int>(hh * 60 + mm);
  return s;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

void expect_header(std::string_view line, const std::vector<std::string>& want, std::string_view what) {
  if (split_csv_line(line) != want) {
    std::string joined;
    for (const auto& w : want) joined += (joined.empty() ? "" : ",") + w;
    throw DataError(std::string(what) + ": expected header '" + joined + "'");
  }
}

bool blank(std::string_view line) { return line.find_first_not_of(" \t\r") == std::string_view::npos; }

std::size_t parse_station(std::string_view text, std::size_t line, std::string_view what) {
  const long long v = parse_int(text, what);
  if (v < 0) throw DataError(row_error(line, std::string(what) + " must be nonnegative"));
  return static_cast<std::size_t>(v);
}

}  // namespace

void RidershipDataset::validate() const {
  if (n == 0) throw DataError("dataset has no stations");
  if (interval_minutes <= 0) throw DataError("interval must be positive");
  if (day_labels.size() != days.size()) throw DataError("day label count differs from day count");
  for (std::size_t d = 0; d < days.size(); ++d) {
    if (days[d].size() != day_size()) throw DataError("day " + day_labels[d] + " has a ragged grid");
    for (double v : days[d]) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("day " + day_labels[d] + " has a negative volume");
    }
  }
}

RidershipDataset parse_ridership_csv(std::string_view text, const LoadOptions& options, LoadReport* report) {
  if (options.interval_minutes <= 0) throw DataError("interval must be positive");
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError("ridership file is empty");
  expect_header(lines[0], {"timestamp", "station_id", "in", "out"}, "ridership file");

  struct Row {
    std::size_t line;
    std::string date;
    int minute;
    std::size_t station;
    double in, out;
  };
  std::vector<Row> rows;
  std::size_t max_station = 0;
  int min_minute = 24 * 60, max_minute = -1;
  std::set<std::string> dates;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (blank(lines[li])) continue;
    const std::size_t line_no = li + 1;
    const auto f = split_csv_line(lines[li]);
    if (f.size() != 4) throw DataError(row_error(line_no, "expected 4 fields, got " + std::to_string(f.size())));
    Row r;
    r.line = line_no;
    try {
      const Stamp st = parse_timestamp(f[0]);
      r.date = st.date;
      r.minute = st.minute;
      r.station = parse_station(f[1], line_no, "station_id");
      r.in = parse_double(f[2], "in");
      r.out = parse_double(f[3], "out");
    } catch (const DataError& e) {
      throw DataError(row_error(line_no, e.what()));
    }
    if (!(r.in >= 0.0) || !(r.out >= 0.0) || !std::isfinite(r.in) || !std::isfinite(r.out)) {
      throw DataError(row_error(line_no, "negative or non-finite volume"));
    }
    max_station = std::max(max_station, r.station);
    min_minute = std::min(min_minute, r.minute);
    max_minute = std::max(max_minute, r.minute);
    dates.insert(r.date);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("ridership file has no data rows");

  RidershipDataset ds;
  ds.n = options.n ? options.n : max_station + 1;
  ds.interval_minutes = options.interval_minutes;
  ds.day_start_minute = options.day_start_minute >= 0 ? options.day_start_minute : min_minute;
  if (options.steps_per_day) {
    ds.steps_per_day = options.steps_per_day;
  } else {
    if (max_minute < ds.day_start_minute) throw DataError("rows precede the configured day start");
    ds.steps_per_day = static_cast<std::size_t>((max_minute - ds.day_start_minute) / ds.interval_minutes) + 1;
  }
  std::map<std::string, std::size_t> day_index;
  for (const auto& d : dates) {
    day_index.emplace(d, ds.day_labels.size());
    ds.day_labels.push_back(d);
  }
  ds.days.assign(ds.day_labels.size(), std::vector<double>(ds.day_size(), 0.0));
  std::vector<std::vector<char>> seen(ds.days.size(), std::vector<char>(ds.steps_per_day * ds.n, 0));

  for (const Row& r : rows) {
    if (r.station >= ds.n) {
      throw DataError(
          row_error(r.line, "station_id " + std::to_string(r.station) + " outside [0," + std::to_string(ds.n) + ")"));
    }
    const int offset = r.minute - ds.day_start_minute;
    if (offset < 0 || offset % ds.interval_minutes != 0) {
      throw DataError(
          row_error(r.line, "timestamp is not on the " + std::to_string(ds.interval_minutes) + "-minute grid"));
    }
    const auto step = static_cast<std::size_t>(offset / ds.interval_minutes);
    if (step >= ds.steps_per_day) throw DataError(row_error(r.line, "timestamp is past the end of the service day"));
    const std::size_t d = day_index.at(r.date);
    char& flag = seen[d][step * ds.n + r.station];
    if (flag) throw DataError(row_error(r.line, "duplicate (timestamp, station) entry"));
    flag = 1;
    ds.at(d, step, r.station, 0) = r.in;
    ds.at(d, step, r.station, 1) = r.out;
  }
  if (report) {
    report->rows = rows.size();
    report->filled_cells = 0;
    for (const auto& day : seen)
      report->filled_cells += static_cast<std::size_t>(std::count(day.begin(), day.end(), 0));
  }
  return ds;
}

RidershipDataset load_ridership_csv(const std::filesystem::path& path, const LoadOptions& options, LoadReport* report) {
  return parse_ridership_csv(read_text_file(path), options, report);
}

std::string ridership_to_csv(const RidershipDataset& ds) {
  ds.validate();
  std::string out = "timestamp,station_id,in,out\n";
  for (std::size_t d = 0; d < ds.num_days(); ++d) {
    for (std::size_t s = 0; s < ds.steps_per_day; ++s) {
      const std::string stamp =
          format_timestamp(ds.day_labels[d], ds.day_start_minute + static_cast<int>(s) * ds.interval_minutes);
      for (std::size_t i = 0; i < ds.n; ++i) {
        out += stamp;
        out += ',';
        out += std::to_string(i);
        out += ',';
        out += format_double(ds.at(d, s, i, 0));
        out += ',';
        out += format_double(ds.at(d, s, i, 1));
        out += '\n';
      }
    }
  }
  return out;
}

void save_ridership_csv(const std::filesystem::path& path, const RidershipDataset& ds) {
  write_text_file(path, ridership_to_csv(ds));
}

graph::StationGraph parse_edges_csv(std::string_view text, std::size_t n) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError("edges file is empty");
  expect_header(lines[0], {"a", "b"}, "edges file");
  graph::StationGraph g{n, {}};
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (blank(lines[li])) continue;
    const auto f = split_csv_line(lines[li]);
    if (f.size() != 2) throw DataError(row_error(li + 1, "expected 2 fields"));
    try {
      g.edges.emplace_back(parse_station(f[0], li + 1, "a"), parse_station(f[1], li + 1, "b"));
    } catch (const DataError& e) {
      throw DataError(row_error(li + 1, e.what()));
    }
  }
  g.validate();
  return g;
}

std::string edges_to_csv(const graph::StationGraph& g) {
  std::string out = "a,b\n";
  for (auto [a, b] : g.edges) out += std::to_string(a) + "," + std::to_string(b) + "\n";
  return out;
}

std::vector<graph::Trip> parse_trips_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError("trips file is empty");
  expect_header(lines[0], {"origin", "destination", "count"}, "trips file");
  std::vector<graph::Trip> trips;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (blank(lines[li])) continue;
    const auto f = split_csv_line(lines[li]);
    if (f.size() != 3) throw DataError(row_error(li + 1, "expected 3 fields"));
    graph::Trip t;
    try {
      t.origin = parse_station(f[0], li + 1, "origin");
      t.destination = parse_station(f[1], li + 1, "destination");
      t.count = parse_double(f[2], "count");
    } catch (const DataError& e) {
      throw DataError(row_error(li + 1, e.what()));
    }
    if (!(t.count >= 0.0)) throw DataError(row_error(li + 1, "negative trip count"));
    trips.push_back(t);
  }
  return trips;
}

std::string trips_to_csv(std::span<const graph::Trip> trips) {
  std::string out = "origin,destination,count\n";
  for (const auto& t : trips) {
    out += std::to_string(t.origin) + "," + std::to_string(t.destination) + "," + format_double(t.count) + "\n";
  }
  return out;
}

RidershipDataset slice_days(const RidershipDataset& ds, std::size_t first, std::size_t count) {
  if (first + count > ds.num_days()) throw DataError("day slice runs past the end of the dataset");
  RidershipDataset out = ds;
  out.days.assign(ds.days.begin() + static_cast<std::ptrdiff_t>(first),
                  ds.days.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.day_labels.assign(ds.day_labels.begin() + static_cast<std::ptrdiff_t>(first),
                        ds.day_labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

Split chronological_split(const RidershipDataset& ds, std::size_t train_days, std::size_t val_days,
                          std::size_t test_days) {
  if (train_days + val_days + test_days != ds.num_days()) {
    throw DataError("split " + std::to_string(train_days) + "/" + std::to_string(val_days) + "/" +
                    std::to_string(test_days) + " does not cover the " + std::to_string(ds.num_days()) +
                    " days in the dataset");
  }
  return {slice_days(ds, 0, train_days), slice_days(ds, train_days, val_days),
          slice_days(ds, train_days + val_days, test_days)};
}

std::size_t windows_per_day(std::size_t steps_per_day, std::size_t t_in, std::size_t t_out) {
  if (t_in + t_out > steps_per_day) return 0;
  return steps_per_day - t_in - t_out + 1;
}

std::vector<WindowSample> make_windows(const RidershipDataset& ds, std::size_t t_in, std::size_t t_out) {
  if (t_in == 0 || t_out == 0) throw DataError("window lengths must be positive");
  if (t_in + t_out > ds.steps_per_day) {
    throw DataError("window of " + std::to_string(t_in + t_out) + " steps is longer than a " +
                    std::to_string(ds.steps_per_day) + "-step day");
  }
  const std::size_t per_day = windows_per_day(ds.steps_per_day, t_in, t_out);
  const std::size_t slab = ds.n * kChannels;
  std::vector<WindowSample> out;
  out.reserve(per_day * ds.num_days());
  for (std::size_t d = 0; d < ds.num_days(); ++d) {
    const auto& grid = ds.days[d];
    for (std::size_t s = 0; s < per_day; ++s) {
      WindowSample w;
      w.day = d;
      w.start = s;
      w.x.assign(grid.begin() + static_cast<std::ptrdiff_t>(s * slab),
                 grid.begin() + static_cast<std::ptrdiff_t>((s + t_in) * slab));
      w.y.assign(grid.begin() + static_cast<std::ptrdiff_t>((s + t_in) * slab),
                 grid.begin() + static_cast<std::ptrdiff_t>((s + t_in + t_out) * slab));
      out.push_back(std::move(w));
    }
  }
  return out;
}

ZScoreStats fit_zscore(const RidershipDataset& train) {
  if (train.num_days() == 0) throw DataError("cannot fit Z-score statistics on an empty training split");
  ZScoreStats st;
  st.mean.assign(kChannels, 0.0);
  st.std.assign(kChannels, 0.0);
  std::size_t count = 0;
  for (const auto& day : train.days)
    for (std::size_t k = 0; k < day.size(); ++k) st.mean[k % kChannels] += day[k];
  count = train.num_days() * train.steps_per_day * train.n;
  for (double& m : st.mean) m /= static_cast<double>(count);
  for (const auto& day : train.days)
    for (std::size_t k = 0; k < day.size(); ++k) {
      const double d = day[k] - st.mean[k % kChannels];
      st.std[k % kChannels] += d * d;
    }
  for (double& s : st.std) s = std::max(std::sqrt(s / static_cast<double>(count)), kStdFloor);
  st.fit_first_day = train.day_labels.front();
  st.fit_last_day = train.day_labels.back();
  return st;
}

namespace {
void check_stats(std::span<const double> values, const ZScoreStats& stats) {
  if (stats.mean.size() != kChannels || stats.std.size() != kChannels) {
    throw DataError("Z-score statistics must carry exactly " + std::to_string(kChannels) + " channels");
  }
  if (values.size() % kChannels != 0) throw DataError("value count is not a multiple of the channel count");
}
}  // namespace

void zscore_in_place(std::span<double> values, const ZScoreStats& stats) {
  check_stats(values, stats);
  for (std::size_t k = 0; k < values.size(); ++k) {
    values[k] = (values[k] - stats.mean[k % kChannels]) / stats.std[k % kChannels];
  }
}

void inverse_zscore_in_place(std::span<double> values, const ZScoreStats& stats) {
  check_stats(values, stats);
  for (std::size_t k = 0; k < values.size(); ++k) {
    values[k] = values[k] * stats.std[k % kChannels] + stats.mean[k % kChannels];
  }
}

RidershipDataset apply_zscore(const RidershipDataset& ds, const ZScoreStats& stats) {
  RidershipDataset out = ds;
  for (auto& day : out.days) zscore_in_place(day, stats);
  return out;
}

std::string zscore_to_json(const ZScoreStats& stats) {
  json j;
  j["channels"] = {"in", "out"};
  j["mean"] = stats.mean;
  j["std"] = stats.std;
  j["fit_range"] = {stats.fit_first_day, stats.fit_last_day};
  return j.dump(2) + "\n";
}

ZScoreStats zscore_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ZScoreStats st;
    st.mean = j.at("mean").get<std::vector<double>>();
    st.std = j.at("std").get<std::vector<double>>();
    const auto range = j.at("fit_range").get<std::vector<std::string>>();
    if (range.size() != 2) throw DataError("fit_range must have two entries");
    st.fit_first_day = range[0];
    st.fit_last_day = range[1];
    if (st.mean.size() != kChannels || st.std.size() != kChannels) throw DataError("stats must have 2 channels");
    for (double s : st.std)
      if (!(s > 0.0)) throw DataError("stats std must be positive");
    return st;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed stats JSON: ") + e.what());
  }
}

std::vector<std::vector<double>> station_series(const RidershipDataset& ds, SeriesChannels channels) {
  std::vector<std::size_t> chans;
  if (channels != SeriesChannels::outflow) chans.push_back(0);
  if (channels != SeriesChannels::inflow) chans.push_back(1);
  std::vector<std::vector<double>> out(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    out[i].reserve(chans.size() * ds.num_days() * ds.steps_per_day);
    for (std::size_t c : chans)
      for (std::size_t d = 0; d < ds.num_days(); ++d)
        for (std::size_t s = 0; s < ds.steps_per_day; ++s) out[i].push_back(ds.at(d, s, i, c));
  }
  return out;
}

SeriesChannels series_channels_from_string(std::string_view s) {
  if (s == "both") return SeriesChannels::both;
  if (s == "inflow") return SeriesChannels::inflow;
  if (s == "outflow") return SeriesChannels::outflow;
  throw ConfigError("unknown series channel selection '" + std::string(s) + "' (both|inflow|outflow)");
}

const char* to_string(SeriesChannels c) {
  switch (c) {
    case SeriesChannels::both:
      return "both";
    case SeriesChannels::inflow:
      return "inflow";
    case SeriesChannels::outflow:
      return "outflow";
  }
  return "both";
}

std::string add_days(std::string_view date, int days) {
  const std::chrono::sys_days sd{parse_date(date)};
  return format_date(std::chrono::year_month_day{sd + std::chrono::days(days)});
}

std::string format_timestamp(std::string_view date, int minute_of_day) {
  if (minute_of_day < 0 || minute_of_day >= 24 * 60) throw DataError("time of day outside one calendar day");
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:00", minute_of_day / 60, minute_of_day % 60);
  return std::string(date) + buf;
}

}  // namespace pbgru::data
