#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "taxisim/agents.hpp"

namespace taxisim {

struct TripRecord {
  PassengerId passenger = 0;
  Millis request_time = 0;
  std::optional<Millis> assign_time;
  std::optional<Millis> pickup_time;
  std::optional<Millis> dropoff_time;

  // Request to pickup; absent until the passenger is picked up.
  std::optional<Millis> waiting_time() const {
    if (!pickup_time) return std::nullopt;
    return *pickup_time - request_time;
  }

  friend bool operator==(const TripRecord&, const TripRecord&) = default;
};

struct Interval {
  Millis start = 0;
  Millis end = 0;
  Millis length() const { return end - start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct TaxiRecord {
  TaxiId taxi = 0;
  std::vector<Interval> idle;        // available -> commit
  std::vector<Interval> queue_wait;  // enqueued -> offered

  friend bool operator==(const TaxiRecord&, const TaxiRecord&) = default;
};

struct MetricsReport {
  std::optional<double> passenger_avg_waiting;      // seconds
  std::optional<double> taxi_avg_idle;              // per-taxi mean, then fleet mean
  std::optional<double> taxi_avg_idle_pooled;       // mean over all idle intervals
  std::optional<double> taxi_avg_queue_waiting;     // per-taxi mean, then fleet mean
  std::optional<double> taxi_avg_idle_queue_union;  // fleet mean of per-taxi union length
  std::size_t requests = 0;
  std::size_t picked_up = 0;
  std::size_t delivered = 0;
  std::size_t idle_samples = 0;
  bool saturated = false;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

namespace detail {

inline std::optional<double> mean_seconds(Millis total, std::size_t count) {
  if (count == 0) return std::nullopt;
  return static_cast<double>(total) / static_cast<double>(count) / 1000.0;
}

// Mean of per-taxi means over taxis with at least one sample.
inline std::optional<double> fleet_mean(const std::vector<std::vector<Millis>>& per_taxi) {
  double sum = 0.0;
  std::size_t taxis = 0;
  for (const auto& samples : per_taxi) {
    if (samples.empty()) continue;
    Millis total = 0;
    for (Millis s : samples) total += s;
    sum += static_cast<double>(total) / static_cast<double>(samples.size());
    ++taxis;
  }
  if (taxis == 0) return std::nullopt;
  return sum / static_cast<double>(taxis) / 1000.0;
}

inline Millis union_length(std::vector<Interval> intervals) {
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.start != b.start ? a.start < b.start : a.end < b.end; });
  Millis total = 0;
  std::optional<Interval> current;
  for (const auto& iv : intervals) {
    if (current && iv.start <= current->end) {
      current->end = std::max(current->end, iv.end);
    } else {
      if (current) total += current->length();
      current = iv;
    }
  }
  if (current) total += current->length();
  return total;
}

}  // namespace detail

// Averages over samples that start at or after the warmup instant.
inline MetricsReport compute_metrics(const std::vector<TripRecord>& trips, const std::vector<TaxiRecord>& taxis,
                                     Millis warmup) {
  MetricsReport r;
  Millis wait_total = 0;
  for (const auto& t : trips) {
    if (t.request_time < warmup) continue;
    ++r.requests;
    if (auto w = t.waiting_time()) {
      ++r.picked_up;
      wait_total += *w;
    }
    if (t.dropoff_time) ++r.delivered;
  }
  r.passenger_avg_waiting = detail::mean_seconds(wait_total, r.picked_up);

  std::vector<std::vector<Millis>> idle, queue;
  Millis pooled_total = 0;
  std::size_t pooled_count = 0;
  Millis union_total = 0;
  std::size_t union_taxis = 0;
  for (const auto& taxi : taxis) {
    std::vector<Millis> idle_samples, queue_samples;
    std::vector<Interval> both;
    for (const auto& iv : taxi.idle) {
      if (iv.start < warmup) continue;
      idle_samples.push_back(iv.length());
      pooled_total += iv.length();
      ++pooled_count;
      both.push_back(iv);
    }
    for (const auto& iv : taxi.queue_wait) {
      if (iv.start < warmup) continue;
      queue_samples.push_back(iv.length());
      both.push_back(iv);
    }
    if (!both.empty()) {
      union_total += detail::union_length(both);
      ++union_taxis;
    }
    idle.push_back(std::move(idle_samples));
    queue.push_back(std::move(queue_samples));
  }
  r.idle_samples = pooled_count;
  r.taxi_avg_idle = detail::fleet_mean(idle);
  r.taxi_avg_idle_pooled = detail::mean_seconds(pooled_total, pooled_count);
  r.taxi_avg_queue_waiting = detail::fleet_mean(queue);
  r.taxi_avg_idle_queue_union = detail::mean_seconds(union_total, union_taxis);
  return r;
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

inline std::string number(std::optional<double> v) {
  if (!v) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

inline std::string time(std::optional<Millis> v) { return v ? format_seconds(*v) : std::string{}; }

inline std::optional<Millis> parse_time(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return seconds_to_millis(std::stod(s));
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

// RFC 4180 quoting when needed.
inline std::string field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::vector<std::vector<std::string>> read_rows(std::istream& in, const std::string& expected_header) {
  std::string line;
  if (!std::getline(in, line)) throw IOFailure("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header) throw IOFailure("unexpected CSV header: " + line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split_line(line));
  return rows;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOFailure("cannot write " + path);
  out << content;
  if (!out) throw IOFailure("write failed for " + path);
}

}  // namespace csv

inline constexpr const char* kTripsHeader = "passenger,request_time,assign_time,pickup_time,dropoff_time,waiting_time";
inline constexpr const char* kTaxiIntervalsHeader = "taxi,kind,start,end,length";

// One row per trip ordered by passenger id. Lines end with CRLF.
inline std::string trips_csv(std::vector<TripRecord> trips) {
  std::sort(trips.begin(), trips.end(), [](const auto& a, const auto& b) { return a.passenger < b.passenger; });
  std::ostringstream out;
  out << kTripsHeader << "\r\n";
  for (const auto& t : trips) {
    out << t.passenger << ',' << format_seconds(t.request_time) << ',' << csv::time(t.assign_time) << ','
        << csv::time(t.pickup_time) << ',' << csv::time(t.dropoff_time) << ',' << csv::time(t.waiting_time())
        << "\r\n";
  }
  return out.str();
}

inline std::vector<TripRecord> parse_trips_csv(std::istream& in) {
  std::vector<TripRecord> out;
  for (const auto& row : csv::read_rows(in, kTripsHeader)) {
    if (row.size() != 6) throw IOFailure("bad trips row");
    out.push_back({static_cast<PassengerId>(std::stol(row[0])), *csv::parse_time(row[1]), csv::parse_time(row[2]),
                   csv::parse_time(row[3]), csv::parse_time(row[4])});
  }
  return out;
}

// One row per interval, ordered by taxi id, then kind, then start.
inline std::string taxi_intervals_csv(std::vector<TaxiRecord> taxis) {
  std::sort(taxis.begin(), taxis.end(), [](const auto& a, const auto& b) { return a.taxi < b.taxi; });
  std::ostringstream out;
  out << kTaxiIntervalsHeader << "\r\n";
  for (const auto& t : taxis) {
    for (const auto& [kind, list] : {std::pair{"idle", &t.idle}, std::pair{"queue", &t.queue_wait}}) {
      auto sorted = *list;
      std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
      for (const auto& iv : sorted)
        out << t.taxi << ',' << kind << ',' << format_seconds(iv.start) << ',' << format_seconds(iv.end) << ','
            << format_seconds(iv.length()) << "\r\n";
    }
  }
  return out.str();
}

inline std::vector<TaxiRecord> parse_taxi_intervals_csv(std::istream& in) {
  std::map<TaxiId, TaxiRecord> by_id;
  for (const auto& row : csv::read_rows(in, kTaxiIntervalsHeader)) {
    if (row.size() != 5) throw IOFailure("bad taxi interval row");
    const auto id = static_cast<TaxiId>(std::stol(row[0]));
    auto& rec = by_id[id];
    rec.taxi = id;
    const Interval iv{*csv::parse_time(row[2]), *csv::parse_time(row[3])};
    if (row[1] == "idle") rec.idle.push_back(iv);
    else if (row[1] == "queue") rec.queue_wait.push_back(iv);
    else throw IOFailure("bad interval kind " + row[1]);
  }
  std::vector<TaxiRecord> out;
  for (auto& [id, rec] : by_id) out.push_back(std::move(rec));
  return out;
}

// Identifies the run a summary row belongs to.
struct RunLabel {
  std::string config_hash;
  std::uint64_t seed = 0;
  int fleet_size = 0;
  std::string planner;
  std::string policy;
};

inline constexpr const char* kSummaryHeader =
    "config_hash,seed,fleet_size,planner,policy,passenger_avg_waiting,taxi_avg_idle,taxi_avg_queue_waiting,"
    "delivered,requests,saturated,taxi_avg_idle_pooled,taxi_avg_idle_queue_union";

inline std::string summary_row(const RunLabel& label, const MetricsReport& r) {
  std::ostringstream out;
  out << csv::field(label.config_hash) << ',' << label.seed << ',' << label.fleet_size << ','
      << csv::field(label.planner) << ',' << csv::field(label.policy) << ',' << csv::number(r.passenger_avg_waiting)
      << ',' << csv::number(r.taxi_avg_idle) << ',' << csv::number(r.taxi_avg_queue_waiting) << ',' << r.delivered
      << ',' << r.requests << ',' << (r.saturated ? "true" : "false") << ',' << csv::number(r.taxi_avg_idle_pooled)
      << ',' << csv::number(r.taxi_avg_idle_queue_union);
  return out.str();
}

inline std::string summary_csv(const std::vector<std::pair<RunLabel, MetricsReport>>& rows) {
  std::string out = std::string(kSummaryHeader) + "\r\n";
  for (const auto& [label, report] : rows) out += summary_row(label, report) + "\r\n";
  return out;
}

struct SummaryRow {
  RunLabel label;
  MetricsReport report;
};

inline std::vector<SummaryRow> parse_summary_csv(std::istream& in) {
  std::vector<SummaryRow> out;
  for (const auto& row : csv::read_rows(in, kSummaryHeader)) {
    if (row.size() != 13) throw IOFailure("bad summary row");
    SummaryRow s;
    s.label = {row[0], std::stoull(row[1]), std::stoi(row[2]), row[3], row[4]};
    s.report.passenger_avg_waiting = csv::parse_number(row[5]);
    s.report.taxi_avg_idle = csv::parse_number(row[6]);
    s.report.taxi_avg_queue_waiting = csv::parse_number(row[7]);
    s.report.delivered = std::stoul(row[8]);
    s.report.requests = std::stoul(row[9]);
    s.report.saturated = row[10] == "true";
    s.report.taxi_avg_idle_pooled = csv::parse_number(row[11]);
    s.report.taxi_avg_idle_queue_union = csv::parse_number(row[12]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace taxisim
