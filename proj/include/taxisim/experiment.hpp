#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "taxisim/simulation.hpp"

namespace taxisim {

struct SweepSpec {
  ScenarioConfig base;
  std::vector<int> fleet_sizes = fleet_range(5, 20);
  int replications = 30;
  std::uint64_t seed_base = 0;
  std::vector<PlannerKind> planners;  // empty: the base config's planner
  std::vector<PolicyKind> policies;   // empty: the base config's policy
  unsigned threads = 0;               // 0: hardware concurrency
  EngineOptions engine;
  bool keep_outputs = false;  // raw trips and intervals per cell
  bool keep_traces = false;   // message traces too; large

  static std::vector<int> fleet_range(int lo, int hi) {
    std::vector<int> out;
    for (int f = lo; f <= hi; ++f) out.push_back(f);
    return out;
  }

  std::vector<PlannerKind> planner_levels() const { return planners.empty() ? std::vector{base.planner} : planners; }
  std::vector<PolicyKind> policy_levels() const { return policies.empty() ? std::vector{base.policy} : policies; }

  std::uint64_t seed_for(int replication) const { return seed_base ^ static_cast<std::uint64_t>(replication); }

  void validate() const {
    if (fleet_sizes.empty()) throw InvalidConfig("sweep needs at least one fleet size");
    if (replications < 1) throw InvalidConfig("replications must be >= 1");
    for (int f : fleet_sizes)
      if (f < 1) throw InvalidConfig("fleet sizes must be >= 1");
  }
};

struct SweepCell {
  int fleet_size = 0;
  PlannerKind planner = PlannerKind::LeastTime;
  PolicyKind policy = PolicyKind::ConcurrentOptimal;
  int replication = 0;
  std::uint64_t seed = 0;
  RunLabel label;
  MetricsReport report;
  std::vector<BatchAudit> batches;
  std::optional<RunOutputs> outputs;

  std::string coordinates() const {
    return "fleet=" + std::to_string(fleet_size) + " planner=" + std::string(to_string(planner)) +
           " policy=" + std::string(to_string(policy)) + " replication=" + std::to_string(replication);
  }
};

struct MeanCi {
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> half_width;  // 95% Student-t; absent when n < 2
};

// Mean and two-sided 95% confidence half-width of the present samples.
inline MeanCi mean_ci(const std::vector<std::optional<double>>& samples) {
  MeanCi out;
  double sum = 0.0;
  for (const auto& s : samples)
    if (s) {
      sum += *s;
      ++out.n;
    }
  if (out.n == 0) return out;
  const double mean = sum / static_cast<double>(out.n);
  out.mean = mean;
  if (out.n < 2) return out;
  double ss = 0.0;
  for (const auto& s : samples)
    if (s) ss += (*s - mean) * (*s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(out.n - 1));
  boost::math::students_t dist(static_cast<double>(out.n - 1));
  out.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(static_cast<double>(out.n));
  return out;
}

struct CellSummary {
  int fleet_size = 0;
  PlannerKind planner = PlannerKind::LeastTime;
  PolicyKind policy = PolicyKind::ConcurrentOptimal;
  MeanCi waiting;
  MeanCi idle;
  MeanCi queue_waiting;
  std::size_t saturated_runs = 0;
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepCell> cells;  // canonical order: fleet, planner, policy, replication

  std::vector<const SweepCell*> select(int fleet, PlannerKind planner, PolicyKind policy) const {
    std::vector<const SweepCell*> out;
    for (const auto& c : cells)
      if (c.fleet_size == fleet && c.planner == planner && c.policy == policy) out.push_back(&c);
    return out;
  }

  std::vector<CellSummary> summaries() const {
    std::vector<CellSummary> out;
    for (int f : spec.fleet_sizes)
      for (auto planner : spec.planner_levels())
        for (auto policy : spec.policy_levels()) {
          std::vector<std::optional<double>> w, i, q;
          CellSummary s{f, planner, policy, {}, {}, {}, 0};
          for (const auto* c : select(f, planner, policy)) {
            w.push_back(c->report.passenger_avg_waiting);
            i.push_back(c->report.taxi_avg_idle);
            q.push_back(c->report.taxi_avg_queue_waiting);
            s.saturated_runs += c->report.saturated;
          }
          s.waiting = mean_ci(w);
          s.idle = mean_ci(i);
          s.queue_waiting = mean_ci(q);
          out.push_back(s);
        }
    return out;
  }

  std::string summary_csv() const {
    std::vector<std::pair<RunLabel, MetricsReport>> rows;
    for (const auto& c : cells) rows.emplace_back(c.label, c.report);
    return taxisim::summary_csv(rows);
  }
};

inline ScenarioConfig cell_config(const SweepSpec& spec, int fleet, PlannerKind planner, PolicyKind policy,
                                  int replication) {
  ScenarioConfig c = spec.base;
  c.fleet_size = fleet;
  c.planner = planner;
  c.policy = policy;
  c.seed = spec.seed_for(replication);
  c.bindings.clear();
  return c;
}

// Runs every cell, in parallel when threads allow. Cell order in the result
// does not depend on completion order.
inline SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  SweepResult result{spec, {}};
  for (int f : spec.fleet_sizes)
    for (auto planner : spec.planner_levels())
      for (auto policy : spec.policy_levels())
        for (int r = 0; r < spec.replications; ++r)
          result.cells.push_back({f, planner, policy, r, spec.seed_for(r), {}, {}, {}, std::nullopt});

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::optional<std::pair<std::size_t, std::string>> first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= result.cells.size()) return;
      auto& cell = result.cells[i];
      try {
        auto out = run(cell_config(spec, cell.fleet_size, cell.planner, cell.policy, cell.replication), spec.engine);
        cell.label = out.label;
        cell.report = out.report;
        cell.batches = std::move(out.batches);
        if (spec.keep_outputs) {
          if (!spec.keep_traces) out.trace.clear();
          cell.outputs = std::move(out);
        }
      } catch (const std::exception& ex) {
        std::lock_guard lock(error_mutex);
        if (!first_error || i < first_error->first) first_error = {i, cell.coordinates() + ": " + ex.what()};
      }
    }
  };
  unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, result.cells.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) throw Error("sweep cell " + first_error->second);
  return result;
}

// Smallest fleet size after which the relative improvement in waiting stays
// below epsilon.
inline std::optional<int> detect_knee(const std::vector<std::pair<int, double>>& series, double epsilon = 0.05) {
  if (series.size() < 3) throw InvalidSeries("need at least 3 points");
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!(series[i].second > 0.0) || !std::isfinite(series[i].second))
      throw InvalidSeries("mean waiting must be positive and finite");
    if (i > 0 && series[i].first <= series[i - 1].first) throw InvalidSeries("fleet sizes must be strictly increasing");
  }
  std::optional<int> knee;
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double prev = series[i - 1].second;
    const double improvement = (prev - series[i].second) / prev;
    if (improvement < epsilon) {
      if (!knee) knee = series[i].first;
    } else {
      knee.reset();
    }
  }
  return knee;
}

// Mean waiting per fleet size for one factor combination.
inline std::vector<std::pair<int, double>> waiting_series(const SweepResult& result, PlannerKind planner,
                                                          PolicyKind policy) {
  std::vector<std::pair<int, double>> out;
  for (const auto& s : result.summaries())
    if (s.planner == planner && s.policy == policy && s.waiting.mean) out.emplace_back(s.fleet_size, *s.waiting.mean);
  return out;
}

struct PairedDifference {
  MeanCi difference;  // a - b over replications where both are present
  std::size_t a_better = 0;
  std::size_t b_better = 0;
};

inline PairedDifference paired_difference(const std::vector<const SweepCell*>& a, const std::vector<const SweepCell*>& b,
                                          const std::function<std::optional<double>(const MetricsReport&)>& metric) {
  std::map<int, std::optional<double>> by_rep;
  for (const auto* c : b) by_rep[c->replication] = metric(c->report);
  std::vector<std::optional<double>> diffs;
  PairedDifference out;
  for (const auto* c : a) {
    const auto va = metric(c->report);
    const auto it = by_rep.find(c->replication);
    if (!va || it == by_rep.end() || !it->second) continue;
    diffs.push_back(*va - *it->second);
    if (*va < *it->second) ++out.a_better;
    if (*va > *it->second) ++out.b_better;
  }
  out.difference = mean_ci(diffs);
  return out;
}

struct PlannerComparisonRow {
  int fleet_size = 0;
  std::optional<double> waiting_least_time;
  std::optional<double> waiting_shortest_distance;
  std::optional<double> idle_least_time;
  std::optional<double> idle_shortest_distance;
  PairedDifference waiting_diff;  // least_time - shortest_distance
  PairedDifference idle_diff;
};

struct PlannerComparison {
  PolicyKind policy = PolicyKind::ConcurrentOptimal;
  std::vector<PlannerComparisonRow> rows;

  std::size_t least_time_better_waiting() const {
    std::size_t k = 0;
    for (const auto& r : rows)
      if (r.waiting_least_time && r.waiting_shortest_distance && *r.waiting_least_time <= *r.waiting_shortest_distance) ++k;
    return k;
  }

  std::string sign_summary() const {
    return "least_time better on waiting at " + std::to_string(least_time_better_waiting()) + " of " +
           std::to_string(rows.size()) + " fleet sizes";
  }
};

inline PlannerComparison compare_planners(const SweepResult& result, std::optional<PolicyKind> policy = std::nullopt) {
  const auto planners = result.spec.planner_levels();
  const auto has = [&](PlannerKind k) { return std::find(planners.begin(), planners.end(), k) != planners.end(); };
  if (!has(PlannerKind::LeastTime) || !has(PlannerKind::ShortestDistance))
    throw MissingFactor("sweep does not cover both planners");
  PlannerComparison out;
  out.policy = policy.value_or(result.spec.policy_levels().front());
  const auto summaries = result.summaries();
  const auto mean_of = [&](int f, PlannerKind p, auto field) -> std::optional<double> {
    for (const auto& s : summaries)
      if (s.fleet_size == f && s.planner == p && s.policy == out.policy) return (s.*field).mean;
    return std::nullopt;
  };
  for (int f : result.spec.fleet_sizes) {
    PlannerComparisonRow row;
    row.fleet_size = f;
    row.waiting_least_time = mean_of(f, PlannerKind::LeastTime, &CellSummary::waiting);
    row.waiting_shortest_distance = mean_of(f, PlannerKind::ShortestDistance, &CellSummary::waiting);
    row.idle_least_time = mean_of(f, PlannerKind::LeastTime, &CellSummary::idle);
    row.idle_shortest_distance = mean_of(f, PlannerKind::ShortestDistance, &CellSummary::idle);
    const auto lt = result.select(f, PlannerKind::LeastTime, out.policy);
    const auto sd = result.select(f, PlannerKind::ShortestDistance, out.policy);
    row.waiting_diff = paired_difference(lt, sd, [](const MetricsReport& r) { return r.passenger_avg_waiting; });
    row.idle_diff = paired_difference(lt, sd, [](const MetricsReport& r) { return r.taxi_avg_idle; });
    out.rows.push_back(row);
  }
  return out;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidSeries("spearman needs two equal-length series of >= 2");
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (static_cast<double>(i + j) / 2.0) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += rx[i], my += ry[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Rebuilds a result from exported summary rows. Replications are numbered by
// ascending seed.
inline SweepResult sweep_from_summary(const std::vector<SummaryRow>& rows) {
  SweepResult result;
  std::set<int> fleets;
  std::set<std::uint64_t> seeds;
  std::vector<PlannerKind> planners;
  std::vector<PolicyKind> policies;
  for (const auto& r : rows) {
    fleets.insert(r.label.fleet_size);
    seeds.insert(r.label.seed);
    const auto planner = parse_planner_kind(r.label.planner);
    const auto policy = parse_policy_kind(r.label.policy);
    if (std::find(planners.begin(), planners.end(), planner) == planners.end()) planners.push_back(planner);
    if (std::find(policies.begin(), policies.end(), policy) == policies.end()) policies.push_back(policy);
  }
  result.spec.fleet_sizes.assign(fleets.begin(), fleets.end());
  result.spec.planners = planners;
  result.spec.policies = policies;
  result.spec.replications = static_cast<int>(seeds.size());
  for (const auto& r : rows) {
    SweepCell c;
    c.fleet_size = r.label.fleet_size;
    c.planner = parse_planner_kind(r.label.planner);
    c.policy = parse_policy_kind(r.label.policy);
    c.seed = r.label.seed;
    c.replication = static_cast<int>(std::distance(seeds.begin(), seeds.find(r.label.seed)));
    c.label = r.label;
    c.report = r.report;
    result.cells.push_back(std::move(c));
  }
  return result;
}

inline constexpr const char* kCellsHeader =
    "fleet_size,planner,policy,runs,mean_waiting,ci95_waiting,mean_idle,ci95_idle,mean_queue_waiting,"
    "ci95_queue_waiting,saturated_runs";

inline std::string cells_csv(const SweepResult& result) {
  std::ostringstream out;
  out << kCellsHeader << "\r\n";
  for (const auto& s : result.summaries()) {
    out << s.fleet_size << ',' << to_string(s.planner) << ',' << to_string(s.policy) << ',' << s.waiting.n << ','
        << csv::number(s.waiting.mean) << ',' << csv::number(s.waiting.half_width) << ',' << csv::number(s.idle.mean)
        << ',' << csv::number(s.idle.half_width) << ',' << csv::number(s.queue_waiting.mean) << ','
        << csv::number(s.queue_waiting.half_width) << ',' << s.saturated_runs << "\r\n";
  }
  return out.str();
}

inline constexpr const char* kSeriesHeader = "fleet_size,mean_waiting";

inline std::string series_csv(const std::vector<std::pair<int, double>>& series) {
  std::string out = std::string(kSeriesHeader) + "\r\n";
  for (const auto& [f, w] : series) out += std::to_string(f) + "," + csv::number(w) + "\r\n";
  return out;
}

inline std::vector<std::pair<int, double>> parse_series_csv(std::istream& in) {
  std::vector<std::pair<int, double>> out;
  try {
    for (const auto& row : csv::read_rows(in, kSeriesHeader)) {
      if (row.size() != 2) throw InvalidSeries("series rows need two fields");
      out.emplace_back(std::stoi(row[0]), std::stod(row[1]));
    }
  } catch (const std::logic_error& ex) {
    throw InvalidSeries(std::string("unparseable series: ") + ex.what());
  }
  return out;
}

inline constexpr const char* kPlannerComparisonHeader =
    "fleet_size,policy,waiting_least_time,waiting_shortest_distance,waiting_diff,waiting_diff_ci95,"
    "idle_least_time,idle_shortest_distance,idle_diff,idle_diff_ci95";

inline std::string planner_comparison_csv(const PlannerComparison& cmp) {
  std::ostringstream out;
  out << kPlannerComparisonHeader << "\r\n";
  for (const auto& r : cmp.rows) {
    out << r.fleet_size << ',' << to_string(cmp.policy) << ',' << csv::number(r.waiting_least_time) << ','
        << csv::number(r.waiting_shortest_distance) << ',' << csv::number(r.waiting_diff.difference.mean) << ','
        << csv::number(r.waiting_diff.difference.half_width) << ',' << csv::number(r.idle_least_time) << ','
        << csv::number(r.idle_shortest_distance) << ',' << csv::number(r.idle_diff.difference.mean) << ','
        << csv::number(r.idle_diff.difference.half_width) << "\r\n";
  }
  return out.str();
}

}  // namespace taxisim
