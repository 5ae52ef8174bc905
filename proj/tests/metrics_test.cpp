#include <gtest/gtest.h>

#include <sstream>

#include "taxisim/metrics.hpp"
#include "taxisim/rng.hpp"
#include "taxisim/simulation.hpp"

namespace taxisim {
namespace {

TripRecord trip(PassengerId id, Millis request, std::optional<Millis> pickup) {
  TripRecord t{id, request, std::nullopt, std::nullopt, std::nullopt};
  if (pickup) {
    t.assign_time = request;
    t.pickup_time = pickup;
    t.dropoff_time = *pickup + 1000;
  }
  return t;
}

TEST(ComputeMetrics, ZeroWait) {
  const auto r = compute_metrics({trip(0, 5000, 5000)}, {}, 0);
  ASSERT_TRUE(r.passenger_avg_waiting);
  EXPECT_EQ(*r.passenger_avg_waiting, 0.0);
}

TEST(ComputeMetrics, ArithmeticMean) {
  const auto r = compute_metrics({trip(0, 0, 30000), trip(1, 1000, 91000)}, {}, 0);
  EXPECT_DOUBLE_EQ(*r.passenger_avg_waiting, 60.0);
  EXPECT_EQ(r.requests, 2u);
  EXPECT_EQ(r.delivered, 2u);
}

TEST(ComputeMetrics, IdleFromAvailableToCommit) {
  TaxiRecord t{0, {{100000, 160000}}, {}};
  const auto r = compute_metrics({}, {t}, 0);
  EXPECT_DOUBLE_EQ(*r.taxi_avg_idle, 60.0);
  EXPECT_EQ(r.idle_samples, 1u);
}

TEST(ComputeMetrics, AbsentWithoutSamples) {
  const auto r = compute_metrics({trip(0, 0, std::nullopt)}, {TaxiRecord{0, {}, {}}}, 0);
  EXPECT_FALSE(r.passenger_avg_waiting);
  EXPECT_FALSE(r.taxi_avg_idle);
  EXPECT_FALSE(r.taxi_avg_queue_waiting);
  EXPECT_EQ(r.requests, 1u);
  EXPECT_EQ(r.delivered, 0u);
}

TEST(ComputeMetrics, PerTaxiMeanThenFleetMean) {
  // Taxi 0 idles 10 s and 30 s, taxi 1 idles 100 s.
  TaxiRecord a{0, {{0, 10000}, {20000, 50000}}, {}};
  TaxiRecord b{1, {{0, 100000}}, {}};
  const auto r = compute_metrics({}, {a, b}, 0);
  EXPECT_DOUBLE_EQ(*r.taxi_avg_idle, 60.0);
  EXPECT_DOUBLE_EQ(*r.taxi_avg_idle_pooled, 140.0 / 3.0);
}

TEST(ComputeMetrics, UnionOfIdleAndQueue) {
  TaxiRecord t{0, {{0, 10000}}, {{5000, 20000}}};
  const auto r = compute_metrics({}, {t}, 0);
  EXPECT_DOUBLE_EQ(*r.taxi_avg_idle_queue_union, 20.0);
  EXPECT_DOUBLE_EQ(*r.taxi_avg_queue_waiting, 15.0);
}

TEST(ComputeMetrics, WarmupExcludesEarlySamples) {
  const auto r = compute_metrics({trip(0, 999, 2000), trip(1, 1000, 4000)}, {TaxiRecord{0, {{0, 5000}, {1000, 2000}}, {}}},
                                 1000);
  EXPECT_EQ(r.requests, 1u);
  EXPECT_DOUBLE_EQ(*r.passenger_avg_waiting, 3.0);
  EXPECT_DOUBLE_EQ(*r.taxi_avg_idle, 1.0);
}

TEST(ComputeMetrics, WarmupMonotonicity) {
  Rng rng(5, 0);
  std::vector<TripRecord> trips;
  std::vector<TaxiRecord> taxis(4);
  for (int i = 0; i < 300; ++i) {
    const Millis t = static_cast<Millis>(rng.below(100000));
    trips.push_back(trip(i, t, rng.below(3) ? std::optional<Millis>(t + static_cast<Millis>(rng.below(60000))) : std::nullopt));
    auto& taxi = taxis[rng.below(4)];
    taxi.idle.push_back({t, t + static_cast<Millis>(rng.below(9000))});
  }
  std::size_t prev_requests = SIZE_MAX, prev_idle = SIZE_MAX;
  for (Millis warmup = 0; warmup <= 110000; warmup += 5000) {
    const auto r = compute_metrics(trips, taxis, warmup);
    EXPECT_LE(r.requests, prev_requests);
    EXPECT_LE(r.idle_samples, prev_idle);
    prev_requests = r.requests;
    prev_idle = r.idle_samples;
  }
}

TEST(Csv, EmptyTripSetIsHeaderOnly) {
  EXPECT_EQ(trips_csv({}), std::string(kTripsHeader) + "\r\n");
  EXPECT_EQ(taxi_intervals_csv({}), std::string(kTaxiIntervalsHeader) + "\r\n");
}

TEST(Csv, TripsRoundTrip) {
  std::vector<TripRecord> trips{trip(2, 1234, 5678), trip(0, 1, std::nullopt), trip(1, 999999, 1000001)};
  std::stringstream in(trips_csv(trips));
  const auto back = parse_trips_csv(in);
  std::sort(trips.begin(), trips.end(), [](const auto& a, const auto& b) { return a.passenger < b.passenger; });
  EXPECT_EQ(back, trips);
}

TEST(Csv, IntervalsRoundTrip) {
  std::vector<TaxiRecord> taxis{{1, {{0, 10}, {20, 25}}, {{0, 5}}}, {0, {{7, 7}}, {}}};
  std::stringstream in(taxi_intervals_csv(taxis));
  const auto back = parse_taxi_intervals_csv(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], taxis[1]);
  EXPECT_EQ(back[1], taxis[0]);
}

TEST(Csv, QuotesFieldsThatNeedIt) {
  EXPECT_EQ(csv::field("plain"), "plain");
  EXPECT_EQ(csv::field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv::field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv::split_line("\"a,b\",\"say \"\"hi\"\"\",c"), (std::vector<std::string>{"a,b", "say \"hi\"", "c"}));
}

TEST(Csv, SummaryRoundTrip) {
  MetricsReport r;
  r.passenger_avg_waiting = 12.5;
  r.taxi_avg_idle = 3.25;
  r.requests = 10;
  r.delivered = 9;
  r.saturated = true;
  const RunLabel label{"abc", 42, 7, "least_time", "fcfs_nearest"};
  std::stringstream in(summary_csv({{label, r}}));
  const auto rows = parse_summary_csv(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].label.seed, 42u);
  EXPECT_EQ(rows[0].label.policy, "fcfs_nearest");
  EXPECT_EQ(rows[0].report.passenger_avg_waiting, 12.5);
  EXPECT_FALSE(rows[0].report.taxi_avg_queue_waiting);
  EXPECT_TRUE(rows[0].report.saturated);
}

TEST(Csv, WrongHeaderFails) {
  std::stringstream in("x,y\r\n1,2\r\n");
  EXPECT_THROW(parse_trips_csv(in), IOFailure);
}

// Re-computes the averages from the exported raw CSVs, parsing numbers
// straight from text.
TEST(Recomputation, AveragesMatchRawCsv) {
  ScenarioConfig c;
  c.fleet_size = 6;
  c.sim_duration = 3600;
  c.seed = 9;
  const auto out = run(c);
  const Millis warmup = c.warmup_ms();

  std::stringstream trips_in(trips_csv(out.trips));
  std::string line;
  std::getline(trips_in, line);
  double wait_sum = 0;
  int wait_n = 0;
  while (std::getline(trips_in, line)) {
    const auto f = csv::split_line(line.substr(0, line.size() - 1));
    if (std::stod(f[1]) * 1000 < static_cast<double>(warmup) || f[5].empty()) continue;
    wait_sum += std::stod(f[5]);
    ++wait_n;
  }
  ASSERT_GT(wait_n, 0);
  EXPECT_NEAR(*out.report.passenger_avg_waiting, wait_sum / wait_n, 1e-9);

  std::stringstream taxis_in(taxi_intervals_csv(out.taxis));
  std::getline(taxis_in, line);
  std::map<std::string, std::pair<double, int>> per_taxi;
  while (std::getline(taxis_in, line)) {
    const auto f = csv::split_line(line.substr(0, line.size() - 1));
    if (f[1] != "idle" || std::stod(f[2]) * 1000 < static_cast<double>(warmup)) continue;
    per_taxi[f[0]].first += std::stod(f[4]);
    per_taxi[f[0]].second += 1;
  }
  double fleet = 0;
  for (const auto& [id, acc] : per_taxi) fleet += acc.first / acc.second;
  EXPECT_NEAR(*out.report.taxi_avg_idle, fleet / static_cast<double>(per_taxi.size()), 1e-9);
}

TEST(Csv, SameSeedSameBytes) {
  ScenarioConfig c;
  c.sim_duration = 3600;
  const auto a = run(c);
  const auto b = run(c);
  EXPECT_EQ(trips_csv(a.trips), trips_csv(b.trips));
  EXPECT_EQ(taxi_intervals_csv(a.taxis), taxi_intervals_csv(b.taxis));
  EXPECT_EQ(a.summary_csv(), b.summary_csv());
}

}  // namespace
}  // namespace taxisim
