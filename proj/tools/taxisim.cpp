#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>

#include <CLI11.hpp>

#include "taxisim/experiment.hpp"
#include "taxisim/participatory.hpp"
#include "taxisim/server.hpp"

namespace fs = std::filesystem;
using namespace taxisim;

namespace {

constexpr const char* kVersion = "1.0.0";

ScenarioConfig config_or_default(const std::string& path) { return path.empty() ? ScenarioConfig{} : load_config(path); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IOFailure("cannot create " + dir.string() + ": " + ec.message());
}

void write_run_files(const fs::path& dir, const RunOutputs& out, bool with_trace) {
  ensure_dir(dir);
  csv::write_file((dir / "summary.csv").string(), out.summary_csv());
  csv::write_file((dir / "trips.csv").string(), trips_csv(out.trips));
  csv::write_file((dir / "taxi_intervals.csv").string(), taxi_intervals_csv(out.taxis));
  if (with_trace) csv::write_file((dir / "trace.jsonl").string(), out.trace_jsonl());
}

json manifest(const std::string& command, const json& extra) {
  json m{{"tool", "taxisim"}, {"version", kVersion}, {"command", command}, {"schema_version", kSchemaVersion}};
  m.update(extra);
  return m;
}

// "5..20", "5,8,11" or "7".
std::vector<int> parse_fleet(const std::string& s) {
  static const std::regex range(R"((\d+)\.\.(\d+))");
  std::smatch m;
  if (std::regex_match(s, m, range)) {
    const int lo = std::stoi(m[1]), hi = std::stoi(m[2]);
    if (lo > hi) throw InvalidConfig("empty fleet range " + s);
    return SweepSpec::fleet_range(lo, hi);
  }
  std::vector<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw InvalidConfig("empty fleet list");
  return out;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir) {
  auto config = config_or_default(config_path);
  if (seed) config.seed = *seed;
  const auto out = run(config);
  write_run_files(out_dir, out, true);
  csv::write_file((fs::path(out_dir) / "manifest.json").string(),
                  manifest("run", {{"config", config_to_json(config)}, {"config_hash", config_hash(config)},
                                   {"seed", config.seed}})
                          .dump(2) + "\n");
  std::cout << kSummaryHeader << '\n' << summary_row(out.label, out.report) << '\n';
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& fleet, int replications, const std::string& factors,
              std::uint64_t seed_base, unsigned threads, bool raw, const std::string& out_dir) {
  SweepSpec spec;
  spec.base = config_or_default(config_path);
  spec.fleet_sizes = parse_fleet(fleet);
  spec.replications = replications;
  spec.seed_base = seed_base;
  spec.threads = threads;
  spec.keep_outputs = raw;
  std::stringstream in(factors);
  std::string factor;
  while (std::getline(in, factor, ',')) {
    if (factor == "planner") spec.planners = {PlannerKind::ShortestDistance, PlannerKind::LeastTime};
    else if (factor == "policy") spec.policies = {PolicyKind::FcfsNearest, PolicyKind::ConcurrentOptimal};
    else if (!factor.empty()) throw InvalidConfig("unknown factor '" + factor + "'");
  }
  const auto result = run_sweep(spec);

  const fs::path dir(out_dir);
  ensure_dir(dir);
  csv::write_file((dir / "summary.csv").string(), result.summary_csv());
  csv::write_file((dir / "cells.csv").string(), cells_csv(result));
  json seeds = json::array();
  for (int r = 0; r < spec.replications; ++r) seeds.push_back(spec.seed_for(r));
  json series_files = json::array();
  for (auto planner : spec.planner_levels())
    for (auto policy : spec.policy_levels()) {
      const std::string name = "series_" + std::string(to_string(planner)) + "_" + std::string(to_string(policy)) + ".csv";
      csv::write_file((dir / name).string(), series_csv(waiting_series(result, planner, policy)));
      series_files.push_back(name);
    }
  if (raw) {
    for (const auto& c : result.cells) {
      const fs::path cell_dir = dir / "raw" /
                                ("f" + std::to_string(c.fleet_size) + "_" + std::string(to_string(c.planner)) + "_" +
                                 std::string(to_string(c.policy)) + "_r" + std::to_string(c.replication));
      write_run_files(cell_dir, *c.outputs, false);
    }
  }
  json planners = json::array(), policies = json::array();
  for (auto p : spec.planner_levels()) planners.push_back(std::string(to_string(p)));
  for (auto p : spec.policy_levels()) policies.push_back(std::string(to_string(p)));
  csv::write_file((dir / "manifest.json").string(),
                  manifest("sweep", {{"config", config_to_json(spec.base)},
                                     {"config_hash", config_hash(spec.base)},
                                     {"fleet_sizes", spec.fleet_sizes},
                                     {"replications", spec.replications},
                                     {"seed_base", spec.seed_base},
                                     {"seeds", seeds},
                                     {"planners", planners},
                                     {"policies", policies},
                                     {"cells", result.cells.size()},
                                     {"series", series_files}})
                          .dump(2) + "\n");
  std::cout << cells_csv(result);
  return 0;
}

int cmd_knee(const std::string& series_path, double epsilon) {
  std::ifstream in(series_path);
  if (!in) throw IOFailure("cannot open " + series_path);
  const auto knee = detect_knee(parse_series_csv(in), epsilon);
  std::cout << (knee ? std::to_string(*knee) : std::string("none")) << '\n';
  return 0;
}

int cmd_compare(const std::string& result_dir) {
  const auto path = fs::path(result_dir) / "summary.csv";
  std::ifstream in(path);
  if (!in) throw IOFailure("cannot open " + path.string());
  const auto result = sweep_from_summary(parse_summary_csv(in));
  std::string table;
  std::vector<std::string> signs;
  for (auto policy : result.spec.policy_levels()) {
    const auto cmp = compare_planners(result, policy);
    const auto csv_text = planner_comparison_csv(cmp);
    table += table.empty() ? csv_text : csv_text.substr(csv_text.find('\n') + 1);
    signs.push_back(std::string(to_string(policy)) + ": " + cmp.sign_summary());
  }
  csv::write_file((fs::path(result_dir) / "planner_comparison.csv").string(), table);
  std::cout << table;
  for (const auto& s : signs) std::cout << s << '\n';
  return 0;
}

int cmd_replay(const std::string& config_path, const std::string& log_path, const std::string& out_dir) {
  const auto log = load_action_log(log_path);
  const auto config = config_path.empty() ? log.config : load_config(config_path);
  const auto out = replay_log(config, log);
  write_run_files(out_dir, out, true);
  std::cout << kSummaryHeader << '\n' << summary_row(out.label, out.report) << '\n';
  return 0;
}

int cmd_serve(const std::string& address, unsigned short port) {
  SessionManager manager;
  Server server(manager, address, port);
  std::cout << "listening on " << address << ':' << server.port() << std::endl;
  server.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Participatory taxi dispatch simulator"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config, out = "out", fleet = "5..20", factors, series, result_dir, log_path, address = "127.0.0.1";
  std::optional<std::uint64_t> seed;
  std::uint64_t seed_base = 0;
  int replications = 30;
  unsigned threads = 0;
  double epsilon = 0.05;
  unsigned short port = 8080;
  bool raw = false;

  auto* run_cmd = app.add_subcommand("run", "run one scenario");
  run_cmd->add_option("--config", config, "scenario JSON (defaults when omitted)")->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "override the scenario seed");
  run_cmd->add_option("--out", out, "output directory");

  auto* sweep_cmd = app.add_subcommand("sweep", "fleet-size sweep with replications");
  sweep_cmd->add_option("--config", config, "base scenario JSON")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--fleet", fleet, "fleet sizes: LO..HI or a comma list");
  sweep_cmd->add_option("--replications", replications, "replications per cell")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--factors", factors, "factors to cross: planner,policy");
  sweep_cmd->add_option("--seed-base", seed_base, "replication r uses seed_base XOR r");
  sweep_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
  sweep_cmd->add_flag("--raw", raw, "also write per-cell trips and taxi intervals");
  sweep_cmd->add_option("--out", out, "output directory");

  auto* knee_cmd = app.add_subcommand("knee", "find where waiting stops improving");
  knee_cmd->add_option("--series", series, "CSV with fleet_size,mean_waiting")->required()->check(CLI::ExistingFile);
  knee_cmd->add_option("--epsilon", epsilon, "relative improvement threshold");

  auto* compare_cmd = app.add_subcommand("compare", "compare planners in a sweep result");
  compare_cmd->add_option("--result", result_dir, "sweep output directory")->required()->check(CLI::ExistingDirectory);

  auto* replay_cmd = app.add_subcommand("replay", "replay a participatory action log");
  replay_cmd->add_option("--log", log_path, "action log JSON-lines")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--config", config, "scenario JSON (the log's own when omitted)")->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", out, "output directory");

  auto* serve_cmd = app.add_subcommand("serve", "host participatory sessions over HTTP and WebSocket");
  serve_cmd->add_option("--address", address, "bind address");
  serve_cmd->add_option("--port", port, "TCP port (0 picks one)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(config, seed, out);
    if (*sweep_cmd) return cmd_sweep(config, fleet, replications, factors, seed_base, threads, raw, out);
    if (*knee_cmd) return cmd_knee(series, epsilon);
    if (*compare_cmd) return cmd_compare(result_dir);
    if (*replay_cmd) return cmd_replay(config, log_path, out);
    if (*serve_cmd) return cmd_serve(address, port);
  } catch (const std::exception& ex) {
    std::cerr << "taxisim: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
