// simrun: load a scenario, simulate it, verify the event log.
//
// With --verify-log the scenario is not run; the given log is checked
// against the scenario instead (report consistency checks are skipped).

#include <fstream>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "mdf/error.hpp"
#include "mdf/simnet.hpp"

namespace {

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic broker network simulator", "simrun"};
  std::string scenario_path, log_path, report_path, verify_path;
  app.add_option("scenario", scenario_path, "scenario file")->required();
  auto* log_opt = app.add_option("--log", log_path, "write the event log here");
  app.add_option("--report", report_path, "write key=value report records here");
  app.add_option("--verify-log", verify_path, "verify an existing event log instead of running")
      ->excludes(log_opt);
  if (auto code = mdf::tools::parse_cli(app, argc, argv)) return *code;

  std::string text;
  if (!read_file(scenario_path, text)) {
    std::cerr << "simrun: cannot read " << scenario_path << "\n";
    return 2;
  }
  mdf::sim::Scenario sc;
  try {
    sc = mdf::sim::load_scenario(text);
  } catch (const mdf::LineError& e) {
    std::cerr << "simrun: " << scenario_path << ": " << e.what() << "\n";
    return 2;
  }

  if (!verify_path.empty()) {
    std::string log;
    if (!read_file(verify_path, log)) {
      std::cerr << "simrun: cannot read " << verify_path << "\n";
      return 1;
    }
    const auto v = mdf::sim::verify(mdf::sim::MetricsReport{}, sc, log);
    for (const auto& line : v) std::cout << "violation " << line << "\n";
    std::cout << "verify: " << (v.empty() ? "no violations" : std::to_string(v.size()) + " violations")
              << "\n";
    return v.empty() ? 0 : 1;
  }

  const auto result = mdf::sim::run(sc);
  std::cout << result.report.table();
  if (!log_path.empty() && !write_file(log_path, result.log)) {
    std::cerr << "simrun: cannot write " << log_path << "\n";
    return 1;
  }
  if (!report_path.empty() && !write_file(report_path, result.report.records())) {
    std::cerr << "simrun: cannot write " << report_path << "\n";
    return 1;
  }
  return result.report.violations.empty() ? 0 : 1;
}
