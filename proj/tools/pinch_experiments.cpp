// Command-line Monte Carlo runner. Writes one CSV table per invocation.
//
// Exit codes: 0 success, 2 invalid input, 1 internal failure.

#include "pinch/pinch.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"Pinching-antenna Monte Carlo experiments"};
  app.set_version_flag("--version", "pinch_experiments 1.0");

  std::string config_path;
  std::string out_path;
  std::string profile_path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flag_entries;
  auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
    app.add_option_function<std::string>(
        name, [&flag_entries, key](const std::string& v) { flag_entries.emplace_back(key, v); }, help);
  };

  app.add_option("--config", config_path, "key=value experiment file")->check(CLI::ExistingFile);
  flag("--exp", "exp", "experiment id: fig2..fig11 or custom");
  flag("--seed", "seed", "64-bit base seed");
  flag("--drops", "drops", "user drops per grid point");
  flag("--threads", "threads", "worker threads for drops");
  flag("--grid-step", "grid_step_m", "WMMSE linear-search step in metres (0 = lambda_g/50)");
  flag("--power-dbm", "power_dbm", "transmit power in dBm, or a comma list when swept");
  flag("--region-m", "region_m", "region side D in metres, or a comma list when swept");
  flag("--users", "users", "number of users M, or a comma list when swept");
  flag("--waveguides", "waveguides", "number of waveguides N, or a comma list when swept");
  flag("--entry-m", "entry_m", "entry length L in metres, or a comma list when swept");
  flag("--schemes", "schemes", "comma list of schemes");
  app.add_option("--set", sets, "extra key=value entries (repeatable)");
  app.add_option("--out", out_path, "CSV output path (stdout when absent)");
  app.add_option("--profile-out", profile_path, "write the position-objective profile (x,objective) here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    pinch::ConfigEntries entries;
    if (!config_path.empty()) entries = pinch::load_config_file(config_path);
    for (const auto& s : sets) {
      const auto parsed = pinch::parse_config_text(s);
      entries.insert(entries.end(), parsed.begin(), parsed.end());
    }
    entries.insert(entries.end(), flag_entries.begin(), flag_entries.end());
    const pinch::ExperimentSpec spec = pinch::build_spec(entries);

    if (!profile_path.empty()) pinch::write_profile_csv(profile_path, pinch::objective_profile(spec));
    const pinch::ResultTable table = pinch::run_experiment(spec);
    if (out_path.empty())
      std::cout << pinch::to_csv(table) << std::flush;
    else
      pinch::emit_csv(table, out_path);
  } catch (const pinch::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
