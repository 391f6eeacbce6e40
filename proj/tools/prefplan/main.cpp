#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "prefplan/cli.hpp"
#include "prefplan/error.hpp"

namespace {

int fail(const std::string& code, const std::string& module, const std::string& message) {
  std::string line = message;
  for (auto& ch : line) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  std::cerr << "error " << code << " " << module << ": " << line << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference prediction from trajectory comparisons"};
  app.set_version_flag("--version", std::string(PREFPLAN_VERSION));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  unsigned jobs = 0;
  std::string out;
  app.add_option("-c,--config", config_path, "JSON run config");
  app.add_option("--set", sets, "Override one config key (key.path=value); repeatable");
  app.add_option("-j,--jobs", jobs, "Cap on worker threads");
  app.add_option("-o,--out", out, "Output directory (same as --set out=...)");

  using Command = int (*)(const prefplan::cli::RunConfig&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands{
      {"gen", "Plan, score and write the dataset", prefplan::cli::cmd_gen},
      {"train", "Train every configured model cell", prefplan::cli::cmd_train},
      {"baseline", "Run the perfectly rational baseline on the test split", prefplan::cli::cmd_baseline},
      {"eval", "Predict the test split with every checkpoint", prefplan::cli::cmd_eval},
      {"report", "Build report.csv and report.md", prefplan::cli::cmd_report},
      {"gradcheck", "Finite-difference check of the network gradients", prefplan::cli::cmd_gradcheck},
  };
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("CONFIG", "cli", e.what());
  }

  try {
    if (jobs > 0) sets.push_back("jobs=" + std::to_string(jobs));
    if (!out.empty()) sets.push_back("out=" + nlohmann::json(out).dump());
    const auto config = prefplan::cli::parse_config(prefplan::cli::load_config(config_path, sets));
    for (const auto& [name, help, fn] : commands) {
      if (app.got_subcommand(name)) return fn(config, std::cout);
    }
    return fail("CONFIG", "cli", "no subcommand");
  } catch (const prefplan::Error& e) {
    return fail(e.code(), e.module(), e.what());
  } catch (const std::exception& e) {
    return fail("INTERNAL", "cli", e.what());
  }
}
