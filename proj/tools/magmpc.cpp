// magmpc: run magnetorquer NMPC scenarios and emit CSV time series.
//
//   magmpc run <config-or-preset> [--pwm=on|off] [--out <csv>] [--duration <s>]
//              [--summary <json>]
//   magmpc presets list
//   magmpc presets show <name>
//
// Exit status: 0 success, 1 usage or I/O error, 2 config error,
// 3 integration blowup.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "magmpc/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBlowup = 3;

int run(const std::string& source, const std::string& pwm,
        const std::string& out, const std::optional<double>& duration,
        const std::string& summary_path) {
  magmpc::ScenarioConfig cfg;
  try {
    cfg = magmpc::load_config(source);
    if (pwm == "on") cfg.pwm_enabled = true;
    if (pwm == "off") cfg.pwm_enabled = false;
    if (duration) cfg.duration = *duration;
    if (!out.empty()) cfg.output_path = out;
    cfg.validate();
  } catch (const magmpc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  for (const auto& note : cfg.notes) std::cerr << "note: " << note << '\n';

  const magmpc::RunLog log = magmpc::run_scenario(cfg);
  const std::string csv_path = cfg.output_path.empty() ? cfg.name + ".csv" : cfg.output_path;
  magmpc::write_csv(log, csv_path);

  const magmpc::Summary summary = magmpc::summarize(log, cfg);
  const std::string text = magmpc::summary_to_json(summary, cfg);
  if (!summary_path.empty()) {
    std::ofstream sf(summary_path, std::ios::binary);
    if (!sf) throw magmpc::Error("cannot open '" + summary_path + "' for writing");
    sf << text << '\n';
  }
  std::cout << text << '\n';

  if (log.aborted) {
    std::cerr << "integration blowup: " << log.abort_reason << '\n';
    return kExitBlowup;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetorquer attitude NMPC with a seven-level PWM quantizer"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run a scenario from a preset name or JSON file");
  std::string source;
  std::string pwm = "config";
  std::string out;
  std::string summary_path;
  std::optional<double> duration;
  run_cmd->add_option("config", source, "preset name or path to a JSON scenario")->required();
  run_cmd->add_option("--pwm", pwm, "override the quantizer flag")
      ->check(CLI::IsMember({"on", "off", "config"}));
  run_cmd->add_option("--out", out, "CSV output path (default <name>.csv)");
  run_cmd->add_option("--duration", duration, "simulated duration in seconds")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--summary", summary_path, "also write the summary JSON here");

  auto* presets_cmd = app.add_subcommand("presets", "built-in presets");
  presets_cmd->require_subcommand(1);
  auto* list_cmd = presets_cmd->add_subcommand("list", "list preset names");
  auto* show_cmd = presets_cmd->add_subcommand("show", "print a scenario preset as JSON");
  std::string show_name;
  show_cmd->add_option("name", show_name)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(source, pwm, out, duration, summary_path);
    if (*list_cmd) {
      for (const auto& p : magmpc::presets::list()) {
        std::printf("%-16s %-9s %s\n", p.name.c_str(), p.scenario ? "scenario" : "orbit",
                    p.description.c_str());
      }
      return 0;
    }
    if (*show_cmd) {
      std::cout << magmpc::presets::to_json(show_name) << '\n';
      return 0;
    }
  } catch (const magmpc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
