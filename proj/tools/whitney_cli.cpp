#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "whitney/app.hpp"

namespace app = whitney::app;

int main(int argc, char** argv) {
  CLI::App cli{"Certified analytic approximation of finitely differentiable functions"};
  cli.set_version_flag("--version", app::kVersion);
  std::string command, topic, config, grid_out, report_out;
  double budget = 1.0;
  cli.add_option("command", command, "mollify, whitney, ray, adaptive, separate, eventual, carleman, eval-complex, "
                                     "or describe")
      ->required();
  cli.add_option("topic", topic, "command to describe");
  cli.add_option("--config", config, "run configuration (JSON)");
  cli.add_option("--grid-out", grid_out, "CSV grid output path");
  cli.add_option("--report-out", report_out, "JSON report output path (default: stdout)");
  cli.add_option("--budget-scale", budget, "multiplies grid density and quadrature panels");
  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : app::kConfigError;
  }

  if (command == "describe") {
    try {
      std::cout << app::describe(topic);
      return app::kPass;
    } catch (const whitney::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return app::kConfigError;
    }
  }
  if (!app::find_command(command)) {
    std::cerr << "error: unknown command '" << command << "'\n" << app::describe();
    return app::kConfigError;
  }
  if (!topic.empty()) {
    std::cerr << "error: unexpected argument '" << topic << "'\n";
    return app::kConfigError;
  }
  if (config.empty()) {
    std::cerr << "error: --config is required\n";
    return app::kConfigError;
  }

  app::json doc;
  try {
    doc = app::read_config(config);
  } catch (const whitney::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return app::kConfigError;
  }
  const auto rr = app::run(command, doc, {budget}, !grid_out.empty());
  try {
    const std::string text = rr.report.dump(2) + "\n";
    if (report_out.empty()) std::cout << text;
    else app::write_atomic(report_out, text);
    if (!grid_out.empty() && !rr.grid.empty()) app::write_atomic(grid_out, rr.grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return app::kConfigError;
  }
  if (!rr.message.empty()) std::cerr << "error: " << rr.message << "\n";
  return rr.exit_code;
}
