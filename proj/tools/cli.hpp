#pragma once

#include <iostream>
#include <optional>

#include "CLI11.hpp"

namespace mdf::tools {

// Parses argv; returns an exit code when the program should stop (0 after
// --help, 2 on a usage error) and nullopt otherwise.
inline std::optional<int> parse_cli(CLI::App& app, int argc, char** argv) {
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << app.get_name() << ": " << e.what() << "\n" << app.help();
    return 2;
  }
  return std::nullopt;
}

}  // namespace mdf::tools
