#include <csignal>
#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  std::signal(SIGINT, [](int) { ledgergate::cli::request_stop(); });
  std::signal(SIGTERM, [](int) { ledgergate::cli::request_stop(); });
  std::signal(SIGPIPE, SIG_IGN);
  std::vector<std::string> args(argv + 1, argv + argc);
  return ledgergate::cli::main(args, std::cout, std::cerr);
}
