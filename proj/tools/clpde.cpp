#include <iostream>
#include <string>
#include <vector>

#include "clpde/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return clpde::cli_run(args, std::cout, std::cerr);
}
