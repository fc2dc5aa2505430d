#include <iostream>
#include <string>
#include <vector>

#include "snnadv/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return snnadv::run_cli(args, std::cout, std::cerr);
}
