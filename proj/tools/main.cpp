#include <iostream>
#include <string>
#include <vector>

#include "distress/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return distress::run_cli(args, std::cout, std::cerr);
}
