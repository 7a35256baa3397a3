#include <iostream>

#include "s2v/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return s2v::run_cli(args, std::cout, std::cerr);
}
