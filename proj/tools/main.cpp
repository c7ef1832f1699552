#include <iostream>
#include <string>
#include <vector>

#include "matsubara/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return matsubara::cli::run(args, std::cout, std::cerr);
}
