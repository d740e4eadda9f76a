#include <iostream>
#include <string>
#include <vector>

#include "h3d/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return h3d::cli_main(args, std::cout, std::cerr);
}
