#include <iostream>
#include <string>
#include <vector>

#include "blindsr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return blindsr::dispatch(args, std::cout, std::cerr);
}
