#include <iostream>
#include <vector>

#include "atmp/frontend.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return atmp::runCli(args, std::cout, std::cerr);
}
