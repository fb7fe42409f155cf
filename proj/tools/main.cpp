#include <iostream>

#include "nearnet/cli.hpp"

int main(int argc, char** argv) {
  return nearnet::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
