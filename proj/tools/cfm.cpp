#include <iostream>

#include "cfm/cli.hpp"

int main(int argc, char** argv) {
  return cfm::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
