#include <iostream>
#include <string>
#include <vector>

#include "graspcheck/cli.hpp"

int main(int argc, char** argv) {
  return graspcheck::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
