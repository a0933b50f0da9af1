#include <iostream>

#include <string>
#include <vector>

#include "slosh/cli.hpp"

int main(int argc, char** argv) {
  return slosh::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
