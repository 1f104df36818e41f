#include <iostream>
#include <string>
#include <vector>

#include "antibunch/cli.hpp"

int main(int argc, char** argv) {
  return antibunch::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
