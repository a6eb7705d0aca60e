#include <iostream>
#include <string>
#include <vector>

#include "dragdrop/cli/cli.hpp"

int main(int argc, char** argv) {
  return dragdrop::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
