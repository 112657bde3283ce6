#include <iostream>
#include <string>
#include <vector>

#include "fnn/commands.hpp"

int main(int argc, char** argv) {
  return fnn::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
