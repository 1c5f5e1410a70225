#include <iostream>
#include <string>
#include <vector>

#include "flowdub/cli.hpp"

int main(int argc, char** argv) {
  return flowdub::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
