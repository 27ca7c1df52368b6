#include <iostream>

#include "sngan/cli.hpp"

int main(int argc, char** argv) {
  return sngan::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
