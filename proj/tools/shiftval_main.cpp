#include <iostream>

#include "shiftval/cli.hpp"

int main(int argc, char** argv) {
  return shiftval::cli::run(argc, argv, std::cout, std::cerr);
}
