#include <iostream>

#include "etpot/cli/cli.h"

int main(int argc, char** argv) {
  return etpot::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
