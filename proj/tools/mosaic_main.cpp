#include <iostream>

#include "mosaic/evalcli/cli.hpp"
#include "mosaic/numerics/runtime.hpp"

int main(int argc, char** argv) {
  mosaic::tune_allocator();
  return mosaic::evalcli::run_cli(argc, argv, std::cout, std::cerr);
}
