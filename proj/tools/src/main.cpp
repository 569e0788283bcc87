#include <iostream>

#include "dcmgnn_cli/cli.hpp"

int main(int argc, char** argv) {
  dcmgnn::cli::tune_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return dcmgnn::cli::run(args, std::cout, std::cerr);
}
