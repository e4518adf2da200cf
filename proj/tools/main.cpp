#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return apifreq::cli::dispatch(args, std::cout, std::cerr);
}
