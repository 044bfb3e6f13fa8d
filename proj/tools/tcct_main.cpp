#include <malloc.h>

#include <iostream>
#include <string>
#include <vector>

#include "tcct/cli.hpp"

int main(int argc, char** argv) {
  // Training reallocates the same large activation buffers every step; keep
  // them in the heap instead of returning them to the OS each time.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  std::vector<std::string> args(argv, argv + argc);
  return tcct::cli::run(args, std::cout, std::cerr);
}
