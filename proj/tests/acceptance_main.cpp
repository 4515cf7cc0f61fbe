#include <cstdlib>
#include <cstring>
#include <iostream>

#include "thinobs/acceptance.hpp"

int main(int argc, char** argv) {
  thinobs::AcceptanceOptions opt;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--quick") == 0) opt.quick = true;
  bool ok = true;
  for (const auto& r : thinobs::run_acceptance(opt)) {
    std::cout << thinobs::format_line(r) << std::endl;
    ok = ok && r.passed;
  }
  return ok ? EXIT_SUCCESS : EXIT_FAILURE;
}
