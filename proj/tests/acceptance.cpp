// Runs every acceptance criterion and prints one line per criterion.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>

#include "emachine/acceptance.hpp"

int main(int argc, char** argv) {
  std::uint64_t seed = 1;
  if (argc > 1) seed = std::strtoull(argv[1], nullptr, 10);
  int failed = 0;
  for (const auto& r : emachine::acceptance::run_suite("all", seed)) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  criterion " << r.id << " (" << r.suite << "): " << r.title << " | "
              << r.detail << " [" << r.seconds << " s]" << std::endl;
    failed += !r.pass;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all 12 criteria passed") << std::endl;
  return failed ? 1 : 0;
}
