// Acceptance gate. Runs every criterion (or --only N, repeatable) and prints
// one PASS/FAIL line per criterion; nonzero exit if anything fails. ctest
// registers each criterion as its own test via --only.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "sdprop/verify.hpp"

int main(int argc, char** argv) {
  std::vector<int> only;
  sdprop::VerifyOptions opts;

  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    const auto next = [&]() -> const char* {
      if (i + 1 >= argc) {
        std::cerr << arg << " needs a value\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (arg == "--only") {
      only.push_back(std::atoi(next()));
    } else if (arg == "--mnist-dir") {
      opts.mnist_dir = next();
    } else if (arg == "--threads") {
      opts.threads = std::atoi(next());
    } else if (arg == "--help" || arg == "-h") {
      std::cout << "usage: acceptance [--only N]... [--mnist-dir DIR] "
                   "[--threads N]\n";
      return 0;
    } else {
      std::cerr << "unknown argument: " << arg << "\n";
      return 2;
    }
  }

  if (only.empty()) only = sdprop::all_criteria();

  bool ok = true;
  for (const int id : only) {
    const sdprop::CriterionResult r = sdprop::run_criterion(id, opts);
    ok = ok && r.pass;
    std::cout << "criterion " << r.id << " " << r.name << ": "
              << (r.pass ? "PASS" : "FAIL") << " (" << std::fixed
              << std::setprecision(1) << r.seconds << "s) — " << r.detail
              << std::endl;
  }
  return ok ? 0 : 1;
}
