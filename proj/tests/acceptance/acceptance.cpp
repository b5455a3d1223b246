// Runs every acceptance criterion on the reference setup; one line per criterion.

#include "sbc/parallel.hpp"
#include "sbc/verification.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  sbc::ExperimentConfig ref = sbc::reference_config();
  if (argc > 1) ref = sbc::load_config(argv[1]);
  if (const char* env = std::getenv("SBC_THREADS")) sbc::set_num_threads(std::atoi(env));
  int failed = 0;
  sbc::run_all_criteria(ref, [&](const sbc::CriterionResult& r) {
    std::cout << sbc::format_result(r) << std::endl;
    if (!r.passed) ++failed;
  });
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
