// Dedicated acceptance gate: runs the thirteen desk checks and prints one
// PASS/FAIL line each; the exit code reflects the overall verdict.
#include <iostream>

#include "hartree/acceptance.hpp"

int main() {
  const hartree::AcceptanceOutcome outcome = hartree::run_acceptance(std::cout);
  return outcome.all_pass ? 0 : 1;
}
