// Minimal use of the library: simulate a small committee for a few rounds and
// print who was elected. Exits non-zero if any round lacks a unique leader.

#include <iostream>

#include "hsort/hsort.hpp"

int main() {
  using namespace hsort;

  simnet::Scenario scenario(StakeTable({1, 2, 3, 4}, 4));
  scenario.d = 2;
  scenario.rounds = 4;
  scenario.seed = 2024;

  const auto transcript = simnet::run(scenario);
  int bad = 0;
  for (const auto& outcome : transcript.outcomes) {
    const auto voucher = transcript.voucher(outcome.round);
    std::cout << "round " << outcome.round << "  voucher " << to_hex(*voucher).substr(0, 16) << "...  leader "
              << outcome.elected << (outcome.accepted ? "  block accepted" : "  no block") << "\n";
    bad += outcome.claimants != 1 || !outcome.accepted;
  }
  std::cout << transcript.counts.pvoucher_network << " PVoucher messages, last tick " << transcript.final_tick << "\n";
  return bad == 0 ? 0 : 1;
}
