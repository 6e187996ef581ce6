#pragma once

// Independent straight-line reference for the propagation simulator. This
// deliberately re-implements the round semantics from the documented rules
// (docs/config-schema.md) without touching World, run_model, or Lcg64, so it
// can serve as an oracle for the real implementation.

#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace refsim {

struct AgentFlags {
  bool obeys_ai_channel = true;  // false when channel enforcement is on
  bool honors_ai_tag = false;
  bool spotlights_inbox = false;
};

struct Config {
  std::set<int> nodes;
  std::set<std::pair<int, int>> edges;  // directed
  int rounds = 0;
  std::uint64_t seed = 0;
  double p = 1.0;
  int patient_zero = 0;
  std::map<int, AgentFlags> flags;  // defaults to undefended
};

struct Result {
  std::vector<int> infected_per_round;
  std::set<int> final_infected;
};

inline Result simulate(const Config& config) {
  std::set<int> infected = {config.patient_zero};
  std::uint64_t state = config.seed;

  Result result;
  result.infected_per_round.push_back(1);

  for (int round = 1; round <= config.rounds; ++round) {
    // Deliveries this round come from agents infected at the end of the
    // previous round. A delivery is a candidate when the receiver is clean
    // and its defenses would forward the worm directive.
    std::vector<std::pair<int, int>> candidates;
    for (const auto& [from, to] : config.edges) {  // std::set: ascending (from, to)
      if (infected.count(from) == 0 || infected.count(to) > 0) {
        continue;
      }
      AgentFlags flags;
      const auto it = config.flags.find(to);
      if (it != config.flags.end()) {
        flags = it->second;
      }
      if (!flags.obeys_ai_channel || flags.honors_ai_tag || flags.spotlights_inbox) {
        continue;  // the model refuses: no draw is consumed
      }
      candidates.emplace_back(from, to);
    }
    std::set<int> fresh;
    for (const auto& [from, to] : candidates) {
      state = 6364136223846793005ULL * state + 1442695040888963407ULL;
      const double draw = static_cast<double>(state >> 11) * 0x1.0p-53;
      if (draw < config.p) {
        fresh.insert(to);
      }
    }
    infected.insert(fresh.begin(), fresh.end());
    result.infected_per_round.push_back(static_cast<int>(infected.size()));
  }
  result.final_infected = infected;
  return result;
}

}  // namespace refsim
