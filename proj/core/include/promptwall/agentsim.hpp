#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "promptwall/mock_model.hpp"
#include "promptwall/spotlight.hpp"
#include "promptwall/trust.hpp"

namespace promptwall {

// Per-agent defense: the model knobs plus inbox spotlighting.
struct AgentDefense {
  ModelConfig model;
  bool spotlight_inbox = false;
  SpotlightMode spotlight_mode = SpotlightMode::Delimit;
};

struct Topology {
  std::set<int> nodes;
  std::set<std::pair<int, int>> edges;  // directed (sender, receiver)

  static Topology ring(int n);      // directed cycle 0->1->...->n-1->0
  static Topology complete(int n);  // every ordered pair
  static Topology custom(std::set<int> nodes, std::set<std::pair<int, int>> edges);

  void validate() const;  // no self-loops, edges reference nodes
};

struct SimConfig {
  Topology topology;
  int rounds = 0;
  std::uint64_t seed = 0;
  double infection_probability = 1.0;
  int patient_zero = 0;
  AgentDefense default_defense;
  std::map<int, AgentDefense> per_agent;  // overrides
  std::string worm_body = std::string(kWormDirective);

  void validate() const;
};

enum class AgentState { Clean, Infected };

struct Message {
  int sender = 0;
  TaggedSegment body;  // AIGenerated: agents are AIs
  int round_sent = 0;
};

struct AgentNode {
  int id = 0;
  AgentDefense defense;
  AgentState state = AgentState::Clean;
  std::vector<Message> inbox;
  std::string worm_payload;  // what this agent forwards once infected
};

struct SimMetrics {
  std::vector<int> infected_per_round;  // [initial, after round 1, ...]
  std::set<int> final_infected;
  int refusals = 0;
};

// Synchronous-round worm propagation. Infected agents broadcast the
// replication directive to their out-neighbors; deliveries land next round;
// clean agents run the scripted model over their inbox and become infected
// when the model forwards the worm and the per-delivery draw succeeds. Draws
// are consumed in ascending (sender, receiver) order from the seeded LCG.
class World {
 public:
  explicit World(SimConfig config);

  void step(bool parallel = false);

  int infected_count() const;
  std::set<int> infected_ids() const;
  int refusals() const { return refusals_; }
  int round() const { return round_; }
  const std::map<int, AgentNode>& agents() const { return agents_; }

 private:
  void send_phase();

  SimConfig config_;
  std::map<int, AgentNode> agents_;
  std::map<int, std::vector<Message>> pending_;  // deliveries for the next round
  std::uint64_t rng_state_;
  int round_ = 0;
  int refusals_ = 0;
};

SimMetrics run(const SimConfig& config, bool parallel = false);

}  // namespace promptwall
