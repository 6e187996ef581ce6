#include <doctest.h>

#include <deque>
#include <random>
#include <set>
#include <vector>

#include "promptwall/agentsim.hpp"
#include "reference_sim.hpp"

using namespace promptwall;

namespace {

AgentDefense tagged_defense() {
  AgentDefense defense;
  defense.model.honor_ai_tag = true;
  return defense;
}

refsim::Config mirror_config(const SimConfig& config) {
  refsim::Config ref;
  ref.nodes = config.topology.nodes;
  ref.edges = config.topology.edges;
  ref.rounds = config.rounds;
  ref.seed = config.seed;
  ref.p = config.infection_probability;
  ref.patient_zero = config.patient_zero;
  for (const auto& [id, defense] : config.per_agent) {
    refsim::AgentFlags flags;
    flags.obeys_ai_channel = defense.model.obey_channels.count(TrustTag::AIGenerated) > 0;
    flags.honors_ai_tag = defense.model.honor_ai_tag;
    flags.spotlights_inbox = defense.spotlight_inbox && defense.model.honor_spotlight;
    ref.flags[id] = flags;
  }
  refsim::AgentFlags default_flags;
  default_flags.obeys_ai_channel =
      config.default_defense.model.obey_channels.count(TrustTag::AIGenerated) > 0;
  default_flags.honors_ai_tag = config.default_defense.model.honor_ai_tag;
  default_flags.spotlights_inbox =
      config.default_defense.spotlight_inbox && config.default_defense.model.honor_spotlight;
  for (int node : config.topology.nodes) {
    if (ref.flags.find(node) == ref.flags.end()) {
      ref.flags[node] = default_flags;
    }
  }
  return ref;
}

std::set<int> reachable_from(const Topology& topology, int start,
                             const std::set<int>& blocked) {
  std::set<int> seen = {start};
  std::deque<int> queue = {start};
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    for (const auto& [from, to] : topology.edges) {
      if (from == node && blocked.count(to) == 0 && seen.insert(to).second) {
        queue.push_back(to);
      }
    }
  }
  return seen;
}

}  // namespace

TEST_CASE("one broadcast round infects a complete graph") {
  SimConfig config;
  config.topology = Topology::complete(5);
  config.rounds = 1;
  config.seed = 7;
  const SimMetrics metrics = run(config);
  CHECK(metrics.infected_per_round == std::vector<int>{1, 5});
  CHECK(metrics.final_infected.size() == 5);
}

TEST_CASE("a directed ring infects one successor per round") {
  SimConfig config;
  config.topology = Topology::ring(6);
  config.rounds = 5;
  config.seed = 3;
  const SimMetrics metrics = run(config);
  CHECK(metrics.infected_per_round == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("zero rounds reports only the initial state") {
  SimConfig config;
  config.topology = Topology::ring(4);
  config.rounds = 0;
  const SimMetrics metrics = run(config);
  CHECK(metrics.infected_per_round == std::vector<int>{1});
  CHECK(metrics.final_infected == std::set<int>{0});
}

TEST_CASE("stochastic runs match the independent reference simulator") {
  SimConfig config;
  config.topology = Topology::ring(6);
  config.rounds = 8;
  config.seed = 42;
  config.infection_probability = 0.5;
  const SimMetrics metrics = run(config);
  const refsim::Result expected = refsim::simulate(mirror_config(config));
  CHECK(metrics.infected_per_round == expected.infected_per_round);
  CHECK(metrics.final_infected == expected.final_infected);
}

TEST_CASE("one hundred seeded configs agree with the reference exactly") {
  std::mt19937_64 rng(0x51AB);
  for (int trial = 0; trial < 100; ++trial) {
    SimConfig config;
    const int n = 3 + static_cast<int>(rng() % 6);
    switch (rng() % 3) {
      case 0:
        config.topology = Topology::ring(n);
        break;
      case 1:
        config.topology = Topology::complete(n);
        break;
      default: {
        std::set<int> nodes;
        std::set<std::pair<int, int>> edges;
        for (int i = 0; i < n; ++i) nodes.insert(i);
        const int edge_count = n + static_cast<int>(rng() % (n * 2));
        for (int e = 0; e < edge_count; ++e) {
          const int from = static_cast<int>(rng() % n);
          const int to = static_cast<int>(rng() % n);
          if (from != to) edges.insert({from, to});
        }
        config.topology = Topology::custom(std::move(nodes), std::move(edges));
        break;
      }
    }
    config.rounds = static_cast<int>(rng() % 7);
    config.seed = rng();
    config.infection_probability = static_cast<double>(rng() % 101) / 100.0;
    config.patient_zero = static_cast<int>(rng() % n);
    // A few tagged agents sprinkled in.
    for (int i = 0; i < n; ++i) {
      if (rng() % 4 == 0) {
        config.per_agent[i] = tagged_defense();
      }
    }

    const SimMetrics metrics = run(config);
    const refsim::Result expected = refsim::simulate(mirror_config(config));
    REQUIRE(metrics.infected_per_round == expected.infected_per_round);
    REQUIRE(metrics.final_infected == expected.final_infected);

    // Monotone infection counts.
    for (std::size_t i = 1; i < metrics.infected_per_round.size(); ++i) {
      CHECK(metrics.infected_per_round[i] >= metrics.infected_per_round[i - 1]);
    }
  }
}

TEST_CASE("tagging on every agent confines the worm to patient zero") {
  SimConfig config;
  config.topology = Topology::complete(5);
  config.rounds = 4;
  config.seed = 11;
  config.default_defense = tagged_defense();
  const SimMetrics metrics = run(config);
  CHECK(metrics.final_infected == std::set<int>{0});
  CHECK(metrics.refusals > 0);
}

TEST_CASE("mixed defenses on a complete graph leave only untagged agents infected") {
  SimConfig config;
  config.topology = Topology::complete(8);
  config.rounds = 3;
  config.seed = 5;
  std::set<int> tagged = {1, 3, 5, 7};
  for (int id : tagged) {
    config.per_agent[id] = tagged_defense();
  }
  const SimMetrics metrics = run(config);
  std::set<int> expected;
  for (int i = 0; i < 8; ++i) {
    if (tagged.count(i) == 0) expected.insert(i);
  }
  CHECK(metrics.final_infected == expected);
}

TEST_CASE("tagged agents never transition to infected across random topologies") {
  std::mt19937_64 rng(0x7A66);
  for (int trial = 0; trial < 50; ++trial) {
    SimConfig config;
    const int n = 4 + static_cast<int>(rng() % 5);
    config.topology = (rng() % 2 == 0) ? Topology::complete(n) : Topology::ring(n);
    config.rounds = 1 + static_cast<int>(rng() % 5);
    config.seed = rng();
    std::set<int> tagged;
    for (int i = 1; i < n; ++i) {
      if (rng() % 2 == 0) {
        config.per_agent[i] = tagged_defense();
        tagged.insert(i);
      }
    }
    const SimMetrics metrics = run(config);
    for (int id : tagged) {
      CHECK(metrics.final_infected.count(id) == 0);
    }
  }
}

TEST_CASE("agents unreachable from patient zero stay clean") {
  std::set<int> nodes = {0, 1, 2, 3, 4, 5};
  std::set<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {5, 3}};
  SimConfig config;
  config.topology = Topology::custom(nodes, edges);
  config.rounds = 6;
  const SimMetrics metrics = run(config);
  const std::set<int> reachable = reachable_from(config.topology, 0, {});
  for (int id : metrics.final_infected) {
    CHECK(reachable.count(id) == 1);
  }
  CHECK(metrics.final_infected == std::set<int>{0, 1, 2});
}

TEST_CASE("identical configs run identically, serial or parallel") {
  SimConfig config;
  config.topology = Topology::complete(7);
  config.rounds = 5;
  config.seed = 1234;
  config.infection_probability = 0.35;
  config.per_agent[2] = tagged_defense();
  config.per_agent[5] = tagged_defense();

  const SimMetrics serial_a = run(config, /*parallel=*/false);
  const SimMetrics serial_b = run(config, /*parallel=*/false);
  const SimMetrics parallel = run(config, /*parallel=*/true);
  CHECK(serial_a.infected_per_round == serial_b.infected_per_round);
  CHECK(serial_a.final_infected == serial_b.final_infected);
  CHECK(serial_a.refusals == serial_b.refusals);
  CHECK(serial_a.infected_per_round == parallel.infected_per_round);
  CHECK(serial_a.final_infected == parallel.final_infected);
  CHECK(serial_a.refusals == parallel.refusals);
}

TEST_CASE("spotlighting inboxes stops propagation when the model honors it") {
  SimConfig config;
  config.topology = Topology::complete(4);
  config.rounds = 3;
  config.default_defense.spotlight_inbox = true;
  config.default_defense.model.honor_spotlight = true;
  const SimMetrics metrics = run(config);
  CHECK(metrics.final_infected == std::set<int>{0});
  CHECK(metrics.refusals > 0);
}

TEST_CASE("configuration validation rejects bad topologies and parameters") {
  CHECK_THROWS_AS(Topology::custom({0, 1}, {{0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(Topology::custom({0}, {{0, 1}}), std::invalid_argument);

  SimConfig bad_p;
  bad_p.topology = Topology::ring(3);
  bad_p.infection_probability = 1.5;
  CHECK_THROWS_AS(bad_p.validate(), std::invalid_argument);

  SimConfig bad_zero;
  bad_zero.topology = Topology::ring(3);
  bad_zero.patient_zero = 9;
  CHECK_THROWS_AS(bad_zero.validate(), std::invalid_argument);

  SimConfig bad_rounds;
  bad_rounds.topology = Topology::ring(3);
  bad_rounds.rounds = -1;
  CHECK_THROWS_AS(bad_rounds.validate(), std::invalid_argument);
}
