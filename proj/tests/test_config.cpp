#include <doctest.h>

#include <string>

#include "promptwall/config.hpp"

using namespace promptwall;

#ifndef PROMPTWALL_SOURCE_DIR
#define PROMPTWALL_SOURCE_DIR "."
#endif

TEST_CASE("the shipped default config loads and matches the builtin defaults") {
  const HarnessConfig config =
      load_config_file(std::string(PROMPTWALL_SOURCE_DIR) + "/data/config.default.json");
  CHECK(config.stack.preamble_text == std::string(kDefaultPreamble));
  CHECK(config.stack.policy.rules.size() == 5);
  CHECK(config.stack.policy.conflict_strategy == ConflictStrategy::MostRestrictive);
  CHECK(config.stack.policy.scan_encoded.min_len == 16);
  CHECK(config.stack.spotlight_mode == SpotlightMode::Delimit);
  REQUIRE(config.simulation.has_value());
  CHECK(config.simulation->rounds == 5);
  CHECK(config.simulation->topology.nodes.size() == 6);

  const SimMetrics metrics = run(*config.simulation);
  CHECK(metrics.infected_per_round == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("the tagged-k8 example confines the worm to the untagged half") {
  const HarnessConfig config =
      load_config_file(std::string(PROMPTWALL_SOURCE_DIR) + "/data/sim.tagged-k8.json");
  REQUIRE(config.simulation.has_value());
  const SimMetrics metrics = run(*config.simulation);
  CHECK(metrics.final_infected == std::set<int>{0, 2, 4, 6});
}

TEST_CASE("unknown keys are rejected everywhere") {
  CHECK_THROWS_AS(load_config_json(R"({"mystery": 1})"), PolicyError);
  CHECK_THROWS_AS(load_config_json(R"({"policy": {"mystery": 1}})"), PolicyError);
  CHECK_THROWS_AS(
      load_config_json(
          R"({"policy": {"rules": [{"id": "r", "kind": "pattern", "action": "block", "patterns": ["x"], "mystery": 1}]}})"),
      PolicyError);
  CHECK_THROWS_AS(load_config_json(R"({"spotlight": {"mystery": 1}})"), PolicyError);
  CHECK_THROWS_AS(
      load_config_json(R"({"security_policy": {"forbidden_flows": [{"source": "web",
        "sink": "exfiltration", "mystery": 1}]}})"),
      PolicyError);
}

TEST_CASE("malformed documents and values fail at load") {
  CHECK_THROWS_AS(load_config_json("not json"), PolicyError);
  CHECK_THROWS_AS(load_config_json(R"({"spotlight": {"mode": "sideways"}})"), PolicyError);
  CHECK_THROWS_AS(load_config_json(R"({"spotlight": {"apply_to": ["system"]}})"), PolicyError);
  CHECK_THROWS_AS(
      load_config_json(
          R"({"policy": {"rules": [{"id": "r", "kind": "pattern", "action": "block", "patterns": ["re:["]}]}})"),
      PolicyError);
  CHECK_THROWS_AS(
      load_config_json(R"({"policy": {"conflict_strategy": "coin_flip"}})"), PolicyError);
}

TEST_CASE("priority strategies load their rule weights from config") {
  const HarnessConfig config = load_config_json(R"({
    "policy": {
      "conflict_strategy": "priority",
      "priorities": {"quiet": 10, "loud": 1},
      "rules": [
        {"id": "quiet", "kind": "pattern", "action": "flag", "patterns": ["alpha"]},
        {"id": "loud", "kind": "pattern", "action": "block", "patterns": ["alpha"]}
      ],
      "scan_encoded": {"enabled": false}
    }
  })");
  const PolicyEngine engine(config.stack.policy);
  Conversation conversation;
  conversation.append(tokenize_and_tag("alpha", TrustTag::UntrustedUser));
  CHECK(engine.evaluate_policy(conversation).decision == Decision::Allow);

  CHECK_THROWS_AS(load_config_json(R"({
    "policy": {
      "conflict_strategy": "priority",
      "rules": [{"id": "orphan", "kind": "pattern", "action": "block", "patterns": ["x"]}]
    }
  })"),
                  PolicyError);
}

TEST_CASE("security policy flows merge by sink") {
  const HarnessConfig config = load_config_json(R"({
    "security_policy": {
      "default": "allow",
      "forbidden_flows": [
        {"source": "web", "sink": "exfiltration"},
        {"source": "document", "sink": "exfiltration"},
        {"source": "user", "sink": "send_email"}
      ]
    }
  })");
  CHECK(config.stack.security_policy.rules.size() == 2);
}

TEST_CASE("a custom worm body flows into the simulation") {
  const SimConfig config = sim_config_from_json_text(R"({
    "topology": {"kind": "complete", "n": 3},
    "rounds": 1,
    "seed": 1,
    "p": 1.0,
    "patient_zero": 0,
    "worm_body": "REPLICATE: crafted payload for this run"
  })");
  CHECK(config.worm_body == "REPLICATE: crafted payload for this run");
  const SimMetrics metrics = run(config);
  CHECK(metrics.final_infected.size() == 3);
}

TEST_CASE("simulation documents parse defense overrides") {
  const SimConfig config = sim_config_from_json_text(R"({
    "topology": {"kind": "custom", "edges": [[0, 1], [1, 2]]},
    "rounds": 2,
    "seed": 9,
    "p": 0.5,
    "patient_zero": 0,
    "defenses": {
      "default": {"obey_channels": ["system", "user"]},
      "per_agent": {"2": {"honor_ai_tag": true, "spotlight_inbox": true}}
    }
  })");
  CHECK(config.topology.nodes.size() == 3);
  CHECK(config.default_defense.model.obey_channels ==
        std::set<TrustTag>{TrustTag::TrustedSystem, TrustTag::UntrustedUser});
  CHECK(config.per_agent.at(2).model.honor_ai_tag);
  CHECK(config.per_agent.at(2).spotlight_inbox);
  CHECK_THROWS(sim_config_from_json_text(R"({"topology": {"kind": "ring", "n": 3},
    "patient_zero": 7})"));
}
