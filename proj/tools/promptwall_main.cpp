#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "promptwall/config.hpp"
#include "promptwall/gateway.hpp"
#include "promptwall/harness.hpp"

namespace {

using namespace promptwall;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  out << content;
}

std::set<DefenseLayer> parse_subset(const std::string& spec) {
  if (spec == "all") {
    return all_defense_layers();
  }
  if (spec == "none") {
    return {};
  }
  std::set<DefenseLayer> subset;
  std::stringstream stream(spec);
  std::string name;
  while (std::getline(stream, name, ',')) {
    const auto layer = defense_layer_from_string(name);
    if (!layer) {
      throw std::runtime_error("unknown defense layer '" + name +
                               "' (expected trust_tagging, guardrails, spotlighting, "
                               "capability_interpreter, llm_tagging)");
    }
    subset.insert(*layer);
  }
  return subset;
}

DefenseStack stack_from(const std::string& config_path, const std::string& defenses) {
  HarnessConfig config =
      config_path.empty() ? HarnessConfig{} : load_config_file(config_path);
  config.stack.enabled = parse_subset(defenses);
  return config.stack;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promptwall: layered prompt-injection defense sandbox"};
  app.require_subcommand(1);

  // screen
  auto* screen_cmd = app.add_subcommand("screen", "screen one input text through the stack");
  std::string screen_input;
  std::string screen_channel = "user";
  std::string screen_config;
  std::string screen_defenses = "all";
  screen_cmd->add_option("--input", screen_input, "file with the text to screen")->required();
  screen_cmd->add_option("--channel", screen_channel, "system|user|external|tool|ai");
  screen_cmd->add_option("--config", screen_config, "harness configuration file");
  screen_cmd->add_option("--defenses", screen_defenses, "all|none|comma list");

  // matrix
  auto* matrix_cmd = app.add_subcommand("matrix", "run the defense x attack matrix");
  std::string matrix_corpus = "builtin";
  std::vector<std::string> matrix_defenses;
  std::uint64_t matrix_seed = 0;
  std::string matrix_out;
  std::string matrix_config;
  bool matrix_parallel = false;
  matrix_cmd->add_option("--corpus", matrix_corpus, "builtin or a corpus JSON file");
  matrix_cmd
      ->add_option("--defenses", matrix_defenses,
                   "all|none|comma list (repeat for multiple subsets)")
      ->required();
  matrix_cmd->add_option("--seed", matrix_seed, "run seed");
  matrix_cmd->add_option("--out", matrix_out, "report output file");
  matrix_cmd->add_option("--config", matrix_config, "harness configuration file");
  matrix_cmd->add_flag("--parallel", matrix_parallel, "run matrix rows in parallel");

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "run a worm propagation simulation");
  std::string simulate_config;
  std::string simulate_out;
  simulate_cmd->add_option("--config", simulate_config, "harness configuration file")
      ->required();
  simulate_cmd->add_option("--out", simulate_out, "metrics output file");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP screening gateway");
  std::string serve_bind = "127.0.0.1:8080";
  std::string serve_config;
  std::string serve_defenses = "all";
  serve_cmd->add_option("--bind", serve_bind, "host:port to bind");
  serve_cmd->add_option("--config", serve_config, "harness configuration file");
  serve_cmd->add_option("--defenses", serve_defenses, "all|none|comma list");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*screen_cmd) {
      const auto channel = trust_tag_from_string(screen_channel);
      if (!channel) {
        throw std::runtime_error("unknown channel '" + screen_channel + "'");
      }
      const DefenseStack stack = stack_from(screen_config, screen_defenses);
      const ScreenResult result = screen(read_file(screen_input), *channel, stack);
      std::cout << screen_response_json(result) << "\n";
      return 0;
    }

    if (*matrix_cmd) {
      const std::vector<AttackSpec> corpus = (matrix_corpus == "builtin")
                                                 ? builtin_corpus()
                                                 : load_corpus_json(read_file(matrix_corpus));
      std::vector<std::set<DefenseLayer>> subsets;
      subsets.reserve(matrix_defenses.size());
      for (const std::string& spec : matrix_defenses) {
        subsets.push_back(parse_subset(spec));
      }
      MatrixOptions options;
      options.parallel = matrix_parallel;
      if (matrix_corpus != "builtin") {
        options.corpus_version = "custom:" + matrix_corpus;
      }
      if (!matrix_config.empty()) {
        options.base_stack = load_config_file(matrix_config).stack;
      }
      const MatrixReport report = run_matrix(corpus, subsets, matrix_seed, options);
      const std::string body = matrix_report_json(report);
      if (matrix_out.empty()) {
        std::cout << body << "\n";
      } else {
        write_file(matrix_out, body);
        for (const auto& [subset, asr] : report.asr) {
          std::cout << subset << ": asr=" << asr << "\n";
        }
      }
      return 0;
    }

    if (*simulate_cmd) {
      const HarnessConfig config = load_config_file(simulate_config);
      if (!config.simulation) {
        throw std::runtime_error("config has no 'simulation' section");
      }
      const SimMetrics metrics = run(*config.simulation);
      const std::string body = sim_metrics_json(metrics);
      if (simulate_out.empty()) {
        std::cout << body << "\n";
      } else {
        write_file(simulate_out, body);
        std::cout << "final infected: " << metrics.final_infected.size() << "\n";
      }
      return 0;
    }

    if (*serve_cmd) {
      const DefenseStack stack = stack_from(serve_config, serve_defenses);
      std::cout << "listening on " << serve_bind << "\n";
      if (!gateway_serve(serve_bind, stack)) {
        throw std::runtime_error("failed to bind " + serve_bind);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
