// Batch front end: qadv <fit|crossover|tomography-study|resources|qmeans-study>
//   --config FILE [--out DIR] [--seed N]
//
// Exit status 0 on success. On failure the error category is printed as
// "error[<category>]: ..." on stderr and the exit status is 2 + category index.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "qadv/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
};

qadv::RunConfig load(const Options& o) {
  qadv::RunConfig cfg = qadv::load_config(o.config);
  if (o.out) cfg.output_dir = *o.out;
  if (o.seed) cfg.seeds = {*o.seed};
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PCA anomaly detection under simulated quantum errors"};
  app.require_subcommand(1);
  Options opt;

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const qadv::RunConfig&);
  };
  const Command commands[] = {
      {"fit", "fit exact and noisy models and write metric tables", qadv::cmd_fit},
      {"crossover", "quantum vs classical cost grid and frontier", qadv::cmd_crossover},
      {"tomography-study", "tomography sample count vs error", qadv::cmd_tomography_study},
      {"resources", "QRAM resource report", qadv::cmd_resources},
      {"qmeans-study", "q-means vs k-means CH index over n_k", qadv::cmd_qmeans_study},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("-c,--config", opt.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", opt.out, "output directory (overrides the config)");
    sub->add_option("-s,--seed", opt.seed, "run with this single seed");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& c : commands) {
      if (app.got_subcommand(c.name)) {
        c.run(load(opt));
        std::cout << c.name << ": done\n";
      }
    }
  } catch (const qadv::Error& e) {
    std::cerr << "error[" << qadv::to_string(e.category()) << "]: " << e.what() << "\n";
    return qadv::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
