// jqc: batch front end for Jastrow-projected circuit experiments.

#include <fstream>
#include <iostream>
#include <utility>

#include <CLI11.hpp>

#include "jqc/experiments.hpp"

namespace {

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool literal_weight = false;
  int threads = 1;
};

int run(jqc::ExperimentKind kind, const Args& a) {
  jqc::ExperimentConfig cfg = jqc::load_config(a.config);
  if (cfg.kind != kind) {
    std::cerr << "jqc: config kind is '" << jqc::to_string(cfg.kind) << "', command is '" << jqc::to_string(kind)
              << "'\n";
    return 2;
  }
  if (a.seed) cfg.seed = *a.seed;
  const std::string out = a.out.empty() ? cfg.output : a.out;

  auto emit = [&](auto&& write) -> int {
    if (out.empty() || out == "-") {
      write(std::cout);
      return 0;
    }
    std::ofstream f(out);
    if (!f) {
      std::cerr << "jqc: cannot write '" << out << "'\n";
      return 1;
    }
    write(f);
    return 0;
  };

  if (kind == jqc::ExperimentKind::DumpH) {
    return emit([&](std::ostream& os) { jqc::dump_hamiltonians(os, cfg); });
  }

  jqc::RunOptions opts;
  opts.threads = a.threads;
  if (a.literal_weight) opts.weight_mode = jqc::WeightMode::Literal;
  const jqc::ResultTable table = jqc::run_experiment(cfg, opts);
  if (const int rc = emit([&](std::ostream& os) { jqc::write_csv(os, cfg, table); })) return rc;
  if (cfg.json_mirror && !out.empty() && out != "-") {
    std::ofstream j(out + ".json");
    if (!j) {
      std::cerr << "jqc: cannot write '" << out << ".json'\n";
      return 1;
    }
    jqc::write_json(j, cfg, table);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jastrow-projected quantum circuit experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(jqc::kVersion));

  Args args;
  std::uint64_t seed = 0;
  std::optional<jqc::ExperimentKind> chosen;
  const std::pair<jqc::ExperimentKind, const char*> commands[] = {
      {jqc::ExperimentKind::Sweep, "circuit vs JQC energies over a parameter grid"},
      {jqc::ExperimentKind::Gain, "computational gain per model and depth"},
      {jqc::ExperimentKind::LambdaScan, "sampled energy along a scaled lambda path"},
      {jqc::ExperimentKind::Reconstruct, "sign-solved reconstruction of random real states"},
      {jqc::ExperimentKind::Dispersion, "repetition dispersion of the sampled energy"},
      {jqc::ExperimentKind::DumpH, "print model Hamiltonians as Pauli terms"},
  };
  for (const auto& [kind, help] : commands) {
    auto* sub = app.add_subcommand(jqc::to_string(kind), help);
    sub->add_option("--config", args.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", args.out, "output path ('-' for stdout)");
    sub->add_flag("--literal-weight", args.literal_weight, "use w(j) = exp(J) instead of exp(2J)");
    sub->add_option("--threads", args.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->callback([&, kind, sub] {
      chosen = kind;
      if (sub->count("--seed")) args.seed = seed;
    });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return run(*chosen, args);
  } catch (const std::exception& e) {
    std::cerr << "jqc: " << e.what() << '\n';
    return 1;
  }
}
