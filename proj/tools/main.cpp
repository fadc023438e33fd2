#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "l3d/cli/commands.hpp"

namespace {

using namespace l3d::cli;

std::size_t resolve_threads(const std::optional<std::size_t>& flag) {
  if (flag) {
    if (*flag == 0) throw ConfigError("--threads must be positive");
    return *flag;
  }
  const char* env = std::getenv("L3D_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    std::size_t used = 0;
    const long long n = std::stoll(env, &used);
    if (used == std::string(env).size() && n > 0) return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("L3D_THREADS must be a positive integer, got '") + env + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse low-rank parameter-space decomposition of toy models"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "l3d_out";
  std::optional<std::size_t> threads;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Experiment config file (see presets/)")->required();
  app.add_option("--seed", seed, "Experiment seed; overrides the config");
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (default: $L3D_THREADS, else 1)");
  app.add_option("--set", overrides, "Override a config value, key=value (repeatable)");

  auto* gen = app.add_subcommand("gen-data", "Sample the toy dataset");
  auto* train = app.add_subcommand("train-toy", "Train the toy model on the dataset");
  std::optional<std::size_t> epochs;
  train->add_option("--epochs", epochs, "Training epochs; overrides model.epochs");
  auto* dec = app.add_subcommand("decompose", "Learn the subnetwork basis of the trained model");
  DecomposeOptions dec_options;
  dec->add_option("--ranks", dec_options.ranks, "Sweep over these Tucker ranks")->delimiter(',');
  dec->add_option("--nv", dec_options.n_vs, "Sweep over these subnetwork counts")->delimiter(',');
  auto* eval = app.add_subcommand("eval", "Evaluate the basis: assignment, alignment, coefficients, impacts");
  auto* inter = app.add_subcommand("intervene", "Move parameters along subnetwork directions");
  InterveneOptions inter_options;
  std::vector<std::size_t> pair;
  inter->add_option("--subnetworks", inter_options.subnetworks, "Subnetworks to sweep (default all)")->delimiter(',');
  inter->add_option("--pair", pair, "Two subnetworks for the joint delta grid, a,b")->delimiter(',')->expected(2);
  auto* report = app.add_subcommand("report", "Summarize outputs into summary.json and SVG plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    RunContext ctx;
    ctx.config = load_config(config_path);
    for (const auto& o : overrides) apply_override(ctx.config, o);
    if (seed) ctx.config.seed = *seed;
    if (epochs) apply_override(ctx.config, "model.epochs=" + std::to_string(*epochs));
    ctx.out = out;
    ctx.threads = resolve_threads(threads);
    ctx.argv.assign(argv, argv + argc);
    ctx.log = &std::cout;
    if (pair.size() == 2) inter_options.pair = std::make_pair(pair[0], pair[1]);

    if (gen->parsed()) cmd_gen_data(ctx);
    if (train->parsed()) cmd_train_toy(ctx);
    if (dec->parsed()) cmd_decompose(ctx, dec_options);
    if (eval->parsed()) cmd_eval(ctx);
    if (inter->parsed()) cmd_intervene(ctx, inter_options);
    if (report->parsed()) cmd_report(ctx);
  } catch (const std::exception& e) {
    std::cerr << "l3d: error: " << e.what() << '\n';
    return exit_code_for(std::current_exception());
  }
  return kExitOk;
}
