#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "l3d/cli/config.hpp"

namespace l3d::cli {

/// Process exit statuses.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,    // anything not covered below, e.g. basis/model mismatch
  kExitConfig = 2,     // bad command line or config file
  kExitNumerical = 3,  // NaN/Inf during training or evaluation
  kExitIo = 4,         // missing input file, unwritable output
};

int exit_code_for(const std::exception_ptr& error);

// Files inside the output directory.
inline constexpr const char* kDatasetFile = "dataset.bin";
inline constexpr const char* kModelFile = "model.bin";
inline constexpr const char* kBasisFile = "basis.bin";
inline constexpr const char* kPactFile = "p_act.csv";

struct RunContext {
  ExperimentConfig config;
  std::filesystem::path out;
  std::size_t threads = 1;
  std::vector<std::string> argv;  // recorded in run_meta_<command>.json
  std::ostream* log = nullptr;    // progress and summaries; may be null
};

void cmd_gen_data(const RunContext& ctx);
void cmd_train_toy(const RunContext& ctx);

struct DecomposeOptions {
  // Either list non-empty switches to sweep mode: every (n_v, rank) pair is
  // trained, each basis is saved as basis_nv<N>_rank<R>.bin and the final
  // losses go to sweep.csv. An empty list means the config value.
  std::vector<std::size_t> ranks;
  std::vector<std::size_t> n_vs;
};
void cmd_decompose(const RunContext& ctx, const DecomposeOptions& options = {});

void cmd_eval(const RunContext& ctx);

struct InterveneOptions {
  std::vector<std::size_t> subnetworks;  // empty means all
  std::optional<std::pair<std::size_t, std::size_t>> pair;
};
void cmd_intervene(const RunContext& ctx, const InterveneOptions& options = {});

/// Collects whatever CSV/JSON outputs exist in ctx.out into summary.json and
/// renders SVG line plots from the loss CSVs.
void cmd_report(const RunContext& ctx);

}  // namespace l3d::cli
