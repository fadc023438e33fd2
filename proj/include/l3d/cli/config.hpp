#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "l3d/decomp/trainer.hpp"
#include "l3d/error.hpp"
#include "l3d/models/mlp.hpp"
#include "l3d/models/toy_data.hpp"
#include "l3d/models/train.hpp"

namespace l3d::cli {

/// Bad or missing configuration value; maps to exit status 2.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Everything that determines the bytes of an experiment's outputs.
///
/// The text format is one `key = value` per line, `#` starts a comment.
/// Every key that applies to the task must be present; keys that do not
/// apply (e.g. task.group_size for tms) are rejected, as are unknown keys.
struct ExperimentConfig {
  models::TaskKind task = models::TaskKind::Tms;
  std::uint64_t seed = 0;

  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::size_t hidden = 0;
  std::size_t hidden_layers = 0;  // square only
  double sparsity = 0.0;
  double input_lo = 0.0;
  double input_hi = 1.0;
  double mixing_lo = 0.0;         // tmcs / highrank
  double mixing_hi = 0.0;
  std::size_t group_size = 0;     // highrank only

  std::size_t model_n_data = 0;
  models::ToyTrainConfig model;

  decomp::DecompositionConfig l3d;  // threads and seed are not part of the file

  std::size_t eval_n_data = 0;
  std::size_t eval_n_refs = 0;
  std::size_t eval_n_probe = 0;
  std::size_t eval_top_n = 0;

  std::size_t intervene_n_inputs = 0;
  double delta_min = 0.0;
  double delta_max = 0.0;
  std::size_t delta_points = 0;
  double selectivity_delta = 0.0;

  void validate() const;
};

ExperimentConfig parse_config(std::string_view text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` override in the file syntax.
void apply_override(ExperimentConfig& config, std::string_view assignment);

/// Keys in canonical order with values at full precision.
std::string canonical_text(const ExperimentConfig& config);

/// FNV-1a 64 of canonical_text, as 16 lowercase hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Keys the given task accepts, in canonical order.
std::vector<std::string> config_keys(models::TaskKind task);

models::MlpSpec model_spec(const ExperimentConfig& config);

/// Task description; the mixing matrix (if any) is drawn from the
/// experiment's task stream so every command rederives the same A.
models::ToyTaskSpec task_spec(const ExperimentConfig& config);

/// Independent random streams of one experiment.
enum class Stream : std::uint64_t {
  Task = 1,
  ToyData = 2,
  ToyTrain = 3,
  DecompData = 4,
  DecompTrain = 5,
  Eval = 6,
  Intervene = 7,
};

numkit::Rng stream(const ExperimentConfig& config, Stream s);

}  // namespace l3d::cli
