#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "l3d/numkit/rng.hpp"
#include "l3d/numkit/tensor.hpp"

namespace l3d::models {

using numkit::Tensor;

enum class TaskKind { Tms, Tmcs, HighRank, Square };

std::string_view to_string(TaskKind k);
TaskKind parse_task_kind(std::string_view s);

struct ToyTaskSpec {
  TaskKind kind = TaskKind::Tms;
  std::size_t n_in = 5;
  std::size_t n_out = 5;
  double sparsity = 0.05;
  double input_lo = 0.0;
  double input_hi = 1.0;
  std::optional<Tensor> mixing;          // A, [n_out x n_in], for Tmcs/HighRank
  std::optional<std::size_t> group_size;  // HighRank only

  void validate() const;
};

struct Dataset {
  Tensor inputs;   // [n_s x n_in]
  Tensor targets;  // [n_s x n_out]

  std::size_t size() const { return inputs.empty() ? 0 : inputs.extent(0); }
};

/// Each entry independently nonzero with probability `sparsity`, value
/// Uniform[lo, hi). Per entry: one gate draw, then a value draw if active.
Tensor gen_sparse(numkit::Rng& rng, std::size_t n_s, std::size_t n_i, double sparsity, double lo, double hi);

/// Contiguous groups of `group_size` features are gated jointly with
/// probability `sparsity`; active groups get i.i.d. Uniform[lo, hi) values,
/// inactive groups are zero.
Tensor gen_grouped(numkit::Rng& rng, std::size_t n_s, std::size_t n_i, std::size_t group_size, double sparsity,
                   double lo, double hi);

/// Tms: Y = X.  Tmcs/HighRank: Y = X A^T.  Square: Y = X*X elementwise.
Tensor make_targets(const ToyTaskSpec& task, const Tensor& x);

/// Inputs drawn from the task's distribution.
Tensor sample_inputs(const ToyTaskSpec& task, numkit::Rng& rng, std::size_t n_s);

Dataset make_dataset(const ToyTaskSpec& task, numkit::Rng& rng, std::size_t n_s);

}  // namespace l3d::models
