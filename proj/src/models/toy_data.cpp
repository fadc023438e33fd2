#include "l3d/models/toy_data.hpp"

#include <string>

#include "l3d/error.hpp"
#include "l3d/numkit/linalg.hpp"

namespace l3d::models {

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Tms: return "tms";
    case TaskKind::Tmcs: return "tmcs";
    case TaskKind::HighRank: return "highrank";
    case TaskKind::Square: return "square";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view s) {
  if (s == "tms") return TaskKind::Tms;
  if (s == "tmcs") return TaskKind::Tmcs;
  if (s == "highrank") return TaskKind::HighRank;
  if (s == "square") return TaskKind::Square;
  throw InvalidArgument("unknown task '" + std::string(s) + "'");
}

namespace {

void check_sparsity(double sparsity) {
  if (!(sparsity > 0.0 && sparsity <= 1.0)) {
    throw InvalidArgument("sparsity must lie in (0, 1], got " + std::to_string(sparsity));
  }
}

}  // namespace

void ToyTaskSpec::validate() const {
  check_sparsity(sparsity);
  if (n_in == 0 || n_out == 0) throw InvalidArgument("task dimensions must be positive");
  if (!(input_lo < input_hi)) throw InvalidArgument("task input range must satisfy lo < hi");
  const bool linear = kind == TaskKind::Tmcs || kind == TaskKind::HighRank;
  if (linear) {
    if (!mixing) throw InvalidArgument(std::string(to_string(kind)) + " task requires a mixing matrix A");
    if (mixing->shape() != numkit::Shape{n_out, n_in}) {
      throw InvalidArgument("mixing matrix has shape " + numkit::shape_string(mixing->shape()) + ", expected [" +
                            std::to_string(n_out) + "x" + std::to_string(n_in) + "]");
    }
  } else if (n_in != n_out) {
    throw InvalidArgument(std::string(to_string(kind)) + " task requires n_in == n_out");
  }
  if (kind == TaskKind::HighRank) {
    if (!group_size || *group_size == 0 || n_in % *group_size != 0) {
      throw InvalidArgument("highrank task requires a group size dividing n_in");
    }
  }
}

Tensor gen_sparse(numkit::Rng& rng, std::size_t n_s, std::size_t n_i, double sparsity, double lo, double hi) {
  check_sparsity(sparsity);
  if (!(lo < hi)) throw InvalidArgument("gen_sparse: require lo < hi");
  Tensor x({n_s, n_i});
  for (double& v : x.data()) v = rng.bernoulli(sparsity) ? rng.uniform(lo, hi) : 0.0;
  return x;
}

Tensor gen_grouped(numkit::Rng& rng, std::size_t n_s, std::size_t n_i, std::size_t group_size, double sparsity,
                   double lo, double hi) {
  check_sparsity(sparsity);
  if (group_size == 0 || n_i % group_size != 0) {
    throw InvalidArgument("gen_grouped: group size " + std::to_string(group_size) + " does not divide " +
                          std::to_string(n_i));
  }
  if (!(lo < hi)) throw InvalidArgument("gen_grouped: require lo < hi");
  Tensor x({n_s, n_i});
  const std::size_t n_groups = n_i / group_size;
  for (std::size_t s = 0; s < n_s; ++s) {
    for (std::size_t g = 0; g < n_groups; ++g) {
      if (!rng.bernoulli(sparsity)) continue;
      for (std::size_t j = 0; j < group_size; ++j) x(s, g * group_size + j) = rng.uniform(lo, hi);
    }
  }
  return x;
}

Tensor make_targets(const ToyTaskSpec& task, const Tensor& x) {
  if (x.rank() != 2 || x.extent(1) != task.n_in) throw InvalidArgument("make_targets: input width mismatch");
  switch (task.kind) {
    case TaskKind::Tms: return x;
    case TaskKind::Tmcs:
    case TaskKind::HighRank:
      if (!task.mixing) throw InvalidArgument("make_targets: linear task without mixing matrix");
      return numkit::matmul_nt(x, *task.mixing);
    case TaskKind::Square: {
      Tensor y = x;
      for (double& v : y.data()) v *= v;
      return y;
    }
  }
  return x;
}

Tensor sample_inputs(const ToyTaskSpec& task, numkit::Rng& rng, std::size_t n_s) {
  task.validate();
  if (task.kind == TaskKind::HighRank) {
    return gen_grouped(rng, n_s, task.n_in, *task.group_size, task.sparsity, task.input_lo, task.input_hi);
  }
  return gen_sparse(rng, n_s, task.n_in, task.sparsity, task.input_lo, task.input_hi);
}

Dataset make_dataset(const ToyTaskSpec& task, numkit::Rng& rng, std::size_t n_s) {
  Dataset d;
  d.inputs = sample_inputs(task, rng, n_s);
  d.targets = make_targets(task, d.inputs);
  return d;
}

}  // namespace l3d::models
