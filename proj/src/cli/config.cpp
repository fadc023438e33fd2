#include "l3d/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace l3d::cli {

namespace {

using models::TaskKind;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a number, got '" + value + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

bool any_task(TaskKind) { return true; }
bool is_square(TaskKind t) { return t == TaskKind::Square; }
bool has_mixing(TaskKind t) { return t == TaskKind::Tmcs || t == TaskKind::HighRank; }
bool is_grouped(TaskKind t) { return t == TaskKind::HighRank; }

struct Field {
  std::string key;
  bool (*applies)(TaskKind);
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field size_field(std::string key, bool (*applies)(TaskKind), T ExperimentConfig::*outer, std::size_t T::*member) {
  return {key, applies,
          [=](ExperimentConfig& c, const std::string& v) { (c.*outer).*member = to_u64(key, v); },
          [=](const ExperimentConfig& c) { return std::to_string((c.*outer).*member); }};
}

template <typename T>
Field double_field(std::string key, bool (*applies)(TaskKind), T ExperimentConfig::*outer, double T::*member) {
  return {key, applies,
          [=](ExperimentConfig& c, const std::string& v) { (c.*outer).*member = to_double(key, v); },
          [=](const ExperimentConfig& c) { return fmt_double((c.*outer).*member); }};
}

Field size_field(std::string key, bool (*applies)(TaskKind), std::size_t ExperimentConfig::*member) {
  return {key, applies, [=](ExperimentConfig& c, const std::string& v) { c.*member = to_u64(key, v); },
          [=](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(std::string key, bool (*applies)(TaskKind), double ExperimentConfig::*member) {
  return {key, applies, [=](ExperimentConfig& c, const std::string& v) { c.*member = to_double(key, v); },
          [=](const ExperimentConfig& c) { return fmt_double(c.*member); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  using M = models::ToyTrainConfig;
  using D = decomp::DecompositionConfig;
  static const std::vector<Field> table = {
      {"task", any_task, [](C&, const std::string&) {},  // handled before the table is consulted
       [](const C& c) { return std::string(models::to_string(c.task)); }},
      {"seed", any_task, [](C& c, const std::string& v) { c.seed = to_u64("seed", v); },
       [](const C& c) { return std::to_string(c.seed); }},
      size_field("task.n_in", any_task, &C::n_in),
      size_field("task.hidden", any_task, &C::hidden),
      size_field("task.hidden_layers", is_square, &C::hidden_layers),
      size_field("task.n_out", any_task, &C::n_out),
      double_field("task.sparsity", any_task, &C::sparsity),
      double_field("task.input_lo", any_task, &C::input_lo),
      double_field("task.input_hi", any_task, &C::input_hi),
      double_field("task.mixing_lo", has_mixing, &C::mixing_lo),
      double_field("task.mixing_hi", has_mixing, &C::mixing_hi),
      size_field("task.group_size", is_grouped, &C::group_size),
      size_field("model.n_data", any_task, &C::model_n_data),
      size_field("model.epochs", any_task, &C::model, &M::epochs),
      size_field("model.batch", any_task, &C::model, &M::batch),
      double_field("model.lr", any_task, &C::model, &M::lr),
      double_field("model.weight_decay", any_task, &C::model, &M::weight_decay),
      {"model.init", any_task,
       [](C& c, const std::string& v) {
         try {
           c.model.init = models::parse_init_scheme(v);
         } catch (const InvalidArgument& e) {
           throw ConfigError(std::string("model.init: ") + e.what());
         }
       },
       [](const C& c) { return std::string(models::to_string(c.model.init)); }},
      size_field("l3d.n_data", any_task, &C::l3d, &D::n_data),
      size_field("l3d.n_v", any_task, &C::l3d, &D::n_v),
      size_field("l3d.rank", any_task, &C::l3d, &D::rank),
      double_field("l3d.top_k", any_task, &C::l3d, &D::top_k),
      size_field("l3d.epochs", any_task, &C::l3d, &D::epochs),
      size_field("l3d.batch", any_task, &C::l3d, &D::batch),
      double_field("l3d.lr", any_task, &C::l3d, &D::lr),
      double_field("l3d.lr_decay", any_task, &C::l3d, &D::lr_decay),
      size_field("l3d.lr_decay_period", any_task, &C::l3d, &D::lr_decay_period),
      {"l3d.divergence", any_task,
       [](C& c, const std::string& v) {
         try {
           c.l3d.divergence = models::parse_divergence(v);
         } catch (const InvalidArgument& e) {
           throw ConfigError(std::string("l3d.divergence: ") + e.what());
         }
       },
       [](const C& c) { return std::string(models::to_string(c.l3d.divergence)); }},
      size_field("eval.n_data", any_task, &C::eval_n_data),
      size_field("eval.n_refs", any_task, &C::eval_n_refs),
      size_field("eval.n_probe", any_task, &C::eval_n_probe),
      size_field("eval.top_n", any_task, &C::eval_top_n),
      size_field("intervene.n_inputs", any_task, &C::intervene_n_inputs),
      double_field("intervene.delta_min", any_task, &C::delta_min),
      double_field("intervene.delta_max", any_task, &C::delta_max),
      size_field("intervene.delta_points", any_task, &C::delta_points),
      double_field("intervene.selectivity_delta", any_task, &C::selectivity_delta),
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

struct Assignment {
  std::string key;
  std::string value;
};

Assignment split_assignment(std::string_view line, const std::string& where) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
  Assignment a{trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
  if (a.key.empty() || a.value.empty()) throw ConfigError(where + ": empty key or value");
  return a;
}

TaskKind parse_task(const std::string& value, const std::string& where) {
  try {
    return models::parse_task_kind(value);
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void set_value(ExperimentConfig& config, const Assignment& a, const std::string& where) {
  const Field& f = find_field(a.key);
  if (!f.applies(config.task)) {
    throw ConfigError(where + ": key '" + a.key + "' does not apply to task " +
                      std::string(models::to_string(config.task)));
  }
  try {
    f.set(config, a.value);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> config_keys(models::TaskKind task) {
  std::vector<std::string> keys;
  for (const auto& f : fields()) {
    if (f.applies(task)) keys.push_back(f.key);
  }
  return keys;
}

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (n_in == 0 || n_out == 0 || hidden == 0) fail("task.n_in, task.n_out and task.hidden must be positive");
  if (task == TaskKind::Square && hidden_layers == 0) fail("task.hidden_layers must be positive");
  if (model_n_data == 0) fail("model.n_data must be positive");
  if (model.epochs == 0 || model.batch == 0) fail("model.epochs and model.batch must be positive");
  if (!(model.lr > 0.0)) fail("model.lr must be positive");
  if (!(model.weight_decay >= 0.0)) fail("model.weight_decay must be non-negative");
  if (eval_n_data < 2 || eval_n_refs == 0 || eval_n_probe == 0 || eval_top_n == 0) {
    fail("eval.n_data must be >= 2 and eval.n_refs, eval.n_probe, eval.top_n positive");
  }
  if (intervene_n_inputs == 0) fail("intervene.n_inputs must be positive");
  if (delta_points == 0 || !(delta_min <= delta_max)) fail("intervene delta grid is empty or inverted");
  if (!(selectivity_delta > 0.0)) fail("intervene.selectivity_delta must be positive");
  try {
    task_spec(*this).validate();
    model_spec(*this).validate();
    l3d.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_config(std::string_view text, const std::string& origin) {
  std::vector<std::pair<Assignment, std::string>> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const std::string where = origin + ":" + std::to_string(number);
    lines.emplace_back(split_assignment(line, where), where);
  }

  ExperimentConfig config;
  const auto task_line = std::find_if(lines.begin(), lines.end(), [](const auto& l) { return l.first.key == "task"; });
  if (task_line == lines.end()) throw ConfigError(origin + ": missing required key 'task'");
  config.task = parse_task(task_line->first.value, task_line->second);

  std::set<std::string> seen;
  for (const auto& [a, where] : lines) {
    if (!seen.insert(a.key).second) throw ConfigError(where + ": duplicate key '" + a.key + "'");
    if (a.key != "task") set_value(config, a, where);
  }
  for (const auto& key : config_keys(config.task)) {
    if (!seen.contains(key)) throw ConfigError(origin + ": missing required key '" + key + "'");
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const std::string where = "override '" + std::string(assignment) + "'";
  const Assignment a = split_assignment(assignment, where);
  if (a.key == "task") throw ConfigError(where + ": the task cannot be overridden; use another preset");
  set_value(config, a, where);
  config.validate();
}

std::string canonical_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    if (f.applies(config.task)) out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_text(config)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

models::MlpSpec model_spec(const ExperimentConfig& config) {
  if (config.task == TaskKind::Square) {
    return models::deep_gelu_spec(config.n_in, config.hidden, config.hidden_layers, config.n_out);
  }
  return models::superposition_spec(config.n_in, config.hidden, config.n_out);
}

numkit::Rng stream(const ExperimentConfig& config, Stream s) {
  return numkit::Rng(config.seed).split(static_cast<std::uint64_t>(s));
}

models::ToyTaskSpec task_spec(const ExperimentConfig& config) {
  models::ToyTaskSpec t;
  t.kind = config.task;
  t.n_in = config.n_in;
  t.n_out = config.n_out;
  t.sparsity = config.sparsity;
  t.input_lo = config.input_lo;
  t.input_hi = config.input_hi;
  if (has_mixing(config.task)) {
    if (!(config.mixing_lo < config.mixing_hi)) throw ConfigError("task.mixing_lo must be below task.mixing_hi");
    auto rng = stream(config, Stream::Task);
    t.mixing = numkit::uniform(rng, config.mixing_lo, config.mixing_hi, {config.n_out, config.n_in});
  }
  if (is_grouped(config.task)) t.group_size = config.group_size;
  return t;
}

}  // namespace l3d::cli
