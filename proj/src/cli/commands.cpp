#include "l3d/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <set>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "l3d/analysis/intervention.hpp"
#include "l3d/cli/csv.hpp"
#include "l3d/cli/pipeline.hpp"
#include "l3d/cli/svg.hpp"
#include "l3d/decomp/basis_io.hpp"
#include "l3d/models/checkpoint.hpp"

namespace l3d::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const ConfigError&) {
    return kExitConfig;
  } catch (const NumericalError&) {
    return kExitNumerical;
  } catch (const IoError&) {
    return kExitIo;
  } catch (const fs::filesystem_error&) {
    return kExitIo;
  } catch (...) {
    return kExitFailure;
  }
}

namespace {

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

/// Creates the output directory, writes config.txt, and on finish()
/// writes run_meta_<command>.json with the wall-clock data that must stay
/// out of the deterministic outputs.
class Run {
 public:
  Run(const RunContext& ctx, std::string command)
      : ctx_(ctx), command_(std::move(command)), hash_(config_hash(ctx.config)), started_(utc_now()),
        t0_(std::chrono::steady_clock::now()) {
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw IoError("cannot create output directory " + ctx.out.string() + ": " + ec.message());
    write_text(path("config.txt"), canonical_text(ctx.config));
  }

  const std::string& hash() const { return hash_; }
  fs::path path(const std::string& name) const { return ctx_.out / name; }

  CsvTable table(std::vector<Column> columns) const { return CsvTable(command_, hash_, std::move(columns)); }

  template <typename... Args>
  void log(fmt::format_string<Args...> f, Args&&... args) const {
    if (ctx_.log) *ctx_.log << fmt::format(f, std::forward<Args>(args)...) << '\n';
  }

  void finish(const json& extra = json::object()) const {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    json meta = {{"command", command_},   {"config_hash", hash_}, {"started_utc", started_},
                 {"finished_utc", utc_now()}, {"seconds", seconds}, {"threads", ctx_.threads},
                 {"argv", ctx_.argv}};
    for (const auto& [k, v] : extra.items()) meta[k] = v;
    write_text(path("run_meta_" + command_ + ".json"), meta.dump(2) + "\n");
  }

 private:
  const RunContext& ctx_;
  std::string command_;
  std::string hash_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
};

void require_file(const fs::path& p, const char* produced_by) {
  if (!fs::exists(p)) throw IoError(p.string() + " not found; run '" + produced_by + "' first");
}

models::Dataset load_dataset(const fs::path& p) {
  require_file(p, "gen-data");
  const auto set = models::load_params(p);
  if (!set.contains("inputs") || !set.contains("targets")) throw IoError(p.string() + ": not a dataset file");
  return {set.at("inputs"), set.at("targets")};
}

ParamSet load_model(const RunContext& ctx) {
  const auto p = ctx.out / kModelFile;
  require_file(p, "train-toy");
  auto params = models::load_params(p);
  models::check_params(model_spec(ctx.config), params);
  return params;
}

decomp::SubnetworkBasis load_basis_for(const fs::path& p, const ParamSet& params) {
  require_file(p, "decompose");
  auto basis = decomp::load_basis(p);
  basis.require_compatible(params);
  return basis;
}

std::vector<double> load_p_act(const fs::path& p, std::size_t n_v) {
  require_file(p, "decompose");
  auto values = read_csv(p).numbers("p_act");
  if (values.size() != n_v) {
    throw InvalidArgument(fmt::format("{} lists {} subnetworks, basis has {}", p.string(), values.size(), n_v));
  }
  return values;
}

json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void cmd_gen_data(const RunContext& ctx) {
  Run run(ctx, "gen-data");
  const auto data = generate_dataset(ctx.config);

  ParamSet set;
  set.add("inputs", data.inputs);
  set.add("targets", data.targets);
  models::save_params(run.path(kDatasetFile), set);

  const std::size_t n = data.size();
  const std::size_t n_in = data.inputs.extent(1);
  auto summary = run.table({{"feature", "index"}, {"active_fraction", "fraction"}, {"mean", "input"},
                            {"min", "input"}, {"max", "input"}, {"target_mean", "target"}});
  std::size_t active_total = 0;
  for (std::size_t j = 0; j < n_in; ++j) {
    std::size_t active = 0;
    double sum = 0.0, lo = data.inputs(0, j), hi = data.inputs(0, j), tsum = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double v = data.inputs(s, j);
      active += v != 0.0;
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (j < data.targets.extent(1)) tsum += data.targets(s, j);
    }
    active_total += active;
    summary.cell(j).cell(static_cast<double>(active) / n).cell(sum / n).cell(lo).cell(hi);
    summary.cell(j < data.targets.extent(1) ? tsum / n : 0.0).end_row();
  }
  summary.write(run.path("dataset_summary.csv"));
  run.log("gen-data: {} samples x {} features, {} outputs, active fraction {:.4f}", n, n_in, data.targets.extent(1),
          static_cast<double>(active_total) / static_cast<double>(n * n_in));
  run.finish();
}

void cmd_train_toy(const RunContext& ctx) {
  const auto data = load_dataset(ctx.out / kDatasetFile);
  const auto spec = model_spec(ctx.config);
  if (data.inputs.extent(1) != spec.input_dim() || data.targets.extent(1) != spec.output_dim()) {
    throw InvalidArgument("dataset shape does not match the configured model; rerun gen-data");
  }
  Run run(ctx, "train-toy");
  const std::size_t every = std::max<std::size_t>(1, ctx.config.model.epochs / 10);
  const auto result = train_model(ctx.config, data, [&](std::size_t epoch, double loss) {
    if ((epoch + 1) % every == 0) run.log("train-toy: epoch {} mse {:.6g}", epoch + 1, loss);
  });
  models::save_params(run.path(kModelFile), result.params);

  auto curve = run.table({{"epoch", "index"}, {"mse", "squared_error_per_output"}});
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) curve.cell(e).cell(result.epoch_loss[e]).end_row();
  curve.write(run.path("train_loss.csv"));
  run.log("train-toy: final mse {:.6g}", result.epoch_loss.back());
  run.finish({{"final_mse", result.epoch_loss.back()}});
}

void cmd_decompose(const RunContext& ctx, const DecomposeOptions& options) {
  const auto params = load_model(ctx);
  Run run(ctx, "decompose");

  const bool sweep = !options.ranks.empty() || !options.n_vs.empty();
  const auto ranks = options.ranks.empty() ? std::vector<std::size_t>{ctx.config.l3d.rank} : options.ranks;
  const auto n_vs = options.n_vs.empty() ? std::vector<std::size_t>{ctx.config.l3d.n_v} : options.n_vs;

  auto loss_table = run.table({{"n_v", "count"}, {"rank", "count"}, {"epoch", "index"},
                               {"loss", "relative_l2_error"}, {"lr", "learning_rate"}});
  auto pact_table = run.table({{"n_v", "count"}, {"rank", "count"}, {"subnetwork", "index"}, {"p_act", "fraction"},
                               {"usage", "count"}, {"dead", "bool"}});
  auto sweep_table = run.table({{"n_v", "count"}, {"rank", "count"}, {"final_loss", "relative_l2_error"},
                                {"n_dead", "count"}});

  for (const std::size_t n_v : n_vs) {
    for (const std::size_t rank : ranks) {
      auto config = ctx.config;
      config.l3d.n_v = n_v;
      config.l3d.rank = rank;
      config.validate();
      const std::size_t every = std::max<std::size_t>(1, config.l3d.epochs / 10);
      const auto result = decompose(config, params, ctx.threads, [&](std::size_t epoch, double loss, double) {
        if ((epoch + 1) % every == 0) run.log("decompose n_v={} rank={}: epoch {} loss {:.4f}", n_v, rank, epoch + 1, loss);
      });
      const auto& st = result.stats;
      for (std::size_t e = 0; e < st.epoch_loss.size(); ++e) {
        loss_table.cell(n_v).cell(rank).cell(e).cell(st.epoch_loss[e]).cell(st.epoch_lr[e]).end_row();
      }
      const auto dead = dead_mask(st.p_act);
      for (std::size_t k = 0; k < n_v; ++k) {
        pact_table.cell(n_v).cell(rank).cell(k).cell(st.p_act[k]).cell(st.final_usage[k]).cell(dead[k] ? 1 : 0).end_row();
      }
      const auto n_dead = static_cast<std::size_t>(std::count(dead.begin(), dead.end(), true));
      sweep_table.cell(n_v).cell(rank).cell(st.final_loss()).cell(n_dead).end_row();
      decomp::save_basis(run.path(sweep ? fmt::format("basis_nv{}_rank{}.bin", n_v, rank) : kBasisFile), result.basis);
      run.log("decompose n_v={} rank={}: final loss {:.4f}, dead {}", n_v, rank, st.final_loss(), n_dead);
    }
  }

  if (sweep) {
    loss_table.write(run.path("sweep_loss.csv"));
    pact_table.write(run.path("sweep_p_act.csv"));
    sweep_table.write(run.path("sweep.csv"));
  } else {
    loss_table.write(run.path("decompose_loss.csv"));
    pact_table.write(run.path(kPactFile));
  }
  run.finish({{"sweep", sweep}});
}

void cmd_eval(const RunContext& ctx) {
  const auto& config = ctx.config;
  const auto params = load_model(ctx);
  const auto basis = load_basis_for(ctx.out / kBasisFile, params);
  const auto train_p_act = load_p_act(ctx.out / kPactFile, basis.n_v());
  Run run(ctx, "eval");

  const auto report = evaluate(config, params, basis, train_p_act, ctx.threads);
  const auto& m = report.matching;
  const auto dead = dead_mask(train_p_act);

  // Out-direction weights per subnetwork and tensor.
  auto heat = run.table({{"subnetwork", "index"}, {"tensor", "name"}, {"row", "index"}, {"col", "index"},
                         {"value", "unit_direction"}});
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    for (const auto& [name, t] : basis.out_direction_params(k)) {
      const std::size_t rows = t.extent(0);
      const std::size_t cols = t.rank() > 1 ? t.extent(1) : 1;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) heat.cell(k).cell(name).cell(r).cell(c).cell(t[r * cols + c]).end_row();
      }
    }
  }
  heat.write(run.path("heatmap.csv"));

  auto scores = run.table({{"subnetwork", "index"}, {"group", "index"}, {"impact", "abs_coefficient"},
                           {"normalized", "fraction"}, {"assigned", "bool"}, {"matched", "bool"}});
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    for (std::size_t g = 0; g < m.scores.extent(1); ++g) {
      scores.cell(k).cell(g).cell(m.scores(k, g)).cell(m.normalized(k, g));
      scores.cell(m.assignment.target[k] == g ? 1 : 0).cell(m.matched[k] == g ? 1 : 0).end_row();
    }
  }
  scores.write(run.path("impact_scores.csv"));

  auto pact = run.table({{"subnetwork", "index"}, {"train_p_act", "fraction"}, {"eval_p_act", "fraction"},
                         {"dead", "bool"}});
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    pact.cell(k).cell(train_p_act[k]).cell(report.p_act[k]).cell(dead[k] ? 1 : 0).end_row();
  }
  pact.write(run.path("eval_p_act.csv"));

  auto top = run.table({{"subnetwork", "index"}, {"rank", "index"}, {"sample", "index"}, {"mean_impact", "abs_coefficient"}});
  for (std::size_t k = 0; k < report.top.size(); ++k) {
    for (std::size_t r = 0; r < report.top[k].size(); ++r) {
      const std::size_t s = report.top[k][r];
      top.cell(k).cell(r).cell(s).cell(report.impacts.values(s, k)).end_row();
    }
  }
  top.write(run.path("top_samples.csv"));

  json summary = {{"command", "eval"},
                  {"config_hash", run.hash()},
                  {"task", std::string(models::to_string(config.task))},
                  {"n_v", basis.n_v()},
                  {"eval_loss", report.loss},
                  {"groups", m.scores.extent(1)},
                  {"groups_covered", m.groups_covered()},
                  {"n_matched", m.n_matched()}};
  json dead_list = json::array();
  json assignment = json::array();
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    if (dead[k]) dead_list.push_back(k);
    assignment.push_back({{"subnetwork", k}, {"assigned", optional_index(m.assignment.target[k])},
                          {"matched", optional_index(m.matched[k])}});
  }
  summary["dead"] = dead_list;
  summary["assignment"] = assignment;

  if (!report.alignment.empty()) {
    auto align = run.table({{"view", "name"}, {"subnetwork", "index"}, {"feature", "index"}, {"abs_cosine", "cosine"}});
    json views = json::object();
    for (const auto& a : report.alignment) {
      const std::string view(analysis::to_string(a.view));
      json matched = json::array();
      double lowest = 1.0;
      for (std::size_t k = 0; k < basis.n_v(); ++k) {
        for (std::size_t j = 0; j < a.abs_cosine.extent(1); ++j) {
          align.cell(view).cell(k).cell(j).cell(a.abs_cosine(k, j)).end_row();
        }
        if (m.assignment.target[k]) {
          const double c = a.abs_cosine(k, *m.assignment.target[k]);
          matched.push_back(c);
          lowest = std::min(lowest, c);
        }
      }
      views[view] = {{"matched_abs_cosine", matched}, {"min_matched_abs_cosine", lowest}};
    }
    align.write(run.path("alignment.csv"));
    summary["alignment"] = views;
  }

  if (report.coefficients) {
    const auto& est = *report.coefficients;
    const auto& fit = *report.fit;
    const auto mixing = *task_spec(config).mixing;
    auto coef = run.table({{"subnetwork", "index"}, {"output", "index"}, {"feature", "index"}, {"a_hat", "raw"},
                           {"a_hat_scaled", "mixing"}, {"a_true", "mixing"}, {"used", "bool"}});
    for (std::size_t k = 0; k < basis.n_v(); ++k) {
      for (std::size_t i = 0; i < est.a_hat.extent(0); ++i) {
        coef.cell(k).cell(i).cell(est.feature[k]).cell(est.a_hat(i, k)).cell(fit.scale[k] * est.a_hat(i, k));
        coef.cell(mixing(i, est.feature[k])).cell(fit.used[k] ? 1 : 0).end_row();
      }
    }
    coef.write(run.path("coefficients.csv"));
    summary["coefficient_fit"] = {{"r2", fit.r2}, {"n_points", fit.n_points}, {"scale", fit.scale}};
  }

  write_text(run.path("eval_summary.json"), summary.dump(2) + "\n");
  run.log("eval: loss {:.4f}, {} of {} groups matched, dead [{}]", report.loss, m.groups_covered(), m.scores.extent(1),
          fmt::join(dead_list.get<std::vector<std::size_t>>(), " "));
  if (report.fit) run.log("eval: coefficient r2 {:.4f} over {} points", report.fit->r2, report.fit->n_points);
  for (const auto& a : report.alignment) {
    run.log("eval: {} view, min matched |cos| {:.4f}", analysis::to_string(a.view),
            summary["alignment"][std::string(analysis::to_string(a.view))]["min_matched_abs_cosine"].get<double>());
  }
  run.finish();
}

void cmd_intervene(const RunContext& ctx, const InterveneOptions& options) {
  const auto& config = ctx.config;
  const auto spec = model_spec(config);
  const auto params = load_model(ctx);
  const auto basis = load_basis_for(ctx.out / kBasisFile, params);

  auto subnetworks = options.subnetworks;
  if (subnetworks.empty()) {
    for (std::size_t k = 0; k < basis.n_v(); ++k) subnetworks.push_back(k);
  }
  auto check = [&](std::size_t k) {
    if (k >= basis.n_v()) throw ConfigError(fmt::format("unknown subnetwork {}; the basis has {}", k, basis.n_v()));
  };
  for (auto k : subnetworks) check(k);
  if (options.pair) {
    check(options.pair->first);
    check(options.pair->second);
  }

  Run run(ctx, "intervene");
  const auto x = intervention_inputs(config);
  const auto deltas = analysis::delta_grid(config.delta_min, config.delta_max, config.delta_points);

  auto table = run.table({{"subnetwork", "index"}, {"delta", "parameter_norm"}, {"output", "index"},
                          {"mean_abs_change", "output"}});
  const auto sweeps = analysis::intervention_sweep(spec, params, basis, subnetworks, deltas, x, ctx.threads);
  for (const auto& sw : sweeps) {
    const auto mean = sw.mean_abs_change();
    for (std::size_t d = 0; d < deltas.size(); ++d) {
      for (std::size_t o = 0; o < mean.extent(1); ++o) table.cell(sw.subnetwork).cell(deltas[d]).cell(o).cell(mean(d, o)).end_row();
    }
  }
  table.write(run.path("intervention.csv"));
  run.log("intervene: {} subnetworks x {} deltas on {} inputs", subnetworks.size(), deltas.size(), x.extent(0));

  if (options.pair) {
    const auto [a, b] = *options.pair;
    const auto grid = analysis::pair_sweep(spec, params, basis, a, b, deltas, deltas, x, ctx.threads).mean_abs_change();
    auto pair = run.table({{"first", "index"}, {"second", "index"}, {"delta_first", "parameter_norm"},
                           {"delta_second", "parameter_norm"}, {"output", "index"}, {"mean_abs_change", "output"}});
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      for (std::size_t j = 0; j < deltas.size(); ++j) {
        for (std::size_t o = 0; o < grid.extent(2); ++o) {
          pair.cell(a).cell(b).cell(deltas[i]).cell(deltas[j]).cell(o);
          pair.cell(grid[(i * deltas.size() + j) * grid.extent(2) + o]).end_row();
        }
      }
    }
    pair.write(run.path("pair_grid.csv"));
    run.log("intervene: pair grid for subnetworks {} and {}", a, b);
  }

  // Selectivity needs feature i to drive output i.
  if (config.task == models::TaskKind::Tms || config.task == models::TaskKind::Square) {
    const auto p_act = load_p_act(ctx.out / kPactFile, basis.n_v());
    const auto matching = match_features(config, params, basis, p_act, ctx.threads);
    auto sel = run.table({{"subnetwork", "index"}, {"output", "index"}, {"delta", "parameter_norm"},
                          {"ratio", "matched_over_other_mean"}});
    double lowest = INFINITY;
    for (const auto& r : selectivity(config, params, basis, matching, x, ctx.threads)) {
      sel.cell(r.subnetwork).cell(r.output).cell(r.delta).cell(r.ratio).end_row();
      lowest = std::min(lowest, r.ratio);
    }
    sel.write(run.path("selectivity.csv"));
    run.log("intervene: {} matched subnetworks, lowest selectivity ratio {:.3f} at |delta| {}", matching.n_matched(),
            lowest, config.selectivity_delta);
  }
  run.finish();
}

void cmd_report(const RunContext& ctx) {
  Run run(ctx, "report");
  json summary = {{"config_hash", run.hash()}, {"task", std::string(models::to_string(ctx.config.task))}};
  std::size_t found = 0;

  if (const auto p = run.path("train_loss.csv"); fs::exists(p)) {
    const auto csv = read_csv(p);
    const auto loss = csv.numbers("mse");
    summary["train_toy"] = {{"epochs", loss.size()}, {"final_mse", loss.empty() ? 0.0 : loss.back()},
                            {"config_hash", csv.config_hash}};
    write_text(run.path("train_loss.svg"),
               line_plot_svg("toy model training", "epoch", "mse", {{"mse", csv.numbers("epoch"), loss}}, true));
    ++found;
  }
  if (const auto p = run.path("decompose_loss.csv"); fs::exists(p)) {
    const auto csv = read_csv(p);
    const auto loss = csv.numbers("loss");
    summary["decompose"] = {{"epochs", loss.size()}, {"final_loss", loss.empty() ? 0.0 : loss.back()},
                            {"config_hash", csv.config_hash}};
    write_text(run.path("loss_curve.svg"), line_plot_svg("L3D reconstruction loss", "epoch", "loss",
                                                         {{"loss", csv.numbers("epoch"), loss}}, false));
    ++found;
  }
  if (const auto p = run.path(kPactFile); fs::exists(p)) {
    const auto csv = read_csv(p);
    summary["p_act"] = csv.numbers("p_act");
    ++found;
  }
  if (const auto p = run.path("sweep.csv"); fs::exists(p)) {
    const auto csv = read_csv(p);
    const auto nv = csv.numbers("n_v");
    const auto rank = csv.numbers("rank");
    const auto loss = csv.numbers("final_loss");
    json rows = json::array();
    for (std::size_t i = 0; i < loss.size(); ++i) {
      rows.push_back({{"n_v", static_cast<std::size_t>(nv[i])}, {"rank", static_cast<std::size_t>(rank[i])},
                      {"final_loss", loss[i]}});
    }
    summary["sweep"] = rows;
    // One line per n_v, loss against rank; with a single rank, loss against n_v.
    std::vector<Series> series;
    const bool by_rank = std::set<double>(rank.begin(), rank.end()).size() > 1;
    for (std::size_t i = 0; i < loss.size(); ++i) {
      const std::string label = by_rank ? fmt::format("n_v={}", nv[i]) : fmt::format("rank={}", rank[i]);
      auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) { return s.label == label; });
      if (it == series.end()) it = series.insert(series.end(), Series{label, {}, {}});
      it->x.push_back(by_rank ? rank[i] : nv[i]);
      it->y.push_back(loss[i]);
    }
    write_text(run.path("sweep.svg"), line_plot_svg("final loss", by_rank ? "rank" : "n_v", "loss", series, false));
    ++found;
  }
  if (const auto p = run.path("eval_summary.json"); fs::exists(p)) {
    summary["eval"] = json::parse(read_text(p));
    ++found;
  }
  if (const auto p = run.path("selectivity.csv"); fs::exists(p)) {
    const auto ratios = read_csv(p).numbers("ratio");
    summary["selectivity"] = {{"rows", ratios.size()},
                              {"min_ratio", ratios.empty() ? 0.0 : *std::min_element(ratios.begin(), ratios.end())}};
    ++found;
  }
  if (found == 0) throw IoError("report: no outputs found in " + ctx.out.string());
  write_text(run.path("summary.json"), summary.dump(2) + "\n");
  run.log("report: summarized {} outputs into summary.json", found);
  run.finish();
}

}  // namespace l3d::cli
