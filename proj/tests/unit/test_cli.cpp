#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sys/wait.h>

#include "helpers.hpp"
#include "l3d/cli/commands.hpp"
#include "l3d/cli/config.hpp"
#include "l3d/cli/csv.hpp"
#include "l3d/cli/pipeline.hpp"
#include "l3d/decomp/basis_io.hpp"
#include "l3d/models/checkpoint.hpp"

using namespace l3d;
using namespace l3d::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kPresets = L3D_PRESET_DIR;
const fs::path kBinary = L3D_CLI_BINARY;

ExperimentConfig preset(const std::string& name) { return load_config(kPresets / (name + ".cfg")); }

// Small enough to run the whole pipeline in well under a second.
ExperimentConfig tiny(const std::string& name) {
  auto c = preset(name);
  for (const char* o : {"model.n_data=400", "model.epochs=5", "l3d.n_data=96", "l3d.epochs=3", "eval.n_data=40",
                        "eval.n_probe=8", "eval.n_refs=3", "intervene.n_inputs=30", "intervene.delta_points=5"}) {
    apply_override(c, o);
  }
  return c;
}

void run_all(const ExperimentConfig& config, const fs::path& out, std::size_t threads) {
  RunContext ctx;
  ctx.config = config;
  ctx.out = out;
  ctx.threads = threads;
  cmd_gen_data(ctx);
  cmd_train_toy(ctx);
  cmd_decompose(ctx);
  cmd_eval(ctx);
  InterveneOptions io;
  io.pair = std::make_pair(std::size_t{0}, std::size_t{1});
  cmd_intervene(ctx, io);
  cmd_report(ctx);
}

// Every output file except the run metadata, by name.
std::map<std::string, std::string> payloads(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("run_meta_")) continue;
    out[name] = read_text(e.path());
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = kBinary.string() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("every preset parses and carries the documented values") {
  const auto tms = preset("tms");
  CHECK(tms.task == models::TaskKind::Tms);
  CHECK(tms.n_in == 5);
  CHECK(tms.hidden == 2);
  CHECK(tms.sparsity == 0.05);
  CHECK(tms.model_n_data == 10000);
  CHECK(tms.model.batch == 32);
  CHECK(tms.l3d.n_v == 5);
  CHECK(tms.l3d.rank == 1);
  CHECK(tms.l3d.top_k == 0.1);
  CHECK(tms.l3d.epochs == 1000);
  CHECK(tms.l3d.lr == 0.01);
  CHECK(tms.l3d.lr_decay == 0.8);
  CHECK(tms.l3d.n_data == 1000);
  CHECK(tms.intervene_n_inputs == 1000);
  CHECK(tms.delta_points == 21);

  const auto tmcs = preset("tmcs");
  CHECK(tmcs.l3d.n_v == 10);
  CHECK(tmcs.hidden == 5);
  CHECK(task_spec(tmcs).mixing->shape() == numkit::Shape{10, 10});

  const auto hr = preset("highrank");
  CHECK(hr.l3d.n_v == 8);
  CHECK(hr.group_size == 5);
  CHECK(task_spec(hr).mixing->shape() == numkit::Shape{10, 30});

  const auto sq = preset("square");
  CHECK(sq.input_lo == -1.0);
  CHECK(sq.l3d.rank == 2);
  CHECK(model_spec(sq).layer_dims == std::vector<std::size_t>{5, 10, 10, 10, 10, 5});
}

TEST_CASE("config parser rejects missing, unknown, duplicate and inapplicable keys") {
  const auto text = canonical_text(preset("tms"));
  CHECK_NOTHROW(parse_config(text));

  std::string missing = text;
  missing.erase(missing.find("l3d.rank"), missing.find('\n', missing.find("l3d.rank")) - missing.find("l3d.rank") + 1);
  CHECK_THROWS_AS(parse_config(missing), ConfigError);
  CHECK_THROWS_AS(parse_config(text + "l3d.colour = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(text + "l3d.rank = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(text + "task.group_size = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(text + "justtext\n"), ConfigError);

  auto bad_number = text;
  bad_number.replace(bad_number.find("l3d.lr = 0.01"), 13, "l3d.lr = 0.01x");
  CHECK_THROWS_AS(parse_config(bad_number), ConfigError);
  auto bad_value = text;
  bad_value.replace(bad_value.find("l3d.top_k = 0.10000000000000001"), 31, "l3d.top_k = 2");
  CHECK_THROWS_AS(parse_config(bad_value), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/x.cfg"), ConfigError);

  // Comments and blank lines are ignored.
  CHECK(config_hash(parse_config("# header\n\n" + text + "   # trailing\n")) == config_hash(preset("tms")));
}

TEST_CASE("canonical text round-trips at full precision") {
  for (const char* name : {"tms", "tmcs", "highrank", "square"}) {
    auto c = preset(name);
    apply_override(c, "l3d.lr=0.1234567890123456789");
    const auto again = parse_config(canonical_text(c));
    CHECK(canonical_text(again) == canonical_text(c));
    CHECK(again.l3d.lr == c.l3d.lr);
    CHECK(config_hash(again) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
  }
  CHECK(config_keys(models::TaskKind::Tms).size() + 1 == config_keys(models::TaskKind::Square).size());
}

TEST_CASE("overrides change the hash and are validated") {
  auto c = preset("tms");
  const auto h = config_hash(c);
  apply_override(c, "model.epochs=7");
  CHECK(c.model.epochs == 7);
  CHECK(config_hash(c) != h);
  apply_override(c, "l3d.divergence=kl");
  CHECK(c.l3d.divergence == models::Divergence::Kl);
  CHECK_THROWS_AS(apply_override(c, "model.init=xavier"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "task=square"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "l3d.batch=0"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "noequals"), ConfigError);
}

TEST_CASE("streams are fixed by the seed") {
  auto c = preset("tmcs");
  const auto a = *task_spec(c).mixing;
  CHECK(*task_spec(c).mixing == a);
  c.seed = 2;
  CHECK_FALSE(*task_spec(c).mixing == a);
  CHECK(stream(c, Stream::Eval).next_u64() == numkit::Rng(2).split(6).next_u64());
}

TEST_CASE("csv layout, precision and reading back") {
  test::TempDir dir("csv");
  CsvTable t("demo", "00ff", {{"epoch", "index"}, {"loss", "ratio"}, {"name", "label"}});
  t.cell(std::size_t{0}).cell(0.1).cell("a").end_row();
  t.cell(std::size_t{1}).cell(1.0 / 3.0).cell("b").end_row();
  CHECK_THROWS_AS(t.cell(1.0).end_row(), InvalidArgument);
  CHECK_THROWS_AS(CsvTable("x", "y", {{"a", "b"}}).cell("has,comma"), InvalidArgument);
  t.write(dir / "t.csv");

  const auto text = read_text(dir / "t.csv");
  CHECK(text ==
        "# l3d demo config_hash=00ff units: epoch=index loss=ratio name=label\n"
        "epoch,loss,name\n"
        "0,0.10000000000000001,a\n"
        "1,0.33333333333333331,b\n");
  CHECK(text.find('\r') == std::string::npos);

  const auto back = read_csv(dir / "t.csv");
  CHECK(back.command == "demo");
  CHECK(back.config_hash == "00ff");
  CHECK(back.numbers("loss")[1] == 1.0 / 3.0);
  CHECK(back.strings("name") == std::vector<std::string>{"a", "b"});
  CHECK_THROWS_AS(back.numbers("missing"), InvalidArgument);
  CHECK_THROWS_AS(back.numbers("name"), IoError);

  write_text(dir / "bad.csv", "epoch,loss\n1,2\n");
  CHECK_THROWS_AS(read_csv(dir / "bad.csv"), IoError);
  CHECK_THROWS_AS(read_csv(dir / "none.csv"), IoError);
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("a full pipeline run is byte-identical on rerun and across thread counts") {
  for (const char* name : {"tms", "highrank", "square"}) {
    CAPTURE(name);
    test::TempDir a(std::string("det_a_") + name), b(std::string("det_b_") + name);
    const auto config = tiny(name);
    run_all(config, a.path(), 1);
    run_all(config, b.path(), 3);
    const auto pa = payloads(a.path()), pb = payloads(b.path());
    CHECK(pa.size() >= 15);
    for (const auto& [file, bytes] : pa) {
      CAPTURE(file);
      REQUIRE(pb.count(file) == 1);
      CHECK(pb.at(file) == bytes);
    }
    CHECK(fs::exists(a / "run_meta_eval.json"));

    // Every CSV names the generating config.
    for (const auto& [file, bytes] : pa) {
      if (file.ends_with(".csv")) CHECK(read_csv(a / file).config_hash.size() == 16);
    }
  }
}

TEST_CASE("pipeline outputs carry the expected content") {
  test::TempDir dir("content");
  const auto config = tiny("tms");
  run_all(config, dir.path(), 1);

  const auto ds = models::load_params(dir / kDatasetFile);
  CHECK(ds.at("inputs").shape() == numkit::Shape{400, 5});
  CHECK(read_csv(dir / "train_loss.csv").numbers("mse").size() == 5);
  CHECK(read_csv(dir / "decompose_loss.csv").numbers("loss").size() == 3);
  CHECK(decomp::load_basis(dir / kBasisFile).n_v() == 5);

  // Delta 0 sits at the centre of the grid and changes nothing.
  const auto inter = read_csv(dir / "intervention.csv");
  const auto deltas = inter.numbers("delta"), change = inter.numbers("mean_abs_change");
  std::size_t zero_rows = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (deltas[i] == 0.0) {
      ++zero_rows;
      CHECK(change[i] == 0.0);
    }
  }
  CHECK(zero_rows == 5 * 5);
  CHECK(read_csv(dir / "pair_grid.csv").rows.size() == 5 * 5 * 5);
  CHECK(read_csv(dir / "alignment.csv").rows.size() == 3 * 5 * 5);
  CHECK(read_csv(dir / "impact_scores.csv").rows.size() == 5 * 5);
  CHECK(fs::exists(dir / "loss_curve.svg"));
  CHECK(read_text(dir / "summary.json").find("\"decompose\"") != std::string::npos);
}

TEST_CASE("decompose sweep writes one basis per combination") {
  test::TempDir dir("sweep");
  RunContext ctx;
  ctx.config = tiny("square");
  ctx.out = dir.path();
  cmd_gen_data(ctx);
  cmd_train_toy(ctx);
  cmd_decompose(ctx, {{1, 2}, {3, 4}});
  const auto sweep = read_csv(dir / "sweep.csv");
  CHECK(sweep.numbers("n_v") == std::vector<double>{3, 3, 4, 4});
  CHECK(sweep.numbers("rank") == std::vector<double>{1, 2, 1, 2});
  CHECK(fs::exists(dir / "basis_nv4_rank2.bin"));
  CHECK_FALSE(fs::exists(dir / kBasisFile));
  cmd_report(ctx);
  CHECK(fs::exists(dir / "sweep.svg"));
}

TEST_CASE("eval reports coefficients for a mixing task") {
  test::TempDir dir("tmcs");
  RunContext ctx;
  ctx.config = tiny("tmcs");
  ctx.out = dir.path();
  cmd_gen_data(ctx);
  cmd_train_toy(ctx);
  cmd_decompose(ctx);
  cmd_eval(ctx);
  const auto summary = read_text(dir / "eval_summary.json");
  CHECK(summary.find("\"r2\"") != std::string::npos);
  CHECK(read_csv(dir / "coefficients.csv").rows.size() == 10 * 10);
}

TEST_CASE("commands fail cleanly on missing inputs and bad arguments") {
  test::TempDir dir("errors");
  RunContext ctx;
  ctx.config = tiny("tms");
  ctx.out = dir.path();
  CHECK_THROWS_AS(cmd_train_toy(ctx), IoError);
  CHECK_THROWS_AS(cmd_eval(ctx), IoError);
  CHECK_THROWS_AS(cmd_report(ctx), IoError);
  cmd_gen_data(ctx);
  cmd_train_toy(ctx);
  cmd_decompose(ctx);
  InterveneOptions io;
  io.subnetworks = {7};
  CHECK_THROWS_AS(cmd_intervene(ctx, io), ConfigError);

  // A model trained for a different task does not match the basis layout.
  auto other = ctx;
  other.config = tiny("square");
  CHECK_THROWS_AS(cmd_eval(other), InvalidArgument);
}

TEST_CASE("exit codes of the command-line tool") {
  test::TempDir dir("exit");
  const std::string cfg = "--config " + (kPresets / "tms.cfg").string();
  const std::string out = " --out " + dir.path().string();
  const std::string quick = " --set model.n_data=200 --set model.epochs=2 --set l3d.epochs=1 --set l3d.n_data=64";

  CHECK(run_cli(cfg + out + quick + " gen-data") == kExitOk);
  CHECK(run_cli(cfg + out + quick + " train-toy") == kExitOk);
  CHECK(run_cli("--config /nonexistent.cfg gen-data") == kExitConfig);
  CHECK(run_cli(cfg + " --set l3d.top_k=0 gen-data") == kExitConfig);
  CHECK(run_cli(cfg + out + " frobnicate") == kExitConfig);
  CHECK(run_cli(cfg + out + " --threads 0 gen-data") == kExitConfig);
  CHECK(run_cli(cfg + " --out " + (dir / "empty").string() + " eval") == kExitIo);
  CHECK(run_cli(cfg + " --out /proc/l3d_no_such_dir gen-data") == kExitIo);
  // Learning rate large enough to overflow the loss.
  CHECK(run_cli(cfg + out + quick + " --set model.lr=1e200 train-toy") == kExitNumerical);
  const int env_status = std::system(("L3D_THREADS=abc " + kBinary.string() + " " + cfg + out + " gen-data >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(env_status) == kExitConfig);
  CHECK(run_cli("--help") == kExitOk);
}
