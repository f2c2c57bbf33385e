#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "commands.hpp"
#include "config.hpp"
#include "groundal/error.hpp"

using namespace groundal;
using namespace groundal::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("groundal_cli_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "exp.ini";
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

const char* kSmall =
    "# small grid\n"
    "[synth]\n"
    "n_objects = 60\n"
    "seed = 3\n"
    "[experiment]\n"
    "strategies = random, gmm_pool\n"
    "traits = color\n"
    "batch_size = 8\n"
    "runs = 3\n"
    "seed = 11\n"
    "[gmm]\n"
    "components = 3\n"
    "[output]\n"
    "dir = out\n";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config defaults and overrides") {
  const ExperimentConfig d = parse_config("");
  CHECK(d.runs == 10);
  CHECK(d.batch_size == 5);
  CHECK(d.components == 15);
  CHECK(d.strategies == std::vector<SamplerKind>{SamplerKind::Random, SamplerKind::GmmPoolMaxDensity});
  CHECK_FALSE(d.dataset_path);

  const ExperimentConfig c = parse_config(kSmall, "/base");
  CHECK(c.synth.n_objects == 60);
  CHECK(c.synth.seed == 3);
  CHECK(c.runs == 3);
  CHECK(c.seed == 11);
  CHECK(c.components == 3);
  CHECK(c.output_dir == "/base/out");
  CHECK(c.source_text == kSmall);
  CHECK(c.values.at("experiment").at("batch_size") == "8");

  const ExperimentConfig e = parse_config(
      "[data]\npath = d.tsv\nlexicons = /abs/l.txt\n[experiment]\nclassifier = mlp\ntraits = shape, object\n"
      "[gmm]\ncv = true\ngrid = 2, 4\ncovariance = full\n[dpp]\nh = 25\ncv = yes\ngrid = 1, 2.5\n",
      "/b");
  CHECK(*e.dataset_path == "/b/d.tsv");
  CHECK(*e.lexicon_path == "/abs/l.txt");
  CHECK(e.classifier == ClassifierKind::Mlp);
  CHECK(e.traits == std::vector<TraitKind>{TraitKind::Shape, TraitKind::ObjectType});
  CHECK(e.components_cv);
  CHECK(e.component_grid == std::vector<std::size_t>{2, 4});
  CHECK(e.covariance == CovarianceType::Full);
  CHECK(e.bandwidth == 25.0);
  CHECK(e.bandwidth_grid == std::vector<double>{1.0, 2.5});
}

TEST_CASE("config errors name the section and key") {
  CHECK(error_of("[synth]\nmention_rate_color = 1.5\n").find("mention_rate_color") != std::string::npos);
  CHECK(error_of("[experiment]\nbatch_size = 0\n").find("[experiment] batch_size") != std::string::npos);
  CHECK(error_of("[experiment]\nbatch_size = five\n").find("batch_size") != std::string::npos);
  CHECK(error_of("[experiment]\nstrategies = random, nope\n").find("nope") != std::string::npos);
  CHECK(error_of("[experiment]\nstrategies = dpp, dpp\n").find("twice") != std::string::npos);
  CHECK(error_of("[experiment]\ntraits = smell\n").find("smell") != std::string::npos);
  CHECK(error_of("[experiment]\nwat = 1\n").find("unknown key") != std::string::npos);
  CHECK(error_of("[nope]\na = 1\n").find("unknown section") != std::string::npos);
  CHECK(error_of("[data]\npath = x.tsv\n").find("lexicons") != std::string::npos);
  CHECK(error_of("[gmm]\ngrid = 2, 0\n").find("[gmm] grid") != std::string::npos);
  CHECK(error_of("[gmm]\ncovariance = spherical\n").find("covariance") != std::string::npos);
  CHECK(error_of("[dpp]\nh = -1\n").find("[dpp] h") != std::string::npos);
  CHECK(error_of("[experiment]\ntest_fraction = 1\n").find("test_fraction") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/exp.ini"), ValidationError);
}

TEST_CASE("generate writes three files into a fresh directory") {
  TempDir tmp("gen");
  const fs::path cfg = write_config(tmp.path, kSmall);
  CommandOptions opts;
  opts.out = (tmp.path / "nested" / "data").string();
  std::ostringstream out, err;
  REQUIRE(cmd_generate(cfg.string(), opts, out, err) == kExitOk);
  for (const char* f : {"dataset.tsv", "lexicons.txt", "truth.jsonl"}) CHECK(fs::exists(fs::path(*opts.out) / f));
  const Dataset d = load_dataset((fs::path(*opts.out) / "dataset.tsv").string());
  CHECK(d.size() == 60);
  CHECK(err.str().empty());

  std::ostringstream out2, err2;
  const fs::path bad = write_config(tmp.path, "[synth]\nmention_rate_shape = 1.5\n");
  CHECK(cmd_generate(bad.string(), opts, out2, err2) == kExitValidation);
  CHECK(err2.str().find("mention_rate_shape") != std::string::npos);
}

TEST_CASE("run writes one curve per cell plus the table and manifest") {
  TempDir tmp("run");
  const fs::path cfg = write_config(tmp.path, kSmall);
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg.string(), {}, out, err) == kExitOk);
  const fs::path dir = tmp.path / "out";
  std::size_t curves = 0;
  for (const auto& e : fs::directory_iterator(dir / "curves")) curves += e.path().extension() == ".csv" ? 1 : 0;
  CHECK(curves == 6);
  CHECK(fs::exists(dir / "curves" / "gmm_pool_color_run002.csv"));
  const std::string table = slurp(dir / "auc_table.csv");
  CHECK(table.rfind("strategy,color\nrandom,", 0) == 0);
  CHECK(table.find("\ngmm_pool,") != std::string::npos);

  const nlohmann::json m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m.at("config_text") == kSmall);
  CHECK(m.at("runs").size() == 6);
  CHECK(m.at("runs")[1].at("seed") == 12);
  CHECK(m.at("files").size() == 7);
  for (const auto& f : m.at("files")) {
    CHECK(sha256_hex((dir / f.at("path").get<std::string>()).string()) == f.at("sha256"));
  }
}

TEST_CASE("reruns reproduce every result byte") {
  TempDir tmp("det");
  const fs::path cfg = write_config(tmp.path, kSmall);
  CommandOptions a, b;
  a.out = (tmp.path / "a").string();
  b.out = (tmp.path / "b").string();
  b.jobs = 3;
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg.string(), a, out, err) == kExitOk);
  REQUIRE(cmd_run(cfg.string(), b, out, err) == kExitOk);
  CHECK(slurp(tmp.path / "a" / "auc_table.csv") == slurp(tmp.path / "b" / "auc_table.csv"));
  for (const auto& e : fs::directory_iterator(tmp.path / "a" / "curves")) {
    CHECK(slurp(e.path()) == slurp(tmp.path / "b" / "curves" / e.path().filename()));
  }
  auto stable = [](const fs::path& p) {
    nlohmann::json m = nlohmann::json::parse(slurp(p));
    m.erase("wall_clock_seconds");
    m.erase("jobs");
    return m;
  };
  CHECK(stable(tmp.path / "a" / "manifest.json") == stable(tmp.path / "b" / "manifest.json"));

  CommandOptions c = a;
  c.out = (tmp.path / "c").string();
  c.seed = 99;
  REQUIRE(cmd_run(cfg.string(), c, out, err) == kExitOk);
  CHECK(slurp(tmp.path / "a" / "auc_table.csv") != slurp(tmp.path / "c" / "auc_table.csv"));
}

TEST_CASE("report summarizes a results directory") {
  TempDir tmp("report");
  const fs::path cfg = write_config(tmp.path, kSmall);
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg.string(), {}, out, err) == kExitOk);
  const fs::path dir = tmp.path / "out";
  std::ostringstream rout, rerr;
  REQUIRE(cmd_report(dir.string(), {}, rout, rerr) == kExitOk);
  CHECK(rout.str().find("random") != std::string::npos);
  CHECK(rout.str().find("(n=3)") != std::string::npos);

  const std::string curve = slurp(dir / "curves" / "random_color_run000.csv");
  const std::string mean = slurp(dir / "mean_curve_random_color.csv");
  CHECK(std::count(mean.begin(), mean.end(), '\n') == std::count(curve.begin(), curve.end(), '\n'));
  CHECK(mean.rfind("n_labeled,macro_f1\n", 0) == 0);

  TempDir empty("empty");
  std::ostringstream eout, eerr;
  CHECK(cmd_report(empty.path.string(), {}, eout, eerr) == kExitValidation);
  CHECK(eerr.str().find("no manifest") != std::string::npos);

  std::ofstream(empty.path / "manifest.json") << "{ not json";
  std::ostringstream cout2, cerr2;
  CHECK(cmd_report(empty.path.string(), {}, cout2, cerr2) == kExitRuntime);
  CHECK(cerr2.str().find("corrupt manifest") != std::string::npos);
}

TEST_CASE("budget beyond the pool is a validation error") {
  TempDir tmp("budget");
  const fs::path big = write_config(tmp.path,
                                    "[synth]\nn_objects = 20\n[experiment]\ntraits = color\nbudget = 500\nruns = 1\n"
                                    "[output]\ndir = out\n");
  std::ostringstream out, err;
  CHECK(cmd_run(big.string(), {}, out, err) == kExitValidation);
  CHECK(err.str().find("budget") != std::string::npos);
  CHECK_FALSE(fs::exists(tmp.path / "out"));
}

TEST_CASE("command line front end") {
  TempDir tmp("main");
  const fs::path cfg = write_config(tmp.path, kSmall);
  const std::string out_dir = (tmp.path / "gen").string();
  std::vector<std::string> args{"groundal", "--out", out_dir, "generate", cfg.string()};
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == kExitOk);
  CHECK(fs::exists(fs::path(out_dir) / "truth.jsonl"));

  std::vector<std::string> bad{"groundal", "explode"};
  std::vector<char*> bargv;
  for (std::string& a : bad) bargv.push_back(a.data());
  CHECK(run_cli(static_cast<int>(bargv.size()), bargv.data()) == kExitValidation);
}
