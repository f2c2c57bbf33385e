#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "config.hpp"
#include "groundal/error.hpp"
#include "groundal/evaluation.hpp"
#include "groundal/gmm.hpp"
#include "groundal/log.hpp"
#include "groundal/stats.hpp"
#include "groundal/synth.hpp"
#include "groundal/version.hpp"

namespace groundal::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kManifest = "manifest.json";
constexpr const char* kAucTable = "auc_table.csv";

std::string trait_key(TraitKind t) { return std::string(trait_name(t)); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw DataError("write failed for '" + path.string() + "'");
}

std::string curve_file(const std::string& strategy, TraitKind trait, std::size_t run) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "curves/%s_%s_run%03zu.csv", strategy.c_str(), trait_key(trait).c_str(), run);
  return buf;
}

std::vector<CurvePoint> read_curve_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read curve file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "n_labeled,macro_f1") {
    throw DataError("curve file '" + path.string() + "' lacks the n_labeled,macro_f1 header");
  }
  std::vector<CurvePoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("malformed row in '" + path.string() + "'");
    CurvePoint p;
    p.n_labeled = std::stoull(line.substr(0, comma));
    p.macro_f1 = std::stod(line.substr(comma + 1));
    points.push_back(p);
  }
  return points;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

struct Job {
  SamplerKind kind;
  TraitKind trait;
  std::size_t run;
  std::uint64_t seed;
  std::size_t task;
  SamplerParams params;
};

struct JobResult {
  bool ok = false;
  std::string error;
  LearningCurve curve;
};

SamplerParams base_params(const ExperimentConfig& cfg) {
  SamplerParams p;
  p.components = cfg.components;
  p.bandwidth = cfg.bandwidth;
  p.language_weight = cfg.language_weight;
  p.gmm.covariance = cfg.covariance;
  return p;
}

}  // namespace

std::string sha256_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

int cmd_generate(const std::string& config_path, const CommandOptions& options, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_config(config_path);
    if (options.seed) cfg.synth.seed = *options.seed;
    const fs::path dir = options.out ? fs::path(*options.out) : fs::path(cfg.output_dir);
    const SynthOutput data = generate(cfg.synth);
    fs::create_directories(dir);
    write_dataset(data.dataset, (dir / "dataset.tsv").string());
    {
      std::ofstream lex(dir / "lexicons.txt", std::ios::binary);
      if (!lex) throw DataError("cannot write lexicons in '" + dir.string() + "'");
      write_lexicons(data.lexicons, lex);
    }
    {
      std::ofstream truth(dir / "truth.jsonl", std::ios::binary);
      if (!truth) throw DataError("cannot write ground truth in '" + dir.string() + "'");
      write_truth_jsonl(data.truth, truth);
    }
    out << "wrote " << data.dataset.size() << " instances to " << (dir / "dataset.tsv").string() << '\n'
        << "wrote " << (dir / "lexicons.txt").string() << '\n'
        << "wrote " << (dir / "truth.jsonl").string() << '\n';
    return kExitOk;
  });
}

int cmd_run(const std::string& config_path, const CommandOptions& options, std::ostream& out,
            std::ostream& err) {
  return guarded(err, [&] {
    const auto started = std::chrono::steady_clock::now();
    ExperimentConfig cfg = load_config(config_path);
    if (options.seed) cfg.seed = *options.seed;
    if (options.out) cfg.output_dir = *options.out;
    const unsigned jobs = std::max(1u, options.jobs.value_or(1u));

    Dataset dataset;
    Lexicons lexicons;
    if (cfg.dataset_path) {
      dataset = load_dataset(*cfg.dataset_path);
      lexicons = load_lexicons(*cfg.lexicon_path);
    } else {
      SynthOutput data = generate(cfg.synth);
      dataset = std::move(data.dataset);
      lexicons = std::move(data.lexicons);
    }
    for (TraitKind t : cfg.traits) {
      if (!dataset.dims.count(t)) throw ValidationError("dataset has no " + trait_key(t) + " features");
    }
    dataset = split_train_test(dataset, cfg.test_fraction, cfg.seed);

    const bool needs_embeddings =
        std::find(cfg.strategies.begin(), cfg.strategies.end(), SamplerKind::VlGmm) != cfg.strategies.end();
    TaskOptions task_options;
    task_options.embeddings = needs_embeddings;
    task_options.embedding_dim = cfg.embedding_dim;
    task_options.embedding_seed = cfg.seed;

    ExperimentOptions exp;
    exp.classifier = cfg.classifier;
    exp.classifier_params = cfg.classifier_params;
    exp.budget = cfg.budget;
    exp.batch_size = cfg.batch_size;
    exp.f1_threshold = cfg.f1_threshold;

    std::vector<TraitTask> tasks;
    json selected = json::object();
    std::vector<Job> grid;
    for (TraitKind t : cfg.traits) {
      tasks.push_back(prepare_task(dataset, lexicons, t, task_options));
      const TraitTask& task = tasks.back();
      for (const std::string& w : task.warnings) log_warning(w);
      if (cfg.budget > task.pool.size()) {
        throw ValidationError("config [experiment] budget: " + std::to_string(cfg.budget) +
                              " exceeds the " + trait_key(t) + " pool of " + std::to_string(task.pool.size()));
      }
      if (task.pool.empty()) throw ValidationError("the " + trait_key(t) + " train pool is empty");

      SamplerParams params = base_params(cfg);
      if (cfg.components_cv) {
        const Eigen::MatrixXd X = standardize(dataset.feature_matrix(task.pool, t));
        const std::size_t fold_train = task.pool.size() - (task.pool.size() + cfg.cv_folds - 1) / cfg.cv_folds;
        std::vector<std::size_t> grid_c;
        for (std::size_t c : cfg.component_grid) {
          if (c <= fold_train) grid_c.push_back(c);
        }
        if (grid_c.empty()) throw ValidationError("config [gmm] grid: no entry fits the " + trait_key(t) + " pool");
        GmmOptions gopt;
        gopt.covariance = cfg.covariance;
        params.components = select_components_cv(X, grid_c, cfg.cv_folds, cfg.seed, gopt);
      }
      selected[trait_key(t)]["components"] = params.components;
      const std::size_t task_index = tasks.size() - 1;
      for (SamplerKind kind : cfg.strategies) {
        SamplerParams p = params;
        if (cfg.bandwidth_cv && (kind == SamplerKind::Dpp || kind == SamplerKind::GmmDpp)) {
          p.bandwidth = select_bandwidth_cv(dataset, lexicons, t, SamplerStrategy(kind, p), cfg.bandwidth_grid,
                                            exp, task_options, cfg.seed);
          selected[trait_key(t)]["bandwidth"][std::string(sampler_key(kind))] = p.bandwidth;
        }
        for (std::size_t run = 0; run < cfg.runs; ++run) {
          grid.push_back({kind, t, run, cfg.seed + run, task_index, p});
        }
      }
    }

    std::vector<JobResult> results(grid.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < grid.size(); i = next++) {
        const Job& job = grid[i];
        try {
          const SamplerStrategy strategy(job.kind, job.params);
          results[i].curve = run_experiment(dataset, tasks[job.task], strategy, exp, job.seed);
          results[i].ok = true;
        } catch (const std::exception& e) {
          results[i].error = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs && j < grid.size(); ++j) pool.emplace_back(worker);
    worker();
    for (std::thread& th : pool) th.join();

    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir / "curves");
    std::vector<std::string> written;
    json runs = json::array();
    std::vector<std::string> failures;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Job& job = grid[i];
      const std::string key(sampler_key(job.kind));
      json entry{{"strategy", key}, {"trait", trait_key(job.trait)}, {"run", job.run}, {"seed", job.seed}};
      if (results[i].ok) {
        const std::string rel = curve_file(key, job.trait, job.run);
        std::ostringstream csv;
        write_curve_csv(results[i].curve, csv);
        write_text(dir / rel, csv.str());
        written.push_back(rel);
        entry["curve"] = rel;
        entry["status"] = "ok";
      } else {
        entry["status"] = "failed";
        entry["error"] = results[i].error;
        failures.push_back(key + "/" + trait_key(job.trait) + "/run" + std::to_string(job.run) + ": " +
                           results[i].error);
      }
      runs.push_back(std::move(entry));
    }

    std::vector<AucSummary> summaries;
    json summary_json = json::array();
    std::vector<std::string> strategy_names;
    for (SamplerKind kind : cfg.strategies) strategy_names.emplace_back(sampler_key(kind));
    for (SamplerKind kind : cfg.strategies) {
      for (TraitKind t : cfg.traits) {
        std::vector<LearningCurve> curves;
        for (std::size_t i = 0; i < grid.size(); ++i) {
          if (results[i].ok && grid[i].kind == kind && grid[i].trait == t) curves.push_back(results[i].curve);
        }
        if (curves.empty()) continue;
        try {
          AucSummary s = aggregate_runs(curves);
          summary_json.push_back({{"strategy", s.strategy}, {"trait", trait_key(t)}, {"mean", s.mean},
                                  {"std", s.stddev}, {"runs", s.runs()}, {"aucs", s.aucs}});
          summaries.push_back(std::move(s));
        } catch (const std::exception& e) {
          failures.push_back(std::string(sampler_key(kind)) + "/" + trait_key(t) + ": " + e.what());
        }
      }
    }
    {
      std::ostringstream table;
      write_auc_table(summaries, strategy_names, cfg.traits, table);
      write_text(dir / kAucTable, table.str());
      written.push_back(kAucTable);
    }

    json files = json::array();
    for (const std::string& rel : written) {
      files.push_back({{"path", rel}, {"sha256", sha256_hex((dir / rel).string())},
                       {"bytes", fs::file_size(dir / rel)}});
    }
    std::vector<std::string> trait_names;
    for (TraitKind t : cfg.traits) trait_names.push_back(trait_key(t));
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json manifest{
        {"tool", "groundal"},
        {"version", kVersion},
        {"config_path", config_path},
        {"config_text", cfg.source_text},
        {"config", cfg.values},
        {"base_seed", cfg.seed},
        {"seed_formula", "run seed = base_seed + run index"},
        {"strategies", strategy_names},
        {"traits", trait_names},
        {"classifier", std::string(classifier_key(cfg.classifier))},
        {"batch_size", cfg.batch_size},
        {"budget", cfg.budget},
        {"runs_per_cell", cfg.runs},
        {"jobs", jobs},
        {"dataset", {{"name", dataset.name}, {"instances", dataset.size()},
                     {"train", dataset.split.train.size()}, {"test", dataset.split.test.size()}}},
        {"selected", selected},
        {"runs", runs},
        {"summaries", summary_json},
        {"failures", failures},
        {"files", files},
        {"wall_clock_seconds", seconds},
    };
    write_text(dir / kManifest, manifest.dump(2) + "\n");

    out << "completed " << (grid.size() - std::count_if(results.begin(), results.end(),
                                                         [](const JobResult& r) { return !r.ok; }))
        << "/" << grid.size() << " runs; results in " << dir.string() << '\n';
    if (!failures.empty()) {
      for (const std::string& f : failures) err << "failed: " << f << '\n';
      return kExitRuntime;
    }
    return kExitOk;
  });
}

int cmd_report(const std::string& results_dir, const CommandOptions& options, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    const fs::path dir(results_dir);
    const fs::path manifest_path = dir / kManifest;
    if (!fs::exists(manifest_path)) throw ValidationError("no manifest in '" + dir.string() + "'");
    json manifest;
    try {
      std::ifstream in(manifest_path);
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError(std::string("corrupt manifest: ") + e.what());
    }
    if (!manifest.contains("runs") || !manifest.contains("strategies") || !manifest.contains("traits")) {
      throw DataError("corrupt manifest: missing runs/strategies/traits");
    }
    for (const auto& f : manifest.value("files", json::array())) {
      const fs::path p = dir / f.at("path").get<std::string>();
      if (!fs::exists(p) || sha256_hex(p.string()) != f.at("sha256").get<std::string>()) {
        log_warning("file '" + p.string() + "' is missing or differs from the manifest hash");
      }
    }
    const auto strategies = manifest.at("strategies").get<std::vector<std::string>>();
    std::vector<TraitKind> traits;
    for (const auto& name : manifest.at("traits").get<std::vector<std::string>>()) {
      const auto t = parse_trait(name);
      if (!t) throw DataError("corrupt manifest: unknown trait '" + name + "'");
      traits.push_back(*t);
    }

    const fs::path out_dir = options.out ? fs::path(*options.out) : dir;
    fs::create_directories(out_dir);
    std::map<std::pair<std::string, TraitKind>, AucSummary> cells;
    for (const std::string& strategy : strategies) {
      for (TraitKind t : traits) {
        std::vector<LearningCurve> curves;
        for (const auto& run : manifest.at("runs")) {
          if (run.value("status", "") != "ok" || run.at("strategy") != strategy || run.at("trait") != trait_key(t)) {
            continue;
          }
          LearningCurve c;
          c.strategy = strategy;
          c.trait = t;
          c.seed = run.at("seed").get<std::uint64_t>();
          c.points = read_curve_csv(dir / run.at("curve").get<std::string>());
          curves.push_back(std::move(c));
        }
        if (curves.empty()) continue;
        AucSummary s = aggregate_runs(curves);
        std::ostringstream csv;
        write_curve_csv(s.mean_curve, csv);
        const fs::path file = out_dir / ("mean_curve_" + strategy + "_" + trait_key(t) + ".csv");
        write_text(file, csv.str());
        cells.emplace(std::make_pair(strategy, t), std::move(s));
      }
    }

    char buf[96];
    std::snprintf(buf, sizeof buf, "%-18s", "strategy");
    out << buf;
    for (TraitKind t : traits) {
      std::snprintf(buf, sizeof buf, " %-20s", trait_key(t).c_str());
      out << buf;
    }
    out << '\n';
    for (const std::string& strategy : strategies) {
      std::snprintf(buf, sizeof buf, "%-18s", strategy.c_str());
      out << buf;
      for (TraitKind t : traits) {
        const auto it = cells.find({strategy, t});
        if (it == cells.end()) {
          std::snprintf(buf, sizeof buf, " %-20s", "-");
        } else {
          char cell[64];
          std::snprintf(cell, sizeof cell, "%.4f±%.4f (n=%zu)", it->second.mean, it->second.stddev,
                        it->second.runs());
          std::snprintf(buf, sizeof buf, " %-20s", cell);
        }
        out << buf;
      }
      out << '\n';
    }
    out << "mean curves written to " << out_dir.string() << '\n';
    return kExitOk;
  });
}

int run_cli(int argc, char** argv) {
  CLI::App app{"groundal: active learning benchmarks for grounded language"};
  app.require_subcommand(1);
  app.fallthrough();
  CommandOptions options;
  unsigned jobs = 1;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto* jobs_opt = app.add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Override the base seed");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");
  std::string target;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset, lexicons and ground truth");
  gen->add_option("config", target, "Config file")->required();
  auto* run = app.add_subcommand("run", "Run the strategy x trait x run grid");
  run->add_option("config", target, "Config file")->required();
  auto* report = app.add_subcommand("report", "Summarize a results directory");
  report->add_option("dir", target, "Results directory")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  if (*jobs_opt) options.jobs = jobs;
  if (*seed_opt) options.seed = seed;
  if (*out_opt) options.out = out_dir;
  if (*gen) return cmd_generate(target, options, std::cout, std::cerr);
  if (*run) return cmd_run(target, options, std::cout, std::cerr);
  return cmd_report(target, options, std::cout, std::cerr);
}

}  // namespace groundal::cli
