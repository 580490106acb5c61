// Command line front end: generate synthetic data, embed it, run the
// synchronous or asynchronous distributed iteration, evaluate
// recommendation quality, and sweep model parameters.
//
// All behavior is driven by a JSON config (schema_version 1) plus a seed;
// outputs are CSV/JSON files in the chosen directory. Exit codes: 0 on
// success, 1 on validation or configuration problems, 2 when an iteration
// diverges (the partial trace is still written).

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spectra/asyncsim.hpp"
#include "spectra/distsync.hpp"
#include "spectra/errors.hpp"
#include "spectra/graph.hpp"
#include "spectra/io.hpp"
#include "spectra/models.hpp"
#include "spectra/recommend.hpp"
#include "spectra/spectral.hpp"
#include "spectra/synthdata.hpp"
#include "spectra/trace.hpp"

namespace {

using nlohmann::json;
using namespace spectra;

struct Options {
  std::string config_path;
  std::string out_dir;
  bool quiet = false;
  bool seed_given = false;
  std::uint64_t seed = 0;
};

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParameterError("cannot open config file: " + path);
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.contains("schema_version") ||
      !doc["schema_version"].is_number_integer() ||
      doc["schema_version"].get<int>() != 1) {
    throw ParameterError("config must declare schema_version 1");
  }
  return doc;
}

std::string model_type(const json& cfg) {
  if (!cfg.contains("model") || !cfg["model"].is_object()) {
    throw ParameterError("config needs a model section");
  }
  const json& m = cfg["model"];
  if (!m.contains("type") || !m["type"].is_string()) {
    throw ParameterError("model.type must be \"similarity\" or \"rating\"");
  }
  const std::string t = m["type"].get<std::string>();
  if (t != "similarity" && t != "rating") {
    throw ParameterError("model.type must be \"similarity\" or \"rating\"");
  }
  return t;
}

SimilarityModel sim_model(const json& cfg) {
  SimilarityModel m = similarity_model_from_json(cfg["model"].dump());
  m.validate();
  return m;
}

RatingModel rat_model(const json& cfg) {
  RatingModel m = rating_model_from_json(cfg["model"].dump());
  m.validate();
  return m;
}

std::uint64_t run_seed(const json& cfg, const Options& opt) {
  if (opt.seed_given) {
    return opt.seed;
  }
  if (cfg.contains("seed")) {
    return cfg["seed"].get<std::uint64_t>();
  }
  if (cfg.contains("seeds") && cfg["seeds"].is_array() &&
      !cfg["seeds"].empty()) {
    return cfg["seeds"][0].get<std::uint64_t>();
  }
  return 0;
}

std::vector<std::uint64_t> seed_list(const json& cfg, const Options& opt) {
  if (opt.seed_given) {
    return {opt.seed};
  }
  if (cfg.contains("seeds") && cfg["seeds"].is_array() &&
      !cfg["seeds"].empty()) {
    std::vector<std::uint64_t> out;
    for (const auto& s : cfg["seeds"]) {
      out.push_back(s.get<std::uint64_t>());
    }
    return out;
  }
  return {run_seed(cfg, opt)};
}

std::string output_dir(const json& cfg, const Options& opt) {
  std::string dir = opt.out_dir;
  if (dir.empty() && cfg.contains("output_dir")) {
    dir = cfg["output_dir"].get<std::string>();
  }
  if (dir.empty()) {
    dir = ".";
  }
  std::filesystem::create_directories(dir);
  return dir;
}

int algo_dim(const json& cfg) {
  if (!cfg.contains("algorithm") || !cfg["algorithm"].contains("L")) {
    return 2;
  }
  return cfg["algorithm"]["L"].get<int>();
}

void write_json(const std::string& path, const json& doc) {
  atomic_write_file(path, doc.dump(2) + "\n");
}

void write_labels(const std::string& path, const ClassAssignment& assign) {
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(assign.size()));
  for (int i = 0; i < assign.size(); ++i) {
    rows.push_back({static_cast<double>(i), static_cast<double>(assign[i])});
  }
  write_matrix_csv(path, rows, {"id", "class"});
}

json summary_to_json(const Trace& trace) {
  json doc;
  for (const auto& [key, value] : trace.summary) {
    doc["summary"][key] = value;
  }
  if (!trace.warning.empty()) {
    doc["warning"] = trace.warning;
  }
  doc["rows"] = trace.rows.size();
  return doc;
}

Spectrum similarity_spectrum(const SparseGraph& g, int L) {
  if (g.n() <= kJacobiLimit) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.n(), g.n());
    for (int u = 0; u < g.n(); ++u) {
      auto nbrs = g.neighbors(u);
      auto ws = g.weights(u);
      for (std::size_t i = 0; i < nbrs.size(); ++i) {
        a(u, nbrs[i]) = ws[i];
      }
    }
    return eig_top(a, L);
  }
  return eig_top(GraphOperator(g), L);
}

int cmd_generate(const json& cfg, const Options& opt) {
  const std::string dir = output_dir(cfg, opt);
  const std::uint64_t seed = run_seed(cfg, opt);
  if (model_type(cfg) == "similarity") {
    SimilarityModel model = sim_model(cfg);
    auto [g, assign] = gen_similarity(model, seed);
    write_edge_list(g, dir + "/edges.txt");
    write_labels(dir + "/labels.csv", assign);
    if (!opt.quiet) {
      std::printf("generated similarity graph: n=%d m=%lld connected=%d\n",
                  g.n(), static_cast<long long>(g.m()),
                  g.connected() ? 1 : 0);
    }
  } else {
    RatingModel model = rat_model(cfg);
    RatingData data = gen_ratings(model, seed);
    write_edge_list(data.s, dir + "/edges.txt");
    write_labels(dir + "/user_labels.csv", data.users);
    write_labels(dir + "/item_labels.csv", data.items);
    if (!opt.quiet) {
      std::printf("generated rating data: users=%d items=%d ratings=%lld\n",
                  data.s.n_left(), data.s.n_right(),
                  static_cast<long long>(data.s.m()));
    }
  }
  return 0;
}

int cmd_embed(const json& cfg, const Options& opt) {
  const std::string dir = output_dir(cfg, opt);
  const std::uint64_t seed = run_seed(cfg, opt);
  const int L = algo_dim(cfg);

  Embedding emb;
  Centroids cents;
  ClassAssignment truth;
  if (model_type(cfg) == "similarity") {
    SimilarityModel model = sim_model(cfg);
    auto [g, assign] = gen_similarity(model, seed);
    emb = embed(similarity_spectrum(g, L));
    cents = centroids_similarity(model, L);
    truth = assign;
  } else {
    RatingModel model = rat_model(cfg);
    RatingData data = gen_ratings(model, seed);
    emb = embed(svd_top(data.s, L));
    cents = centroids_rating(model, L);
    truth = data.users;
  }

  write_embedding_csv(emb, dir + "/embedding.csv");
  write_centroids_csv(cents, dir + "/centroids.csv");

  json metrics;
  metrics["n"] = emb.n();
  metrics["L"] = emb.dim();
  if (cfg.contains("evaluation") && cfg["evaluation"].contains("a")) {
    const double a = cfg["evaluation"]["a"].get<double>();
    ClusterAccuracy acc = cluster_accuracy(emb, cents, truth, a);
    metrics["a"] = a;
    metrics["fraction_within"] = acc.fraction_within;
    metrics["assignment_accuracy"] = acc.assignment_accuracy;
  }
  write_json(dir + "/metrics.json", metrics);
  if (!opt.quiet) {
    std::printf("embedded %d entities in %d dimensions\n", emb.n(), emb.dim());
  }
  return 0;
}

GainSchedule gains_from(const json& sync_cfg) {
  const std::string kind = sync_cfg.value("gains", "paper");
  if (kind == "paper") {
    return GainSchedule::paper_default();
  }
  if (kind == "offset") {
    return GainSchedule::offset(sync_cfg.value("offset_t0", 500LL));
  }
  throw ParameterError("algorithm.sync.gains must be \"paper\" or \"offset\"");
}

PsdMode psd_from(const json& sync_cfg) {
  const std::string mode = sync_cfg.value("mode", "squared");
  if (mode == "squared") {
    return PsdMode::squared();
  }
  if (mode == "shifted") {
    return PsdMode::shifted(sync_cfg.value("epsilon", 1e-3));
  }
  throw ParameterError("algorithm.sync.mode must be \"squared\" or \"shifted\"");
}

int cmd_sync(const json& cfg, const Options& opt) {
  if (model_type(cfg) != "similarity") {
    throw ParameterError("sync runs need a similarity model");
  }
  const std::string dir = output_dir(cfg, opt);
  const std::uint64_t seed = run_seed(cfg, opt);
  const int L = algo_dim(cfg);
  json sync_cfg;
  if (cfg.contains("algorithm") && cfg["algorithm"].contains("sync")) {
    sync_cfg = cfg["algorithm"]["sync"];
  }

  SimilarityModel model = sim_model(cfg);
  auto [g, assign] = gen_similarity(model, seed);

  const GainSchedule gains = gains_from(sync_cfg);
  const PsdMode mode = psd_from(sync_cfg);
  const double noise_std = sync_cfg.value("noise_std", 1e-3);
  const long long horizon = sync_cfg.value("horizon", 100000LL);
  const long long trace_every = sync_cfg.value("trace_every", 1000LL);
  const int n_override = sync_cfg.value("n_override", 0);

  try {
    Trace trace = run_sync(g, L, mode, gains, noise_std, horizon, seed,
                           trace_every, n_override > 0 ? n_override : -1);
    trace.write_csv(dir + "/trace.csv");
    write_json(dir + "/summary.json", summary_to_json(trace));
    if (!trace.warning.empty()) {
      std::fprintf(stderr, "warning: %s\n", trace.warning.c_str());
    }
    if (!opt.quiet) {
      std::printf("sync run done: residual=%.6g gram_error=%.6g\n",
                  trace.summary.at("final_residual"),
                  trace.summary.at("final_gram_error"));
    }
  } catch (DivergenceError& e) {
    if (e.trace_prefix) {
      e.trace_prefix->write_csv(dir + "/trace.csv");
    }
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 2;
  }
  return 0;
}

int cmd_async(const json& cfg, const Options& opt) {
  if (model_type(cfg) != "similarity") {
    throw ParameterError("async runs need a similarity model");
  }
  const std::string dir = output_dir(cfg, opt);
  const std::uint64_t seed = run_seed(cfg, opt);
  const int L = algo_dim(cfg);
  json async_cfg;
  if (cfg.contains("algorithm") && cfg["algorithm"].contains("async")) {
    async_cfg = cfg["algorithm"]["async"];
  }

  SimilarityModel model = sim_model(cfg);
  auto [g, assign] = gen_similarity(model, seed);

  SimConfig sim;
  sim.gain = async_cfg.value("gain", 1e-3);
  sim.node_rate = async_cfg.value("node_rate", 0.2);
  sim.edge_rate = async_cfg.value("edge_rate", 10.0);
  sim.horizon = async_cfg.value("horizon", 600.0);
  sim.noise_std = async_cfg.value("noise_std", 0.0);
  sim.trace_every = async_cfg.value("trace_every", 1.0);
  sim.seed = seed;

  try {
    Trace trace = run_async(g, L, sim);
    trace.write_csv(dir + "/trace.csv");
    write_json(dir + "/summary.json", summary_to_json(trace));
    if (!trace.warning.empty()) {
      std::fprintf(stderr, "warning: %s\n", trace.warning.c_str());
    }
    if (!opt.quiet) {
      std::printf("async run done: residual=%.6g events=%.0f\n",
                  trace.summary.at("final_residual"),
                  trace.summary.at("events_processed"));
    }
  } catch (DivergenceError& e) {
    if (e.trace_prefix) {
      e.trace_prefix->write_csv(dir + "/trace.csv");
    }
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 2;
  }
  return 0;
}

int cmd_evaluate(const json& cfg, const Options& opt) {
  const std::string dir = output_dir(cfg, opt);
  const std::uint64_t seed = run_seed(cfg, opt);
  const int L = algo_dim(cfg);
  json eval_cfg;
  if (cfg.contains("evaluation")) {
    eval_cfg = cfg["evaluation"];
  }
  const std::string type = eval_cfg.value("type", "voting");

  json report;
  report["type"] = type;
  if (type == "cluster") {
    if (!eval_cfg.contains("a")) {
      throw ParameterError("cluster evaluation needs evaluation.a");
    }
    const double a = eval_cfg["a"].get<double>();
    ClusterAccuracy acc{};
    if (model_type(cfg) == "similarity") {
      SimilarityModel model = sim_model(cfg);
      auto [g, assign] = gen_similarity(model, seed);
      acc = cluster_accuracy(embed(similarity_spectrum(g, L)),
                             centroids_similarity(model, L), assign, a);
    } else {
      RatingModel model = rat_model(cfg);
      RatingData data = gen_ratings(model, seed);
      acc = cluster_accuracy(embed(svd_top(data.s, L)),
                             centroids_rating(model, L), data.users, a);
    }
    report["a"] = a;
    report["fraction_within"] = acc.fraction_within;
    report["assignment_accuracy"] = acc.assignment_accuracy;
  } else if (type == "voting") {
    if (model_type(cfg) != "rating") {
      throw ParameterError("voting evaluation needs a rating model");
    }
    RatingModel model = rat_model(cfg);
    RatingData data = gen_ratings(model, seed);
    Embedding emb = embed(svd_top(data.s, L));
    Centroids cents = centroids_rating(model, L);
    VotingReport rep = evaluate_voting(
        data, emb, cents, model, eval_cfg.value("n_samples", 50),
        eval_cfg.value("sample_size", 50), seed);
    report["rho0"] = rep.rho0;
    report["excluded_fraction"] = rep.excluded_fraction;
    report["n_evaluated"] = rep.n_evaluated;
    report["consistency"] = rep.consistency;
    report["mean_violation_rate"] = rep.mean_violation_rate;
    report["misclassified_fraction"] = rep.misclassified_fraction;
  } else if (type == "agreement") {
    if (model_type(cfg) != "rating") {
      throw ParameterError("agreement evaluation needs a rating model");
    }
    RatingModel model = rat_model(cfg);
    RatingData data = gen_ratings(model, seed);
    AgreementReport rep = agreement_experiment(
        data, L, eval_cfg.value("max_rank", 10), seed);
    report["n_tested"] = rep.n_tested;
    report["baseline"] = rep.baseline;
    report["agreement_by_rank"] = rep.agreement_by_rank;
  } else {
    throw ParameterError(
        "evaluation.type must be \"cluster\", \"voting\" or \"agreement\"");
  }

  write_json(dir + "/report.json", report);
  if (!opt.quiet) {
    std::printf("evaluation (%s) written to %s/report.json\n", type.c_str(),
                dir.c_str());
  }
  return 0;
}

int thread_budget() {
  const char* env = std::getenv("SPECTRA_THREADS");
  if (env == nullptr) {
    return 1;
  }
  const int v = std::atoi(env);
  if (v < 1 || v > 256) {
    throw ParameterError("SPECTRA_THREADS must be between 1 and 256");
  }
  return v;
}

int cmd_sweep(const json& cfg, const Options& opt) {
  if (!cfg.contains("sweep") || !cfg["sweep"].contains("omegas")) {
    throw ParameterError("sweep needs a sweep.omegas list");
  }
  const std::string dir = output_dir(cfg, opt);
  const int L = algo_dim(cfg);
  std::vector<double> omegas;
  for (const auto& w : cfg["sweep"]["omegas"]) {
    omegas.push_back(w.get<double>());
  }
  std::vector<std::uint64_t> seeds;
  if (cfg["sweep"].contains("seeds")) {
    for (const auto& s : cfg["sweep"]["seeds"]) {
      seeds.push_back(s.get<std::uint64_t>());
    }
  } else {
    seeds = seed_list(cfg, opt);
  }
  if (omegas.empty() || seeds.empty()) {
    throw ParameterError("sweep needs at least one omega and one seed");
  }

  const bool similarity = model_type(cfg) == "similarity";
  json eval_cfg;
  if (cfg.contains("evaluation")) {
    eval_cfg = cfg["evaluation"];
  }
  if (similarity && !eval_cfg.contains("a")) {
    throw ParameterError("similarity sweeps need evaluation.a");
  }

  struct Cell {
    double omega;
    std::uint64_t seed;
    std::vector<double> metrics;
  };
  std::vector<Cell> cells;
  for (double w : omegas) {
    for (std::uint64_t s : seeds) {
      cells.push_back({w, s, {}});
    }
  }

  std::atomic<std::size_t> cursor{0};
  std::mutex fail_mutex;
  std::exception_ptr failure;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= cells.size()) {
        return;
      }
      try {
        Cell& cell = cells[i];
        if (similarity) {
          SimilarityModel model = sim_model(cfg);
          model.omega = cell.omega;
          model.validate();
          auto [g, assign] = gen_similarity(model, cell.seed);
          ClusterAccuracy acc = cluster_accuracy(
              embed(similarity_spectrum(g, L)),
              centroids_similarity(model, L), assign,
              eval_cfg["a"].get<double>());
          cell.metrics = {acc.fraction_within, acc.assignment_accuracy};
        } else {
          RatingModel model = rat_model(cfg);
          model.omega = cell.omega;
          model.validate();
          RatingData data = gen_ratings(model, cell.seed);
          Embedding emb = embed(svd_top(data.s, L));
          Centroids cents = centroids_rating(model, L);
          VotingReport rep = evaluate_voting(
              data, emb, cents, model, eval_cfg.value("n_samples", 50),
              eval_cfg.value("sample_size", 50), cell.seed);
          cell.metrics = {rep.consistency, rep.excluded_fraction,
                          rep.misclassified_fraction};
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(fail_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
        return;
      }
    }
  };

  const int n_threads =
      std::min<int>(thread_budget(), static_cast<int>(cells.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }

  std::vector<std::string> header =
      similarity
          ? std::vector<std::string>{"omega", "seed", "fraction_within",
                                     "assignment_accuracy"}
          : std::vector<std::string>{"omega", "seed", "consistency",
                                     "excluded_fraction",
                                     "misclassified_fraction"};
  std::vector<std::vector<double>> rows;
  for (const Cell& cell : cells) {
    std::vector<double> row{cell.omega, static_cast<double>(cell.seed)};
    row.insert(row.end(), cell.metrics.begin(), cell.metrics.end());
    rows.push_back(std::move(row));
  }
  write_matrix_csv(dir + "/sweep.csv", rows, header);
  if (!opt.quiet) {
    std::printf("sweep done: %zu cells -> %s/sweep.csv\n", cells.size(),
                dir.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral profiling toolkit"};
  app.require_subcommand(1);

  Options opt;
  app.add_option("--config", opt.config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--seed", opt.seed, "override the config seed")
      ->each([&opt](const std::string&) { opt.seed_given = true; });
  app.add_option("--out", opt.out_dir, "output directory");
  app.add_flag("--quiet", opt.quiet, "suppress progress output");

  CLI::App* c_generate = app.add_subcommand("generate", "sample a dataset");
  CLI::App* c_embed = app.add_subcommand("embed", "centralized embedding");
  CLI::App* c_sync = app.add_subcommand("sync", "synchronous iteration");
  CLI::App* c_async = app.add_subcommand("async", "asynchronous simulation");
  CLI::App* c_evaluate =
      app.add_subcommand("evaluate", "recommendation metrics");
  CLI::App* c_sweep = app.add_subcommand("sweep", "grid over omega and seeds");
  for (CLI::App* sub :
       {c_generate, c_embed, c_sync, c_async, c_evaluate, c_sweep}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const json cfg = load_config(opt.config_path);
    if (c_generate->parsed()) return cmd_generate(cfg, opt);
    if (c_embed->parsed()) return cmd_embed(cfg, opt);
    if (c_sync->parsed()) return cmd_sync(cfg, opt);
    if (c_async->parsed()) return cmd_async(cfg, opt);
    if (c_evaluate->parsed()) return cmd_evaluate(cfg, opt);
    if (c_sweep->parsed()) return cmd_sweep(cfg, opt);
    std::fprintf(stderr, "error: no subcommand\n");
    return 1;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
