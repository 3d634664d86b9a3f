// fnrgnn command-line driver.
//
// Exit codes: 0 success, 2 usage/config/input error, 3 numerical failure.

#include "fnrgnn/data_io.hpp"
#include "fnrgnn/gradcheck.hpp"
#include "fnrgnn/kernels.hpp"
#include "fnrgnn/metrics.hpp"
#include "fnrgnn/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

fnr::TrainConfig load_train_config(const std::string& flag_path) {
  std::string path = flag_path;
  if (path.empty()) {
    if (const char* env = std::getenv("FNRGNN_CONFIG"); env != nullptr) path = env;
  }
  if (path.empty()) return {};
  require_file(path, "config file");
  return fnr::train_config_from_json(fnr::read_json_file(path));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir);
}

json metrics_document(const fnr::MetricsReport& train, const fnr::MetricsReport& val, const fnr::MetricsReport& test) {
  return json{{"format_version", fnr::kFormatVersion},
              {"train", fnr::to_json(train)},
              {"val", fnr::to_json(val)},
              {"test", fnr::to_json(test)}};
}

void print_report(const fnr::MetricsReport& r) {
  std::cout << std::setw(6) << r.split << "  mse " << std::setw(10) << r.mse << "  mae " << std::setw(10) << r.mae
            << "  mg " << std::setw(10) << r.mg << "  vg " << std::setw(10) << r.vg << "  wd " << std::setw(10) << r.wd
            << '\n';
}

int cmd_generate(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_nodes,
                 const std::string& out_edges) {
  fnr::SyntheticConfig cfg;
  if (!config_path.empty()) {
    require_file(config_path, "config file");
    cfg = fnr::synthetic_config_from_json(fnr::read_json_file(config_path));
  }
  if (seed) cfg.seed = *seed;
  const fnr::Graph g = fnr::generate_synthetic(cfg);
  fnr::write_graph(g, out_nodes, out_edges);

  std::vector<double> y0;
  std::vector<double> y1;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) (g.sensitive()[i] == 0 ? y0 : y1).push_back(g.targets()[i]);
  std::cout << "nodes " << g.num_nodes() << "  edges " << g.edges().size() << "  groups " << y0.size() << "/"
            << y1.size() << '\n';
  if (!y0.empty() && !y1.empty()) {
    std::cout << "label MG " << fnr::mean_gap(y0, y1) << "  label WD " << fnr::wasserstein_1d(y0, y1) << '\n';
  }
  return 0;
}

int cmd_train(const std::string& nodes, const std::string& edges, const std::string& config_path,
              const std::string& out_dir) {
  require_file(nodes, "nodes file");
  require_file(edges, "edges file");
  const fnr::TrainConfig cfg = load_train_config(config_path);
  const fnr::Graph g = fnr::load_graph(nodes, edges);
  ensure_dir(out_dir);

  const fnr::TrainResult res = fnr::train(g, cfg);
  const fs::path out(out_dir);
  fnr::save_checkpoint(out / "checkpoint.json", {cfg, res.params});
  fnr::write_curve_csv(out / "curve.csv", res.curve);
  fnr::write_json_file(out / "metrics.json", metrics_document(res.train, res.val, res.test));
  fnr::write_json_file(out / "result.json",
                       json{{"format_version", fnr::kFormatVersion},
                            {"config", fnr::to_json(cfg)},
                            {"epochs_run", res.curve.size()},
                            {"best_epoch", res.best_epoch},
                            {"seconds", res.seconds},
                            {"kernels", std::string(fnr::kernels::backend_name(fnr::kernels::active_backend()))},
                            {"metrics", metrics_document(res.train, res.val, res.test)}});

  std::cout << "ablation " << fnr::ablation_name(cfg.ablation) << "  epochs " << res.curve.size() << "  best "
            << res.best_epoch << "  " << res.seconds << " s\n";
  print_report(res.train);
  print_report(res.val);
  print_report(res.test);
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& nodes, const std::string& edges,
                 const std::string& out) {
  require_file(checkpoint, "checkpoint");
  require_file(nodes, "nodes file");
  require_file(edges, "edges file");
  const fnr::Checkpoint ckpt = fnr::load_checkpoint(checkpoint);
  const fnr::Graph g = fnr::load_graph(nodes, edges);
  fnr::Evaluation ev;
  try {
    ev = fnr::evaluate(g, ckpt.config, ckpt.params);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const json doc = metrics_document(ev.train, ev.val, ev.test);
  if (!out.empty()) fnr::write_json_file(out, doc);
  std::cout << doc.dump(2) << '\n';
  return 0;
}

int cmd_ablate(const std::string& nodes, const std::string& edges, const std::string& config_path,
               const std::string& out_dir, std::size_t seeds, std::size_t jobs) {
  require_file(nodes, "nodes file");
  require_file(edges, "edges file");
  const fnr::TrainConfig cfg = load_train_config(config_path);
  const fnr::Graph g = fnr::load_graph(nodes, edges);
  ensure_dir(out_dir);
  const auto rows = fnr::run_ablation_suite(g, cfg, seeds, jobs);
  const auto summary = fnr::summarize_ablation(rows);
  const fs::path out(out_dir);
  fnr::write_ablation_runs_csv(out / "ablation_runs.csv", rows);
  fnr::write_ablation_summary_csv(out / "ablation_summary.csv", summary);
  for (const auto& s : summary) {
    std::cout << std::setw(15) << fnr::ablation_name(s.ablation) << "  runs " << s.runs << "  mse " << std::setw(10)
              << s.mse << "  wd " << std::setw(10) << s.wd << '\n';
  }
  for (const auto& r : rows)
    if (!r.ok) std::cerr << "run " << fnr::ablation_name(r.ablation) << " seed " << r.seed << " failed: " << r.error << '\n';
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  fnr::GradCheckOptions opts;
  opts.seed = seed;
  const auto report = fnr::run_gradient_suite(opts);
  std::cout << std::left << std::setw(8) << "loss" << std::setw(8) << "param" << std::setw(8) << "n"
            << "max_rel_err\n";
  for (const auto& e : report.entries) {
    std::cout << std::setw(8) << e.loss << std::setw(8) << e.param << std::setw(8) << e.entries << std::scientific
              << std::setprecision(3) << e.max_rel_error << std::defaultfloat << '\n';
  }
  std::cout << "max relative error " << std::scientific << report.max_rel_error << " (tolerance " << report.tolerance
            << ")" << std::defaultfloat << (report.passed() ? "  PASS" : "  FAIL") << '\n';
  return report.passed() ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware GCN node regression"};
  app.require_subcommand(1, 1);
  std::string kernels = "auto";
  app.add_option("--kernels", kernels, "Kernel backend: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  std::string config;
  std::string nodes;
  std::string edges;
  std::string out;

  auto* gen = app.add_subcommand("generate", "Write a synthetic biased graph");
  std::optional<std::uint64_t> gen_seed;
  std::string out_nodes;
  std::string out_edges;
  gen->add_option("--config", config, "Synthetic generator JSON");
  gen->add_option("--seed", gen_seed, "Override the generator seed");
  gen->add_option("--out-nodes", out_nodes, "Nodes CSV to write")->required();
  gen->add_option("--out-edges", out_edges, "Edges TSV to write")->required();

  auto* tr = app.add_subcommand("train", "Train and write result, metrics, curve and checkpoint");
  tr->add_option("--nodes", nodes)->required();
  tr->add_option("--edges", edges)->required();
  tr->add_option("--config", config, "Train config JSON (default: $FNRGNN_CONFIG, then built-in defaults)");
  tr->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "Recompute metrics from a checkpoint");
  std::string checkpoint;
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--nodes", nodes)->required();
  ev->add_option("--edges", edges)->required();
  ev->add_option("--out", out, "Also write the metrics JSON here");

  auto* ab = app.add_subcommand("ablate", "Run every ablation case over several seeds");
  std::size_t seeds = 5;
  std::size_t jobs = 1;
  ab->add_option("--nodes", nodes)->required();
  ab->add_option("--edges", edges)->required();
  ab->add_option("--config", config, "Base train config JSON");
  ab->add_option("--out", out, "Output directory")->required();
  ab->add_option("--seeds", seeds, "Seeds per case")->check(CLI::PositiveNumber);
  ab->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every training gradient");
  std::uint64_t gc_seed = 7;
  gc->add_option("--seed", gc_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (kernels == "scalar") fnr::kernels::set_backend(fnr::kernels::Backend::scalar);
    if (kernels == "avx2") fnr::kernels::set_backend(fnr::kernels::Backend::avx2);

    if (*gen) return cmd_generate(config, gen_seed, out_nodes, out_edges);
    if (*tr) return cmd_train(nodes, edges, config, out);
    if (*ev) return cmd_evaluate(checkpoint, nodes, edges, out);
    if (*ab) return cmd_ablate(nodes, edges, config, out, seeds, jobs);
    if (*gc) return cmd_gradcheck(gc_seed);
  } catch (const fnr::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
