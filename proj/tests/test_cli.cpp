// Drives the fnrgnn binary end to end through the shell.

#include "fnrgnn/data_io.hpp"
#include "support/tempdir.hpp"

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <string>

#include <sys/wait.h>

using namespace fnr;
using fnr::testing::slurp;
using fnr::testing::TempDir;

namespace {

const std::string kCli = FNRGNN_CLI_PATH;
const std::filesystem::path kFixtures = FNRGNN_FIXTURE_DIR;

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = (env.empty() ? "" : env + " ") + "'" + kCli + "' " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.output.append(buf, got);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::string quick() { return q(kFixtures / "quick_train.json"); }

// Generates a small graph into dir and returns the nodes/edges arguments.
std::string small_graph(const TempDir& dir, int n = 60) {
  const auto cfg = dir.write("gen.json", "{\"n\": " + std::to_string(n) + ", \"d\": 4, \"p_intra\": 0.15, \"p_inter\": 0.05}");
  const Run r = run("generate --config " + q(cfg) + " --out-nodes " + q(dir / "nodes.csv") + " --out-edges " +
                    q(dir / "edges.tsv"));
  REQUIRE(r.code == 0);
  return "--nodes " + q(dir / "nodes.csv") + " --edges " + q(dir / "edges.tsv");
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2") {
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("train --nodes x").code == 2);
    CHECK(run("--kernels sse generate --out-nodes a --out-edges b").code == 2);
    CHECK(run("--help").code == 0);
  }

  TEST_CASE("generate defaults") {
    TempDir dir;
    const Run r = run("generate --out-nodes " + q(dir / "n.csv") + " --out-edges " + q(dir / "e.tsv"));
    REQUIRE(r.code == 0);
    const Graph g = load_graph(dir / "n.csv", dir / "e.tsv");
    CHECK(g.num_nodes() == 400);
    CHECK(g.feature_dim() == 8);
    CHECK(g == generate_synthetic(SyntheticConfig{}));
    CHECK(r.output.find("nodes 400") != std::string::npos);
  }

  TEST_CASE("generate is reproducible and honours the seed") {
    TempDir dir;
    REQUIRE(run("generate --seed 4 --out-nodes " + q(dir / "a.csv") + " --out-edges " + q(dir / "a.tsv")).code == 0);
    REQUIRE(run("generate --seed 4 --out-nodes " + q(dir / "b.csv") + " --out-edges " + q(dir / "b.tsv")).code == 0);
    REQUIRE(run("generate --seed 5 --out-nodes " + q(dir / "c.csv") + " --out-edges " + q(dir / "c.tsv")).code == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.tsv") == slurp(dir / "b.tsv"));
    CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
  }

  TEST_CASE("generate with delta 2 yields a label gap near 2") {
    TempDir dir;
    const auto cfg = dir.write("g.json", "{\"delta\": 2.0}");
    REQUIRE(run("generate --config " + q(cfg) + " --out-nodes " + q(dir / "n.csv") + " --out-edges " +
                q(dir / "e.tsv"))
                .code == 0);
    const Graph g = load_graph(dir / "n.csv", dir / "e.tsv");
    std::vector<double> y0;
    std::vector<double> y1;
    for (std::size_t i = 0; i < g.num_nodes(); ++i) (g.sensitive()[i] == 0 ? y0 : y1).push_back(g.targets()[i]);
    // 3 sd of the gap estimate at n = 400 is about 0.3.
    CHECK(std::fabs(mean_gap(y0, y1) - 2.0) < 0.3);
  }

  TEST_CASE("generate errors") {
    TempDir dir;
    CHECK(run("generate --out-nodes " + q(dir / "missing" / "n.csv") + " --out-edges " + q(dir / "e.tsv")).code == 2);
    const auto bad = dir.write("bad.json", "{\"n\": 3}");
    CHECK(run("generate --config " + q(bad) + " --out-nodes " + q(dir / "n.csv") + " --out-edges " + q(dir / "e.tsv"))
              .code == 2);
  }

  TEST_CASE("train writes outputs and is deterministic") {
    TempDir dir;
    const std::string graph = small_graph(dir);
    const Run a = run("train " + graph + " --config " + quick() + " --out " + q(dir / "a"));
    REQUIRE(a.code == 0);
    const Run b = run("train " + graph + " --config " + quick() + " --out " + q(dir / "b"));
    REQUIRE(b.code == 0);
    for (const char* f : {"checkpoint.json", "curve.csv", "metrics.json", "result.json"})
      CHECK(std::filesystem::is_regular_file(dir / "a" / f));
    CHECK(slurp(dir / "a" / "metrics.json") == slurp(dir / "b" / "metrics.json"));
    CHECK(slurp(dir / "a" / "checkpoint.json") == slurp(dir / "b" / "checkpoint.json"));

    const auto metrics = read_json_file(dir / "a" / "metrics.json");
    for (const char* split : {"train", "val", "test"}) {
      const MetricsReport r = metrics_report_from_json(metrics.at(split));
      CHECK(r.split == split);
      CHECK(std::isfinite(r.mse));
      CHECK(std::isfinite(r.wd));
    }
    const auto result = read_json_file(dir / "a" / "result.json");
    CHECK(result.at("config").at("epochs") == 20);
  }

  TEST_CASE("scalar and vector kernels agree closely end to end") {
    TempDir dir;
    const std::string graph = small_graph(dir);
    REQUIRE(run("--kernels scalar train " + graph + " --config " + quick() + " --out " + q(dir / "s")).code == 0);
    REQUIRE(run("train " + graph + " --config " + quick() + " --out " + q(dir / "v")).code == 0);
    const auto s = metrics_report_from_json(read_json_file(dir / "s" / "metrics.json").at("test"));
    const auto v = metrics_report_from_json(read_json_file(dir / "v" / "metrics.json").at("test"));
    CHECK(s.mse == doctest::Approx(v.mse).epsilon(1e-6));
    CHECK(s.wd == doctest::Approx(v.wd).epsilon(1e-6));
  }

  TEST_CASE("train uses FNRGNN_CONFIG when no flag is given") {
    TempDir dir;
    const std::string graph = small_graph(dir);
    const Run r = run("train " + graph + " --out " + q(dir / "o"), "FNRGNN_CONFIG=" + quick());
    REQUIRE(r.code == 0);
    CHECK(read_json_file(dir / "o" / "result.json").at("config").at("epochs") == 20);

    const Run missing = run("train " + graph + " --out " + q(dir / "p"), "FNRGNN_CONFIG=" + q(dir / "nope.json"));
    CHECK(missing.code == 2);
    CHECK(missing.output.find("nope.json") != std::string::npos);
  }

  TEST_CASE("train input errors exit 2") {
    TempDir dir;
    small_graph(dir);
    const std::string nodes = "--nodes " + q(dir / "nodes.csv");

    const Run no_edges = run("train " + nodes + " --edges " + q(dir / "absent.tsv") + " --out " + q(dir / "o"));
    CHECK(no_edges.code == 2);
    CHECK(no_edges.output.find("absent.tsv") != std::string::npos);

    const Run bad_cfg = run("train " + nodes + " --edges " + q(dir / "edges.tsv") + " --config " +
                            q(kFixtures / "bad_train.json") + " --out " + q(dir / "o"));
    CHECK(bad_cfg.code == 2);
    CHECK(bad_cfg.output.find("lambda") != std::string::npos);

    const auto bad_nodes = dir.write("bad.csv", "id,f,sensitive,target\n0,1,0,1\n1,1,3,1\n");
    const Run bad = run("train --nodes " + q(bad_nodes) + " --edges " + q(dir / "edges.tsv") + " --out " + q(dir / "o"));
    CHECK(bad.code == 2);
    CHECK(bad.output.find("bad.csv:3:") != std::string::npos);
  }

  TEST_CASE("non-finite training exits 3") {
    TempDir dir;
    std::string nodes = "id,f,sensitive,target\n";
    for (int i = 0; i < 30; ++i)
      nodes += std::to_string(i) + "," + std::to_string(i % 7) + "," + std::to_string(i % 2) + "," +
               (i % 2 ? "1e200" : "-1e200") + "\n";
    const auto n = dir.write("n.csv", nodes);
    const auto e = dir.write("e.tsv", "0 1\n");
    const Run r = run("train --nodes " + q(n) + " --edges " + q(e) + " --config " + quick() + " --out " + q(dir / "o"));
    CHECK(r.code == 3);
    CHECK(r.output.find("numerical failure") != std::string::npos);
  }

  TEST_CASE("evaluate reproduces training metrics") {
    TempDir dir;
    const std::string graph = small_graph(dir);
    REQUIRE(run("train " + graph + " --config " + quick() + " --out " + q(dir / "t")).code == 0);
    const Run ev = run("evaluate --checkpoint " + q(dir / "t" / "checkpoint.json") + " " + graph + " --out " +
                       q(dir / "eval.json"));
    REQUIRE(ev.code == 0);
    CHECK(read_json_file(dir / "eval.json") == read_json_file(dir / "t" / "metrics.json"));

    // A graph with a different feature dimension cannot be evaluated.
    const auto n2 = dir.write("n2.csv", "id,a,b,sensitive,target\n0,1,2,0,1\n1,2,1,1,2\n");
    const auto e2 = dir.write("e2.tsv", "0 1\n");
    CHECK(run("evaluate --checkpoint " + q(dir / "t" / "checkpoint.json") + " --nodes " + q(n2) + " --edges " + q(e2))
              .code == 2);
    CHECK(run("evaluate --checkpoint " + q(dir / "none.json") + " " + graph).code == 2);
  }

  TEST_CASE("ablate writes every case") {
    TempDir dir;
    const std::string graph = small_graph(dir);
    const auto cfg = dir.write("ab.json", "{\"epochs\": 5, \"patience\": 5, \"hidden\": 4, \"sinkhorn_iterations\": 5}");
    const Run r = run("ablate " + graph + " --config " + q(cfg) + " --seeds 2 --jobs 2 --out " + q(dir / "ab"));
    REQUIRE(r.code == 0);
    const std::string runs = slurp(dir / "ab" / "ablation_runs.csv");
    CHECK(std::count(runs.begin(), runs.end(), '\n') == 1 + 5 * 2);
    const std::string summary = slurp(dir / "ab" / "ablation_summary.csv");
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 5);
    for (const char* name : {"vanilla", "no_reweight", "no_mmd", "mean_only_dist", "full"})
      CHECK(summary.find(std::string("\n") + name + ",2,") != std::string::npos);
    CHECK(run("ablate " + graph + " --jobs 0 --out " + q(dir / "x")).code == 2);
  }

  TEST_CASE("gradcheck passes") {
    const Run r = run("gradcheck");
    CHECK(r.code == 0);
    CHECK(r.output.find("PASS") != std::string::npos);
  }
}
