#include "fnrgnn/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace fnr {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

double parse_number(std::string_view tok, const std::filesystem::path& path, std::size_t line, const char* what) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), end, v);
  if (tok.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    fail_at(path, line, std::string("non-numeric ") + what + " '" + std::string(tok) + "'");
  }
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

Graph load_graph(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path, LoadStats* stats) {
  std::ifstream nodes_in = open_in(nodes_path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(nodes_in, line)) throw DataError(nodes_path.string() + ": empty nodes file");
  ++line_no;
  const auto header = split_commas(line);
  if (header.size() < 3 || header.front() != "id" || header[header.size() - 2] != "sensitive" ||
      header.back() != "target") {
    fail_at(nodes_path, 1, "header must be 'id,<features...>,sensitive,target'");
  }
  const std::size_t d = header.size() - 3;

  std::unordered_map<std::string, std::size_t> index;
  std::vector<double> feats;
  std::vector<int> sensitive;
  std::vector<double> targets;
  while (std::getline(nodes_in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cols = split_commas(line);
    if (cols.size() != header.size()) {
      fail_at(nodes_path, line_no,
              "expected " + std::to_string(header.size()) + " columns, found " + std::to_string(cols.size()));
    }
    const std::string id(cols[0]);
    if (id.empty()) fail_at(nodes_path, line_no, "empty node id");
    if (!index.emplace(id, sensitive.size()).second) fail_at(nodes_path, line_no, "duplicate node id '" + id + "'");
    for (std::size_t c = 0; c < d; ++c) feats.push_back(parse_number(cols[1 + c], nodes_path, line_no, "feature"));
    const auto s_tok = cols[d + 1];
    if (s_tok != "0" && s_tok != "1") {
      fail_at(nodes_path, line_no, "sensitive value must be 0 or 1, got '" + std::string(s_tok) + "'");
    }
    sensitive.push_back(s_tok == "1" ? 1 : 0);
    targets.push_back(parse_number(cols[d + 2], nodes_path, line_no, "target"));
  }
  const std::size_t n = sensitive.size();
  if (n == 0) throw DataError(nodes_path.string() + ": no nodes");

  std::ifstream edges_in = open_in(edges_path);
  std::set<Edge> seen;
  std::vector<Edge> edges;
  LoadStats local;
  line_no = 0;
  while (std::getline(edges_in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ss{std::string(t)};
    std::string a;
    std::string b;
    std::string extra;
    if (!(ss >> a >> b) || (ss >> extra)) fail_at(edges_path, line_no, "expected 'src dst'");
    const auto ia = index.find(a);
    const auto ib = index.find(b);
    if (ia == index.end()) fail_at(edges_path, line_no, "unknown node id '" + a + "'");
    if (ib == index.end()) fail_at(edges_path, line_no, "unknown node id '" + b + "'");
    if (ia->second == ib->second) {
      ++local.self_loops_dropped;
      continue;
    }
    const Edge e{std::min(ia->second, ib->second), std::max(ia->second, ib->second)};
    if (!seen.insert(e).second) {
      ++local.duplicate_edges_dropped;
      continue;
    }
    edges.push_back(e);
  }
  if (stats != nullptr) *stats = local;
  return Graph(Tensor(n, d, std::move(feats)), std::move(edges), std::move(sensitive), std::move(targets));
}

void write_graph(const Graph& g, const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path) {
  std::ofstream nodes = open_out(nodes_path);
  nodes << "id";
  for (std::size_t c = 0; c < g.feature_dim(); ++c) nodes << ",x" << c;
  nodes << ",sensitive,target\n";
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    nodes << i;
    for (double v : g.features().row(i)) nodes << ',' << format_double(v);
    nodes << ',' << g.sensitive()[i] << ',' << format_double(g.targets()[i]) << '\n';
  }
  if (!nodes) throw DataError("failed writing " + nodes_path.string());

  std::ofstream edges = open_out(edges_path);
  for (auto [a, b] : g.edges()) edges << a << '\t' << b << '\n';
  if (!edges) throw DataError("failed writing " + edges_path.string());
}

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("SyntheticConfig: " + msg); };
  if (n < 10) fail("n must be >= 10");
  if (d == 0) fail("d must be >= 1");
  if (!(p_intra >= 0.0 && p_intra <= 1.0)) fail("p_intra must be in [0, 1]");
  if (!(p_inter >= 0.0 && p_inter <= 1.0)) fail("p_inter must be in [0, 1]");
  if (!(group_fraction >= 0.0 && group_fraction <= 1.0)) fail("group_fraction must be in [0, 1]");
  if (!(noise_std >= 0.0)) fail("noise_std must be >= 0");
  if (!std::isfinite(feature_shift) || !std::isfinite(delta)) fail("feature_shift and delta must be finite");
}

std::vector<double> synthetic_direction(std::size_t d) {
  std::mt19937_64 rng(0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(d);
  for (auto& v : w) v = normal(rng);
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(d);
  double norm = 0.0;
  for (auto& v : w) {
    v -= mean;
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (auto& v : w) v /= norm;
  return w;
}

Graph generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const auto n1 = static_cast<std::size_t>(std::llround(cfg.group_fraction * static_cast<double>(cfg.n)));
  std::vector<int> s(cfg.n, 0);
  std::fill(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n1), 1);
  std::shuffle(s.begin(), s.end(), rng);

  Tensor x(cfg.n, cfg.d);
  for (std::size_t i = 0; i < cfg.n; ++i)
    for (std::size_t c = 0; c < cfg.d; ++c) x(i, c) = normal(rng) + cfg.feature_shift * s[i];

  const auto w = synthetic_direction(cfg.d);
  std::vector<double> y(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    double v = cfg.delta * s[i];
    for (std::size_t c = 0; c < cfg.d; ++c) v += w[c] * x(i, c);
    y[i] = v + cfg.noise_std * normal(rng);
  }

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < cfg.n; ++i)
    for (std::size_t j = i + 1; j < cfg.n; ++j)
      if (unif(rng) < (s[i] == s[j] ? cfg.p_intra : cfg.p_inter)) edges.emplace_back(i, j);

  return Graph(std::move(x), std::move(edges), std::move(s), std::move(y));
}

namespace {

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw DataError(std::string(what) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; });
    if (!ok) throw DataError(std::string(what) + ": unknown key '" + item.key() + "'");
  }
}

void check_version(const json& j, const char* what) {
  if (j.contains("format_version") && j.at("format_version") != kFormatVersion) {
    throw DataError(std::string(what) + ": unsupported format_version " + j.at("format_version").dump());
  }
}

json tensor_to_json(const std::string& name, const Tensor& t) {
  return json{{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"data", t.values()}};
}

}  // namespace

json to_json(const TrainConfig& c) {
  return json{{"format_version", kFormatVersion},
              {"lambda_mmd", c.lambda_mmd},
              {"lambda_dist", c.lambda_dist},
              {"gamma", c.gamma},
              {"weight_floor", c.weight_floor},
              {"epochs", c.epochs},
              {"lr", c.lr},
              {"weight_decay", c.weight_decay},
              {"patience", c.patience},
              {"seed", c.seed},
              {"split_fractions", c.split_fractions},
              {"ablation", std::string(ablation_name(c.ablation))},
              {"hidden", c.hidden},
              {"sample_per_group", c.sample_per_group},
              {"mmd_sigma", c.mmd_sigma},
              {"sinkhorn_iterations", c.sinkhorn_iterations},
              {"sinkhorn_epsilon_scale", c.sinkhorn_epsilon_scale}};
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown(j,
                 {"format_version", "lambda_mmd", "lambda_dist", "gamma", "weight_floor", "epochs", "lr",
                  "weight_decay", "patience", "seed", "split_fractions", "ablation", "hidden", "sample_per_group",
                  "mmd_sigma", "sinkhorn_iterations", "sinkhorn_epsilon_scale"},
                 "train config");
  check_version(j, "train config");
  TrainConfig c;
  read_key(j, "lambda_mmd", c.lambda_mmd);
  read_key(j, "lambda_dist", c.lambda_dist);
  read_key(j, "gamma", c.gamma);
  read_key(j, "weight_floor", c.weight_floor);
  read_key(j, "epochs", c.epochs);
  read_key(j, "lr", c.lr);
  read_key(j, "weight_decay", c.weight_decay);
  read_key(j, "patience", c.patience);
  read_key(j, "seed", c.seed);
  read_key(j, "split_fractions", c.split_fractions);
  read_key(j, "hidden", c.hidden);
  read_key(j, "sample_per_group", c.sample_per_group);
  read_key(j, "mmd_sigma", c.mmd_sigma);
  read_key(j, "sinkhorn_iterations", c.sinkhorn_iterations);
  read_key(j, "sinkhorn_epsilon_scale", c.sinkhorn_epsilon_scale);
  std::string ablation(ablation_name(c.ablation));
  read_key(j, "ablation", ablation);
  try {
    c.ablation = parse_ablation(ablation);
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return c;
}

json to_json(const SyntheticConfig& c) {
  return json{{"format_version", kFormatVersion},
              {"n", c.n},
              {"d", c.d},
              {"p_intra", c.p_intra},
              {"p_inter", c.p_inter},
              {"feature_shift", c.feature_shift},
              {"delta", c.delta},
              {"noise_std", c.noise_std},
              {"group_fraction", c.group_fraction},
              {"seed", c.seed}};
}

SyntheticConfig synthetic_config_from_json(const json& j) {
  reject_unknown(j,
                 {"format_version", "n", "d", "p_intra", "p_inter", "feature_shift", "delta", "noise_std",
                  "group_fraction", "seed"},
                 "synthetic config");
  check_version(j, "synthetic config");
  SyntheticConfig c;
  read_key(j, "n", c.n);
  read_key(j, "d", c.d);
  read_key(j, "p_intra", c.p_intra);
  read_key(j, "p_inter", c.p_inter);
  read_key(j, "feature_shift", c.feature_shift);
  read_key(j, "delta", c.delta);
  read_key(j, "noise_std", c.noise_std);
  read_key(j, "group_fraction", c.group_fraction);
  read_key(j, "seed", c.seed);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return c;
}

json to_json(const MetricsReport& r) {
  return json{{"format_version", kFormatVersion},
              {"split", r.split},
              {"mse", r.mse},
              {"mae", r.mae},
              {"mg", r.mg},
              {"vg", r.vg},
              {"wd", r.wd},
              {"group_sizes", r.group_sizes},
              {"group_means", r.group_means},
              {"group_vars", r.group_vars},
              {"label_mg", r.label_mg},
              {"label_vg", r.label_vg},
              {"label_wd", r.label_wd}};
}

MetricsReport metrics_report_from_json(const json& j) {
  check_version(j, "metrics report");
  MetricsReport r;
  try {
    r.split = j.at("split").get<std::string>();
    r.mse = j.at("mse").get<double>();
    r.mae = j.at("mae").get<double>();
    r.mg = j.at("mg").get<double>();
    r.vg = j.at("vg").get<double>();
    r.wd = j.at("wd").get<double>();
    r.group_sizes = j.at("group_sizes").get<std::array<std::size_t, 2>>();
    r.group_means = j.at("group_means").get<std::array<double, 2>>();
    r.group_vars = j.at("group_vars").get<std::array<double, 2>>();
    r.label_mg = j.at("label_mg").get<double>();
    r.label_vg = j.at("label_vg").get<double>();
    r.label_wd = j.at("label_wd").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("metrics report: ") + e.what());
  }
  return r;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

json to_json(const Checkpoint& ckpt) {
  json tensors = json::array();
  for (const auto& [name, t] : ckpt.params.named()) tensors.push_back(tensor_to_json(name, *t));
  return json{{"format_version", kFormatVersion},
              {"kind", "fnrgnn-checkpoint"},
              {"config", to_json(ckpt.config)},
              {"tensors", std::move(tensors)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  check_version(j, "checkpoint");
  if (!j.contains("kind") || j.at("kind") != "fnrgnn-checkpoint") throw DataError("checkpoint: missing kind marker");
  Checkpoint ckpt;
  ckpt.config = train_config_from_json(j.at("config"));
  std::map<std::string, Tensor> by_name;
  try {
    for (const auto& t : j.at("tensors")) {
      const auto rows = t.at("rows").get<std::size_t>();
      const auto cols = t.at("cols").get<std::size_t>();
      auto data = t.at("data").get<std::vector<double>>();
      if (data.size() != rows * cols) throw DataError("checkpoint: tensor data does not match its shape");
      by_name[t.at("name").get<std::string>()] = Tensor(rows, cols, std::move(data));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  for (auto& [name, slot] : ckpt.params.named()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
    *slot = std::move(it->second);
  }
  try {
    ckpt.params.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) { write_json_file(path, to_json(ckpt)); }

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json_file(path)); }

void write_curve_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& curve) {
  std::ofstream out = open_out(path);
  out << "epoch,total,mse,mmd,dist,val_mse\n";
  for (std::size_t e = 0; e < curve.size(); ++e) {
    const auto& r = curve[e];
    out << e + 1 << ',' << format_double(r.total) << ',' << format_double(r.mse) << ',' << format_double(r.mmd) << ','
        << format_double(r.dist) << ',' << format_double(r.val_mse) << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

void write_ablation_runs_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  std::ofstream out = open_out(path);
  out << "case,seed,status,mse,mae,mg,vg,wd,best_epoch,seconds,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << ablation_name(r.ablation) << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ','
        << format_double(r.test.mse) << ',' << format_double(r.test.mae) << ',' << format_double(r.test.mg) << ','
        << format_double(r.test.vg) << ',' << format_double(r.test.wd) << ',' << r.best_epoch << ','
        << format_double(r.seconds) << ',' << err << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

void write_ablation_summary_csv(const std::filesystem::path& path, const std::vector<AblationSummary>& summary) {
  std::ofstream out = open_out(path);
  out << "case,runs,mse,mae,mg,vg,wd\n";
  for (const auto& s : summary) {
    out << ablation_name(s.ablation) << ',' << s.runs << ',' << format_double(s.mse) << ',' << format_double(s.mae)
        << ',' << format_double(s.mg) << ',' << format_double(s.vg) << ',' << format_double(s.wd) << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace fnr
