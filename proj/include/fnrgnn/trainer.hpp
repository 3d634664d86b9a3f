#pragma once

#include "fnrgnn/fairness_losses.hpp"
#include "fnrgnn/graph.hpp"
#include "fnrgnn/metrics.hpp"
#include "fnrgnn/model.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fnr {

enum class Ablation {
  full,            // reweighting + MMD + Sinkhorn/moment
  no_reweight,     // plain GCN adjacency
  no_mmd,          // lambda_mmd forced to 0
  mean_only_dist,  // L_dist reduced to the mean gap
  vanilla,         // plain adjacency, both lambdas forced to 0
};

std::string_view ablation_name(Ablation a);
// Throws std::invalid_argument for unknown names.
Ablation parse_ablation(std::string_view name);

struct TrainConfig {
  double lambda_mmd = 0.5;
  double lambda_dist = 0.5;
  double gamma = 1.0;
  double weight_floor = 1e-3;
  std::size_t epochs = 500;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  std::array<double, 3> split_fractions{0.6, 0.2, 0.2};
  Ablation ablation = Ablation::full;
  std::size_t hidden = 64;
  std::size_t sample_per_group = 500;
  // 0 selects the median heuristic.
  double mmd_sigma = 0.0;
  std::size_t sinkhorn_iterations = 50;
  // Sinkhorn epsilon = scale * Var(y_train).
  double sinkhorn_epsilon_scale = 0.05;

  // Throws std::invalid_argument on the first violated constraint.
  void validate() const;
  // Lambdas after applying the ablation case.
  double effective_lambda_mmd() const;
  double effective_lambda_dist() const;
  bool uses_reweighting() const;
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Per-group shuffled split; every split receives at least one node of each
// group. Throws std::invalid_argument otherwise, or when n < 10.
Splits split_nodes(const Graph& g, const std::array<double, 3>& fractions, std::uint64_t seed);

struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> std;  // 0 marks a constant column

  // Column z-score; constant columns become 0.
  Tensor apply(const Tensor& x) const;
};

FeatureScaler fit_scaler(const Tensor& features, std::span<const std::size_t> rows);

/// Everything derived deterministically from (graph, config) before training.
struct PreparedData {
  Graph graph;  // standardized features
  Splits splits;
  ReweightedAdjacency adjacency;
  ReweightStats reweight_stats;
  double sinkhorn_epsilon = 0.0;
};

PreparedData prepare(const Graph& raw, const TrainConfig& cfg);

struct EpochRecord {
  double total = 0.0;
  double mse = 0.0;
  double mmd = 0.0;
  double dist = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;  // 1-based
  MetricsReport train;
  MetricsReport val;
  MetricsReport test;
  double seconds = 0.0;
};

/// Thrown when the total loss becomes non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TrainResult train(const Graph& g, const TrainConfig& cfg);
// Same, starting from `initial` instead of init_params. Shapes must match the
// graph's feature dimension and cfg.hidden.
TrainResult train(const Graph& g, const TrainConfig& cfg, const ModelParams& initial);

// Independent random streams of one run, all derived from TrainConfig::seed.
enum class SeedStream : std::uint64_t { split = 1, init = 2, sample = 3 };
std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream);

struct Evaluation {
  MetricsReport train;
  MetricsReport val;
  MetricsReport test;
};

// Recomputes all split reports for trained parameters.
Evaluation evaluate(const Graph& g, const TrainConfig& cfg, const ModelParams& params);

struct AblationRow {
  Ablation ablation = Ablation::full;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricsReport test;
  std::size_t best_epoch = 0;
  double seconds = 0.0;
};

struct AblationSummary {
  Ablation ablation = Ablation::full;
  std::size_t runs = 0;
  double mse = 0.0;
  double mae = 0.0;
  double mg = 0.0;
  double vg = 0.0;
  double wd = 0.0;
};

inline constexpr std::array<Ablation, 5> kAllAblations{Ablation::vanilla, Ablation::no_reweight, Ablation::no_mmd,
                                                       Ablation::mean_only_dist, Ablation::full};

// Every case x seeds (base seed, base seed + 1, ...). Failed runs are recorded,
// not rethrown. `jobs` > 1 runs cases on a worker pool.
std::vector<AblationRow> run_ablation_suite(const Graph& g, const TrainConfig& base, std::size_t num_seeds = 5,
                                            std::size_t jobs = 1);

// Mean test metrics per case over successful runs, in kAllAblations order.
std::vector<AblationSummary> summarize_ablation(const std::vector<AblationRow>& rows);

}  // namespace fnr
