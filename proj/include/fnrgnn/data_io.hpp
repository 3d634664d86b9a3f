#pragma once

// File formats and the synthetic biased-graph generator.
//
// nodes CSV   header `id,<feature columns...>,sensitive,target`; one row per
//             node. Ids are arbitrary tokens; node index = row order.
// edges TSV   one `src dst` pair per line (tabs or spaces), ids as in the
//             nodes file. Blank lines and lines starting with '#' are skipped.
// JSON        every document carries "format_version" (currently 1).

#include "fnrgnn/graph.hpp"
#include "fnrgnn/metrics.hpp"
#include "fnrgnn/model.hpp"
#include "fnrgnn/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace fnr {

inline constexpr int kFormatVersion = 1;

/// Malformed input file or document. Messages carry path and line where known.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadStats {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicate_edges_dropped = 0;
};

Graph load_graph(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                 LoadStats* stats = nullptr);

// Writes ids 0..n-1 and shortest round-trip decimal values.
void write_graph(const Graph& g, const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path);

struct SyntheticConfig {
  std::size_t n = 400;
  std::size_t d = 8;
  double p_intra = 0.05;
  double p_inter = 0.01;
  double feature_shift = 1.0;
  double delta = 1.0;
  double noise_std = 0.1;
  double group_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Two-block SBM. x_i ~ N(shift * s_i * 1, I), y_i = w.x_i + delta * s_i + N(0, noise_std^2)
// where w is a fixed unit-norm, zero-sum direction (so the feature shift does
// not move the group label means; delta alone sets the label gap).
Graph generate_synthetic(const SyntheticConfig& cfg);

// The fixed regression direction used by generate_synthetic for dimension d.
std::vector<double> synthetic_direction(std::size_t d);

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys and invalid values throw DataError.
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SyntheticConfig& cfg);
SyntheticConfig synthetic_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

// Checkpoint = training config + named parameter tensors.
struct Checkpoint {
  TrainConfig config;
  ModelParams params;
};

nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// epoch,total,mse,mmd,dist,val_mse
void write_curve_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& curve);

// Per-run rows: case,seed,status,mse,mae,mg,vg,wd,best_epoch,seconds,error
void write_ablation_runs_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);
// Per-case means: case,runs,mse,mae,mg,vg,wd
void write_ablation_summary_csv(const std::filesystem::path& path, const std::vector<AblationSummary>& summary);

// Shortest decimal that parses back to the same double.
std::string format_double(double v);

}  // namespace fnr
