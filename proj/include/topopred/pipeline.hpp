#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topopred/eval.hpp"

namespace topopred {

/// Full pipeline configuration. Resolution order when running the CLI:
/// command-line flags, then TOPOPRED_* environment variables, then the
/// config file, then these defaults.
struct Config {
  std::string environment_path;
  std::string data_source = "synthetic";  // "synthetic" or a trajectory csv path
  std::string output_dir = "out";
  int timesteps = 80;          // T
  double epsilon = 0.01;       // PST growth threshold
  int max_order = 5;           // L
  double sigma_y = 0.1;        // measurement noise std, meters
  std::string components = "bic";  // "bic" or "fixed:<k>"
  double reg = 0.0;            // covariance ridge, <= 0 selects the auto scale
  std::uint64_t seed = 1;
  std::vector<double> fractions = {0.0125, 0.15, 0.42, 0.7, 0.975, 1.0};
  int num_trajectories = 1000;
  double grid_resolution = 0.25;
  double obstacle_radius = 0.5;
  double noise_std = -1.0;     // waypoint jitter, < 0 selects 0.05 * resolution
  double train_fraction = 0.8;
  // csv ingestion
  int csv_time_col = 0, csv_id_col = 1, csv_x_col = 2, csv_y_col = 3;
  double unit_scale = 0.001;   // millimeter logs by default
  double gap_threshold_s = 5.0;
  int min_points = 10;
  double border_tolerance = -1.0;  // < 0: 1% of the boundary extent
  // training details
  double em_tol = 1e-7;
  int em_max_iter = 200;
  bool write_svg = true;
};

Config parse_config_file(const std::string& path);
void apply_env_overrides(Config& config);
std::string config_to_json(const Config& config);

ComponentsPolicy components_policy(const Config& config);

/// Writes <output>/dataset.jsonl and a manifest. The dataset is either
/// generated synthetically or ingested from a trajectory csv, filtered to
/// border-crossing trajectories and labeled.
int cmd_generate(const Config& config);

/// Trains the sequence model, the per-class mixtures and the flat
/// baseline with a matched component total; writes three model files and
/// a manifest.
int cmd_train(const Config& config);

/// Conditions the trained models on a prefix (dataset-row JSON with
/// points already aligned to timesteps 1..len) and writes the class
/// posterior plus the conditioned mixture.
int cmd_predict(const Config& config, const std::string& prefix_path,
                const std::string& output_path);

/// Runs the observation-fraction sweep on the held-out split and writes
/// per-trajectory and aggregate CSVs plus an optional SVG chart.
int cmd_eval(const Config& config);

/// Shared by cmd_train and tests: trains all three models on a dataset.
TrainedModels train_models(const Config& config, const Environment& env,
                           const TrajectoryDataset& train);

}  // namespace topopred
