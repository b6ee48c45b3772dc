#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "topopred/topology.hpp"

namespace topopred {

struct RawRecord {
  double time = 0.0;  // seconds
  long long person_id = 0;
  Point2 position;    // meters
};

/// Zero-based column indices of the time, person id, x and y fields.
struct ColumnMap {
  int time = 0;
  int id = 1;
  int x = 2;
  int y = 3;
};

struct CsvParseResult {
  std::vector<RawRecord> records;
  long skipped = 0;  // rows that failed numeric parsing
};

/// Reads trajectory records in file order. unit_scale converts source
/// position units to meters (1e-3 for millimeter logs).
CsvParseResult parse_trajectory_csv(const std::string& path, const ColumnMap& columns,
                                    double unit_scale);

/// Groups records by person id, sorts by time, splits where consecutive
/// samples are more than gap_threshold_s apart, and drops pieces shorter
/// than min_points.
std::vector<Trajectory> assemble_trajectories(std::vector<RawRecord> records,
                                              double gap_threshold_s, int min_points);

/// Keeps trajectories that start and end within tolerance of the boundary
/// and stay inside it elsewhere. tolerance < 0 means 1% of the extent.
std::vector<Trajectory> filter_border_crossing(const std::vector<Trajectory>& trajs,
                                               const Environment& env, double tolerance);

/// Linear interpolation at num_timesteps uniformly spaced times across the
/// trajectory's span; endpoints are preserved exactly.
Trajectory resample_uniform(const Trajectory& traj, int num_timesteps);

struct TrajectoryDataset {
  std::vector<Trajectory> trajectories;
  std::vector<Word> labels;  // full h-signatures, parallel to trajectories
  std::vector<long long> ids;

  std::size_t size() const { return trajectories.size(); }
};

/// Recomputes every label and throws if any disagrees.
void revalidate_labels(const TrajectoryDataset& ds, const Environment& env);

/// Free-space lattice spanning the boundary exactly, 8-connected with
/// Euclidean edge weights. Nodes inside an obstacle (its polygon when
/// given, otherwise a disc around the center) are blocked.
class GridGraph {
 public:
  GridGraph(const Environment& env, double resolution, double obstacle_radius);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int index(int ix, int iy) const { return iy * nx_ + ix; }
  Point2 node_point(int idx) const;
  bool blocked(int idx) const { return blocked_[idx]; }
  int num_nodes() const { return nx_ * ny_; }

  std::vector<std::pair<int, double>> neighbors(int idx) const;

  /// Shortest path as node indices, empty when disconnected. Equal-cost
  /// ties are broken by smaller node index for determinism.
  std::vector<int> shortest_path(int start, int goal) const;
  double path_cost(const std::vector<int>& path) const;

  std::vector<int> left_boundary_nodes() const;
  std::vector<int> other_boundary_nodes() const;

 private:
  int nx_ = 0, ny_ = 0;
  double x0_ = 0, y0_ = 0, dx_ = 0, dy_ = 0;
  std::vector<bool> blocked_;
};

struct SyntheticOptions {
  double grid_resolution = 0.25;  // meters
  double obstacle_radius = 0.5;   // used when an obstacle has no polygon
  double noise_std = -1.0;        // < 0: 0.05 * grid_resolution
  double speed = 1.0;             // m/s, sets timestamps from arclength
  int max_pair_retries = 50;
  int max_noise_retries = 20;
};

/// Shortest lattice paths from random left-boundary nodes to random nodes
/// on the other boundaries, with Gaussian waypoint jitter that is rejected
/// whenever it would enter an obstacle. Labels are computed from the final
/// geometry. Deterministic for a fixed seed.
TrajectoryDataset generate_synthetic(const Environment& env, int num_trajs,
                                     std::uint64_t seed, const SyntheticOptions& opts = {});

std::pair<TrajectoryDataset, TrajectoryDataset> split_dataset(const TrajectoryDataset& ds,
                                                              double train_fraction,
                                                              std::uint64_t seed);

std::string dataset_to_jsonl(const TrajectoryDataset& ds);
TrajectoryDataset dataset_from_jsonl(const std::string& text);
void save_dataset(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

}  // namespace topopred
