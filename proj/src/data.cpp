#include "topopred/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "topopred/errors.hpp"
#include "topopred/rng.hpp"

namespace topopred {

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto result = std::from_chars(begin, end, out);
  return result.ec == std::errc() && result.ptr == end && std::isfinite(out);
}

bool parse_ll(std::string_view s, long long& out) {
  s = trim(s);
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto result = std::from_chars(begin, end, out);
  if (result.ec == std::errc() && result.ptr == end) return true;
  double d = 0.0;  // ids sometimes come as "12.0"
  if (!parse_double(s, d) || d != std::floor(d)) return false;
  out = static_cast<long long>(d);
  return true;
}

}  // namespace

CsvParseResult parse_trajectory_csv(const std::string& path, const ColumnMap& columns,
                                    double unit_scale) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open csv file: " + path);
  const int need = std::max({columns.time, columns.id, columns.x, columns.y}) + 1;

  CsvParseResult result;
  bool saw_narrow_row = false;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) < need) {
      saw_narrow_row = true;
      ++result.skipped;
      continue;
    }
    RawRecord rec;
    if (!parse_double(fields[columns.time], rec.time) ||
        !parse_ll(fields[columns.id], rec.person_id) ||
        !parse_double(fields[columns.x], rec.position.x) ||
        !parse_double(fields[columns.y], rec.position.y)) {
      ++result.skipped;
      continue;
    }
    rec.position.x *= unit_scale;
    rec.position.y *= unit_scale;
    result.records.push_back(rec);
  }
  if (result.records.empty()) {
    if (saw_narrow_row) throw MissingColumn("csv rows are missing mapped columns: " + path);
    throw EmptyFile("csv file holds no parseable records: " + path);
  }
  return result;
}

std::vector<Trajectory> assemble_trajectories(std::vector<RawRecord> records,
                                              double gap_threshold_s, int min_points) {
  if (gap_threshold_s <= 0.0) throw std::invalid_argument("gap threshold must be positive");
  std::map<long long, std::vector<RawRecord>> by_person;
  for (RawRecord& rec : records) by_person[rec.person_id].push_back(rec);

  std::vector<Trajectory> out;
  for (auto& [id, recs] : by_person) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const RawRecord& a, const RawRecord& b) { return a.time < b.time; });
    Trajectory current;
    const auto flush = [&]() {
      if (static_cast<int>(current.size()) >= std::max(min_points, 2))
        out.push_back(current);
      current = Trajectory{};
    };
    for (const RawRecord& rec : recs) {
      if (!current.timestamps.empty()) {
        const double gap = rec.time - current.timestamps.back();
        if (gap > gap_threshold_s) flush();
        else if (gap <= 0.0) continue;  // duplicate or non-advancing sample
      }
      current.points.push_back(rec.position);
      current.timestamps.push_back(rec.time);
    }
    flush();
  }
  return out;
}

std::vector<Trajectory> filter_border_crossing(const std::vector<Trajectory>& trajs,
                                               const Environment& env, double tolerance) {
  const double tol =
      tolerance < 0.0 ? 0.01 * env.boundary().extent() : tolerance;
  std::vector<Trajectory> kept;
  for (const Trajectory& traj : trajs) {
    if (traj.size() < 2) continue;
    bool ok = env.boundary().distance_to_border(traj.points.front()) <= tol &&
              env.boundary().contains(traj.points.front(), tol) &&
              env.boundary().distance_to_border(traj.points.back()) <= tol &&
              env.boundary().contains(traj.points.back(), tol);
    for (const Point2& p : traj.points)
      if (!env.boundary().contains(p, tol)) ok = false;
    if (ok) kept.push_back(traj);
  }
  return kept;
}

Trajectory resample_uniform(const Trajectory& traj, int num_timesteps) {
  validate_trajectory(traj);
  if (num_timesteps < 2) throw std::invalid_argument("need at least 2 timesteps");
  const double t0 = traj.timestamps.front();
  const double t1 = traj.timestamps.back();
  Trajectory out;
  out.points.reserve(num_timesteps);
  out.timestamps.reserve(num_timesteps);
  std::size_t seg = 0;
  for (int k = 0; k < num_timesteps; ++k) {
    if (k == 0) {
      out.points.push_back(traj.points.front());
      out.timestamps.push_back(t0);
      continue;
    }
    if (k == num_timesteps - 1) {
      out.points.push_back(traj.points.back());
      out.timestamps.push_back(t1);
      continue;
    }
    const double t = t0 + (t1 - t0) * static_cast<double>(k) /
                              static_cast<double>(num_timesteps - 1);
    while (seg + 2 < traj.size() && traj.timestamps[seg + 1] <= t) ++seg;
    const double ta = traj.timestamps[seg];
    const double tb = traj.timestamps[seg + 1];
    const double alpha = (t - ta) / (tb - ta);
    out.points.push_back(Point2{
        traj.points[seg].x + alpha * (traj.points[seg + 1].x - traj.points[seg].x),
        traj.points[seg].y + alpha * (traj.points[seg + 1].y - traj.points[seg].y)});
    out.timestamps.push_back(t);
  }
  return out;
}

void revalidate_labels(const TrajectoryDataset& ds, const Environment& env) {
  if (ds.trajectories.size() != ds.labels.size())
    throw Error("dataset labels and trajectories differ in length");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Word recomputed = partial_h_signature(ds.trajectories[i], env);
    if (!(recomputed == ds.labels[i]))
      throw Error("dataset label mismatch at index " + std::to_string(i) + ": stored " +
                  ds.labels[i].str() + ", recomputed " + recomputed.str());
  }
}

GridGraph::GridGraph(const Environment& env, double resolution, double obstacle_radius) {
  if (resolution <= 0.0) throw std::invalid_argument("grid resolution must be positive");
  const BoundingBox& box = env.boundary();
  // Spacing is adjusted so the lattice spans the boundary exactly and
  // boundary nodes sit on the border itself.
  nx_ = std::max(2, static_cast<int>(std::lround(box.width() / resolution)) + 1);
  ny_ = std::max(2, static_cast<int>(std::lround(box.height() / resolution)) + 1);
  x0_ = box.lo.x;
  y0_ = box.lo.y;
  dx_ = box.width() / (nx_ - 1);
  dy_ = box.height() / (ny_ - 1);
  blocked_.assign(static_cast<std::size_t>(nx_) * ny_, false);
  for (int iy = 0; iy < ny_; ++iy) {
    for (int ix = 0; ix < nx_; ++ix) {
      const Point2 p = node_point(index(ix, iy));
      for (const Obstacle& obs : env.obstacles()) {
        const bool inside = obs.polygon.empty()
                                ? distance(p, obs.center) <= obstacle_radius
                                : point_in_polygon(p, obs.polygon);
        if (inside) {
          blocked_[index(ix, iy)] = true;
          break;
        }
      }
    }
  }
}

Point2 GridGraph::node_point(int idx) const {
  const int iy = idx / nx_;
  const int ix = idx % nx_;
  return Point2{x0_ + ix * dx_, y0_ + iy * dy_};
}

std::vector<std::pair<int, double>> GridGraph::neighbors(int idx) const {
  const int iy = idx / nx_;
  const int ix = idx % nx_;
  std::vector<std::pair<int, double>> out;
  out.reserve(8);
  for (int oy = -1; oy <= 1; ++oy) {
    for (int ox = -1; ox <= 1; ++ox) {
      if (ox == 0 && oy == 0) continue;
      const int jx = ix + ox;
      const int jy = iy + oy;
      if (jx < 0 || jx >= nx_ || jy < 0 || jy >= ny_) continue;
      const int j = index(jx, jy);
      if (blocked_[j]) continue;
      out.emplace_back(j, std::hypot(ox * dx_, oy * dy_));
    }
  }
  return out;
}

std::vector<int> GridGraph::shortest_path(int start, int goal) const {
  if (blocked_[start] || blocked_[goal]) return {};
  const int n = num_nodes();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  using Entry = std::pair<double, int>;  // ties fall to the smaller node index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  dist[start] = 0.0;
  queue.emplace(0.0, start);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    if (u == goal) break;
    for (const auto& [v, w] : neighbors(u)) {
      const double nd = d + w;
      if (nd < dist[v]) {
        dist[v] = nd;
        parent[v] = u;
        queue.emplace(nd, v);
      }
    }
  }
  if (!std::isfinite(dist[goal])) return {};
  std::vector<int> path;
  for (int u = goal; u != -1; u = parent[u]) path.push_back(u);
  std::reverse(path.begin(), path.end());
  return path;
}

double GridGraph::path_cost(const std::vector<int>& path) const {
  double cost = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i)
    cost += distance(node_point(path[i - 1]), node_point(path[i]));
  return cost;
}

std::vector<int> GridGraph::left_boundary_nodes() const {
  std::vector<int> out;
  for (int iy = 0; iy < ny_; ++iy)
    if (!blocked_[index(0, iy)]) out.push_back(index(0, iy));
  return out;
}

std::vector<int> GridGraph::other_boundary_nodes() const {
  std::vector<int> out;
  for (int iy = 0; iy < ny_; ++iy)
    if (!blocked_[index(nx_ - 1, iy)]) out.push_back(index(nx_ - 1, iy));
  for (int ix = 1; ix < nx_ - 1; ++ix) {
    if (!blocked_[index(ix, 0)]) out.push_back(index(ix, 0));
    if (!blocked_[index(ix, ny_ - 1)]) out.push_back(index(ix, ny_ - 1));
  }
  return out;
}

namespace {

bool inside_any_obstacle(const Point2& p, const Environment& env, double radius) {
  for (const Obstacle& obs : env.obstacles()) {
    const bool inside = obs.polygon.empty() ? distance(p, obs.center) <= radius
                                            : point_in_polygon(p, obs.polygon);
    if (inside) return true;
  }
  return false;
}

}  // namespace

TrajectoryDataset generate_synthetic(const Environment& env, int num_trajs,
                                     std::uint64_t seed, const SyntheticOptions& opts) {
  if (num_trajs < 0) throw std::invalid_argument("trajectory count must be nonnegative");
  const GridGraph grid(env, opts.grid_resolution, opts.obstacle_radius);
  const std::vector<int> starts = grid.left_boundary_nodes();
  const std::vector<int> goals = grid.other_boundary_nodes();
  if (num_trajs > 0 && (starts.empty() || goals.empty()))
    throw Disconnected("no free boundary nodes to sample endpoints from");
  const double noise_std =
      opts.noise_std < 0.0 ? 0.05 * opts.grid_resolution : opts.noise_std;

  Rng rng(seed);
  TrajectoryDataset ds;
  for (int i = 0; i < num_trajs; ++i) {
    std::vector<int> path;
    for (int attempt = 0; attempt < opts.max_pair_retries && path.empty(); ++attempt) {
      const int start = starts[rng.uniform_index(starts.size())];
      const int goal = goals[rng.uniform_index(goals.size())];
      if (start == goal) continue;
      path = grid.shortest_path(start, goal);
    }
    if (path.empty())
      throw Disconnected("could not find a connected start/goal pair");

    Trajectory traj;
    traj.points.reserve(path.size());
    for (int idx : path) traj.points.push_back(grid.node_point(idx));
    // Jitter interior waypoints; a draw landing inside an obstacle is
    // rejected and retried so the route stays feasible.
    if (noise_std > 0.0) {
      for (std::size_t j = 1; j + 1 < traj.points.size(); ++j) {
        for (int attempt = 0; attempt < opts.max_noise_retries; ++attempt) {
          const Point2 moved{traj.points[j].x + rng.normal(0.0, noise_std),
                             traj.points[j].y + rng.normal(0.0, noise_std)};
          if (!env.boundary().contains(moved)) continue;
          if (inside_any_obstacle(moved, env, opts.obstacle_radius)) continue;
          traj.points[j] = moved;
          break;
        }
      }
    }
    double t = 0.0;
    traj.timestamps.push_back(0.0);
    for (std::size_t j = 1; j < traj.points.size(); ++j) {
      const double step = distance(traj.points[j - 1], traj.points[j]) / opts.speed;
      t += std::max(step, 1e-9);
      traj.timestamps.push_back(t);
    }
    ds.trajectories.push_back(std::move(traj));
    ds.labels.push_back(h_signature(ds.trajectories.back(), env));
    ds.ids.push_back(i);
  }
  return ds;
}

std::pair<TrajectoryDataset, TrajectoryDataset> split_dataset(const TrajectoryDataset& ds,
                                                              double train_fraction,
                                                              std::uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)  // Fisher-Yates
    std::swap(order[i - 1], order[rng.uniform_index(i)]);

  const std::size_t train_count =
      static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(ds.size())));
  TrajectoryDataset train, test;
  for (std::size_t i = 0; i < order.size(); ++i) {
    TrajectoryDataset& target = i < train_count ? train : test;
    target.trajectories.push_back(ds.trajectories[order[i]]);
    target.labels.push_back(ds.labels[order[i]]);
    target.ids.push_back(ds.ids.empty() ? static_cast<long long>(order[i])
                                        : ds.ids[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

std::string dataset_to_jsonl(const TrajectoryDataset& ds) {
  std::ostringstream out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    nlohmann::json j;
    j["id"] = ds.ids.empty() ? static_cast<long long>(i) : ds.ids[i];
    j["t"] = ds.trajectories[i].timestamps;
    nlohmann::json xs = nlohmann::json::array();
    nlohmann::json ys = nlohmann::json::array();
    for (const Point2& p : ds.trajectories[i].points) {
      xs.push_back(p.x);
      ys.push_back(p.y);
    }
    j["x"] = std::move(xs);
    j["y"] = std::move(ys);
    j["h"] = ds.labels[i].letters();
    out << j.dump() << "\n";
  }
  return out.str();
}

TrajectoryDataset dataset_from_jsonl(const std::string& text) {
  TrajectoryDataset ds;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    Trajectory traj;
    traj.timestamps = j.at("t").get<std::vector<double>>();
    const auto xs = j.at("x").get<std::vector<double>>();
    const auto ys = j.at("y").get<std::vector<double>>();
    if (xs.size() != ys.size() || xs.size() != traj.timestamps.size())
      throw Error("dataset row has inconsistent array lengths");
    traj.points.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) traj.points.push_back(Point2{xs[i], ys[i]});
    ds.trajectories.push_back(std::move(traj));
    ds.labels.push_back(Word(j.at("h").get<std::vector<Letter>>()));
    ds.ids.push_back(j.at("id").get<long long>());
  }
  return ds;
}

void save_dataset(const TrajectoryDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file: " + path);
  out << dataset_to_jsonl(ds);
}

TrajectoryDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return dataset_from_jsonl(buf.str());
}

}  // namespace topopred
