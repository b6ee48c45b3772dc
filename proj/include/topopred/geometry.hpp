#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "topopred/errors.hpp"

namespace topopred {

/// Planar position in meters.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

bool is_finite(const Point2& p);
double distance(const Point2& a, const Point2& b);

/// Axis-aligned rectangle given by its min/max corners.
struct BoundingBox {
  Point2 lo;
  Point2 hi;

  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  double extent() const { return width() > height() ? width() : height(); }
  bool contains(const Point2& p, double slack = 0.0) const;
  /// Distance to the nearest of the four edges (meaningful for interior points).
  double distance_to_border(const Point2& p) const;
};

struct Obstacle {
  int id = 0;
  Point2 center;
  std::vector<Point2> polygon;  // optional outline, empty if not given
};

/// Vertical ray anchored at an obstacle center, pointing in +y.
struct Ray {
  int obstacle_id = 0;
  Point2 origin;
};

/// Rectangular domain with point-centered obstacles. Obstacle ids are
/// 1..n in list order, centers lie strictly inside the boundary, and
/// center x-coordinates are pairwise distinct so the rays never intersect.
class Environment {
 public:
  Environment(BoundingBox boundary, std::vector<Obstacle> obstacles);

  const BoundingBox& boundary() const { return boundary_; }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  const std::vector<Ray>& rays() const { return rays_; }
  std::size_t num_obstacles() const { return obstacles_.size(); }

 private:
  BoundingBox boundary_;
  std::vector<Obstacle> obstacles_;
  std::vector<Ray> rays_;
};

/// Timestamped polyline. Points and timestamps have equal length (>= 2)
/// and timestamps increase strictly.
struct Trajectory {
  std::vector<Point2> points;
  std::vector<double> timestamps;

  std::size_t size() const { return points.size(); }
};

void validate_trajectory(const Trajectory& traj);
Trajectory reversed(const Trajectory& traj);

bool point_in_polygon(const Point2& p, const std::vector<Point2>& polygon);

Environment environment_from_json(const std::string& text);
std::string environment_to_json(const Environment& env);
Environment load_environment(const std::string& path);
void save_environment(const Environment& env, const std::string& path);

}  // namespace topopred
