#include "topopred/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace topopred {

bool is_finite(const Point2& p) { return std::isfinite(p.x) && std::isfinite(p.y); }

double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

bool BoundingBox::contains(const Point2& p, double slack) const {
  return p.x >= lo.x - slack && p.x <= hi.x + slack &&
         p.y >= lo.y - slack && p.y <= hi.y + slack;
}

double BoundingBox::distance_to_border(const Point2& p) const {
  const double dx = std::min(std::abs(p.x - lo.x), std::abs(hi.x - p.x));
  const double dy = std::min(std::abs(p.y - lo.y), std::abs(hi.y - p.y));
  return std::min(dx, dy);
}

Environment::Environment(BoundingBox boundary, std::vector<Obstacle> obstacles)
    : boundary_(boundary), obstacles_(std::move(obstacles)) {
  if (!is_finite(boundary_.lo) || !is_finite(boundary_.hi))
    throw InvalidEnvironment("boundary corners must be finite");
  if (boundary_.width() <= 0.0 || boundary_.height() <= 0.0)
    throw InvalidEnvironment("boundary must have positive width and height");
  for (std::size_t i = 0; i < obstacles_.size(); ++i) {
    const Obstacle& obs = obstacles_[i];
    if (obs.id != static_cast<int>(i) + 1)
      throw InvalidEnvironment("obstacle ids must be 1..n in list order");
    if (!is_finite(obs.center))
      throw InvalidEnvironment("obstacle center must be finite");
    if (obs.center.x <= boundary_.lo.x || obs.center.x >= boundary_.hi.x ||
        obs.center.y <= boundary_.lo.y || obs.center.y >= boundary_.hi.y)
      throw InvalidEnvironment("obstacle centers must lie strictly inside the boundary");
    if (!obs.polygon.empty() && obs.polygon.size() < 3)
      throw InvalidEnvironment("obstacle polygon needs at least 3 vertices");
    for (const Point2& v : obs.polygon)
      if (!is_finite(v)) throw InvalidEnvironment("obstacle polygon vertex must be finite");
  }
  for (std::size_t i = 0; i < obstacles_.size(); ++i)
    for (std::size_t j = i + 1; j < obstacles_.size(); ++j)
      if (obstacles_[i].center.x == obstacles_[j].center.x)
        throw InvalidEnvironment(
            "obstacle centers share an x-coordinate; rays would intersect");
  rays_.reserve(obstacles_.size());
  for (const Obstacle& obs : obstacles_) rays_.push_back(Ray{obs.id, obs.center});
}

void validate_trajectory(const Trajectory& traj) {
  if (traj.points.size() != traj.timestamps.size())
    throw Error("trajectory points and timestamps differ in length");
  if (traj.points.size() < 2) throw Error("trajectory needs at least 2 points");
  for (const Point2& p : traj.points)
    if (!is_finite(p)) throw Error("trajectory contains non-finite point");
  for (std::size_t i = 1; i < traj.timestamps.size(); ++i)
    if (!(traj.timestamps[i] > traj.timestamps[i - 1]))
      throw Error("trajectory timestamps must increase strictly");
}

Trajectory reversed(const Trajectory& traj) {
  Trajectory out;
  out.points.assign(traj.points.rbegin(), traj.points.rend());
  const double t0 = traj.timestamps.front();
  const double t1 = traj.timestamps.back();
  out.timestamps.reserve(traj.timestamps.size());
  for (auto it = traj.timestamps.rbegin(); it != traj.timestamps.rend(); ++it)
    out.timestamps.push_back(t0 + (t1 - *it));
  return out;
}

// Even-odd rule; points on the outline count as inside often enough for
// our blocking tests, exactness there does not matter.
bool point_in_polygon(const Point2& p, const std::vector<Point2>& polygon) {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

namespace {

nlohmann::json point_to_json(const Point2& p) { return nlohmann::json::array({p.x, p.y}); }

Point2 point_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw Error("expected [x, y] pair");
  return Point2{j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Environment environment_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  BoundingBox box;
  box.lo = point_from_json(j.at("boundary").at("min"));
  box.hi = point_from_json(j.at("boundary").at("max"));
  std::vector<Obstacle> obstacles;
  for (const auto& jo : j.at("obstacles")) {
    Obstacle obs;
    obs.id = jo.at("id").get<int>();
    obs.center = point_from_json(jo.at("center"));
    if (jo.contains("polygon"))
      for (const auto& jv : jo.at("polygon")) obs.polygon.push_back(point_from_json(jv));
    obstacles.push_back(std::move(obs));
  }
  return Environment(box, std::move(obstacles));
}

std::string environment_to_json(const Environment& env) {
  nlohmann::json j;
  j["boundary"]["min"] = point_to_json(env.boundary().lo);
  j["boundary"]["max"] = point_to_json(env.boundary().hi);
  j["obstacles"] = nlohmann::json::array();
  for (const Obstacle& obs : env.obstacles()) {
    nlohmann::json jo;
    jo["id"] = obs.id;
    jo["center"] = point_to_json(obs.center);
    if (!obs.polygon.empty()) {
      jo["polygon"] = nlohmann::json::array();
      for (const Point2& v : obs.polygon) jo["polygon"].push_back(point_to_json(v));
    }
    j["obstacles"].push_back(std::move(jo));
  }
  return j.dump(2) + "\n";
}

Environment load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open environment file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return environment_from_json(buf.str());
}

void save_environment(const Environment& env, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write environment file: " + path);
  out << environment_to_json(env);
}

}  // namespace topopred
