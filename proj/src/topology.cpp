#include "topopred/topology.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace topopred {

namespace {

bool has_adjacent_inverse(const std::vector<Letter>& letters) {
  for (std::size_t i = 1; i < letters.size(); ++i)
    if (letters[i] == -letters[i - 1]) return true;
  return false;
}

void push_reduced(std::vector<Letter>& stack, Letter letter) {
  if (!stack.empty() && stack.back() == -letter)
    stack.pop_back();
  else
    stack.push_back(letter);
}

}  // namespace

Word::Word(std::vector<Letter> letters) : letters_(std::move(letters)) {
  for (Letter l : letters_)
    if (l == 0) throw std::invalid_argument("word letters must be nonzero");
  reduced_ = !has_adjacent_inverse(letters_);
}

Word::Word(std::initializer_list<Letter> letters) : Word(std::vector<Letter>(letters)) {}

std::string Word::str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < letters_.size(); ++i) {
    if (i) os << ',';
    os << letters_[i];
  }
  os << ')';
  return os.str();
}

std::optional<Letter> crossing_letter(const Point2& start, const Point2& end, const Ray& ray) {
  const double ox = ray.origin.x;
  int sign = 0;
  if (start.x < ox && ox <= end.x)
    sign = +1;
  else if (end.x < ox && ox <= start.x)
    sign = -1;
  else
    return std::nullopt;
  const double t = (ox - start.x) / (end.x - start.x);
  const double y = start.y + t * (end.y - start.y);
  if (y >= ray.origin.y) return sign * ray.obstacle_id;
  return std::nullopt;
}

Word compute_word(const Trajectory& traj, const Environment& env) {
  validate_trajectory(traj);
  std::vector<Letter> letters;
  std::vector<std::pair<double, Letter>> hits;  // (segment parameter, letter)
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    const Point2& a = traj.points[i - 1];
    const Point2& b = traj.points[i];
    hits.clear();
    for (const Ray& ray : env.rays()) {
      if (auto letter = crossing_letter(a, b, ray)) {
        const double t = (ray.origin.x - a.x) / (b.x - a.x);
        hits.emplace_back(t, *letter);
      }
    }
    std::sort(hits.begin(), hits.end());
    for (const auto& [t, letter] : hits) letters.push_back(letter);
  }
  return Word(std::move(letters));
}

Word reduce(const Word& word) {
  if (word.reduced()) return word;
  std::vector<Letter> stack;
  stack.reserve(word.size());
  for (Letter l : word.letters()) push_reduced(stack, l);
  return Word(std::move(stack));
}

Word h_signature(const Trajectory& traj, const Environment& env, const BoundaryCheck& check) {
  validate_trajectory(traj);
  if (check.enabled) {
    const double tol =
        check.tolerance < 0.0 ? 0.01 * env.boundary().extent() : check.tolerance;
    for (const Point2* p : {&traj.points.front(), &traj.points.back()}) {
      if (!env.boundary().contains(*p, tol) ||
          env.boundary().distance_to_border(*p) > tol)
        throw BoundaryViolation("trajectory endpoint is not on the boundary");
    }
  }
  return reduce(compute_word(traj, env));
}

Word partial_h_signature(const Trajectory& prefix, const Environment& env) {
  return reduce(compute_word(prefix, env));
}

bool is_compatible(const Word& h, const Word& p) {
  if (!h.reduced() || !p.reduced())
    throw std::invalid_argument("is_compatible expects reduced words");
  if (p.size() > h.size()) return false;
  return std::equal(p.letters().begin(), p.letters().end(), h.letters().begin());
}

void SignatureAccumulator::add_point(const Point2& p) {
  if (!is_finite(p)) throw Error("non-finite point");
  if (last_) {
    std::vector<std::pair<double, Letter>> hits;
    for (const Ray& ray : env_->rays()) {
      if (auto letter = crossing_letter(*last_, p, ray)) {
        const double t = (ray.origin.x - last_->x) / (p.x - last_->x);
        hits.emplace_back(t, *letter);
      }
    }
    std::sort(hits.begin(), hits.end());
    for (const auto& [t, letter] : hits) push_reduced(stack_, letter);
  }
  last_ = p;
}

}  // namespace topopred
