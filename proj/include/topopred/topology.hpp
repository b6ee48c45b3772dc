#pragma once

#include <compare>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "topopred/geometry.hpp"

namespace topopred {

/// Signed obstacle index. Positive: the ray was crossed left to right,
/// negative: right to left. Never zero.
using Letter = int;

/// Sequence of crossing letters. A word is reduced when no adjacent
/// pair (a, -a) remains; reduced words identify homotopy classes.
class Word {
 public:
  Word() = default;
  explicit Word(std::vector<Letter> letters);
  Word(std::initializer_list<Letter> letters);

  const std::vector<Letter>& letters() const { return letters_; }
  bool reduced() const { return reduced_; }
  bool empty() const { return letters_.empty(); }
  std::size_t size() const { return letters_.size(); }

  friend bool operator==(const Word& a, const Word& b) { return a.letters_ == b.letters_; }
  friend std::strong_ordering operator<=>(const Word& a, const Word& b) {
    return a.letters_ <=> b.letters_;
  }

  std::string str() const;  // "(1,-2)"

 private:
  std::vector<Letter> letters_;
  bool reduced_ = true;  // derived from letters_, cached
};

/// Letter produced by one segment against one ray, if any. A crossing is
/// counted when the ray's x-coordinate lies in the half-open interval
/// (start.x, end.x] (or mirrored) and the segment passes at or above the
/// ray origin. The half-open convention keeps a vertex exactly on the ray
/// from being counted twice by its two incident segments.
std::optional<Letter> crossing_letter(const Point2& start, const Point2& end, const Ray& ray);

/// Unreduced crossing word of the whole polyline, letters in path order.
/// Multiple crossings within one segment are ordered by the segment
/// parameter of each intersection.
Word compute_word(const Trajectory& traj, const Environment& env);

/// Free reduction: cancel adjacent (a, -a) pairs until none remain.
/// Idempotent and independent of cancellation order.
Word reduce(const Word& word);

struct BoundaryCheck {
  bool enabled = true;
  double tolerance = -1.0;  // < 0: 1% of the larger boundary extent
};

/// Reduced crossing word of a boundary-to-boundary trajectory.
/// Throws BoundaryViolation when an endpoint misses the boundary and the
/// check is enabled.
Word h_signature(const Trajectory& traj, const Environment& env,
                 const BoundaryCheck& check = {});

/// Reduced crossing word of an incomplete trajectory. No boundary
/// requirement; a predictor of the final class, not an identifier.
Word partial_h_signature(const Trajectory& prefix, const Environment& env);

/// True iff p is a literal prefix of h. Both words must be reduced.
bool is_compatible(const Word& h, const Word& p);

/// Incremental partial h-signature: feed points as they arrive and read
/// the reduced word at any time. Equivalent to recomputing from scratch.
class SignatureAccumulator {
 public:
  explicit SignatureAccumulator(const Environment& env) : env_(&env) {}

  void add_point(const Point2& p);
  Word word() const { return Word(stack_); }

 private:
  const Environment* env_;
  std::optional<Point2> last_;
  std::vector<Letter> stack_;
};

}  // namespace topopred
