#pragma once

#include <stdexcept>

namespace topopred {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidEnvironment : public Error { public: using Error::Error; };
class BoundaryViolation : public Error { public: using Error::Error; };
class EmptyCorpus : public Error { public: using Error::Error; };
class DegenerateData : public Error { public: using Error::Error; };
class SingularCovariance : public Error { public: using Error::Error; };
class NumericalFailure : public Error { public: using Error::Error; };
class IndexMismatch : public Error { public: using Error::Error; };
class MissingColumn : public Error { public: using Error::Error; };
class EmptyFile : public Error { public: using Error::Error; };
class Disconnected : public Error { public: using Error::Error; };

}  // namespace topopred
