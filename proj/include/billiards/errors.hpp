#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace billiards {

/// Base class for numerical failures raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::optional<int> index = std::nullopt)
      : std::runtime_error(what), index_(index) {}

  /// Position along an orbit (bounce or vertex index) where the failure happened, if known.
  std::optional<int> index() const { return index_; }
  void set_index(int index) { index_ = index; }

  virtual const char* kind() const { return "Error"; }

 private:
  std::optional<int> index_;
};

/// Chord too close to the tangent plane to be resolved reliably.
class NearTangentRay : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "NearTangentRay"; }
};

class DegenerateChord : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "DegenerateChord"; }
};

/// Mixed second derivative of the chord length lost invertibility.
class TwistFailure : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "TwistFailure"; }
};

/// Three points that do not satisfy the reflection law at the middle one.
class NotAnOrbit : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "NotAnOrbit"; }
};

class DegenerateSurfacePoint : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "DegenerateSurfacePoint"; }
};

}  // namespace billiards
