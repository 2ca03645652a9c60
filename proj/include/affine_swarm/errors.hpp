#pragma once

#include <stdexcept>
#include <string>

namespace affine_swarm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Points that were supposed to span an n-simplex do not.
class DegenerateSimplexError : public Error {
 public:
  using Error::Error;
};

/// An agent does not lie in the hyperplane spanned by the leaders.
class OffHyperplaneError : public Error {
 public:
  OffHyperplaneError(int agent, double distance)
      : Error("agent " + std::to_string(agent) + " is " + std::to_string(distance) +
              " m off the leaders' hyperplane"),
        agent_(agent) {}
  int agent() const { return agent_; }

 private:
  int agent_;
};

/// A geometric or numeric precondition was violated by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A search (A*, proximity, travel time) found no admissible answer.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Vehicle model left its valid domain (thrust floor, pitch singularity).
class SingularityError : public Error {
 public:
  using Error::Error;
};

}  // namespace affine_swarm
