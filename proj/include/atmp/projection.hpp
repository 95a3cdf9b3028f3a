#pragma once

#include "atmp/types.hpp"

namespace atmp {

struct ProjectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotProjectable : ProjectionError {
  explicit NotProjectable(const std::string& reason)
      : ProjectionError("not projectable: " + reason) {}
};
struct NotMergeable : ProjectionError {
  explicit NotMergeable(const std::string& reason)
      : ProjectionError("not mergeable: " + reason) {}
};
struct NotQueueCoherent : ProjectionError {
  explicit NotQueueCoherent(const std::string& reason)
      : ProjectionError("not queue-coherent: " + reason) {}
};

LocalPtr project(const GlobalPtr& g, const Role& p);
LocalPtr merge(const LocalPtr& a, const LocalPtr& b);
QueueType queueEnvOf(const GlobalPtr& g, const Role& p);

}  // namespace atmp
