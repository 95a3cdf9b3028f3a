#pragma once

#include "atmp/calculus.hpp"
#include "atmp/projection.hpp"

namespace atmp {

// Size limits for random generation. Constants are drawn from {0..maxConst};
// windows are generated feasible by construction.
struct GenLimits {
  int roles = 3;
  int depth = 3;
  int branches = 2;
  int maxConst = 8;
};

// Deterministic rejection-sampled generator of well-formed, projectable
// global types. A pure function of (seed, limits).
GlobalPtr genGlobalType(uint64_t seed, const GenLimits& limits = {});

// Deterministic random local types, used to exercise the subtyping oracle.
LocalPtr genLocalType(uint64_t seed, const GenLimits& limits = {});

// One process per active role following its projection: exact delays to each
// guard window's start, timeouts covering the window when the acting clock is
// reset, all under an annotated restriction with empty queues. Typechecks by
// construction for generated types.
ProcPtr canonicalProcessOf(const GlobalPtr& g, const std::string& session);

// Naive coinductive subtype search without an assumption cache, bounded by
// fuel; optimistic at the bound. Oracle for the cached algorithm.
bool bruteSubtype(const LocalPtr& a, const LocalPtr& b, int fuel);

}  // namespace atmp
