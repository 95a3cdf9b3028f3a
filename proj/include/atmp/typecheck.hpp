#pragma once

#include "atmp/calculus.hpp"

namespace atmp {

// Process-variable signatures: each definition name maps to the declared
// (valuation, local type) pair per parameter.
using ProcEnv = std::map<std::string, std::vector<std::pair<ClockValuation, LocalPtr>>>;

struct Judgment {
  ProcEnv theta;
  TypingEnv gamma;
  ProcPtr process;
  // Association witness per session named in gamma; consulted by the
  // metatheory checkers, ignored by plain typechecking.
  std::map<std::string, TimedGlobalState> witnesses;
};

struct TypingReport {
  bool ok = true;
  std::vector<std::string> errors;  // "rule: position: premise"
  std::vector<std::string> trace;   // derivation steps, filled on request
  Json toJson() const;
};

struct PreconditionViolation : std::runtime_error {
  explicit PreconditionViolation(const std::string& what) : std::runtime_error(what) {}
};

// True iff every entry's type component is a subtype of end and every queue
// part is empty.
bool endEnv(const TypingEnv& gamma);

// Shifts every type-part valuation by t, variable entries included; queue
// parts are untouched. The runtime advance differs: it freezes variables.
TypingEnv envShift(const TypingEnv& gamma, const Rat& t);

TypingReport typecheck(const Judgment& j, bool explain = false);

struct MetaReport {
  bool ok = true;
  std::string detail;
  size_t checked = 0;
};

// Walks the reduction graph to the given depth and re-types every reachable
// process against some environment reachable from gamma, preserving the
// association witnesses.
MetaReport checkSubjectReduction(const Judgment& j, int steps,
                                 const std::vector<Rat>& grid = {});

// For the single-session shape of the fidelity theorem: every enabled
// environment step is matched by a multi-step of the process that re-types.
MetaReport checkSessionFidelity(const Judgment& j, const std::vector<Rat>& grid = {});

// Same preconditions; verdict is whether every maximal execution terminates
// in a kill bundle that is also a time fixpoint.
MetaReport checkDeadlockFreedom(const Judgment& j, int depth,
                                const std::vector<Rat>& grid = {});

}  // namespace atmp
