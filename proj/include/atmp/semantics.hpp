#pragma once

#include "atmp/projection.hpp"
#include "atmp/subtyping.hpp"

namespace atmp {

struct ActionLabel {
  enum class Kind { Send, Recv, Time };
  Kind kind = Kind::Time;
  std::string session;
  Role from;
  Role to;
  Label label;
  Rat time;
};

ActionLabel alSend(const std::string& session, const Role& from, const Role& to,
                   const Label& label);
ActionLabel alRecv(const std::string& session, const Role& receiver, const Role& from,
                   const Label& label);
ActionLabel alTime(const Rat& t);
bool actionEq(const ActionLabel& a, const ActionLabel& b);
std::string printAction(const ActionLabel& a);
std::set<Role> subjectOf(const ActionLabel& a);

struct EnvKey {
  bool isVar = false;
  std::string session;
  Role role;
  std::string var;

  friend bool operator<(const EnvKey& a, const EnvKey& b) {
    return std::tie(a.isVar, a.session, a.role, a.var) <
           std::tie(b.isVar, b.session, b.role, b.var);
  }
  friend bool operator==(const EnvKey& a, const EnvKey& b) {
    return std::tie(a.isVar, a.session, a.role, a.var) ==
           std::tie(b.isVar, b.session, b.role, b.var);
  }
};

EnvKey epKey(const std::string& session, const Role& role);
EnvKey varKey(const std::string& name);
std::string printEnvKey(const EnvKey& k);

using TypingEnv = std::map<EnvKey, EnvEntry>;

struct CompositionError : std::runtime_error {
  explicit CompositionError(const std::string& what) : std::runtime_error(what) {}
};

TypingEnv compose(const TypingEnv& a, const TypingEnv& b);
bool envEq(const TypingEnv& a, const TypingEnv& b);
bool envCongruent(const TypingEnv& a, const TypingEnv& b);
bool envSubtype(const TypingEnv& a, const TypingEnv& b);
TypingEnv envAdvance(const TypingEnv& env, const Rat& t);
Json envToJson(const TypingEnv& env);
TypingEnv envFromJson(const Json& j);
std::string envHash(const TypingEnv& env);
std::string printEnv(const TypingEnv& env);

struct TimedGlobalState {
  ClockValuation nu;
  GlobalPtr g;
};

bool stateEq(const TimedGlobalState& a, const TimedGlobalState& b);
Json stateToJson(const TimedGlobalState& s);
TimedGlobalState stateFromJson(const Json& j);
std::string stateHash(const TimedGlobalState& s);

std::set<Clock> clocksOf(const GlobalPtr& g);
ClockValuation initialValuation(const GlobalPtr& g);

// Sample times at which some guard region is entered, left, or crossed,
// relative to the current clock values; zero is excluded so time steps are
// always proper.
std::vector<Rat> timeGridForState(const TimedGlobalState& s, const Rat& horizon);
std::vector<Rat> timeGridForEnv(const TypingEnv& env, const Rat& horizon);
std::vector<Rat> autoGrid(const TimedGlobalState& s, const TypingEnv& env);

struct GtStep {
  ActionLabel action;
  TimedGlobalState next;
};
std::vector<GtStep> gtSteps(const TimedGlobalState& s, const std::string& session,
                            const std::vector<Rat>& grid);

struct EnvStep {
  ActionLabel action;
  TypingEnv next;
};
std::vector<EnvStep> envSteps(const TypingEnv& env, const std::vector<Rat>& grid);

struct AssociationReport {
  bool ok = true;
  std::vector<std::string> failures;
};
AssociationReport associated(const TimedGlobalState& s, const TypingEnv& env,
                             const std::string& session);

// Tightest environment associated with a state: projections with per-role
// clock slices and the pending-transmission queues.
TypingEnv canonicalEnv(const TimedGlobalState& s, const std::string& session);

struct CorrespondenceReport {
  bool ok = true;
  std::vector<std::string> counterexample;
  std::string detail;
  size_t visited = 0;
};
CorrespondenceReport checkCompleteness(const TimedGlobalState& s, const TypingEnv& env,
                                       const std::string& session, int depth,
                                       const std::vector<Rat>& grid);
CorrespondenceReport checkSoundness(const TimedGlobalState& s, const TypingEnv& env,
                                    const std::string& session, int depth,
                                    const std::vector<Rat>& grid);

// Strict variant: every global step must be matched by an environment step
// with the same label. Associated pairs can fail this even though the
// existential check above succeeds, because entry types may drop selection
// branches that the global type still offers.
CorrespondenceReport checkPerLabelSoundness(const TimedGlobalState& s, const TypingEnv& env,
                                            const std::string& session, int depth,
                                            const std::vector<Rat>& grid);

TypingEnv untimedErase(const TypingEnv& env);

struct SafetyReport {
  bool ok = true;
  std::vector<std::string> counterexample;
  std::string detail;
  size_t visited = 0;
};
SafetyReport checkSafety(const TypingEnv& untimed, int depth);

}  // namespace atmp
