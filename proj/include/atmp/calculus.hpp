#pragma once

#include "atmp/semantics.hpp"

namespace atmp {

// Channel position: either a concrete session endpoint or a bound variable.
struct Chan {
  bool isVar = false;
  std::string session;
  Role role;
  std::string var;
};

Chan chanEp(const std::string& session, const Role& role);
Chan chanVar(const std::string& name);
bool chanEq(const Chan& a, const Chan& b);
std::string printChan(const Chan& c);

struct Process;
using ProcPtr = std::shared_ptr<const Process>;

struct ProcBranch {
  std::optional<std::string> payloadVar;
  ProcPtr cont;
};

struct QueueMsg {
  Role to;
  Label label;
  std::optional<Chan> payload;
};

// Restriction annotation: the global witness the session was spawned from,
// plus (optionally) the exact environment the body is typed against. When the
// env is omitted the canonical projection environment of the witness is used.
struct SessionAnnotation {
  ClockValuation nu;
  GlobalPtr g;
  std::optional<TypingEnv> env;
};

struct Process {
  enum class Kind {
    Nil,
    Par,
    Restrict,
    Select,
    Branch,
    Def,
    Call,
    DelayConstraint,
    DelayExact,
    Failed,
    Try,
    Cancel,
    Err,
    Kill,
    Queue
  };
  Kind kind = Kind::Nil;
  std::vector<ProcPtr> items;                    // Par
  std::string session;                           // Restrict, Kill, Queue
  std::optional<SessionAnnotation> annotation;   // Restrict
  ProcPtr body;                                  // Restrict, Def (definition body)
  Chan chan;                                     // Select, Branch, Cancel
  Role partner;                                  // Select: to, Branch: from
  Label label;                                   // Select
  std::optional<Chan> payload;                   // Select
  std::map<Label, ProcBranch> branches;          // Branch
  ExtendedTime timeout;                          // Select, Branch
  ProcPtr cont;                                  // Select, Cancel, delays, Def scope
  std::string defName;                           // Def, Call
  std::vector<std::string> defParams;            // Def
  std::vector<std::pair<ClockValuation, LocalPtr>> defParamTypes;  // Def (one per param)
  std::vector<Chan> callArgs;                    // Call
  ConstraintPtr delayGuard;                      // DelayConstraint
  Clock delayClock;                              // DelayConstraint
  Rat delayTime;                                 // DelayExact
  ProcPtr tryBody;                               // Try
  ProcPtr catchBody;                             // Try
  Role owner;                                    // Queue
  std::vector<QueueMsg> msgs;                    // Queue
};

ProcPtr pNil();
ProcPtr pErr();
ProcPtr pPar(std::vector<ProcPtr> items);
ProcPtr pRestrict(const std::string& session, const ProcPtr& body,
                  const std::optional<SessionAnnotation>& annotation = std::nullopt);
ProcPtr pSelect(const Chan& chan, const Role& to, const Label& label,
                const std::optional<Chan>& payload, const ExtendedTime& timeout,
                const ProcPtr& cont);
ProcPtr pBranch(const Chan& chan, const Role& from, std::map<Label, ProcBranch> branches,
                const ExtendedTime& timeout);
ProcPtr pDef(const std::string& name, std::vector<std::string> params, const ProcPtr& body,
             const ProcPtr& scope,
             std::vector<std::pair<ClockValuation, LocalPtr>> paramTypes = {});
ProcPtr pCall(const std::string& name, std::vector<Chan> args);
ProcPtr pDelayConstraint(const ConstraintPtr& guard, const Clock& clock, const ProcPtr& cont);
ProcPtr pDelayExact(const Rat& t, const ProcPtr& cont);
ProcPtr pFailed(const ProcPtr& p);
ProcPtr pTry(const ProcPtr& body, const ProcPtr& catcher);
ProcPtr pCancel(const Chan& chan, const ProcPtr& cont);
ProcPtr pKill(const std::string& session);
ProcPtr pQueue(const std::string& session, const Role& owner, std::vector<QueueMsg> msgs);

std::string printProcess(const ProcPtr& p);

struct UnboundedCallExpansion : std::runtime_error {
  explicit UnboundedCallExpansion(const std::string& what) : std::runtime_error(what) {}
};

struct Subject {
  std::string session;
  Role role;
  bool queue = false;

  friend bool operator<(const Subject& a, const Subject& b) {
    return std::tie(a.session, a.role, a.queue) < std::tie(b.session, b.role, b.queue);
  }
  friend bool operator==(const Subject& a, const Subject& b) {
    return std::tie(a.session, a.role, a.queue) == std::tie(b.session, b.role, b.queue);
  }
};

std::set<Subject> subjects(const ProcPtr& p);
ProcPtr substChans(const ProcPtr& p, const std::map<std::string, Chan>& sub);

// Time-passing function: total time elapse by t, undefined (nullopt) when an
// unresolved delay blocks it; expired waits collapse to their failed form.
std::optional<ProcPtr> timePass(const ProcPtr& p, const Rat& t);

ProcPtr congNormalize(const ProcPtr& p);
bool congruent(const ProcPtr& a, const ProcPtr& b);

struct ProcStep {
  std::string rule;
  ProcPtr next;
};
std::vector<ProcStep> stepInstant(const ProcPtr& p);

std::vector<Rat> autoGridProcess(const ProcPtr& p);

bool containsErr(const ProcPtr& p);
bool containsFailed(const ProcPtr& p);

struct ExploreOptions {
  int depth = 10;
  std::vector<Rat> grid;
  bool useAutoGrid = true;
  size_t maxStates = 200000;
};

struct ExploreReport {
  size_t states = 0;
  size_t truncated = 0;
  bool errReached = false;
  bool deadlockFree = true;
  std::vector<std::string> terminals;
  std::set<std::string> failedEndpoints;
  std::vector<std::vector<std::string>> terminalTraces;
};

ExploreReport explore(const ProcPtr& p, const ExploreOptions& opts);

}  // namespace atmp
