#pragma once

#include "atmp/time_core.hpp"
#include "json.hpp"

namespace atmp {

using Role = std::string;
using Label = std::string;

struct GlobalType;
struct LocalType;
using GlobalPtr = std::shared_ptr<const GlobalType>;
using LocalPtr = std::shared_ptr<const LocalType>;

// Payload sorts: inert base values, or delegation of a continuation type whose
// transfer is guarded by a clock constraint.
struct Sort {
  enum class Kind { Base, Delegation };
  Kind kind = Kind::Base;
  std::string baseTag = "unit";
  ConstraintPtr guard;
  LocalPtr continuation;
};

Sort sortBase(const std::string& tag);
Sort sortUnit();
Sort sortDelegation(const ConstraintPtr& guard, const LocalPtr& continuation);
bool sortEq(const Sort& a, const Sort& b);

// Four-component time assertion of a communication: output guard/reset for the
// sender, input guard/reset for the receiver.
struct TimeAssertion {
  ConstraintPtr outGuard = ctTrue();
  ResetPredicate outReset;
  ConstraintPtr inGuard = ctTrue();
  ResetPredicate inReset;
};

bool assertionEq(const TimeAssertion& a, const TimeAssertion& b);

struct GlobalBranch {
  Sort payload;
  TimeAssertion timing;
  GlobalPtr cont;
};
using GlobalBranches = std::map<Label, GlobalBranch>;

struct GlobalType {
  enum class Kind { Comm, CommEnRoute, Rec, Var, End };
  Kind kind = Kind::End;
  Role from;
  Role to;
  GlobalBranches branches;
  Label chosen;
  std::string var;
  GlobalPtr body;
};

GlobalPtr gEnd();
GlobalPtr gComm(const Role& from, const Role& to, GlobalBranches branches);
GlobalPtr gEnRoute(const Role& from, const Role& to, const Label& chosen,
                   GlobalBranches branches);
GlobalPtr gRec(const std::string& var, const GlobalPtr& body);
GlobalPtr gVar(const std::string& var);

struct LocalBranch {
  Sort payload;
  ConstraintPtr guard = ctTrue();
  ResetPredicate reset;
  LocalPtr cont;
};
using LocalBranches = std::map<Label, LocalBranch>;

struct LocalType {
  enum class Kind { IntChoice, ExtChoice, Rec, Var, End };
  Kind kind = Kind::End;
  Role partner;
  LocalBranches branches;
  std::string var;
  LocalPtr body;
};

LocalPtr lEnd();
LocalPtr lIntChoice(const Role& partner, LocalBranches branches);
LocalPtr lExtChoice(const Role& partner, LocalBranches branches);
LocalPtr lRec(const std::string& var, const LocalPtr& body);
LocalPtr lVar(const std::string& var);

struct MessageType {
  Role receiver;
  Label label;
  Sort payload;
};
using QueueType = std::vector<MessageType>;

using ClockOwnership = std::map<Role, std::set<Clock>>;

bool gtEq(const GlobalPtr& a, const GlobalPtr& b);
bool ltEq(const LocalPtr& a, const LocalPtr& b);
bool queueEq(const QueueType& a, const QueueType& b);

std::set<Role> roles(const GlobalPtr& g);
std::set<std::string> freeVars(const GlobalPtr& g);
std::set<std::string> freeVars(const LocalPtr& t);
GlobalPtr substVar(const GlobalPtr& g, const std::string& var, const GlobalPtr& rep);
LocalPtr substVar(const LocalPtr& t, const std::string& var, const LocalPtr& rep);
GlobalPtr unfoldOne(const GlobalPtr& g);
LocalPtr unfoldOne(const LocalPtr& t);

struct WellFormedReport {
  bool ok = true;
  std::vector<std::string> failures;
};

ClockOwnership inferOwnership(const GlobalPtr& g);
WellFormedReport checkWellFormed(const GlobalPtr& g,
                                 const std::optional<ClockOwnership>& own = std::nullopt);

std::set<Role> receivers(const QueueType& q);

using Json = nlohmann::json;

Json sortToJson(const Sort& s);
Sort sortFromJson(const Json& j);
Json globalToJson(const GlobalPtr& g);
GlobalPtr globalFromJson(const Json& j);
Json localToJson(const LocalPtr& t);
LocalPtr localFromJson(const Json& j);
Json queueToJson(const QueueType& q);
QueueType queueFromJson(const Json& j);
Json valuationToJson(const ClockValuation& nu);
ClockValuation valuationFromJson(const Json& j);
Json resetToJson(const ResetPredicate& r);
ResetPredicate resetFromJson(const Json& j);

std::string printGlobal(const GlobalPtr& g);
std::string printLocal(const LocalPtr& t);

}  // namespace atmp
