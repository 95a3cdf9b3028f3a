#include "atmp/types.hpp"

#include <algorithm>

namespace atmp {

Sort sortBase(const std::string& tag) {
  static const std::set<std::string> tags{"unit", "int", "bool", "str"};
  if (!tags.count(tag)) throw std::invalid_argument("unknown base sort tag: " + tag);
  Sort s;
  s.kind = Sort::Kind::Base;
  s.baseTag = tag;
  return s;
}

Sort sortUnit() { return sortBase("unit"); }

Sort sortDelegation(const ConstraintPtr& guard, const LocalPtr& continuation) {
  Sort s;
  s.kind = Sort::Kind::Delegation;
  s.guard = guard;
  s.continuation = continuation;
  return s;
}

bool sortEq(const Sort& a, const Sort& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Sort::Kind::Base) return a.baseTag == b.baseTag;
  return constraintEq(a.guard, b.guard) && ltEq(a.continuation, b.continuation);
}

bool assertionEq(const TimeAssertion& a, const TimeAssertion& b) {
  return constraintEq(a.outGuard, b.outGuard) && a.outReset == b.outReset &&
         constraintEq(a.inGuard, b.inGuard) && a.inReset == b.inReset;
}

GlobalPtr gEnd() {
  static const GlobalPtr e = std::make_shared<GlobalType>();
  return e;
}

GlobalPtr gComm(const Role& from, const Role& to, GlobalBranches branches) {
  auto n = std::make_shared<GlobalType>();
  n->kind = GlobalType::Kind::Comm;
  n->from = from;
  n->to = to;
  n->branches = std::move(branches);
  return n;
}

GlobalPtr gEnRoute(const Role& from, const Role& to, const Label& chosen,
                   GlobalBranches branches) {
  if (!branches.count(chosen))
    throw std::invalid_argument("en-route chosen label not among branches: " + chosen);
  auto n = std::make_shared<GlobalType>();
  n->kind = GlobalType::Kind::CommEnRoute;
  n->from = from;
  n->to = to;
  n->chosen = chosen;
  n->branches = std::move(branches);
  return n;
}

GlobalPtr gRec(const std::string& var, const GlobalPtr& body) {
  auto n = std::make_shared<GlobalType>();
  n->kind = GlobalType::Kind::Rec;
  n->var = var;
  n->body = body;
  return n;
}

GlobalPtr gVar(const std::string& var) {
  auto n = std::make_shared<GlobalType>();
  n->kind = GlobalType::Kind::Var;
  n->var = var;
  return n;
}

LocalPtr lEnd() {
  static const LocalPtr e = std::make_shared<LocalType>();
  return e;
}

namespace {

LocalPtr makeChoice(LocalType::Kind kind, const Role& partner, LocalBranches branches) {
  auto n = std::make_shared<LocalType>();
  n->kind = kind;
  n->partner = partner;
  n->branches = std::move(branches);
  return n;
}

}  // namespace

LocalPtr lIntChoice(const Role& partner, LocalBranches branches) {
  return makeChoice(LocalType::Kind::IntChoice, partner, std::move(branches));
}

LocalPtr lExtChoice(const Role& partner, LocalBranches branches) {
  return makeChoice(LocalType::Kind::ExtChoice, partner, std::move(branches));
}

LocalPtr lRec(const std::string& var, const LocalPtr& body) {
  auto n = std::make_shared<LocalType>();
  n->kind = LocalType::Kind::Rec;
  n->var = var;
  n->body = body;
  return n;
}

LocalPtr lVar(const std::string& var) {
  auto n = std::make_shared<LocalType>();
  n->kind = LocalType::Kind::Var;
  n->var = var;
  return n;
}

bool gtEq(const GlobalPtr& a, const GlobalPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case GlobalType::Kind::End:
      return true;
    case GlobalType::Kind::Var:
      return a->var == b->var;
    case GlobalType::Kind::Rec:
      return a->var == b->var && gtEq(a->body, b->body);
    case GlobalType::Kind::CommEnRoute:
      if (a->chosen != b->chosen) return false;
      [[fallthrough]];
    case GlobalType::Kind::Comm: {
      if (a->from != b->from || a->to != b->to) return false;
      if (a->branches.size() != b->branches.size()) return false;
      auto itB = b->branches.begin();
      for (const auto& [label, br] : a->branches) {
        if (label != itB->first) return false;
        if (!sortEq(br.payload, itB->second.payload)) return false;
        if (!assertionEq(br.timing, itB->second.timing)) return false;
        if (!gtEq(br.cont, itB->second.cont)) return false;
        ++itB;
      }
      return true;
    }
  }
  return false;
}

bool ltEq(const LocalPtr& a, const LocalPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case LocalType::Kind::End:
      return true;
    case LocalType::Kind::Var:
      return a->var == b->var;
    case LocalType::Kind::Rec:
      return a->var == b->var && ltEq(a->body, b->body);
    case LocalType::Kind::IntChoice:
    case LocalType::Kind::ExtChoice: {
      if (a->partner != b->partner) return false;
      if (a->branches.size() != b->branches.size()) return false;
      auto itB = b->branches.begin();
      for (const auto& [label, br] : a->branches) {
        if (label != itB->first) return false;
        if (!sortEq(br.payload, itB->second.payload)) return false;
        if (!constraintEq(br.guard, itB->second.guard)) return false;
        if (br.reset != itB->second.reset) return false;
        if (!ltEq(br.cont, itB->second.cont)) return false;
        ++itB;
      }
      return true;
    }
  }
  return false;
}

bool queueEq(const QueueType& a, const QueueType& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].receiver != b[i].receiver || a[i].label != b[i].label ||
        !sortEq(a[i].payload, b[i].payload))
      return false;
  }
  return true;
}

std::set<Role> roles(const GlobalPtr& g) {
  std::set<Role> out;
  switch (g->kind) {
    case GlobalType::Kind::End:
    case GlobalType::Kind::Var:
      return out;
    case GlobalType::Kind::Rec:
      return roles(g->body);
    case GlobalType::Kind::CommEnRoute:
      out.insert(g->to);
      break;
    case GlobalType::Kind::Comm:
      out.insert(g->from);
      out.insert(g->to);
      break;
  }
  for (const auto& [label, br] : g->branches) {
    std::set<Role> sub = roles(br.cont);
    out.insert(sub.begin(), sub.end());
  }
  return out;
}

namespace {

void freeVarsG(const GlobalPtr& g, std::set<std::string>& bound,
               std::set<std::string>& out) {
  switch (g->kind) {
    case GlobalType::Kind::End:
      return;
    case GlobalType::Kind::Var:
      if (!bound.count(g->var)) out.insert(g->var);
      return;
    case GlobalType::Kind::Rec: {
      bool fresh = bound.insert(g->var).second;
      freeVarsG(g->body, bound, out);
      if (fresh) bound.erase(g->var);
      return;
    }
    case GlobalType::Kind::Comm:
    case GlobalType::Kind::CommEnRoute:
      for (const auto& [label, br] : g->branches) freeVarsG(br.cont, bound, out);
      return;
  }
}

void freeVarsL(const LocalPtr& t, std::set<std::string>& bound,
               std::set<std::string>& out) {
  switch (t->kind) {
    case LocalType::Kind::End:
      return;
    case LocalType::Kind::Var:
      if (!bound.count(t->var)) out.insert(t->var);
      return;
    case LocalType::Kind::Rec: {
      bool fresh = bound.insert(t->var).second;
      freeVarsL(t->body, bound, out);
      if (fresh) bound.erase(t->var);
      return;
    }
    case LocalType::Kind::IntChoice:
    case LocalType::Kind::ExtChoice:
      for (const auto& [label, br] : t->branches) freeVarsL(br.cont, bound, out);
      return;
  }
}

}  // namespace

std::set<std::string> freeVars(const GlobalPtr& g) {
  std::set<std::string> bound, out;
  freeVarsG(g, bound, out);
  return out;
}

std::set<std::string> freeVars(const LocalPtr& t) {
  std::set<std::string> bound, out;
  freeVarsL(t, bound, out);
  return out;
}

GlobalPtr substVar(const GlobalPtr& g, const std::string& var, const GlobalPtr& rep) {
  switch (g->kind) {
    case GlobalType::Kind::End:
      return g;
    case GlobalType::Kind::Var:
      return g->var == var ? rep : g;
    case GlobalType::Kind::Rec:
      if (g->var == var) return g;
      return gRec(g->var, substVar(g->body, var, rep));
    case GlobalType::Kind::Comm:
    case GlobalType::Kind::CommEnRoute: {
      GlobalBranches out;
      for (const auto& [label, br] : g->branches)
        out.emplace(label, GlobalBranch{br.payload, br.timing, substVar(br.cont, var, rep)});
      return g->kind == GlobalType::Kind::Comm
                 ? gComm(g->from, g->to, std::move(out))
                 : gEnRoute(g->from, g->to, g->chosen, std::move(out));
    }
  }
  return g;
}

LocalPtr substVar(const LocalPtr& t, const std::string& var, const LocalPtr& rep) {
  switch (t->kind) {
    case LocalType::Kind::End:
      return t;
    case LocalType::Kind::Var:
      return t->var == var ? rep : t;
    case LocalType::Kind::Rec:
      if (t->var == var) return t;
      return lRec(t->var, substVar(t->body, var, rep));
    case LocalType::Kind::IntChoice:
    case LocalType::Kind::ExtChoice: {
      LocalBranches out;
      for (const auto& [label, br] : t->branches)
        out.emplace(label,
                    LocalBranch{br.payload, br.guard, br.reset, substVar(br.cont, var, rep)});
      return t->kind == LocalType::Kind::IntChoice ? lIntChoice(t->partner, std::move(out))
                                                   : lExtChoice(t->partner, std::move(out));
    }
  }
  return t;
}

GlobalPtr unfoldOne(const GlobalPtr& g) {
  GlobalPtr cur = g;
  for (int fuel = 0; fuel < 10000; ++fuel) {
    if (cur->kind != GlobalType::Kind::Rec) return cur;
    cur = substVar(cur->body, cur->var, cur);
  }
  throw std::runtime_error("unfoldOne: unguarded recursion");
}

LocalPtr unfoldOne(const LocalPtr& t) {
  LocalPtr cur = t;
  for (int fuel = 0; fuel < 10000; ++fuel) {
    if (cur->kind != LocalType::Kind::Rec) return cur;
    cur = substVar(cur->body, cur->var, cur);
  }
  throw std::runtime_error("unfoldOne: unguarded recursion");
}

namespace {

bool unguardedOccurrence(const GlobalPtr& g, const std::string& var) {
  switch (g->kind) {
    case GlobalType::Kind::End:
      return false;
    case GlobalType::Kind::Var:
      return g->var == var;
    case GlobalType::Kind::Rec:
      return g->var != var && unguardedOccurrence(g->body, var);
    case GlobalType::Kind::Comm:
    case GlobalType::Kind::CommEnRoute:
      return false;
  }
  return false;
}

void accumulateOwnership(const GlobalPtr& g, ClockOwnership& own) {
  if (g->kind == GlobalType::Kind::Rec) {
    accumulateOwnership(g->body, own);
    return;
  }
  if (g->kind != GlobalType::Kind::Comm && g->kind != GlobalType::Kind::CommEnRoute)
    return;
  for (const auto& [label, br] : g->branches) {
    for (const Clock& c : freeClocks(br.timing.outGuard)) own[g->from].insert(c);
    for (const Clock& c : br.timing.outReset) own[g->from].insert(c);
    for (const Clock& c : freeClocks(br.timing.inGuard)) own[g->to].insert(c);
    for (const Clock& c : br.timing.inReset) own[g->to].insert(c);
    accumulateOwnership(br.cont, own);
  }
}

struct WfContext {
  std::vector<std::string> failures;
  const ClockOwnership* own;

  void fail(const std::string& msg) { failures.push_back(msg); }

  void checkAction(const Role& actor, const ConstraintPtr& guard,
                   const ResetPredicate& reset, const Label& label, const char* side) {
    auto it = own->find(actor);
    const std::set<Clock>* owned = it == own->end() ? nullptr : &it->second;
    auto check = [&](const Clock& c) {
      if (!owned || !owned->count(c))
        fail("clock " + c + " in " + side + " action of label " + label +
             " is not owned by role " + actor);
    };
    for (const Clock& c : freeClocks(guard)) check(c);
    for (const Clock& c : reset) check(c);
  }

  // Single-clock restriction on action guards: each guard constrains at most
  // one clock, so its solution set is computable exactly.
  void checkSingleClock(const ConstraintPtr& guard, const Label& label, const char* side) {
    if (freeClocks(guard).size() > 1)
      fail("guard of " + std::string(side) + " action of label " + label +
           " mentions more than one clock");
  }

  void walk(const GlobalPtr& g) {
    switch (g->kind) {
      case GlobalType::Kind::End:
      case GlobalType::Kind::Var:
        return;
      case GlobalType::Kind::Rec:
        if (unguardedOccurrence(g->body, g->var))
          fail("recursion variable " + g->var + " is unguarded");
        checkLoop(g);
        walk(g->body);
        return;
      case GlobalType::Kind::Comm:
      case GlobalType::Kind::CommEnRoute:
        if (g->from == g->to) fail("self-communication at role " + g->from);
        if (g->branches.empty()) fail("empty branch index set");
        for (const auto& [label, br] : g->branches) {
          checkSingleClock(br.timing.outGuard, label, "output");
          checkSingleClock(br.timing.inGuard, label, "input");
          checkAction(g->from, br.timing.outGuard, br.timing.outReset, label, "output");
          checkAction(g->to, br.timing.inGuard, br.timing.inReset, label, "input");
          walk(br.cont);
        }
        return;
    }
  }

  // A loop body with any reset, equality, or finite upper bound needs every
  // participating role to reset somewhere in the body, otherwise repeated
  // traversals eventually leave some guard unsatisfiable.
  void checkLoop(const GlobalPtr& rec) {
    bool obligation = false;
    std::set<Role> resetting;
    scanLoop(rec->body, obligation, resetting);
    if (!obligation) return;
    for (const Role& r : roles(rec->body)) {
      if (!resetting.count(r))
        fail("recursion at " + rec->var +
             " has timing obligations but role " + r + " never resets");
    }
  }

  static bool guardHasObligation(const ConstraintPtr& guard) {
    std::set<Clock> fc = freeClocks(guard);
    if (fc.empty()) return false;
    IntervalSet sol = solutionSet(guard, *fc.begin());
    if (sol.parts.empty()) return true;
    return sol.parts.back().hi.has_value();
  }

  static void scanLoop(const GlobalPtr& g, bool& obligation, std::set<Role>& resetting) {
    switch (g->kind) {
      case GlobalType::Kind::End:
      case GlobalType::Kind::Var:
        return;
      case GlobalType::Kind::Rec:
        scanLoop(g->body, obligation, resetting);
        return;
      case GlobalType::Kind::Comm:
      case GlobalType::Kind::CommEnRoute:
        for (const auto& [label, br] : g->branches) {
          if (!br.timing.outReset.empty()) {
            obligation = true;
            resetting.insert(g->from);
          }
          if (!br.timing.inReset.empty()) {
            obligation = true;
            resetting.insert(g->to);
          }
          auto bounded = [](const ConstraintPtr& guard) {
            return freeClocks(guard).size() <= 1 && guardHasObligation(guard);
          };
          if (bounded(br.timing.outGuard) || bounded(br.timing.inGuard))
            obligation = true;
          scanLoop(br.cont, obligation, resetting);
        }
        return;
    }
  }
};

}  // namespace

ClockOwnership inferOwnership(const GlobalPtr& g) {
  ClockOwnership own;
  accumulateOwnership(g, own);
  return own;
}

WellFormedReport checkWellFormed(const GlobalPtr& g,
                                 const std::optional<ClockOwnership>& own) {
  WellFormedReport report;
  WfContext ctx;
  std::set<std::string> fv = freeVars(g);
  if (!fv.empty()) {
    for (const auto& v : fv) ctx.fail("unbound recursion variable " + v);
  }
  ClockOwnership ownership = own ? *own : inferOwnership(g);
  std::map<Clock, Role> seen;
  for (const auto& [role, clocks] : ownership) {
    for (const Clock& c : clocks) {
      auto [it, fresh] = seen.emplace(c, role);
      if (!fresh)
        ctx.fail("clock " + c + " is claimed by both " + it->second + " and " + role);
    }
  }
  ctx.own = &ownership;
  ctx.walk(g);
  report.failures = std::move(ctx.failures);
  report.ok = report.failures.empty();
  return report;
}

std::set<Role> receivers(const QueueType& q) {
  std::set<Role> out;
  for (const auto& m : q) out.insert(m.receiver);
  return out;
}

Json sortToJson(const Sort& s) {
  if (s.kind == Sort::Kind::Base) return Json{{"type", "base"}, {"tag", s.baseTag}};
  return Json{{"type", "delegation"},
              {"guard", printConstraint(s.guard)},
              {"cont", localToJson(s.continuation)}};
}

Sort sortFromJson(const Json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "base") return sortBase(j.at("tag").get<std::string>());
  if (type == "delegation")
    return sortDelegation(parseConstraint(j.at("guard").get<std::string>()),
                          localFromJson(j.at("cont")));
  throw std::invalid_argument("unknown sort tag: " + type);
}

Json resetToJson(const ResetPredicate& r) {
  Json arr = Json::array();
  for (const Clock& c : r) arr.push_back(c);
  return arr;
}

ResetPredicate resetFromJson(const Json& j) {
  ResetPredicate out;
  for (const auto& c : j) out.insert(c.get<std::string>());
  return out;
}

Json globalToJson(const GlobalPtr& g) {
  switch (g->kind) {
    case GlobalType::Kind::End:
      return Json{{"type", "end"}};
    case GlobalType::Kind::Var:
      return Json{{"type", "var"}, {"var", g->var}};
    case GlobalType::Kind::Rec:
      return Json{{"type", "rec"}, {"var", g->var}, {"body", globalToJson(g->body)}};
    case GlobalType::Kind::Comm:
    case GlobalType::Kind::CommEnRoute: {
      Json branches = Json::object();
      for (const auto& [label, br] : g->branches) {
        branches[label] = Json{{"payload", sortToJson(br.payload)},
                               {"outGuard", printConstraint(br.timing.outGuard)},
                               {"outReset", resetToJson(br.timing.outReset)},
                               {"inGuard", printConstraint(br.timing.inGuard)},
                               {"inReset", resetToJson(br.timing.inReset)},
                               {"cont", globalToJson(br.cont)}};
      }
      Json out{{"type", g->kind == GlobalType::Kind::Comm ? "comm" : "enroute"},
               {"from", g->from},
               {"to", g->to},
               {"branches", branches}};
      if (g->kind == GlobalType::Kind::CommEnRoute) out["chosen"] = g->chosen;
      return out;
    }
  }
  return Json{{"type", "end"}};
}

GlobalPtr globalFromJson(const Json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "end") return gEnd();
  if (type == "var") return gVar(j.at("var").get<std::string>());
  if (type == "rec")
    return gRec(j.at("var").get<std::string>(), globalFromJson(j.at("body")));
  if (type == "comm" || type == "enroute") {
    GlobalBranches branches;
    for (const auto& [label, br] : j.at("branches").items()) {
      TimeAssertion timing{parseConstraint(br.at("outGuard").get<std::string>()),
                           resetFromJson(br.at("outReset")),
                           parseConstraint(br.at("inGuard").get<std::string>()),
                           resetFromJson(br.at("inReset"))};
      branches.emplace(label, GlobalBranch{sortFromJson(br.at("payload")), timing,
                                           globalFromJson(br.at("cont"))});
    }
    if (type == "comm")
      return gComm(j.at("from").get<std::string>(), j.at("to").get<std::string>(),
                   std::move(branches));
    return gEnRoute(j.at("from").get<std::string>(), j.at("to").get<std::string>(),
                    j.at("chosen").get<std::string>(), std::move(branches));
  }
  throw std::invalid_argument("unknown global type tag: " + type);
}

Json localToJson(const LocalPtr& t) {
  switch (t->kind) {
    case LocalType::Kind::End:
      return Json{{"type", "end"}};
    case LocalType::Kind::Var:
      return Json{{"type", "var"}, {"var", t->var}};
    case LocalType::Kind::Rec:
      return Json{{"type", "rec"}, {"var", t->var}, {"body", localToJson(t->body)}};
    case LocalType::Kind::IntChoice:
    case LocalType::Kind::ExtChoice: {
      Json branches = Json::object();
      for (const auto& [label, br] : t->branches) {
        branches[label] = Json{{"payload", sortToJson(br.payload)},
                               {"guard", printConstraint(br.guard)},
                               {"reset", resetToJson(br.reset)},
                               {"cont", localToJson(br.cont)}};
      }
      return Json{{"type", t->kind == LocalType::Kind::IntChoice ? "select" : "branch"},
                  {"partner", t->partner},
                  {"branches", branches}};
    }
  }
  return Json{{"type", "end"}};
}

LocalPtr localFromJson(const Json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "end") return lEnd();
  if (type == "var") return lVar(j.at("var").get<std::string>());
  if (type == "rec")
    return lRec(j.at("var").get<std::string>(), localFromJson(j.at("body")));
  if (type == "select" || type == "branch") {
    LocalBranches branches;
    for (const auto& [label, br] : j.at("branches").items()) {
      branches.emplace(label,
                       LocalBranch{sortFromJson(br.at("payload")),
                                   parseConstraint(br.at("guard").get<std::string>()),
                                   resetFromJson(br.at("reset")), localFromJson(br.at("cont"))});
    }
    return type == "select" ? lIntChoice(j.at("partner").get<std::string>(), std::move(branches))
                            : lExtChoice(j.at("partner").get<std::string>(), std::move(branches));
  }
  throw std::invalid_argument("unknown local type tag: " + type);
}

Json queueToJson(const QueueType& q) {
  Json arr = Json::array();
  for (const auto& m : q)
    arr.push_back(Json{{"receiver", m.receiver},
                       {"label", m.label},
                       {"payload", sortToJson(m.payload)}});
  return arr;
}

QueueType queueFromJson(const Json& j) {
  QueueType out;
  for (const auto& m : j)
    out.push_back(MessageType{m.at("receiver").get<std::string>(),
                              m.at("label").get<std::string>(),
                              sortFromJson(m.at("payload"))});
  return out;
}

Json valuationToJson(const ClockValuation& nu) {
  Json out = Json::object();
  for (const auto& [clock, t] : nu) out[clock] = printTime(t);
  return out;
}

ClockValuation valuationFromJson(const Json& j) {
  ClockValuation out;
  for (const auto& [clock, t] : j.items()) out[clock] = parseTime(t.get<std::string>());
  return out;
}

namespace {

std::string printSort(const Sort& s) {
  if (s.kind == Sort::Kind::Base) return s.baseTag;
  return "<" + printConstraint(s.guard) + ", " + printLocal(s.continuation) + ">";
}

std::string printReset(const ResetPredicate& r) {
  std::string out = "{";
  bool first = true;
  for (const Clock& c : r) {
    if (!first) out += ",";
    first = false;
    out += c;
  }
  return out + "}";
}

}  // namespace

std::string printGlobal(const GlobalPtr& g) {
  switch (g->kind) {
    case GlobalType::Kind::End:
      return "end";
    case GlobalType::Kind::Var:
      return g->var;
    case GlobalType::Kind::Rec:
      return "mu " + g->var + "." + printGlobal(g->body);
    case GlobalType::Kind::Comm:
    case GlobalType::Kind::CommEnRoute: {
      std::string arrow = g->kind == GlobalType::Kind::Comm ? "->" : "~>";
      std::string out = g->from + arrow + g->to;
      if (g->kind == GlobalType::Kind::CommEnRoute) out += "[" + g->chosen + "]";
      out += "{";
      bool first = true;
      for (const auto& [label, br] : g->branches) {
        if (!first) out += ", ";
        first = false;
        out += label + "(" + printSort(br.payload) + "){" +
               printConstraint(br.timing.outGuard) + "," + printReset(br.timing.outReset) +
               "," + printConstraint(br.timing.inGuard) + "," +
               printReset(br.timing.inReset) + "}." + printGlobal(br.cont);
      }
      return out + "}";
    }
  }
  return "end";
}

std::string printLocal(const LocalPtr& t) {
  switch (t->kind) {
    case LocalType::Kind::End:
      return "end";
    case LocalType::Kind::Var:
      return t->var;
    case LocalType::Kind::Rec:
      return "mu " + t->var + "." + printLocal(t->body);
    case LocalType::Kind::IntChoice:
    case LocalType::Kind::ExtChoice: {
      std::string out = t->partner;
      out += t->kind == LocalType::Kind::IntChoice ? "(+)" : "&";
      out += "{";
      bool first = true;
      for (const auto& [label, br] : t->branches) {
        if (!first) out += ", ";
        first = false;
        out += label + "(" + printSort(br.payload) + "){" + printConstraint(br.guard) +
               "," + printReset(br.reset) + "}." + printLocal(br.cont);
      }
      return out + "}";
    }
  }
  return "end";
}

}  // namespace atmp
