#include "atmp/semantics.hpp"

#include <deque>
#include <functional>
#include <sstream>

namespace atmp {

ActionLabel alSend(const std::string& session, const Role& from, const Role& to,
                   const Label& label) {
  ActionLabel a;
  a.kind = ActionLabel::Kind::Send;
  a.session = session;
  a.from = from;
  a.to = to;
  a.label = label;
  return a;
}

ActionLabel alRecv(const std::string& session, const Role& receiver, const Role& from,
                   const Label& label) {
  ActionLabel a;
  a.kind = ActionLabel::Kind::Recv;
  a.session = session;
  a.from = from;
  a.to = receiver;
  a.label = label;
  return a;
}

ActionLabel alTime(const Rat& t) {
  ActionLabel a;
  a.kind = ActionLabel::Kind::Time;
  a.time = t;
  return a;
}

bool actionEq(const ActionLabel& a, const ActionLabel& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == ActionLabel::Kind::Time) return a.time == b.time;
  return a.session == b.session && a.from == b.from && a.to == b.to && a.label == b.label;
}

std::string printAction(const ActionLabel& a) {
  switch (a.kind) {
    case ActionLabel::Kind::Send:
      return a.session + ":" + a.from + "!" + a.to + ":" + a.label;
    case ActionLabel::Kind::Recv:
      return a.session + ":" + a.to + "?" + a.from + ":" + a.label;
    case ActionLabel::Kind::Time:
      return "t=" + printTime(a.time);
  }
  return "?";
}

std::set<Role> subjectOf(const ActionLabel& a) {
  switch (a.kind) {
    case ActionLabel::Kind::Send:
      return {a.from};
    case ActionLabel::Kind::Recv:
      return {a.to};
    case ActionLabel::Kind::Time:
      return {};
  }
  return {};
}

EnvKey epKey(const std::string& session, const Role& role) {
  EnvKey k;
  k.session = session;
  k.role = role;
  return k;
}

EnvKey varKey(const std::string& name) {
  EnvKey k;
  k.isVar = true;
  k.var = name;
  return k;
}

std::string printEnvKey(const EnvKey& k) {
  if (k.isVar) return k.var;
  return k.session + "[" + k.role + "]";
}

TypingEnv compose(const TypingEnv& a, const TypingEnv& b) {
  TypingEnv out = a;
  for (const auto& [k, e] : b) {
    auto it = out.find(k);
    if (it == out.end()) {
      out.emplace(k, e);
      continue;
    }
    EnvEntry& prev = it->second;
    if (prev.hasSession && !prev.hasQueue && !e.hasSession && e.hasQueue) {
      prev = combinedEntry(prev.nu, prev.type, e.queue);
    } else if (!prev.hasSession && prev.hasQueue && e.hasSession && !e.hasQueue) {
      prev = combinedEntry(e.nu, e.type, prev.queue);
    } else {
      throw CompositionError("incompatible entries for " + printEnvKey(k));
    }
  }
  return out;
}

bool envEq(const TypingEnv& a, const TypingEnv& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (!(ia->first == ib->first)) return false;
    if (!entryEq(ia->second, ib->second)) return false;
  }
  return true;
}

bool envCongruent(const TypingEnv& a, const TypingEnv& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (!(ia->first == ib->first)) return false;
    if (!congruentEntry(ia->second, ib->second)) return false;
  }
  return true;
}

bool envSubtype(const TypingEnv& a, const TypingEnv& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (!(ia->first == ib->first)) return false;
    try {
      if (!subtypeEntry(ia->second, ib->second)) return false;
    } catch (const ShapeMismatch&) {
      return false;
    }
  }
  return true;
}

TypingEnv envAdvance(const TypingEnv& env, const Rat& t) {
  TypingEnv out;
  for (const auto& [k, e] : env) {
    EnvEntry n = e;
    if (!k.isVar && n.hasSession) n.nu = atmp::advance(n.nu, t);
    out.emplace(k, n);
  }
  return out;
}

Json envToJson(const TypingEnv& env) {
  Json arr = Json::array();
  for (const auto& [k, e] : env) {
    Json jk;
    if (k.isVar) {
      jk["var"] = k.var;
    } else {
      jk["session"] = k.session;
      jk["role"] = k.role;
    }
    Json je;
    if (e.hasSession) {
      je["valuation"] = valuationToJson(e.nu);
      je["type"] = localToJson(e.type);
    }
    if (e.hasQueue) je["queue"] = queueToJson(e.queue);
    arr.push_back(Json{{"key", jk}, {"entry", je}});
  }
  return arr;
}

TypingEnv envFromJson(const Json& j) {
  TypingEnv out;
  for (const auto& item : j) {
    const Json& jk = item.at("key");
    EnvKey k;
    if (jk.contains("var")) {
      k = varKey(jk.at("var").get<std::string>());
    } else {
      k = epKey(jk.at("session").get<std::string>(), jk.at("role").get<std::string>());
    }
    const Json& je = item.at("entry");
    EnvEntry e;
    if (je.contains("type")) {
      e.hasSession = true;
      e.nu = valuationFromJson(je.at("valuation"));
      e.type = localFromJson(je.at("type"));
    }
    if (je.contains("queue")) {
      e.hasQueue = true;
      e.queue = queueFromJson(je.at("queue"));
    }
    out.emplace(k, e);
  }
  return out;
}

static std::string hexHash(const std::string& text) {
  size_t h = std::hash<std::string>{}(text);
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string envHash(const TypingEnv& env) {
  TypingEnv canon;
  for (const auto& [k, e] : env) {
    EnvEntry c = e;
    if (c.hasQueue) c.queue = canonicalQueue(c.queue);
    canon.emplace(k, c);
  }
  return hexHash(envToJson(canon).dump());
}

static std::string printQueuePart(const QueueType& q) {
  if (q.empty()) return "o";
  std::string out;
  for (size_t i = 0; i < q.size(); ++i) {
    if (i) out += "; ";
    out += "(" + q[i].receiver + ", " + q[i].label + ")";
  }
  return out;
}

std::string printEnv(const TypingEnv& env) {
  std::string out;
  for (const auto& [k, e] : env) {
    out += printEnvKey(k) + " |-> ";
    if (e.hasSession && e.hasQueue) {
      out += "((" + printValuation(e.nu) + ", " + printLocal(e.type) + "); " +
             printQueuePart(e.queue) + ")";
    } else if (e.hasSession) {
      out += "(" + printValuation(e.nu) + ", " + printLocal(e.type) + ")";
    } else {
      out += printQueuePart(e.queue);
    }
    out += "\n";
  }
  return out;
}

bool stateEq(const TimedGlobalState& a, const TimedGlobalState& b) {
  return a.nu == b.nu && gtEq(a.g, b.g);
}

Json stateToJson(const TimedGlobalState& s) {
  return Json{{"valuation", valuationToJson(s.nu)}, {"global", globalToJson(s.g)}};
}

TimedGlobalState stateFromJson(const Json& j) {
  TimedGlobalState s;
  s.nu = valuationFromJson(j.at("valuation"));
  s.g = globalFromJson(j.at("global"));
  return s;
}

std::string stateHash(const TimedGlobalState& s) { return hexHash(stateToJson(s).dump()); }

static void globalGuards(const GlobalPtr& g, std::vector<ConstraintPtr>& out) {
  switch (g->kind) {
    case GlobalType::Kind::Comm:
    case GlobalType::Kind::CommEnRoute:
      for (const auto& [l, b] : g->branches) {
        out.push_back(b.timing.outGuard);
        out.push_back(b.timing.inGuard);
        globalGuards(b.cont, out);
      }
      break;
    case GlobalType::Kind::Rec:
      globalGuards(g->body, out);
      break;
    default:
      break;
  }
}

static void globalResets(const GlobalPtr& g, std::set<Clock>& out) {
  switch (g->kind) {
    case GlobalType::Kind::Comm:
    case GlobalType::Kind::CommEnRoute:
      for (const auto& [l, b] : g->branches) {
        out.insert(b.timing.outReset.begin(), b.timing.outReset.end());
        out.insert(b.timing.inReset.begin(), b.timing.inReset.end());
        globalResets(b.cont, out);
      }
      break;
    case GlobalType::Kind::Rec:
      globalResets(g->body, out);
      break;
    default:
      break;
  }
}

std::set<Clock> clocksOf(const GlobalPtr& g) {
  std::set<Clock> out;
  std::vector<ConstraintPtr> guards;
  globalGuards(g, guards);
  for (const auto& c : guards) {
    auto fc = freeClocks(c);
    out.insert(fc.begin(), fc.end());
  }
  globalResets(g, out);
  return out;
}

ClockValuation initialValuation(const GlobalPtr& g) {
  ClockValuation nu;
  for (const auto& c : clocksOf(g)) nu[c] = Rat(0);
  return nu;
}

static void localGuards(const LocalPtr& t, std::vector<ConstraintPtr>& out) {
  switch (t->kind) {
    case LocalType::Kind::IntChoice:
    case LocalType::Kind::ExtChoice:
      for (const auto& [l, b] : t->branches) {
        out.push_back(b.guard);
        localGuards(b.cont, out);
      }
      break;
    case LocalType::Kind::Rec:
      localGuards(t->body, out);
      break;
    default:
      break;
  }
}

static void maxConstOf(const ConstraintPtr& c, Rat& m) {
  switch (c->kind) {
    case ClockConstraint::Kind::Gt:
    case ClockConstraint::Kind::Eq:
      if (c->bound > m) m = c->bound;
      break;
    case ClockConstraint::Kind::Not:
      maxConstOf(c->lhs, m);
      break;
    case ClockConstraint::Kind::And:
      maxConstOf(c->lhs, m);
      maxConstOf(c->rhs, m);
      break;
    default:
      break;
  }
}

static void guardGridPoints(const ConstraintPtr& guard, const ClockValuation& nu,
                            const Rat& horizon, std::set<Rat>& out) {
  auto fc = freeClocks(guard);
  if (fc.size() != 1) return;
  const Clock& c = *fc.begin();
  auto it = nu.find(c);
  if (it == nu.end()) return;
  const Rat& v = it->second;
  IntervalSet sol = solutionSet(guard, c);
  IntervalSet future = isetIntersect(sol, isetRange(v, true, std::nullopt, false));
  IntervalSet shifted;
  for (const auto& part : future.parts) {
    Interval p = part;
    p.lo = p.lo - v;
    if (p.hi) p.hi = *p.hi - v;
    shifted = isetUnion(shifted, IntervalSet{{p}});
  }
  for (const auto& t : sampleGrid(shifted, horizon)) {
    if (t > 0) out.insert(t);
  }
}

std::vector<Rat> timeGridForState(const TimedGlobalState& s, const Rat& horizon) {
  std::set<Rat> pts;
  std::vector<ConstraintPtr> guards;
  globalGuards(s.g, guards);
  for (const auto& g : guards) guardGridPoints(g, s.nu, horizon, pts);
  return {pts.begin(), pts.end()};
}

std::vector<Rat> timeGridForEnv(const TypingEnv& env, const Rat& horizon) {
  std::set<Rat> pts;
  for (const auto& [k, e] : env) {
    if (k.isVar || !e.hasSession) continue;
    std::vector<ConstraintPtr> guards;
    localGuards(e.type, guards);
    for (const auto& g : guards) guardGridPoints(g, e.nu, horizon, pts);
  }
  return {pts.begin(), pts.end()};
}

std::vector<Rat> autoGrid(const TimedGlobalState& s, const TypingEnv& env) {
  Rat m(0);
  std::vector<ConstraintPtr> guards;
  globalGuards(s.g, guards);
  for (const auto& [k, e] : env) {
    if (k.isVar || !e.hasSession) continue;
    localGuards(e.type, guards);
  }
  for (const auto& g : guards) maxConstOf(g, m);
  Rat horizon = m + 1;
  std::set<Rat> pts;
  for (const auto& t : timeGridForState(s, horizon)) pts.insert(t);
  for (const auto& t : timeGridForEnv(env, horizon)) pts.insert(t);
  if (pts.empty()) pts.insert(Rat(1));
  return {pts.begin(), pts.end()};
}

static std::vector<GtStep> gtInstantSteps(const ClockValuation& nu, const GlobalPtr& g0,
                                          const std::string& session, int unfolds = 8) {
  GlobalPtr g = g0;
  while (g->kind == GlobalType::Kind::Rec) {
    if (unfolds <= 0) return {};
    g = unfoldOne(g);
    --unfolds;
  }
  std::vector<GtStep> out;
  if (g->kind == GlobalType::Kind::Comm) {
    for (const auto& [l, b] : g->branches) {
      if (!satisfies(nu, b.timing.outGuard)) continue;
      GtStep st;
      st.action = alSend(session, g->from, g->to, l);
      st.next.nu = resetClocks(nu, b.timing.outReset);
      st.next.g = gEnRoute(g->from, g->to, l, g->branches);
      out.push_back(std::move(st));
    }
  } else if (g->kind == GlobalType::Kind::CommEnRoute) {
    const auto& b = g->branches.at(g->chosen);
    if (satisfies(nu, b.timing.inGuard)) {
      GtStep st;
      st.action = alRecv(session, g->to, g->from, g->chosen);
      st.next.nu = resetClocks(nu, b.timing.inReset);
      st.next.g = b.cont;
      out.push_back(std::move(st));
    }
  }
  if (g->kind == GlobalType::Kind::Comm || g->kind == GlobalType::Kind::CommEnRoute) {
    // context steps: every branch continuation advances by the same action and
    // reaches the same valuation; the communication's receiver (and, before
    // the send has happened, its sender) must not be involved
    std::map<std::string, std::map<Label, GlobalPtr>> bucketG;
    std::map<std::string, std::pair<ActionLabel, ClockValuation>> bucketMeta;
    for (const auto& [l, b] : g->branches) {
      for (const auto& inner : gtInstantSteps(nu, b.cont, session)) {
        auto subj = subjectOf(inner.action);
        if (subj.count(g->to)) continue;
        if (g->kind == GlobalType::Kind::Comm && subj.count(g->from)) continue;
        std::string key = printAction(inner.action) + "|" + printValuation(inner.next.nu);
        bucketG[key].emplace(l, inner.next.g);
        bucketMeta.emplace(key, std::make_pair(inner.action, inner.next.nu));
      }
    }
    for (const auto& [key, conts] : bucketG) {
      if (conts.size() != g->branches.size()) continue;
      std::map<Label, GlobalBranch> nb;
      for (const auto& [l, b] : g->branches) {
        GlobalBranch copy = b;
        copy.cont = conts.at(l);
        nb.emplace(l, std::move(copy));
      }
      GtStep st;
      st.action = bucketMeta.at(key).first;
      st.next.nu = bucketMeta.at(key).second;
      st.next.g = g->kind == GlobalType::Kind::Comm
                      ? gComm(g->from, g->to, std::move(nb))
                      : gEnRoute(g->from, g->to, g->chosen, std::move(nb));
      out.push_back(std::move(st));
    }
  }
  return out;
}

std::vector<GtStep> gtSteps(const TimedGlobalState& s, const std::string& session,
                            const std::vector<Rat>& grid) {
  std::vector<GtStep> out = gtInstantSteps(s.nu, s.g, session);
  for (const auto& t : grid) {
    GtStep st;
    st.action = alTime(t);
    st.next.nu = atmp::advance(s.nu, t);
    st.next.g = s.g;
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<EnvStep> envSteps(const TypingEnv& env, const std::vector<Rat>& grid) {
  std::vector<EnvStep> out;
  for (const auto& [k, e] : env) {
    if (k.isVar) continue;
    // selection: a combined entry appends to its own queue
    if (e.hasSession && e.hasQueue) {
      LocalPtr t = e.type;
      while (t->kind == LocalType::Kind::Rec) t = unfoldOne(t);
      if (t->kind == LocalType::Kind::IntChoice) {
        for (const auto& [l, b] : t->branches) {
          if (!satisfies(e.nu, b.guard)) continue;
          EnvStep st;
          st.action = alSend(k.session, k.role, t->partner, l);
          st.next = env;
          EnvEntry& me = st.next.at(k);
          me.nu = resetClocks(e.nu, b.reset);
          me.type = b.cont;
          me.queue.push_back(MessageType{t->partner, l, b.payload});
          out.push_back(std::move(st));
        }
      }
    }
    // reception: the first message per receiver in this sender's queue can be
    // consumed by a receiver whose branching expects it
    if (e.hasQueue) {
      std::set<Role> seen;
      for (size_t i = 0; i < e.queue.size(); ++i) {
        const MessageType& m = e.queue[i];
        if (seen.count(m.receiver)) continue;
        seen.insert(m.receiver);
        auto rit = env.find(epKey(k.session, m.receiver));
        if (rit == env.end() || !rit->second.hasSession) continue;
        LocalPtr rt = rit->second.type;
        while (rt->kind == LocalType::Kind::Rec) rt = unfoldOne(rt);
        if (rt->kind != LocalType::Kind::ExtChoice || rt->partner != k.role) continue;
        auto bit = rt->branches.find(m.label);
        if (bit == rt->branches.end()) continue;
        const LocalBranch& b = bit->second;
        if (!satisfies(rit->second.nu, b.guard)) continue;
        if (!subtypeSort(m.payload, b.payload)) continue;
        EnvStep st;
        st.action = alRecv(k.session, m.receiver, k.role, m.label);
        st.next = env;
        EnvEntry& sender = st.next.at(k);
        sender.queue.erase(sender.queue.begin() + static_cast<long>(i));
        EnvEntry& recv = st.next.at(rit->first);
        recv.nu = resetClocks(recv.nu, b.reset);
        recv.type = b.cont;
        out.push_back(std::move(st));
      }
    }
  }
  for (const auto& t : grid) {
    EnvStep st;
    st.action = alTime(t);
    st.next = envAdvance(env, t);
    out.push_back(std::move(st));
  }
  return out;
}

static void enrouteSenders(const GlobalPtr& g, std::set<Role>& out,
                           std::set<const GlobalType*>& visited) {
  if (visited.count(g.get())) return;
  visited.insert(g.get());
  switch (g->kind) {
    case GlobalType::Kind::CommEnRoute:
      out.insert(g->from);
      [[fallthrough]];
    case GlobalType::Kind::Comm:
      for (const auto& [l, b] : g->branches) enrouteSenders(b.cont, out, visited);
      break;
    case GlobalType::Kind::Rec:
      enrouteSenders(g->body, out, visited);
      break;
    default:
      break;
  }
}

static std::set<Role> activeRolesOf(const GlobalPtr& g) {
  std::set<Role> out = roles(g);
  std::set<const GlobalType*> visited;
  enrouteSenders(g, out, visited);
  return out;
}

static std::string residueDump(const std::map<Role, QueueType>& residues) {
  Json j = Json::object();
  for (const auto& [r, q] : residues) j[r] = queueToJson(q);
  return j.dump();
}

namespace {
struct QueueWalker {
  std::vector<std::string>& failures;
  std::set<std::pair<const GlobalType*, std::string>> okCache;

  bool fail(const std::string& item, const std::string& why) {
    failures.push_back(item + ": " + why);
    return false;
  }

  bool walk(const GlobalPtr& g, std::map<Role, QueueType> residues) {
    auto key = std::make_pair(static_cast<const GlobalType*>(g.get()), residueDump(residues));
    if (okCache.count(key)) return true;
    switch (g->kind) {
      case GlobalType::Kind::End:
      case GlobalType::Kind::Rec:
      case GlobalType::Kind::Var:
        for (const auto& [r, q] : residues) {
          if (!q.empty()) {
            return fail("queue-residue", "endpoint " + r + " still has " +
                                             std::to_string(q.size()) +
                                             " queued message(s) with no transmission in "
                                             "flight");
          }
        }
        okCache.insert(key);
        return true;
      case GlobalType::Kind::Comm: {
        const auto& q = residues[g->from];
        for (const auto& m : q) {
          if (m.receiver == g->to) {
            return fail("queue-live-transmission",
                        "queued message " + m.label + " from " + g->from + " to " + g->to +
                            " at a point where the exchange has not started");
          }
        }
        for (const auto& [l, b] : g->branches) {
          if (!walk(b.cont, residues)) return false;
        }
        okCache.insert(key);
        return true;
      }
      case GlobalType::Kind::CommEnRoute: {
        auto& q = residues[g->from];
        size_t idx = q.size();
        for (size_t i = 0; i < q.size(); ++i) {
          if (q[i].receiver == g->to) {
            idx = i;
            break;
          }
        }
        if (idx == q.size()) {
          return fail("enroute-head", "no queued message from " + g->from + " to " + g->to +
                                          " backing the in-flight " + g->chosen);
        }
        if (q[idx].label != g->chosen) {
          return fail("enroute-head", "queued label " + q[idx].label +
                                          " does not match the in-flight " + g->chosen);
        }
        const auto& b = g->branches.at(g->chosen);
        if (!subtypeSort(q[idx].payload, b.payload)) {
          return fail("enroute-payload", "queued payload for " + g->chosen +
                                             " is not a subtype of the declared payload");
        }
        q.erase(q.begin() + static_cast<long>(idx));
        if (!walk(b.cont, residues)) return false;
        okCache.insert(key);
        return true;
      }
    }
    return true;
  }
};
}  // namespace

AssociationReport associated(const TimedGlobalState& s, const TypingEnv& env,
                             const std::string& session) {
  AssociationReport rep;
  auto record = [&](const std::string& item, const std::string& why) {
    rep.ok = false;
    rep.failures.push_back(item + ": " + why);
  };

  std::set<Role> active = activeRolesOf(s.g);
  std::map<Role, const EnvEntry*> endpoints;
  for (const auto& [k, e] : env) {
    if (k.isVar) {
      record("entry-shape", "process variable " + k.var + " cannot occur in an associated "
                                                          "environment");
      continue;
    }
    if (k.session == session) {
      endpoints[k.role] = &e;
    } else {
      // endpoints of other sessions may only linger as finished entries
      bool endShaped = e.hasSession && e.hasQueue && e.queue.empty();
      if (endShaped) {
        LocalPtr t = e.type;
        while (t->kind == LocalType::Kind::Rec) t = unfoldOne(t);
        endShaped = t->kind == LocalType::Kind::End;
      }
      if (!endShaped) {
        record("end-entries", printEnvKey(k) + " belongs to another session and is not a "
                                               "finished entry with an empty queue");
      }
    }
  }

  for (const auto& p : active) {
    auto it = endpoints.find(p);
    if (it == endpoints.end()) {
      record("domain-coverage", "no entry for " + session + "[" + p + "]");
      continue;
    }
    if (!it->second->hasSession || !it->second->hasQueue) {
      record("entry-shape", session + "[" + p + "] lacks a session or queue part");
    }
  }
  if (!rep.ok) return rep;

  // finished endpoints of this session must carry end with an empty queue
  for (const auto& [r, e] : endpoints) {
    if (active.count(r)) continue;
    if (!e->hasSession || !e->hasQueue) {
      record("entry-shape", session + "[" + r + "] lacks a session or queue part");
      continue;
    }
    LocalPtr t = e->type;
    while (t->kind == LocalType::Kind::Rec) t = unfoldOne(t);
    if (t->kind != LocalType::Kind::End) {
      record("end-entries", session + "[" + r + "] is not active in the global type but "
                                                "its type is not end");
    }
    if (!e->queue.empty()) {
      record("end-entries", session + "[" + r + "] is finished but its queue is nonempty");
    }
  }
  if (!rep.ok) return rep;

  for (const auto& p : active) {
    const EnvEntry& e = *endpoints.at(p);
    LocalPtr proj;
    try {
      proj = project(s.g, p);
    } catch (const ProjectionError& ex) {
      record("projection-subtype", std::string("projection onto ") + p + " undefined: " +
                                       ex.what());
      continue;
    }
    if (!subtype(proj, e.type)) {
      record("projection-subtype", "projection onto " + p + " is not a subtype of the "
                                                            "entry type");
    }
  }

  std::vector<ClockValuation> slices;
  for (const auto& [r, e] : endpoints) {
    if (e->hasSession) slices.push_back(e->nu);
  }
  if (!(overrideUnion(slices) == s.nu)) {
    record("valuation-union", "override union of the per-endpoint valuations differs from "
                              "the global valuation");
  }

  std::map<Role, QueueType> residues;
  for (const auto& p : active) residues[p] = endpoints.at(p)->queue;
  std::vector<std::string> queueFailures;
  QueueWalker walker{queueFailures, {}};
  if (!walker.walk(s.g, residues)) {
    rep.ok = false;
    rep.failures.insert(rep.failures.end(), queueFailures.begin(), queueFailures.end());
  }
  return rep;
}

TypingEnv canonicalEnv(const TimedGlobalState& s, const std::string& session) {
  TypingEnv out;
  std::set<Role> active = activeRolesOf(s.g);
  if (active.empty()) return out;
  ClockOwnership own = inferOwnership(s.g);
  std::set<Clock> assigned;
  for (const auto& [r, cs] : own) assigned.insert(cs.begin(), cs.end());
  for (const auto& p : active) {
    ClockValuation nu;
    for (const auto& c : own[p]) {
      auto it = s.nu.find(c);
      if (it != s.nu.end()) nu[c] = it->second;
    }
    if (p == *active.begin()) {
      for (const auto& [c, v] : s.nu) {
        if (!assigned.count(c)) nu[c] = v;
      }
    }
    out.emplace(epKey(session, p), combinedEntry(nu, project(s.g, p), queueEnvOf(s.g, p)));
  }
  return out;
}

namespace {
struct SearchNode {
  TimedGlobalState state;
  TypingEnv env;
  std::vector<std::string> trace;
  int depth = 0;
};
}  // namespace

CorrespondenceReport checkCompleteness(const TimedGlobalState& s, const TypingEnv& env,
                                       const std::string& session, int depth,
                                       const std::vector<Rat>& grid) {
  CorrespondenceReport rep;
  auto root = associated(s, env, session);
  if (!root.ok) {
    rep.ok = false;
    rep.detail = "root is not associated: " + root.failures.front();
    return rep;
  }
  std::deque<SearchNode> queue;
  std::set<std::string> visited;
  queue.push_back({s, env, {}, 0});
  visited.insert(stateHash(s) + "|" + envHash(env));
  while (!queue.empty()) {
    SearchNode node = std::move(queue.front());
    queue.pop_front();
    rep.visited++;
    auto globalSteps = gtSteps(node.state, session, grid);
    for (const auto& es : envSteps(node.env, grid)) {
      bool matched = false;
      std::string why = "no global step with this label";
      for (const auto& gs : globalSteps) {
        if (!actionEq(gs.action, es.action)) continue;
        auto assoc = associated(gs.next, es.next, session);
        if (assoc.ok) {
          matched = true;
          if (node.depth + 1 <= depth) {
            std::string key = stateHash(gs.next) + "|" + envHash(es.next);
            if (!visited.count(key)) {
              visited.insert(key);
              SearchNode next{gs.next, es.next, node.trace, node.depth + 1};
              next.trace.push_back(printAction(es.action));
              queue.push_back(std::move(next));
            }
          }
          break;
        }
        why = "a global step with this label exists but the successors are not "
              "associated (" +
              assoc.failures.front() + ")";
      }
      if (!matched) {
        rep.ok = false;
        rep.counterexample = node.trace;
        rep.counterexample.push_back(printAction(es.action));
        rep.detail = why;
        return rep;
      }
    }
  }
  return rep;
}

CorrespondenceReport checkSoundness(const TimedGlobalState& s, const TypingEnv& env,
                                    const std::string& session, int depth,
                                    const std::vector<Rat>& grid) {
  CorrespondenceReport rep;
  auto root = associated(s, env, session);
  if (!root.ok) {
    rep.ok = false;
    rep.detail = "root is not associated: " + root.failures.front();
    return rep;
  }
  std::deque<SearchNode> queue;
  std::set<std::string> visited;
  queue.push_back({s, env, {}, 0});
  visited.insert(stateHash(s) + "|" + envHash(env));
  while (!queue.empty()) {
    SearchNode node = std::move(queue.front());
    queue.pop_front();
    rep.visited++;
    auto globalSteps = gtSteps(node.state, session, grid);
    if (globalSteps.empty()) continue;
    auto environSteps = envSteps(node.env, grid);
    std::vector<std::pair<GtStep, EnvStep>> witnesses;
    for (const auto& gs : globalSteps) {
      for (const auto& es : environSteps) {
        if (!actionEq(gs.action, es.action)) continue;
        if (associated(gs.next, es.next, session).ok) {
          witnesses.emplace_back(gs, es);
        }
      }
    }
    if (witnesses.empty()) {
      // a matching move may only open up after letting time pass
      for (const auto& t : grid) {
        TimedGlobalState st{atmp::advance(node.state.nu, t), node.state.g};
        TypingEnv et = envAdvance(node.env, t);
        if (!associated(st, et, session).ok) continue;
        auto gAfter = gtSteps(st, session, {});
        auto eAfter = envSteps(et, {});
        for (const auto& gs : gAfter) {
          for (const auto& es : eAfter) {
            if (!actionEq(gs.action, es.action)) continue;
            if (associated(gs.next, es.next, session).ok) {
              GtStep gcomb = gs;
              EnvStep ecomb = es;
              witnesses.emplace_back(gcomb, ecomb);
            }
          }
          if (!witnesses.empty()) break;
        }
        if (!witnesses.empty()) break;
      }
    }
    if (witnesses.empty()) {
      rep.ok = false;
      rep.counterexample = node.trace;
      rep.detail = "the global type can move but no jointly matching environment move "
                   "re-establishes the association";
      return rep;
    }
    if (node.depth + 1 <= depth) {
      for (const auto& [gs, es] : witnesses) {
        std::string key = stateHash(gs.next) + "|" + envHash(es.next);
        if (visited.count(key)) continue;
        visited.insert(key);
        SearchNode next{gs.next, es.next, node.trace, node.depth + 1};
        next.trace.push_back(printAction(gs.action));
        queue.push_back(std::move(next));
      }
    }
  }
  return rep;
}

CorrespondenceReport checkPerLabelSoundness(const TimedGlobalState& s,
                                            const TypingEnv& env,
                                            const std::string& session, int depth,
                                            const std::vector<Rat>& grid) {
  CorrespondenceReport rep;
  auto root = associated(s, env, session);
  if (!root.ok) {
    rep.ok = false;
    rep.detail = "root is not associated: " + root.failures.front();
    return rep;
  }
  std::deque<SearchNode> queue;
  std::set<std::string> visited;
  queue.push_back({s, env, {}, 0});
  visited.insert(stateHash(s) + "|" + envHash(env));
  while (!queue.empty()) {
    SearchNode node = std::move(queue.front());
    queue.pop_front();
    rep.visited++;
    auto environSteps = envSteps(node.env, grid);
    for (const auto& gs : gtSteps(node.state, session, grid)) {
      bool matched = false;
      std::string why = "no environment step with this label";
      for (const auto& es : environSteps) {
        if (!actionEq(gs.action, es.action)) continue;
        auto assoc = associated(gs.next, es.next, session);
        if (assoc.ok) {
          matched = true;
          if (node.depth + 1 <= depth) {
            std::string key = stateHash(gs.next) + "|" + envHash(es.next);
            if (!visited.count(key)) {
              visited.insert(key);
              SearchNode next{gs.next, es.next, node.trace, node.depth + 1};
              next.trace.push_back(printAction(gs.action));
              queue.push_back(std::move(next));
            }
          }
          break;
        }
        why = "an environment step with this label exists but the successors are not "
              "associated (" +
              assoc.failures.front() + ")";
      }
      if (!matched) {
        rep.ok = false;
        rep.counterexample = node.trace;
        rep.counterexample.push_back(printAction(gs.action));
        rep.detail = why;
        return rep;
      }
    }
  }
  return rep;
}

static Sort eraseSort(const Sort& s);

static LocalPtr eraseLocal(const LocalPtr& t) {
  switch (t->kind) {
    case LocalType::Kind::IntChoice:
    case LocalType::Kind::ExtChoice: {
      std::map<Label, LocalBranch> nb;
      for (const auto& [l, b] : t->branches) {
        LocalBranch c;
        c.payload = eraseSort(b.payload);
        c.guard = ctTrue();
        c.reset = {};
        c.cont = eraseLocal(b.cont);
        nb.emplace(l, std::move(c));
      }
      return t->kind == LocalType::Kind::IntChoice ? lIntChoice(t->partner, std::move(nb))
                                                   : lExtChoice(t->partner, std::move(nb));
    }
    case LocalType::Kind::Rec:
      return lRec(t->var, eraseLocal(t->body));
    case LocalType::Kind::Var:
      return lVar(t->var);
    case LocalType::Kind::End:
      return lEnd();
  }
  return t;
}

static Sort eraseSort(const Sort& s) {
  if (s.kind == Sort::Kind::Base) return s;
  return sortDelegation(ctTrue(), eraseLocal(s.continuation));
}

TypingEnv untimedErase(const TypingEnv& env) {
  TypingEnv out;
  for (const auto& [k, e] : env) {
    EnvEntry n = e;
    if (n.hasSession) {
      n.nu = {};
      n.type = eraseLocal(n.type);
    }
    if (n.hasQueue) {
      for (auto& m : n.queue) m.payload = eraseSort(m.payload);
    }
    out.emplace(k, n);
  }
  return out;
}

SafetyReport checkSafety(const TypingEnv& untimed, int depth) {
  SafetyReport rep;
  std::deque<SearchNode> queue;
  std::set<std::string> visited;
  queue.push_back({TimedGlobalState{}, untimed, {}, 0});
  visited.insert(envHash(untimed));
  while (!queue.empty()) {
    SearchNode node = std::move(queue.front());
    queue.pop_front();
    rep.visited++;
    // every head-of-queue message aimed at an endpoint that is currently
    // branching on its sender must be receivable
    for (const auto& [k, e] : node.env) {
      if (k.isVar || !e.hasQueue) continue;
      std::set<Role> seen;
      for (const auto& m : e.queue) {
        if (seen.count(m.receiver)) continue;
        seen.insert(m.receiver);
        auto rit = node.env.find(epKey(k.session, m.receiver));
        if (rit == node.env.end() || !rit->second.hasSession) continue;
        LocalPtr rt = rit->second.type;
        while (rt->kind == LocalType::Kind::Rec) rt = unfoldOne(rt);
        if (rt->kind != LocalType::Kind::ExtChoice || rt->partner != k.role) continue;
        auto bit = rt->branches.find(m.label);
        if (bit == rt->branches.end()) {
          rep.ok = false;
          rep.counterexample = node.trace;
          rep.detail = "queued message " + m.label + " from " + k.role + " has no matching "
                       "branch at " + printEnvKey(rit->first);
          return rep;
        }
        if (!subtypeSort(m.payload, bit->second.payload)) {
          rep.ok = false;
          rep.counterexample = node.trace;
          rep.detail = "queued payload of " + m.label + " from " + k.role +
                       " is not a subtype of the expected payload at " +
                       printEnvKey(rit->first);
          return rep;
        }
      }
    }
    if (node.depth >= depth) continue;
    for (const auto& es : envSteps(node.env, {})) {
      std::string key = envHash(es.next);
      if (visited.count(key)) continue;
      visited.insert(key);
      SearchNode next{TimedGlobalState{}, es.next, node.trace, node.depth + 1};
      next.trace.push_back(printAction(es.action));
      queue.push_back(std::move(next));
    }
  }
  return rep;
}

}  // namespace atmp
