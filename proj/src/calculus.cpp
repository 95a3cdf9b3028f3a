#include "atmp/calculus.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

namespace atmp {

Chan chanEp(const std::string& session, const Role& role) {
  Chan c;
  c.session = session;
  c.role = role;
  return c;
}

Chan chanVar(const std::string& name) {
  Chan c;
  c.isVar = true;
  c.var = name;
  return c;
}

bool chanEq(const Chan& a, const Chan& b) {
  if (a.isVar != b.isVar) return false;
  if (a.isVar) return a.var == b.var;
  return a.session == b.session && a.role == b.role;
}

std::string printChan(const Chan& c) {
  if (c.isVar) return c.var;
  return c.session + "[" + c.role + "]";
}

ProcPtr pNil() {
  static const ProcPtr nil = std::make_shared<Process>();
  return nil;
}

ProcPtr pErr() {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Err;
  return p;
}

ProcPtr pPar(std::vector<ProcPtr> items) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Par;
  p->items = std::move(items);
  return p;
}

ProcPtr pRestrict(const std::string& session, const ProcPtr& body,
                  const std::optional<SessionAnnotation>& annotation) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Restrict;
  p->session = session;
  p->body = body;
  p->annotation = annotation;
  return p;
}

ProcPtr pSelect(const Chan& chan, const Role& to, const Label& label,
                const std::optional<Chan>& payload, const ExtendedTime& timeout,
                const ProcPtr& cont) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Select;
  p->chan = chan;
  p->partner = to;
  p->label = label;
  p->payload = payload;
  p->timeout = timeout;
  p->cont = cont;
  return p;
}

ProcPtr pBranch(const Chan& chan, const Role& from, std::map<Label, ProcBranch> branches,
                const ExtendedTime& timeout) {
  if (branches.empty()) throw std::invalid_argument("branching needs at least one label");
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Branch;
  p->chan = chan;
  p->partner = from;
  p->branches = std::move(branches);
  p->timeout = timeout;
  return p;
}

ProcPtr pDef(const std::string& name, std::vector<std::string> params, const ProcPtr& body,
             const ProcPtr& scope,
             std::vector<std::pair<ClockValuation, LocalPtr>> paramTypes) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Def;
  p->defName = name;
  p->defParams = std::move(params);
  p->defParamTypes = std::move(paramTypes);
  p->body = body;
  p->cont = scope;
  return p;
}

ProcPtr pCall(const std::string& name, std::vector<Chan> args) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Call;
  p->defName = name;
  p->callArgs = std::move(args);
  return p;
}

ProcPtr pDelayConstraint(const ConstraintPtr& guard, const Clock& clock,
                         const ProcPtr& cont) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::DelayConstraint;
  p->delayGuard = guard;
  p->delayClock = clock;
  p->cont = cont;
  return p;
}

ProcPtr pDelayExact(const Rat& t, const ProcPtr& cont) {
  requireNonNeg(t, "exact delay");
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::DelayExact;
  p->delayTime = t;
  p->cont = cont;
  return p;
}

ProcPtr pFailed(const ProcPtr& inner) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Failed;
  p->body = inner;
  return p;
}

ProcPtr pTry(const ProcPtr& body, const ProcPtr& catcher) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Try;
  p->tryBody = body;
  p->catchBody = catcher;
  return p;
}

ProcPtr pCancel(const Chan& chan, const ProcPtr& cont) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Cancel;
  p->chan = chan;
  p->cont = cont;
  return p;
}

ProcPtr pKill(const std::string& session) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Kill;
  p->session = session;
  return p;
}

ProcPtr pQueue(const std::string& session, const Role& owner, std::vector<QueueMsg> msgs) {
  auto p = std::make_shared<Process>();
  p->kind = Process::Kind::Queue;
  p->session = session;
  p->owner = owner;
  p->msgs = std::move(msgs);
  return p;
}

static std::string printPayload(const std::optional<Chan>& payload) {
  return payload ? printChan(*payload) : "";
}

std::string printProcess(const ProcPtr& p) {
  switch (p->kind) {
    case Process::Kind::Nil:
      return "0";
    case Process::Kind::Err:
      return "err";
    case Process::Kind::Kill:
      return "kill " + p->session;
    case Process::Kind::Par: {
      std::string out = "(";
      for (size_t i = 0; i < p->items.size(); ++i) {
        if (i) out += " | ";
        out += printProcess(p->items[i]);
      }
      return out + ")";
    }
    case Process::Kind::Restrict:
      return "(new " + p->session + ")(" + printProcess(p->body) + ")";
    case Process::Kind::Select:
      return printChan(p->chan) + "!" + p->partner + ":" + p->label + "(" +
             printPayload(p->payload) + "){" + printExtendedTime(p->timeout) + "}." +
             printProcess(p->cont);
    case Process::Kind::Branch: {
      std::string out = printChan(p->chan) + "?" + p->partner + "{";
      bool first = true;
      for (const auto& [l, b] : p->branches) {
        if (!first) out += ", ";
        first = false;
        out += l + "(" + (b.payloadVar ? *b.payloadVar : "") + ")." + printProcess(b.cont);
      }
      return out + "}{" + printExtendedTime(p->timeout) + "}";
    }
    case Process::Kind::Def: {
      std::string out = "def " + p->defName + "(";
      for (size_t i = 0; i < p->defParams.size(); ++i) {
        if (i) out += ",";
        out += p->defParams[i];
      }
      return out + ")=" + printProcess(p->body) + " in " + printProcess(p->cont);
    }
    case Process::Kind::Call: {
      std::string out = p->defName + "<";
      for (size_t i = 0; i < p->callArgs.size(); ++i) {
        if (i) out += ",";
        out += printChan(p->callArgs[i]);
      }
      return out + ">";
    }
    case Process::Kind::DelayConstraint:
      return "delay{" + printConstraint(p->delayGuard) + "}." + printProcess(p->cont);
    case Process::Kind::DelayExact:
      return "delay(" + printTime(p->delayTime) + ")." + printProcess(p->cont);
    case Process::Kind::Failed:
      return "failed(" + printProcess(p->body) + ")";
    case Process::Kind::Try:
      return "try " + printProcess(p->tryBody) + " catch " + printProcess(p->catchBody);
    case Process::Kind::Cancel:
      return "cancel(" + printChan(p->chan) + ")." + printProcess(p->cont);
    case Process::Kind::Queue: {
      std::string out = "queue " + p->session + "[" + p->owner + "]<";
      for (size_t i = 0; i < p->msgs.size(); ++i) {
        if (i) out += "; ";
        out += "(" + p->msgs[i].to + "," + p->msgs[i].label + "(" +
               printPayload(p->msgs[i].payload) + "))";
      }
      return out + ">";
    }
  }
  return "?";
}

static void flattenInto(const ProcPtr& p, std::vector<ProcPtr>& out) {
  if (p->kind == Process::Kind::Par) {
    for (const auto& it : p->items) flattenInto(it, out);
  } else if (p->kind != Process::Kind::Nil) {
    out.push_back(p);
  }
}

static std::vector<ProcPtr> flattenPar(const ProcPtr& p) {
  std::vector<ProcPtr> out;
  flattenInto(p, out);
  return out;
}

static bool usesDefName(const ProcPtr& p, const std::string& name) {
  switch (p->kind) {
    case Process::Kind::Nil:
    case Process::Kind::Err:
    case Process::Kind::Kill:
    case Process::Kind::Queue:
      return false;
    case Process::Kind::Call:
      return p->defName == name;
    case Process::Kind::Def:
      if (p->defName == name) return false;
      return usesDefName(p->body, name) || usesDefName(p->cont, name);
    case Process::Kind::Par:
      for (const auto& it : p->items) {
        if (usesDefName(it, name)) return true;
      }
      return false;
    case Process::Kind::Restrict:
    case Process::Kind::Failed:
      return usesDefName(p->body, name);
    case Process::Kind::Select:
    case Process::Kind::Cancel:
    case Process::Kind::DelayConstraint:
    case Process::Kind::DelayExact:
      return usesDefName(p->cont, name);
    case Process::Kind::Branch:
      for (const auto& [label, br] : p->branches) {
        if (usesDefName(br.cont, name)) return true;
      }
      return false;
    case Process::Kind::Try:
      return usesDefName(p->tryBody, name) || usesDefName(p->catchBody, name);
  }
  return false;
}

static ProcPtr bundleOf(std::vector<ProcPtr> items) {
  if (items.empty()) return pNil();
  if (items.size() == 1) return items[0];
  return pPar(std::move(items));
}

ProcPtr substChans(const ProcPtr& p, const std::map<std::string, Chan>& sub) {
  if (sub.empty()) return p;
  auto mapChan = [&](const Chan& c) {
    if (c.isVar) {
      auto it = sub.find(c.var);
      if (it != sub.end()) return it->second;
    }
    return c;
  };
  switch (p->kind) {
    case Process::Kind::Nil:
    case Process::Kind::Err:
    case Process::Kind::Kill:
      return p;
    case Process::Kind::Par: {
      std::vector<ProcPtr> items;
      items.reserve(p->items.size());
      for (const auto& it : p->items) items.push_back(substChans(it, sub));
      return pPar(std::move(items));
    }
    case Process::Kind::Restrict:
      return pRestrict(p->session, substChans(p->body, sub), p->annotation);
    case Process::Kind::Select: {
      std::optional<Chan> payload = p->payload;
      if (payload) payload = mapChan(*payload);
      return pSelect(mapChan(p->chan), p->partner, p->label, payload, p->timeout,
                     substChans(p->cont, sub));
    }
    case Process::Kind::Branch: {
      std::map<Label, ProcBranch> nb;
      for (const auto& [l, b] : p->branches) {
        if (b.payloadVar && sub.count(*b.payloadVar)) {
          auto inner = sub;
          inner.erase(*b.payloadVar);
          nb.emplace(l, ProcBranch{b.payloadVar, substChans(b.cont, inner)});
        } else {
          nb.emplace(l, ProcBranch{b.payloadVar, substChans(b.cont, sub)});
        }
      }
      return pBranch(mapChan(p->chan), p->partner, std::move(nb), p->timeout);
    }
    case Process::Kind::Def: {
      auto inner = sub;
      for (const auto& param : p->defParams) inner.erase(param);
      return pDef(p->defName, p->defParams, substChans(p->body, inner),
                  substChans(p->cont, sub), p->defParamTypes);
    }
    case Process::Kind::Call: {
      std::vector<Chan> args;
      args.reserve(p->callArgs.size());
      for (const auto& a : p->callArgs) args.push_back(mapChan(a));
      return pCall(p->defName, std::move(args));
    }
    case Process::Kind::DelayConstraint:
      return pDelayConstraint(p->delayGuard, p->delayClock, substChans(p->cont, sub));
    case Process::Kind::DelayExact:
      return pDelayExact(p->delayTime, substChans(p->cont, sub));
    case Process::Kind::Failed:
      return pFailed(substChans(p->body, sub));
    case Process::Kind::Try:
      return pTry(substChans(p->tryBody, sub), substChans(p->catchBody, sub));
    case Process::Kind::Cancel:
      return pCancel(mapChan(p->chan), substChans(p->cont, sub));
    case Process::Kind::Queue: {
      std::vector<QueueMsg> msgs = p->msgs;
      for (auto& m : msgs) {
        if (m.payload) m.payload = mapChan(*m.payload);
      }
      return pQueue(p->session, p->owner, std::move(msgs));
    }
  }
  return p;
}

namespace {

using DefsEnv = std::map<std::string, std::pair<std::vector<std::string>, ProcPtr>>;

struct SubjectScan {
  std::set<std::string> expanding;
  int budget = 10000;

  void scan(const ProcPtr& p, DefsEnv defs, std::set<Subject>& out) {
    if (--budget < 0) throw UnboundedCallExpansion("process definition expansion too deep");
    switch (p->kind) {
      case Process::Kind::Nil:
      case Process::Kind::Err:
      case Process::Kind::Kill:
        return;
      case Process::Kind::Par:
        for (const auto& it : p->items) scan(it, defs, out);
        return;
      case Process::Kind::Restrict: {
        std::set<Subject> inner;
        scan(p->body, defs, inner);
        for (const auto& s : inner) {
          if (s.session != p->session) out.insert(s);
        }
        return;
      }
      case Process::Kind::Select:
        if (!p->chan.isVar) out.insert({p->chan.session, p->chan.role, false});
        scan(p->cont, defs, out);
        return;
      case Process::Kind::Branch:
        if (!p->chan.isVar) out.insert({p->chan.session, p->chan.role, false});
        for (const auto& [l, b] : p->branches) scan(b.cont, defs, out);
        return;
      case Process::Kind::Def:
        defs[p->defName] = {p->defParams, p->body};
        scan(p->cont, defs, out);
        return;
      case Process::Kind::Call: {
        auto it = defs.find(p->defName);
        if (it == defs.end()) return;
        std::string key = p->defName + "(";
        for (const auto& a : p->callArgs) key += printChan(a) + ",";
        key += ")";
        if (expanding.count(key)) return;
        expanding.insert(key);
        const auto& [params, body] = it->second;
        std::map<std::string, Chan> sub;
        for (size_t i = 0; i < params.size() && i < p->callArgs.size(); ++i) {
          sub[params[i]] = p->callArgs[i];
        }
        scan(substChans(body, sub), defs, out);
        expanding.erase(key);
        return;
      }
      case Process::Kind::DelayConstraint:
      case Process::Kind::DelayExact:
        scan(p->cont, defs, out);
        return;
      case Process::Kind::Failed:
        scan(p->body, defs, out);
        return;
      case Process::Kind::Try:
        scan(p->tryBody, defs, out);
        return;
      case Process::Kind::Cancel:
        if (!p->chan.isVar) out.insert({p->chan.session, p->chan.role, false});
        scan(p->cont, defs, out);
        return;
      case Process::Kind::Queue:
        out.insert({p->session, p->owner, true});
        return;
    }
  }
};

std::set<Subject> subjectsWithDefs(const ProcPtr& p, const DefsEnv& defs) {
  std::set<Subject> out;
  SubjectScan scan;
  scan.scan(p, defs, out);
  return out;
}

// The unique live endpoint a process works on, if there is exactly one.
std::optional<std::pair<std::string, Role>> soleSubject(const ProcPtr& p,
                                                        const DefsEnv& defs) {
  auto subs = subjectsWithDefs(p, defs);
  if (subs.size() != 1) return std::nullopt;
  const Subject& s = *subs.begin();
  if (s.queue) return std::nullopt;
  return std::make_pair(s.session, s.role);
}

}  // namespace

std::set<Subject> subjects(const ProcPtr& p) { return subjectsWithDefs(p, {}); }

std::optional<ProcPtr> timePass(const ProcPtr& p, const Rat& t) {
  switch (p->kind) {
    case Process::Kind::Nil:
    case Process::Kind::Err:
    case Process::Kind::Kill:
    case Process::Kind::Queue:
    case Process::Kind::Failed:
    case Process::Kind::Call:
      return p;
    case Process::Kind::Par: {
      std::vector<ProcPtr> items;
      items.reserve(p->items.size());
      for (const auto& it : p->items) {
        auto next = timePass(it, t);
        if (!next) return std::nullopt;
        items.push_back(*next);
      }
      return pPar(std::move(items));
    }
    case Process::Kind::Restrict: {
      auto next = timePass(p->body, t);
      if (!next) return std::nullopt;
      return pRestrict(p->session, *next, p->annotation);
    }
    case Process::Kind::Def: {
      auto next = timePass(p->cont, t);
      if (!next) return std::nullopt;
      return pDef(p->defName, p->defParams, p->body, *next, p->defParamTypes);
    }
    case Process::Kind::Try: {
      auto nb = timePass(p->tryBody, t);
      auto nc = timePass(p->catchBody, t);
      if (!nb || !nc) return std::nullopt;
      return pTry(*nb, *nc);
    }
    case Process::Kind::Cancel: {
      auto next = timePass(p->cont, t);
      if (!next) return std::nullopt;
      return pCancel(p->chan, *next);
    }
    case Process::Kind::DelayConstraint:
      return std::nullopt;
    case Process::Kind::DelayExact:
      if (p->delayTime >= t) return pDelayExact(Rat(p->delayTime - t), p->cont);
      return std::nullopt;
    case Process::Kind::Select: {
      if (p->timeout.infinite) return p;
      if (p->timeout.value >= t) {
        return pSelect(p->chan, p->partner, p->label, p->payload,
                       etFinite(Rat(p->timeout.value - t)), p->cont);
      }
      return pFailed(pSelect(p->chan, p->partner, p->label, p->payload, etFinite(Rat(0)),
                             p->cont));
    }
    case Process::Kind::Branch: {
      if (p->timeout.infinite) return p;
      if (p->timeout.value >= t) {
        return pBranch(p->chan, p->partner, p->branches, etFinite(Rat(p->timeout.value - t)));
      }
      return pFailed(pBranch(p->chan, p->partner, p->branches, etFinite(Rat(0))));
    }
  }
  return std::nullopt;
}

static bool mentionsSession(const ProcPtr& p, const std::string& session) {
  auto chanHits = [&](const Chan& c) { return !c.isVar && c.session == session; };
  switch (p->kind) {
    case Process::Kind::Nil:
    case Process::Kind::Err:
      return false;
    case Process::Kind::Kill:
    case Process::Kind::Queue:
      if (p->session == session) return true;
      if (p->kind == Process::Kind::Queue) {
        for (const auto& m : p->msgs) {
          if (m.payload && chanHits(*m.payload)) return true;
        }
      }
      return false;
    case Process::Kind::Par:
      for (const auto& it : p->items) {
        if (mentionsSession(it, session)) return true;
      }
      return false;
    case Process::Kind::Restrict:
      if (p->session == session) return false;
      return mentionsSession(p->body, session);
    case Process::Kind::Select:
      if (chanHits(p->chan)) return true;
      if (p->payload && chanHits(*p->payload)) return true;
      return mentionsSession(p->cont, session);
    case Process::Kind::Branch:
      if (chanHits(p->chan)) return true;
      for (const auto& [l, b] : p->branches) {
        if (mentionsSession(b.cont, session)) return true;
      }
      return false;
    case Process::Kind::Def:
      return mentionsSession(p->body, session) || mentionsSession(p->cont, session);
    case Process::Kind::Call:
      for (const auto& a : p->callArgs) {
        if (chanHits(a)) return true;
      }
      return false;
    case Process::Kind::DelayConstraint:
    case Process::Kind::DelayExact:
      return mentionsSession(p->cont, session);
    case Process::Kind::Failed:
      return mentionsSession(p->body, session);
    case Process::Kind::Try:
      return mentionsSession(p->tryBody, session) || mentionsSession(p->catchBody, session);
    case Process::Kind::Cancel:
      if (chanHits(p->chan)) return true;
      return mentionsSession(p->cont, session);
  }
  return false;
}

ProcPtr congNormalize(const ProcPtr& p) {
  switch (p->kind) {
    case Process::Kind::Nil:
    case Process::Kind::Err:
    case Process::Kind::Kill:
    case Process::Kind::Call:
      return p;
    case Process::Kind::Queue: {
      std::vector<QueueMsg> msgs = p->msgs;
      std::stable_sort(msgs.begin(), msgs.end(),
                       [](const QueueMsg& a, const QueueMsg& b) { return a.to < b.to; });
      return pQueue(p->session, p->owner, std::move(msgs));
    }
    case Process::Kind::Select:
      return pSelect(p->chan, p->partner, p->label, p->payload, p->timeout,
                     congNormalize(p->cont));
    case Process::Kind::Branch: {
      std::map<Label, ProcBranch> nb;
      for (const auto& [l, b] : p->branches) {
        nb.emplace(l, ProcBranch{b.payloadVar, congNormalize(b.cont)});
      }
      return pBranch(p->chan, p->partner, std::move(nb), p->timeout);
    }
    case Process::Kind::DelayConstraint:
      return pDelayConstraint(p->delayGuard, p->delayClock, congNormalize(p->cont));
    case Process::Kind::DelayExact: {
      ProcPtr cont = congNormalize(p->cont);
      if (p->delayTime == 0) return cont;
      return pDelayExact(p->delayTime, cont);
    }
    case Process::Kind::Failed:
      return pFailed(congNormalize(p->body));
    case Process::Kind::Try:
      return pTry(congNormalize(p->tryBody), congNormalize(p->catchBody));
    case Process::Kind::Cancel:
      return pCancel(p->chan, congNormalize(p->cont));
    case Process::Kind::Def: {
      ProcPtr scope = congNormalize(p->cont);
      if (scope->kind == Process::Kind::Nil) return pNil();
      if (!usesDefName(scope, p->defName)) return scope;
      return pDef(p->defName, p->defParams, congNormalize(p->body), scope, p->defParamTypes);
    }
    case Process::Kind::Restrict: {
      ProcPtr body = congNormalize(p->body);
      bool disposable = true;
      for (const auto& it : flattenPar(body)) {
        bool deadQueue = it->kind == Process::Kind::Queue && it->session == p->session &&
                         it->msgs.empty();
        bool ownKill = it->kind == Process::Kind::Kill && it->session == p->session;
        if (!deadQueue && !ownKill) {
          disposable = false;
          break;
        }
      }
      if (disposable) return pNil();
      return pRestrict(p->session, body, p->annotation);
    }
    case Process::Kind::Par: {
      std::vector<ProcPtr> items;
      for (const auto& it : flattenPar(p)) {
        ProcPtr n = congNormalize(it);
        if (n->kind == Process::Kind::Nil) continue;
        flattenInto(n, items);
      }
      // dedup kills
      std::set<std::string> kills;
      std::vector<ProcPtr> kept;
      for (const auto& it : items) {
        if (it->kind == Process::Kind::Kill) {
          if (kills.count(it->session)) continue;
          kills.insert(it->session);
        }
        kept.push_back(it);
      }
      // garbage-collect empty queues of killed sessions nothing refers to
      std::vector<ProcPtr> alive;
      for (const auto& it : kept) {
        if (it->kind == Process::Kind::Queue && it->msgs.empty() &&
            kills.count(it->session)) {
          bool referenced = false;
          for (const auto& other : kept) {
            if (other == it) continue;
            if (other->kind == Process::Kind::Kill && other->session == it->session) {
              continue;
            }
            if (other->kind == Process::Kind::Queue && other->session == it->session) {
              continue;
            }
            if (mentionsSession(other, it->session)) {
              referenced = true;
              break;
            }
          }
          if (!referenced) continue;
        }
        alive.push_back(it);
      }
      std::stable_sort(alive.begin(), alive.end(), [](const ProcPtr& a, const ProcPtr& b) {
        return printProcess(a) < printProcess(b);
      });
      return bundleOf(std::move(alive));
    }
  }
  return p;
}

bool congruent(const ProcPtr& a, const ProcPtr& b) {
  return printProcess(congNormalize(a)) == printProcess(congNormalize(b));
}

namespace {

struct PeeledItem {
  std::vector<ProcPtr> catchers;  // outermost first
  ProcPtr core;
};

PeeledItem peelTries(const ProcPtr& item) {
  PeeledItem out;
  ProcPtr cur = item;
  while (cur->kind == Process::Kind::Try) {
    out.catchers.push_back(cur->catchBody);
    cur = cur->tryBody;
  }
  out.core = cur;
  return out;
}

ProcPtr rebuildTries(const std::vector<ProcPtr>& catchers, size_t keep, const ProcPtr& core) {
  ProcPtr cur = core;
  for (size_t i = keep; i-- > 0;) cur = pTry(cur, catchers[i]);
  return cur;
}

void collectSessions(const ProcPtr& p, std::set<std::string>& out) {
  auto addChan = [&](const Chan& c) {
    if (!c.isVar) out.insert(c.session);
  };
  switch (p->kind) {
    case Process::Kind::Kill:
    case Process::Kind::Queue:
      out.insert(p->session);
      for (const auto& m : p->msgs) {
        if (m.payload) addChan(*m.payload);
      }
      return;
    case Process::Kind::Restrict:
      out.insert(p->session);
      collectSessions(p->body, out);
      return;
    case Process::Kind::Par:
      for (const auto& it : p->items) collectSessions(it, out);
      return;
    case Process::Kind::Select:
      addChan(p->chan);
      if (p->payload) addChan(*p->payload);
      collectSessions(p->cont, out);
      return;
    case Process::Kind::Branch:
      addChan(p->chan);
      for (const auto& [l, b] : p->branches) collectSessions(b.cont, out);
      return;
    case Process::Kind::Def:
      collectSessions(p->body, out);
      collectSessions(p->cont, out);
      return;
    case Process::Kind::Call:
      for (const auto& a : p->callArgs) addChan(a);
      return;
    case Process::Kind::DelayConstraint:
    case Process::Kind::DelayExact:
      collectSessions(p->cont, out);
      return;
    case Process::Kind::Failed:
      collectSessions(p->body, out);
      return;
    case Process::Kind::Try:
      collectSessions(p->tryBody, out);
      collectSessions(p->catchBody, out);
      return;
    case Process::Kind::Cancel:
      addChan(p->chan);
      collectSessions(p->cont, out);
      return;
    default:
      return;
  }
}

std::string freshSession(const ProcPtr& root) {
  std::set<std::string> used;
  collectSessions(root, used);
  for (size_t i = 0;; ++i) {
    std::string cand = "dead" + std::to_string(i);
    if (!used.count(cand)) return cand;
  }
}

struct Stepper {
  ProcPtr root;

  std::vector<ProcStep> stepBundle(const ProcPtr& scope, DefsEnv defs) {
    std::vector<ProcStep> out;
    std::vector<ProcPtr> items = flattenPar(scope);

    std::map<std::pair<std::string, Role>, size_t> queueAt;
    std::set<std::string> kills;
    for (size_t i = 0; i < items.size(); ++i) {
      if (items[i]->kind == Process::Kind::Queue) {
        queueAt.emplace(std::make_pair(items[i]->session, items[i]->owner), i);
      } else if (items[i]->kind == Process::Kind::Kill) {
        kills.insert(items[i]->session);
      }
    }

    auto emit = [&](const std::string& rule, std::vector<ProcPtr> nextItems) {
      out.push_back(ProcStep{rule, bundleOf(std::move(nextItems))});
    };
    auto replaced = [&](size_t i, const ProcPtr& v) {
      std::vector<ProcPtr> next = items;
      next[i] = v;
      return next;
    };

    for (size_t i = 0; i < items.size(); ++i) {
      PeeledItem peeled = peelTries(items[i]);
      const ProcPtr& core = peeled.core;
      const auto& catchers = peeled.catchers;

      // a surrounding try fires its handler once the session is dead
      if (!catchers.empty() && core->kind != Process::Kind::Failed) {
        auto sole = soleSubject(core, defs);
        if (sole && kills.count(sole->first)) {
          emit("catch " + sole->first, replaced(i, catchers.front()));
        }
      }

      switch (core->kind) {
        case Process::Kind::Select: {
          if (core->chan.isVar) break;
          auto qit = queueAt.find({core->chan.session, core->chan.role});
          if (qit == queueAt.end()) break;
          const ProcPtr& q = items[qit->second];
          std::vector<QueueMsg> msgs = q->msgs;
          msgs.push_back(QueueMsg{core->partner, core->label, core->payload});
          std::vector<ProcPtr> next = items;
          next[i] = core->cont;
          next[qit->second] = pQueue(q->session, q->owner, std::move(msgs));
          emit("out " + printChan(core->chan) + "!" + core->partner + ":" + core->label,
               std::move(next));
          break;
        }
        case Process::Kind::Branch: {
          if (core->chan.isVar) break;
          const std::string& session = core->chan.session;
          auto qit = queueAt.find({session, core->partner});
          const ProcPtr* q = qit == queueAt.end() ? nullptr : &items[qit->second];
          size_t msgIdx = q ? (*q)->msgs.size() : 0;
          if (q) {
            for (size_t m = 0; m < (*q)->msgs.size(); ++m) {
              if ((*q)->msgs[m].to == core->chan.role) {
                msgIdx = m;
                break;
              }
            }
          }
          if (q && msgIdx < (*q)->msgs.size()) {
            const QueueMsg& msg = (*q)->msgs[msgIdx];
            auto bit = core->branches.find(msg.label);
            if (bit != core->branches.end()) {
              std::map<std::string, Chan> sub;
              if (bit->second.payloadVar && msg.payload) {
                sub[*bit->second.payloadVar] = *msg.payload;
              }
              std::vector<QueueMsg> rest = (*q)->msgs;
              rest.erase(rest.begin() + static_cast<long>(msgIdx));
              std::vector<ProcPtr> next = items;
              next[i] = substChans(bit->second.cont, sub);
              next[qit->second] = pQueue((*q)->session, (*q)->owner, std::move(rest));
              emit("in " + printChan(core->chan) + "?" + core->partner + ":" + msg.label,
                   std::move(next));
            } else {
              std::vector<ProcPtr> next;
              for (size_t j = 0; j < items.size(); ++j) {
                if (j == qit->second) continue;
                next.push_back(j == i ? pErr() : items[j]);
              }
              emit("mismatch " + msg.label + " at " + printChan(core->chan),
                   std::move(next));
            }
          } else if (q && kills.count(session)) {
            // the partner is dead and no message will ever arrive
            for (const auto& [l, b] : core->branches) {
              std::vector<ProcPtr> next = items;
              if (b.payloadVar) {
                std::string fresh = freshSession(root);
                Chan freshChan = chanEp(fresh, core->chan.role);
                std::map<std::string, Chan> sub{{*b.payloadVar, freshChan}};
                next[i] = pRestrict(fresh,
                                    pPar({substChans(b.cont, sub), pKill(fresh)}));
              } else {
                next[i] = b.cont;
              }
              emit("cancelled-in " + printChan(core->chan) + ":" + l, std::move(next));
            }
          }
          break;
        }
        case Process::Kind::DelayConstraint: {
          IntervalSet sol = solutionSet(core->delayGuard, core->delayClock);
          Rat horizon(1);
          maxTimeConst(core->delayGuard, horizon);
          for (const auto& t : sampleGrid(sol, horizon)) {
            emit("det delay(" + printTime(t) + ")",
                 replaced(i, pDelayExact(t, core->cont)));
          }
          break;
        }
        case Process::Kind::Cancel: {
          if (core->chan.isVar) break;
          std::vector<ProcPtr> next = items;
          next[i] = core->cont;
          next.push_back(pKill(core->chan.session));
          emit("cancel " + printChan(core->chan), std::move(next));
          break;
        }
        case Process::Kind::Failed: {
          auto sole = soleSubject(core->body, defs);
          if (!sole) break;
          if (!catchers.empty()) {
            ProcPtr handler = catchers.back();
            ProcPtr replacement = rebuildTries(catchers, catchers.size() - 1,
                                               pPar({pKill(sole->first), handler}));
            emit("failcatch " + sole->first, replaced(i, replacement));
          } else {
            emit("fail " + sole->first, replaced(i, pKill(sole->first)));
          }
          break;
        }
        case Process::Kind::Call: {
          auto dit = defs.find(core->defName);
          if (dit == defs.end()) break;
          const auto& [params, body] = dit->second;
          std::map<std::string, Chan> sub;
          for (size_t a = 0; a < params.size() && a < core->callArgs.size(); ++a) {
            sub[params[a]] = core->callArgs[a];
          }
          emit("call " + core->defName,
               replaced(i, rebuildTries(catchers, catchers.size(), substChans(body, sub))));
          break;
        }
        case Process::Kind::Queue: {
          if (core->msgs.empty() || !kills.count(core->session)) break;
          const QueueMsg& head = core->msgs.front();
          std::vector<QueueMsg> rest(core->msgs.begin() + 1, core->msgs.end());
          std::vector<ProcPtr> next = items;
          next[i] = pQueue(core->session, core->owner, std::move(rest));
          if (head.payload && !head.payload->isVar) {
            next.push_back(pKill(head.payload->session));
          }
          emit("cancelled-queue " + core->session + "[" + core->owner + "]",
               std::move(next));
          break;
        }
        case Process::Kind::Restrict: {
          for (const auto& sub : stepBundle(core->body, defs)) {
            emit(sub.rule,
                 replaced(i, rebuildTries(catchers, catchers.size(),
                                          pRestrict(core->session, sub.next,
                                                    core->annotation))));
          }
          break;
        }
        case Process::Kind::Def: {
          DefsEnv inner = defs;
          inner[core->defName] = {core->defParams, core->body};
          for (const auto& sub : stepBundle(core->cont, inner)) {
            emit(sub.rule,
                 replaced(i, rebuildTries(catchers, catchers.size(),
                                          pDef(core->defName, core->defParams, core->body,
                                               sub.next, core->defParamTypes))));
          }
          break;
        }
        default:
          break;
      }
    }
    return out;
  }

  static void maxTimeConst(const ConstraintPtr& c, Rat& m) {
    switch (c->kind) {
      case ClockConstraint::Kind::Gt:
      case ClockConstraint::Kind::Eq:
        if (c->bound + 1 > m) m = c->bound + 1;
        break;
      case ClockConstraint::Kind::Not:
        maxTimeConst(c->lhs, m);
        break;
      case ClockConstraint::Kind::And:
        maxTimeConst(c->lhs, m);
        maxTimeConst(c->rhs, m);
        break;
      default:
        break;
    }
  }
};

}  // namespace

std::vector<ProcStep> stepInstant(const ProcPtr& p) {
  Stepper st{p};
  return st.stepBundle(p, {});
}

// Walks exactly the positions timePass advances; timers buried in
// continuations only become relevant once they surface.
static void gridScan(const ProcPtr& p, std::set<Rat>& out, bool& anyTimer) {
  switch (p->kind) {
    case Process::Kind::Par:
      for (const auto& it : p->items) gridScan(it, out, anyTimer);
      return;
    case Process::Kind::Restrict:
      gridScan(p->body, out, anyTimer);
      return;
    case Process::Kind::Select:
    case Process::Kind::Branch:
      if (!p->timeout.infinite) {
        anyTimer = true;
        if (p->timeout.value > 0) out.insert(p->timeout.value);
      }
      return;
    case Process::Kind::Def:
      gridScan(p->cont, out, anyTimer);
      return;
    case Process::Kind::DelayExact:
      anyTimer = true;
      if (p->delayTime > 0) out.insert(p->delayTime);
      return;
    case Process::Kind::Try:
      gridScan(p->tryBody, out, anyTimer);
      gridScan(p->catchBody, out, anyTimer);
      return;
    case Process::Kind::Cancel:
      gridScan(p->cont, out, anyTimer);
      return;
    default:
      return;
  }
}

std::vector<Rat> autoGridProcess(const ProcPtr& p) {
  std::set<Rat> out;
  bool anyTimer = false;
  gridScan(p, out, anyTimer);
  if (out.empty() && anyTimer) out.insert(Rat(1));
  return {out.begin(), out.end()};
}

bool containsErr(const ProcPtr& p) {
  if (p->kind == Process::Kind::Err) return true;
  for (const auto& it : p->items) {
    if (containsErr(it)) return true;
  }
  if (p->body && containsErr(p->body)) return true;
  if (p->cont && containsErr(p->cont)) return true;
  if (p->tryBody && containsErr(p->tryBody)) return true;
  if (p->catchBody && containsErr(p->catchBody)) return true;
  for (const auto& [l, b] : p->branches) {
    if (containsErr(b.cont)) return true;
  }
  return false;
}

bool containsFailed(const ProcPtr& p) {
  if (p->kind == Process::Kind::Failed) return true;
  for (const auto& it : p->items) {
    if (containsFailed(it)) return true;
  }
  if (p->body && containsFailed(p->body)) return true;
  if (p->cont && containsFailed(p->cont)) return true;
  if (p->tryBody && containsFailed(p->tryBody)) return true;
  if (p->catchBody && containsFailed(p->catchBody)) return true;
  for (const auto& [l, b] : p->branches) {
    if (containsFailed(b.cont)) return true;
  }
  return false;
}

static void failedEndpointsOf(const ProcPtr& p, std::set<std::string>& out) {
  if (p->kind == Process::Kind::Failed) {
    for (const auto& s : subjects(p->body)) {
      if (!s.queue) out.insert(s.session + "[" + s.role + "]");
    }
  }
  for (const auto& it : p->items) failedEndpointsOf(it, out);
  if (p->body) failedEndpointsOf(p->body, out);
  if (p->cont) failedEndpointsOf(p->cont, out);
  if (p->tryBody) failedEndpointsOf(p->tryBody, out);
  if (p->catchBody) failedEndpointsOf(p->catchBody, out);
  for (const auto& [l, b] : p->branches) failedEndpointsOf(b.cont, out);
}

static bool isKillBundle(const ProcPtr& p) {
  for (const auto& it : flattenPar(p)) {
    if (it->kind != Process::Kind::Kill) return false;
  }
  return true;
}

ExploreReport explore(const ProcPtr& p, const ExploreOptions& opts) {
  ExploreReport rep;
  struct Node {
    ProcPtr proc;
    int depth;
  };
  ProcPtr start = congNormalize(p);
  std::deque<Node> frontier{{start, 0}};
  std::map<std::string, std::pair<std::string, std::string>> parent;  // key -> (parent, act)
  std::set<std::string> visited{printProcess(start)};
  parent.emplace(printProcess(start), std::make_pair(std::string(), std::string()));

  auto traceOf = [&](const std::string& key) {
    std::vector<std::string> trace;
    std::string cur = key;
    while (true) {
      auto it = parent.find(cur);
      if (it == parent.end() || it->second.first.empty()) break;
      trace.push_back(it->second.second);
      cur = it->second.first;
    }
    std::reverse(trace.begin(), trace.end());
    return trace;
  };

  while (!frontier.empty() && rep.states < opts.maxStates) {
    Node node = std::move(frontier.front());
    frontier.pop_front();
    rep.states++;
    std::string key = printProcess(node.proc);

    if (containsErr(node.proc)) rep.errReached = true;
    failedEndpointsOf(node.proc, rep.failedEndpoints);

    std::vector<std::pair<std::string, ProcPtr>> successors;
    for (const auto& st : stepInstant(node.proc)) {
      successors.emplace_back(st.rule, congNormalize(st.next));
    }
    std::vector<Rat> grid = opts.useAutoGrid ? autoGridProcess(node.proc) : opts.grid;
    for (const auto& t : grid) {
      auto next = timePass(node.proc, t);
      if (!next) continue;
      ProcPtr norm = congNormalize(*next);
      if (printProcess(norm) == key) continue;
      successors.emplace_back("t=" + printTime(t), norm);
    }

    if (successors.empty()) {
      bool clean = isKillBundle(node.proc);
      if (!clean) rep.deadlockFree = false;
      if (rep.terminals.size() < 64) {
        rep.terminals.push_back(key);
        rep.terminalTraces.push_back(traceOf(key));
      }
      continue;
    }
    if (node.depth >= opts.depth) {
      rep.truncated++;
      continue;
    }
    for (auto& [act, next] : successors) {
      std::string nkey = printProcess(next);
      if (visited.count(nkey)) continue;
      visited.insert(nkey);
      parent.emplace(nkey, std::make_pair(key, act));
      frontier.push_back(Node{next, node.depth + 1});
    }
  }
  return rep;
}

}  // namespace atmp
