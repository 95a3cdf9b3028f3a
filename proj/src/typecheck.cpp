#include "atmp/typecheck.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace atmp {

namespace {

Rat valOf(const ClockValuation& nu, const Clock& c) {
  auto it = nu.find(c);
  return it == nu.end() ? Rat(0) : it->second;
}

// Elapse times t >= 0 such that nu + t satisfies d. Every atom is a threshold
// on a single clock, so the set is a finite union of intervals.
IntervalSet admissibleElapse(const ConstraintPtr& d, const ClockValuation& nu) {
  if (!d) return isetFull();
  switch (d->kind) {
    case ClockConstraint::Kind::True:
      return isetFull();
    case ClockConstraint::Kind::Gt: {
      Rat diff = d->bound - valOf(nu, d->clock);
      if (diff < 0) return isetFull();
      return isetRange(diff, false, std::nullopt, false);
    }
    case ClockConstraint::Kind::Eq: {
      Rat diff = d->bound - valOf(nu, d->clock);
      if (diff < 0) return isetEmpty();
      return isetPoint(diff);
    }
    case ClockConstraint::Kind::Not:
      return isetComplement(admissibleElapse(d->lhs, nu));
    case ClockConstraint::Kind::And:
      return isetIntersect(admissibleElapse(d->lhs, nu), admissibleElapse(d->rhs, nu));
  }
  return isetFull();
}

void constantsOf(const ConstraintPtr& d, std::map<Clock, std::set<Rat>>& out, Rat& top) {
  if (!d) return;
  switch (d->kind) {
    case ClockConstraint::Kind::True:
      return;
    case ClockConstraint::Kind::Gt:
    case ClockConstraint::Kind::Eq:
      out[d->clock].insert(d->bound);
      top = std::max(top, d->bound);
      return;
    case ClockConstraint::Kind::Not:
      constantsOf(d->lhs, out, top);
      return;
    case ClockConstraint::Kind::And:
      constantsOf(d->lhs, out, top);
      constantsOf(d->rhs, out, top);
      return;
  }
}

void typeConstants(const LocalPtr& t, std::map<Clock, std::set<Rat>>& out, Rat& top,
                   std::set<const LocalType*>& seen) {
  if (!t || !seen.insert(t.get()).second) return;
  for (const auto& [label, br] : t->branches) {
    constantsOf(br.guard, out, top);
    if (br.payload.kind == Sort::Kind::Delegation) {
      constantsOf(br.payload.guard, out, top);
      typeConstants(br.payload.continuation, out, top, seen);
    }
    typeConstants(br.cont, out, top, seen);
  }
  if (t->body) typeConstants(t->body, out, top, seen);
}

Rat typeHorizon(const LocalPtr& t) {
  std::map<Clock, std::set<Rat>> cs;
  Rat top(0);
  std::set<const LocalType*> seen;
  typeConstants(t, cs, top, seen);
  return top;
}

// Sample elapse points for a wait window [0, n]: endpoints plus the midpoint,
// or a small unbounded probe set when the window never closes.
std::vector<Rat> windowSamples(const ExtendedTime& n, const LocalPtr& horizonType) {
  std::set<Rat> pts;
  if (n.infinite) {
    Rat top = typeHorizon(horizonType);
    pts.insert(Rat(0));
    pts.insert(Rat(1));
    pts.insert(top + 1);
  } else {
    pts.insert(Rat(0));
    pts.insert(n.value / 2);
    pts.insert(n.value);
  }
  return {pts.begin(), pts.end()};
}

// Representative points of one interval: closed endpoints as-is, a midpoint
// for open ends, and a +1 probe when unbounded.
void intervalSamples(const Interval& iv, std::set<Rat>& out) {
  if (!iv.hi) {
    out.insert(iv.loClosed ? iv.lo : iv.lo + 1);
    out.insert(iv.lo + 1);
    return;
  }
  Rat mid = (iv.lo + *iv.hi) / 2;
  out.insert(iv.loClosed ? iv.lo : mid);
  out.insert(mid);
  out.insert(iv.hiClosed ? *iv.hi : mid);
}

// Satisfying valuations for a payload guard, drawn from the finite grid of
// region representatives induced by the guard's own constants. Exact for
// satisfiability because every atom compares one clock with one constant.
std::vector<ClockValuation> guardValuations(const ConstraintPtr& d) {
  std::map<Clock, std::set<Rat>> cs;
  Rat top(0);
  constantsOf(d, cs, top);
  if (cs.empty()) {
    ClockValuation empty;
    if (satisfies(empty, d)) return {empty};
    return {};
  }
  std::vector<Clock> clocks;
  std::vector<std::vector<Rat>> candidates;
  for (const auto& [c, ks] : cs) {
    std::set<Rat> pts;
    pts.insert(Rat(0));
    std::vector<Rat> sorted(ks.begin(), ks.end());
    for (size_t i = 0; i < sorted.size(); ++i) {
      pts.insert(sorted[i]);
      pts.insert(sorted[i] + 1);
      if (sorted[i] > 0) pts.insert(sorted[i] / 2);
      if (i + 1 < sorted.size()) pts.insert((sorted[i] + sorted[i + 1]) / 2);
    }
    clocks.push_back(c);
    candidates.emplace_back(pts.begin(), pts.end());
  }
  std::vector<ClockValuation> found;
  std::vector<size_t> idx(clocks.size(), 0);
  size_t total = 1;
  for (const auto& cand : candidates) {
    if (total > 4096) break;
    total *= cand.size();
  }
  if (total <= 4096) {
    while (true) {
      ClockValuation nu;
      for (size_t i = 0; i < clocks.size(); ++i) nu[clocks[i]] = candidates[i][idx[i]];
      if (satisfies(nu, d)) found.push_back(nu);
      size_t i = 0;
      for (; i < idx.size(); ++i) {
        if (++idx[i] < candidates[i].size()) break;
        idx[i] = 0;
      }
      if (i == idx.size()) break;
    }
  } else {
    size_t longest = 0;
    for (const auto& cand : candidates) longest = std::max(longest, cand.size());
    for (size_t k = 0; k < longest; ++k) {
      ClockValuation nu;
      for (size_t i = 0; i < clocks.size(); ++i)
        nu[clocks[i]] = candidates[i][std::min(k, candidates[i].size() - 1)];
      if (satisfies(nu, d)) found.push_back(nu);
    }
  }
  if (found.size() > 3) {
    std::vector<ClockValuation> picked{found.front(), found[found.size() / 2], found.back()};
    return picked;
  }
  return found;
}

EnvKey chanKey(const Chan& c) {
  return c.isVar ? varKey(c.var) : epKey(c.session, c.role);
}

bool entryEnded(const EnvEntry& e) {
  if (e.hasSession && !subtype(e.type, lEnd())) return false;
  if (e.hasQueue && !e.queue.empty()) return false;
  return true;
}

LocalPtr unfoldFully(LocalPtr t) {
  int fuel = 64;
  while (t && t->kind == LocalType::Kind::Rec && fuel-- > 0) t = unfoldOne(t);
  return t;
}

// ---------------------------------------------------------------------------
// Free-channel needs, used to split environments across parallel items.

struct Needs {
  std::set<EnvKey> typeParts;
  std::set<EnvKey> queueParts;
};

void wantChan(const Chan& c, const std::set<std::string>& bound, Needs& out) {
  if (c.isVar && bound.count(c.var)) return;
  out.typeParts.insert(chanKey(c));
}

void collectNeeds(const ProcPtr& p, std::set<std::string> bound, Needs& out) {
  if (!p) return;
  switch (p->kind) {
    case Process::Kind::Nil:
    case Process::Kind::Err:
    case Process::Kind::Kill:
      return;
    case Process::Kind::Par:
      for (const auto& it : p->items) collectNeeds(it, bound, out);
      return;
    case Process::Kind::Restrict: {
      Needs inner;
      collectNeeds(p->body, bound, inner);
      for (const auto& k : inner.typeParts)
        if (k.isVar || k.session != p->session) out.typeParts.insert(k);
      for (const auto& k : inner.queueParts)
        if (k.isVar || k.session != p->session) out.queueParts.insert(k);
      return;
    }
    case Process::Kind::Select:
      wantChan(p->chan, bound, out);
      if (p->payload) wantChan(*p->payload, bound, out);
      collectNeeds(p->cont, bound, out);
      return;
    case Process::Kind::Branch: {
      wantChan(p->chan, bound, out);
      for (const auto& [label, br] : p->branches) {
        auto inner = bound;
        if (br.payloadVar) inner.insert(*br.payloadVar);
        collectNeeds(br.cont, inner, out);
      }
      return;
    }
    case Process::Kind::Def:
      // The definition body is typed against its own parameter entries and
      // takes nothing from the ambient environment.
      collectNeeds(p->cont, bound, out);
      return;
    case Process::Kind::Call:
      for (const auto& a : p->callArgs) wantChan(a, bound, out);
      return;
    case Process::Kind::DelayConstraint:
    case Process::Kind::DelayExact:
      collectNeeds(p->cont, bound, out);
      return;
    case Process::Kind::Failed:
      collectNeeds(p->body, bound, out);
      return;
    case Process::Kind::Try:
      collectNeeds(p->tryBody, bound, out);
      collectNeeds(p->catchBody, bound, out);
      return;
    case Process::Kind::Cancel:
      wantChan(p->chan, bound, out);
      collectNeeds(p->cont, bound, out);
      return;
    case Process::Kind::Queue:
      out.queueParts.insert(epKey(p->session, p->owner));
      for (const auto& m : p->msgs)
        if (m.payload) wantChan(*m.payload, bound, out);
      return;
  }
}

// Subject channels for the try rule, variables included; queues and kills
// poison the set since they are not channels.
void trySubjects(const ProcPtr& p, std::set<std::string> bound, std::set<std::string>& out,
                 bool& sawNonChannel) {
  if (!p) return;
  switch (p->kind) {
    case Process::Kind::Nil:
    case Process::Kind::Err:
      return;
    case Process::Kind::Kill:
    case Process::Kind::Queue:
      sawNonChannel = true;
      return;
    case Process::Kind::Par:
      for (const auto& it : p->items) trySubjects(it, bound, out, sawNonChannel);
      return;
    case Process::Kind::Restrict: {
      std::set<std::string> inner;
      trySubjects(p->body, bound, inner, sawNonChannel);
      std::string prefix = p->session + "[";
      for (const auto& k : inner)
        if (k.rfind(prefix, 0) != 0) out.insert(k);
      return;
    }
    case Process::Kind::Select:
    case Process::Kind::Cancel:
      if (!(p->chan.isVar && bound.count(p->chan.var))) out.insert(printChan(p->chan));
      if (p->kind == Process::Kind::Select)
        return;  // continuation subjects belong to the same endpoint
      return;
    case Process::Kind::Branch:
      if (!(p->chan.isVar && bound.count(p->chan.var))) out.insert(printChan(p->chan));
      return;
    case Process::Kind::Def:
      trySubjects(p->cont, bound, out, sawNonChannel);
      return;
    case Process::Kind::Call:
      for (const auto& a : p->callArgs)
        if (!(a.isVar && bound.count(a.var))) out.insert(printChan(a));
      return;
    case Process::Kind::DelayConstraint:
    case Process::Kind::DelayExact:
      trySubjects(p->cont, bound, out, sawNonChannel);
      return;
    case Process::Kind::Failed:
      trySubjects(p->body, bound, out, sawNonChannel);
      return;
    case Process::Kind::Try:
      trySubjects(p->tryBody, bound, out, sawNonChannel);
      trySubjects(p->catchBody, bound, out, sawNonChannel);
      return;
  }
}

void freeChanVars(const ProcPtr& p, std::set<std::string> bound, std::set<std::string>& out) {
  if (!p) return;
  auto look = [&](const Chan& c) {
    if (c.isVar && !bound.count(c.var)) out.insert(c.var);
  };
  switch (p->kind) {
    case Process::Kind::Nil:
    case Process::Kind::Err:
    case Process::Kind::Kill:
      return;
    case Process::Kind::Par:
      for (const auto& it : p->items) freeChanVars(it, bound, out);
      return;
    case Process::Kind::Restrict:
      freeChanVars(p->body, bound, out);
      return;
    case Process::Kind::Select:
      look(p->chan);
      if (p->payload) look(*p->payload);
      freeChanVars(p->cont, bound, out);
      return;
    case Process::Kind::Branch: {
      look(p->chan);
      for (const auto& [label, br] : p->branches) {
        auto inner = bound;
        if (br.payloadVar) inner.insert(*br.payloadVar);
        freeChanVars(br.cont, inner, out);
      }
      return;
    }
    case Process::Kind::Def: {
      auto inner = bound;
      for (const auto& x : p->defParams) inner.insert(x);
      freeChanVars(p->body, inner, out);
      freeChanVars(p->cont, bound, out);
      return;
    }
    case Process::Kind::Call:
      for (const auto& a : p->callArgs) look(a);
      return;
    case Process::Kind::DelayConstraint:
    case Process::Kind::DelayExact:
      freeChanVars(p->cont, bound, out);
      return;
    case Process::Kind::Failed:
      freeChanVars(p->body, bound, out);
      return;
    case Process::Kind::Try:
      freeChanVars(p->tryBody, bound, out);
      freeChanVars(p->catchBody, bound, out);
      return;
    case Process::Kind::Cancel:
      look(p->chan);
      freeChanVars(p->cont, bound, out);
      return;
  }
}

// ---------------------------------------------------------------------------
// The derivation search.

struct Checker {
  bool explain = false;
  std::vector<std::string> errors;
  std::vector<std::string> trace;

  bool fail(const std::string& rule, const std::string& pos, const std::string& premise) {
    errors.push_back(rule + ": " + pos + ": " + premise);
    return false;
  }

  void note(const std::string& rule, const std::string& pos) {
    if (explain) trace.push_back(pos + ": " + rule);
  }

  bool check(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p, const std::string& pos) {
    switch (p->kind) {
      case Process::Kind::Nil: {
        for (const auto& [k, e] : gamma) {
          if (!entryEnded(e))
            return fail("T-Nil", pos, "environment entry " + printEnvKey(k) +
                                          " is not terminated");
        }
        note("T-Nil", pos);
        return true;
      }
      case Process::Kind::Err:
        return fail("T-Err", pos, "no rule types the error process");
      case Process::Kind::Failed:
        note("T-Failed", pos);
        return true;
      case Process::Kind::Kill: {
        for (const auto& [k, e] : gamma) {
          if (!k.isVar && k.session == p->session) continue;
          if (!entryEnded(e))
            return fail("T-Kill", pos, "entry " + printEnvKey(k) +
                                           " outside the killed session is not terminated");
        }
        note("T-Kill", pos);
        return true;
      }
      case Process::Kind::Par:
        return checkPar(theta, std::move(gamma), p, pos);
      case Process::Kind::Restrict:
        return checkRestrict(theta, std::move(gamma), p, pos);
      case Process::Kind::Select:
        return checkSelect(theta, std::move(gamma), p, pos);
      case Process::Kind::Branch:
        return checkBranch(theta, std::move(gamma), p, pos);
      case Process::Kind::DelayExact:
        note("T-DelayExact", pos);
        return check(theta, envShift(gamma, p->delayTime), p->cont, pos + ".delay");
      case Process::Kind::DelayConstraint:
        return checkDelayGuard(theta, std::move(gamma), p, pos);
      case Process::Kind::Def:
        return checkDef(theta, std::move(gamma), p, pos);
      case Process::Kind::Call:
        return checkCall(theta, std::move(gamma), p, pos);
      case Process::Kind::Try:
        return checkTry(theta, std::move(gamma), p, pos);
      case Process::Kind::Cancel:
        return checkCancel(theta, std::move(gamma), p, pos);
      case Process::Kind::Queue:
        return checkQueue(theta, std::move(gamma), p, pos);
    }
    return fail("T-?", pos, "unhandled process form");
  }

  bool checkPar(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p,
                const std::string& pos) {
    std::vector<ProcPtr> items;
    std::deque<ProcPtr> work{p};
    while (!work.empty()) {
      ProcPtr cur = work.front();
      work.pop_front();
      if (cur->kind == Process::Kind::Par) {
        for (auto it = cur->items.rbegin(); it != cur->items.rend(); ++it)
          work.push_front(*it);
      } else if (cur->kind != Process::Kind::Nil) {
        items.push_back(cur);
      }
    }
    if (items.empty()) return check(theta, std::move(gamma), pNil(), pos);
    if (items.size() == 1) return check(theta, std::move(gamma), items[0], pos);

    std::map<EnvKey, size_t> typeClaim;
    std::map<EnvKey, size_t> queueClaim;
    std::map<std::string, size_t> killAt;
    for (size_t i = 0; i < items.size(); ++i) {
      if (items[i]->kind == Process::Kind::Kill) {
        killAt.emplace(items[i]->session, i);
        continue;
      }
      Needs n;
      collectNeeds(items[i], {}, n);
      for (const auto& k : n.typeParts) {
        auto [it, fresh] = typeClaim.emplace(k, i);
        if (!fresh && it->second != i)
          return fail("T-Par", pos, "items " + std::to_string(it->second) + " and " +
                                        std::to_string(i) + " both use " + printEnvKey(k));
      }
      for (const auto& k : n.queueParts) {
        auto [it, fresh] = queueClaim.emplace(k, i);
        if (!fresh && it->second != i)
          return fail("T-Par", pos, "items " + std::to_string(it->second) + " and " +
                                        std::to_string(i) + " both own the queue of " +
                                        printEnvKey(k));
      }
    }

    std::vector<TypingEnv> envs(items.size());
    auto givePart = [&](size_t idx, const EnvKey& k, bool sessionPart, const EnvEntry& e) {
      EnvEntry& slot = envs[idx][k];
      if (sessionPart) {
        slot.hasSession = true;
        slot.nu = e.nu;
        slot.type = e.type;
      } else {
        slot.hasQueue = true;
        slot.queue = e.queue;
      }
    };
    for (const auto& [k, e] : gamma) {
      if (e.hasSession) {
        auto it = typeClaim.find(k);
        if (it != typeClaim.end()) {
          givePart(it->second, k, true, e);
        } else if (!k.isVar && killAt.count(k.session)) {
          givePart(killAt[k.session], k, true, e);
        } else {
          givePart(0, k, true, e);
        }
      }
      if (e.hasQueue) {
        auto it = queueClaim.find(k);
        if (it != queueClaim.end()) {
          givePart(it->second, k, false, e);
        } else if (!k.isVar && killAt.count(k.session)) {
          givePart(killAt[k.session], k, false, e);
        } else {
          givePart(0, k, false, e);
        }
      }
    }
    note("T-Par", pos);
    bool ok = true;
    for (size_t i = 0; i < items.size(); ++i) {
      ok = check(theta, std::move(envs[i]), items[i], pos + ".par[" + std::to_string(i) + "]") &&
           ok;
    }
    return ok;
  }

  bool checkRestrict(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p,
                     const std::string& pos) {
    if (!p->annotation)
      return fail("T-Res", pos,
                  "restriction of " + p->session +
                      " lacks a session annotation; run the frontend to synthesize one from "
                      "a protocol");
    for (const auto& [k, e] : gamma) {
      (void)e;
      if (!k.isVar && k.session == p->session)
        return fail("T-Res", pos, "session " + p->session + " is already free in the ambient "
                                                            "environment");
    }
    TimedGlobalState st{p->annotation->nu, p->annotation->g};
    TypingEnv inner =
        p->annotation->env ? *p->annotation->env : canonicalEnv(st, p->session);
    auto assoc = associated(st, inner, p->session);
    if (!assoc.ok)
      return fail("T-Res", pos, "annotation environment is not associated with its global "
                                "witness: " +
                                    (assoc.failures.empty() ? "" : assoc.failures[0]));
    TypingEnv composed;
    try {
      composed = compose(gamma, inner);
    } catch (const CompositionError& e) {
      return fail("T-Res", pos, std::string("annotation environment clashes with the ambient "
                                            "one: ") +
                                    e.what());
    }
    note("T-Res", pos);
    return check(theta, std::move(composed), p->body, pos + ".res(" + p->session + ")");
  }

  bool checkSelect(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p,
                   const std::string& pos) {
    EnvKey key = chanKey(p->chan);
    auto here = pos + ".sel(" + p->label + ")";
    auto it = gamma.find(key);
    if (it == gamma.end() || !it->second.hasSession)
      return fail("T-Sel", here, "no session entry for " + printChan(p->chan));
    EnvEntry entry = it->second;
    if (entry.hasQueue)
      gamma[key] = queueEntry(entry.queue);
    else
      gamma.erase(it);

    LocalPtr t = unfoldFully(entry.type);
    if (t->kind != LocalType::Kind::IntChoice)
      return fail("T-Sel", here, "type of " + printChan(p->chan) +
                                     " is not an internal choice");
    if (t->partner != p->partner)
      return fail("T-Sel", here, "type speaks to " + t->partner + " but the process selects "
                                                                  "towards " +
                                     p->partner);
    auto bit = t->branches.find(p->label);
    if (bit == t->branches.end())
      return fail("T-Sel", here, "label " + p->label + " is not offered by the entry type");
    const LocalBranch& br = bit->second;

    IntervalSet admissible = admissibleElapse(br.guard, entry.nu);
    IntervalSet window = p->timeout.infinite
                             ? isetFull()
                             : isetRange(Rat(0), true, p->timeout.value, true);
    if (!isetSubset(window, admissible))
      return fail("T-Sel", here, "the send window is not contained in the guard region "
                                 "(window " +
                                     printIntervalSet(window) + ", guard " +
                                     printIntervalSet(admissible) + ")");

    if (br.payload.kind == Sort::Kind::Delegation) {
      if (!p->payload)
        return fail("T-Sel", here, "the label carries a delegation but no channel is sent");
      EnvKey dkey = chanKey(*p->payload);
      auto dit = gamma.find(dkey);
      if (dit == gamma.end() || !dit->second.hasSession)
        return fail("T-Sel", here, "delegated channel " + printChan(*p->payload) +
                                       " is not in the environment");
      if (dit->second.hasQueue && !dit->second.queue.empty())
        return fail("T-Sel", here, "delegated channel " + printChan(*p->payload) +
                                       " still owns a nonempty queue");
      if (!satisfies(dit->second.nu, br.payload.guard))
        return fail("T-Sel", here, "delegated valuation violates the payload guard");
      if (!subtype(dit->second.type, br.payload.continuation))
        return fail("T-Sel", here, "delegated type is not a subtype of the payload type");
      gamma.erase(dit);
    } else if (p->payload) {
      return fail("T-Sel", here, "the label carries a base payload, not a channel");
    }

    note("T-Sel", pos);
    for (const auto& t0 : windowSamples(p->timeout, entry.type)) {
      TypingEnv next = envShift(gamma, t0);
      next[key] = sessionEntry(resetClocks(atmp::advance(entry.nu, t0), br.reset), br.cont);
      if (!check(theta, std::move(next), p->cont,
                 here + "[t=" + printTime(t0) + "]"))
        return false;
    }
    return true;
  }

  bool checkBranch(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p,
                   const std::string& pos) {
    EnvKey key = chanKey(p->chan);
    auto here = pos + ".bra(" + printChan(p->chan) + ")";
    auto it = gamma.find(key);
    if (it == gamma.end() || !it->second.hasSession)
      return fail("T-Branch", here, "no session entry for " + printChan(p->chan));
    EnvEntry entry = it->second;
    if (entry.hasQueue)
      gamma[key] = queueEntry(entry.queue);
    else
      gamma.erase(it);

    LocalPtr t = unfoldFully(entry.type);
    if (t->kind != LocalType::Kind::ExtChoice)
      return fail("T-Branch", here, "type of " + printChan(p->chan) +
                                        " is not an external choice");
    if (t->partner != p->partner)
      return fail("T-Branch", here, "type listens to " + t->partner +
                                        " but the process receives from " + p->partner);
    for (const auto& [label, br] : t->branches) {
      (void)br;
      if (!p->branches.count(label))
        return fail("T-Branch", here, "the process does not handle label " + label);
    }

    note("T-Branch", pos);
    for (const auto& [label, tbr] : t->branches) {
      const ProcBranch& pbr = p->branches.at(label);
      auto lpos = here + "." + label;

      IntervalSet admissible = admissibleElapse(tbr.guard, entry.nu);
      IntervalSet window = p->timeout.infinite
                               ? isetFull()
                               : isetRange(Rat(0), true, p->timeout.value, true);
      if (!isetSubset(window, admissible))
        return fail("T-Branch", lpos, "the wait window is not contained in the guard region "
                                      "(window " +
                                          printIntervalSet(window) + ", guard " +
                                          printIntervalSet(admissible) + ")");

      std::vector<ClockValuation> payloadVals;
      if (tbr.payload.kind == Sort::Kind::Delegation) {
        if (!pbr.payloadVar)
          return fail("T-Branch", lpos, "the label delivers a delegation but the branch "
                                        "binds no channel");
        payloadVals = guardValuations(tbr.payload.guard);
      }

      for (const auto& t0 : windowSamples(p->timeout, entry.type)) {
        TypingEnv base = envShift(gamma, t0);
        base[key] =
            sessionEntry(resetClocks(atmp::advance(entry.nu, t0), tbr.reset), tbr.cont);
        if (tbr.payload.kind == Sort::Kind::Delegation) {
          for (const auto& nu : payloadVals) {
            TypingEnv next = base;
            next[varKey(*pbr.payloadVar)] = sessionEntry(nu, tbr.payload.continuation);
            if (!check(theta, std::move(next), pbr.cont,
                       lpos + "[t=" + printTime(t0) + "]"))
              return false;
          }
        } else {
          if (!check(theta, TypingEnv(base), pbr.cont, lpos + "[t=" + printTime(t0) + "]"))
            return false;
        }
      }
    }
    return true;
  }

  bool checkDelayGuard(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p,
                       const std::string& pos) {
    IntervalSet sols;
    try {
      sols = solutionSet(p->delayGuard, p->delayClock);
    } catch (const TimeError& e) {
      return fail("T-DelayGuard", pos, std::string("guard is not a constraint on the bound "
                                                   "clock: ") +
                                           e.what());
    }
    std::set<Rat> pts;
    for (const auto& iv : sols.parts) intervalSamples(iv, pts);
    note("T-DelayGuard", pos);
    for (const auto& t0 : pts) {
      if (!check(theta, envShift(gamma, t0), p->cont,
                 pos + ".delayGuard[t=" + printTime(t0) + "]"))
        return false;
    }
    return true;
  }

  bool checkDef(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p,
                const std::string& pos) {
    if (p->defParamTypes.size() != p->defParams.size()) {
      if (p->defParamTypes.empty())
        return fail("T-Def", pos, "definition " + p->defName +
                                      " lacks parameter annotations");
      return fail("T-Def", pos, "definition " + p->defName + " annotates " +
                                    std::to_string(p->defParamTypes.size()) +
                                    " of its " + std::to_string(p->defParams.size()) +
                                    " parameters");
    }
    ProcEnv theta2 = theta;
    theta2[p->defName] = p->defParamTypes;
    TypingEnv bodyEnv;
    for (size_t i = 0; i < p->defParams.size(); ++i) {
      bodyEnv[varKey(p->defParams[i])] =
          sessionEntry(p->defParamTypes[i].first, p->defParamTypes[i].second);
    }
    note("T-Def", pos);
    bool ok = check(theta2, std::move(bodyEnv), p->body, pos + ".defbody(" + p->defName + ")");
    return check(theta2, std::move(gamma), p->cont, pos + ".in") && ok;
  }

  bool checkCall(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p,
                 const std::string& pos) {
    auto here = pos + ".call(" + p->defName + ")";
    auto sit = theta.find(p->defName);
    if (sit == theta.end())
      return fail("T-Call", here, "unbound process variable " + p->defName);
    const auto& sig = sit->second;
    if (sig.size() != p->callArgs.size())
      return fail("T-Call", here, "call passes " + std::to_string(p->callArgs.size()) +
                                      " arguments but the definition takes " +
                                      std::to_string(sig.size()));
    for (size_t i = 0; i < sig.size(); ++i) {
      EnvKey key = chanKey(p->callArgs[i]);
      auto it = gamma.find(key);
      if (it == gamma.end() || !it->second.hasSession)
        return fail("T-Call", here, "argument " + printChan(p->callArgs[i]) +
                                        " is not in the environment");
      if (it->second.hasQueue && !it->second.queue.empty())
        return fail("T-Call", here, "argument " + printChan(p->callArgs[i]) +
                                        " still owns a nonempty queue");
      if (it->second.nu != sig[i].first)
        return fail("T-Call", here, "argument " + printChan(p->callArgs[i]) +
                                        " has valuation " + printValuation(it->second.nu) +
                                        " but the definition expects " +
                                        printValuation(sig[i].first));
      if (!subtype(it->second.type, sig[i].second))
        return fail("T-Call", here, "argument " + printChan(p->callArgs[i]) +
                                        " is not a subtype of the declared parameter type");
      gamma.erase(it);
    }
    for (const auto& [k, e] : gamma) {
      if (!entryEnded(e))
        return fail("T-Call", here, "leftover entry " + printEnvKey(k) +
                                        " is not terminated");
    }
    note("T-Call", pos);
    return true;
  }

  bool checkTry(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p,
                const std::string& pos) {
    std::set<std::string> subs;
    bool sawNonChannel = false;
    trySubjects(p->tryBody, {}, subs, sawNonChannel);
    if (sawNonChannel || subs.size() != 1)
      return fail("T-Try", pos, "the guarded body must act on exactly one channel, found " +
                                    std::to_string(subs.size()) +
                                    (sawNonChannel ? " plus non-channel subjects" : ""));
    note("T-Try", pos);
    bool ok = check(theta, TypingEnv(gamma), p->tryBody, pos + ".try");
    return check(theta, std::move(gamma), p->catchBody, pos + ".catch") && ok;
  }

  bool checkCancel(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p,
                   const std::string& pos) {
    EnvKey key = chanKey(p->chan);
    auto it = gamma.find(key);
    if (it == gamma.end() || !it->second.hasSession)
      return fail("T-Cancel", pos, "no session entry for " + printChan(p->chan));
    if (it->second.hasQueue)
      gamma[key] = queueEntry(it->second.queue);
    else
      gamma.erase(it);
    note("T-Cancel", pos);
    return check(theta, std::move(gamma), p->cont, pos + ".cancel");
  }

  bool checkQueue(const ProcEnv& theta, TypingEnv gamma, const ProcPtr& p,
                  const std::string& pos) {
    auto here = pos + ".queue(" + p->session + "[" + p->owner + "])";
    EnvKey key = epKey(p->session, p->owner);
    auto it = gamma.find(key);
    if (it == gamma.end() || !it->second.hasQueue)
      return fail("T-Queue", here, "no queue entry for " + p->session + "[" + p->owner + "]");
    QueueType sigma = it->second.queue;
    if (it->second.hasSession)
      gamma[key] = sessionEntry(it->second.nu, it->second.type);
    else
      gamma.erase(it);

    if (sigma.size() != p->msgs.size())
      return fail("T-Queue", here, "queue holds " + std::to_string(p->msgs.size()) +
                                       " messages but its type lists " +
                                       std::to_string(sigma.size()));
    for (size_t i = 0; i < sigma.size(); ++i) {
      const QueueMsg& m = p->msgs[i];
      const MessageType& mt = sigma[i];
      if (m.to != mt.receiver || m.label != mt.label)
        return fail("T-Queue", here, "message " + std::to_string(i) + " is (" + m.to + "," +
                                         m.label + ") but the type lists (" + mt.receiver +
                                         "," + mt.label + ")");
      if (mt.payload.kind == Sort::Kind::Delegation) {
        if (!m.payload)
          return fail("T-Queue", here, "message " + std::to_string(i) +
                                           " should carry a delegated channel");
        EnvKey dkey = chanKey(*m.payload);
        auto dit = gamma.find(dkey);
        if (dit == gamma.end() || !dit->second.hasSession)
          return fail("T-Queue", here, "delegated channel " + printChan(*m.payload) +
                                           " is not in the environment");
        if (!satisfies(dit->second.nu, mt.payload.guard))
          return fail("T-Queue", here, "delegated valuation violates the payload guard");
        if (!subtype(dit->second.type, mt.payload.continuation))
          return fail("T-Queue", here, "delegated type is not a subtype of the payload "
                                       "type");
        gamma.erase(dit);
      } else if (m.payload) {
        return fail("T-Queue", here, "message " + std::to_string(i) +
                                         " carries a channel but the type expects a base "
                                         "value");
      }
    }
    for (const auto& [k, e] : gamma) {
      if (!entryEnded(e))
        return fail("T-Queue", here, "leftover entry " + printEnvKey(k) +
                                         " is not terminated");
    }
    note("T-Queue", pos);
    return true;
  }
};

Rat gammaHorizon(const TypingEnv& gamma) {
  Rat top(0);
  for (const auto& [k, e] : gamma) {
    (void)k;
    if (!e.hasSession) continue;
    top = std::max(top, typeHorizon(e.type));
    for (const auto& [c, v] : e.nu) {
      (void)c;
      top = std::max(top, v);
    }
  }
  return top + 1;
}

std::vector<TypingEnv> commClosure(const TypingEnv& start, int depth) {
  std::vector<TypingEnv> out;
  std::set<std::string> seen{envHash(start)};
  std::deque<std::pair<TypingEnv, int>> work{{start, 0}};
  while (!work.empty()) {
    auto [env, d] = work.front();
    work.pop_front();
    if (d >= depth) continue;
    for (const auto& st : envSteps(env, {})) {
      if (!seen.insert(envHash(st.next)).second) continue;
      out.push_back(st.next);
      work.emplace_back(st.next, d + 1);
    }
  }
  return out;
}

std::vector<TimedGlobalState> gtCommClosure(const TimedGlobalState& start,
                                            const std::string& session, int depth) {
  std::vector<TimedGlobalState> out;
  std::set<std::string> seen{stateHash(start)};
  std::deque<std::pair<TimedGlobalState, int>> work{{start, 0}};
  while (!work.empty()) {
    auto [st, d] = work.front();
    work.pop_front();
    if (d >= depth) continue;
    for (const auto& gs : gtSteps(st, session, {})) {
      if (!seen.insert(stateHash(gs.next)).second) continue;
      out.push_back(gs.next);
      work.emplace_back(gs.next, d + 1);
    }
  }
  return out;
}

std::set<std::string> sessionsOf(const TypingEnv& gamma) {
  std::set<std::string> out;
  for (const auto& [k, e] : gamma) {
    (void)e;
    if (!k.isVar) out.insert(k.session);
  }
  return out;
}

// Definition guardedness: a recursive use of a live parameter must sit under
// a communication on that same parameter.
void checkGuardedDefs(const ProcPtr& p, const std::map<std::string, bool>& liveParam,
                      std::set<std::string> guarded) {
  if (!p) return;
  switch (p->kind) {
    case Process::Kind::Nil:
    case Process::Kind::Err:
    case Process::Kind::Kill:
    case Process::Kind::Queue:
      return;
    case Process::Kind::Par:
      for (const auto& it : p->items) checkGuardedDefs(it, liveParam, guarded);
      return;
    case Process::Kind::Restrict:
      checkGuardedDefs(p->body, liveParam, guarded);
      return;
    case Process::Kind::Select: {
      auto inner = guarded;
      if (p->chan.isVar) inner.insert(p->chan.var);
      checkGuardedDefs(p->cont, liveParam, inner);
      return;
    }
    case Process::Kind::Branch: {
      auto inner = guarded;
      if (p->chan.isVar) inner.insert(p->chan.var);
      for (const auto& [label, br] : p->branches)
        checkGuardedDefs(br.cont, liveParam, inner);
      return;
    }
    case Process::Kind::Def: {
      std::map<std::string, bool> bodyLive;
      for (size_t i = 0; i < p->defParams.size(); ++i) {
        bool live = i < p->defParamTypes.size() &&
                    !subtype(p->defParamTypes[i].second, lEnd());
        bodyLive[p->defParams[i]] = live;
      }
      checkGuardedDefs(p->body, bodyLive, {});
      checkGuardedDefs(p->cont, liveParam, guarded);
      return;
    }
    case Process::Kind::Call:
      for (const auto& a : p->callArgs) {
        if (!a.isVar) continue;
        auto it = liveParam.find(a.var);
        if (it != liveParam.end() && it->second && !guarded.count(a.var))
          throw PreconditionViolation(
              "guarded definitions (i): recursive use of parameter " + a.var +
              " is not guarded by a communication on it");
      }
      return;
    case Process::Kind::DelayConstraint:
    case Process::Kind::DelayExact:
      checkGuardedDefs(p->cont, liveParam, guarded);
      return;
    case Process::Kind::Failed:
      checkGuardedDefs(p->body, liveParam, guarded);
      return;
    case Process::Kind::Try:
      checkGuardedDefs(p->tryBody, liveParam, guarded);
      checkGuardedDefs(p->catchBody, liveParam, guarded);
      return;
    case Process::Kind::Cancel:
      checkGuardedDefs(p->cont, liveParam, guarded);
      return;
  }
}

void collectRestrictions(const ProcPtr& p, std::vector<ProcPtr>& out) {
  if (!p) return;
  if (p->kind == Process::Kind::Restrict) out.push_back(p);
  for (const auto& it : p->items) collectRestrictions(it, out);
  if (p->body) collectRestrictions(p->body, out);
  if (p->cont) collectRestrictions(p->cont, out);
  if (p->tryBody) collectRestrictions(p->tryBody, out);
  if (p->catchBody) collectRestrictions(p->catchBody, out);
  for (const auto& [label, br] : p->branches) collectRestrictions(br.cont, out);
}

struct SingleSessionShape {
  std::string session;
  TypingEnv gamma;
  ProcPtr body;
  std::map<std::string, TimedGlobalState> witnesses;
};

// Unwraps an annotated restriction if present and checks the ensemble shape
// the fidelity and deadlock-freedom theorems assume.
SingleSessionShape requireSingleSessionShape(const Judgment& j) {
  SingleSessionShape out;
  out.gamma = j.gamma;
  out.body = j.process;
  out.witnesses = j.witnesses;
  if (out.body->kind == Process::Kind::Restrict) {
    if (!out.body->annotation)
      throw PreconditionViolation("restriction lacks a session annotation");
    TimedGlobalState st{out.body->annotation->nu, out.body->annotation->g};
    TypingEnv inner = out.body->annotation->env
                          ? *out.body->annotation->env
                          : canonicalEnv(st, out.body->session);
    try {
      out.gamma = compose(out.gamma, inner);
    } catch (const CompositionError& e) {
      throw PreconditionViolation(std::string("restriction environment clashes with the "
                                              "ambient one: ") +
                                  e.what());
    }
    out.witnesses[out.body->session] = st;
    out.session = out.body->session;
    out.body = out.body->body;
  }

  auto sessions = sessionsOf(out.gamma);
  if (out.session.empty()) {
    if (sessions.size() != 1)
      throw PreconditionViolation("the environment must mention exactly one session, found " +
                                  std::to_string(sessions.size()));
    out.session = *sessions.begin();
  } else if (sessions.size() > 1) {
    throw PreconditionViolation("the environment mentions sessions other than " + out.session);
  }

  for (const auto& [k, e] : out.gamma) {
    (void)e;
    if (k.isVar)
      throw PreconditionViolation("closedness (ii): environment binds process-level variable " +
                                  k.var);
  }
  std::set<std::string> fv;
  freeChanVars(out.body, {}, fv);
  if (!fv.empty())
    throw PreconditionViolation("closedness (ii): process has free channel variables, e.g. " +
                                *fv.begin());

  checkGuardedDefs(out.body, {}, {});

  ProcPtr flat = congNormalize(out.body);
  std::deque<ProcPtr> work{flat};
  std::vector<ProcPtr> items;
  while (!work.empty()) {
    ProcPtr cur = work.front();
    work.pop_front();
    if (cur->kind == Process::Kind::Par) {
      for (const auto& it : cur->items) work.push_back(it);
    } else if (cur->kind != Process::Kind::Nil) {
      items.push_back(cur);
    }
  }
  std::map<Role, bool> activeRole;
  for (const auto& item : items) {
    if (item->kind == Process::Kind::Kill) {
      if (item->session != out.session)
        throw PreconditionViolation("shape: kill of a foreign session " + item->session);
      continue;
    }
    std::set<Subject> subs;
    try {
      subs = subjects(item);
    } catch (const UnboundedCallExpansion&) {
      throw PreconditionViolation("shape: cannot attribute a role to one parallel item");
    }
    std::set<Role> rs;
    bool hasTypeSubject = false;
    for (const auto& s : subs) {
      if (s.session != out.session)
        throw PreconditionViolation("shape: item acts on a foreign session " + s.session);
      rs.insert(s.role);
      if (!s.queue) hasTypeSubject = true;
    }
    if (rs.empty())
      throw PreconditionViolation("shape: a parallel item plays no role at all");
    if (rs.size() > 1)
      throw PreconditionViolation("per-role form (iii): one item plays several roles");
    if (hasTypeSubject) activeRole[*rs.begin()] = true;
  }
  for (const auto& [role, active] : activeRole) {
    if (!active) continue;
    auto it = out.gamma.find(epKey(out.session, role));
    if (it == out.gamma.end() || !it->second.hasSession)
      throw PreconditionViolation("per-role form (iii): no entry for active role " + role);
    if (subtype(it->second.type, lEnd()))
      throw PreconditionViolation("per-role form (iii): role " + role +
                                  " is still active but its entry is already terminated");
  }

  std::vector<ProcPtr> nested;
  collectRestrictions(out.body, nested);
  for (const auto& r : nested) {
    if (!r->annotation)
      throw PreconditionViolation("nested restrictions (iv): restriction of " + r->session +
                                  " lacks an annotation");
    TimedGlobalState st{r->annotation->nu, r->annotation->g};
    TypingEnv inner =
        r->annotation->env ? *r->annotation->env : canonicalEnv(st, r->session);
    for (const auto& [k, e] : inner) {
      if (!entryEnded(e))
        throw PreconditionViolation("nested restrictions (iv): entry " + printEnvKey(k) +
                                    " of a nested restriction is not terminated");
    }
  }

  if (!out.witnesses.count(out.session))
    throw PreconditionViolation("missing association witness for session " + out.session);
  return out;
}

}  // namespace

Json TypingReport::toJson() const {
  Json j;
  j["ok"] = ok;
  j["errors"] = errors;
  j["trace"] = trace;
  return j;
}

bool endEnv(const TypingEnv& gamma) {
  for (const auto& [k, e] : gamma) {
    (void)k;
    if (!entryEnded(e)) return false;
  }
  return true;
}

TypingEnv envShift(const TypingEnv& gamma, const Rat& t) {
  TypingEnv out;
  for (const auto& [k, e] : gamma) {
    EnvEntry shifted = e;
    if (shifted.hasSession) shifted.nu = atmp::advance(shifted.nu, t);
    out.emplace(k, std::move(shifted));
  }
  return out;
}

TypingReport typecheck(const Judgment& j, bool explain) {
  TypingReport rep;
  Checker ck;
  ck.explain = explain;
  rep.ok = ck.check(j.theta, j.gamma, j.process, "top");
  rep.errors = std::move(ck.errors);
  rep.trace = std::move(ck.trace);
  return rep;
}

MetaReport checkSubjectReduction(const Judgment& j, int steps, const std::vector<Rat>& grid) {
  MetaReport rep;
  auto initial = typecheck(j);
  if (!initial.ok) {
    rep.ok = false;
    rep.detail = "initial judgment fails: " +
                 (initial.errors.empty() ? "" : initial.errors[0]);
    return rep;
  }
  for (const auto& s : sessionsOf(j.gamma)) {
    auto wit = j.witnesses.find(s);
    if (wit == j.witnesses.end()) {
      rep.ok = false;
      rep.detail = "session " + s + " carries no association witness";
      return rep;
    }
    auto assoc = associated(wit->second, j.gamma, s);
    if (!assoc.ok) {
      rep.ok = false;
      rep.detail = "initial association fails for " + s + ": " +
                   (assoc.failures.empty() ? "" : assoc.failures[0]);
      return rep;
    }
  }

  struct Cfg {
    ProcPtr p;
    TypingEnv gamma;
    std::map<std::string, TimedGlobalState> wit;
    int depth;
  };
  auto cfgKey = [](const Cfg& c) {
    std::string k = printProcess(c.p) + "|" + envHash(c.gamma);
    for (const auto& [s, st] : c.wit) k += "|" + s + ":" + stateHash(st);
    return k;
  };
  std::deque<Cfg> work{{j.process, j.gamma, j.witnesses, 0}};
  std::set<std::string> seen{cfgKey(work.front())};

  auto admit = [&](const ProcPtr& next, const TypingEnv& candidate,
                   const std::map<std::string, TimedGlobalState>& wit,
                   std::map<std::string, TimedGlobalState>& witOut) -> bool {
    auto r = typecheck({j.theta, candidate, next, {}});
    if (!r.ok) return false;
    witOut.clear();
    for (const auto& [s, st] : wit) {
      bool found = false;
      if (associated(st, candidate, s).ok) {
        witOut[s] = st;
        found = true;
      } else {
        for (const auto& st2 : gtCommClosure(st, s, 2)) {
          if (associated(st2, candidate, s).ok) {
            witOut[s] = st2;
            found = true;
            break;
          }
        }
      }
      if (!found) return false;
    }
    return true;
  };

  while (!work.empty()) {
    Cfg cfg = work.front();
    work.pop_front();
    if (cfg.depth >= steps) continue;

    for (const auto& st : stepInstant(cfg.p)) {
      rep.checked++;
      std::vector<TypingEnv> candidates{cfg.gamma};
      for (auto& g2 : commClosure(cfg.gamma, 2)) candidates.push_back(std::move(g2));
      bool matched = false;
      std::map<std::string, TimedGlobalState> witOut;
      for (const auto& cand : candidates) {
        if (admit(st.next, cand, cfg.wit, witOut)) {
          Cfg nxt{st.next, cand, witOut, cfg.depth + 1};
          if (seen.insert(cfgKey(nxt)).second) work.push_back(std::move(nxt));
          matched = true;
          break;
        }
      }
      if (!matched) {
        rep.ok = false;
        rep.detail = "step '" + st.rule + "' leaves typability: " + printProcess(st.next);
        return rep;
      }
    }

    auto g = grid.empty() ? autoGridProcess(cfg.p) : grid;
    for (const auto& t : g) {
      if (t <= 0) continue;
      auto nxt = timePass(cfg.p, t);
      if (!nxt) continue;
      rep.checked++;
      TypingEnv shifted = envShift(cfg.gamma, t);
      auto r = typecheck({j.theta, shifted, *nxt, {}});
      if (!r.ok) {
        rep.ok = false;
        rep.detail = "time step " + printTime(t) + " leaves typability: " +
                     (r.errors.empty() ? "" : r.errors[0]);
        return rep;
      }
      std::map<std::string, TimedGlobalState> witOut;
      bool assocOk = true;
      for (const auto& [s, st] : cfg.wit) {
        TimedGlobalState adv{atmp::advance(st.nu, t), st.g};
        if (!associated(adv, shifted, s).ok) {
          assocOk = false;
          rep.ok = false;
          rep.detail = "time step " + printTime(t) + " breaks association for " + s;
          break;
        }
        witOut[s] = adv;
      }
      if (!assocOk) return rep;
      Cfg cnxt{*nxt, shifted, witOut, cfg.depth + 1};
      if (seen.insert(cfgKey(cnxt)).second) work.push_back(std::move(cnxt));
    }
  }
  rep.detail = "all reachable configurations re-type";
  return rep;
}

MetaReport checkSessionFidelity(const Judgment& j, const std::vector<Rat>& grid) {
  MetaReport rep;
  auto shape = requireSingleSessionShape(j);
  auto initial = typecheck({j.theta, shape.gamma, shape.body, {}});
  if (!initial.ok) {
    rep.ok = false;
    rep.detail = "initial judgment fails: " +
                 (initial.errors.empty() ? "" : initial.errors[0]);
    return rep;
  }
  const auto& witness = shape.witnesses.at(shape.session);
  if (!associated(witness, shape.gamma, shape.session).ok) {
    rep.ok = false;
    rep.detail = "initial association fails";
    return rep;
  }

  auto g = grid.empty() ? timeGridForEnv(shape.gamma, gammaHorizon(shape.gamma)) : grid;
  for (const auto& step : envSteps(shape.gamma, g)) {
    rep.checked++;
    // Global counterpart carrying the association to the new environment.
    std::optional<TimedGlobalState> nextState;
    if (step.action.kind == ActionLabel::Kind::Time) {
      TimedGlobalState adv{atmp::advance(witness.nu, step.action.time), witness.g};
      if (associated(adv, step.next, shape.session).ok) nextState = adv;
    } else {
      for (const auto& gs : gtSteps(witness, shape.session, g)) {
        if (actionEq(gs.action, step.action) &&
            associated(gs.next, step.next, shape.session).ok) {
          nextState = gs.next;
          break;
        }
      }
    }
    if (!nextState) {
      rep.ok = false;
      rep.detail = "environment step " + printAction(step.action) +
                   " has no associated global counterpart";
      return rep;
    }

    // Process counterpart: a multi-step that re-types under the new env.
    bool matched = false;
    if (step.action.kind != ActionLabel::Kind::Time) {
      std::deque<std::pair<ProcPtr, int>> work{{shape.body, 0}};
      std::set<std::string> seen{printProcess(shape.body)};
      while (!work.empty() && !matched) {
        auto [cur, d] = work.front();
        work.pop_front();
        if (typecheck({j.theta, step.next, cur, {}}).ok) {
          matched = true;
          break;
        }
        if (d >= 8) continue;
        for (const auto& st : stepInstant(cur)) {
          if (seen.insert(printProcess(st.next)).second)
            work.emplace_back(st.next, d + 1);
        }
      }
    } else {
      Rat target = step.action.time;
      struct Node {
        ProcPtr p;
        Rat elapsed;
        int d;
      };
      std::deque<Node> work{{shape.body, Rat(0), 0}};
      std::set<std::string> seen{printProcess(shape.body) + "@0"};
      size_t budget = 20000;
      while (!work.empty() && !matched && budget-- > 0) {
        Node cur = work.front();
        work.pop_front();
        if (cur.elapsed == target &&
            typecheck({j.theta, step.next, cur.p, {}}).ok) {
          matched = true;
          break;
        }
        if (cur.d >= 12) continue;
        for (const auto& st : stepInstant(cur.p)) {
          std::string k = printProcess(st.next) + "@" + printTime(cur.elapsed);
          if (seen.insert(k).second) work.push_back({st.next, cur.elapsed, cur.d + 1});
        }
        std::vector<Rat> opts = autoGridProcess(cur.p);
        opts.push_back(target - cur.elapsed);
        for (const auto& t : opts) {
          if (t <= 0 || cur.elapsed + t > target) continue;
          auto nxt = timePass(cur.p, t);
          if (!nxt) continue;
          Rat e2 = cur.elapsed + t;
          std::string k = printProcess(*nxt) + "@" + printTime(e2);
          if (seen.insert(k).second) work.push_back({*nxt, e2, cur.d + 1});
        }
      }
    }
    if (!matched) {
      rep.ok = false;
      rep.detail = "environment step " + printAction(step.action) +
                   " is not matched by any typed multi-step of the process";
      return rep;
    }
  }
  rep.detail = "every enabled environment step is matched";
  return rep;
}

MetaReport checkDeadlockFreedom(const Judgment& j, int depth, const std::vector<Rat>& grid) {
  MetaReport rep;
  auto shape = requireSingleSessionShape(j);
  auto initial = typecheck({j.theta, shape.gamma, shape.body, {}});
  if (!initial.ok) {
    rep.ok = false;
    rep.detail = "initial judgment fails: " +
                 (initial.errors.empty() ? "" : initial.errors[0]);
    return rep;
  }
  ExploreOptions opts;
  opts.depth = depth;
  opts.grid = grid;
  opts.useAutoGrid = grid.empty();
  auto xp = explore(j.process, opts);
  rep.checked = xp.states;
  if (xp.errReached) {
    rep.ok = false;
    rep.detail = "a communication error is reachable";
    return rep;
  }
  if (!xp.deadlockFree) {
    rep.ok = false;
    rep.detail = "a maximal execution ends outside the kill-bundle shape";
    return rep;
  }
  rep.detail = "all " + std::to_string(xp.terminals.size()) + " terminals are kill bundles";
  if (xp.truncated > 0)
    rep.detail += " (" + std::to_string(xp.truncated) + " frontier states truncated)";
  return rep;
}

}  // namespace atmp
