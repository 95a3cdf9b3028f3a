#include "atmp/generators.hpp"

#include <random>

#include "atmp/subtyping.hpp"
#include "atmp/semantics.hpp"

namespace atmp {

namespace {

const char* kRoleNames[3] = {"p", "q", "r"};

struct Gen {
  std::mt19937_64 rng;
  GenLimits lim;
  std::vector<Role> rs;

  explicit Gen(uint64_t seed, const GenLimits& limits) : rng(seed), lim(limits) {
    int n = std::min(std::max(limits.roles, 0), 3);
    for (int i = 0; i < n; ++i) rs.push_back(kRoleNames[i]);
  }

  int pick(int n) { return n <= 0 ? 0 : int(rng() % uint64_t(n)); }

  // A feasible window [a, a+w] on the acting role's own clock, kept inside
  // the constant budget.
  std::pair<Rat, Rat> window() {
    int top = std::max(1, lim.maxConst);
    int a = pick(std::min(6, top));
    int w = 1 + pick(std::min(2, top - a));
    return {Rat(a), Rat(a + w)};
  }

  GlobalPtr build(int depth, bool recVar) {
    if (rs.size() < 2) return gEnd();
    if (depth <= 0) {
      if (recVar && pick(2) == 0) return gVar("T");
      return gEnd();
    }
    int fi = pick(int(rs.size()));
    int ti = pick(int(rs.size()) - 1);
    if (ti >= fi) ++ti;
    const Role& from = rs[fi];
    const Role& to = rs[ti];
    Clock cf = "C_" + from;
    Clock ct = "C_" + to;
    auto [olo, ohi] = window();
    auto [ilo, ihi] = window();
    TimeAssertion timing{ctBetween(cf, olo, true, ohi, true), {cf},
                         ctBetween(ct, ilo, true, ihi, true), {ct}};
    int nb = 1 + pick(std::min(2, std::max(1, lim.branches)));
    GlobalBranches bs;
    for (int b = 0; b < nb; ++b) {
      bs.emplace("l" + std::to_string(b),
                 GlobalBranch{sortUnit(), timing, build(depth - 1, recVar)});
    }
    return gComm(from, to, bs);
  }

  GlobalPtr candidate() {
    if (rs.size() < 2) return gEnd();
    bool rec = pick(4) == 0;
    int depth = 1 + pick(std::max(1, lim.depth));
    GlobalPtr body = build(depth, rec);
    if (rec && !freeVars(body).empty()) return gRec("T", body);
    return body;
  }
};

bool projectsEverywhere(const GlobalPtr& g) {
  for (const auto& p : roles(g)) {
    try {
      (void)project(g, p);
    } catch (const ProjectionError&) {
      return false;
    }
  }
  return true;
}

// Elapse set of a guard from nu, mirroring the typing side.
IntervalSet elapseSet(const ConstraintPtr& d, const ClockValuation& nu) {
  if (!d) return isetFull();
  switch (d->kind) {
    case ClockConstraint::Kind::True:
      return isetFull();
    case ClockConstraint::Kind::Gt: {
      auto it = nu.find(d->clock);
      Rat diff = d->bound - (it == nu.end() ? Rat(0) : it->second);
      if (diff < 0) return isetFull();
      return isetRange(diff, false, std::nullopt, false);
    }
    case ClockConstraint::Kind::Eq: {
      auto it = nu.find(d->clock);
      Rat diff = d->bound - (it == nu.end() ? Rat(0) : it->second);
      if (diff < 0) return isetEmpty();
      return isetPoint(diff);
    }
    case ClockConstraint::Kind::Not:
      return isetComplement(elapseSet(d->lhs, nu));
    case ClockConstraint::Kind::And:
      return isetIntersect(elapseSet(d->lhs, nu), elapseSet(d->rhs, nu));
  }
  return isetFull();
}

void guardClocks(const ConstraintPtr& d, std::set<Clock>& out) {
  if (!d) return;
  switch (d->kind) {
    case ClockConstraint::Kind::True:
      return;
    case ClockConstraint::Kind::Gt:
    case ClockConstraint::Kind::Eq:
      out.insert(d->clock);
      return;
    case ClockConstraint::Kind::Not:
      guardClocks(d->lhs, out);
      return;
    case ClockConstraint::Kind::And:
      guardClocks(d->lhs, out);
      guardClocks(d->rhs, out);
      return;
  }
}

struct CanonicalWalk {
  std::string session;
  Role role;
  std::set<Clock> ownClocks;

  struct Piece {
    ProcPtr proc;
    LocalPtr narrowed;
  };

  Piece walk(const LocalPtr& t, ClockValuation nu, const Chan& chan) {
    switch (t->kind) {
      case LocalType::Kind::End:
        return {pNil(), lEnd()};
      case LocalType::Kind::Var:
        return {pCall("X_" + t->var, {chan}), lVar(t->var)};
      case LocalType::Kind::Rec: {
        std::string param = "x_" + t->var;
        Piece inner = walk(t->body, nu, chanVar(param));
        LocalPtr rec = lRec(t->var, inner.narrowed);
        auto proc = pDef("X_" + t->var, {param}, inner.proc, pCall("X_" + t->var, {chan}),
                         {{nu, rec}});
        return {proc, rec};
      }
      case LocalType::Kind::IntChoice: {
        const auto& [label, br] = *t->branches.begin();
        return comm(t, nu, chan, label, br, true);
      }
      case LocalType::Kind::ExtChoice: {
        // Receivers keep every label; the shared-window generator invariant
        // makes one wait position admissible for all of them.
        IntervalSet a = isetFull();
        for (const auto& [label, br] : t->branches)
          a = isetIntersect(a, elapseSet(br.guard, nu));
        auto [start, width, pointOnly] = wait(a, t->branches);
        std::map<Label, ProcBranch> pbs;
        LocalBranches nbs;
        for (const auto& [label, br] : t->branches) {
          ClockValuation next = advanceAndReset(nu, start, pointOnly ? Rat(0) : width, br.reset);
          Piece inner = walk(br.cont, next, chan);
          std::optional<std::string> bind;
          if (br.payload.kind == Sort::Kind::Delegation) bind = "y_" + label;
          pbs.emplace(label, ProcBranch{bind, inner.proc});
          nbs.emplace(label, LocalBranch{br.payload, br.guard, br.reset, inner.narrowed});
        }
        auto proc = pBranch(chan, t->partner, std::move(pbs),
                            etFinite(pointOnly ? Rat(0) : width));
        if (start > 0) proc = pDelayExact(start, proc);
        return {proc, lExtChoice(t->partner, nbs)};
      }
    }
    return {pNil(), lEnd()};
  }

  Piece comm(const LocalPtr& t, const ClockValuation& nu, const Chan& chan,
             const Label& label, const LocalBranch& br, bool isSend) {
    (void)isSend;
    IntervalSet a = elapseSet(br.guard, nu);
    LocalBranches sole;
    sole.emplace(label, br);
    auto [start, width, pointOnly] = wait(a, sole);
    ClockValuation next = advanceAndReset(nu, start, pointOnly ? Rat(0) : width, br.reset);
    Piece inner = walk(br.cont, next, chan);
    ProcPtr proc = pSelect(chan, t->partner, label, std::nullopt,
                           etFinite(pointOnly ? Rat(0) : width), inner.proc);
    if (start > 0) proc = pDelayExact(start, proc);
    LocalBranches nbs;
    nbs.emplace(label, LocalBranch{br.payload, br.guard, br.reset, inner.narrowed});
    return {proc, lIntChoice(t->partner, nbs)};
  }

  // Wait position: the start of the first admissible interval; the timeout
  // spans the interval only when every branch resets the acting clock, so the
  // continuation valuation stays independent of the firing instant.
  std::tuple<Rat, Rat, bool> wait(const IntervalSet& a, const LocalBranches& bs) {
    if (a.parts.empty()) return {Rat(0), Rat(0), true};
    const Interval& iv = a.parts.front();
    Rat start = iv.lo;
    if (!iv.loClosed) start = iv.hi ? Rat((iv.lo + *iv.hi) / 2) : Rat(iv.lo + 1);
    Rat width(0);
    if (iv.hi && iv.hiClosed) width = *iv.hi - start;
    bool pointOnly = width == 0;
    for (const auto& [label, br] : bs) {
      bool coversOwn = true;
      for (const auto& c : ownClocks) {
        if (!std::count(br.reset.begin(), br.reset.end(), c)) coversOwn = false;
      }
      std::set<Clock> used;
      guardClocks(br.guard, used);
      bool touchesOwn = false;
      for (const auto& c : used)
        if (ownClocks.count(c)) touchesOwn = true;
      if (touchesOwn && !coversOwn) pointOnly = true;
    }
    return {start, width, pointOnly};
  }

  ClockValuation advanceAndReset(const ClockValuation& nu, const Rat& start, const Rat&,
                                 const ResetPredicate& reset) {
    return resetClocks(atmp::advance(nu, start), reset);
  }
};

}  // namespace

GlobalPtr genGlobalType(uint64_t seed, const GenLimits& limits) {
  Gen gen(seed, limits);
  if (gen.rs.size() < 2) return gEnd();
  for (int attempt = 0; attempt < 200; ++attempt) {
    GlobalPtr g = gen.candidate();
    if (!checkWellFormed(g).ok) continue;
    if (!projectsEverywhere(g)) continue;
    return g;
  }
  return gEnd();
}

LocalPtr genLocalType(uint64_t seed, const GenLimits& limits) {
  GlobalPtr g = genGlobalType(seed, limits);
  auto rs = roles(g);
  if (rs.empty()) return lEnd();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  auto it = rs.begin();
  std::advance(it, long(rng() % uint64_t(rs.size())));
  try {
    return project(g, *it);
  } catch (const ProjectionError&) {
    return lEnd();
  }
}

ProcPtr canonicalProcessOf(const GlobalPtr& g, const std::string& session) {
  TimedGlobalState st{initialValuation(g), g};
  ClockOwnership own = inferOwnership(g);
  std::set<Clock> assigned;
  for (const auto& [r, cs] : own) assigned.insert(cs.begin(), cs.end());

  std::vector<Role> active;
  std::map<Role, LocalPtr> projections;
  for (const auto& p : roles(g)) {
    LocalPtr t = project(g, p);
    if (subtype(t, lEnd()) && queueEnvOf(g, p).empty()) continue;
    active.push_back(p);
    projections.emplace(p, t);
  }

  std::vector<ProcPtr> items;
  TypingEnv annEnv;
  for (const auto& p : active) {
    ClockValuation nu;
    for (const auto& c : own[p]) {
      auto it = st.nu.find(c);
      if (it != st.nu.end()) nu[c] = it->second;
    }
    if (p == active.front()) {
      for (const auto& [c, v] : st.nu)
        if (!assigned.count(c)) nu[c] = v;
    }
    CanonicalWalk w{session, p, own[p]};
    auto piece = w.walk(projections.at(p), nu, chanEp(session, p));
    items.push_back(piece.proc);
    items.push_back(pQueue(session, p, {}));
    annEnv.emplace(epKey(session, p), combinedEntry(nu, piece.narrowed, {}));
  }
  return pRestrict(session, pPar(std::move(items)),
                   SessionAnnotation{st.nu, g, annEnv});
}

namespace {

bool bruteSort(const Sort& a, const Sort& b, int fuel);

bool brute(const LocalPtr& a, const LocalPtr& b, int fuel) {
  if (fuel <= 0) return true;
  if (a->kind == LocalType::Kind::Rec) return brute(unfoldOne(a), b, fuel - 1);
  if (b->kind == LocalType::Kind::Rec) return brute(a, unfoldOne(b), fuel - 1);
  if (a->kind == LocalType::Kind::End || b->kind == LocalType::Kind::End)
    return a->kind == b->kind;
  if (a->kind != b->kind) return false;
  if (a->partner != b->partner) return false;
  if (a->kind == LocalType::Kind::IntChoice) {
    for (const auto& [label, rb] : b->branches) {
      auto it = a->branches.find(label);
      if (it == a->branches.end()) return false;
      const auto& lb = it->second;
      if (!constraintEq(lb.guard, rb.guard)) return false;
      if (lb.reset != rb.reset) return false;
      if (!bruteSort(rb.payload, lb.payload, fuel - 1)) return false;
      if (!brute(lb.cont, rb.cont, fuel - 1)) return false;
    }
    return true;
  }
  if (a->kind == LocalType::Kind::ExtChoice) {
    for (const auto& [label, lb] : a->branches) {
      auto it = b->branches.find(label);
      if (it == b->branches.end()) return false;
      const auto& rb = it->second;
      if (!constraintEq(lb.guard, rb.guard)) return false;
      if (lb.reset != rb.reset) return false;
      if (!bruteSort(lb.payload, rb.payload, fuel - 1)) return false;
      if (!brute(lb.cont, rb.cont, fuel - 1)) return false;
    }
    return true;
  }
  return false;
}

bool bruteSort(const Sort& a, const Sort& b, int fuel) {
  if (a.kind != b.kind) return false;
  if (a.kind == Sort::Kind::Base) return a.baseTag == b.baseTag;
  if (!constraintEq(a.guard, b.guard)) return false;
  return brute(a.continuation, b.continuation, fuel);
}

}  // namespace

bool bruteSubtype(const LocalPtr& a, const LocalPtr& b, int fuel) {
  return brute(a, b, fuel);
}

}  // namespace atmp
