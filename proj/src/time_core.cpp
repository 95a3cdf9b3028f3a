#include "atmp/time_core.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace atmp {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

boost::multiprecision::cpp_int parseDigits(const std::string& s, const char* what) {
  if (s.empty()) throw TimeError(std::string("empty number in ") + what);
  for (char ch : s) {
    if (!std::isdigit(static_cast<unsigned char>(ch)))
      throw TimeError(std::string("bad digit in ") + what + ": " + s);
  }
  return boost::multiprecision::cpp_int(s);
}

}  // namespace

Rat requireNonNeg(const Rat& v, const char* what) {
  if (v < 0) throw TimeError(std::string(what) + " must be non-negative");
  return v;
}

Rat parseTime(const std::string& text) {
  std::string s = trim(text);
  if (s.empty()) throw TimeError("empty time literal");
  if (auto slash = s.find('/'); slash != std::string::npos) {
    auto num = parseDigits(s.substr(0, slash), "time numerator");
    auto den = parseDigits(s.substr(slash + 1), "time denominator");
    if (den == 0) throw TimeError("zero denominator in time literal");
    return Rat(num, den);
  }
  if (auto dot = s.find('.'); dot != std::string::npos) {
    auto whole = parseDigits(s.substr(0, dot), "time literal");
    std::string fracDigits = s.substr(dot + 1);
    auto frac = parseDigits(fracDigits, "time literal");
    boost::multiprecision::cpp_int scale = 1;
    for (size_t i = 0; i < fracDigits.size(); ++i) scale *= 10;
    return Rat(whole) + Rat(frac, scale);
  }
  return Rat(parseDigits(s, "time literal"));
}

std::string printTime(const Rat& v) {
  if (denominator(v) == 1) return numerator(v).str();
  return numerator(v).str() + "/" + denominator(v).str();
}

ExtendedTime etFinite(const Rat& v) {
  return ExtendedTime{false, requireNonNeg(v, "time value")};
}

ExtendedTime etInfinity() { return ExtendedTime{true, Rat(0)}; }

int cmpExtended(const ExtendedTime& a, const ExtendedTime& b) {
  if (a.infinite && b.infinite) return 0;
  if (a.infinite) return 1;
  if (b.infinite) return -1;
  if (a.value < b.value) return -1;
  if (a.value > b.value) return 1;
  return 0;
}

bool operator==(const ExtendedTime& a, const ExtendedTime& b) {
  return cmpExtended(a, b) == 0;
}

std::string printExtendedTime(const ExtendedTime& v) {
  return v.infinite ? "inf" : printTime(v.value);
}

ExtendedTime parseExtendedTime(const std::string& text) {
  if (trim(text) == "inf") return etInfinity();
  return etFinite(parseTime(text));
}

ConstraintPtr ctTrue() {
  static const ConstraintPtr t = std::make_shared<ClockConstraint>();
  return t;
}

ConstraintPtr ctGt(const Clock& c, const Rat& bound) {
  auto n = std::make_shared<ClockConstraint>();
  n->kind = ClockConstraint::Kind::Gt;
  n->clock = c;
  n->bound = requireNonNeg(bound, "constraint bound");
  return n;
}

ConstraintPtr ctEq(const Clock& c, const Rat& bound) {
  auto n = std::make_shared<ClockConstraint>();
  n->kind = ClockConstraint::Kind::Eq;
  n->clock = c;
  n->bound = requireNonNeg(bound, "constraint bound");
  return n;
}

ConstraintPtr ctNot(const ConstraintPtr& d) {
  auto n = std::make_shared<ClockConstraint>();
  n->kind = ClockConstraint::Kind::Not;
  n->lhs = d;
  return n;
}

ConstraintPtr ctAnd(const ConstraintPtr& a, const ConstraintPtr& b) {
  auto n = std::make_shared<ClockConstraint>();
  n->kind = ClockConstraint::Kind::And;
  n->lhs = a;
  n->rhs = b;
  return n;
}

ConstraintPtr ctFalse() { return ctNot(ctTrue()); }

ConstraintPtr ctGe(const Clock& c, const Rat& bound) {
  if (bound == 0) return ctTrue();
  return ctNot(ctAnd(ctNot(ctGt(c, bound)), ctNot(ctEq(c, bound))));
}

ConstraintPtr ctLt(const Clock& c, const Rat& bound) {
  return ctAnd(ctNot(ctGt(c, bound)), ctNot(ctEq(c, bound)));
}

ConstraintPtr ctLe(const Clock& c, const Rat& bound) { return ctNot(ctGt(c, bound)); }

ConstraintPtr ctBetween(const Clock& c, const Rat& lo, bool loClosed,
                        const std::optional<Rat>& hi, bool hiClosed) {
  ConstraintPtr lower = loClosed ? ctGe(c, lo) : ctGt(c, lo);
  if (!hi) return lower;
  ConstraintPtr upper = hiClosed ? ctLe(c, *hi) : ctLt(c, *hi);
  return ctAnd(lower, upper);
}

bool constraintEq(const ConstraintPtr& a, const ConstraintPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ClockConstraint::Kind::True:
      return true;
    case ClockConstraint::Kind::Gt:
    case ClockConstraint::Kind::Eq:
      return a->clock == b->clock && a->bound == b->bound;
    case ClockConstraint::Kind::Not:
      return constraintEq(a->lhs, b->lhs);
    case ClockConstraint::Kind::And:
      return constraintEq(a->lhs, b->lhs) && constraintEq(a->rhs, b->rhs);
  }
  return false;
}

namespace {

void collectClocks(const ConstraintPtr& d, std::set<Clock>& out) {
  if (!d) return;
  switch (d->kind) {
    case ClockConstraint::Kind::True:
      return;
    case ClockConstraint::Kind::Gt:
    case ClockConstraint::Kind::Eq:
      out.insert(d->clock);
      return;
    case ClockConstraint::Kind::Not:
      collectClocks(d->lhs, out);
      return;
    case ClockConstraint::Kind::And:
      collectClocks(d->lhs, out);
      collectClocks(d->rhs, out);
      return;
  }
}

bool isAtom(const ConstraintPtr& d) {
  return d->kind == ClockConstraint::Kind::True ||
         d->kind == ClockConstraint::Kind::Gt ||
         d->kind == ClockConstraint::Kind::Eq;
}

std::string printOperand(const ConstraintPtr& d) {
  std::string body = printConstraint(d);
  if (d->kind == ClockConstraint::Kind::And) return "(" + body + ")";
  return body;
}

}  // namespace

std::set<Clock> freeClocks(const ConstraintPtr& d) {
  std::set<Clock> out;
  collectClocks(d, out);
  return out;
}

std::string printConstraint(const ConstraintPtr& d) {
  switch (d->kind) {
    case ClockConstraint::Kind::True:
      return "true";
    case ClockConstraint::Kind::Gt:
      return d->clock + ">" + printTime(d->bound);
    case ClockConstraint::Kind::Eq:
      return d->clock + "=" + printTime(d->bound);
    case ClockConstraint::Kind::Not:
      return "!" + (isAtom(d->lhs) || d->lhs->kind == ClockConstraint::Kind::Not
                        ? printConstraint(d->lhs)
                        : "(" + printConstraint(d->lhs) + ")");
    case ClockConstraint::Kind::And:
      return printOperand(d->lhs) + " & " + printOperand(d->rhs);
  }
  return "true";
}

namespace {

struct ConstraintParser {
  std::string src;
  size_t pos = 0;

  void skipWs() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }

  bool eat(char ch) {
    skipWs();
    if (pos < src.size() && src[pos] == ch) {
      ++pos;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw TimeError("constraint parse error at offset " + std::to_string(pos) + ": " + msg);
  }

  std::string ident() {
    skipWs();
    size_t start = pos;
    auto identChar = [](char ch) {
      return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '@' ||
             ch == '\'';
    };
    if (pos >= src.size() || !(std::isalpha(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
      fail("expected identifier");
    while (pos < src.size() && identChar(src[pos])) ++pos;
    return src.substr(start, pos - start);
  }

  Rat number() {
    skipWs();
    size_t start = pos;
    while (pos < src.size() &&
           (std::isdigit(static_cast<unsigned char>(src[pos])) || src[pos] == '.' ||
            src[pos] == '/'))
      ++pos;
    if (start == pos) fail("expected number");
    return parseTime(src.substr(start, pos - start));
  }

  ConstraintPtr expr() {
    ConstraintPtr left = term();
    while (true) {
      skipWs();
      if (!eat('&')) return left;
      left = ctAnd(left, term());
    }
  }

  ConstraintPtr term() {
    skipWs();
    if (eat('!')) return ctNot(term());
    if (eat('(')) {
      ConstraintPtr inner = expr();
      if (!eat(')')) fail("expected ')'");
      return inner;
    }
    std::string name = ident();
    if (name == "true") return ctTrue();
    if (name == "false") return ctFalse();
    skipWs();
    if (pos >= src.size()) fail("expected comparison operator");
    char op = src[pos];
    if (op == '>') {
      ++pos;
      if (pos < src.size() && src[pos] == '=') {
        ++pos;
        return ctGe(name, number());
      }
      return ctGt(name, number());
    }
    if (op == '<') {
      ++pos;
      if (pos < src.size() && src[pos] == '=') {
        ++pos;
        return ctLe(name, number());
      }
      return ctLt(name, number());
    }
    if (op == '=') {
      ++pos;
      return ctEq(name, number());
    }
    fail("expected comparison operator");
  }
};

}  // namespace

ConstraintPtr parseConstraint(const std::string& text) {
  ConstraintParser p{text};
  ConstraintPtr result = p.expr();
  p.skipWs();
  if (p.pos != p.src.size()) p.fail("trailing input");
  return result;
}

bool satisfies(const ClockValuation& nu, const ConstraintPtr& d) {
  switch (d->kind) {
    case ClockConstraint::Kind::True:
      return true;
    case ClockConstraint::Kind::Gt:
    case ClockConstraint::Kind::Eq: {
      auto it = nu.find(d->clock);
      if (it == nu.end()) throw UnknownClock(d->clock);
      return d->kind == ClockConstraint::Kind::Gt ? it->second > d->bound
                                                  : it->second == d->bound;
    }
    case ClockConstraint::Kind::Not:
      return !satisfies(nu, d->lhs);
    case ClockConstraint::Kind::And:
      return satisfies(nu, d->lhs) && satisfies(nu, d->rhs);
  }
  return true;
}

ClockValuation advance(const ClockValuation& nu, const Rat& t) {
  requireNonNeg(t, "time advance");
  ClockValuation out = nu;
  for (auto& [clock, v] : out) v += t;
  return out;
}

ClockValuation resetClocks(const ClockValuation& nu, const ResetPredicate& lambda) {
  ClockValuation out = nu;
  for (const Clock& c : lambda) {
    auto it = out.find(c);
    if (it == out.end()) throw UnknownClock(c);
    it->second = 0;
  }
  return out;
}

ClockValuation overrideUnion(const std::vector<ClockValuation>& vs) {
  ClockValuation out;
  for (const auto& v : vs)
    for (const auto& [clock, t] : v) out.insert_or_assign(clock, t);
  return out;
}

std::string printValuation(const ClockValuation& nu) {
  std::string out = "{";
  bool first = true;
  for (const auto& [clock, t] : nu) {
    if (!first) out += ", ";
    first = false;
    out += clock + "=" + printTime(t);
  }
  return out + "}";
}

namespace {

bool intervalValid(const Interval& i) {
  if (!i.hi) return true;
  if (i.lo > *i.hi) return false;
  if (i.lo == *i.hi) return i.loClosed && i.hiClosed;
  return true;
}

// Merge is possible when the gap between cur's upper end and next's lower end
// is empty (overlap or touching with at least one closed side).
bool mergeable(const Interval& cur, const Interval& next) {
  if (!cur.hi) return true;
  if (next.lo < *cur.hi) return true;
  if (next.lo == *cur.hi) return cur.hiClosed || next.loClosed;
  return false;
}

IntervalSet canonicalize(std::vector<Interval> parts) {
  std::vector<Interval> kept;
  for (auto& p : parts) {
    p.lo = requireNonNeg(p.lo, "interval bound");
    if (intervalValid(p)) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end(), [](const Interval& a, const Interval& b) {
    if (a.lo != b.lo) return a.lo < b.lo;
    if (a.loClosed != b.loClosed) return a.loClosed;
    return false;
  });
  IntervalSet out;
  for (const auto& p : kept) {
    if (out.parts.empty() || !mergeable(out.parts.back(), p)) {
      out.parts.push_back(p);
      continue;
    }
    Interval& cur = out.parts.back();
    if (!cur.hi) continue;
    if (!p.hi) {
      cur.hi.reset();
      cur.hiClosed = true;
    } else if (*p.hi > *cur.hi) {
      cur.hi = p.hi;
      cur.hiClosed = p.hiClosed;
    } else if (*p.hi == *cur.hi) {
      cur.hiClosed = cur.hiClosed || p.hiClosed;
    }
  }
  return out;
}

}  // namespace

IntervalSet isetEmpty() { return {}; }

IntervalSet isetFull() { return isetRange(Rat(0), true, std::nullopt, true); }

IntervalSet isetRange(const Rat& lo, bool loClosed, const std::optional<Rat>& hi,
                      bool hiClosed) {
  return canonicalize({Interval{lo, loClosed, hi, hiClosed}});
}

IntervalSet isetPoint(const Rat& v) { return isetRange(v, true, v, true); }

IntervalSet isetComplement(const IntervalSet& s) {
  std::vector<Interval> parts;
  Rat low = 0;
  bool lowIncluded = true;
  for (const auto& p : s.parts) {
    parts.push_back(Interval{low, lowIncluded, p.lo, !p.loClosed});
    if (!p.hi) return canonicalize(parts);
    low = *p.hi;
    lowIncluded = !p.hiClosed;
  }
  parts.push_back(Interval{low, lowIncluded, std::nullopt, true});
  return canonicalize(parts);
}

IntervalSet isetIntersect(const IntervalSet& a, const IntervalSet& b) {
  std::vector<Interval> parts;
  for (const auto& x : a.parts) {
    for (const auto& y : b.parts) {
      Interval r;
      if (x.lo > y.lo) {
        r.lo = x.lo;
        r.loClosed = x.loClosed;
      } else if (y.lo > x.lo) {
        r.lo = y.lo;
        r.loClosed = y.loClosed;
      } else {
        r.lo = x.lo;
        r.loClosed = x.loClosed && y.loClosed;
      }
      if (!x.hi) {
        r.hi = y.hi;
        r.hiClosed = y.hiClosed;
      } else if (!y.hi) {
        r.hi = x.hi;
        r.hiClosed = x.hiClosed;
      } else if (*x.hi < *y.hi) {
        r.hi = x.hi;
        r.hiClosed = x.hiClosed;
      } else if (*y.hi < *x.hi) {
        r.hi = y.hi;
        r.hiClosed = y.hiClosed;
      } else {
        r.hi = x.hi;
        r.hiClosed = x.hiClosed && y.hiClosed;
      }
      if (intervalValid(r)) parts.push_back(r);
    }
  }
  return canonicalize(std::move(parts));
}

IntervalSet isetUnion(const IntervalSet& a, const IntervalSet& b) {
  std::vector<Interval> parts = a.parts;
  parts.insert(parts.end(), b.parts.begin(), b.parts.end());
  return canonicalize(std::move(parts));
}

bool isetMember(const IntervalSet& s, const Rat& t) {
  for (const auto& p : s.parts) {
    if (t < p.lo || (t == p.lo && !p.loClosed)) continue;
    if (!p.hi) return true;
    if (t < *p.hi || (t == *p.hi && p.hiClosed)) return true;
  }
  return false;
}

bool isetEmptyP(const IntervalSet& s) { return s.parts.empty(); }

bool isetSubset(const IntervalSet& inner, const IntervalSet& outer) {
  return isetEmptyP(isetIntersect(inner, isetComplement(outer)));
}

bool isetEq(const IntervalSet& a, const IntervalSet& b) {
  if (a.parts.size() != b.parts.size()) return false;
  for (size_t i = 0; i < a.parts.size(); ++i) {
    const auto& x = a.parts[i];
    const auto& y = b.parts[i];
    if (x.lo != y.lo || x.loClosed != y.loClosed || x.hiClosed != y.hiClosed)
      return false;
    if (x.hi.has_value() != y.hi.has_value()) return false;
    if (x.hi && *x.hi != *y.hi) return false;
  }
  return true;
}

std::string printIntervalSet(const IntervalSet& s) {
  if (s.parts.empty()) return "empty";
  std::string out;
  for (size_t i = 0; i < s.parts.size(); ++i) {
    const auto& p = s.parts[i];
    if (i) out += " U ";
    out += p.loClosed ? "[" : "(";
    out += printTime(p.lo);
    out += ",";
    if (p.hi) {
      out += printTime(*p.hi);
      out += p.hiClosed ? "]" : ")";
    } else {
      out += "inf)";
    }
  }
  return out;
}

IntervalSet parseIntervalSet(const std::string& text) {
  std::string s = trim(text);
  if (s == "empty") return isetEmpty();
  std::vector<Interval> parts;
  size_t pos = 0;
  while (pos < s.size()) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos >= s.size()) break;
    char open = s[pos];
    if (open != '[' && open != '(') throw TimeError("interval parse error: expected bracket");
    ++pos;
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) throw TimeError("interval parse error: expected ','");
    Rat lo = parseTime(s.substr(pos, comma - pos));
    pos = comma + 1;
    size_t close = s.find_first_of("])", pos);
    if (close == std::string::npos) throw TimeError("interval parse error: expected closing bracket");
    std::string hiText = trim(s.substr(pos, close - pos));
    Interval part;
    part.lo = lo;
    part.loClosed = open == '[';
    if (hiText == "inf") {
      part.hi.reset();
      part.hiClosed = true;
      if (s[close] != ')') throw TimeError("interval parse error: unbounded interval must be open");
    } else {
      part.hi = parseTime(hiText);
      part.hiClosed = s[close] == ']';
    }
    parts.push_back(part);
    pos = close + 1;
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos < s.size()) {
      if (s[pos] != 'U') throw TimeError("interval parse error: expected 'U'");
      ++pos;
    }
  }
  return canonicalize(std::move(parts));
}

namespace {

IntervalSet solutionSetRec(const ConstraintPtr& d) {
  switch (d->kind) {
    case ClockConstraint::Kind::True:
      return isetFull();
    case ClockConstraint::Kind::Gt:
      return isetRange(d->bound, false, std::nullopt, true);
    case ClockConstraint::Kind::Eq:
      return isetPoint(d->bound);
    case ClockConstraint::Kind::Not:
      return isetComplement(solutionSetRec(d->lhs));
    case ClockConstraint::Kind::And:
      return isetIntersect(solutionSetRec(d->lhs), solutionSetRec(d->rhs));
  }
  return isetFull();
}

}  // namespace

IntervalSet solutionSet(const ConstraintPtr& d, const Clock& c) {
  std::set<Clock> fc = freeClocks(d);
  if (!fc.empty() && !(fc.size() == 1 && *fc.begin() == c)) throw MultiClockConstraint();
  return solutionSetRec(d);
}

std::vector<Rat> sampleGrid(const IntervalSet& s, const Rat& bound) {
  requireNonNeg(bound, "sample bound");
  IntervalSet clipped = isetIntersect(s, isetRange(Rat(0), true, bound, true));
  std::vector<Rat> out;
  for (const auto& p : clipped.parts) {
    if (p.loClosed) out.push_back(p.lo);
    if (p.hi && *p.hi > p.lo) {
      out.push_back((p.lo + *p.hi) / 2);
      if (p.hiClosed) out.push_back(*p.hi);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace atmp
