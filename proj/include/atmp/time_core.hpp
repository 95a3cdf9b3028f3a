#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace atmp {

using Rat = boost::multiprecision::cpp_rational;
using Clock = std::string;

struct TimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownClock : TimeError {
  explicit UnknownClock(const Clock& c) : TimeError("unknown clock: " + c) {}
};
struct MultiClockConstraint : TimeError {
  MultiClockConstraint() : TimeError("constraint mentions more than one clock") {}
};

// Non-negative exact rational time. "6", "6.5", and "13/2" all parse; printing
// uses the integer or p/q form.
Rat parseTime(const std::string& text);
std::string printTime(const Rat& v);
Rat requireNonNeg(const Rat& v, const char* what);

struct ExtendedTime {
  bool infinite = false;
  Rat value;
};
ExtendedTime etFinite(const Rat& v);
ExtendedTime etInfinity();
int cmpExtended(const ExtendedTime& a, const ExtendedTime& b);
bool operator==(const ExtendedTime& a, const ExtendedTime& b);
std::string printExtendedTime(const ExtendedTime& v);
ExtendedTime parseExtendedTime(const std::string& text);

struct ClockConstraint;
using ConstraintPtr = std::shared_ptr<const ClockConstraint>;

struct ClockConstraint {
  enum class Kind { True, Gt, Eq, Not, And };
  Kind kind = Kind::True;
  Clock clock;
  Rat bound;
  ConstraintPtr lhs;
  ConstraintPtr rhs;
};

ConstraintPtr ctTrue();
ConstraintPtr ctGt(const Clock& c, const Rat& bound);
ConstraintPtr ctEq(const Clock& c, const Rat& bound);
ConstraintPtr ctNot(const ConstraintPtr& d);
ConstraintPtr ctAnd(const ConstraintPtr& a, const ConstraintPtr& b);
// Derived forms, normalized into the core connectives.
ConstraintPtr ctFalse();
ConstraintPtr ctGe(const Clock& c, const Rat& bound);
ConstraintPtr ctLt(const Clock& c, const Rat& bound);
ConstraintPtr ctLe(const Clock& c, const Rat& bound);
ConstraintPtr ctBetween(const Clock& c, const Rat& lo, bool loClosed,
                        const std::optional<Rat>& hi, bool hiClosed);

bool constraintEq(const ConstraintPtr& a, const ConstraintPtr& b);
std::set<Clock> freeClocks(const ConstraintPtr& d);
std::string printConstraint(const ConstraintPtr& d);
ConstraintPtr parseConstraint(const std::string& text);

using ClockValuation = std::map<Clock, Rat>;
using ResetPredicate = std::set<Clock>;

bool satisfies(const ClockValuation& nu, const ConstraintPtr& d);
ClockValuation advance(const ClockValuation& nu, const Rat& t);
ClockValuation resetClocks(const ClockValuation& nu, const ResetPredicate& lambda);
ClockValuation overrideUnion(const std::vector<ClockValuation>& vs);
std::string printValuation(const ClockValuation& nu);

// Finite unions of intervals over [0, inf), kept ordered and disjoint; only the
// last part may be right-unbounded.
struct Interval {
  Rat lo;
  bool loClosed = true;
  std::optional<Rat> hi;
  bool hiClosed = true;
};

struct IntervalSet {
  std::vector<Interval> parts;
};

IntervalSet isetEmpty();
IntervalSet isetFull();
IntervalSet isetRange(const Rat& lo, bool loClosed, const std::optional<Rat>& hi,
                      bool hiClosed);
IntervalSet isetPoint(const Rat& v);
IntervalSet isetComplement(const IntervalSet& s);
IntervalSet isetIntersect(const IntervalSet& a, const IntervalSet& b);
IntervalSet isetUnion(const IntervalSet& a, const IntervalSet& b);
bool isetMember(const IntervalSet& s, const Rat& t);
bool isetEmptyP(const IntervalSet& s);
bool isetSubset(const IntervalSet& inner, const IntervalSet& outer);
bool isetEq(const IntervalSet& a, const IntervalSet& b);
std::string printIntervalSet(const IntervalSet& s);
IntervalSet parseIntervalSet(const std::string& text);

IntervalSet solutionSet(const ConstraintPtr& d, const Clock& c);
std::vector<Rat> sampleGrid(const IntervalSet& s, const Rat& bound);

}  // namespace atmp
