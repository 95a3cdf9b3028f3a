#include "atmp/time_core.hpp"

#include <random>

#include "doctest.h"

using namespace atmp;

namespace {

ConstraintPtr randomConstraint(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 4);
  std::uniform_int_distribution<int> boundPick(0, 16);
  Rat bound = Rat(boundPick(rng), 2);
  switch (pick(rng)) {
    case 0:
      return ctTrue();
    case 1:
      return ctGt("c", bound);
    case 2:
      return ctEq("c", bound);
    case 3:
      return ctNot(randomConstraint(rng, depth - 1));
    default:
      return ctAnd(randomConstraint(rng, depth - 1), randomConstraint(rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("time literals parse and print exactly") {
  CHECK(parseTime("6") == Rat(6));
  CHECK(parseTime("6.5") == Rat(13, 2));
  CHECK(parseTime("13/2") == Rat(13, 2));
  CHECK(parseTime("0.25") == Rat(1, 4));
  CHECK(parseTime(" 7 ") == Rat(7));
  CHECK(printTime(Rat(6)) == "6");
  CHECK(printTime(Rat(13, 2)) == "13/2");
  CHECK(parseTime(printTime(Rat(355, 113))) == Rat(355, 113));
  CHECK_THROWS_AS(parseTime("-1"), TimeError);
  CHECK_THROWS_AS(parseTime(""), TimeError);
  CHECK_THROWS_AS(parseTime("1/0"), TimeError);
  CHECK_THROWS_AS(parseTime("abc"), TimeError);
}

TEST_CASE("extended time orders infinity above every finite value") {
  ExtendedTime inf = etInfinity();
  ExtendedTime big = etFinite(Rat(1000000));
  CHECK(cmpExtended(inf, big) == 1);
  CHECK(cmpExtended(big, inf) == -1);
  CHECK(cmpExtended(inf, etInfinity()) == 0);
  CHECK(cmpExtended(etFinite(Rat(3)), etFinite(Rat(13, 4))) == -1);
  CHECK(parseExtendedTime("inf") == etInfinity());
  CHECK(printExtendedTime(etFinite(Rat(13, 2))) == "13/2");
  CHECK(printExtendedTime(etInfinity()) == "inf");
}

TEST_CASE("derived constraint forms normalize into the core connectives") {
  ConstraintPtr le = ctLe("c", Rat(7));
  CHECK(le->kind == ClockConstraint::Kind::Not);
  CHECK(le->lhs->kind == ClockConstraint::Kind::Gt);
  ConstraintPtr lt = ctLt("c", Rat(7));
  CHECK(lt->kind == ClockConstraint::Kind::And);
  ConstraintPtr ge0 = ctGe("c", Rat(0));
  CHECK(ge0->kind == ClockConstraint::Kind::True);
  ClockValuation nu{{"c", Rat(7)}};
  CHECK(satisfies(nu, le));
  CHECK_FALSE(satisfies(nu, lt));
  CHECK(satisfies(nu, ctGe("c", Rat(7))));
  CHECK(satisfies(nu, ctBetween("c", Rat(6), true, Rat(7), true)));
  CHECK_FALSE(satisfies(nu, ctBetween("c", Rat(6), true, Rat(7), false)));
}

TEST_CASE("constraint text round-trips through the parser") {
  std::mt19937 rng(7);
  for (int i = 0; i < 500; ++i) {
    ConstraintPtr d = randomConstraint(rng, 4);
    CHECK(constraintEq(parseConstraint(printConstraint(d)), d));
  }
  ConstraintPtr sugar = parseConstraint("c>=6 & c<=7");
  CHECK(constraintEq(sugar, ctBetween("c", Rat(6), true, Rat(7), true)));
  CHECK(constraintEq(parseConstraint("true"), ctTrue()));
  CHECK_THROWS_AS(parseConstraint("c >"), TimeError);
  CHECK_THROWS_AS(parseConstraint("(c>1"), TimeError);
  CHECK_THROWS_AS(parseConstraint("c>1 extra"), TimeError);
}

TEST_CASE("satisfies evaluates against a valuation and rejects unknown clocks") {
  ClockValuation nu{{"x", Rat(6)}, {"y", Rat(0)}};
  CHECK(satisfies(nu, ctEq("x", Rat(6))));
  CHECK_FALSE(satisfies(nu, ctGt("x", Rat(6))));
  CHECK(satisfies(nu, ctAnd(ctEq("x", Rat(6)), ctNot(ctGt("y", Rat(0))))));
  CHECK(satisfies(nu, ctTrue()));
  CHECK_THROWS_AS(satisfies(nu, ctGt("z", Rat(1))), UnknownClock);
}

TEST_CASE("advance shifts every clock and is additive") {
  ClockValuation nu{{"x", Rat(1)}, {"y", Rat(13, 2)}};
  ClockValuation shifted = atmp::advance(nu, Rat(3, 2));
  CHECK(shifted.at("x") == Rat(5, 2));
  CHECK(shifted.at("y") == Rat(8));
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> pick(0, 20);
  for (int i = 0; i < 200; ++i) {
    Rat t1(pick(rng), 4), t2(pick(rng), 4);
    CHECK(atmp::advance(atmp::advance(nu, t1), t2) == atmp::advance(nu, Rat(t1 + t2)));
  }
  CHECK_THROWS_AS(atmp::advance(nu, Rat(-1)), TimeError);
}

TEST_CASE("resetClocks zeroes exactly the named clocks and is idempotent") {
  ClockValuation nu{{"x", Rat(4)}, {"y", Rat(5)}};
  ClockValuation r = resetClocks(nu, {"x"});
  CHECK(r.at("x") == Rat(0));
  CHECK(r.at("y") == Rat(5));
  CHECK(resetClocks(r, {"x"}) == r);
  CHECK(resetClocks(nu, {}) == nu);
  CHECK_THROWS_AS(resetClocks(nu, {"z"}), UnknownClock);
}

TEST_CASE("overrideUnion is right-biased and associative") {
  ClockValuation a{{"x", Rat(1)}, {"y", Rat(2)}};
  ClockValuation b{{"y", Rat(9)}, {"z", Rat(3)}};
  ClockValuation c{{"z", Rat(7)}};
  ClockValuation merged = overrideUnion({a, b, c});
  CHECK(merged.at("x") == Rat(1));
  CHECK(merged.at("y") == Rat(9));
  CHECK(merged.at("z") == Rat(7));
  CHECK(overrideUnion({overrideUnion({a, b}), c}) == merged);
  CHECK(overrideUnion({a, overrideUnion({b, c})}) == merged);
  CHECK(overrideUnion({}) == ClockValuation{});
}

TEST_CASE("interval sets stay canonical under construction") {
  IntervalSet joined = isetUnion(isetRange(Rat(1), true, Rat(2), true),
                                 isetRange(Rat(2), true, Rat(3), true));
  CHECK(joined.parts.size() == 1);
  CHECK(printIntervalSet(joined) == "[1,3]");
  IntervalSet gap = isetUnion(isetRange(Rat(1), true, Rat(2), false),
                              isetRange(Rat(2), false, Rat(3), true));
  CHECK(gap.parts.size() == 2);
  CHECK(printIntervalSet(gap) == "[1,2) U (2,3]");
  CHECK(isetEmptyP(isetRange(Rat(3), true, Rat(2), true)));
  CHECK(isetEmptyP(isetRange(Rat(2), false, Rat(2), true)));
  CHECK(printIntervalSet(isetComplement(isetEmpty())) == "[0,inf)");
  CHECK(printIntervalSet(isetComplement(isetPoint(Rat(6)))) == "[0,6) U (6,inf)");
  CHECK(isetEq(parseIntervalSet(printIntervalSet(gap)), gap));
  CHECK(isetEq(parseIntervalSet("empty"), isetEmpty()));
}

TEST_CASE("solutionSet matches the worked example") {
  ConstraintPtr d = ctAnd(ctGt("C", Rat(5)), ctNot(ctEq("C", Rat(6))));
  IntervalSet s = solutionSet(d, "C");
  CHECK(printIntervalSet(s) == "(5,6) U (6,inf)");
  CHECK(isetEq(solutionSet(ctTrue(), "C"), isetFull()));
  CHECK_THROWS_AS(solutionSet(ctAnd(ctGt("C", Rat(1)), ctGt("D", Rat(1))), "C"),
                  MultiClockConstraint);
  CHECK_THROWS_AS(solutionSet(ctGt("D", Rat(1)), "C"), MultiClockConstraint);
}

TEST_CASE("satisfies agrees with solutionSet membership") {
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> pick(0, 36);
  for (int i = 0; i < 400; ++i) {
    ConstraintPtr d = randomConstraint(rng, 4);
    IntervalSet s = solutionSet(d, "c");
    for (int j = 0; j < 8; ++j) {
      Rat t(pick(rng), 4);
      CHECK(satisfies(ClockValuation{{"c", t}}, d) == isetMember(s, t));
    }
  }
}

TEST_CASE("sampleGrid picks included endpoints plus interior midpoints") {
  std::vector<Rat> g1 = sampleGrid(isetRange(Rat(6), true, Rat(7), true), Rat(10));
  CHECK(g1 == std::vector<Rat>{Rat(6), Rat(13, 2), Rat(7)});
  std::vector<Rat> g2 = sampleGrid(isetFull(), Rat(2));
  CHECK(g2 == std::vector<Rat>{Rat(0), Rat(1), Rat(2)});
  CHECK(sampleGrid(isetEmpty(), Rat(5)).empty());
  std::vector<Rat> g3 = sampleGrid(isetRange(Rat(5), false, Rat(6), false), Rat(10));
  CHECK(g3 == std::vector<Rat>{Rat(11, 2)});
  std::vector<Rat> g4 = sampleGrid(isetRange(Rat(4), true, Rat(9), true), Rat(5));
  CHECK(g4 == std::vector<Rat>{Rat(4), Rat(9, 2), Rat(5)});
  CHECK(sampleGrid(isetRange(Rat(6), true, Rat(7), true), Rat(3)).empty());
  std::vector<Rat> g5 = sampleGrid(isetPoint(Rat(3)), Rat(10));
  CHECK(g5 == std::vector<Rat>{Rat(3)});
}

TEST_CASE("interval subset and membership behave like set operations") {
  IntervalSet a = isetRange(Rat(1), true, Rat(5), true);
  IntervalSet b = isetRange(Rat(2), true, Rat(3), false);
  CHECK(isetSubset(b, a));
  CHECK_FALSE(isetSubset(a, b));
  CHECK(isetSubset(isetEmpty(), b));
  CHECK(isetMember(a, Rat(5)));
  CHECK_FALSE(isetMember(b, Rat(3)));
  IntervalSet inter = isetIntersect(a, isetComplement(b));
  CHECK(printIntervalSet(inter) == "[1,2) U [3,5]");
}
