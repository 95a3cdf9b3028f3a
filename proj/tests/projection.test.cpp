#include "atmp/projection.hpp"

#include "doctest.h"
#include "fixtures.hpp"

using namespace atmp;

namespace {

GlobalBranches gb(std::initializer_list<std::pair<Label, GlobalBranch>> xs) {
  GlobalBranches out;
  for (const auto& [label, br] : xs) out.emplace(label, br);
  return out;
}

LocalBranches lb(std::initializer_list<std::pair<Label, LocalBranch>> xs) {
  LocalBranches out;
  for (const auto& [label, br] : xs) out.emplace(label, br);
  return out;
}

}  // namespace

TEST_CASE("pipeline projections match the expected local types exactly") {
  GlobalPtr g = fixtures::dataPipeline();
  CHECK(ltEq(project(g, "Sen"), fixtures::dataPipelineSen()));
  CHECK(ltEq(project(g, "Sat"), fixtures::dataPipelineSat()));
  CHECK(ltEq(project(g, "Ser"), fixtures::dataPipelineSer()));
}

TEST_CASE("projection base cases") {
  CHECK(ltEq(project(gEnd(), "p"), lEnd()));
  GlobalPtr g = fixtures::dataPipeline();
  CHECK(ltEq(project(g, "Nobody"), lEnd()));
  GlobalPtr loop = gRec("t", gComm("p", "q", gb({{"l", {sortUnit(), {}, gVar("t")}}})));
  CHECK(ltEq(project(loop, "r"), lEnd()));
  LocalPtr projected = project(loop, "p");
  CHECK(projected->kind == LocalType::Kind::Rec);
  CHECK(projected->body->kind == LocalType::Kind::IntChoice);
}

TEST_CASE("projection commutes with unfolding") {
  TimeAssertion ta{ctLe("x", Rat(5)), {"x"}, ctLe("y", Rat(5)), {"y"}};
  GlobalPtr loop = gRec("t", gComm("p", "q", gb({{"l", {sortUnit(), ta, gVar("t")}}})));
  for (Role r : {"p", "q"}) {
    LocalPtr a = project(unfoldOne(loop), r);
    LocalPtr b = unfoldOne(project(loop, r));
    CHECK(ltEq(a, b));
  }
}

TEST_CASE("third parties see the merge of branches") {
  TimeAssertion ta;
  GlobalPtr g = gComm(
      "q", "r",
      gb({{"l1", {sortUnit(), ta, gComm("r", "p", gb({{"m1", {sortUnit(), ta, gEnd()}}}))}},
          {"l2", {sortUnit(), ta, gComm("r", "p", gb({{"m2", {sortUnit(), ta, gEnd()}}}))}}}));
  LocalPtr t = project(g, "p");
  LocalPtr expected = lExtChoice("r", lb({{"m1", {sortUnit(), ctTrue(), {}, lEnd()}},
                                          {"m2", {sortUnit(), ctTrue(), {}, lEnd()}}}));
  CHECK(ltEq(t, expected));
}

TEST_CASE("unmergeable branch projections raise NotProjectable") {
  TimeAssertion ta;
  GlobalPtr sends = gComm("r", "p", gb({{"m", {sortUnit(), ta, gEnd()}}}));
  GlobalPtr recvs = gComm("p", "r", gb({{"m", {sortUnit(), ta, gEnd()}}}));
  GlobalPtr g = gComm("q", "r",
                      gb({{"l1", {sortUnit(), ta, sends}}, {"l2", {sortUnit(), ta, recvs}}}));
  CHECK_THROWS_AS(project(g, "p"), NotProjectable);
}

TEST_CASE("merge unions external choices and demands equal internal ones") {
  LocalPtr e1 = lExtChoice("p", lb({{"l1", {sortUnit(), ctLe("c", Rat(2)), {"c"}, lEnd()}}}));
  LocalPtr e2 = lExtChoice("p", lb({{"l2", {sortUnit(), ctGt("c", Rat(1)), {}, lEnd()}}}));
  LocalPtr joined = merge(e1, e2);
  CHECK(ltEq(joined,
             lExtChoice("p", lb({{"l1", {sortUnit(), ctLe("c", Rat(2)), {"c"}, lEnd()}},
                                 {"l2", {sortUnit(), ctGt("c", Rat(1)), {}, lEnd()}}}))));

  LocalPtr clash = lExtChoice("p", lb({{"l1", {sortUnit(), ctLe("c", Rat(3)), {"c"}, lEnd()}}}));
  CHECK_THROWS_AS(merge(e1, clash), NotMergeable);

  LocalPtr i1 = lIntChoice("p", lb({{"l1", {sortUnit(), ctTrue(), {}, lEnd()}}}));
  LocalPtr i12 = lIntChoice("p", lb({{"l1", {sortUnit(), ctTrue(), {}, lEnd()}},
                                     {"l2", {sortUnit(), ctTrue(), {}, lEnd()}}}));
  CHECK_THROWS_AS(merge(i1, i12), NotMergeable);
  CHECK(ltEq(merge(i12, i12), i12));

  CHECK_THROWS_AS(merge(e1, i1), NotMergeable);
  CHECK_THROWS_AS(merge(lExtChoice("q", e1->branches), e1), NotMergeable);

  for (LocalPtr t : {fixtures::dataPipelineSen(), fixtures::dataPipelineSat(),
                     fixtures::dataPipelineSer(), lEnd()}) {
    CHECK(ltEq(merge(t, t), t));
  }
}

TEST_CASE("en-route nodes project asymmetrically") {
  TimeAssertion ta{ctLe("cp", Rat(5)), {}, ctLe("cq", Rat(6)), {}};
  GlobalPtr cont1 = gComm("q", "r", gb({{"m", {sortUnit(), {}, gEnd()}}}));
  GlobalPtr cont2 = gComm("q", "r", gb({{"m", {sortUnit(), {}, gEnd()}}}));
  GlobalPtr g = gEnRoute("p", "q", "l1",
                         gb({{"l1", {sortUnit(), ta, cont1}}, {"l2", {sortUnit(), ta, cont2}}}));

  CHECK(ltEq(project(g, "p"), lEnd()));

  LocalPtr forQ = project(g, "q");
  CHECK(forQ->kind == LocalType::Kind::ExtChoice);
  CHECK(forQ->partner == "p");
  CHECK(forQ->branches.size() == 2);
  CHECK(constraintEq(forQ->branches.at("l1").guard, ctLe("cq", Rat(6))));
  CHECK(forQ->branches.at("l1").cont->kind == LocalType::Kind::IntChoice);

  LocalPtr forR = project(g, "r");
  CHECK(forR->kind == LocalType::Kind::ExtChoice);
  CHECK(forR->partner == "q");
}

TEST_CASE("queue environments collect pending transmissions of a sender") {
  GlobalPtr g = fixtures::dataPipeline();
  CHECK(queueEnvOf(g, "Sen").empty());
  CHECK(queueEnvOf(g, "Sat").empty());
  CHECK(queueEnvOf(gEnd(), "p").empty());

  GlobalPtr pending = gEnRoute("p", "q", "Data", gb({{"Data", {sortUnit(), {}, gEnd()}}}));
  QueueType qp = queueEnvOf(pending, "p");
  REQUIRE(qp.size() == 1);
  CHECK(qp[0].receiver == "q");
  CHECK(qp[0].label == "Data");
  CHECK(queueEnvOf(pending, "q").empty());

  GlobalPtr chained =
      gEnRoute("p", "q", "a",
               gb({{"a", {sortUnit(), {}, gEnRoute("p", "r", "b",
                                                   gb({{"b", {sortUnit(), {}, gEnd()}}}))}}}));
  QueueType qc = queueEnvOf(chained, "p");
  REQUIRE(qc.size() == 2);
  CHECK(qc[0].receiver == "q");
  CHECK(qc[1].receiver == "r");

  GlobalPtr incoherent = gComm(
      "a", "b",
      gb({{"l1", {sortUnit(), {}, pending}}, {"l2", {sortUnit(), {}, gEnd()}}}));
  CHECK_THROWS_AS(queueEnvOf(incoherent, "p"), NotQueueCoherent);
}
