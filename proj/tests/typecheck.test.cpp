#include "doctest.h"

#include "atmp/typecheck.hpp"
#include "fixtures.hpp"

using namespace atmp;

namespace {

Rat rat(long n, long d = 1) { return Rat(n) / d; }

Judgment closedJudgment(const ProcPtr& p, TypingEnv gamma) {
  return Judgment{{}, std::move(gamma), p, {}};
}

// The pipeline ensemble under its displayed environment, with the global
// witness attached for the metatheory checkers.
Judgment pipelineJudgment() {
  Judgment j;
  j.gamma = fixtures::gammaData();
  j.process = fixtures::remoteDataEnsemble();
  j.witnesses.emplace("s", fixtures::pipelineState());
  return j;
}

SessionAnnotation pipelineAnnotation() {
  auto st = fixtures::pipelineState();
  return SessionAnnotation{st.nu, st.g, fixtures::gammaData()};
}

// The ensemble one instant after the satellite died at global time 6.5: the
// sensor still tries to send, the satellite endpoint is absorbed by the kill,
// and the server keeps listening for the remaining 0.3 of its window.
ProcPtr pipelineAfterSatFailure() {
  auto sen = pTry(pSelect(chanEp("s", "Sen"), "Sat", "Data", std::nullopt,
                          etFinite(rat(3, 10)), pNil()),
                  pCancel(chanEp("s", "Sen"), pNil()));
  std::map<Label, ProcBranch> serBranches;
  serBranches.emplace("Data", ProcBranch{std::nullopt, pNil()});
  serBranches.emplace("fatal", ProcBranch{std::nullopt, pNil()});
  auto ser = pBranch(chanEp("s", "Ser"), "Sat", std::move(serBranches),
                     etFinite(rat(3, 10)));
  return pPar({sen, pQueue("s", "Sen", {}), pKill("s"), pQueue("s", "Sat", {}), ser,
               pQueue("s", "Ser", {})});
}

ProcPtr senWithTimeout(const Rat& timeout) {
  return pDelayConstraint(
      ctEq("c1", rat(13, 2)), "c1",
      pTry(pSelect(chanEp("s", "Sen"), "Sat", "Data", std::nullopt, etFinite(timeout),
                   pNil()),
           pCancel(chanEp("s", "Sen"), pNil())));
}

TypingEnv endedEnv() {
  TypingEnv env;
  env.emplace(epKey("s", "Sen"), combinedEntry({}, lEnd(), {}));
  env.emplace(epKey("s", "Sat"), combinedEntry({}, lEnd(), {}));
  env.emplace(epKey("s", "Ser"), combinedEntry({}, lEnd(), {}));
  return env;
}

}  // namespace

TEST_CASE("the pipeline ensemble types against its displayed environment") {
  auto rep = typecheck(pipelineJudgment());
  CAPTURE(rep.errors);
  CHECK(rep.ok);

  auto verbose = typecheck(pipelineJudgment(), true);
  CHECK(verbose.ok);
  CHECK(!verbose.trace.empty());
  auto js = verbose.toJson();
  CHECK(js["ok"].get<bool>());
}

TEST_CASE("the annotated restriction of the ensemble types in the empty environment") {
  auto p = pRestrict("s", fixtures::remoteDataEnsemble(), pipelineAnnotation());
  auto rep = typecheck(closedJudgment(p, {}));
  CAPTURE(rep.errors);
  CHECK(rep.ok);
}

TEST_CASE("a send window wider than the guard region is rejected") {
  Judgment j = pipelineJudgment();
  auto ensemble = fixtures::remoteDataEnsemble();
  std::vector<ProcPtr> items = ensemble->items;
  items[0] = senWithTimeout(rat(3, 5));
  j.process = pPar(items);
  auto rep = typecheck(j);
  CHECK(!rep.ok);
  REQUIRE(!rep.errors.empty());
  CHECK(rep.errors[0].find("T-Sel") == 0);
  CHECK(rep.errors[0].find("window") != std::string::npos);
}

TEST_CASE("restriction without an annotation is rejected") {
  auto p = pRestrict("s", fixtures::remoteDataEnsemble());
  auto rep = typecheck(closedJudgment(p, {}));
  CHECK(!rep.ok);
  REQUIRE(!rep.errors.empty());
  CHECK(rep.errors[0].find("annotation") != std::string::npos);
}

TEST_CASE("the inactive process needs a terminated environment") {
  CHECK(typecheck(closedJudgment(pNil(), endedEnv())).ok);
  CHECK(typecheck(closedJudgment(pNil(), {})).ok);
  CHECK(!typecheck(closedJudgment(pNil(), fixtures::gammaData())).ok);
}

TEST_CASE("no environment types the error process") {
  CHECK(!typecheck(closedJudgment(pErr(), {})).ok);
  CHECK(!typecheck(closedJudgment(pErr(), fixtures::gammaData())).ok);
}

TEST_CASE("a failed process types under any environment") {
  auto failed = pFailed(pSelect(chanEp("s", "Sen"), "Sat", "Data", std::nullopt,
                                etFinite(rat(1)), pNil()));
  CHECK(typecheck(closedJudgment(failed, fixtures::gammaData())).ok);
  CHECK(typecheck(closedJudgment(failed, {})).ok);
}

TEST_CASE("killing a session absorbs its leftover entries but no others") {
  CHECK(typecheck(closedJudgment(pKill("s"), fixtures::gammaData())).ok);
  auto foreign = fixtures::gammaData("t");
  auto rep = typecheck(closedJudgment(pKill("s"), foreign));
  CHECK(!rep.ok);
  REQUIRE(!rep.errors.empty());
  CHECK(rep.errors[0].find("T-Kill") == 0);
}

TEST_CASE("receivers may handle more labels than the entry type lists") {
  LocalBranches tb;
  tb.emplace("Data", LocalBranch{sortUnit(), ctTrue(), {}, lEnd()});
  TypingEnv env;
  env.emplace(epKey("s", "q"), sessionEntry({}, lExtChoice("p", tb)));

  std::map<Label, ProcBranch> pb;
  pb.emplace("Data", ProcBranch{std::nullopt, pNil()});
  pb.emplace("extra", ProcBranch{std::nullopt, pErr()});
  auto wide = pBranch(chanEp("s", "q"), "p", pb, etFinite(rat(1)));
  CHECK(typecheck(closedJudgment(wide, env)).ok);

  std::map<Label, ProcBranch> narrow;
  narrow.emplace("extra", ProcBranch{std::nullopt, pNil()});
  auto missing = pBranch(chanEp("s", "q"), "p", narrow, etFinite(rat(1)));
  auto rep = typecheck(closedJudgment(missing, env));
  CHECK(!rep.ok);
  CHECK(rep.errors[0].find("does not handle") != std::string::npos);
}

TEST_CASE("definitions demand parameter annotations and typed call sites") {
  auto body = pSelect(chanVar("x"), "Sat", "Data", std::nullopt, etFinite(rat(1)), pNil());
  auto bare = pDef("X", {"x"}, body, pNil());
  auto rep = typecheck(closedJudgment(bare, {}));
  CHECK(!rep.ok);
  CHECK(rep.errors[0].find("parameter annotations") != std::string::npos);

  LocalBranches sb;
  sb.emplace("Data", LocalBranch{sortUnit(), ctTrue(), {}, lEnd()});
  LocalPtr sel = lIntChoice("Sat", sb);
  TypingEnv env;
  env.emplace(epKey("s", "Sen"), sessionEntry({}, sel));
  auto defd = pDef("X", {"x"}, body, pCall("X", {chanEp("s", "Sen")}), {{{}, sel}});
  auto ok = typecheck(closedJudgment(defd, env));
  CAPTURE(ok.errors);
  CHECK(ok.ok);

  auto unbound = typecheck(closedJudgment(pCall("Y", {}), {}));
  CHECK(!unbound.ok);
  CHECK(unbound.errors[0].find("unbound process variable") != std::string::npos);
}

TEST_CASE("the guarded body of a try must act on a single channel") {
  auto two = pPar({pSelect(chanEp("s", "Sen"), "Sat", "Data", std::nullopt,
                           etFinite(rat(1)), pNil()),
                   pSelect(chanEp("s", "Sat"), "Ser", "Data", std::nullopt,
                           etFinite(rat(1)), pNil())});
  auto p = pTry(two, pNil());
  auto rep = typecheck(closedJudgment(p, fixtures::gammaData()));
  CHECK(!rep.ok);
  CHECK(rep.errors[0].find("T-Try") == 0);
}

TEST_CASE("delegation payloads move the endpoint across the send") {
  LocalBranches inner;
  inner.emplace("go", LocalBranch{sortUnit(), ctTrue(), {}, lEnd()});
  LocalPtr delegated = lIntChoice("r", inner);

  LocalBranches sendB;
  sendB.emplace("hand", LocalBranch{sortDelegation(ctTrue(), delegated), ctTrue(), {},
                                    lEnd()});
  TypingEnv env;
  env.emplace(epKey("s", "p"), sessionEntry({}, lIntChoice("q", sendB)));
  env.emplace(epKey("t", "p"), sessionEntry({}, delegated));

  auto give = pSelect(chanEp("s", "p"), "q", "hand", chanEp("t", "p"), etFinite(rat(1)),
                      pNil());
  auto ok = typecheck(closedJudgment(give, env));
  CAPTURE(ok.errors);
  CHECK(ok.ok);

  auto keep = pSelect(chanEp("s", "p"), "q", "hand", std::nullopt, etFinite(rat(1)),
                      pNil());
  CHECK(!typecheck(closedJudgment(keep, env)).ok);
}

TEST_CASE("delegation receives bind the payload at every admissible valuation") {
  LocalBranches inner;
  inner.emplace("go", LocalBranch{sortUnit(), ctBetween("d", rat(0), true, rat(5), true),
                                  {}, lEnd()});
  LocalPtr delegated = lIntChoice("r", inner);

  LocalBranches recvB;
  recvB.emplace("hand",
                LocalBranch{sortDelegation(ctLe("d", rat(2)), delegated), ctTrue(), {},
                            lEnd()});
  TypingEnv env;
  env.emplace(epKey("s", "q"), sessionEntry({}, lExtChoice("p", recvB)));

  std::map<Label, ProcBranch> pb;
  pb.emplace("hand", ProcBranch{std::optional<std::string>("x"),
                                pSelect(chanVar("x"), "r", "go", std::nullopt,
                                        etFinite(rat(1)), pNil())});
  auto take = pBranch(chanEp("s", "q"), "p", pb, etFinite(rat(1)));
  auto ok = typecheck(closedJudgment(take, env));
  CAPTURE(ok.errors);
  CHECK(ok.ok);

  // Waiting 5 before using the delegated endpoint exceeds its deadline at
  // some admissible handover valuations, so the judgment must fail.
  std::map<Label, ProcBranch> lazy;
  lazy.emplace("hand", ProcBranch{std::optional<std::string>("x"),
                                  pDelayExact(rat(5),
                                              pSelect(chanVar("x"), "r", "go",
                                                      std::nullopt, etFinite(rat(1)),
                                                      pNil()))});
  auto late = pBranch(chanEp("s", "q"), "p", lazy, etFinite(rat(1)));
  CHECK(!typecheck(closedJudgment(late, env)).ok);
}

TEST_CASE("queues type positionally against their queue types") {
  TypingEnv env;
  env.emplace(epKey("s", "Sen"),
              queueEntry({MessageType{"Sat", "Data", sortUnit()}}));
  auto q = pQueue("s", "Sen", {QueueMsg{"Sat", "Data", std::nullopt}});
  CHECK(typecheck(closedJudgment(q, env)).ok);

  auto wrong = pQueue("s", "Sen", {QueueMsg{"Ser", "Data", std::nullopt}});
  CHECK(!typecheck(closedJudgment(wrong, env)).ok);
  auto empty = pQueue("s", "Sen", {});
  CHECK(!typecheck(closedJudgment(empty, env)).ok);
}

TEST_CASE("time shifting the environment follows the time-passing function") {
  Judgment j = pipelineJudgment();
  REQUIRE(typecheck(j).ok);
  // Resolve the nondeterministic delays first; time cannot pass over them.
  std::vector<ProcPtr> items;
  for (const auto& it : j.process->items) {
    if (it->kind == Process::Kind::DelayConstraint) {
      auto sols = solutionSet(it->delayGuard, it->delayClock);
      items.push_back(pDelayExact(sols.parts[0].lo, it->cont));
    } else {
      items.push_back(it);
    }
  }
  j.process = pPar(items);
  REQUIRE(typecheck(j).ok);
  auto moved = timePass(j.process, rat(6));
  REQUIRE(moved.has_value());
  Judgment j2{{}, envShift(j.gamma, rat(6)), *moved, {}};
  auto rep = typecheck(j2);
  CAPTURE(rep.errors);
  CHECK(rep.ok);

  // An exact delay admits no partial elapse, so reaching 6.5 composes two
  // shifts (normalizing away spent delays in between); the shifted judgments
  // stay typable along the way.
  CHECK(!timePass(j.process, rat(13, 2)).has_value());
  auto moved2 = timePass(congNormalize(*moved), rat(1, 2));
  REQUIRE(moved2.has_value());
  Judgment j3{{}, envShift(j2.gamma, rat(1, 2)), *moved2, {}};
  auto rep2 = typecheck(j3);
  CAPTURE(rep2.errors);
  CHECK(rep2.ok);
}

TEST_CASE("environment shift advances variable entries while the step relation freezes them") {
  TypingEnv env;
  env.emplace(varKey("x"), sessionEntry({{"c", rat(1)}}, lEnd()));
  auto shifted = envShift(env, rat(2));
  CHECK(shifted.at(varKey("x")).nu.at("c") == rat(3));
  auto stepped = envAdvance(env, rat(2));
  CHECK(stepped.at(varKey("x")).nu.at("c") == rat(1));
}

TEST_CASE("typability survives structural normalization") {
  Judgment j = pipelineJudgment();
  REQUIRE(typecheck(j).ok);
  Judgment j2{{}, j.gamma, congNormalize(j.process), {}};
  auto rep = typecheck(j2);
  CAPTURE(rep.errors);
  CHECK(rep.ok);
}

TEST_CASE("subject reduction holds along the pipeline executions") {
  Judgment j = pipelineJudgment();
  auto rep = checkSubjectReduction(j, 6);
  CAPTURE(rep.detail);
  CHECK(rep.ok);
  CHECK(rep.checked > 0);

  auto none = checkSubjectReduction(j, 0);
  CHECK(none.ok);
  CHECK(none.checked == 0);
}

TEST_CASE("session fidelity holds after the satellite failure") {
  Judgment j;
  j.gamma = envShift(fixtures::gammaData(), rat(13, 2));
  j.process = pipelineAfterSatFailure();
  auto st = fixtures::pipelineState();
  j.witnesses.emplace("s", TimedGlobalState{atmp::advance(st.nu, rat(13, 2)), st.g});
  auto rep = checkSessionFidelity(j);
  CAPTURE(rep.detail);
  CHECK(rep.ok);
  CHECK(rep.checked > 0);
}

TEST_CASE("the restricted ensemble is deadlock-free") {
  auto p = pRestrict("s", fixtures::remoteDataEnsemble(), pipelineAnnotation());
  Judgment j = closedJudgment(p, {});
  auto rep = checkDeadlockFreedom(j, 14);
  CAPTURE(rep.detail);
  CHECK(rep.ok);
  CHECK(rep.checked > 0);
}

TEST_CASE("a finished restricted ensemble is trivially deadlock-free") {
  TypingEnv done;
  done.emplace(epKey("s", "Sen"), combinedEntry({}, lEnd(), {}));
  done.emplace(epKey("s", "Sat"), combinedEntry({}, lEnd(), {}));
  done.emplace(epKey("s", "Ser"), combinedEntry({}, lEnd(), {}));
  SessionAnnotation ann{{}, gEnd(), done};
  auto p = pRestrict("s",
                     pPar({pNil(), pQueue("s", "Sen", {}), pQueue("s", "Sat", {}),
                           pQueue("s", "Ser", {})}),
                     ann);
  Judgment j = closedJudgment(p, {});
  auto df = checkDeadlockFreedom(j, 4);
  CAPTURE(df.detail);
  CHECK(df.ok);
  auto sf = checkSessionFidelity(j);
  CAPTURE(sf.detail);
  CHECK(sf.ok);
}

TEST_CASE("the ensemble shape preconditions are enforced") {
  SUBCASE("two sessions in the environment") {
    Judgment j = pipelineJudgment();
    auto extra = fixtures::gammaData("t");
    for (const auto& [k, e] : extra) j.gamma.emplace(k, e);
    CHECK_THROWS_AS((void)checkSessionFidelity(j), PreconditionViolation);
  }
  SUBCASE("an item that plays two roles") {
    Judgment j = pipelineJudgment();
    std::vector<ProcPtr> items = j.process->items;
    items[0] = pSelect(chanEp("s", "Sen"), "Sat", "Data", std::nullopt, etFinite(rat(1)),
                       pSelect(chanEp("s", "Sat"), "Ser", "Data", std::nullopt,
                               etFinite(rat(1)), pNil()));
    j.process = pPar(items);
    CHECK_THROWS_AS((void)checkSessionFidelity(j), PreconditionViolation);
  }
  SUBCASE("a free channel variable") {
    Judgment j = pipelineJudgment();
    std::vector<ProcPtr> items = j.process->items;
    items[0] = pSelect(chanVar("x"), "Sat", "Data", std::nullopt, etFinite(rat(1)),
                       pNil());
    j.process = pPar(items);
    CHECK_THROWS_AS((void)checkDeadlockFreedom(j, 2), PreconditionViolation);
  }
  SUBCASE("an unguarded recursive call") {
    LocalBranches sb;
    sb.emplace("Data", LocalBranch{sortUnit(), ctTrue(), {}, lEnd()});
    LocalPtr live = lRec("T", lIntChoice("Sat", sb));
    Judgment j = pipelineJudgment();
    std::vector<ProcPtr> items = j.process->items;
    items[0] = pDef("X", {"x"}, pCall("X", {chanVar("x")}),
                    pCall("X", {chanEp("s", "Sen")}), {{{}, live}});
    j.process = pPar(items);
    CHECK_THROWS_AS((void)checkSessionFidelity(j), PreconditionViolation);
  }
}
