#include "doctest.h"

#include "atmp/semantics.hpp"
#include "fixtures.hpp"

using namespace atmp;

namespace {

bool hasFailure(const AssociationReport& r, const std::string& item) {
  for (const auto& f : r.failures) {
    if (f.rfind(item + ":", 0) == 0) return true;
  }
  return false;
}

TypingEnv withEntryType(TypingEnv env, const EnvKey& k, const LocalPtr& t) {
  env.at(k).type = t;
  return env;
}

std::vector<EnvStep> instant(const TypingEnv& env) { return envSteps(env, {}); }

}  // namespace

TEST_CASE("pipeline environment is associated with the initial state") {
  auto st = fixtures::pipelineState();
  auto env = fixtures::gammaData();
  auto rep = associated(st, env, "s");
  CHECK(rep.ok);
  CHECK(rep.failures.empty());
}

TEST_CASE("association mutations name the violated condition") {
  auto st = fixtures::pipelineState();
  auto base = fixtures::gammaData();
  auto satKey = epKey("s", "Sat");
  auto senKey = epKey("s", "Sen");

  SUBCASE("dropping the branch the projection requires") {
    LocalBranches failOnly;
    LocalBranches failSend;
    failSend.emplace("fatal",
                     LocalBranch{sortUnit(), ctBetween("C_Sat", Rat(6), true, Rat(7), true),
                                 {"C_Sat"}, lEnd()});
    failOnly.emplace("fail",
                     LocalBranch{sortUnit(), ctBetween("C_Sat", Rat(6), true, Rat(7), true),
                                 {}, lIntChoice("Ser", failSend)});
    auto env = withEntryType(base, satKey, lExtChoice("Sen", failOnly));
    auto rep = associated(st, env, "s");
    CHECK_FALSE(rep.ok);
    CHECK(hasFailure(rep, "projection-subtype"));
  }

  SUBCASE("dropping only the extra branch keeps the association") {
    auto env = withEntryType(base, satKey, fixtures::dataPipelineSat());
    CHECK(associated(st, env, "s").ok);
  }

  SUBCASE("changing a reset breaks the projection subtyping") {
    LocalBranches b;
    b.emplace("Data", LocalBranch{sortUnit(), ctBetween("C_Sen", Rat(6), true, Rat(7), true),
                                  {}, lEnd()});
    auto env = withEntryType(base, senKey, lIntChoice("Sat", b));
    auto rep = associated(st, env, "s");
    CHECK_FALSE(rep.ok);
    CHECK(hasFailure(rep, "projection-subtype"));
  }

  SUBCASE("wrong clock slice breaks the valuation union") {
    auto env = base;
    env.at(senKey).nu["C_Sen"] = Rat(1);
    auto rep = associated(st, env, "s");
    CHECK_FALSE(rep.ok);
    CHECK(hasFailure(rep, "valuation-union"));
  }

  SUBCASE("missing endpoint breaks domain coverage") {
    auto env = base;
    env.erase(epKey("s", "Ser"));
    auto rep = associated(st, env, "s");
    CHECK_FALSE(rep.ok);
    CHECK(hasFailure(rep, "domain-coverage"));
  }

  SUBCASE("session-only entry breaks the entry shape") {
    auto env = base;
    env.at(senKey) = sessionEntry(env.at(senKey).nu, env.at(senKey).type);
    auto rep = associated(st, env, "s");
    CHECK_FALSE(rep.ok);
    CHECK(hasFailure(rep, "entry-shape"));
  }

  SUBCASE("stray queued message toward an unstarted exchange") {
    auto env = base;
    env.at(senKey).queue.push_back(MessageType{"Sat", "Data", sortUnit()});
    auto rep = associated(st, env, "s");
    CHECK_FALSE(rep.ok);
    CHECK(hasFailure(rep, "queue-live-transmission"));
  }

  SUBCASE("process variable entries are rejected") {
    auto env = base;
    env.emplace(varKey("X"), sessionEntry({}, lEnd()));
    auto rep = associated(st, env, "s");
    CHECK_FALSE(rep.ok);
    CHECK(hasFailure(rep, "entry-shape"));
  }
}

TEST_CASE("canonical environment is associated and tight") {
  auto st = fixtures::pipelineState();
  auto env = canonicalEnv(st, "s");
  CHECK(env.size() == 3);
  CHECK(associated(st, env, "s").ok);
  CHECK(ltEq(env.at(epKey("s", "Sen")).type, fixtures::dataPipelineSen()));
  CHECK(ltEq(env.at(epKey("s", "Sat")).type, fixtures::dataPipelineSat()));
  CHECK(ltEq(env.at(epKey("s", "Ser")).type, fixtures::dataPipelineSer()));
  CHECK(envSubtype(env, fixtures::gammaData()));
}

TEST_CASE("global steps of the pipeline") {
  auto st = fixtures::pipelineState();

  SUBCASE("no instant step before the window opens") {
    CHECK(gtSteps(st, "s", {}).empty());
  }

  SUBCASE("time steps follow the grid") {
    auto grid = autoGrid(st, fixtures::gammaData());
    std::vector<Rat> expect{Rat(6), Rat(13) / 2, Rat(7)};
    CHECK(grid == expect);
    auto steps = gtSteps(st, "s", grid);
    CHECK(steps.size() == 3);
    for (const auto& gs : steps) {
      CHECK(gs.action.kind == ActionLabel::Kind::Time);
      CHECK(gs.next.nu.at("C_Sen") == gs.action.time);
      CHECK(gtEq(gs.next.g, st.g));
    }
  }

  SUBCASE("the full exchange fires inside the window") {
    TimedGlobalState cur{atmp::advance(st.nu, Rat(13) / 2), st.g};
    auto s1 = gtSteps(cur, "s", {});
    REQUIRE(s1.size() == 1);
    CHECK(printAction(s1[0].action) == "s:Sen!Sat:Data");
    CHECK(s1[0].next.g->kind == GlobalType::Kind::CommEnRoute);
    CHECK(s1[0].next.nu.at("C_Sen") == 0);
    CHECK(s1[0].next.nu.at("C_Sat") == Rat(13) / 2);

    auto s2 = gtSteps(s1[0].next, "s", {});
    REQUIRE(s2.size() == 1);
    CHECK(printAction(s2[0].action) == "s:Sat?Sen:Data");
    CHECK(s2[0].next.g->kind == GlobalType::Kind::Comm);

    auto s3 = gtSteps(s2[0].next, "s", {});
    REQUIRE(s3.size() == 1);
    CHECK(printAction(s3[0].action) == "s:Sat!Ser:Data");
    CHECK(s3[0].next.nu.at("C_Sat") == 0);

    auto s4 = gtSteps(s3[0].next, "s", {});
    REQUIRE(s4.size() == 1);
    CHECK(printAction(s4[0].action) == "s:Ser?Sat:Data");
    CHECK(s4[0].next.g->kind == GlobalType::Kind::End);
    CHECK(s4[0].next.nu.at("C_Ser") == 0);
  }
}

TEST_CASE("independent exchanges commute under a pending choice") {
  GlobalBranches innerB;
  innerB.emplace("go", GlobalBranch{sortUnit(), TimeAssertion{}, gEnd()});
  GlobalPtr inner = gComm("r", "u", innerB);

  SUBCASE("identical continuations step around the choice") {
    GlobalBranches outer;
    outer.emplace("a", GlobalBranch{sortUnit(), TimeAssertion{}, inner});
    outer.emplace("b", GlobalBranch{sortUnit(), TimeAssertion{}, inner});
    TimedGlobalState st{{}, gComm("p", "q", outer)};
    auto steps = gtSteps(st, "s", {});
    std::set<std::string> labels;
    for (const auto& gs : steps) labels.insert(printAction(gs.action));
    CHECK(labels == std::set<std::string>{"s:p!q:a", "s:p!q:b", "s:r!u:go"});
    for (const auto& gs : steps) {
      if (printAction(gs.action) != "s:r!u:go") continue;
      CHECK(gs.next.g->kind == GlobalType::Kind::Comm);
      for (const auto& [l, b] : gs.next.g->branches) {
        CHECK(b.cont->kind == GlobalType::Kind::CommEnRoute);
      }
    }
  }

  SUBCASE("diverging continuations block the context step") {
    GlobalBranches innerStop;
    innerStop.emplace("stop", GlobalBranch{sortUnit(), TimeAssertion{}, gEnd()});
    GlobalBranches outer;
    outer.emplace("a", GlobalBranch{sortUnit(), TimeAssertion{}, inner});
    outer.emplace("b", GlobalBranch{sortUnit(), TimeAssertion{}, gComm("r", "u", innerStop)});
    TimedGlobalState st{{}, gComm("p", "q", outer)};
    auto steps = gtSteps(st, "s", {});
    std::set<std::string> labels;
    for (const auto& gs : steps) labels.insert(printAction(gs.action));
    CHECK(labels == std::set<std::string>{"s:p!q:a", "s:p!q:b"});
  }

  SUBCASE("an in-flight message lets its sender continue") {
    GlobalBranches innerFromP;
    innerFromP.emplace("go", GlobalBranch{sortUnit(), TimeAssertion{}, gEnd()});
    GlobalBranches outer;
    outer.emplace("a", GlobalBranch{sortUnit(), TimeAssertion{}, gComm("p", "r", innerFromP)});
    TimedGlobalState st{{}, gEnRoute("p", "q", "a", outer)};
    auto steps = gtSteps(st, "s", {});
    std::set<std::string> labels;
    for (const auto& gs : steps) labels.insert(printAction(gs.action));
    CHECK(labels == std::set<std::string>{"s:q?p:a", "s:p!r:go"});
  }
}

TEST_CASE("environment steps mirror the pipeline") {
  auto env0 = fixtures::gammaData();
  CHECK(instant(env0).empty());

  auto env = envAdvance(env0, Rat(13) / 2);
  auto s1 = instant(env);
  REQUIRE(s1.size() == 1);
  CHECK(printAction(s1[0].action) == "s:Sen!Sat:Data");
  const auto& sen = s1[0].next.at(epKey("s", "Sen"));
  CHECK(sen.nu.at("C_Sen") == 0);
  CHECK(sen.type->kind == LocalType::Kind::End);
  REQUIRE(sen.queue.size() == 1);
  CHECK(sen.queue[0].receiver == "Sat");
  CHECK(sen.queue[0].label == "Data");

  auto s2 = instant(s1[0].next);
  REQUIRE(s2.size() == 1);
  CHECK(printAction(s2[0].action) == "s:Sat?Sen:Data");
  CHECK(s2[0].next.at(epKey("s", "Sen")).queue.empty());
  CHECK(s2[0].next.at(epKey("s", "Sat")).nu.at("C_Sat") == Rat(13) / 2);

  auto s3 = instant(s2[0].next);
  REQUIRE(s3.size() == 1);
  CHECK(printAction(s3[0].action) == "s:Sat!Ser:Data");
  CHECK(s3[0].next.at(epKey("s", "Sat")).nu.at("C_Sat") == 0);

  auto s4 = instant(s3[0].next);
  REQUIRE(s4.size() == 1);
  CHECK(printAction(s4[0].action) == "s:Ser?Sat:Data");
  auto fin = s4[0].next;
  for (const auto& [k, e] : fin) {
    CHECK(e.type->kind == LocalType::Kind::End);
    CHECK(e.queue.empty());
  }

  TimedGlobalState terminal{{{"C_Sen", Rat(0)}, {"C_Sat", Rat(0)}, {"C_Ser", Rat(0)}},
                            gEnd()};
  CHECK(associated(terminal, fin, "s").ok);
}

TEST_CASE("time passing freezes queues and variables") {
  TypingEnv env;
  env.emplace(epKey("s", "p"),
              combinedEntry({{"x", Rat(1)}}, lEnd(), {MessageType{"q", "m", sortUnit()}}));
  env.emplace(varKey("X"), sessionEntry({{"y", Rat(2)}}, lEnd()));
  auto adv = envAdvance(env, Rat(3));
  CHECK(adv.at(epKey("s", "p")).nu.at("x") == Rat(4));
  CHECK(adv.at(epKey("s", "p")).queue.size() == 1);
  CHECK(adv.at(varKey("X")).nu.at("y") == Rat(2));
}

TEST_CASE("stale selection branch splits the matching directions") {
  auto st = fixtures::staleChoiceState();
  auto env = fixtures::staleChoiceEnv();
  REQUIRE(associated(st, env, "s").ok);
  auto grid = autoGrid(st, env);

  auto globalNow = gtSteps(st, "s", {});
  REQUIRE(globalNow.size() == 1);
  CHECK(printAction(globalNow[0].action) == "s:p!q:more");
  CHECK(instant(env).empty());

  auto strict = checkPerLabelSoundness(st, env, "s", 2, grid);
  CHECK_FALSE(strict.ok);
  REQUIRE_FALSE(strict.counterexample.empty());
  CHECK(strict.counterexample.back() == "s:p!q:more");

  CHECK(checkSoundness(st, env, "s", 2, grid).ok);
  CHECK(checkCompleteness(st, env, "s", 2, grid).ok);
}

TEST_CASE("pipeline satisfies both matching directions") {
  auto st = fixtures::pipelineState();
  auto grid = autoGrid(st, fixtures::gammaData());

  SUBCASE("against the declared environment") {
    auto env = fixtures::gammaData();
    auto comp = checkCompleteness(st, env, "s", 5, grid);
    CHECK(comp.ok);
    CHECK(comp.visited > 1);
    CHECK(checkSoundness(st, env, "s", 5, grid).ok);
  }

  SUBCASE("against the canonical environment") {
    auto env = canonicalEnv(st, "s");
    CHECK(checkCompleteness(st, env, "s", 5, grid).ok);
    CHECK(checkSoundness(st, env, "s", 5, grid).ok);
    CHECK(checkPerLabelSoundness(st, env, "s", 5, grid).ok);
  }

  SUBCASE("a broken root is reported up front") {
    auto env = fixtures::gammaData();
    env.erase(epKey("s", "Ser"));
    auto comp = checkCompleteness(st, env, "s", 3, grid);
    CHECK_FALSE(comp.ok);
    CHECK(comp.detail.find("root is not associated") == 0);
  }
}

TEST_CASE("environment steps are deterministic per label and frame-preserving") {
  auto st = fixtures::pipelineState();
  auto env0 = fixtures::gammaData();
  auto grid = autoGrid(st, env0);

  std::deque<TypingEnv> frontier{env0};
  std::set<std::string> visited{envHash(env0)};
  size_t checked = 0;
  while (!frontier.empty() && checked < 200) {
    TypingEnv env = frontier.front();
    frontier.pop_front();
    auto steps = envSteps(env, grid);
    for (size_t i = 0; i < steps.size(); ++i) {
      ++checked;
      CHECK(steps[i].next.size() == env.size());
      for (const auto& [k, e] : env) CHECK(steps[i].next.count(k) == 1);

      for (size_t j = i + 1; j < steps.size(); ++j) {
        if (actionEq(steps[i].action, steps[j].action)) {
          CHECK(envCongruent(steps[i].next, steps[j].next));
        }
      }

      if (steps[i].action.kind == ActionLabel::Kind::Send) {
        for (const auto& [k, e] : env) {
          if (k.isVar || k.role == steps[i].action.from) continue;
          CHECK(entryEq(steps[i].next.at(k), e));
        }
      } else if (steps[i].action.kind == ActionLabel::Kind::Recv) {
        for (const auto& [k, e] : env) {
          if (k.isVar || k.role == steps[i].action.from || k.role == steps[i].action.to) {
            continue;
          }
          CHECK(entryEq(steps[i].next.at(k), e));
        }
      }

      std::string h = envHash(steps[i].next);
      if (!visited.count(h)) {
        visited.insert(h);
        frontier.push_back(steps[i].next);
      }
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("composition fuses session and queue parts") {
  TypingEnv a;
  a.emplace(epKey("s", "p"), sessionEntry({{"x", Rat(0)}}, lEnd()));
  TypingEnv b;
  b.emplace(epKey("s", "p"), queueEntry({MessageType{"q", "m", sortUnit()}}));
  auto c = compose(a, b);
  CHECK(c.at(epKey("s", "p")).hasSession);
  CHECK(c.at(epKey("s", "p")).hasQueue);
  CHECK(c.at(epKey("s", "p")).queue.size() == 1);
  CHECK(entryEq(compose(b, a).at(epKey("s", "p")), c.at(epKey("s", "p"))));
  CHECK_THROWS_AS(compose(a, a), CompositionError);
  CHECK_THROWS_AS(compose(c, b), CompositionError);
}

TEST_CASE("association commutes with letting time pass") {
  auto st = fixtures::pipelineState();
  auto env = fixtures::gammaData();
  for (const Rat& t : {Rat(1), Rat(6), Rat(13) / 2}) {
    TimedGlobalState adv{atmp::advance(st.nu, t), st.g};
    CHECK(associated(adv, envAdvance(env, t), "s").ok);
  }
}

TEST_CASE("environment serialization round-trips") {
  auto env = fixtures::gammaData();
  env.at(epKey("s", "Sen")).queue.push_back(MessageType{"Sat", "Data", sortUnit()});
  env.emplace(varKey("X"), sessionEntry({{"y", Rat(2)}}, lEnd()));
  CHECK(envEq(envFromJson(envToJson(env)), env));

  auto st = fixtures::staleChoiceState();
  auto back = stateFromJson(stateToJson(st));
  CHECK(stateEq(back, st));
  CHECK(stateHash(back) == stateHash(st));
}

TEST_CASE("grid sampling tracks the distance to each guard window") {
  auto st = fixtures::pipelineState();
  std::vector<Rat> expect{Rat(6), Rat(13) / 2, Rat(7)};
  CHECK(timeGridForState(st, Rat(8)) == expect);

  TimedGlobalState mid{atmp::advance(st.nu, Rat(13) / 2), st.g};
  std::vector<Rat> expectMid{Rat(1) / 4, Rat(1) / 2};
  CHECK(timeGridForState(mid, Rat(8)) == expectMid);

  CHECK(timeGridForEnv(fixtures::gammaData(), Rat(8)) == expect);
}

TEST_CASE("untimed erasure keeps the structure and drops the timing") {
  auto env = untimedErase(fixtures::gammaData());
  for (const auto& [k, e] : env) CHECK(e.nu.empty());
  auto sat = env.at(epKey("s", "Sat")).type;
  REQUIRE(sat->kind == LocalType::Kind::ExtChoice);
  CHECK(sat->branches.size() == 2);
  for (const auto& [l, b] : sat->branches) {
    CHECK(constraintEq(b.guard, ctTrue()));
    CHECK(b.reset.empty());
  }
}

TEST_CASE("untimed safety analysis") {
  SUBCASE("the erased pipeline is safe") {
    auto rep = checkSafety(untimedErase(fixtures::gammaData()), 8);
    CHECK(rep.ok);
    CHECK(rep.visited >= 5);
  }

  SUBCASE("a queued label with no matching branch is unsafe") {
    LocalBranches b;
    b.emplace("done", LocalBranch{sortUnit(), ctTrue(), {}, lEnd()});
    TypingEnv env;
    env.emplace(epKey("s", "a"),
                combinedEntry({}, lEnd(), {MessageType{"b", "oops", sortUnit()}}));
    env.emplace(epKey("s", "b"), combinedEntry({}, lExtChoice("a", b), {}));
    auto rep = checkSafety(env, 4);
    CHECK_FALSE(rep.ok);
    CHECK(rep.detail.find("no matching branch") != std::string::npos);
  }

  SUBCASE("a queued payload above the expected sort is unsafe") {
    LocalBranches b;
    b.emplace("m", LocalBranch{sortBase("bool"), ctTrue(), {}, lEnd()});
    TypingEnv env;
    env.emplace(epKey("s", "a"),
                combinedEntry({}, lEnd(), {MessageType{"b", "m", sortBase("int")}}));
    env.emplace(epKey("s", "b"), combinedEntry({}, lExtChoice("a", b), {}));
    auto rep = checkSafety(env, 4);
    CHECK_FALSE(rep.ok);
    CHECK(rep.detail.find("not a subtype") != std::string::npos);
  }

  SUBCASE("a violation behind one reduction is found by the search") {
    LocalBranches send;
    send.emplace("oops", LocalBranch{sortUnit(), ctTrue(), {}, lEnd()});
    LocalBranches recv;
    recv.emplace("done", LocalBranch{sortUnit(), ctTrue(), {}, lEnd()});
    TypingEnv env;
    env.emplace(epKey("s", "a"), combinedEntry({}, lIntChoice("b", send), {}));
    env.emplace(epKey("s", "b"), combinedEntry({}, lExtChoice("a", recv), {}));
    auto rep = checkSafety(env, 4);
    CHECK_FALSE(rep.ok);
    REQUIRE(rep.counterexample.size() == 1);
    CHECK(rep.counterexample[0] == "s:a!b:oops");
  }

  SUBCASE("a pending message toward an endpoint that is still sending is not flagged") {
    LocalBranches send;
    send.emplace("m", LocalBranch{sortUnit(), ctTrue(), {}, lEnd()});
    TypingEnv env;
    env.emplace(epKey("s", "a"),
                combinedEntry({}, lEnd(), {MessageType{"b", "late", sortUnit()}}));
    env.emplace(epKey("s", "b"), combinedEntry({}, lIntChoice("c", send), {}));
    auto rep = checkSafety(env, 2);
    CHECK(rep.ok);
  }
}
