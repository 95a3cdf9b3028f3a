#pragma once

#include "atmp/calculus.hpp"
#include "atmp/semantics.hpp"
#include "atmp/types.hpp"

namespace atmp::fixtures {

// Two-hop sensor pipeline: Sen sends Data to Sat in window [6,7] on C_Sen
// (resetting it), then Sat forwards Data to Ser in window [6,7] on C_Sat
// (resetting it), with Ser reading in [6,7] on C_Ser.
inline GlobalPtr dataPipeline() {
  TimeAssertion hop2{ctBetween("C_Sat", Rat(6), true, Rat(7), true), {"C_Sat"},
                     ctBetween("C_Ser", Rat(6), true, Rat(7), true), {"C_Ser"}};
  GlobalBranches second;
  second.emplace("Data", GlobalBranch{sortUnit(), hop2, gEnd()});
  TimeAssertion hop1{ctBetween("C_Sen", Rat(6), true, Rat(7), true), {"C_Sen"},
                     ctBetween("C_Sat", Rat(6), true, Rat(7), true), {}};
  GlobalBranches first;
  first.emplace("Data", GlobalBranch{sortUnit(), hop1, gComm("Sat", "Ser", second)});
  return gComm("Sen", "Sat", first);
}

inline LocalPtr dataPipelineSen() {
  LocalBranches b;
  b.emplace("Data", LocalBranch{sortUnit(), ctBetween("C_Sen", Rat(6), true, Rat(7), true),
                                {"C_Sen"}, lEnd()});
  return lIntChoice("Sat", b);
}

inline LocalPtr dataPipelineSat() {
  LocalBranches send;
  send.emplace("Data", LocalBranch{sortUnit(), ctBetween("C_Sat", Rat(6), true, Rat(7), true),
                                   {"C_Sat"}, lEnd()});
  LocalBranches recv;
  recv.emplace("Data", LocalBranch{sortUnit(), ctBetween("C_Sat", Rat(6), true, Rat(7), true),
                                   {}, lIntChoice("Ser", send)});
  return lExtChoice("Sen", recv);
}

inline LocalPtr dataPipelineSer() {
  LocalBranches b;
  b.emplace("Data", LocalBranch{sortUnit(), ctBetween("C_Ser", Rat(6), true, Rat(7), true),
                                {"C_Ser"}, lEnd()});
  return lExtChoice("Sat", b);
}

// Entry types of the pipeline environment. Sat and Ser accept strictly more
// input branches than the projections demand, so the entries sit above the
// projections in the subtype order.
inline LocalPtr gammaDataSat() {
  LocalBranches okSend;
  okSend.emplace("Data", LocalBranch{sortUnit(),
                                     ctBetween("C_Sat", Rat(6), true, Rat(7), true),
                                     {"C_Sat"}, lEnd()});
  LocalBranches failSend;
  failSend.emplace("fatal", LocalBranch{sortUnit(),
                                        ctBetween("C_Sat", Rat(6), true, Rat(7), true),
                                        {"C_Sat"}, lEnd()});
  LocalBranches recv;
  recv.emplace("Data", LocalBranch{sortUnit(),
                                   ctBetween("C_Sat", Rat(6), true, Rat(7), true), {},
                                   lIntChoice("Ser", okSend)});
  recv.emplace("fail", LocalBranch{sortUnit(),
                                   ctBetween("C_Sat", Rat(6), true, Rat(7), true), {},
                                   lIntChoice("Ser", failSend)});
  return lExtChoice("Sen", recv);
}

inline LocalPtr gammaDataSer() {
  LocalBranches b;
  b.emplace("Data", LocalBranch{sortUnit(), ctBetween("C_Ser", Rat(6), true, Rat(7), true),
                                {"C_Ser"}, lEnd()});
  b.emplace("fatal", LocalBranch{sortUnit(), ctBetween("C_Ser", Rat(6), true, Rat(7), true),
                                 {"C_Ser"}, lEnd()});
  return lExtChoice("Sat", b);
}

// Communication fixture with a selection branch whose window has already
// closed while another is still open: the global type can fire the second
// label, but an environment whose sender entry only retains the first one
// cannot match it.
inline GlobalPtr staleChoice() {
  GlobalBranches b;
  b.emplace("done", GlobalBranch{sortUnit(),
                                 TimeAssertion{ctBetween("C_p", Rat(0), true, Rat(1), true),
                                               {},
                                               ctBetween("C_q", Rat(1), true, Rat(2), true),
                                               {}},
                                 gEnd()});
  b.emplace("more", GlobalBranch{sortUnit(),
                                 TimeAssertion{ctBetween("C_p", Rat(2), true, Rat(4), true),
                                               {},
                                               ctBetween("C_q", Rat(5), true, Rat(6), true),
                                               {}},
                                 gEnd()});
  return gComm("p", "q", b);
}

inline LocalPtr staleChoiceSenderEntry() {
  LocalBranches b;
  b.emplace("done", LocalBranch{sortUnit(), ctBetween("C_p", Rat(0), true, Rat(1), true),
                                {}, lEnd()});
  return lIntChoice("q", b);
}

inline LocalPtr staleChoiceReceiverEntry() {
  LocalBranches b;
  b.emplace("done", LocalBranch{sortUnit(), ctBetween("C_q", Rat(1), true, Rat(2), true),
                                {}, lEnd()});
  b.emplace("more", LocalBranch{sortUnit(), ctBetween("C_q", Rat(5), true, Rat(6), true),
                                {}, lEnd()});
  return lExtChoice("p", b);
}

inline TimedGlobalState pipelineState() {
  return TimedGlobalState{initialValuation(dataPipeline()), dataPipeline()};
}

inline TypingEnv gammaData(const std::string& session = "s") {
  TypingEnv env;
  env.emplace(epKey(session, "Sen"),
              combinedEntry({{"C_Sen", Rat(0)}}, dataPipelineSen(), {}));
  env.emplace(epKey(session, "Sat"),
              combinedEntry({{"C_Sat", Rat(0)}}, gammaDataSat(), {}));
  env.emplace(epKey(session, "Ser"),
              combinedEntry({{"C_Ser", Rat(0)}}, gammaDataSer(), {}));
  return env;
}

inline TimedGlobalState staleChoiceState() {
  return TimedGlobalState{{{"C_p", Rat(3)}, {"C_q", Rat(3)}}, staleChoice()};
}

// Process ensemble for the sensor pipeline on session s. Sen wakes at 6.5 and
// tries to send Data for 0.3, aborting the session on timeout; Sat listens
// only during [6, 6.2], so it always misses the message and fails; Ser listens
// during [6, 6.8]. Every run ends with the session cancelled.
inline ProcPtr remoteDataEnsemble() {
  auto sen = pDelayConstraint(
      ctEq("c1", Rat(13) / 2), "c1",
      pTry(pSelect(chanEp("s", "Sen"), "Sat", "Data", std::nullopt,
                   etFinite(Rat(3) / 10), pNil()),
           pCancel(chanEp("s", "Sen"), pNil())));
  std::map<Label, ProcBranch> satBranches;
  satBranches.emplace("Data",
                      ProcBranch{std::nullopt,
                                 pSelect(chanEp("s", "Sat"), "Ser", "Data", std::nullopt,
                                         etFinite(Rat(3) / 10), pNil())});
  satBranches.emplace("fail",
                      ProcBranch{std::nullopt,
                                 pSelect(chanEp("s", "Sat"), "Ser", "fatal", std::nullopt,
                                         etFinite(Rat(2) / 5), pNil())});
  auto sat = pDelayConstraint(
      ctEq("c2", Rat(6)), "c2",
      pBranch(chanEp("s", "Sat"), "Sen", std::move(satBranches), etFinite(Rat(1) / 5)));
  std::map<Label, ProcBranch> serBranches;
  serBranches.emplace("Data", ProcBranch{std::nullopt, pNil()});
  serBranches.emplace("fatal", ProcBranch{std::nullopt, pNil()});
  auto ser = pDelayConstraint(
      ctEq("c3", Rat(6)), "c3",
      pBranch(chanEp("s", "Ser"), "Sat", std::move(serBranches), etFinite(Rat(4) / 5)));
  return pPar({sen, pQueue("s", "Sen", {}), sat, pQueue("s", "Sat", {}), ser,
               pQueue("s", "Ser", {})});
}

inline TypingEnv staleChoiceEnv(const std::string& session = "s") {
  TypingEnv env;
  env.emplace(epKey(session, "p"),
              combinedEntry({{"C_p", Rat(3)}}, staleChoiceSenderEntry(), {}));
  env.emplace(epKey(session, "q"),
              combinedEntry({{"C_q", Rat(3)}}, staleChoiceReceiverEntry(), {}));
  return env;
}

}  // namespace atmp::fixtures
