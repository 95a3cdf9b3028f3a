#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "atmp/calculus.hpp"
#include "atmp/types.hpp"

namespace atmp {

struct ParseError : std::runtime_error {
  int line = 0;
  int column = 0;
  ParseError(const std::string& msg, int line, int column);
};

struct ScopeError : std::runtime_error {
  int line = 0;
  int column = 0;
  ScopeError(const std::string& msg, int line, int column);
};

// One `within` window; hi is absent for an unbounded (inf) upper side.
struct TimeWindow {
  Rat lo;
  bool loClosed = true;
  std::optional<Rat> hi;
  bool hiClosed = true;
};

struct MessageStmt {
  Label label;
  std::vector<std::string> payload;
  Role from;
  Role to;
  TimeWindow window;
  std::string clock;
  std::vector<std::string> resets;
};

struct ProtocolStmt;
using StmtPtr = std::shared_ptr<const ProtocolStmt>;
using StmtSeq = std::vector<StmtPtr>;

struct ProtocolStmt {
  enum class Kind { Message, Rec, Continue, Choice };
  Kind kind = Kind::Message;
  MessageStmt msg;                 // Message
  std::string name;                // Rec / Continue label
  StmtSeq body;                    // Rec
  Role at;                         // Choice decider
  std::vector<StmtSeq> branches;   // Choice
  int line = 0;
  int column = 0;
};

struct ProtocolFile {
  std::string name;
  std::vector<Role> roles;
  StmtSeq body;
};

ProtocolFile parseProtocol(const std::string& text);
std::string printProtocol(const ProtocolFile& pf);
bool protocolEq(const ProtocolFile& a, const ProtocolFile& b);

// Clock letters resolve to per-role instances named letter@role: the window
// constrains letter@sender on the output side and letter@receiver on the
// input side, and resetting the line's own letter clears both instances.
GlobalPtr toGlobal(const ProtocolFile& pf);

struct ProtocolReport {
  bool ok = true;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
};
ProtocolReport checkProtocol(const ProtocolFile& pf);

// File basename -> content. Per-role `<role>.type.json` and `<role>.cta.json`
// plus a combined `protocol.dot`; restricted to one role when given.
std::map<std::string, std::string> emitArtifacts(const ProtocolFile& pf,
                                                 const std::optional<Role>& role = {});

Json procToJson(const ProcPtr& p);
ProcPtr procFromJson(const Json& j);

int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace atmp
