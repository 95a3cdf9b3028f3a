#include "atmp/frontend.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "atmp/generators.hpp"
#include "atmp/projection.hpp"
#include "atmp/semantics.hpp"
#include "atmp/subtyping.hpp"
#include "atmp/typecheck.hpp"

namespace atmp {

ParseError::ParseError(const std::string& msg, int l, int c)
    : std::runtime_error(msg + " at " + std::to_string(l) + ":" + std::to_string(c)),
      line(l),
      column(c) {}

ScopeError::ScopeError(const std::string& msg, int l, int c)
    : std::runtime_error(msg + " at " + std::to_string(l) + ":" + std::to_string(c)),
      line(l),
      column(c) {}

namespace {

struct Tok {
  enum class Kind { Ident, Number, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  int line = 1;
  int col = 1;
};

std::vector<Tok> lex(const std::string& text) {
  std::vector<Tok> out;
  int line = 1;
  int col = 1;
  size_t i = 0;
  while (i < text.size()) {
    char ch = text[i];
    if (ch == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (ch == ' ' || ch == '\t' || ch == '\r') {
      ++col;
      ++i;
      continue;
    }
    if (ch == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    int l = line;
    int c = col;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) ||
                                 text[j] == '_' || text[j] == '\'')) {
        ++j;
      }
      out.push_back({Tok::Kind::Ident, text.substr(i, j - i), l, c});
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      size_t j = i;
      while (j < text.size()) {
        char d = text[j];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          ++j;
          continue;
        }
        bool digitNext = j + 1 < text.size() &&
                         std::isdigit(static_cast<unsigned char>(text[j + 1]));
        if ((d == '.' || d == '/') && digitNext) {
          j += 2;
          continue;
        }
        break;
      }
      out.push_back({Tok::Kind::Number, text.substr(i, j - i), l, c});
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (std::string("(){}[];,").find(ch) != std::string::npos) {
      out.push_back({Tok::Kind::Punct, std::string(1, ch), l, c});
      ++col;
      ++i;
      continue;
    }
    throw ParseError(std::string("unexpected character '") + ch + "'", l, c);
  }
  out.push_back({Tok::Kind::End, "", line, col});
  return out;
}

struct Parser {
  std::vector<Tok> toks;
  size_t pos = 0;
  std::vector<Role> roles;
  std::vector<std::string> recStack;

  const Tok& peek() const { return toks[pos]; }

  Tok eat() {
    Tok t = toks[pos];
    if (toks[pos].kind != Tok::Kind::End) ++pos;
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, peek().line, peek().col);
  }

  bool atKw(const char* kw) const {
    return peek().kind == Tok::Kind::Ident && peek().text == kw;
  }

  bool atPunct(char p) const {
    return peek().kind == Tok::Kind::Punct && peek().text[0] == p;
  }

  void expectKw(const char* kw) {
    if (!atKw(kw)) fail(std::string("expected '") + kw + "'");
    eat();
  }

  void expectPunct(char p) {
    if (!atPunct(p)) fail(std::string("expected '") + p + "'");
    eat();
  }

  Tok expectIdent(const char* what) {
    if (peek().kind != Tok::Kind::Ident) fail(std::string("expected ") + what);
    return eat();
  }

  Role expectRole(const char* what) {
    Tok t = expectIdent(what);
    if (std::find(roles.begin(), roles.end(), t.text) == roles.end()) {
      throw ScopeError("role '" + t.text + "' is not declared", t.line, t.col);
    }
    return t.text;
  }

  Rat expectTime() {
    if (peek().kind != Tok::Kind::Number) fail("expected a time bound");
    Tok t = eat();
    try {
      return parseTime(t.text);
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad time bound: ") + e.what(), t.line, t.col);
    }
  }

  TimeWindow parseWindow() {
    TimeWindow w;
    if (atPunct('[')) {
      w.loClosed = true;
    } else if (atPunct('(')) {
      w.loClosed = false;
    } else {
      fail("expected '[' or '(' to open a window");
    }
    eat();
    w.lo = expectTime();
    expectPunct(';');
    if (atKw("inf")) {
      eat();
      w.hi = std::nullopt;
    } else {
      w.hi = expectTime();
    }
    if (atPunct(']')) {
      w.hiClosed = true;
    } else if (atPunct(')')) {
      w.hiClosed = false;
    } else {
      fail("expected ']' or ')' to close a window");
    }
    eat();
    return w;
  }

  StmtPtr parseMessage() {
    auto st = std::make_shared<ProtocolStmt>();
    st->kind = ProtocolStmt::Kind::Message;
    Tok lbl = expectIdent("a message label");
    st->line = lbl.line;
    st->column = lbl.col;
    st->msg.label = lbl.text;
    expectPunct('(');
    if (!atPunct(')')) {
      st->msg.payload.push_back(expectIdent("a payload sort").text);
      if (atPunct(',')) fail("a message carries at most one payload sort");
    }
    expectPunct(')');
    expectKw("from");
    st->msg.from = expectRole("the sending role");
    expectKw("to");
    st->msg.to = expectRole("the receiving role");
    if (st->msg.from == st->msg.to) {
      throw ScopeError("a role cannot send to itself", st->line, st->column);
    }
    expectKw("within");
    st->msg.window = parseWindow();
    expectKw("using");
    st->msg.clock = expectIdent("a clock name").text;
    expectKw("and");
    expectKw("resetting");
    expectPunct('(');
    while (!atPunct(')')) {
      st->msg.resets.push_back(expectIdent("a clock name").text);
      if (atPunct(',')) {
        eat();
        continue;
      }
      break;
    }
    expectPunct(')');
    expectPunct(';');
    return st;
  }

  StmtSeq parseSeq() {
    StmtSeq seq;
    if (atPunct('}')) fail("empty protocol body");
    while (!atPunct('}')) {
      if (peek().kind == Tok::Kind::End) fail("unterminated block");
      StmtPtr st = parseStmt();
      bool isCont = st->kind == ProtocolStmt::Kind::Continue;
      seq.push_back(std::move(st));
      if (isCont && !atPunct('}')) fail("unreachable statement after continue");
    }
    return seq;
  }

  StmtPtr parseStmt() {
    if (atKw("rec")) {
      Tok kw = eat();
      auto st = std::make_shared<ProtocolStmt>();
      st->kind = ProtocolStmt::Kind::Rec;
      st->line = kw.line;
      st->column = kw.col;
      st->name = expectIdent("a recursion label").text;
      expectPunct('{');
      recStack.push_back(st->name);
      st->body = parseSeq();
      recStack.pop_back();
      expectPunct('}');
      return st;
    }
    if (atKw("continue")) {
      Tok kw = eat();
      auto st = std::make_shared<ProtocolStmt>();
      st->kind = ProtocolStmt::Kind::Continue;
      st->line = kw.line;
      st->column = kw.col;
      Tok lbl = expectIdent("a recursion label");
      st->name = lbl.text;
      if (std::find(recStack.begin(), recStack.end(), st->name) == recStack.end()) {
        throw ScopeError("continue '" + st->name + "' is not inside rec '" + st->name + "'",
                         lbl.line, lbl.col);
      }
      if (atPunct(';')) eat();
      return st;
    }
    if (atKw("choice")) {
      Tok kw = eat();
      auto st = std::make_shared<ProtocolStmt>();
      st->kind = ProtocolStmt::Kind::Choice;
      st->line = kw.line;
      st->column = kw.col;
      expectKw("at");
      st->at = expectRole("the deciding role");
      expectPunct('{');
      st->branches.push_back(parseSeq());
      expectPunct('}');
      while (atKw("or")) {
        eat();
        expectPunct('{');
        st->branches.push_back(parseSeq());
        expectPunct('}');
      }
      for (const auto& br : st->branches) {
        const ProtocolStmt& first = *br.front();
        if (first.kind != ProtocolStmt::Kind::Message) {
          throw ParseError("a choice branch must begin with a message", first.line, first.column);
        }
        if (first.msg.from != st->at) {
          throw ScopeError("a branch of 'choice at " + st->at + "' must start with a message from " +
                               st->at,
                           first.line, first.column);
        }
      }
      return st;
    }
    return parseMessage();
  }

  ProtocolFile parseFile() {
    ProtocolFile pf;
    expectKw("global");
    expectKw("protocol");
    pf.name = expectIdent("a protocol name").text;
    expectPunct('(');
    while (true) {
      expectKw("role");
      Tok r = expectIdent("a role name");
      if (std::find(roles.begin(), roles.end(), r.text) != roles.end()) {
        throw ScopeError("role '" + r.text + "' is declared twice", r.line, r.col);
      }
      roles.push_back(r.text);
      if (atPunct(',')) {
        eat();
        continue;
      }
      break;
    }
    expectPunct(')');
    pf.roles = roles;
    expectPunct('{');
    pf.body = parseSeq();
    expectPunct('}');
    if (peek().kind != Tok::Kind::End) fail("trailing input after protocol");
    return pf;
  }
};

void printWindow(std::ostream& os, const TimeWindow& w) {
  os << (w.loClosed ? '[' : '(') << printTime(w.lo) << ';';
  if (w.hi) {
    os << printTime(*w.hi);
  } else {
    os << "inf";
  }
  os << (w.hiClosed ? ']' : ')');
}

void printSeq(std::ostream& os, const StmtSeq& seq, int indent);

void printStmt(std::ostream& os, const ProtocolStmt& st, int indent) {
  std::string pad(2 * static_cast<size_t>(indent), ' ');
  switch (st.kind) {
    case ProtocolStmt::Kind::Message: {
      os << pad << st.msg.label << '(';
      for (size_t i = 0; i < st.msg.payload.size(); ++i) {
        if (i) os << ", ";
        os << st.msg.payload[i];
      }
      os << ") from " << st.msg.from << " to " << st.msg.to << " within ";
      printWindow(os, st.msg.window);
      os << " using " << st.msg.clock << " and resetting (";
      for (size_t i = 0; i < st.msg.resets.size(); ++i) {
        if (i) os << ", ";
        os << st.msg.resets[i];
      }
      os << ");\n";
      return;
    }
    case ProtocolStmt::Kind::Rec:
      os << pad << "rec " << st.name << " {\n";
      printSeq(os, st.body, indent + 1);
      os << pad << "}\n";
      return;
    case ProtocolStmt::Kind::Continue:
      os << pad << "continue " << st.name << "\n";
      return;
    case ProtocolStmt::Kind::Choice:
      os << pad << "choice at " << st.at << " {\n";
      for (size_t i = 0; i < st.branches.size(); ++i) {
        if (i) {
          os << pad << "} or {\n";
        }
        printSeq(os, st.branches[i], indent + 1);
      }
      os << pad << "}\n";
      return;
  }
}

void printSeq(std::ostream& os, const StmtSeq& seq, int indent) {
  for (const auto& st : seq) printStmt(os, *st, indent);
}

bool windowEq(const TimeWindow& a, const TimeWindow& b) {
  if (a.loClosed != b.loClosed || a.hiClosed != b.hiClosed) return false;
  if (a.lo != b.lo) return false;
  if (a.hi.has_value() != b.hi.has_value()) return false;
  return !a.hi || *a.hi == *b.hi;
}

bool stmtEq(const ProtocolStmt& a, const ProtocolStmt& b);

bool seqEq(const StmtSeq& a, const StmtSeq& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!stmtEq(*a[i], *b[i])) return false;
  }
  return true;
}

bool stmtEq(const ProtocolStmt& a, const ProtocolStmt& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ProtocolStmt::Kind::Message:
      return a.msg.label == b.msg.label && a.msg.payload == b.msg.payload &&
             a.msg.from == b.msg.from && a.msg.to == b.msg.to &&
             windowEq(a.msg.window, b.msg.window) && a.msg.clock == b.msg.clock &&
             a.msg.resets == b.msg.resets;
    case ProtocolStmt::Kind::Rec:
      return a.name == b.name && seqEq(a.body, b.body);
    case ProtocolStmt::Kind::Continue:
      return a.name == b.name;
    case ProtocolStmt::Kind::Choice:
      if (a.at != b.at || a.branches.size() != b.branches.size()) return false;
      for (size_t i = 0; i < a.branches.size(); ++i) {
        if (!seqEq(a.branches[i], b.branches[i])) return false;
      }
      return true;
  }
  return false;
}

Clock instanceOf(const std::string& letter, const Role& role) { return letter + "@" + role; }

// Collects, per clock letter, the roles acting on it (sender or receiver of a
// line that uses it), in order of first appearance.
void scanInstances(const StmtSeq& seq, std::map<std::string, std::vector<Role>>& inst) {
  auto add = [&](const std::string& letter, const Role& r) {
    auto& v = inst[letter];
    if (std::find(v.begin(), v.end(), r) == v.end()) v.push_back(r);
  };
  for (const auto& st : seq) {
    switch (st->kind) {
      case ProtocolStmt::Kind::Message:
        add(st->msg.clock, st->msg.from);
        add(st->msg.clock, st->msg.to);
        break;
      case ProtocolStmt::Kind::Rec:
        scanInstances(st->body, inst);
        break;
      case ProtocolStmt::Kind::Continue:
        break;
      case ProtocolStmt::Kind::Choice:
        for (const auto& br : st->branches) scanInstances(br, inst);
        break;
    }
  }
}

struct Converter {
  std::map<std::string, std::vector<Role>> instances;
  std::vector<std::string> flags;

  static ConstraintPtr windowGuard(const TimeWindow& w, const Clock& c) {
    return ctBetween(c, w.lo, w.loClosed, w.hi, w.hiClosed);
  }

  // The named clock resolves per role: the line's own letter names both acting
  // instances, so each side resets its own copy. A reset naming a different
  // letter is flagged and attached to whichever instance of that letter exists,
  // preferring the two acting roles.
  TimeAssertion assertionOf(const MessageStmt& m, int line) {
    TimeAssertion ta;
    Clock co = instanceOf(m.clock, m.from);
    Clock ci = instanceOf(m.clock, m.to);
    ta.outGuard = windowGuard(m.window, co);
    ta.inGuard = windowGuard(m.window, ci);
    for (const auto& r : m.resets) {
      if (r == m.clock) {
        ta.outReset.insert(co);
        ta.inReset.insert(ci);
        continue;
      }
      flags.push_back("line " + std::to_string(line) + ": resetting clock '" + r +
                      "' which is not the clock this line acts on");
      auto it = instances.find(r);
      if (it == instances.end()) {
        ta.outReset.insert(instanceOf(r, m.from));
        continue;
      }
      const auto& owners = it->second;
      if (std::find(owners.begin(), owners.end(), m.from) != owners.end()) {
        ta.outReset.insert(instanceOf(r, m.from));
      } else if (std::find(owners.begin(), owners.end(), m.to) != owners.end()) {
        ta.inReset.insert(instanceOf(r, m.to));
      } else {
        ta.outReset.insert(instanceOf(r, owners.front()));
      }
    }
    return ta;
  }

  static Sort payloadSort(const MessageStmt& m) {
    if (m.payload.empty()) return sortUnit();
    return sortBase(m.payload.front());
  }

  GlobalPtr convert(const StmtSeq& seq, size_t i, const GlobalPtr& tail) {
    if (i == seq.size()) return tail;
    const ProtocolStmt& st = *seq[i];
    switch (st.kind) {
      case ProtocolStmt::Kind::Message: {
        GlobalPtr cont = convert(seq, i + 1, tail);
        std::map<Label, GlobalBranch> br;
        br.emplace(st.msg.label,
                   GlobalBranch{payloadSort(st.msg), assertionOf(st.msg, st.line), cont});
        return gComm(st.msg.from, st.msg.to, std::move(br));
      }
      case ProtocolStmt::Kind::Rec: {
        GlobalPtr rest = convert(seq, i + 1, tail);
        return gRec(st.name, convert(st.body, 0, rest));
      }
      case ProtocolStmt::Kind::Continue:
        return gVar(st.name);
      case ProtocolStmt::Kind::Choice: {
        GlobalPtr rest = convert(seq, i + 1, tail);
        std::map<Label, GlobalBranch> br;
        Role from;
        Role to;
        bool first = true;
        for (const auto& branch : st.branches) {
          const ProtocolStmt& head = *branch.front();
          if (first) {
            from = head.msg.from;
            to = head.msg.to;
            first = false;
          } else if (head.msg.from != from || head.msg.to != to) {
            throw ScopeError("all branches of a choice must open between the same two roles",
                             head.line, head.column);
          }
          if (br.count(head.msg.label)) {
            throw ScopeError("label '" + head.msg.label + "' appears in two branches of one choice",
                             head.line, head.column);
          }
          br.emplace(head.msg.label,
                     GlobalBranch{payloadSort(head.msg), assertionOf(head.msg, head.line),
                                  convert(branch, 1, rest)});
        }
        return gComm(from, to, std::move(br));
      }
    }
    return tail;
  }
};

// One guard or reset event on one clock instance along a syntactic path.
struct PathOp {
  Clock clock;
  bool isGuard = false;
  TimeWindow w;
  bool reset = false;
  int line = 0;
};

void opsOfMessage(const MessageStmt& m, int line, std::vector<PathOp>& out) {
  std::set<Clock> resetInstances;
  bool resetsOwn = false;
  for (const auto& r : m.resets) {
    if (r == m.clock) {
      resetsOwn = true;
    } else {
      resetInstances.insert(instanceOf(r, m.from));
    }
  }
  Clock co = instanceOf(m.clock, m.from);
  Clock ci = instanceOf(m.clock, m.to);
  out.push_back({co, true, m.window, resetsOwn, line});
  out.push_back({ci, true, m.window, resetsOwn, line});
  for (const auto& c : resetInstances) out.push_back({c, false, {}, true, line});
}

struct PathWalker {
  struct Frame {
    const StmtSeq* seq;
    size_t idx;
  };

  std::map<std::string, const StmtSeq*> recBodies;
  std::vector<std::vector<PathOp>> paths;
  size_t maxPaths = 512;

  void walk(std::vector<Frame> stack, std::map<std::string, int> unrolls, std::vector<PathOp> cur) {
    if (paths.size() >= maxPaths) return;
    while (!stack.empty() && stack.back().idx == stack.back().seq->size()) stack.pop_back();
    if (stack.empty()) {
      paths.push_back(std::move(cur));
      return;
    }
    const ProtocolStmt& st = *(*stack.back().seq)[stack.back().idx];
    ++stack.back().idx;
    switch (st.kind) {
      case ProtocolStmt::Kind::Message:
        opsOfMessage(st.msg, st.line, cur);
        walk(std::move(stack), std::move(unrolls), std::move(cur));
        return;
      case ProtocolStmt::Kind::Rec:
        recBodies[st.name] = &st.body;
        unrolls[st.name] = 1;
        stack.push_back({&st.body, 0});
        walk(std::move(stack), std::move(unrolls), std::move(cur));
        return;
      case ProtocolStmt::Kind::Continue: {
        auto it = unrolls.find(st.name);
        if (it != unrolls.end() && it->second > 0) {
          --it->second;
          stack.push_back({recBodies.at(st.name), 0});
          walk(std::move(stack), std::move(unrolls), std::move(cur));
        } else {
          paths.push_back(std::move(cur));
        }
        return;
      }
      case ProtocolStmt::Kind::Choice:
        for (const auto& br : st.branches) {
          auto forkStack = stack;
          forkStack.push_back({&br, 0});
          walk(std::move(forkStack), unrolls, cur);
          if (paths.size() >= maxPaths) return;
        }
        return;
    }
  }
};

void analyzePath(const std::vector<PathOp>& path, std::set<std::string>& failures) {
  struct ClockState {
    Rat v;
    bool hasPrev = false;
    Rat prevLo;
    int prevLine = 0;
  };
  std::map<Clock, ClockState> st;
  for (const auto& op : path) {
    auto& cs = st[op.clock];
    if (op.isGuard) {
      if (cs.hasPrev && op.w.hi && cs.prevLo > *op.w.hi) {
        failures.insert("clock " + op.clock + ": lower bound " + printTime(cs.prevLo) +
                        " at line " + std::to_string(cs.prevLine) +
                        " exceeds the upper bound " + printTime(*op.w.hi) + " at line " +
                        std::to_string(op.line) + " with no reset between");
      }
      if (op.w.hi && cs.v > *op.w.hi) {
        failures.insert("clock " + op.clock + ": no monotone time assignment reaches line " +
                        std::to_string(op.line) + " (already at " + printTime(cs.v) +
                        ", window closes at " + printTime(*op.w.hi) + ")");
      }
      if (cs.v < op.w.lo) cs.v = op.w.lo;
      cs.hasPrev = true;
      cs.prevLo = op.w.lo;
      cs.prevLine = op.line;
    }
    if (op.reset) {
      cs.v = 0;
      cs.hasPrev = false;
    }
  }
}

// State numbering for the per-role automaton: one location per type state,
// recursion folded back onto the state of its body.
struct AutomatonBuilder {
  Json edges = Json::array();
  int nextId = 0;
  std::map<std::string, int> recIds;

  int walk(const LocalPtr& t) { return walkForced(t, -1); }

  int walkForced(const LocalPtr& t, int forced) {
    switch (t->kind) {
      case LocalType::Kind::End:
        return forced >= 0 ? forced : nextId++;
      case LocalType::Kind::Var:
        return recIds.at(t->var);
      case LocalType::Kind::Rec: {
        int id = forced >= 0 ? forced : nextId++;
        int saved = -1;
        bool had = recIds.count(t->var);
        if (had) saved = recIds[t->var];
        recIds[t->var] = id;
        walkForced(t->body, id);
        if (had) {
          recIds[t->var] = saved;
        } else {
          recIds.erase(t->var);
        }
        return id;
      }
      case LocalType::Kind::IntChoice:
      case LocalType::Kind::ExtChoice: {
        int id = forced >= 0 ? forced : nextId++;
        bool send = t->kind == LocalType::Kind::IntChoice;
        for (const auto& [label, br] : t->branches) {
          int target = walk(br.cont);
          Json reset = Json::array();
          for (const auto& c : br.reset) reset.push_back(c);
          edges.push_back({{"from", id},
                           {"to", target},
                           {"dir", send ? "send" : "recv"},
                           {"peer", t->partner},
                           {"label", label},
                           {"guard", printConstraint(br.guard)},
                           {"reset", reset},
                           {"payload", sortToJson(br.payload)}});
        }
        return id;
      }
    }
    return 0;
  }
};

Json automatonJson(const Role& role, const LocalPtr& t) {
  AutomatonBuilder b;
  int initial = b.walk(t);
  Json locations = Json::array();
  for (int i = 0; i < b.nextId; ++i) locations.push_back(i);
  return Json{{"role", role},
              {"initial", initial},
              {"locations", locations},
              {"edges", b.edges}};
}

std::string dotOf(const std::vector<std::pair<Role, Json>>& automata) {
  std::ostringstream os;
  os << "digraph protocol {\n";
  for (const auto& [role, aut] : automata) {
    for (const auto& loc : aut.at("locations")) {
      os << "  \"" << role << "." << loc.get<int>() << "\";\n";
    }
  }
  for (const auto& [role, aut] : automata) {
    for (const auto& e : aut.at("edges")) {
      std::string op = e.at("dir").get<std::string>() == "send" ? "!" : "?";
      std::string resets;
      for (const auto& c : e.at("reset")) {
        if (!resets.empty()) resets += ",";
        resets += c.get<std::string>();
      }
      os << "  \"" << role << "." << e.at("from").get<int>() << "\" -> \"" << role << "."
         << e.at("to").get<int>() << "\" [label=\"" << e.at("peer").get<std::string>() << op
         << e.at("label").get<std::string>() << " [" << e.at("guard").get<std::string>() << "] {"
         << resets << "}\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

Json chanToJson(const Chan& c) {
  if (c.isVar) return Json{{"var", c.var}};
  return Json{{"session", c.session}, {"role", c.role}};
}

Chan chanFromJson(const Json& j) {
  if (j.contains("var")) return chanVar(j.at("var").get<std::string>());
  return chanEp(j.at("session").get<std::string>(), j.at("role").get<std::string>());
}

}  // namespace

ProtocolFile parseProtocol(const std::string& text) {
  Parser p;
  p.toks = lex(text);
  return p.parseFile();
}

std::string printProtocol(const ProtocolFile& pf) {
  std::ostringstream os;
  os << "global protocol " << pf.name << "(";
  for (size_t i = 0; i < pf.roles.size(); ++i) {
    if (i) os << ", ";
    os << "role " << pf.roles[i];
  }
  os << ") {\n";
  printSeq(os, pf.body, 1);
  os << "}\n";
  return os.str();
}

bool protocolEq(const ProtocolFile& a, const ProtocolFile& b) {
  return a.name == b.name && a.roles == b.roles && seqEq(a.body, b.body);
}

GlobalPtr toGlobal(const ProtocolFile& pf) {
  Converter conv;
  scanInstances(pf.body, conv.instances);
  return conv.convert(pf.body, 0, gEnd());
}

ProtocolReport checkProtocol(const ProtocolFile& pf) {
  ProtocolReport report;
  GlobalPtr g;
  Converter conv;
  scanInstances(pf.body, conv.instances);
  try {
    g = conv.convert(pf.body, 0, gEnd());
  } catch (const ScopeError& e) {
    report.ok = false;
    report.failures.push_back(e.what());
    return report;
  }
  report.warnings = conv.flags;
  WellFormedReport wf = checkWellFormed(g);
  for (const auto& f : wf.failures) report.failures.push_back(f);

  PathWalker walker;
  walker.walk({{&pf.body, 0}}, {}, {});
  std::set<std::string> pathFailures;
  for (const auto& path : walker.paths) analyzePath(path, pathFailures);
  for (const auto& f : pathFailures) report.failures.push_back(f);

  report.ok = report.failures.empty();
  return report;
}

std::map<std::string, std::string> emitArtifacts(const ProtocolFile& pf,
                                                 const std::optional<Role>& role) {
  GlobalPtr g = toGlobal(pf);
  std::vector<Role> targets;
  if (role) {
    targets.push_back(*role);
  } else {
    targets = pf.roles;
  }
  std::map<std::string, std::string> files;
  std::vector<std::pair<Role, Json>> automata;
  for (const auto& r : targets) {
    LocalPtr t = project(g, r);
    files[r + ".type.json"] = localToJson(t).dump(2) + "\n";
    Json aut = automatonJson(r, t);
    files[r + ".cta.json"] = aut.dump(2) + "\n";
    automata.emplace_back(r, std::move(aut));
  }
  files["protocol.dot"] = dotOf(automata);
  return files;
}

Json procToJson(const ProcPtr& p) {
  switch (p->kind) {
    case Process::Kind::Nil:
      return Json{{"kind", "nil"}};
    case Process::Kind::Err:
      return Json{{"kind", "err"}};
    case Process::Kind::Par: {
      Json items = Json::array();
      for (const auto& q : p->items) items.push_back(procToJson(q));
      return Json{{"kind", "par"}, {"items", items}};
    }
    case Process::Kind::Restrict: {
      Json out{{"kind", "restrict"}, {"session", p->session}, {"body", procToJson(p->body)}};
      if (p->annotation) {
        Json ann{{"nu", valuationToJson(p->annotation->nu)},
                 {"global", globalToJson(p->annotation->g)}};
        if (p->annotation->env) ann["env"] = envToJson(*p->annotation->env);
        out["annotation"] = ann;
      }
      return out;
    }
    case Process::Kind::Select: {
      Json out{{"kind", "select"},       {"chan", chanToJson(p->chan)},
               {"to", p->partner},       {"label", p->label},
               {"timeout", printExtendedTime(p->timeout)}, {"cont", procToJson(p->cont)}};
      if (p->payload) out["payload"] = chanToJson(*p->payload);
      return out;
    }
    case Process::Kind::Branch: {
      Json branches = Json::object();
      for (const auto& [label, br] : p->branches) {
        Json b{{"cont", procToJson(br.cont)}};
        if (br.payloadVar) b["payloadVar"] = *br.payloadVar;
        branches[label] = b;
      }
      return Json{{"kind", "branch"},
                  {"chan", chanToJson(p->chan)},
                  {"from", p->partner},
                  {"timeout", printExtendedTime(p->timeout)},
                  {"branches", branches}};
    }
    case Process::Kind::Def: {
      Json params = Json::array();
      for (const auto& x : p->defParams) params.push_back(x);
      Json paramTypes = Json::array();
      for (const auto& [nu, t] : p->defParamTypes) {
        paramTypes.push_back(Json{{"nu", valuationToJson(nu)}, {"type", localToJson(t)}});
      }
      return Json{{"kind", "def"},   {"name", p->defName},
                  {"params", params}, {"paramTypes", paramTypes},
                  {"body", procToJson(p->body)}, {"scope", procToJson(p->cont)}};
    }
    case Process::Kind::Call: {
      Json args = Json::array();
      for (const auto& c : p->callArgs) args.push_back(chanToJson(c));
      return Json{{"kind", "call"}, {"name", p->defName}, {"args", args}};
    }
    case Process::Kind::DelayConstraint:
      return Json{{"kind", "delayGuard"},
                  {"guard", printConstraint(p->delayGuard)},
                  {"clock", p->delayClock},
                  {"cont", procToJson(p->cont)}};
    case Process::Kind::DelayExact:
      return Json{{"kind", "delay"}, {"time", printTime(p->delayTime)},
                  {"cont", procToJson(p->cont)}};
    case Process::Kind::Failed:
      return Json{{"kind", "failed"}, {"of", procToJson(p->body)}};
    case Process::Kind::Try:
      return Json{{"kind", "try"}, {"body", procToJson(p->tryBody)},
                  {"catch", procToJson(p->catchBody)}};
    case Process::Kind::Cancel:
      return Json{{"kind", "cancel"}, {"chan", chanToJson(p->chan)},
                  {"cont", procToJson(p->cont)}};
    case Process::Kind::Kill:
      return Json{{"kind", "kill"}, {"session", p->session}};
    case Process::Kind::Queue: {
      Json msgs = Json::array();
      for (const auto& m : p->msgs) {
        Json msg{{"to", m.to}, {"label", m.label}};
        if (m.payload) msg["payload"] = chanToJson(*m.payload);
        msgs.push_back(msg);
      }
      return Json{{"kind", "queue"}, {"session", p->session}, {"owner", p->owner},
                  {"msgs", msgs}};
    }
  }
  return Json{{"kind", "nil"}};
}

ProcPtr procFromJson(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "nil") return pNil();
  if (kind == "err") return pErr();
  if (kind == "par") {
    std::vector<ProcPtr> items;
    for (const auto& item : j.at("items")) items.push_back(procFromJson(item));
    return pPar(std::move(items));
  }
  if (kind == "restrict") {
    std::optional<SessionAnnotation> ann;
    if (j.contains("annotation")) {
      const Json& a = j.at("annotation");
      SessionAnnotation sa;
      sa.nu = valuationFromJson(a.at("nu"));
      sa.g = globalFromJson(a.at("global"));
      if (a.contains("env")) sa.env = envFromJson(a.at("env"));
      ann = sa;
    }
    return pRestrict(j.at("session").get<std::string>(), procFromJson(j.at("body")), ann);
  }
  if (kind == "select") {
    std::optional<Chan> payload;
    if (j.contains("payload")) payload = chanFromJson(j.at("payload"));
    return pSelect(chanFromJson(j.at("chan")), j.at("to").get<std::string>(),
                   j.at("label").get<std::string>(), payload,
                   parseExtendedTime(j.at("timeout").get<std::string>()),
                   procFromJson(j.at("cont")));
  }
  if (kind == "branch") {
    std::map<Label, ProcBranch> branches;
    for (const auto& [label, b] : j.at("branches").items()) {
      ProcBranch br;
      if (b.contains("payloadVar")) br.payloadVar = b.at("payloadVar").get<std::string>();
      br.cont = procFromJson(b.at("cont"));
      branches.emplace(label, std::move(br));
    }
    return pBranch(chanFromJson(j.at("chan")), j.at("from").get<std::string>(),
                   std::move(branches), parseExtendedTime(j.at("timeout").get<std::string>()));
  }
  if (kind == "def") {
    std::vector<std::string> params;
    for (const auto& x : j.at("params")) params.push_back(x.get<std::string>());
    std::vector<std::pair<ClockValuation, LocalPtr>> paramTypes;
    if (j.contains("paramTypes")) {
      for (const auto& pt : j.at("paramTypes")) {
        paramTypes.emplace_back(valuationFromJson(pt.at("nu")), localFromJson(pt.at("type")));
      }
    }
    return pDef(j.at("name").get<std::string>(), std::move(params), procFromJson(j.at("body")),
                procFromJson(j.at("scope")), std::move(paramTypes));
  }
  if (kind == "call") {
    std::vector<Chan> args;
    for (const auto& a : j.at("args")) args.push_back(chanFromJson(a));
    return pCall(j.at("name").get<std::string>(), std::move(args));
  }
  if (kind == "delayGuard") {
    return pDelayConstraint(parseConstraint(j.at("guard").get<std::string>()),
                            j.at("clock").get<std::string>(), procFromJson(j.at("cont")));
  }
  if (kind == "delay") {
    return pDelayExact(parseTime(j.at("time").get<std::string>()), procFromJson(j.at("cont")));
  }
  if (kind == "failed") return pFailed(procFromJson(j.at("of")));
  if (kind == "try") return pTry(procFromJson(j.at("body")), procFromJson(j.at("catch")));
  if (kind == "cancel") return pCancel(chanFromJson(j.at("chan")), procFromJson(j.at("cont")));
  if (kind == "kill") return pKill(j.at("session").get<std::string>());
  if (kind == "queue") {
    std::vector<QueueMsg> msgs;
    for (const auto& m : j.at("msgs")) {
      QueueMsg msg;
      msg.to = m.at("to").get<std::string>();
      msg.label = m.at("label").get<std::string>();
      if (m.contains("payload")) msg.payload = chanFromJson(m.at("payload"));
      msgs.push_back(std::move(msg));
    }
    return pQueue(j.at("session").get<std::string>(), j.at("owner").get<std::string>(),
                  std::move(msgs));
  }
  throw ParseError("unknown process kind '" + kind + "'", 0, 0);
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file '" + path + "'", 0, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ProcPtr annotateRestrictions(const ProcPtr& p, const GlobalPtr& g) {
  switch (p->kind) {
    case Process::Kind::Par: {
      std::vector<ProcPtr> items;
      for (const auto& q : p->items) items.push_back(annotateRestrictions(q, g));
      return pPar(std::move(items));
    }
    case Process::Kind::Restrict: {
      std::optional<SessionAnnotation> ann = p->annotation;
      if (!ann) ann = SessionAnnotation{initialValuation(g), g, std::nullopt};
      return pRestrict(p->session, annotateRestrictions(p->body, g), ann);
    }
    case Process::Kind::Def:
      return pDef(p->defName, p->defParams, annotateRestrictions(p->body, g),
                  annotateRestrictions(p->cont, g), p->defParamTypes);
    case Process::Kind::Try:
      return pTry(annotateRestrictions(p->tryBody, g), annotateRestrictions(p->catchBody, g));
    default:
      return p;
  }
}

std::vector<Rat> parseGridSpec(const std::string& spec) {
  std::vector<Rat> grid;
  std::string item;
  std::istringstream ss(spec);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) grid.push_back(parseTime(item));
  }
  return grid;
}

struct Diag {
  bool json = false;
  std::string command;
  std::ostream& out;
  std::ostream& err;

  int report(int code, bool ok, const std::vector<std::string>& messages,
             const Json& extra = Json::object()) {
    if (json) {
      Json d{{"command", command}, {"ok", ok}, {"messages", messages}};
      for (const auto& [k, v] : extra.items()) d[k] = v;
      out << d.dump(2) << "\n";
    } else {
      for (const auto& m : messages) (ok ? out : err) << m << "\n";
    }
    return code;
  }
};

}  // namespace

int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"timed multiparty session protocol toolchain"};
  app.require_subcommand(1);
  bool json = false;
  app.add_flag("--json", json, "emit machine-readable JSON diagnostics");

  auto* cmdCheck = app.add_subcommand("check", "parse a protocol and check well-formedness");
  std::string checkFile;
  cmdCheck->add_option("file", checkFile, "protocol file")->required();

  auto* cmdProject = app.add_subcommand("project", "project a protocol onto its roles");
  std::string projFile;
  std::string projRole;
  std::string projOut;
  bool projDot = false;
  cmdProject->add_option("file", projFile, "protocol file")->required();
  cmdProject->add_option("--role", projRole, "restrict to one role");
  cmdProject->add_option("--out", projOut, "directory to write artifacts into");
  cmdProject->add_flag("--dot", projDot, "also produce the combined automaton graph");

  auto* cmdTypecheck = app.add_subcommand("typecheck", "type a process file against a protocol");
  std::string tcProc;
  std::string tcProto;
  cmdTypecheck->add_option("procfile", tcProc, "process file")->required();
  cmdTypecheck->add_option("--protocol", tcProto, "protocol file")->required();

  auto* cmdSimulate = app.add_subcommand("simulate", "explore the reductions of a process file");
  std::string simFile;
  int simDepth = 10;
  std::string simGrid = "auto";
  bool simTrace = false;
  cmdSimulate->add_option("procfile", simFile, "process file")->required();
  cmdSimulate->add_option("--depth", simDepth, "exploration depth");
  cmdSimulate->add_option("--grid", simGrid, "time grid: auto or a comma-separated list");
  cmdSimulate->add_flag("--trace", simTrace, "print one trace per terminal");

  auto* cmdVerify = app.add_subcommand("verify", "run a bounded metatheory check on a protocol");
  std::string verFile;
  std::string theorem;
  int verDepth = 8;
  std::string verGrid = "auto";
  std::uint64_t seed = 0;
  cmdVerify->add_option("file", verFile, "protocol file")->required();
  cmdVerify
      ->add_option("--theorem", theorem, "which statement to check")
      ->required()
      ->check(CLI::IsMember({"association-sound", "association-complete", "safety",
                             "deadlock-freedom", "subject-reduction"}));
  cmdVerify->add_option("--depth", verDepth, "exploration depth");
  cmdVerify->add_option("--grid", verGrid, "time grid: auto or a comma-separated list");
  cmdVerify->add_option("--seed", seed, "randomization seed (recorded in the report)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  if (const char* g = std::getenv("ATMP_GRID")) {
    simGrid = g;
    verGrid = g;
  }

  try {
    if (app.got_subcommand(cmdCheck)) {
      Diag diag{json, "check", out, err};
      ProtocolFile pf;
      try {
        pf = parseProtocol(slurp(checkFile));
      } catch (const std::runtime_error& e) {
        return diag.report(2, false, {e.what()});
      }
      ProtocolReport report = checkProtocol(pf);
      std::vector<std::string> messages = report.failures;
      for (const auto& w : report.warnings) messages.push_back("warning: " + w);
      if (report.ok) messages.push_back("protocol " + pf.name + ": ok");
      return diag.report(report.ok ? 0 : 1, report.ok, messages,
                         Json{{"protocol", pf.name}, {"warnings", report.warnings}});
    }

    if (app.got_subcommand(cmdProject)) {
      Diag diag{json, "project", out, err};
      ProtocolFile pf;
      try {
        pf = parseProtocol(slurp(projFile));
      } catch (const std::runtime_error& e) {
        return diag.report(2, false, {e.what()});
      }
      ProtocolReport report = checkProtocol(pf);
      if (!report.ok) return diag.report(1, false, report.failures);
      std::optional<Role> role;
      if (!projRole.empty()) role = projRole;
      std::map<std::string, std::string> files;
      try {
        files = emitArtifacts(pf, role);
      } catch (const ProjectionError& e) {
        return diag.report(1, false, {e.what()});
      }
      if (!projDot) files.erase("protocol.dot");
      if (!projOut.empty()) {
        std::filesystem::create_directories(projOut);
        std::vector<std::string> written;
        for (const auto& [name, content] : files) {
          std::ofstream f(std::filesystem::path(projOut) / name, std::ios::binary);
          f << content;
          written.push_back((std::filesystem::path(projOut) / name).string());
        }
        return diag.report(0, true, written);
      }
      if (role) {
        out << files.at(*role + ".type.json");
        if (projDot) out << files.at("protocol.dot");
        return 0;
      }
      Json all = Json::object();
      for (const auto& r : pf.roles) {
        all[r] = Json::parse(files.at(r + ".type.json"));
      }
      out << all.dump(2) << "\n";
      if (projDot) out << files.at("protocol.dot");
      return 0;
    }

    if (app.got_subcommand(cmdTypecheck)) {
      Diag diag{json, "typecheck", out, err};
      GlobalPtr g;
      ProcPtr proc;
      try {
        g = toGlobal(parseProtocol(slurp(tcProto)));
        proc = procFromJson(Json::parse(slurp(tcProc)));
      } catch (const Json::exception& e) {
        return diag.report(2, false, {e.what()});
      } catch (const std::runtime_error& e) {
        return diag.report(2, false, {e.what()});
      }
      Judgment j;
      j.process = annotateRestrictions(proc, g);
      TypingReport report = typecheck(j, true);
      if (json) {
        out << report.toJson().dump(2) << "\n";
        return report.ok ? 0 : 1;
      }
      return diag.report(report.ok ? 0 : 1, report.ok,
                         report.ok ? std::vector<std::string>{"well-typed"} : report.errors);
    }

    if (app.got_subcommand(cmdSimulate)) {
      Diag diag{json, "simulate", out, err};
      ProcPtr proc;
      try {
        proc = procFromJson(Json::parse(slurp(simFile)));
      } catch (const Json::exception& e) {
        return diag.report(2, false, {e.what()});
      } catch (const std::runtime_error& e) {
        return diag.report(2, false, {e.what()});
      }
      ExploreOptions opts;
      opts.depth = simDepth;
      if (simGrid != "auto") {
        opts.grid = parseGridSpec(simGrid);
        opts.useAutoGrid = false;
      }
      ExploreReport report = explore(proc, opts);
      Json extra{{"states", report.states},
                 {"truncated", report.truncated},
                 {"errReached", report.errReached},
                 {"deadlockFree", report.deadlockFree},
                 {"terminals", report.terminals},
                 {"failedEndpoints",
                  std::vector<std::string>(report.failedEndpoints.begin(),
                                           report.failedEndpoints.end())}};
      std::vector<std::string> messages;
      messages.push_back("states: " + std::to_string(report.states));
      messages.push_back("terminals: " + std::to_string(report.terminals.size()));
      messages.push_back(std::string("deadlock-free: ") + (report.deadlockFree ? "yes" : "no"));
      messages.push_back(std::string("error reached: ") + (report.errReached ? "yes" : "no"));
      for (const auto& fe : report.failedEndpoints) messages.push_back("failed endpoint: " + fe);
      if (simTrace) {
        Json traces = Json::array();
        for (const auto& trace : report.terminalTraces) {
          traces.push_back(trace);
          std::string line = "trace:";
          for (const auto& step : trace) line += " " + step;
          messages.push_back(line);
        }
        extra["traces"] = traces;
      }
      return diag.report(report.errReached ? 1 : 0, !report.errReached, messages, extra);
    }

    if (app.got_subcommand(cmdVerify)) {
      Diag diag{json, "verify", out, err};
      ProtocolFile pf;
      GlobalPtr g;
      try {
        pf = parseProtocol(slurp(verFile));
        g = toGlobal(pf);
      } catch (const std::runtime_error& e) {
        return diag.report(2, false, {e.what()});
      }
      const std::string session = "s";
      TimedGlobalState s0{initialValuation(g), g};
      std::vector<Rat> grid;
      bool autoGridSpec = verGrid == "auto";
      if (!autoGridSpec) grid = parseGridSpec(verGrid);
      bool ok = false;
      std::string detail;
      size_t checked = 0;
      if (theorem == "association-sound" || theorem == "association-complete") {
        TypingEnv env = canonicalEnv(s0, session);
        std::vector<Rat> effective = autoGridSpec ? autoGrid(s0, env) : grid;
        CorrespondenceReport r =
            theorem == "association-sound"
                ? checkSoundness(s0, env, session, verDepth, effective)
                : checkCompleteness(s0, env, session, verDepth, effective);
        ok = r.ok;
        detail = r.detail;
        checked = r.visited;
        if (!r.ok) {
          for (const auto& step : r.counterexample) detail += "\n  " + step;
        }
      } else if (theorem == "safety") {
        TypingEnv env = canonicalEnv(s0, session);
        SafetyReport r = checkSafety(untimedErase(env), verDepth);
        ok = r.ok;
        detail = r.detail;
        checked = r.visited;
        if (!r.ok) {
          for (const auto& step : r.counterexample) detail += "\n  " + step;
        }
      } else {
        Judgment j;
        j.process = canonicalProcessOf(g, session);
        MetaReport r = theorem == "deadlock-freedom"
                           ? checkDeadlockFreedom(j, verDepth, grid)
                           : checkSubjectReduction(j, verDepth, grid);
        ok = r.ok;
        detail = r.detail;
        checked = r.checked;
      }
      std::vector<std::string> messages;
      messages.push_back(theorem + ": " + (ok ? "holds" : "fails") + " at depth " +
                         std::to_string(verDepth));
      if (!detail.empty()) messages.push_back(detail);
      return diag.report(ok ? 0 : 1, ok, messages,
                         Json{{"theorem", theorem},
                              {"depth", verDepth},
                              {"seed", seed},
                              {"checked", checked}});
    }
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace atmp
