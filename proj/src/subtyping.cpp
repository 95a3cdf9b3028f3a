#include "atmp/subtyping.hpp"

#include <algorithm>

namespace atmp {

EnvEntry sessionEntry(const ClockValuation& nu, const LocalPtr& t) {
  EnvEntry e;
  e.hasSession = true;
  e.nu = nu;
  e.type = t;
  return e;
}

EnvEntry queueEntry(const QueueType& q) {
  EnvEntry e;
  e.hasQueue = true;
  e.queue = q;
  return e;
}

EnvEntry combinedEntry(const ClockValuation& nu, const LocalPtr& t, const QueueType& q) {
  EnvEntry e;
  e.hasSession = true;
  e.nu = nu;
  e.type = t;
  e.hasQueue = true;
  e.queue = q;
  return e;
}

bool entryEq(const EnvEntry& a, const EnvEntry& b) {
  if (a.hasSession != b.hasSession || a.hasQueue != b.hasQueue) return false;
  if (a.hasSession && (a.nu != b.nu || !ltEq(a.type, b.type))) return false;
  if (a.hasQueue && !queueEq(a.queue, b.queue)) return false;
  return true;
}

namespace {

void dbDump(const LocalPtr& t, std::vector<std::string>& binders, std::string& out);

void dbDumpSort(const Sort& s, std::vector<std::string>& binders, std::string& out) {
  if (s.kind == Sort::Kind::Base) {
    out += s.baseTag;
    return;
  }
  out += "<";
  out += printConstraint(s.guard);
  out += ",";
  dbDump(s.continuation, binders, out);
  out += ">";
}

void dbDump(const LocalPtr& t, std::vector<std::string>& binders, std::string& out) {
  switch (t->kind) {
    case LocalType::Kind::End:
      out += "end";
      return;
    case LocalType::Kind::Var: {
      for (size_t i = binders.size(); i-- > 0;) {
        if (binders[i] == t->var) {
          out += "#" + std::to_string(binders.size() - 1 - i);
          return;
        }
      }
      out += "free:" + t->var;
      return;
    }
    case LocalType::Kind::Rec:
      out += "mu.";
      binders.push_back(t->var);
      dbDump(t->body, binders, out);
      binders.pop_back();
      return;
    case LocalType::Kind::IntChoice:
    case LocalType::Kind::ExtChoice:
      out += t->kind == LocalType::Kind::IntChoice ? "+" : "&";
      out += t->partner;
      out += "{";
      for (const auto& [label, br] : t->branches) {
        out += label;
        out += "(";
        dbDumpSort(br.payload, binders, out);
        out += "){";
        out += printConstraint(br.guard);
        out += ";";
        for (const Clock& c : br.reset) {
          out += c;
          out += ",";
        }
        out += "}.";
        dbDump(br.cont, binders, out);
        out += ";";
      }
      out += "}";
      return;
  }
}

struct SubtypeCtx {
  std::set<std::pair<std::string, std::string>> assumed;

  bool sub(LocalPtr a, LocalPtr b) {
    a = unfoldOne(a);
    b = unfoldOne(b);
    std::pair<std::string, std::string> key{dbKey(a), dbKey(b)};
    if (!assumed.insert(key).second) return true;
    if (a->kind == LocalType::Kind::End) return b->kind == LocalType::Kind::End;
    if (a->kind == LocalType::Kind::IntChoice) {
      if (b->kind != LocalType::Kind::IntChoice || a->partner != b->partner) return false;
      for (const auto& [label, right] : b->branches) {
        auto it = a->branches.find(label);
        if (it == a->branches.end()) return false;
        const LocalBranch& left = it->second;
        if (!constraintEq(left.guard, right.guard) || left.reset != right.reset)
          return false;
        if (!sortSub(right.payload, left.payload)) return false;
        if (!sub(left.cont, right.cont)) return false;
      }
      return true;
    }
    if (a->kind == LocalType::Kind::ExtChoice) {
      if (b->kind != LocalType::Kind::ExtChoice || a->partner != b->partner) return false;
      for (const auto& [label, left] : a->branches) {
        auto it = b->branches.find(label);
        if (it == b->branches.end()) return false;
        const LocalBranch& right = it->second;
        if (!constraintEq(left.guard, right.guard) || left.reset != right.reset)
          return false;
        if (!sortSub(left.payload, right.payload)) return false;
        if (!sub(left.cont, right.cont)) return false;
      }
      return true;
    }
    return false;
  }

  bool sortSub(const Sort& a, const Sort& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == Sort::Kind::Base) return a.baseTag == b.baseTag;
    if (!constraintEq(a.guard, b.guard)) return false;
    return sub(a.continuation, b.continuation);
  }
};

}  // namespace

std::string dbKey(const LocalPtr& t) {
  std::vector<std::string> binders;
  std::string out;
  dbDump(t, binders, out);
  return out;
}

bool subtype(const LocalPtr& t1, const LocalPtr& t2) {
  SubtypeCtx ctx;
  return ctx.sub(t1, t2);
}

bool subtypeSort(const Sort& a, const Sort& b) {
  SubtypeCtx ctx;
  return ctx.sortSub(a, b);
}

bool subtypeQueue(const QueueType& a, const QueueType& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].receiver != b[i].receiver || a[i].label != b[i].label) return false;
    if (!subtypeSort(b[i].payload, a[i].payload)) return false;
  }
  return true;
}

bool subtypeEntry(const EnvEntry& a, const EnvEntry& b) {
  if (a.hasSession != b.hasSession || a.hasQueue != b.hasQueue)
    throw ShapeMismatch("entries have different shapes");
  if (a.hasSession) {
    if (a.nu != b.nu) return false;
    if (!subtype(a.type, b.type)) return false;
  }
  if (a.hasQueue && !subtypeQueue(a.queue, b.queue)) return false;
  return true;
}

QueueType canonicalQueue(const QueueType& q) {
  QueueType out = q;
  std::stable_sort(out.begin(), out.end(),
                   [](const MessageType& a, const MessageType& b) {
                     return a.receiver < b.receiver;
                   });
  return out;
}

bool congruentQueue(const QueueType& a, const QueueType& b) {
  return queueEq(canonicalQueue(a), canonicalQueue(b));
}

bool congruentEntry(const EnvEntry& a, const EnvEntry& b) {
  if (a.hasSession != b.hasSession || a.hasQueue != b.hasQueue) return false;
  if (a.hasSession && (a.nu != b.nu || !ltEq(a.type, b.type))) return false;
  if (a.hasQueue && !congruentQueue(a.queue, b.queue)) return false;
  return true;
}

}  // namespace atmp
