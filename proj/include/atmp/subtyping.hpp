#pragma once

#include "atmp/types.hpp"

namespace atmp {

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

// One typing-environment entry: a session endpoint (valuation + local type), a
// queue, or the composition of both.
struct EnvEntry {
  bool hasSession = false;
  ClockValuation nu;
  LocalPtr type;
  bool hasQueue = false;
  QueueType queue;
};

EnvEntry sessionEntry(const ClockValuation& nu, const LocalPtr& t);
EnvEntry queueEntry(const QueueType& q);
EnvEntry combinedEntry(const ClockValuation& nu, const LocalPtr& t, const QueueType& q);
bool entryEq(const EnvEntry& a, const EnvEntry& b);

// Alpha-invariant structural key; equal keys mean equal types up to renaming
// of recursion binders.
std::string dbKey(const LocalPtr& t);

bool subtype(const LocalPtr& t1, const LocalPtr& t2);
bool subtypeSort(const Sort& a, const Sort& b);
bool subtypeQueue(const QueueType& a, const QueueType& b);
bool subtypeEntry(const EnvEntry& a, const EnvEntry& b);

QueueType canonicalQueue(const QueueType& q);
bool congruentQueue(const QueueType& a, const QueueType& b);
bool congruentEntry(const EnvEntry& a, const EnvEntry& b);

}  // namespace atmp
