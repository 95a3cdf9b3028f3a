#include "atmp/projection.hpp"

namespace atmp {

LocalPtr merge(const LocalPtr& a, const LocalPtr& b) {
  if (a->kind != b->kind)
    throw NotMergeable("cannot merge " + printLocal(a) + " with " + printLocal(b));
  switch (a->kind) {
    case LocalType::Kind::End:
      return a;
    case LocalType::Kind::Var:
      if (a->var != b->var) throw NotMergeable("distinct recursion variables");
      return a;
    case LocalType::Kind::Rec:
      if (a->var != b->var) throw NotMergeable("distinct recursion binders");
      return lRec(a->var, merge(a->body, b->body));
    case LocalType::Kind::ExtChoice: {
      if (a->partner != b->partner) throw NotMergeable("external choices from distinct partners");
      LocalBranches out = a->branches;
      for (const auto& [label, br] : b->branches) {
        auto it = out.find(label);
        if (it == out.end()) {
          out.emplace(label, br);
          continue;
        }
        if (!sortEq(it->second.payload, br.payload) ||
            !constraintEq(it->second.guard, br.guard) || it->second.reset != br.reset)
          throw NotMergeable("shared external label " + label +
                             " carries differing payload or timing");
        it->second.cont = merge(it->second.cont, br.cont);
      }
      return lExtChoice(a->partner, std::move(out));
    }
    case LocalType::Kind::IntChoice: {
      if (a->partner != b->partner) throw NotMergeable("internal choices toward distinct partners");
      if (a->branches.size() != b->branches.size())
        throw NotMergeable("internal choices with distinct branch sets");
      LocalBranches out;
      auto itB = b->branches.begin();
      for (const auto& [label, br] : a->branches) {
        if (label != itB->first)
          throw NotMergeable("internal choices with distinct branch sets");
        if (!sortEq(br.payload, itB->second.payload) ||
            !constraintEq(br.guard, itB->second.guard) || br.reset != itB->second.reset)
          throw NotMergeable("internal label " + label +
                             " carries differing payload or timing");
        out.emplace(label, LocalBranch{br.payload, br.guard, br.reset,
                                       merge(br.cont, itB->second.cont)});
        ++itB;
      }
      return lIntChoice(a->partner, std::move(out));
    }
  }
  throw NotMergeable("unreachable");
}

LocalPtr project(const GlobalPtr& g, const Role& p) {
  switch (g->kind) {
    case GlobalType::Kind::End:
      return lEnd();
    case GlobalType::Kind::Var:
      return lVar(g->var);
    case GlobalType::Kind::Rec: {
      if (roles(g->body).count(p) || !freeVars(g).empty())
        return lRec(g->var, project(g->body, p));
      return lEnd();
    }
    case GlobalType::Kind::Comm: {
      if (p == g->from) {
        LocalBranches out;
        for (const auto& [label, br] : g->branches)
          out.emplace(label, LocalBranch{br.payload, br.timing.outGuard,
                                         br.timing.outReset, project(br.cont, p)});
        return lIntChoice(g->to, std::move(out));
      }
      if (p == g->to) {
        LocalBranches out;
        for (const auto& [label, br] : g->branches)
          out.emplace(label, LocalBranch{br.payload, br.timing.inGuard, br.timing.inReset,
                                         project(br.cont, p)});
        return lExtChoice(g->from, std::move(out));
      }
      LocalPtr acc;
      for (const auto& [label, br] : g->branches) {
        LocalPtr piece = project(br.cont, p);
        try {
          acc = acc ? merge(acc, piece) : piece;
        } catch (const NotMergeable& e) {
          throw NotProjectable(std::string(e.what()) + " (projecting onto " + p + ")");
        }
      }
      if (!acc) throw NotProjectable("communication with empty branch set");
      return acc;
    }
    case GlobalType::Kind::CommEnRoute: {
      if (p == g->from) return project(g->branches.at(g->chosen).cont, p);
      if (p == g->to) {
        LocalBranches out;
        for (const auto& [label, br] : g->branches)
          out.emplace(label, LocalBranch{br.payload, br.timing.inGuard, br.timing.inReset,
                                         project(br.cont, p)});
        return lExtChoice(g->from, std::move(out));
      }
      LocalPtr acc;
      for (const auto& [label, br] : g->branches) {
        LocalPtr piece = project(br.cont, p);
        try {
          acc = acc ? merge(acc, piece) : piece;
        } catch (const NotMergeable& e) {
          throw NotProjectable(std::string(e.what()) + " (projecting onto " + p + ")");
        }
      }
      if (!acc) throw NotProjectable("transmission with empty branch set");
      return acc;
    }
  }
  return lEnd();
}

QueueType queueEnvOf(const GlobalPtr& g, const Role& p) {
  switch (g->kind) {
    case GlobalType::Kind::End:
    case GlobalType::Kind::Var:
    case GlobalType::Kind::Rec:
      return {};
    case GlobalType::Kind::CommEnRoute: {
      QueueType rest = queueEnvOf(g->branches.at(g->chosen).cont, p);
      if (g->from != p) return rest;
      QueueType out{
          MessageType{g->to, g->chosen, g->branches.at(g->chosen).payload}};
      out.insert(out.end(), rest.begin(), rest.end());
      return out;
    }
    case GlobalType::Kind::Comm: {
      std::optional<QueueType> common;
      for (const auto& [label, br] : g->branches) {
        QueueType q = queueEnvOf(br.cont, p);
        if (!common) {
          common = std::move(q);
        } else if (!queueEq(*common, q)) {
          throw NotQueueCoherent("branches of label set at " + g->from + "->" + g->to +
                                 " contribute different pending messages for " + p);
        }
      }
      return common ? *common : QueueType{};
    }
  }
  return {};
}

}  // namespace atmp
