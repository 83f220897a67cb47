#pragma once

#include <memory>

#include "dynstab/static_stability.hpp"

namespace dynstab {

/// Full dynamic stability checks both sides' waiting conditions; the side-A
/// variant checks pairwise blocks and side-A waiting only, with conjecture
/// continuations drawn recursively from side-A stable sets.
enum class StabilityConcept { Full, SideA };

/// The waiting conditions need only be checked for agents who match at the
/// node (MatchedOnly); checking all available agents is equivalent and kept
/// as a property-tested mode.
enum class WaitingScope { MatchedOnly, AllAvailable };

struct SolveStats {
  std::uint64_t matchings_enumerated = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
};

/// One way the agents who match at a node may pair up, leaving the rest
/// single, such that the matched restriction is statically stable.
struct PeriodOption {
  std::vector<std::pair<AgentId, AgentId>> pairs;
  std::vector<AgentId> left_a;
  std::vector<AgentId> left_b;
};

/// Summary of an agent's conjecture set at a node: extreme payoffs and the
/// payoff-minimizing member (ties broken by canonical enumeration order).
struct ConjectureStats {
  bool empty = true;
  Rational min_payoff{0};
  Rational max_payoff{0};
  std::vector<std::pair<AgentId, AgentId>> argmin_pairs;
  std::shared_ptr<const ContinuationEconomy> argmin_cont;
  std::shared_ptr<const Matching> argmin_member;  // matching of argmin_cont->economy
};

/// Shared solver state: enumeration budget, the stable-set cache keyed by
/// canonical continuation-economy serialization, and derived-structure memos.
/// A context must only be used with economies sharing one characteristic
/// table. Disabling `use_cache` recomputes every stable set from scratch and
/// must not change any verdict.
class SolveContext {
 public:
  std::uint64_t enumeration_limit = kDefaultEnumerationLimit;
  bool use_cache = true;
  SolveStats stats;

  std::map<std::string, std::shared_ptr<const std::vector<Matching>>> stable_sets;
  std::map<std::string, std::shared_ptr<const ConjectureStats>> conjecture_cache;
  // structural memos, verdict-neutral
  std::map<std::string, std::shared_ptr<const ContinuationEconomy>> continuations;
  std::map<std::string, std::shared_ptr<const std::vector<PeriodOption>>> period_options_cache;
};

struct DSWitness {
  enum class Condition { PairBlock, WaitingA, WaitingB };
  Condition condition = Condition::PairBlock;
  NodeId node = -1;
  std::string node_path;
  std::optional<std::pair<AgentId, AgentId>> pair;  // pair block only
  // waiting only: every conjecture strictly beats the matching for `agent`;
  // the reported conjecture is the payoff-minimizing one
  std::optional<AgentId> agent;
  Rational matching_payoff{0};
  Rational guarantee_payoff{0};
  std::shared_ptr<const Matching> worst_conjecture;
  bool conjectures_empty = false;
};

struct DSVerdict {
  bool stable = true;
  std::optional<DSWitness> witness;
};

struct ConjectureSet {
  AgentId agent = -1;
  NodeId node = -1;
  std::vector<Matching> members;

  bool contains(const Matching& m, const Economy& e) const {
    const std::string key = canonical_key(m, e);
    for (const auto& mem : members)
      if (canonical_key(mem, e) == key) return true;
    return false;
  }
};

namespace detail {

inline std::string concept_tag(StabilityConcept c) { return c == StabilityConcept::Full ? "F" : "S"; }

inline std::string avail_key(const AvailableAgents& avail) {
  return leftover_key(avail.side_a, avail.side_b);
}

inline std::shared_ptr<const ContinuationEconomy> continuation_for(SolveContext& ctx, const Economy& e,
                                                                   NodeId r,
                                                                   const PeriodMatching& pairing_at_r) {
  std::vector<AgentId> left_a, left_b;
  auto [as, bs] = e.cumulative_arrivals(r, e.depth(r));
  for (AgentId a : as)
    if (partner_of(pairing_at_r, a) == a) left_a.push_back(a);
  for (AgentId b : bs)
    if (partner_of(pairing_at_r, b) == b) left_b.push_back(b);
  const std::string key = e.key() + "#" + std::to_string(r) + "#" + leftover_key(left_a, left_b);
  auto it = ctx.continuations.find(key);
  if (it != ctx.continuations.end()) return it->second;
  auto cont = std::make_shared<ContinuationEconomy>(continuation_economy(e, pairing_at_r, r));
  ctx.continuations.emplace(key, cont);
  return cont;
}

/// All statically-sound ways the available agents at r may pair up.
inline std::shared_ptr<const std::vector<PeriodOption>> period_options(SolveContext& ctx, const Economy& e,
                                                                       NodeId r,
                                                                       const AvailableAgents& avail) {
  const std::string key = e.key() + "#" + std::to_string(r) + "#" + avail_key(avail);
  auto it = ctx.period_options_cache.find(key);
  if (it != ctx.period_options_cache.end()) return it->second;

  auto out = std::make_shared<std::vector<PeriodOption>>();
  for (const auto& pairs : enumerate_period_matchings(avail.side_a, avail.side_b)) {
    PeriodMatching pm;
    std::vector<AgentId> ma, mb;
    for (const auto& [a, b] : pairs) {
      add_pair(pm, a, b);
      ma.push_back(a);
      mb.push_back(b);
    }
    std::sort(mb.begin(), mb.end());
    if (!static_stable(e, pm, ma, mb, r).stable) continue;
    PeriodOption opt;
    opt.pairs = pairs;
    for (AgentId a : avail.side_a)
      if (partner_of(pm, a) == a) opt.left_a.push_back(a);
    for (AgentId b : avail.side_b)
      if (partner_of(pm, b) == b) opt.left_b.push_back(b);
    out->push_back(std::move(opt));
  }
  ctx.period_options_cache.emplace(key, out);
  return out;
}

std::shared_ptr<const std::vector<Matching>> stable_set(SolveContext& ctx, const Economy& e,
                                                        StabilityConcept notion);

/// Expected payoff of `k` in a continuation member, evaluated one period
/// before the continuation starts (one extra discount factor).
inline Rational conjecture_value(const Economy& parent, AgentId k, const ContinuationEconomy& cont,
                                 const Matching& member) {
  const Economy& ce = cont.economy;
  const Rational& delta = parent.table.delta_of(parent.agent(k).characteristic);
  Rational total{0};
  for (NodeId c : ce.node(ce.root()).children)
    total += ce.node(c).prob * payoff(ce, member, k, c);
  return delta * total;
}

inline std::shared_ptr<const ConjectureStats> conjecture_stats(SolveContext& ctx, const Economy& e,
                                                               NodeId r, const PeriodMatching& parent_pm,
                                                               const AvailableAgents& avail, AgentId k,
                                                               StabilityConcept notion) {
  const std::string key = concept_tag(notion) + "|" + e.key() + "#" + std::to_string(r) + "#" +
                          avail_key(avail) + "#" + std::to_string(k);
  if (ctx.use_cache) {
    auto it = ctx.conjecture_cache.find(key);
    if (it != ctx.conjecture_cache.end()) return it->second;
  }

  auto stats = std::make_shared<ConjectureStats>();
  const bool terminal = e.depth(r) >= e.horizon;
  auto options = period_options(ctx, e, r, avail);
  for (const auto& opt : *options) {
    bool k_single = true;
    for (const auto& [a, b] : opt.pairs)
      if (a == k || b == k) { k_single = false; break; }
    if (!k_single) continue;

    if (terminal) {
      // no continuation: the waiting agent ends single with payoff zero
      if (stats->empty) {
        stats->empty = false;
        stats->min_payoff = stats->max_payoff = 0;
        stats->argmin_pairs = opt.pairs;
      }
      continue;
    }

    PeriodMatching pairing_at_r = parent_pm;
    for (const auto& [a, b] : opt.pairs) add_pair(pairing_at_r, a, b);
    auto cont = continuation_for(ctx, e, r, pairing_at_r);
    auto members = stable_set(ctx, cont->economy, notion);
    for (const auto& member : *members) {
      Rational val = conjecture_value(e, k, *cont, member);
      if (stats->empty || val < stats->min_payoff) {
        stats->min_payoff = val;
        stats->argmin_pairs = opt.pairs;
        stats->argmin_cont = cont;
        stats->argmin_member = std::make_shared<Matching>(member);
      }
      if (stats->empty || val > stats->max_payoff) stats->max_payoff = val;
      stats->empty = false;
    }
  }
  if (ctx.use_cache) ctx.conjecture_cache.emplace(key, stats);
  return stats;
}

/// Builds a full matching that follows `reference` off the subtree of r and
/// plays (pairs, member) at and below r. The reference is first closed under
/// carrying matched pairs forward so partially-built references stay valid.
inline Matching materialize_conjecture(const Economy& e, const Matching& reference, NodeId r,
                                       const std::vector<std::pair<AgentId, AgentId>>& pairs,
                                       const ContinuationEconomy* cont, const Matching* member) {
  Matching out = reference;
  for (NodeId n = 1; n < e.node_count(); ++n) {
    if (e.node(n).parent == e.root()) continue;
    for (const auto& [k, p] : out.at(e.node(n).parent))
      if (!out.at(n).count(k)) out.at(n).emplace(k, p);
  }
  const auto& nd = e.node(r);
  PeriodMatching base = nd.parent == e.root() ? PeriodMatching{} : out.at(nd.parent);
  for (const auto& [a, b] : pairs) add_pair(base, a, b);
  out.at(r) = base;
  if (cont && member) {
    std::map<NodeId, NodeId> from_source;  // source node -> continuation node
    for (const auto& [cn, sn] : cont->to_source) from_source[sn] = cn;
    for (NodeId n = 0; n < e.node_count(); ++n) {
      if (n == r || !e.weakly_follows(n, r)) continue;
      PeriodMatching pm = base;
      auto it = from_source.find(n);
      if (it != from_source.end())
        for (const auto& [k, p] : member->at(it->second)) pm.emplace(k, p);
      out.at(n) = std::move(pm);
    }
  } else {
    for (NodeId n = 0; n < e.node_count(); ++n) {
      if (n == r || !e.weakly_follows(n, r)) continue;
      out.at(n) = base;
    }
  }
  return out;
}

inline DSVerdict stability_verdict(const Matching& m, const Economy& e, SolveContext& ctx,
                                   StabilityConcept notion, WaitingScope scope) {
  // deepest nodes first: a matching whose continuation is already broken is
  // rejected for the continuation's defect
  std::vector<NodeId> order;
  for (int d = e.horizon; d >= 1; --d)
    for (NodeId n = 1; n < e.node_count(); ++n)
      if (e.depth(n) == d) order.push_back(n);
  for (NodeId n : order) {
    const PeriodMatching empty;
    const PeriodMatching& parent_pm = e.node(n).parent == e.root() ? empty : m.at(e.node(n).parent);
    AvailableAgents avail = available_agents(e, parent_pm, n);

    std::map<AgentId, Rational> val;
    for (AgentId a : avail.side_a) val.emplace(a, payoff(e, m, a, n));
    for (AgentId b : avail.side_b) val.emplace(b, payoff(e, m, b, n));

    // no pair of contemporaneous agents prefers each other to the matching
    for (AgentId a : avail.side_a)
      for (AgentId b : avail.side_b) {
        if (one_period_utility(e, a, b) > val.at(a) && one_period_utility(e, b, a) > val.at(b)) {
          DSWitness w;
          w.condition = DSWitness::Condition::PairBlock;
          w.node = n;
          w.node_path = e.node_path(n);
          w.pair = {a, b};
          return {false, std::move(w)};
        }
      }

    // each agent must weakly prefer the matching to some conjecture
    auto check_waiting = [&](AgentId k, DSWitness::Condition cond) -> std::optional<DSWitness> {
      if (scope == WaitingScope::MatchedOnly && partner_of(m.at(n), k) == k) return std::nullopt;
      auto stats = conjecture_stats(ctx, e, n, parent_pm, avail, k, notion);
      if (!stats->empty && val.at(k) >= stats->min_payoff) return std::nullopt;
      DSWitness w;
      w.condition = cond;
      w.node = n;
      w.node_path = e.node_path(n);
      w.agent = k;
      w.matching_payoff = val.at(k);
      w.guarantee_payoff = stats->min_payoff;
      w.conjectures_empty = stats->empty;
      if (!stats->empty)
        w.worst_conjecture = std::make_shared<Matching>(materialize_conjecture(
            e, m, n, stats->argmin_pairs, stats->argmin_cont.get(), stats->argmin_member.get()));
      return w;
    };
    for (AgentId a : avail.side_a)
      if (auto w = check_waiting(a, DSWitness::Condition::WaitingA)) return {false, std::move(*w)};
    if (notion == StabilityConcept::Full)
      for (AgentId b : avail.side_b)
        if (auto w = check_waiting(b, DSWitness::Condition::WaitingB)) return {false, std::move(*w)};
  }
  return {true, std::nullopt};
}

inline std::shared_ptr<const std::vector<Matching>> stable_set(SolveContext& ctx, const Economy& e,
                                                               StabilityConcept notion) {
  const std::string key = concept_tag(notion) + "|" + e.key();
  if (ctx.use_cache) {
    auto it = ctx.stable_sets.find(key);
    if (it != ctx.stable_sets.end()) {
      ++ctx.stats.cache_hits;
      return it->second;
    }
    ++ctx.stats.cache_misses;
  }
  auto out = std::make_shared<std::vector<Matching>>();
  for_each_matching(e, ctx.enumeration_limit, [&](const Matching& m) {
    ++ctx.stats.matchings_enumerated;
    if (stability_verdict(m, e, ctx, notion, WaitingScope::MatchedOnly).stable) out->push_back(m);
  });
  std::sort(out->begin(), out->end(), [&](const Matching& x, const Matching& y) {
    return canonical_key(x, e) < canonical_key(y, e);
  });
  if (ctx.use_cache) ctx.stable_sets.emplace(key, out);
  return out;
}

}  // namespace detail

inline DSVerdict is_dynamically_stable(const Matching& m, const Economy& e, SolveContext& ctx,
                                       WaitingScope scope = WaitingScope::MatchedOnly) {
  return detail::stability_verdict(m, e, ctx, StabilityConcept::Full, scope);
}

inline DSVerdict side_a_dynamically_stable(const Matching& m, const Economy& e, SolveContext& ctx) {
  return detail::stability_verdict(m, e, ctx, StabilityConcept::SideA, WaitingScope::MatchedOnly);
}

/// All dynamically stable matchings of the economy, sorted canonically.
inline std::vector<Matching> dynamically_stable_set(const Economy& e, SolveContext& ctx,
                                                    StabilityConcept notion = StabilityConcept::Full) {
  return *detail::stable_set(ctx, e, notion);
}

/// The exact conjecture set of agent k at node r given matching m: members
/// leave k single at r, are stable among those who match at r, follow m off
/// the subtree, and continue with a dynamically stable matching.
inline ConjectureSet conjecture_set(AgentId k, const Matching& m, NodeId r, const Economy& e,
                                    SolveContext& ctx) {
  const PeriodMatching empty;
  const PeriodMatching& parent_pm = e.node(r).parent == e.root() ? empty : m.at(e.node(r).parent);
  AvailableAgents avail = available_agents(e, parent_pm, r);
  {
    bool found = false;
    for (AgentId a : avail.side_a) found = found || a == k;
    for (AgentId b : avail.side_b) found = found || b == k;
    if (!found) throw std::invalid_argument("conjecture_set: agent not available at node");
  }

  ConjectureSet cs;
  cs.agent = k;
  cs.node = r;
  const bool terminal = e.depth(r) >= e.horizon;
  auto options = detail::period_options(ctx, e, r, avail);
  for (const auto& opt : *options) {
    bool k_single = true;
    for (const auto& [a, b] : opt.pairs)
      if (a == k || b == k) { k_single = false; break; }
    if (!k_single) continue;
    if (terminal) {
      cs.members.push_back(detail::materialize_conjecture(e, m, r, opt.pairs, nullptr, nullptr));
      continue;
    }
    PeriodMatching pairing_at_r = parent_pm;
    for (const auto& [a, b] : opt.pairs) add_pair(pairing_at_r, a, b);
    auto cont = detail::continuation_for(ctx, e, r, pairing_at_r);
    auto members = detail::stable_set(ctx, cont->economy, StabilityConcept::Full);
    for (const auto& member : *members)
      cs.members.push_back(detail::materialize_conjecture(e, m, r, opt.pairs, cont.get(), &member));
  }
  std::sort(cs.members.begin(), cs.members.end(), [&](const Matching& x, const Matching& y) {
    return canonical_key(x, e) < canonical_key(y, e);
  });
  return cs;
}

/// Why a candidate matching is (or is not) in agent k's conjecture set at r.
struct ConjectureMembership {
  enum class Reason {
    Member,
    AgentMatchedAtNode,
    DiffersOffSubtree,
    PeriodNotStableAmongMatchers,
    ContinuationNotStable,
  };
  Reason reason = Reason::Member;
  bool member() const { return reason == Reason::Member; }
  std::optional<BlockWitness> static_witness;    // for PeriodNotStableAmongMatchers
  std::optional<DSWitness> continuation_witness;  // for ContinuationNotStable
};

inline ConjectureMembership classify_conjecture(AgentId k, const Matching& m, NodeId r, const Economy& e,
                                                SolveContext& ctx, const Matching& candidate) {
  ConjectureMembership out;
  if (partner_of(candidate.at(r), k) != k) {
    out.reason = ConjectureMembership::Reason::AgentMatchedAtNode;
    return out;
  }
  if (!coincides_off_subtree(candidate, m, e, r)) {
    out.reason = ConjectureMembership::Reason::DiffersOffSubtree;
    return out;
  }
  StaticCheck sc = stable_among_matchers(candidate, e, r);
  if (!sc.stable) {
    out.reason = ConjectureMembership::Reason::PeriodNotStableAmongMatchers;
    out.static_witness = sc.witness;
    return out;
  }
  if (e.depth(r) < e.horizon) {
    auto cont = detail::continuation_for(ctx, e, r, candidate.at(r));
    const Economy& ce = cont->economy;
    // restriction of the candidate to agents yet unmatched at the end of r
    Matching rest = Matching::empty_for(ce);
    std::map<NodeId, NodeId> from_source;
    for (const auto& [cn, sn] : cont->to_source) from_source[sn] = cn;
    for (const auto& [sn, cn] : from_source) {
      if (cn == ce.root()) continue;
      for (const auto& [kk, pp] : candidate.at(sn))
        if (!candidate.at(r).count(kk)) rest.at(cn).emplace(kk, pp);
    }
    auto members = detail::stable_set(ctx, ce, StabilityConcept::Full);
    const std::string want = canonical_key(rest, ce);
    bool found = false;
    for (const auto& mem : *members)
      if (canonical_key(mem, ce) == want) { found = true; break; }
    if (!found) {
      out.reason = ConjectureMembership::Reason::ContinuationNotStable;
      out.continuation_witness =
          detail::stability_verdict(rest, ce, ctx, StabilityConcept::Full, WaitingScope::MatchedOnly)
              .witness;
      return out;
    }
  }
  out.reason = ConjectureMembership::Reason::Member;
  return out;
}

/// For a dynamically stable matching, every agent left unmatched at a node
/// can take the matching itself as their conjecture. Requires m stable.
inline bool check_self_conjecture_consistency(const Matching& m, const Economy& e, SolveContext& ctx) {
  if (!is_dynamically_stable(m, e, ctx).stable)
    throw std::invalid_argument("self-conjecture consistency requires a dynamically stable matching");
  for (NodeId n = 1; n < e.node_count(); ++n) {
    AvailableAgents avail = available_agents(e, m, n);
    auto check = [&](AgentId k) {
      if (partner_of(m.at(n), k) != k) return true;  // matched agents are out of scope
      return classify_conjecture(k, m, n, e, ctx, m).member();
    };
    for (AgentId a : avail.side_a)
      if (!check(a)) return false;
    for (AgentId b : avail.side_b)
      if (!check(b)) return false;
  }
  return true;
}

/// Diagnostic: the alternative blocking rule under which an agent blocks
/// unless every conjecture is weakly worse. Reports the (possibly empty) set;
/// not part of any stability verdict.
inline std::vector<Matching> universal_blocking_set(const Economy& e, SolveContext& ctx) {
  std::vector<Matching> out;
  for_each_matching(e, ctx.enumeration_limit, [&](const Matching& m) {
    ++ctx.stats.matchings_enumerated;
    for (NodeId n = 1; n < e.node_count(); ++n) {
      const PeriodMatching empty;
      const PeriodMatching& parent_pm = e.node(n).parent == e.root() ? empty : m.at(e.node(n).parent);
      AvailableAgents avail = available_agents(e, parent_pm, n);
      std::map<AgentId, Rational> val;
      for (AgentId a : avail.side_a) val.emplace(a, payoff(e, m, a, n));
      for (AgentId b : avail.side_b) val.emplace(b, payoff(e, m, b, n));
      for (AgentId a : avail.side_a)
        for (AgentId b : avail.side_b)
          if (one_period_utility(e, a, b) > val.at(a) && one_period_utility(e, b, a) > val.at(b)) return;
      auto ok = [&](AgentId k) {
        auto stats = detail::conjecture_stats(ctx, e, n, parent_pm, avail, k, StabilityConcept::Full);
        return stats->empty || val.at(k) >= stats->max_payoff;
      };
      for (AgentId a : avail.side_a)
        if (!ok(a)) return;
      for (AgentId b : avail.side_b)
        if (!ok(b)) return;
    }
    out.push_back(m);
  });
  std::sort(out.begin(), out.end(), [&](const Matching& x, const Matching& y) {
    return canonical_key(x, e) < canonical_key(y, e);
  });
  return out;
}

}  // namespace dynstab
