#pragma once

#include <optional>

#include "dynstab/payoff.hpp"

namespace dynstab {

/// A strict rank-ordered list of acceptable partners; anyone absent is
/// unacceptable.
struct PreferenceList {
  AgentId owner = -1;
  std::vector<AgentId> ranking;

  /// Position in the list, or npos when unlisted.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t rank_of(AgentId k) const {
    for (std::size_t i = 0; i < ranking.size(); ++i)
      if (ranking[i] == k) return i;
    return npos;
  }
};

struct BlockWitness {
  enum class Kind { PairBlock, IrViolation };
  Kind kind = Kind::PairBlock;
  AgentId first = -1;                 // pair block: the side-A member; IR: the hurt agent
  std::optional<AgentId> second;      // pair block: the side-B member; IR: the partner
  NodeId node = -1;
};

struct StaticCheck {
  bool stable = true;
  std::optional<BlockWitness> witness;
};

/// One-period stability of `pm` over the given agents: no pair strictly
/// prefers each other to their assignments, and everyone matched weakly
/// prefers their partner to staying single. Blocking pairs are scanned before
/// IR so a pair witness is reported when both defects exist.
inline StaticCheck static_stable(const Economy& e, const PeriodMatching& pm,
                                 const std::vector<AgentId>& side_a, const std::vector<AgentId>& side_b,
                                 NodeId node = -1) {
  for (AgentId a : side_a) {
    Rational cur_a = one_period_utility(e, a, partner_of(pm, a));
    for (AgentId b : side_b) {
      if (partner_of(pm, a) == b) continue;
      Rational cur_b = one_period_utility(e, b, partner_of(pm, b));
      if (one_period_utility(e, a, b) > cur_a && one_period_utility(e, b, a) > cur_b)
        return {false, BlockWitness{BlockWitness::Kind::PairBlock, a, b, node}};
    }
  }
  for (AgentId a : side_a) {
    AgentId p = partner_of(pm, a);
    if (p != a && one_period_utility(e, a, p) < 0)
      return {false, BlockWitness{BlockWitness::Kind::IrViolation, a, p, node}};
  }
  for (AgentId b : side_b) {
    AgentId p = partner_of(pm, b);
    if (p != b && one_period_utility(e, b, p) < 0)
      return {false, BlockWitness{BlockWitness::Kind::IrViolation, b, p, node}};
  }
  return {true, std::nullopt};
}

/// Every matched agent at every leaf weakly prefers their partner to staying
/// single through the horizon.
inline std::pair<bool, std::optional<BlockWitness>> is_individually_rational(const Matching& m,
                                                                             const Economy& e) {
  for (NodeId n = 0; n < e.node_count(); ++n) {
    if (!e.is_leaf(n)) continue;
    for (const auto& [k, p] : m.at(n)) {
      if (one_period_utility(e, k, p) < 0)
        return {false, BlockWitness{BlockWitness::Kind::IrViolation, k, p, n}};
    }
  }
  return {true, std::nullopt};
}

/// The period matching at r restricted to the agents who actually match there
/// must be statically stable.
inline StaticCheck stable_among_matchers(const Matching& m, const Economy& e, NodeId r) {
  MatchedSets ms = matched_sets(m, e, r);
  return static_stable(e, m.at(r), ms.side_a, ms.side_b, r);
}

enum class TieBreak { AscendingIndex };

/// Partners with utility >= `min_acceptable`, ordered by utility descending,
/// ties by ascending index.
inline PreferenceList build_preference_list(const Economy& e, AgentId owner,
                                            const std::vector<AgentId>& candidates,
                                            const Rational& min_acceptable,
                                            TieBreak = TieBreak::AscendingIndex) {
  PreferenceList list;
  list.owner = owner;
  std::vector<std::pair<Rational, AgentId>> scored;
  for (AgentId c : candidates) {
    Rational util = one_period_utility(e, owner, c);
    if (util >= min_acceptable) scored.push_back({util, c});
  }
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  for (const auto& [util, c] : scored) list.ranking.push_back(c);
  return list;
}

/// Proposer-side deferred acceptance over the submitted lists. Output is the
/// proposer-optimal matching that is stable with respect to the reports:
/// agents match only listed partners and no listed pair blocks. Lists are
/// strict, so ties can only enter through list construction.
inline PeriodMatching deferred_acceptance(const std::vector<AgentId>& side_a,
                                          const std::vector<AgentId>& side_b,
                                          const std::map<AgentId, PreferenceList>& lists, Side proposer,
                                          TieBreak = TieBreak::AscendingIndex) {
  const std::vector<AgentId>& proposers = proposer == Side::A ? side_a : side_b;
  const std::vector<AgentId>& receivers = proposer == Side::A ? side_b : side_a;
  for (AgentId k : proposers)
    if (!lists.count(k)) throw std::invalid_argument("deferred_acceptance: missing list for proposer");
  for (AgentId k : receivers)
    if (!lists.count(k)) throw std::invalid_argument("deferred_acceptance: missing list for receiver");

  std::map<AgentId, std::size_t> next_proposal;  // index into own ranking
  std::map<AgentId, AgentId> held;               // receiver -> held proposer
  std::vector<AgentId> free = proposers;

  while (!free.empty()) {
    AgentId p = free.front();
    free.erase(free.begin());
    const PreferenceList& plist = lists.at(p);
    std::size_t& idx = next_proposal[p];
    while (idx < plist.ranking.size()) {
      AgentId r = plist.ranking[idx];
      ++idx;
      const PreferenceList& rlist = lists.at(r);
      std::size_t rank_p = rlist.rank_of(p);
      if (rank_p == PreferenceList::npos) continue;  // p unacceptable to r
      auto it = held.find(r);
      if (it == held.end()) {
        held[r] = p;
        break;
      }
      std::size_t rank_cur = rlist.rank_of(it->second);
      if (rank_p < rank_cur) {
        free.push_back(it->second);
        it->second = p;
        break;
      }
    }
  }

  PeriodMatching out;
  for (const auto& [r, p] : held) add_pair(out, p, r);
  return out;
}

/// A submitted profile is report-stable when nobody is matched to an unlisted
/// partner and no two agents rank each other above their assignments.
inline bool stable_wrt_reports(const PeriodMatching& pm, const std::vector<AgentId>& side_a,
                               const std::vector<AgentId>& side_b,
                               const std::map<AgentId, PreferenceList>& lists) {
  auto rank = [&](AgentId owner, AgentId k) {
    auto it = lists.find(owner);
    return it == lists.end() ? PreferenceList::npos : it->second.rank_of(k);
  };
  for (AgentId a : side_a) {
    AgentId p = partner_of(pm, a);
    if (p != a && rank(a, p) == PreferenceList::npos) return false;
  }
  for (AgentId b : side_b) {
    AgentId p = partner_of(pm, b);
    if (p != b && rank(b, p) == PreferenceList::npos) return false;
  }
  for (AgentId a : side_a) {
    std::size_t cur_a = partner_of(pm, a) == a ? PreferenceList::npos : rank(a, partner_of(pm, a));
    for (AgentId b : side_b) {
      if (partner_of(pm, a) == b) continue;
      std::size_t ab = rank(a, b);
      std::size_t ba = rank(b, a);
      if (ab == PreferenceList::npos || ba == PreferenceList::npos) continue;
      std::size_t cur_b = partner_of(pm, b) == b ? PreferenceList::npos : rank(b, partner_of(pm, b));
      if (ab < cur_a && ba < cur_b) return false;
    }
  }
  return true;
}

}  // namespace dynstab
