#pragma once

#include "dynstab/dynamic_stability.hpp"

namespace dynstab {

/// The payoff of an agent's worst conjecture at a node; partners below this
/// value are truncated away in the existence construction.
struct TruncationThreshold {
  AgentId agent = -1;
  NodeId node = -1;
  Rational value{0};
};

/// The payoff-minimizing member of k's conjecture set at r, assembled into a
/// full matching that follows `reference` off the subtree. Ties break by
/// canonical enumeration order.
inline std::pair<Matching, TruncationThreshold> worst_conjecture(AgentId k, NodeId r,
                                                                 const Matching& reference,
                                                                 const Economy& e, SolveContext& ctx) {
  const PeriodMatching empty;
  const PeriodMatching& parent_pm =
      e.node(r).parent == e.root() ? empty : reference.at(e.node(r).parent);
  AvailableAgents avail = available_agents(e, parent_pm, r);
  auto stats = detail::conjecture_stats(ctx, e, r, parent_pm, avail, k, StabilityConcept::Full);
  if (stats->empty) throw std::runtime_error("worst_conjecture: empty conjecture set");
  TruncationThreshold th{k, r, stats->min_payoff};
  Matching m = detail::materialize_conjecture(e, reference, r, stats->argmin_pairs,
                                              stats->argmin_cont.get(), stats->argmin_member.get());
  return {std::move(m), th};
}

/// Preference lists truncated at each agent's threshold: contemporaneous
/// partners with utility weakly above it, best first.
inline std::map<AgentId, PreferenceList> truncated_lists(const Economy& e, const AvailableAgents& avail,
                                                         const std::map<AgentId, Rational>& thresholds) {
  std::map<AgentId, PreferenceList> lists;
  for (AgentId a : avail.side_a)
    lists.emplace(a, build_preference_list(e, a, avail.side_b, thresholds.at(a)));
  for (AgentId b : avail.side_b)
    lists.emplace(b, build_preference_list(e, b, avail.side_a, thresholds.at(b)));
  return lists;
}

/// Constructive existence: at every interior node, truncate each available
/// agent's list at the payoff of their worst conjecture and run side-A
/// deferred acceptance; at terminal nodes run deferred acceptance with
/// individually-rational untruncated lists. The output is dynamically stable.
inline Matching construct_stable_matching(const Economy& e, SolveContext& ctx) {
  Matching m = Matching::empty_for(e);
  for (NodeId n = 1; n < e.node_count(); ++n) {  // preorder: parents first
    const PeriodMatching empty;
    const PeriodMatching& parent_pm = e.node(n).parent == e.root() ? empty : m.at(e.node(n).parent);
    AvailableAgents avail = available_agents(e, parent_pm, n);

    std::map<AgentId, PreferenceList> lists;
    if (e.depth(n) < e.horizon) {
      std::map<AgentId, Rational> thresholds;
      auto threshold_of = [&](AgentId k) {
        auto stats = detail::conjecture_stats(ctx, e, n, parent_pm, avail, k, StabilityConcept::Full);
        return stats->empty ? Rational{0} : stats->min_payoff;
      };
      for (AgentId a : avail.side_a) thresholds.emplace(a, threshold_of(a));
      for (AgentId b : avail.side_b) thresholds.emplace(b, threshold_of(b));
      lists = truncated_lists(e, avail, thresholds);
    } else {
      for (AgentId a : avail.side_a)
        lists.emplace(a, build_preference_list(e, a, avail.side_b, Rational{0}));
      for (AgentId b : avail.side_b)
        lists.emplace(b, build_preference_list(e, b, avail.side_a, Rational{0}));
    }
    PeriodMatching pm = deferred_acceptance(avail.side_a, avail.side_b, lists, Side::A);
    for (const auto& [k, p] : parent_pm) pm.emplace(k, p);
    m.at(n) = std::move(pm);
  }
  return m;
}

namespace detail {

struct DynamicDaSetup {
  NodeId node1 = -1;
  NodeId node2 = -1;
  std::vector<AgentId> all_a, all_b;
  std::map<AgentId, int> arrival;
};

inline DynamicDaSetup dynamic_da_setup(const Economy& e) {
  if (e.horizon != 2) throw UnsupportedConfiguration("dynamic deferred acceptance requires horizon 2");
  const auto& root = e.node(e.root());
  if (root.children.size() != 1) throw UnsupportedConfiguration("dynamic deferred acceptance requires a deterministic economy");
  DynamicDaSetup s;
  s.node1 = root.children[0];
  if (e.node(s.node1).children.size() != 1)
    throw UnsupportedConfiguration("dynamic deferred acceptance requires a deterministic economy");
  s.node2 = e.node(s.node1).children[0];
  for (NodeId n : {s.node1, s.node2}) {
    for (AgentId a : e.node(n).event.side_a) {
      s.all_a.push_back(a);
      s.arrival[a] = e.depth(n);
    }
    for (AgentId b : e.node(n).event.side_b) {
      s.all_b.push_back(b);
      s.arrival[b] = e.depth(n);
    }
  }
  std::sort(s.all_a.begin(), s.all_a.end());
  std::sort(s.all_b.begin(), s.all_b.end());
  return s;
}

inline Matching dynamic_da_run(const Economy& e, Side proposer, std::optional<AgentId> delayed) {
  DynamicDaSetup s = dynamic_da_setup(e);
  auto arrival_of = [&](AgentId k) {
    int arr = s.arrival.at(k);
    if (delayed && *delayed == k) arr = 2;
    return arr;
  };
  // a cross-period pair consummates at its later member's arrival
  auto valuation = [&](AgentId k, AgentId p) {
    int date = std::max(arrival_of(k), arrival_of(p));
    return rational_pow(e.table.delta_of(e.agent(k).characteristic), date - arrival_of(k)) *
           one_period_utility(e, k, p);
  };

  const std::vector<AgentId>& proposers = proposer == Side::A ? s.all_a : s.all_b;
  const std::vector<AgentId>& receivers = proposer == Side::A ? s.all_b : s.all_a;

  std::map<AgentId, std::vector<AgentId>> prop_lists;
  for (AgentId p : proposers) {
    std::vector<std::pair<Rational, AgentId>> scored;
    for (AgentId r : receivers) {
      Rational val = valuation(p, r);
      if (val >= 0) scored.push_back({val, r});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    for (const auto& [val, r] : scored) prop_lists[p].push_back(r);
  }

  std::map<AgentId, std::size_t> next;
  std::map<AgentId, AgentId> held;
  std::vector<AgentId> free = proposers;
  auto prefers = [&](AgentId receiver, AgentId cand, AgentId incumbent) {
    Rational vc = valuation(receiver, cand), vi = valuation(receiver, incumbent);
    if (vc != vi) return vc > vi;
    return cand < incumbent;
  };
  while (!free.empty()) {
    AgentId p = free.front();
    free.erase(free.begin());
    auto& lst = prop_lists[p];
    std::size_t& idx = next[p];
    while (idx < lst.size()) {
      AgentId r = lst[idx];
      ++idx;
      if (valuation(r, p) < 0) continue;
      auto it = held.find(r);
      if (it == held.end()) {
        held[r] = p;
        break;
      }
      if (prefers(r, p, it->second)) {
        free.push_back(it->second);
        it->second = p;
        break;
      }
    }
  }

  Matching m = Matching::empty_for(e);
  for (const auto& [r, p] : held) {
    int date = std::max(arrival_of(r), arrival_of(p));
    if (date <= 1) add_pair(m.at(s.node1), p, r);
    add_pair(m.at(s.node2), p, r);
  }
  return m;
}

}  // namespace detail

/// One-shot deferred acceptance over both cohorts of a two-period
/// deterministic economy, proposals and acceptances evaluated with
/// intertemporal discounted utilities. Cross-period pairs match at the later
/// arrival date.
inline Matching dynamic_deferred_acceptance(const Economy& e, Side proposer) {
  return detail::dynamic_da_run(e, proposer, std::nullopt);
}

/// Variant in which one period-1 agent is treated as arriving in period 2 on
/// both sides of every evaluation; the waiting agent's conjecture in the
/// timely-participation analysis.
inline Matching dynamic_deferred_acceptance_delayed(const Economy& e, Side proposer, AgentId delayed) {
  return detail::dynamic_da_run(e, proposer, delayed);
}

}  // namespace dynstab
