#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dynstab/economy.hpp"

namespace dynstab {

/// Symmetric pairing over agents; only matched agents appear (an absent agent
/// is single). Stored cumulatively per node: the pairing at a node records
/// every match made at or before that node.
using PeriodMatching = std::map<AgentId, AgentId>;

inline AgentId partner_of(const PeriodMatching& pm, AgentId k) {
  auto it = pm.find(k);
  return it == pm.end() ? k : it->second;
}

inline void add_pair(PeriodMatching& pm, AgentId a, AgentId b) {
  pm[a] = b;
  pm[b] = a;
}

/// A matching for the whole economy: one cumulative pairing per tree node.
struct Matching {
  std::vector<PeriodMatching> per_node;  // indexed by NodeId; root entry empty

  static Matching empty_for(const Economy& e) {
    Matching m;
    m.per_node.assign(static_cast<std::size_t>(e.node_count()), PeriodMatching{});
    return m;
  }
  const PeriodMatching& at(NodeId n) const { return per_node.at(static_cast<std::size_t>(n)); }
  PeriodMatching& at(NodeId n) { return per_node.at(static_cast<std::size_t>(n)); }

  bool operator==(const Matching& o) const = default;
};

/// Deterministic serialization; used for set membership, dedup and sorting.
inline std::string canonical_key(const Matching& m, const Economy& e) {
  std::ostringstream os;
  for (NodeId n = 0; n < e.node_count(); ++n) {
    os << n << ":";
    for (const auto& [k, p] : m.at(n))
      if (k < p) os << k << "-" << p << ",";
    os << ";";
  }
  return os.str();
}

struct AvailableAgents {
  std::vector<AgentId> side_a;
  std::vector<AgentId> side_b;
};

/// Agents who can match at node r: those who arrived before r and are single
/// under the parent pairing, plus the period arrivals at r.
inline AvailableAgents available_agents(const Economy& e, const PeriodMatching& parent_pairing, NodeId r) {
  if (r == e.root()) throw std::invalid_argument("available_agents: root has no arrivals");
  AvailableAgents out;
  const auto& nd = e.node(r);
  if (nd.depth > 1) {
    auto [as, bs] = e.cumulative_arrivals(nd.parent, nd.depth - 1);
    for (AgentId a : as)
      if (partner_of(parent_pairing, a) == a) out.side_a.push_back(a);
    for (AgentId b : bs)
      if (partner_of(parent_pairing, b) == b) out.side_b.push_back(b);
  }
  out.side_a.insert(out.side_a.end(), nd.event.side_a.begin(), nd.event.side_a.end());
  out.side_b.insert(out.side_b.end(), nd.event.side_b.begin(), nd.event.side_b.end());
  std::sort(out.side_a.begin(), out.side_a.end());
  std::sort(out.side_b.begin(), out.side_b.end());
  return out;
}

inline AvailableAgents available_agents(const Economy& e, const Matching& m, NodeId r) {
  if (r == e.root()) throw std::invalid_argument("available_agents: root has no arrivals");
  const PeriodMatching empty;
  const auto& nd = e.node(r);
  return available_agents(e, nd.parent == e.root() ? empty : m.at(nd.parent), r);
}

/// Agents newly matched at node r, per side. Always subsets of the available
/// agents there.
struct MatchedSets {
  std::vector<AgentId> side_a;
  std::vector<AgentId> side_b;
};

inline MatchedSets matched_sets(const Matching& m, const Economy& e, NodeId r) {
  MatchedSets out;
  AvailableAgents avail = available_agents(e, m, r);
  const PeriodMatching& pm = m.at(r);
  for (AgentId a : avail.side_a)
    if (partner_of(pm, a) != a) out.side_a.push_back(a);
  for (AgentId b : avail.side_b)
    if (partner_of(pm, b) != b) out.side_b.push_back(b);
  return out;
}

/// A continuation economy together with the node correspondence back into the
/// parent economy. Depth-1 events absorb the unmatched leftovers, so child
/// order can differ from the source order after canonical sorting.
struct ContinuationEconomy {
  Economy economy;
  std::map<NodeId, NodeId> to_source;  // continuation node -> source node (root maps to r)
};

/// Continuation of `e` below node r (depth t < horizon), given the cumulative
/// pairing at r: horizon shrinks to T-t, leftover singles join the next
/// arrival event on each branch, branch probabilities are already conditional
/// on r.
inline ContinuationEconomy continuation_economy(const Economy& e, const PeriodMatching& pairing_at_r,
                                                NodeId r) {
  const auto& nd = e.node(r);
  if (nd.depth >= e.horizon)
    throw std::invalid_argument("continuation_economy: empty horizon at a terminal node");

  std::vector<AgentId> left_a, left_b;
  {
    auto [as, bs] = e.cumulative_arrivals(r, nd.depth);
    for (AgentId a : as)
      if (partner_of(pairing_at_r, a) == a) left_a.push_back(a);
    for (AgentId b : bs)
      if (partner_of(pairing_at_r, b) == b) left_b.push_back(b);
  }

  ContinuationEconomy out;
  Economy& ce = out.economy;
  ce.horizon = e.horizon - nd.depth;
  ce.table = e.table;
  ce.arrival_bound = e.arrival_bound;
  ce.nodes.push_back(EconomyNode{});
  out.to_source[0] = r;

  std::set<AgentId> appearing(left_a.begin(), left_a.end());
  appearing.insert(left_b.begin(), left_b.end());

  struct Item {
    NodeId src;
    NodeId dst_parent;
    bool fold_leftovers;
  };
  // children sorted by their folded event keys; deeper levels copy verbatim
  std::vector<std::pair<std::string, NodeId>> order;
  for (NodeId c : nd.children) {
    ArrivalEvent ev = e.node(c).event;
    ev.side_a.insert(ev.side_a.end(), left_a.begin(), left_a.end());
    ev.side_b.insert(ev.side_b.end(), left_b.begin(), left_b.end());
    ev.normalize();
    order.push_back({ev.key(), c});
  }
  std::sort(order.begin(), order.end());

  std::function<void(NodeId, NodeId, bool)> copy_subtree = [&](NodeId src, NodeId dst_parent,
                                                               bool fold) {
    const auto& snd = e.node(src);
    EconomyNode cnd;
    cnd.event = snd.event;
    if (fold) {
      cnd.event.side_a.insert(cnd.event.side_a.end(), left_a.begin(), left_a.end());
      cnd.event.side_b.insert(cnd.event.side_b.end(), left_b.begin(), left_b.end());
      cnd.event.normalize();
    }
    cnd.prob = snd.prob;
    cnd.parent = dst_parent;
    cnd.depth = ce.nodes[static_cast<std::size_t>(dst_parent)].depth + 1;
    ce.nodes.push_back(cnd);
    NodeId self = static_cast<NodeId>(ce.nodes.size()) - 1;
    ce.nodes[static_cast<std::size_t>(dst_parent)].children.push_back(self);
    out.to_source[self] = src;
    for (AgentId a : snd.event.side_a) appearing.insert(a);
    for (AgentId b : snd.event.side_b) appearing.insert(b);
    for (NodeId c : snd.children) copy_subtree(c, self, false);
  };
  for (const auto& [key, c] : order) copy_subtree(c, 0, true);

  for (AgentId id : appearing) ce.roster.emplace(id, e.agent(id));
  return out;
}

/// Checks involution, side-correctness, availability of newly matched agents,
/// irreversibility, and that the pairing at each node extends its parent's.
inline ValidationResult validate_matching(const Matching& m, const Economy& e) {
  ValidationResult res;
  if (static_cast<int>(m.per_node.size()) != e.node_count()) {
    res.add("", "matching defined on " + std::to_string(m.per_node.size()) + " nodes, economy has " +
                   std::to_string(e.node_count()));
    return res;
  }
  if (!m.at(e.root()).empty()) res.add("", "root pairing must be empty");
  for (NodeId n = 1; n < e.node_count(); ++n) {
    const std::string path = e.node_path(n);
    const PeriodMatching& pm = m.at(n);
    const auto& nd = e.node(n);
    auto [as, bs] = e.cumulative_arrivals(n, nd.depth);
    for (const auto& [k, p] : pm) {
      if (k == p) {
        res.add(path, "self-pairing entry for agent " + std::to_string(k));
        continue;
      }
      if (!e.has_agent(k) || !e.has_agent(p)) {
        res.add(path, "pairing references unknown agent");
        continue;
      }
      if (partner_of(pm, p) != k) res.add(path, "pairing is not an involution at agent " + std::to_string(k));
      if (e.agent(k).side == e.agent(p).side)
        res.add(path, "same-side pairing " + std::to_string(k) + "-" + std::to_string(p));
      const auto& cum = e.agent(k).side == Side::A ? as : bs;
      if (!std::binary_search(cum.begin(), cum.end(), k))
        res.add(path, "agent " + std::to_string(k) + " matched before arriving (partner not yet arrived)");
    }
    // extends the parent pairing and matches only available agents
    const PeriodMatching empty;
    const PeriodMatching& parent_pm = nd.parent == e.root() ? empty : m.at(nd.parent);
    for (const auto& [k, p] : parent_pm) {
      if (partner_of(pm, k) != p)
        res.add(path, "irreversibility violated: agent " + std::to_string(k) + " re-paired");
    }
    AvailableAgents avail = available_agents(e, parent_pm, n);
    for (const auto& [k, p] : pm) {
      if (parent_pm.count(k)) continue;  // carried through
      const auto& pool = e.has_agent(k) && e.agent(k).side == Side::A ? avail.side_a : avail.side_b;
      if (!std::binary_search(pool.begin(), pool.end(), k))
        res.add(path, "agent " + std::to_string(k) + " newly matched while unavailable");
    }
  }
  return res;
}

/// True iff m1 and m2 agree at every node that does not weakly follow r
/// (ancestors, siblings, and unrelated branches).
inline bool coincides_off_subtree(const Matching& m1, const Matching& m2, const Economy& e, NodeId r) {
  if (r < 0 || r >= e.node_count()) throw std::out_of_range("coincides_off_subtree: node out of range");
  for (NodeId n = 0; n < e.node_count(); ++n) {
    if (e.weakly_follows(n, r)) continue;
    if (m1.at(n) != m2.at(n)) return false;
  }
  return true;
}

/// All ways to newly match the available agents at one node: every partial
/// injection from side A to side B. Canonical order: side-A agents ascending,
/// each choosing "single" before partners in ascending index order.
inline std::vector<std::vector<std::pair<AgentId, AgentId>>> enumerate_period_matchings(
    const std::vector<AgentId>& side_a, const std::vector<AgentId>& side_b) {
  std::vector<std::vector<std::pair<AgentId, AgentId>>> out;
  std::vector<std::pair<AgentId, AgentId>> cur;
  std::vector<bool> used(side_b.size(), false);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == side_a.size()) {
      out.push_back(cur);
      return;
    }
    rec(i + 1);  // side_a[i] stays single
    for (std::size_t j = 0; j < side_b.size(); ++j) {
      if (used[j]) continue;
      used[j] = true;
      cur.push_back({side_a[i], side_b[j]});
      rec(i + 1);
      cur.pop_back();
      used[j] = false;
    }
  };
  rec(0);
  return out;
}

namespace detail {

inline std::string leftover_key(const std::vector<AgentId>& a, const std::vector<AgentId>& b) {
  std::ostringstream os;
  for (AgentId x : a) os << x << ",";
  os << "|";
  for (AgentId x : b) os << x << ",";
  return os.str();
}

// saturating ops against overflow; the cap only needs to exceed any usable limit
inline std::uint64_t sat_add(std::uint64_t x, std::uint64_t y) {
  return x > UINT64_MAX - y ? UINT64_MAX : x + y;
}
inline std::uint64_t sat_mul(std::uint64_t x, std::uint64_t y) {
  if (x == 0 || y == 0) return 0;
  return x > UINT64_MAX / y ? UINT64_MAX : x * y;
}

inline std::uint64_t count_matchings_below(const Economy& e, NodeId n, std::vector<AgentId> left_a,
                                           std::vector<AgentId> left_b,
                                           std::map<std::string, std::uint64_t>& memo) {
  const std::string key = std::to_string(n) + "#" + leftover_key(left_a, left_b);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;

  std::vector<AgentId> as = left_a, bs = left_b;
  const auto& ev = e.node(n).event;
  as.insert(as.end(), ev.side_a.begin(), ev.side_a.end());
  bs.insert(bs.end(), ev.side_b.begin(), ev.side_b.end());
  std::sort(as.begin(), as.end());
  std::sort(bs.begin(), bs.end());

  std::uint64_t total = 0;
  for (const auto& pairs : enumerate_period_matchings(as, bs)) {
    std::set<AgentId> matched;
    for (const auto& [a, b] : pairs) {
      matched.insert(a);
      matched.insert(b);
    }
    std::vector<AgentId> rest_a, rest_b;
    for (AgentId a : as)
      if (!matched.count(a)) rest_a.push_back(a);
    for (AgentId b : bs)
      if (!matched.count(b)) rest_b.push_back(b);
    std::uint64_t prod = 1;
    for (NodeId c : e.node(n).children)
      prod = sat_mul(prod, count_matchings_below(e, c, rest_a, rest_b, memo));
    total = sat_add(total, prod);
  }
  memo[key] = total;
  return total;
}

}  // namespace detail

/// Exact number of valid matchings, computed without enumerating them.
inline std::uint64_t count_matchings(const Economy& e) {
  std::map<std::string, std::uint64_t> memo;
  std::uint64_t total = 1;
  for (NodeId c : e.node(e.root()).children)
    total = detail::sat_mul(total, detail::count_matchings_below(e, c, {}, {}, memo));
  return total;
}

/// Visits every valid matching exactly once in deterministic order (nodes in
/// breadth-first order, pairings per node in canonical order). Throws
/// EconomyTooLarge before visiting anything if the total exceeds `limit`.
inline std::uint64_t for_each_matching(const Economy& e, std::uint64_t limit,
                                       const std::function<void(const Matching&)>& visit) {
  if (count_matchings(e) > limit) throw EconomyTooLarge(limit);

  std::vector<NodeId> order;  // breadth-first: periods outer to inner
  for (int d = 1; d <= e.horizon; ++d)
    for (NodeId n = 0; n < e.node_count(); ++n)
      if (e.depth(n) == d) order.push_back(n);

  Matching m = Matching::empty_for(e);
  std::uint64_t produced = 0;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == order.size()) {
      ++produced;
      visit(m);
      return;
    }
    NodeId n = order[i];
    const PeriodMatching empty;
    const PeriodMatching& parent_pm = e.node(n).parent == e.root() ? empty : m.at(e.node(n).parent);
    AvailableAgents avail = available_agents(e, parent_pm, n);
    for (const auto& pairs : enumerate_period_matchings(avail.side_a, avail.side_b)) {
      PeriodMatching pm = parent_pm;
      for (const auto& [a, b] : pairs) add_pair(pm, a, b);
      m.at(n) = std::move(pm);
      rec(i + 1);
    }
    m.at(n).clear();
  };
  rec(0);
  return produced;
}

inline std::vector<Matching> enumerate_matchings(const Economy& e,
                                                 std::uint64_t limit = kDefaultEnumerationLimit) {
  std::vector<Matching> out;
  for_each_matching(e, limit, [&](const Matching& m) { out.push_back(m); });
  return out;
}

}  // namespace dynstab
