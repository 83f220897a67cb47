#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dynstab/common.hpp"

namespace dynstab {

/// An agent is an indexed individual carrying a characteristic label; two
/// agents may share a characteristic. Equality of agents is index equality,
/// never characteristic equality.
struct Agent {
  AgentId id = 0;
  Side side = Side::A;
  std::string characteristic;
};

/// Bernoulli utilities and discount factors, keyed by characteristic. u and v
/// are total on side-A x side-B characteristic pairs; the self-match payoff is
/// zero by convention and is never stored.
struct CharacteristicTable {
  std::vector<std::string> side_a;
  std::vector<std::string> side_b;
  std::map<std::pair<std::string, std::string>, Rational> u;  // (aChar, bChar)
  std::map<std::pair<std::string, std::string>, Rational> v;  // (aChar, bChar)
  std::map<std::string, Rational> delta;

  const Rational& u_of(const std::string& a, const std::string& b) const {
    auto it = u.find({a, b});
    if (it == u.end()) throw std::out_of_range("u(" + a + "," + b + ") undefined");
    return it->second;
  }
  const Rational& v_of(const std::string& a, const std::string& b) const {
    auto it = v.find({a, b});
    if (it == v.end()) throw std::out_of_range("v(" + a + "," + b + ") undefined");
    return it->second;
  }
  const Rational& delta_of(const std::string& c) const {
    auto it = delta.find(c);
    if (it == delta.end()) throw std::out_of_range("delta(" + c + ") undefined");
    return it->second;
  }
};

/// One period's arrivals, id lists kept sorted.
struct ArrivalEvent {
  std::vector<AgentId> side_a;
  std::vector<AgentId> side_b;

  bool operator==(const ArrivalEvent& o) const = default;

  void normalize() {
    std::sort(side_a.begin(), side_a.end());
    std::sort(side_b.begin(), side_b.end());
  }

  /// Deterministic serialization; also the canonical child-ordering key.
  std::string key() const {
    std::ostringstream os;
    os << "A[";
    for (AgentId a : side_a) os << a << ",";
    os << "]B[";
    for (AgentId b : side_b) os << b << ",";
    os << "]";
    return os.str();
  }
};

/// A realization of length t is the ordered list of its arrival events.
using Realization = std::vector<ArrivalEvent>;

/// True iff `shorter` is a truncation of `longer` (every realization is a
/// truncation of itself).
inline bool follows(const Realization& longer, const Realization& shorter) {
  if (shorter.size() > longer.size()) return false;
  for (std::size_t i = 0; i < shorter.size(); ++i)
    if (!(longer[i] == shorter[i])) return false;
  return true;
}

using NodeId = int;

struct EconomyNode {
  ArrivalEvent event;   // empty at the root
  Rational prob{1};     // edge probability from the parent
  NodeId parent = -1;
  int depth = 0;
  std::vector<NodeId> children;
};

constexpr int kDefaultArrivalBound = 64;  // K: cap on per-event arrivals

/// A finite-horizon economy: the arrival distribution represented
/// extensionally as a rooted tree of depth `horizon` whose depth-t nodes are
/// realizations of length t. Immutable after construction; children are kept
/// in canonical (event-key) order so enumeration and memoization are
/// reproducible.
class Economy {
 public:
  int horizon = 1;
  CharacteristicTable table;
  std::map<AgentId, Agent> roster;
  std::vector<EconomyNode> nodes;  // preorder, nodes[0] is the depth-0 root
  int arrival_bound = kDefaultArrivalBound;

  NodeId root() const { return 0; }
  int node_count() const { return static_cast<int>(nodes.size()); }
  const EconomyNode& node(NodeId n) const { return nodes.at(static_cast<std::size_t>(n)); }
  bool is_leaf(NodeId n) const { return node(n).children.empty(); }
  int depth(NodeId n) const { return node(n).depth; }

  const Agent& agent(AgentId id) const {
    auto it = roster.find(id);
    if (it == roster.end()) throw std::out_of_range("unknown agent id " + std::to_string(id));
    return it->second;
  }
  bool has_agent(AgentId id) const { return roster.count(id) != 0; }

  Realization realization_of(NodeId n) const {
    Realization r;
    for (NodeId cur = n; cur != root(); cur = node(cur).parent) r.push_back(node(cur).event);
    std::reverse(r.begin(), r.end());
    return r;
  }

  std::optional<NodeId> find_node(const Realization& r) const {
    NodeId cur = root();
    for (const ArrivalEvent& ev : r) {
      std::optional<NodeId> next;
      for (NodeId c : node(cur).children)
        if (node(c).event == ev) { next = c; break; }
      if (!next) return std::nullopt;
      cur = *next;
    }
    return cur;
  }

  /// True iff `descendant` weakly follows `ancestor` in the tree.
  bool weakly_follows(NodeId descendant, NodeId ancestor) const {
    NodeId cur = descendant;
    while (cur != -1) {
      if (cur == ancestor) return true;
      cur = node(cur).parent;
    }
    return false;
  }

  /// Probability of reaching `descendant` conditional on being at `ancestor`.
  Rational conditional_probability(NodeId ancestor, NodeId descendant) const {
    Rational p{1};
    NodeId cur = descendant;
    while (cur != ancestor) {
      if (cur == -1) throw std::invalid_argument("node does not follow ancestor");
      p *= node(cur).prob;
      cur = node(cur).parent;
    }
    return p;
  }

  /// Slash-joined child indices from the root, e.g. "0/1". The root is "".
  std::string node_path(NodeId n) const {
    std::vector<int> idx;
    for (NodeId cur = n; cur != root(); cur = node(cur).parent) {
      const auto& sibs = node(node(cur).parent).children;
      idx.push_back(static_cast<int>(std::find(sibs.begin(), sibs.end(), cur) - sibs.begin()));
    }
    std::reverse(idx.begin(), idx.end());
    std::string out;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i) out += '/';
      out += std::to_string(idx[i]);
    }
    return out;
  }

  std::optional<NodeId> node_by_path(const std::string& path) const {
    NodeId cur = root();
    if (path.empty()) return cur;
    std::istringstream is(path);
    std::string tok;
    while (std::getline(is, tok, '/')) {
      std::size_t idx = 0;
      try {
        idx = static_cast<std::size_t>(std::stoul(tok));
      } catch (const std::exception&) {
        return std::nullopt;
      }
      if (idx >= node(cur).children.size()) return std::nullopt;
      cur = node(cur).children[idx];
    }
    return cur;
  }

  /// Cumulative arrivals (A-bar_s, B-bar_s) through period s along the path
  /// to `n`. Requires 1 <= s <= depth(n).
  std::pair<std::vector<AgentId>, std::vector<AgentId>> cumulative_arrivals(NodeId n, int s) const {
    if (s < 1 || s > depth(n)) throw std::out_of_range("cumulative_arrivals: period out of range");
    std::vector<AgentId> as, bs;
    Realization r = realization_of(n);
    for (int i = 0; i < s; ++i) {
      as.insert(as.end(), r[static_cast<std::size_t>(i)].side_a.begin(), r[static_cast<std::size_t>(i)].side_a.end());
      bs.insert(bs.end(), r[static_cast<std::size_t>(i)].side_b.begin(), r[static_cast<std::size_t>(i)].side_b.end());
    }
    std::sort(as.begin(), as.end());
    std::sort(bs.begin(), bs.end());
    return {as, bs};
  }

  /// Canonical structural serialization (roster, tree shape, events,
  /// probabilities). Economies sharing one characteristic table compare equal
  /// iff their keys match; used as the memoization key for stable sets.
  const std::string& key() const {
    if (cached_key_.empty()) cached_key_ = compute_key();
    return cached_key_;
  }

 private:
  mutable std::string cached_key_;

  std::string compute_key() const {
    std::ostringstream os;
    os << "T" << horizon << ";R{";
    for (const auto& [id, ag] : roster)
      os << id << ":" << side_name(ag.side) << ":" << ag.characteristic << ";";
    os << "}N{";
    for (const auto& nd : nodes)
      os << nd.parent << "|" << nd.event.key() << "|" << rational_str(nd.prob) << ";";
    os << "}";
    return os.str();
  }
};

/// Tree specification used by builders and the JSON parser.
struct NodeSpec {
  ArrivalEvent event;
  Rational prob{1};
  std::vector<NodeSpec> children;
};

namespace detail {
inline void append_subtree(Economy& e, const NodeSpec& spec, NodeId parent) {
  EconomyNode nd;
  nd.event = spec.event;
  nd.event.normalize();
  nd.prob = spec.prob;
  nd.parent = parent;
  nd.depth = e.nodes[static_cast<std::size_t>(parent)].depth + 1;
  e.nodes.push_back(nd);
  NodeId self = static_cast<NodeId>(e.nodes.size()) - 1;
  e.nodes[static_cast<std::size_t>(parent)].children.push_back(self);
  std::vector<const NodeSpec*> kids;
  for (const auto& c : spec.children) kids.push_back(&c);
  std::sort(kids.begin(), kids.end(), [](const NodeSpec* x, const NodeSpec* y) {
    ArrivalEvent ex = x->event, ey = y->event;
    ex.normalize();
    ey.normalize();
    return ex.key() < ey.key();
  });
  for (const NodeSpec* c : kids) append_subtree(e, *c, self);
}
}  // namespace detail

inline Economy make_economy(int horizon, CharacteristicTable table, std::map<AgentId, Agent> roster,
                            const std::vector<NodeSpec>& periods_one,
                            int arrival_bound = kDefaultArrivalBound) {
  Economy e;
  e.horizon = horizon;
  e.table = std::move(table);
  e.roster = std::move(roster);
  e.arrival_bound = arrival_bound;
  e.nodes.push_back(EconomyNode{});  // root
  std::vector<const NodeSpec*> kids;
  for (const auto& c : periods_one) kids.push_back(&c);
  std::sort(kids.begin(), kids.end(), [](const NodeSpec* x, const NodeSpec* y) {
    ArrivalEvent ex = x->event, ey = y->event;
    ex.normalize();
    ey.normalize();
    return ex.key() < ey.key();
  });
  for (const NodeSpec* c : kids) detail::append_subtree(e, *c, 0);
  return e;
}

/// Single-branch convenience: one arrival event per period.
inline Economy make_chain_economy(CharacteristicTable table, std::map<AgentId, Agent> roster,
                                  const std::vector<ArrivalEvent>& events) {
  NodeSpec* cur = nullptr;
  NodeSpec top;
  std::vector<NodeSpec> roots;
  for (const ArrivalEvent& ev : events) {
    NodeSpec spec;
    spec.event = ev;
    spec.prob = 1;
    if (!cur) {
      top = spec;
      cur = &top;
    } else {
      cur->children.push_back(spec);
      cur = &cur->children.back();
    }
  }
  if (cur) roots.push_back(top);
  return make_economy(static_cast<int>(events.size()), std::move(table), std::move(roster), roots);
}

struct Violation {
  std::string path;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  void add(const std::string& path, const std::string& message) { violations.push_back({path, message}); }
};

/// Checks every model invariant: probabilities sum to one and are positive,
/// leaves sit at depth `horizon`, arrivals are disjoint along every path,
/// sides and characteristics are consistent, discounts lie in [0,1), u and v
/// are total.
inline ValidationResult validate_economy(const Economy& e) {
  ValidationResult res;
  if (e.horizon < 1) res.add("", "horizon must be at least 1");
  for (const auto& [key, val] : e.table.delta) {
    if (val < 0 || val >= 1) res.add("", "discount factor for '" + key + "' outside [0,1)");
  }
  for (const auto& a : e.table.side_a)
    for (const auto& b : e.table.side_b) {
      if (!e.table.u.count({a, b})) res.add("", "u(" + a + "," + b + ") missing");
      if (!e.table.v.count({a, b})) res.add("", "v(" + a + "," + b + ") missing");
      if (!e.table.delta.count(a)) res.add("", "delta(" + a + ") missing");
      if (!e.table.delta.count(b)) res.add("", "delta(" + b + ") missing");
    }
  for (const auto& [id, ag] : e.roster) {
    const auto& labels = ag.side == Side::A ? e.table.side_a : e.table.side_b;
    if (std::find(labels.begin(), labels.end(), ag.characteristic) == labels.end())
      res.add("", "agent " + std::to_string(id) + " has unknown characteristic '" + ag.characteristic + "'");
  }

  for (NodeId n = 0; n < e.node_count(); ++n) {
    const auto& nd = e.node(n);
    const std::string path = e.node_path(n);
    if (n != e.root()) {
      if (nd.prob <= 0) res.add(path, "branch probability must be strictly positive");
      if (static_cast<int>(nd.event.side_a.size()) > e.arrival_bound ||
          static_cast<int>(nd.event.side_b.size()) > e.arrival_bound)
        res.add(path, "arrival event exceeds configured bound K=" + std::to_string(e.arrival_bound));
      for (AgentId a : nd.event.side_a) {
        if (!e.has_agent(a))
          res.add(path, "unknown agent " + std::to_string(a));
        else if (e.agent(a).side != Side::A)
          res.add(path, "agent " + std::to_string(a) + " listed on the wrong side");
      }
      for (AgentId b : nd.event.side_b) {
        if (!e.has_agent(b))
          res.add(path, "unknown agent " + std::to_string(b));
        else if (e.agent(b).side != Side::B)
          res.add(path, "agent " + std::to_string(b) + " listed on the wrong side");
      }
      // disjointness with every ancestor event, per side
      for (NodeId anc = nd.parent; anc != -1; anc = e.node(anc).parent) {
        if (anc == e.root()) break;
        for (AgentId a : nd.event.side_a) {
          const auto& prev = e.node(anc).event.side_a;
          if (std::binary_search(prev.begin(), prev.end(), a))
            res.add(path, "duplicate arrival of agent " + std::to_string(a));
        }
        for (AgentId b : nd.event.side_b) {
          const auto& prev = e.node(anc).event.side_b;
          if (std::binary_search(prev.begin(), prev.end(), b))
            res.add(path, "duplicate arrival of agent " + std::to_string(b));
        }
      }
    }
    if (nd.children.empty()) {
      if (nd.depth != e.horizon)
        res.add(path, "leaf at depth " + std::to_string(nd.depth) + ", expected " + std::to_string(e.horizon));
    } else {
      Rational sum{0};
      for (NodeId c : nd.children) sum += e.node(c).prob;
      if (sum != 1) res.add(path, "child probabilities sum to " + rational_str(sum) + ", expected 1");
      for (std::size_t i = 1; i < nd.children.size(); ++i)
        if (!(e.node(nd.children[i - 1]).event.key() < e.node(nd.children[i]).event.key()))
          res.add(path, "children not in canonical order or duplicated");
    }
  }
  return res;
}

}  // namespace dynstab
