#pragma once

#include "dynstab/dynamic_stability.hpp"

namespace dynstab {

/// True iff any two leaves with identical cumulative arrival sets carry
/// identical probabilities: the distribution depends on what arrived, not on
/// when.
inline bool is_exchangeable(const Economy& e) {
  std::map<std::string, Rational> seen;
  for (NodeId n = 0; n < e.node_count(); ++n) {
    if (!e.is_leaf(n)) continue;
    auto [as, bs] = e.cumulative_arrivals(n, e.depth(n));
    const std::string key = detail::leftover_key(as, bs);
    Rational p = e.conditional_probability(e.root(), n);
    auto [it, inserted] = seen.emplace(key, p);
    if (!inserted && it->second != p) return false;
  }
  return true;
}

struct DelayWitness {
  int period = 0;
  NodeId node = -1;
  Realization realization;
  AgentId agent = -1;
  Rational gain{0};  // strictly positive expected benefit from reporting one period late
};

/// Outcome of the delay-incentive check. Statuses other than WitnessFound
/// diagnose which precondition failed.
struct DelayCheck {
  enum class Status {
    WitnessFound,
    NotPairwiseStable,
    NotIndividuallyRational,
    NotExchangeable,
    MatchingStable,          // no agent benefits from waiting anywhere
    NoArrivingAgentFailure,  // failures exist but none involves a fresh arrival
    NoFullSupport,           // a needed delayed-arrival branch is missing
    NoPositiveGain,          // defensive; unreachable when preconditions hold
  };
  Status status = Status::MatchingStable;
  std::optional<DelayWitness> witness;
  std::optional<DSWitness> pair_block;  // for NotPairwiseStable
};

namespace detail {

/// Leaf of the rerouted path obtained by moving `k` from the event at `r`
/// into the next period along the continuation recorded by `leaf`.
inline std::optional<NodeId> delayed_leaf(const Economy& e, NodeId r, AgentId k, NodeId leaf) {
  const Side side = e.agent(k).side;
  // sibling of r whose event drops k
  ArrivalEvent dropped = e.node(r).event;
  auto& dvec = side == Side::A ? dropped.side_a : dropped.side_b;
  dvec.erase(std::remove(dvec.begin(), dvec.end(), k), dvec.end());
  NodeId parent = e.node(r).parent;
  std::optional<NodeId> alt;
  for (NodeId c : e.node(parent).children)
    if (e.node(c).event == dropped) { alt = c; break; }
  if (!alt) return std::nullopt;

  std::vector<NodeId> path;  // strict descendants of r toward leaf
  for (NodeId cur = leaf; cur != r; cur = e.node(cur).parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());

  NodeId cur = *alt;
  for (std::size_t i = 0; i < path.size(); ++i) {
    ArrivalEvent want = e.node(path[i]).event;
    if (i == 0) {
      auto& wvec = side == Side::A ? want.side_a : want.side_b;
      wvec.push_back(k);
      std::sort(wvec.begin(), wvec.end());
    }
    std::optional<NodeId> next;
    for (NodeId c : e.node(cur).children)
      if (e.node(c).event == want) { next = c; break; }
    if (!next) return std::nullopt;
    cur = *next;
  }
  return cur;
}

}  // namespace detail

/// Searches for an arriving agent who strictly gains by reporting their
/// arrival one period late. Preconditions: m pairwise stable and individually
/// rational, the economy exchangeable with the delayed branches present, and
/// some fresh arrival at the deepest failing realization benefits from
/// waiting (every conjecture strictly beats the matching for them).
inline DelayCheck delay_incentive_witness(const Matching& m, const Economy& e, SolveContext& ctx) {
  DelayCheck out;
  // pairwise stability at every node
  for (NodeId n = 1; n < e.node_count(); ++n) {
    AvailableAgents avail = available_agents(e, m, n);
    std::map<AgentId, Rational> val;
    for (AgentId a : avail.side_a) val.emplace(a, payoff(e, m, a, n));
    for (AgentId b : avail.side_b) val.emplace(b, payoff(e, m, b, n));
    for (AgentId a : avail.side_a)
      for (AgentId b : avail.side_b)
        if (one_period_utility(e, a, b) > val.at(a) && one_period_utility(e, b, a) > val.at(b)) {
          out.status = DelayCheck::Status::NotPairwiseStable;
          DSWitness w;
          w.condition = DSWitness::Condition::PairBlock;
          w.node = n;
          w.node_path = e.node_path(n);
          w.pair = {a, b};
          out.pair_block = std::move(w);
          return out;
        }
  }
  if (!is_individually_rational(m, e).first) {
    out.status = DelayCheck::Status::NotIndividuallyRational;
    return out;
  }
  if (!is_exchangeable(e)) {
    out.status = DelayCheck::Status::NotExchangeable;
    return out;
  }

  // deepest period with a waiting failure by a matched agent
  struct Failure {
    NodeId node;
    AgentId agent;
  };
  std::vector<Failure> failures;
  for (int t = e.horizon - 1; t >= 1 && failures.empty(); --t) {
    for (NodeId n = 1; n < e.node_count(); ++n) {
      if (e.depth(n) != t) continue;
      const PeriodMatching empty;
      const PeriodMatching& parent_pm = e.node(n).parent == e.root() ? empty : m.at(e.node(n).parent);
      AvailableAgents avail = available_agents(e, parent_pm, n);
      auto benefits = [&](AgentId k) {
        if (partner_of(m.at(n), k) == k) return false;
        auto stats = detail::conjecture_stats(ctx, e, n, parent_pm, avail, k, StabilityConcept::Full);
        return !stats->empty && payoff(e, m, k, n) < stats->min_payoff;
      };
      for (AgentId a : avail.side_a)
        if (benefits(a)) failures.push_back({n, a});
      for (AgentId b : avail.side_b)
        if (benefits(b)) failures.push_back({n, b});
    }
  }
  if (failures.empty()) {
    out.status = DelayCheck::Status::MatchingStable;
    return out;
  }

  // restrict to agents who arrived at the failing node's period
  std::vector<Failure> arriving;
  for (const auto& f : failures) {
    const auto& ev = e.node(f.node).event;
    const auto& vec = e.agent(f.agent).side == Side::A ? ev.side_a : ev.side_b;
    if (std::binary_search(vec.begin(), vec.end(), f.agent)) arriving.push_back(f);
  }
  if (arriving.empty()) {
    out.status = DelayCheck::Status::NoArrivingAgentFailure;
    return out;
  }

  bool support_missing = false;
  for (const auto& f : arriving) {
    const NodeId r = f.node;
    const AgentId k = f.agent;
    Rational delayed_value{0};
    bool missing = false;
    for (NodeId leaf = 0; leaf < e.node_count(); ++leaf) {
      if (!e.is_leaf(leaf) || !e.weakly_follows(leaf, r)) continue;
      auto alt = detail::delayed_leaf(e, r, k, leaf);
      if (!alt) {
        missing = true;
        break;
      }
      int tm = first_match_time(e, m, k, *alt);
      AgentId partner = partner_of(m.at(*alt), k);
      delayed_value += e.conditional_probability(r, leaf) *
                       rational_pow(e.table.delta_of(e.agent(k).characteristic), tm - e.depth(r)) *
                       one_period_utility(e, k, partner);
    }
    if (missing) {
      support_missing = true;
      continue;
    }
    Rational gain = delayed_value - payoff(e, m, k, r);
    if (gain > 0) {
      out.status = DelayCheck::Status::WitnessFound;
      out.witness = DelayWitness{e.depth(r), r, e.realization_of(r), k, gain};
      return out;
    }
  }
  out.status = support_missing ? DelayCheck::Status::NoFullSupport : DelayCheck::Status::NoPositiveGain;
  return out;
}

}  // namespace dynstab
