#pragma once

#include "dynstab/matching.hpp"

namespace dynstab {

/// One-period utility of k matching with `partner` (0 when partner == k).
inline Rational one_period_utility(const Economy& e, AgentId k, AgentId partner) {
  if (k == partner) return Rational{0};
  const Agent& ak = e.agent(k);
  const Agent& ap = e.agent(partner);
  if (ak.side == ap.side) throw std::invalid_argument("utility of a same-side pair");
  if (ak.side == Side::A) return e.table.u_of(ak.characteristic, ap.characteristic);
  return e.table.v_of(ap.characteristic, ak.characteristic);
}

/// First period at which k is matched under m along the path to `leaf`;
/// horizon if k is never matched (the self-match utility is zero, so the
/// exponent is irrelevant there and pinned for determinism).
inline int first_match_time(const Economy& e, const Matching& m, AgentId k, NodeId leaf) {
  const auto& nd = e.node(leaf);
  auto [as, bs] = e.cumulative_arrivals(leaf, nd.depth);
  const auto& cum = e.agent(k).side == Side::A ? as : bs;
  if (!std::binary_search(cum.begin(), cum.end(), k))
    throw std::domain_error("first_match_time: agent does not arrive on this path");
  std::vector<NodeId> path;
  for (NodeId cur = leaf; cur != e.root(); cur = e.node(cur).parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  for (NodeId n : path)
    if (partner_of(m.at(n), k) != k) return e.depth(n);
  return e.horizon;
}

/// Discounted expected payoff of k under m evaluated at node r: the
/// expectation over leaves following r of delta^(match date - depth(r)) times
/// the match utility. Exact rational.
inline Rational payoff(const Economy& e, const Matching& m, AgentId k, NodeId r) {
  const int t = e.depth(r);
  const Rational& delta = e.table.delta_of(e.agent(k).characteristic);
  Rational total{0};

  // walk the subtree; pairings are cumulative, so the first node whose
  // pairing contains k fixes both the date and the partner
  std::function<void(NodeId, const Rational&, int, AgentId)> rec =
      [&](NodeId n, const Rational& prob, int match_depth, AgentId partner) {
        if (match_depth < 0) {
          AgentId p = partner_of(m.at(n), k);
          if (p != k) {
            match_depth = e.depth(n);
            partner = p;
          }
        }
        if (e.is_leaf(n)) {
          if (match_depth >= 0) {
            if (match_depth < t) throw std::domain_error("payoff: agent already matched before node");
            total += prob * rational_pow(delta, match_depth - t) * one_period_utility(e, k, partner);
          }
          return;
        }
        for (NodeId c : e.node(n).children) rec(c, prob * e.node(c).prob, match_depth, partner);
      };
  rec(r, Rational{1}, -1, k);
  return total;
}

}  // namespace dynstab
