#pragma once

#include <random>

#include "dynstab/fixtures.hpp"
#include "dynstab/static_stability.hpp"

namespace testsupport {

using namespace dynstab;

// ---------------------------------------------------------------------------
// independent brute-force oracles (kept free of the library's enumeration and
// stability code paths, except for raw table lookups)

inline std::vector<PeriodMatching> oracle_all_pairings(const std::vector<AgentId>& as,
                                                       const std::vector<AgentId>& bs) {
  std::vector<PeriodMatching> out;
  // assign each side-B agent a partner index into `as` (or none), rejecting collisions
  std::vector<int> choice(bs.size(), -1);
  std::function<void(std::size_t)> rec = [&](std::size_t j) {
    if (j == bs.size()) {
      PeriodMatching pm;
      for (std::size_t jj = 0; jj < bs.size(); ++jj)
        if (choice[jj] >= 0) add_pair(pm, as[static_cast<std::size_t>(choice[jj])], bs[jj]);
      out.push_back(std::move(pm));
      return;
    }
    choice[j] = -1;
    rec(j + 1);
    for (std::size_t i = 0; i < as.size(); ++i) {
      bool taken = false;
      for (std::size_t jj = 0; jj < j; ++jj) taken = taken || choice[jj] == static_cast<int>(i);
      if (taken) continue;
      choice[j] = static_cast<int>(i);
      rec(j + 1);
    }
    choice[j] = -1;
  };
  rec(0);
  return out;
}

inline bool oracle_statically_stable(const Economy& e, const PeriodMatching& pm,
                                     const std::vector<AgentId>& as, const std::vector<AgentId>& bs) {
  for (AgentId a : as)
    if (partner_of(pm, a) != a && one_period_utility(e, a, partner_of(pm, a)) < 0) return false;
  for (AgentId b : bs)
    if (partner_of(pm, b) != b && one_period_utility(e, b, partner_of(pm, b)) < 0) return false;
  for (AgentId a : as)
    for (AgentId b : bs) {
      if (partner_of(pm, a) == b) continue;
      if (one_period_utility(e, a, b) > one_period_utility(e, a, partner_of(pm, a)) &&
          one_period_utility(e, b, a) > one_period_utility(e, b, partner_of(pm, b)))
        return false;
    }
  return true;
}

inline std::vector<PeriodMatching> oracle_static_stable_set(const Economy& e,
                                                            const std::vector<AgentId>& as,
                                                            const std::vector<AgentId>& bs) {
  std::vector<PeriodMatching> out;
  for (const auto& pm : oracle_all_pairings(as, bs))
    if (oracle_statically_stable(e, pm, as, bs)) out.push_back(pm);
  return out;
}

/// Stable matchings of a one-period (possibly branching) economy, assembled
/// node by node from the static oracle.
inline std::vector<Matching> oracle_one_period_stable_matchings(const Economy& e) {
  std::vector<Matching> out;
  std::vector<NodeId> nodes;
  for (NodeId n = 0; n < e.node_count(); ++n)
    if (e.depth(n) == 1) nodes.push_back(n);
  std::vector<std::vector<PeriodMatching>> per_node;
  for (NodeId n : nodes) {
    const auto& ev = e.node(n).event;
    per_node.push_back(oracle_static_stable_set(e, ev.side_a, ev.side_b));
  }
  std::vector<std::size_t> pick(nodes.size(), 0);
  while (true) {
    Matching m = Matching::empty_for(e);
    for (std::size_t i = 0; i < nodes.size(); ++i) m.at(nodes[i]) = per_node[i][pick[i]];
    out.push_back(std::move(m));
    std::size_t i = 0;
    for (; i < pick.size(); ++i) {
      if (++pick[i] < per_node[i].size()) break;
      pick[i] = 0;
    }
    if (pick.empty() || i == pick.size()) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// random instances

struct RandomEconomyParams {
  int max_horizon = 3;
  int max_per_side = 3;
  int max_branches = 2;
  std::uint64_t matching_budget = 2000;
  bool allow_shared_characteristics = true;
};

inline Rational random_delta(std::mt19937& rng) {
  static const Rational choices[] = {Rational(0), Rational(1, 4), Rational(1, 2), Rational(3, 4),
                                     Rational(9, 10)};
  return choices[rng() % 5];
}

inline Economy random_economy(std::mt19937& rng, const RandomEconomyParams& p) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    int horizon = 1 + static_cast<int>(rng() % static_cast<unsigned>(p.max_horizon));
    int next_a = 1, next_b = 1001, next_char = 0;
    std::map<AgentId, Agent> roster;
    CharacteristicTable table;

    auto fresh_agent = [&](Side side) {
      AgentId id = side == Side::A ? next_a++ : next_b++;
      std::string label;
      auto& labels = side == Side::A ? table.side_a : table.side_b;
      if (p.allow_shared_characteristics && !labels.empty() && rng() % 8 == 0) {
        label = labels[rng() % labels.size()];
      } else {
        label = std::string(side == Side::A ? "x" : "y") + std::to_string(next_char++);
        labels.push_back(label);
      }
      roster.emplace(id, Agent{id, side, label});
      return id;
    };

    std::function<std::vector<NodeSpec>(int)> grow = [&](int depth) {
      std::vector<NodeSpec> out;
      int branches = depth == 0 ? 1 : 1 + static_cast<int>(rng() % static_cast<unsigned>(p.max_branches));
      (void)depth;
      for (int br = 0; br < branches; ++br) {
        NodeSpec spec;
        int na = static_cast<int>(rng() % static_cast<unsigned>(p.max_per_side + 1));
        int nb = static_cast<int>(rng() % static_cast<unsigned>(p.max_per_side + 1));
        for (int i = 0; i < na; ++i) spec.event.side_a.push_back(fresh_agent(Side::A));
        for (int i = 0; i < nb; ++i) spec.event.side_b.push_back(fresh_agent(Side::B));
        out.push_back(std::move(spec));
      }
      if (branches == 2) {
        if (rng() % 2 == 0) {
          out[0].prob = Rational(1, 2);
          out[1].prob = Rational(1, 2);
        } else {
          out[0].prob = Rational(1, 3);
          out[1].prob = Rational(2, 3);
        }
      } else {
        out[0].prob = 1;
      }
      return out;
    };

    std::function<void(NodeSpec&, int)> descend = [&](NodeSpec& spec, int depth) {
      if (depth == horizon) return;
      spec.children = grow(depth);
      for (auto& c : spec.children) descend(c, depth + 1);
    };
    NodeSpec top;
    std::vector<NodeSpec> first = grow(0);
    for (auto& c : first) descend(c, 1);

    for (const auto& a : table.side_a)
      for (const auto& b : table.side_b) {
        table.u[{a, b}] = Rational(static_cast<int>(rng() % 9) - 2);
        table.v[{a, b}] = Rational(static_cast<int>(rng() % 9) - 2);
      }
    for (const auto& c : table.side_a) table.delta[c] = random_delta(rng);
    for (const auto& c : table.side_b) table.delta[c] = random_delta(rng);

    Economy e = make_economy(horizon, std::move(table), std::move(roster), first);
    if (!validate_economy(e).ok()) continue;
    if (count_matchings(e) > p.matching_budget) continue;
    return e;
  }
  throw std::runtime_error("random_economy: no instance within budget after 200 attempts");
}

/// One-period instance with n side-A and m side-B agents and random integer
/// utilities.
inline Economy random_one_period_economy(std::mt19937& rng, int max_per_side,
                                         int branches = 1) {
  RandomEconomyParams p;
  p.max_horizon = 1;
  p.max_per_side = max_per_side;
  p.max_branches = branches;
  p.matching_budget = 100000;
  return random_economy(rng, p);
}

/// One-period instance with strict preferences: distinct characteristics and
/// no utility ties or zeros within any agent's row.
inline Economy random_strict_one_period_economy(std::mt19937& rng, int max_per_side) {
  while (true) {
    RandomEconomyParams p;
    p.max_horizon = 1;
    p.max_per_side = max_per_side;
    p.max_branches = 1;
    p.matching_budget = 100000;
    p.allow_shared_characteristics = false;
    Economy e = random_economy(rng, p);
    std::vector<long long> pool = {-4, -3, -2, -1, 1, 2, 3, 4, 5, 6, 7, 8};
    for (const auto& a : e.table.side_a) {
      std::shuffle(pool.begin(), pool.end(), rng);
      std::size_t i = 0;
      for (const auto& b : e.table.side_b) e.table.u[{a, b}] = Rational(pool[i++]);
    }
    for (const auto& b : e.table.side_b) {
      std::shuffle(pool.begin(), pool.end(), rng);
      std::size_t i = 0;
      for (const auto& a : e.table.side_a) e.table.v[{a, b}] = Rational(pool[i++]);
    }
    return e;
  }
}

inline std::map<AgentId, PreferenceList> random_lists(std::mt19937& rng, const std::vector<AgentId>& as,
                                                      const std::vector<AgentId>& bs) {
  std::map<AgentId, PreferenceList> lists;
  auto make = [&](AgentId owner, const std::vector<AgentId>& others) {
    PreferenceList pl;
    pl.owner = owner;
    std::vector<AgentId> pool = others;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t len = pool.empty() ? 0 : rng() % (pool.size() + 1);
    pl.ranking.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(len));
    lists.emplace(owner, std::move(pl));
  };
  for (AgentId a : as) make(a, bs);
  for (AgentId b : bs) make(b, as);
  return lists;
}

/// Direct definition-chasing stability check against submitted lists,
/// independent of the library's report-stability code.
inline bool oracle_stable_for_lists(const PeriodMatching& pm, const std::vector<AgentId>& as,
                                    const std::vector<AgentId>& bs,
                                    const std::map<AgentId, PreferenceList>& lists) {
  auto position = [&](AgentId owner, AgentId k) -> int {
    const auto& ranking = lists.at(owner).ranking;
    for (std::size_t i = 0; i < ranking.size(); ++i)
      if (ranking[i] == k) return static_cast<int>(i);
    return -1;
  };
  auto all = [&](const std::vector<AgentId>& v) {
    for (AgentId k : v) {
      AgentId p = partner_of(pm, k);
      if (p != k && position(k, p) < 0) return false;
    }
    return true;
  };
  if (!all(as) || !all(bs)) return false;
  for (AgentId a : as)
    for (AgentId b : bs) {
      if (partner_of(pm, a) == b) continue;
      int ab = position(a, b), ba = position(b, a);
      if (ab < 0 || ba < 0) continue;
      AgentId pa = partner_of(pm, a), pb = partner_of(pm, b);
      bool a_better = pa == a || position(a, pa) > ab;
      bool b_better = pb == b || position(b, pb) > ba;
      if (a_better && b_better) return false;
    }
  return true;
}

/// All pairings that are stable with respect to submitted lists (oracle).
inline std::vector<PeriodMatching> oracle_list_stable_set(const std::vector<AgentId>& as,
                                                          const std::vector<AgentId>& bs,
                                                          const std::map<AgentId, PreferenceList>& lists) {
  std::vector<PeriodMatching> out;
  for (const auto& pm : oracle_all_pairings(as, bs))
    if (oracle_stable_for_lists(pm, as, bs, lists)) out.push_back(pm);
  return out;
}

/// A two-branch exchangeable two-period economy in which one period-1 agent
/// is matched immediately but every conjecture hands them a strictly better
/// late partner; the second branch realizes their one-period delay. The
/// returned matching is pairwise stable and individually rational.
struct DelayFixture {
  Economy economy;
  Matching matching;
  AgentId waiting_agent;
  Rational expected_gain;
  NodeId failing_node;
};

inline DelayFixture make_delay_fixture(bool waiting_on_side_b, long long high, long long scale,
                                       const Rational& delta_wait) {
  // role names: the waiting agent w and rival g arrive in period 1 alongside
  // one early partner s; the late partners t (prized) and n arrive in period
  // 2 together with latecomer e
  CharacteristicTable tb;
  std::vector<std::string> a_chars, b_chars;
  if (!waiting_on_side_b) {
    a_chars = {"w", "g", "e"};
    b_chars = {"s", "t", "n"};
  } else {
    a_chars = {"s", "t", "n"};
    b_chars = {"w", "g", "e"};
  }
  tb.side_a = a_chars;
  tb.side_b = b_chars;
  auto put = [&](const std::string& x, const std::string& y, long long uval, long long vval) {
    if (!waiting_on_side_b) {
      tb.u[{x, y}] = Rational(uval * scale);
      tb.v[{x, y}] = Rational(vval * scale);
    } else {
      tb.u[{y, x}] = Rational(vval * scale);
      tb.v[{y, x}] = Rational(uval * scale);
    }
  };
  put("w", "s", 2, 2);
  put("w", "t", high, 1);
  put("w", "n", 3, 2);
  put("g", "s", 3, 1);
  put("g", "t", 2, 2);
  put("g", "n", -1, -1);
  put("e", "s", -1, -1);
  put("e", "t", -1, -1);
  put("e", "n", 1, 1);
  for (const auto& c : tb.side_a) tb.delta[c] = Rational(1, 2);
  for (const auto& c : tb.side_b) tb.delta[c] = Rational(1, 2);
  tb.delta["w"] = delta_wait;

  const Side ws = waiting_on_side_b ? Side::B : Side::A;
  const Side os = opposite(ws);
  AgentId w = ws == Side::A ? 1 : 11;
  AgentId g = ws == Side::A ? 2 : 12;
  AgentId e_ag = ws == Side::A ? 3 : 13;
  AgentId s = os == Side::A ? 1 : 11;
  AgentId t = os == Side::A ? 2 : 12;
  AgentId n = os == Side::A ? 3 : 13;
  std::map<AgentId, Agent> roster = {
      {w, {w, ws, "w"}},     {g, {g, ws, "g"}}, {e_ag, {e_ag, ws, "e"}},
      {s, {s, os, "s"}},     {t, {t, os, "t"}}, {n, {n, os, "n"}},
  };

  auto event = [&](std::vector<AgentId> mine, std::vector<AgentId> other) {
    ArrivalEvent ev;
    (ws == Side::A ? ev.side_a : ev.side_b) = std::move(mine);
    (ws == Side::A ? ev.side_b : ev.side_a) = std::move(other);
    ev.normalize();
    return ev;
  };

  NodeSpec main_branch, delayed_branch;
  main_branch.event = event({w, g}, {s});
  main_branch.prob = Rational(1, 2);
  main_branch.children.push_back(NodeSpec{event({e_ag}, {t, n}), Rational(1), {}});
  delayed_branch.event = event({g}, {s});
  delayed_branch.prob = Rational(1, 2);
  delayed_branch.children.push_back(NodeSpec{event({e_ag, w}, {t, n}), Rational(1), {}});

  DelayFixture out;
  out.economy = make_economy(2, tb, roster, {main_branch, delayed_branch});
  const Economy& e = out.economy;

  auto node_of = [&](const ArrivalEvent& ev, int depth) {
    for (NodeId nn = 0; nn < e.node_count(); ++nn)
      if (e.depth(nn) == depth && e.node(nn).event == ev) return nn;
    throw std::logic_error("delay fixture node not found");
  };
  NodeId main1 = node_of(main_branch.event, 1);
  NodeId main2 = e.node(main1).children[0];
  NodeId del1 = node_of(delayed_branch.event, 1);
  NodeId del2 = e.node(del1).children[0];

  Matching m = Matching::empty_for(e);
  auto ordered = [&](AgentId x, AgentId y) {  // (side-A, side-B) order
    return e.agent(x).side == Side::A ? std::make_pair(x, y) : std::make_pair(y, x);
  };
  auto [p1a, p1b] = ordered(w, s);
  add_pair(m.at(main1), p1a, p1b);
  m.at(main2) = m.at(main1);
  auto [p2a, p2b] = ordered(g, t);
  add_pair(m.at(main2), p2a, p2b);
  auto [p3a, p3b] = ordered(e_ag, n);
  add_pair(m.at(main2), p3a, p3b);

  auto [q1a, q1b] = ordered(g, s);
  add_pair(m.at(del1), q1a, q1b);
  m.at(del2) = m.at(del1);
  auto [q2a, q2b] = ordered(w, t);
  add_pair(m.at(del2), q2a, q2b);
  auto [q3a, q3b] = ordered(e_ag, n);
  add_pair(m.at(del2), q3a, q3b);

  out.matching = std::move(m);
  out.waiting_agent = w;
  out.failing_node = main1;
  out.expected_gain = delta_wait * Rational(high * scale) - Rational(2 * scale);
  return out;
}

// ---------------------------------------------------------------------------
// independent two-period dynamic-stability oracle, written definition-first
// (its own payoff arithmetic, availability scans, and matching enumeration)

inline std::vector<AgentId> oracle_available(const Economy& e, const PeriodMatching& parent, NodeId n,
                                             Side side) {
  std::vector<AgentId> out;
  auto [as, bs] = e.cumulative_arrivals(n, e.depth(n));
  for (AgentId k : side == Side::A ? as : bs)
    if (partner_of(parent, k) == k) out.push_back(k);
  return out;
}

inline std::vector<Matching> oracle_all_matchings(const Economy& e) {
  std::vector<NodeId> order;
  for (int d = 1; d <= e.horizon; ++d)
    for (NodeId n = 1; n < e.node_count(); ++n)
      if (e.depth(n) == d) order.push_back(n);
  std::vector<Matching> out;
  Matching cur = Matching::empty_for(e);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == order.size()) {
      out.push_back(cur);
      return;
    }
    NodeId n = order[i];
    const PeriodMatching parent =
        e.node(n).parent == e.root() ? PeriodMatching{} : cur.at(e.node(n).parent);
    auto avail_a = oracle_available(e, parent, n, Side::A);
    auto avail_b = oracle_available(e, parent, n, Side::B);
    for (const auto& fresh : oracle_all_pairings(avail_a, avail_b)) {
      PeriodMatching pm = parent;
      for (const auto& [x, y] : fresh) pm.emplace(x, y);
      cur.at(n) = pm;
      rec(i + 1);
    }
    cur.at(n).clear();
  };
  rec(0);
  return out;
}

// two-case payoff formula special to horizon-two economies
inline Rational oracle_t2_payoff(const Economy& e, const Matching& m, AgentId k, NodeId n) {
  if (e.depth(n) == 2) return one_period_utility(e, k, partner_of(m.at(n), k));
  AgentId now = partner_of(m.at(n), k);
  if (now != k) return one_period_utility(e, k, now);
  Rational total{0};
  for (NodeId c : e.node(n).children) {
    AgentId later = partner_of(m.at(c), k);
    total += e.node(c).prob * e.table.delta_of(e.agent(k).characteristic) *
             one_period_utility(e, k, later);
  }
  return total;
}

inline bool oracle_t2_stable_among_matchers(const Economy& e, const Matching& m, NodeId n) {
  const PeriodMatching parent =
      e.node(n).parent == e.root() ? PeriodMatching{} : m.at(e.node(n).parent);
  std::vector<AgentId> ma, mb;
  for (AgentId a : oracle_available(e, parent, n, Side::A))
    if (partner_of(m.at(n), a) != a) ma.push_back(a);
  for (AgentId b : oracle_available(e, parent, n, Side::B))
    if (partner_of(m.at(n), b) != b) mb.push_back(b);
  return oracle_statically_stable(e, m.at(n), ma, mb);
}

/// Dynamic stability chased straight from the definition for horizon-two
/// economies: at every node, no contemporaneous pair block and, for every
/// available agent, some feasible conjecture (single now, stable among the
/// matchers, statically stable at every continuation leaf, unchanged off the
/// subtree) that is weakly worse than the matching.
inline bool oracle_t2_dynamically_stable(const Economy& e, const Matching& m,
                                         const std::vector<Matching>& all) {
  if (e.horizon != 2) throw std::logic_error("oracle handles horizon two only");
  for (NodeId n = 1; n < e.node_count(); ++n) {
    const PeriodMatching parent =
        e.node(n).parent == e.root() ? PeriodMatching{} : m.at(e.node(n).parent);
    auto avail_a = oracle_available(e, parent, n, Side::A);
    auto avail_b = oracle_available(e, parent, n, Side::B);
    for (AgentId a : avail_a)
      for (AgentId b : avail_b)
        if (one_period_utility(e, a, b) > oracle_t2_payoff(e, m, a, n) &&
            one_period_utility(e, b, a) > oracle_t2_payoff(e, m, b, n))
          return false;

    auto conjecture_ok = [&](AgentId k) {
      for (const Matching& cand : all) {
        bool off_equal = true;
        for (NodeId other = 1; other < e.node_count() && off_equal; ++other)
          if (!e.weakly_follows(other, n) && cand.at(other) != m.at(other)) off_equal = false;
        if (!off_equal) continue;
        if (partner_of(cand.at(n), k) != k) continue;
        if (!oracle_t2_stable_among_matchers(e, cand, n)) continue;
        bool leaves_ok = true;
        for (NodeId c : e.node(n).children) {
          auto ca = oracle_available(e, cand.at(n), c, Side::A);
          auto cb = oracle_available(e, cand.at(n), c, Side::B);
          leaves_ok = leaves_ok && oracle_statically_stable(e, cand.at(c), ca, cb);
        }
        if (!leaves_ok) continue;
        if (oracle_t2_payoff(e, cand, k, n) <= oracle_t2_payoff(e, m, k, n)) return true;
      }
      return false;
    };
    for (AgentId a : avail_a)
      if (!conjecture_ok(a)) return false;
    for (AgentId b : avail_b)
      if (!conjecture_ok(b)) return false;
  }
  return true;
}

inline std::set<std::string> key_set(const std::vector<Matching>& ms, const Economy& e) {
  std::set<std::string> out;
  for (const auto& m : ms) out.insert(canonical_key(m, e));
  return out;
}

inline std::set<AgentId> unmatched_at_leaves(const Matching& m, const Economy& e) {
  std::set<AgentId> out;
  for (NodeId n = 0; n < e.node_count(); ++n) {
    if (!e.is_leaf(n)) continue;
    auto [as, bs] = e.cumulative_arrivals(n, e.depth(n));
    for (AgentId a : as)
      if (partner_of(m.at(n), a) == a) out.insert(a);
    for (AgentId b : bs)
      if (partner_of(m.at(n), b) == b) out.insert(b);
  }
  return out;
}

}  // namespace testsupport
