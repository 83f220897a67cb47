#pragma once

#include <functional>
#include <memory>

#include "dynstab/dynamic_stability.hpp"

namespace dynstab {

/// A submitted rank-ordered list; an empty list ranks only its owner.
struct Rol {
  std::vector<AgentId> ranked;
  bool operator==(const Rol& o) const = default;
};

struct MechanismContractError : std::runtime_error {
  explicit MechanismContractError(const std::string& what) : std::runtime_error(what) {}
};

/// A spot mechanism maps the participating agents and their reports to a
/// period matching that must be stable with respect to the reports.
using SpotMechanism =
    std::function<PeriodMatching(const Economy&, const std::vector<AgentId>&, const std::vector<AgentId>&,
                                 const std::map<AgentId, Rol>&)>;

inline std::map<AgentId, PreferenceList> lists_from_rols(const std::vector<AgentId>& side_a,
                                                         const std::vector<AgentId>& side_b,
                                                         const std::map<AgentId, Rol>& rols) {
  std::map<AgentId, PreferenceList> lists;
  auto put = [&](AgentId k) {
    PreferenceList pl;
    pl.owner = k;
    auto it = rols.find(k);
    if (it != rols.end()) pl.ranking = it->second.ranked;
    lists.emplace(k, std::move(pl));
  };
  for (AgentId a : side_a) put(a);
  for (AgentId b : side_b) put(b);
  return lists;
}

inline SpotMechanism da_spot_mechanism(Side proposer) {
  return [proposer](const Economy& e, const std::vector<AgentId>& as, const std::vector<AgentId>& bs,
                    const std::map<AgentId, Rol>& rols) {
    return deferred_acceptance(as, bs, lists_from_rols(as, bs, rols), proposer);
  };
}

/// Runs a mechanism and enforces its contract: participants only, involutive
/// output, and stability with respect to the submitted reports.
inline PeriodMatching spot_run(const Economy& e, const SpotMechanism& mech,
                               const std::vector<AgentId>& side_a, const std::vector<AgentId>& side_b,
                               const std::map<AgentId, Rol>& rols) {
  PeriodMatching pm = mech(e, side_a, side_b, rols);
  auto participant = [&](AgentId k) {
    return std::binary_search(side_a.begin(), side_a.end(), k) ||
           std::binary_search(side_b.begin(), side_b.end(), k);
  };
  for (const auto& [k, p] : pm) {
    if (k == p || !participant(k) || !participant(p))
      throw MechanismContractError("mechanism matched a non-participant");
    if (partner_of(pm, p) != k) throw MechanismContractError("mechanism output is not an involution");
  }
  if (!stable_wrt_reports(pm, side_a, side_b, lists_from_rols(side_a, side_b, rols)))
    throw MechanismContractError("mechanism output is not stable for the reported preferences");
  return pm;
}

enum class GameVariant { Gamma1, Gamma2 };

/// A sequence of spot mechanisms over an economy. In Gamma1 the mechanisms
/// are side-A deferred acceptance, side B participates truthfully and
/// non-strategically, and the solution concept is pure subgame perfection. In
/// Gamma2 any stable rule is allowed, both sides are strategic, and profiles
/// must additionally survive pairwise joint deviations.
struct GameSpec {
  GameVariant variant = GameVariant::Gamma1;
  const Economy* economy = nullptr;
  std::vector<SpotMechanism> mechanisms;  // per period; the last entry repeats
  std::uint64_t strategy_limit = 1'000'000;
  bool full_rol_search = false;  // search all strict ROLs instead of truncations
};

inline GameSpec make_game(GameVariant variant, const Economy& e, Side mechanism_proposer = Side::A) {
  GameSpec g;
  g.variant = variant;
  g.economy = &e;
  g.mechanisms.push_back(da_spot_mechanism(variant == GameVariant::Gamma1 ? Side::A : mechanism_proposer));
  return g;
}

/// Public-history strategies: one report per history at which the agent is
/// present and unmatched. Profiles returned by the solver are representative
/// (play is pinned at the histories the equilibrium search relied on).
struct StrategyProfile {
  std::map<std::string, std::map<AgentId, Rol>> play;  // history key -> agent -> report
};

struct Equilibrium {
  StrategyProfile profile;
  Matching outcome;
};

namespace game_detail {

inline std::string pairing_key(const PeriodMatching& pm) {
  std::ostringstream os;
  for (const auto& [k, p] : pm)
    if (k < p) os << k << "-" << p << ",";
  return os.str();
}

struct StageOutcome {
  PeriodMatching pm_cum;           // prefix plus the stage's new pairs
  std::vector<int> child_history;  // aligned with the node's children
};

struct HistoryInfo {
  NodeId node = -1;
  PeriodMatching prefix;
  std::string key;
  AvailableAgents avail;
  std::vector<AgentId> actors;
  std::vector<std::vector<Rol>> action_sets;  // aligned with actors
  std::map<AgentId, Rol> fixed_rols;          // non-strategic reports
  std::vector<StageOutcome> outcomes;
  std::vector<int> profile_to_outcome;  // mixed-radix action profile -> outcome
  std::uint64_t profile_count = 1;
};

/// One equilibrium continuation of the subgame at a history: its realized
/// outcome, the continuation values of the agents present, the stage actions
/// sustaining it, and representative play for reporting.
struct EqEntry {
  std::vector<std::size_t> stage_actions;
  std::map<NodeId, PeriodMatching> outcome;
  std::map<AgentId, Rational> values;
  std::map<std::string, std::map<AgentId, Rol>> play;
  std::string outcome_key;
};

class GameSolver {
 public:
  explicit GameSolver(const GameSpec& spec) : spec_(spec), e_(*spec.economy) {
    if (spec_.variant == GameVariant::Gamma2 && e_.horizon > 2)
      throw UnsupportedConfiguration(
          "pairwise equilibrium search is implemented for horizons one and two");
  }

  std::vector<Equilibrium> solve_all() {
    std::vector<int> roots;
    for (NodeId c : e_.node(e_.root()).children) roots.push_back(discover(c, {}));

    std::uint64_t total_profiles = 0;
    for (const auto& info : infos_) total_profiles += info.profile_count;
    if (total_profiles > spec_.strategy_limit) throw GameTooLarge(spec_.strategy_limit);

    std::vector<const std::vector<EqEntry>*> root_sets;
    for (int h : roots) root_sets.push_back(&solve(h));

    std::uint64_t combos = 1;
    for (const auto* s : root_sets) combos = mul_guard(combos, s->size());
    if (combos > spec_.strategy_limit) throw GameTooLarge(spec_.strategy_limit);

    std::vector<Equilibrium> out;
    std::set<std::string> seen;
    if (combos == 0) return out;
    std::vector<std::size_t> pick(root_sets.size(), 0);
    while (true) {
      Equilibrium eq;
      eq.outcome = Matching::empty_for(e_);
      std::string key;
      for (std::size_t i = 0; i < root_sets.size(); ++i) {
        const EqEntry& entry = (*root_sets[i])[pick[i]];
        for (const auto& [n, pm] : entry.outcome) eq.outcome.at(n) = pm;
        for (const auto& [hk, rols] : entry.play)
          for (const auto& [agent, rol] : rols) eq.profile.play[hk][agent] = rol;
        key += entry.outcome_key + "|";
      }
      if (seen.insert(key).second) out.push_back(std::move(eq));
      std::size_t i = 0;
      for (; i < pick.size(); ++i) {
        if (++pick[i] < root_sets[i]->size()) break;
        pick[i] = 0;
      }
      if (pick.empty() || i == pick.size()) break;
    }
    return out;
  }

 private:
  const GameSpec& spec_;
  const Economy& e_;
  std::map<std::string, int> ids_;
  std::vector<HistoryInfo> infos_;
  std::map<int, std::vector<EqEntry>> eq_memo_;

  static std::uint64_t mul_guard(std::uint64_t x, std::uint64_t y) {
    if (y == 0) return 0;
    return x > UINT64_MAX / y ? UINT64_MAX : x * y;
  }

  const SpotMechanism& mechanism_for(int period) const {
    const auto& ms = spec_.mechanisms;
    if (ms.empty()) throw std::invalid_argument("game: no spot mechanisms configured");
    std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(period) - 1, ms.size() - 1);
    return ms[idx];
  }

  std::vector<Rol> actions_for(AgentId k, const std::vector<AgentId>& partners) const {
    std::vector<AgentId> acceptable;  // strictly positive utility, best first
    {
      std::vector<std::pair<Rational, AgentId>> scored;
      for (AgentId p : partners) {
        Rational util = one_period_utility(e_, k, p);
        if (util > 0) scored.push_back({util, p});
      }
      std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
      });
      for (const auto& [util, p] : scored) acceptable.push_back(p);
    }
    std::vector<Rol> out;
    if (!spec_.full_rol_search) {
      for (std::size_t len = 0; len <= acceptable.size(); ++len)
        out.push_back(
            Rol{std::vector<AgentId>(acceptable.begin(), acceptable.begin() + static_cast<std::ptrdiff_t>(len))});
      return out;
    }
    // every strict ordering of every subset of the present partners
    std::vector<AgentId> cur;
    std::vector<bool> used(partners.size(), false);
    std::function<void()> rec = [&]() {
      out.push_back(Rol{cur});
      for (std::size_t i = 0; i < partners.size(); ++i) {
        if (used[i]) continue;
        used[i] = true;
        cur.push_back(partners[i]);
        rec();
        cur.pop_back();
        used[i] = false;
      }
    };
    rec();
    return out;
  }

  Rol truthful_rol(AgentId k, const std::vector<AgentId>& partners) const {
    std::vector<std::pair<Rational, AgentId>> scored;
    for (AgentId p : partners) {
      Rational util = one_period_utility(e_, k, p);
      if (util > 0) scored.push_back({util, p});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    Rol out;
    for (const auto& [util, p] : scored) out.ranked.push_back(p);
    return out;
  }

  int discover(NodeId node, const PeriodMatching& prefix) {
    const std::string key = std::to_string(node) + "#" + pairing_key(prefix);
    auto it = ids_.find(key);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(infos_.size());
    ids_.emplace(key, id);
    infos_.push_back({});
    {
      HistoryInfo info;
      info.node = node;
      info.prefix = prefix;
      info.key = e_.node_path(node) + "#" + pairing_key(prefix);
      info.avail = available_agents(e_, prefix, node);
      if (spec_.variant == GameVariant::Gamma1) {
        info.actors = info.avail.side_a;
        for (AgentId b : info.avail.side_b) info.fixed_rols.emplace(b, truthful_rol(b, info.avail.side_a));
      } else {
        info.actors = info.avail.side_a;
        info.actors.insert(info.actors.end(), info.avail.side_b.begin(), info.avail.side_b.end());
      }
      for (AgentId k : info.actors) {
        const auto& partners = e_.agent(k).side == Side::A ? info.avail.side_b : info.avail.side_a;
        info.action_sets.push_back(actions_for(k, partners));
        info.profile_count = mul_guard(info.profile_count, info.action_sets.back().size());
      }
      if (info.profile_count > spec_.strategy_limit) throw GameTooLarge(spec_.strategy_limit);
      infos_[static_cast<std::size_t>(id)] = std::move(info);
    }

    // expand every action profile into a stage outcome and its successors
    std::map<std::string, int> outcome_ids;
    std::vector<std::size_t> idx(infos_[static_cast<std::size_t>(id)].actors.size(), 0);
    const int period = e_.depth(node);
    while (true) {
      const HistoryInfo& info = infos_[static_cast<std::size_t>(id)];
      std::map<AgentId, Rol> rols = info.fixed_rols;
      for (std::size_t i = 0; i < info.actors.size(); ++i) rols[info.actors[i]] = info.action_sets[i][idx[i]];
      PeriodMatching stage = spot_run(e_, mechanism_for(period), info.avail.side_a, info.avail.side_b, rols);
      PeriodMatching pm_cum = info.prefix;
      for (const auto& [k, p] : stage) pm_cum.emplace(k, p);
      const std::string okey = pairing_key(pm_cum);
      auto oit = outcome_ids.find(okey);
      int oid;
      if (oit == outcome_ids.end()) {
        oid = static_cast<int>(infos_[static_cast<std::size_t>(id)].outcomes.size());
        outcome_ids.emplace(okey, oid);
        StageOutcome so;
        so.pm_cum = pm_cum;
        std::vector<NodeId> children = e_.node(node).children;
        infos_[static_cast<std::size_t>(id)].outcomes.push_back(std::move(so));
        for (NodeId c : children) {
          int child = discover(c, infos_[static_cast<std::size_t>(id)].outcomes[static_cast<std::size_t>(oid)].pm_cum);
          infos_[static_cast<std::size_t>(id)].outcomes[static_cast<std::size_t>(oid)].child_history.push_back(child);
        }
      } else {
        oid = oit->second;
      }
      infos_[static_cast<std::size_t>(id)].profile_to_outcome.push_back(oid);
      std::size_t i = 0;
      for (; i < idx.size(); ++i) {
        if (++idx[i] < infos_[static_cast<std::size_t>(id)].action_sets[i].size()) break;
        idx[i] = 0;
      }
      if (idx.empty() || i == idx.size()) break;
    }
    return id;
  }

  std::size_t profile_index(const HistoryInfo& info, const std::vector<std::size_t>& idx) const {
    std::size_t flat = 0;
    for (std::size_t i = idx.size(); i-- > 0;) flat = flat * info.action_sets[i].size() + idx[i];
    return flat;
  }

  const StageOutcome& outcome_of(const HistoryInfo& info, const std::vector<std::size_t>& idx) const {
    return info.outcomes[static_cast<std::size_t>(info.profile_to_outcome[profile_index(info, idx)])];
  }

  // --- terminal stages -------------------------------------------------

  std::map<AgentId, Rational> terminal_values(const HistoryInfo& info, const StageOutcome& o) const {
    std::map<AgentId, Rational> out;
    auto value_of = [&](AgentId k) {
      AgentId p = partner_of(o.pm_cum, k);
      return p == k ? Rational{0} : one_period_utility(e_, k, p);
    };
    for (AgentId a : info.avail.side_a) out.emplace(a, value_of(a));
    for (AgentId b : info.avail.side_b) out.emplace(b, value_of(b));
    return out;
  }

  bool terminal_nash(const HistoryInfo& info, const std::vector<std::size_t>& idx,
                     const std::map<AgentId, Rational>& vals) const {
    for (std::size_t i = 0; i < info.actors.size(); ++i) {
      const AgentId k = info.actors[i];
      std::vector<std::size_t> dev = idx;
      for (std::size_t alt = 0; alt < info.action_sets[i].size(); ++alt) {
        if (alt == idx[i]) continue;
        dev[i] = alt;
        const StageOutcome& od = outcome_of(info, dev);
        AgentId p = partner_of(od.pm_cum, k);
        Rational v = p == k ? Rational{0} : one_period_utility(e_, k, p);
        if (v > vals.at(k)) return false;
      }
    }
    return true;
  }

  bool terminal_pairwise_immune(const HistoryInfo& info, const std::vector<std::size_t>& idx,
                                const std::map<AgentId, Rational>& vals) const {
    std::map<AgentId, std::size_t> actor_pos;
    for (std::size_t i = 0; i < info.actors.size(); ++i) actor_pos[info.actors[i]] = i;
    for (AgentId a : info.avail.side_a)
      for (AgentId b : info.avail.side_b) {
        auto ai = actor_pos.find(a);
        auto bi = actor_pos.find(b);
        if (ai == actor_pos.end() || bi == actor_pos.end()) continue;
        std::vector<std::size_t> dev = idx;
        for (std::size_t ra = 0; ra < info.action_sets[ai->second].size(); ++ra)
          for (std::size_t rb = 0; rb < info.action_sets[bi->second].size(); ++rb) {
            dev[ai->second] = ra;
            dev[bi->second] = rb;
            const StageOutcome& od = outcome_of(info, dev);
            AgentId pa = partner_of(od.pm_cum, a);
            AgentId pb = partner_of(od.pm_cum, b);
            Rational va = pa == a ? Rational{0} : one_period_utility(e_, a, pa);
            Rational vb = pb == b ? Rational{0} : one_period_utility(e_, b, pb);
            if (va > vals.at(a) && vb > vals.at(b)) return false;
          }
        dev[ai->second] = idx[ai->second];
        dev[bi->second] = idx[bi->second];
      }
    return true;
  }

  // values one agent can reach at a terminal history by deviating alone
  // against a fixed continuation entry
  std::vector<Rational> solo_reachable(const HistoryInfo& info, const EqEntry& entry, AgentId k) const {
    std::vector<Rational> out;
    std::size_t pos = info.actors.size();
    for (std::size_t i = 0; i < info.actors.size(); ++i)
      if (info.actors[i] == k) pos = i;
    auto value_from = [&](const StageOutcome& o) {
      AgentId p = partner_of(o.pm_cum, k);
      return p == k ? Rational{0} : one_period_utility(e_, k, p);
    };
    if (pos == info.actors.size()) {
      out.push_back(value_from(outcome_of(info, entry.stage_actions)));
      return out;
    }
    std::vector<std::size_t> dev = entry.stage_actions;
    for (std::size_t ra = 0; ra < info.action_sets[pos].size(); ++ra) {
      dev[pos] = ra;
      out.push_back(value_from(outcome_of(info, dev)));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // value pairs (a, b) can reach at a terminal history by jointly deviating
  // one shot against a fixed continuation entry
  std::vector<std::pair<Rational, Rational>> joint_reachable(const HistoryInfo& info, const EqEntry& entry,
                                                             AgentId a, AgentId b) const {
    std::vector<std::pair<Rational, Rational>> out;
    std::map<AgentId, std::size_t> actor_pos;
    for (std::size_t i = 0; i < info.actors.size(); ++i) actor_pos[info.actors[i]] = i;
    auto ai = actor_pos.find(a);
    auto bi = actor_pos.find(b);
    auto value_from = [&](const StageOutcome& o, AgentId k) {
      AgentId p = partner_of(o.pm_cum, k);
      return p == k ? Rational{0} : one_period_utility(e_, k, p);
    };
    std::vector<std::size_t> dev = entry.stage_actions;
    const std::size_t na = ai == actor_pos.end() ? 1 : info.action_sets[ai->second].size();
    const std::size_t nb = bi == actor_pos.end() ? 1 : info.action_sets[bi->second].size();
    for (std::size_t ra = 0; ra < na; ++ra)
      for (std::size_t rb = 0; rb < nb; ++rb) {
        if (ai != actor_pos.end()) dev[ai->second] = ra;
        if (bi != actor_pos.end()) dev[bi->second] = rb;
        const StageOutcome& od = outcome_of(info, dev);
        out.push_back({value_from(od, a), value_from(od, b)});
      }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // --- interior deterrence constraints ---------------------------------

  struct SingleDev {
    AgentId agent;
    Rational fixed;               // utility if matched immediately by the deviation
    bool matched_now = false;
    std::vector<int> targets;     // successor histories per child when unmatched
  };
  struct PairDev {
    AgentId a, b;
    bool a_matched = false, b_matched = false;
    Rational a_fixed{0}, b_fixed{0};
    std::vector<int> targets;  // successor histories per child
  };

  const std::vector<EqEntry>& solve(int h) {
    auto memo = eq_memo_.find(h);
    if (memo != eq_memo_.end()) return memo->second;
    const HistoryInfo& info = infos_[static_cast<std::size_t>(h)];
    std::vector<EqEntry> result;

    if (e_.is_leaf(info.node)) {
      std::vector<std::size_t> idx(info.actors.size(), 0);
      while (true) {
        const StageOutcome& o = outcome_of(info, idx);
        std::map<AgentId, Rational> vals = terminal_values(info, o);
        bool keep = terminal_nash(info, idx, vals);
        if (keep && spec_.variant == GameVariant::Gamma2)
          keep = terminal_pairwise_immune(info, idx, vals);
        if (keep) {
          EqEntry entry;
          entry.stage_actions = idx;
          entry.outcome[info.node] = o.pm_cum;
          entry.values = std::move(vals);
          entry.outcome_key = pairing_key(o.pm_cum);
          std::map<AgentId, Rol> stage;
          for (std::size_t i = 0; i < info.actors.size(); ++i) stage[info.actors[i]] = info.action_sets[i][idx[i]];
          entry.play[info.key] = std::move(stage);
          // only distinct outcomes matter upward unless pair deterrence needs
          // the representative's stage actions
          bool fresh = true;
          if (spec_.variant == GameVariant::Gamma1) {
            for (const auto& prev : result) fresh = fresh && prev.outcome_key != entry.outcome_key;
          }
          if (fresh) result.push_back(std::move(entry));
          if (result.size() > spec_.strategy_limit) throw GameTooLarge(spec_.strategy_limit);
        }
        std::size_t i = 0;
        for (; i < idx.size(); ++i) {
          if (++idx[i] < info.action_sets[i].size()) break;
          idx[i] = 0;
        }
        if (idx.empty() || i == idx.size()) break;
      }
      eq_memo_.emplace(h, std::move(result));
      return eq_memo_.at(h);
    }

    // subgame perfection requires equilibrium play at every history below,
    // reached or not; one empty successor empties this whole subgame
    for (const auto& o : info.outcomes)
      for (int child : o.child_history)
        if (solve(child).empty()) {
          eq_memo_.emplace(h, std::move(result));
          return eq_memo_.at(h);
        }

    // interior history: for each stage profile, search for continuation
    // selections that sustain it
    const auto& children = e_.node(info.node).children;
    std::set<std::string> seen_outcomes;
    std::vector<std::size_t> idx(info.actors.size(), 0);
    while (true) {
      const StageOutcome& o = outcome_of(info, idx);
      // single deviations
      std::vector<SingleDev> single_devs;
      for (std::size_t i = 0; i < info.actors.size(); ++i) {
        const AgentId k = info.actors[i];
        std::vector<std::size_t> dev = idx;
        for (std::size_t alt = 0; alt < info.action_sets[i].size(); ++alt) {
          if (alt == idx[i]) continue;
          dev[i] = alt;
          const StageOutcome& od = outcome_of(info, dev);
          SingleDev sd;
          sd.agent = k;
          AgentId p = partner_of(od.pm_cum, k);
          if (p != k) {
            sd.matched_now = true;
            sd.fixed = one_period_utility(e_, k, p);
          } else {
            sd.targets = od.child_history;
          }
          single_devs.push_back(std::move(sd));
        }
      }
      // joint pair deviations (second-to-last stage only; the solver rejects
      // deeper pairwise games up front)
      std::vector<PairDev> pair_devs;
      if (spec_.variant == GameVariant::Gamma2) {
        std::map<AgentId, std::size_t> actor_pos;
        for (std::size_t i = 0; i < info.actors.size(); ++i) actor_pos[info.actors[i]] = i;
        for (AgentId a : info.avail.side_a)
          for (AgentId b : info.avail.side_b) {
            const std::size_t pa = actor_pos.at(a);
            const std::size_t pb = actor_pos.at(b);
            std::vector<std::size_t> dev = idx;
            for (std::size_t ra = 0; ra < info.action_sets[pa].size(); ++ra)
              for (std::size_t rb = 0; rb < info.action_sets[pb].size(); ++rb) {
                if (ra == idx[pa] && rb == idx[pb]) continue;
                dev[pa] = ra;
                dev[pb] = rb;
                const StageOutcome& od = outcome_of(info, dev);
                PairDev pd;
                pd.a = a;
                pd.b = b;
                AgentId qa = partner_of(od.pm_cum, a);
                AgentId qb = partner_of(od.pm_cum, b);
                pd.a_matched = qa != a;
                pd.b_matched = qb != b;
                if (pd.a_matched) pd.a_fixed = one_period_utility(e_, a, qa);
                if (pd.b_matched) pd.b_fixed = one_period_utility(e_, b, qb);
                pd.targets = od.child_history;
                pair_devs.push_back(std::move(pd));
              }
            dev[pa] = idx[pa];
            dev[pb] = idx[pb];
          }
      }

      // off-path successors that deterrence may rely on
      std::vector<int> off_path;
      {
        std::set<int> on(o.child_history.begin(), o.child_history.end());
        std::set<int> offs;
        for (const auto& sd : single_devs)
          for (int t : sd.targets)
            if (!on.count(t)) offs.insert(t);
        for (const auto& pd : pair_devs)
          for (int t : pd.targets)
            if (!on.count(t)) offs.insert(t);
        off_path.assign(offs.begin(), offs.end());
      }

      // iterate on-path continuation choices, then search deterrence choices
      std::vector<const std::vector<EqEntry>*> on_sets;
      for (int c : o.child_history) on_sets.push_back(&solve(c));
      std::vector<const std::vector<EqEntry>*> off_sets;
      for (int s : off_path) off_sets.push_back(&solve(s));
      std::uint64_t on_combos = 1;
      for (const auto* s : on_sets) on_combos = mul_guard(on_combos, s->size());
      std::uint64_t off_combos = 1;
      for (const auto* s : off_sets) off_combos = mul_guard(off_combos, s->size());
      if (mul_guard(on_combos, off_combos) > spec_.strategy_limit) throw GameTooLarge(spec_.strategy_limit);

      std::vector<std::size_t> on_pick(on_sets.size(), 0);
      while (true) {
        std::map<int, const EqEntry*> chosen;  // history -> fixed selection
        for (std::size_t i = 0; i < on_sets.size(); ++i)
          chosen[o.child_history[i]] = &(*on_sets[i])[on_pick[i]];

        std::map<AgentId, Rational> vals;
        auto value_of = [&](AgentId k) -> Rational {
          AgentId p = partner_of(o.pm_cum, k);
          if (p != k) return one_period_utility(e_, k, p);
          Rational total{0};
          for (std::size_t i = 0; i < children.size(); ++i)
            total += e_.node(children[i]).prob * chosen.at(o.child_history[i])->values.at(k);
          return Rational(e_.table.delta_of(e_.agent(k).characteristic) * total);
        };
        for (AgentId a : info.avail.side_a) vals.emplace(a, value_of(a));
        for (AgentId b : info.avail.side_b) vals.emplace(b, value_of(b));

        // matched-now deviations have no selection freedom
        bool dead = false;
        for (const auto& sd : single_devs)
          if (sd.matched_now && sd.fixed > vals.at(sd.agent)) dead = true;
        if (spec_.variant == GameVariant::Gamma2)
          for (const auto& pd : pair_devs)
            if (pd.a_matched && pd.b_matched && pd.a_fixed > vals.at(pd.a) && pd.b_fixed > vals.at(pd.b))
              dead = true;

        if (!dead) {
          // existential search over off-path selections
          std::vector<std::size_t> off_pick(off_sets.size(), 0);
          bool feasible_found = off_sets.empty() && deterred(info, o, single_devs, pair_devs, chosen, vals);
          if (!off_sets.empty()) {
            while (true) {
              auto trial = chosen;
              for (std::size_t i = 0; i < off_sets.size(); ++i) trial[off_path[i]] = &(*off_sets[i])[off_pick[i]];
              if (deterred(info, o, single_devs, pair_devs, trial, vals)) {
                chosen = trial;
                feasible_found = true;
                break;
              }
              std::size_t i = 0;
              for (; i < off_pick.size(); ++i) {
                if (++off_pick[i] < off_sets[i]->size()) break;
                off_pick[i] = 0;
              }
              if (i == off_pick.size()) break;
            }
          }
          if (feasible_found) {
            EqEntry entry;
            entry.stage_actions = idx;
            entry.outcome[info.node] = o.pm_cum;
            for (std::size_t i = 0; i < on_sets.size(); ++i) {
              const EqEntry& sub = (*on_sets[i])[on_pick[i]];
              for (const auto& [n, pm] : sub.outcome) entry.outcome[n] = pm;
            }
            entry.values = vals;
            std::ostringstream okey;
            for (const auto& [n, pm] : entry.outcome) okey << n << ":" << pairing_key(pm) << ";";
            entry.outcome_key = okey.str();
            std::map<AgentId, Rol> stage;
            for (std::size_t i = 0; i < info.actors.size(); ++i)
              stage[info.actors[i]] = info.action_sets[i][idx[i]];
            entry.play[info.key] = std::move(stage);
            for (const auto& [hh, sel] : chosen)
              for (const auto& [hk, rols] : sel->play)
                for (const auto& [agent, rol] : rols) entry.play[hk][agent] = rol;
            if (seen_outcomes.insert(entry.outcome_key).second) {
              result.push_back(std::move(entry));
              if (result.size() > spec_.strategy_limit) throw GameTooLarge(spec_.strategy_limit);
            }
          }
        }

        std::size_t i = 0;
        for (; i < on_pick.size(); ++i) {
          if (++on_pick[i] < on_sets[i]->size()) break;
          on_pick[i] = 0;
        }
        if (on_pick.empty() || i == on_pick.size()) break;
      }
      if (!advance(idx, info)) break;
    }
    eq_memo_.emplace(h, std::move(result));
    return eq_memo_.at(h);
  }

  static bool advance(std::vector<std::size_t>& idx, const HistoryInfo& info) {
    std::size_t i = 0;
    for (; i < idx.size(); ++i) {
      if (++idx[i] < info.action_sets[i].size()) return true;
      idx[i] = 0;
    }
    return false;
  }

  bool deterred(const HistoryInfo& info, const StageOutcome& o, const std::vector<SingleDev>& single_devs,
                const std::vector<PairDev>& pair_devs, const std::map<int, const EqEntry*>& chosen,
                const std::map<AgentId, Rational>& vals) const {
    const auto& children = e_.node(info.node).children;
    (void)o;
    for (const auto& sd : single_devs) {
      if (sd.matched_now) {
        if (sd.fixed > vals.at(sd.agent)) return false;
        continue;
      }
      Rational total{0};
      for (std::size_t i = 0; i < children.size(); ++i)
        total += e_.node(children[i]).prob * chosen.at(sd.targets[i])->values.at(sd.agent);
      Rational dev_val = e_.table.delta_of(e_.agent(sd.agent).characteristic) * total;
      if (dev_val > vals.at(sd.agent)) return false;
    }
    for (const auto& pd : pair_devs) {
      // achievable value pairs for (a,b) from this joint deviation, allowing
      // further one-shot joint play at the reached terminal histories
      std::vector<std::pair<Rational, Rational>> acc = {{Rational{0}, Rational{0}}};
      if (!pd.a_matched || !pd.b_matched) {
        for (std::size_t i = 0; i < children.size(); ++i) {
          const EqEntry& sel = *chosen.at(pd.targets[i]);
          const HistoryInfo& tinfo = infos_[static_cast<std::size_t>(pd.targets[i])];
          std::vector<std::pair<Rational, Rational>> reach;
          if (!pd.a_matched && !pd.b_matched) {
            reach = joint_reachable(tinfo, sel, pd.a, pd.b);
          } else if (!pd.a_matched) {
            // only a continues; b's stage value is fixed
            for (const Rational& va : solo_reachable(tinfo, sel, pd.a)) reach.push_back({va, Rational{0}});
          } else {
            for (const Rational& vb : solo_reachable(tinfo, sel, pd.b)) reach.push_back({Rational{0}, vb});
          }
          const Rational p = e_.node(children[i]).prob;
          std::vector<std::pair<Rational, Rational>> next;
          for (const auto& [xa, xb] : acc)
            for (const auto& [ya, yb] : reach) next.push_back({xa + p * ya, xb + p * yb});
          std::sort(next.begin(), next.end());
          next.erase(std::unique(next.begin(), next.end()), next.end());
          acc = std::move(next);
          if (acc.size() > 4096) throw GameTooLarge(spec_.strategy_limit);
        }
      }
      const Rational da = e_.table.delta_of(e_.agent(pd.a).characteristic);
      const Rational db = e_.table.delta_of(e_.agent(pd.b).characteristic);
      for (const auto& [xa, xb] : acc) {
        Rational va = pd.a_matched ? pd.a_fixed : da * xa;
        Rational vb = pd.b_matched ? pd.b_fixed : db * xb;
        if (va > vals.at(pd.a) && vb > vals.at(pd.b)) return false;
      }
    }
    return true;
  }
};

}  // namespace game_detail

/// Exhaustive backward induction over public histories. Returns every pure
/// subgame perfect equilibrium outcome (Gamma1) or pure pairwise subgame
/// perfect equilibrium outcome (Gamma2) over the truncation-or-empty report
/// space, each with one representative strategy profile (distinct profiles
/// inducing the same play differ only in payoff-irrelevant reports).
inline std::vector<Equilibrium> find_pure_spne(const GameSpec& spec) {
  if (!spec.economy) throw std::invalid_argument("find_pure_spne: no economy");
  game_detail::GameSolver solver(spec);
  return solver.solve_all();
}

struct EquilibriumStabilityReport {
  bool ok = true;
  std::size_t equilibrium_count = 0;
  std::vector<Matching> outcomes;  // distinct equilibrium outcomes
  std::optional<Matching> counterexample;
};

/// Every equilibrium outcome must satisfy the stability notion matching the
/// game variant: side-A dynamic stability for Gamma1, full dynamic stability
/// for Gamma2.
inline EquilibriumStabilityReport verify_equilibrium_stability(const GameSpec& spec, SolveContext& ctx) {
  EquilibriumStabilityReport rep;
  const Economy& e = *spec.economy;
  std::vector<Equilibrium> eqs = find_pure_spne(spec);
  rep.equilibrium_count = eqs.size();
  std::set<std::string> seen;
  for (const auto& eq : eqs)
    if (seen.insert(canonical_key(eq.outcome, e)).second) rep.outcomes.push_back(eq.outcome);
  for (const auto& m : rep.outcomes) {
    DSVerdict v = spec.variant == GameVariant::Gamma1 ? side_a_dynamically_stable(m, e, ctx)
                                                      : is_dynamically_stable(m, e, ctx);
    if (!v.stable) {
      rep.ok = false;
      rep.counterexample = m;
      break;
    }
  }
  return rep;
}

}  // namespace dynstab
