#pragma once

#include <json.hpp>

#include "dynstab/dynamic_stability.hpp"
#include "dynstab/strategic.hpp"

namespace dynstab {

using Json = nlohmann::json;

inline void reject_unknown_keys(const Json& obj, const std::vector<std::string>& allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + ": expected an object");
  for (const auto& [key, val] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw SchemaError(where + ": unknown key '" + key + "'");
}

inline Rational rational_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw SchemaError(where + ": expected a [numerator, denominator] integer pair");
  long long num = j[0].get<long long>();
  long long den = j[1].get<long long>();
  if (den == 0) throw SchemaError(where + ": zero denominator");
  return Rational(num, den);
}

inline Json rational_to_json(const Rational& r) {
  return Json::array({static_cast<long long>(numerator(r)), static_cast<long long>(denominator(r))});
}

inline Json matching_to_json(const Matching& m, const Economy& e) {
  Json pairs = Json::object();
  for (NodeId n = 1; n < e.node_count(); ++n) {
    const PeriodMatching& pm = m.at(n);
    if (pm.empty()) continue;
    Json list = Json::array();
    for (const auto& [k, p] : pm) {
      if (e.agent(k).side != Side::A || k > p) continue;
      list.push_back(Json::array({k, p}));
    }
    pairs[e.node_path(n)] = std::move(list);
  }
  return Json{{"pairs", std::move(pairs)}};
}

inline Matching parse_matching(const Json& j, const Economy& e) {
  reject_unknown_keys(j, {"pairs"}, "matching");
  if (!j.contains("pairs")) throw SchemaError("matching: missing 'pairs'");
  Matching m = Matching::empty_for(e);
  for (const auto& [path, list] : j.at("pairs").items()) {
    auto n = e.node_by_path(path);
    if (!n || *n == e.root()) throw SchemaError("matching: unknown node path '" + path + "'");
    if (!list.is_array()) throw SchemaError("matching: pairs at '" + path + "' must be an array");
    for (const auto& entry : list) {
      if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() ||
          !entry[1].is_number_integer())
        throw SchemaError("matching: pair entries must be [agentA, agentB]");
      AgentId a = entry[0].get<AgentId>();
      AgentId b = entry[1].get<AgentId>();
      if (!e.has_agent(a) || !e.has_agent(b)) throw SchemaError("matching: unknown agent in pair");
      if (e.agent(a).side != Side::A || e.agent(b).side != Side::B)
        throw SchemaError("matching: pair entries must be [side-A agent, side-B agent]");
      add_pair(m.at(*n), a, b);
    }
  }
  return m;
}

inline Json economy_to_json(const Economy& e) {
  Json chars;
  chars["sideA"] = e.table.side_a;
  chars["sideB"] = e.table.side_b;
  Json u = Json::object(), v = Json::object();
  for (const auto& a : e.table.side_a) {
    Json urow = Json::object(), vrow = Json::object();
    for (const auto& b : e.table.side_b) {
      urow[b] = rational_to_json(e.table.u_of(a, b));
      vrow[b] = rational_to_json(e.table.v_of(a, b));
    }
    u[a] = std::move(urow);
    v[a] = std::move(vrow);
  }
  chars["u"] = std::move(u);
  chars["v"] = std::move(v);
  Json delta = Json::object();
  for (const auto& [c, d] : e.table.delta) delta[c] = rational_to_json(d);
  chars["delta"] = std::move(delta);

  Json agents = Json::array();
  for (const auto& [id, ag] : e.roster)
    agents.push_back(Json{{"id", id}, {"side", side_name(ag.side)}, {"characteristic", ag.characteristic}});

  std::function<Json(NodeId)> emit = [&](NodeId n) {
    Json out;
    if (n != e.root()) {
      out["arrivals"] = Json{{"A", e.node(n).event.side_a}, {"B", e.node(n).event.side_b}};
      out["prob"] = rational_to_json(e.node(n).prob);
    }
    Json children = Json::array();
    for (NodeId c : e.node(n).children) children.push_back(emit(c));
    out["children"] = std::move(children);
    return out;
  };

  return Json{{"horizon", e.horizon},
              {"characteristics", std::move(chars)},
              {"agents", std::move(agents)},
              {"tree", emit(e.root())}};
}

inline Economy parse_economy(const Json& j) {
  reject_unknown_keys(j, {"horizon", "characteristics", "agents", "tree"}, "economy");
  for (const char* key : {"horizon", "characteristics", "agents", "tree"})
    if (!j.contains(key)) throw SchemaError(std::string("economy: missing '") + key + "'");
  if (!j.at("horizon").is_number_integer()) throw SchemaError("economy: horizon must be an integer");

  const Json& cj = j.at("characteristics");
  reject_unknown_keys(cj, {"sideA", "sideB", "u", "v", "delta"}, "characteristics");
  CharacteristicTable table;
  table.side_a = cj.at("sideA").get<std::vector<std::string>>();
  table.side_b = cj.at("sideB").get<std::vector<std::string>>();
  for (const auto& [a, row] : cj.at("u").items())
    for (const auto& [b, val] : row.items()) table.u[{a, b}] = rational_from_json(val, "u(" + a + "," + b + ")");
  for (const auto& [a, row] : cj.at("v").items())
    for (const auto& [b, val] : row.items()) table.v[{a, b}] = rational_from_json(val, "v(" + a + "," + b + ")");
  for (const auto& [c, val] : cj.at("delta").items()) table.delta[c] = rational_from_json(val, "delta(" + c + ")");

  std::map<AgentId, Agent> roster;
  for (const auto& aj : j.at("agents")) {
    reject_unknown_keys(aj, {"id", "side", "characteristic"}, "agent");
    Agent ag;
    ag.id = aj.at("id").get<AgentId>();
    const std::string side = aj.at("side").get<std::string>();
    if (side != "A" && side != "B") throw SchemaError("agent: side must be \"A\" or \"B\"");
    ag.side = side == "A" ? Side::A : Side::B;
    ag.characteristic = aj.at("characteristic").get<std::string>();
    if (!roster.emplace(ag.id, ag).second)
      throw SchemaError("agent: duplicate id " + std::to_string(ag.id));
  }

  std::function<NodeSpec(const Json&, bool)> parse_node = [&](const Json& nj, bool is_root) {
    reject_unknown_keys(nj, is_root ? std::vector<std::string>{"children"}
                                    : std::vector<std::string>{"arrivals", "prob", "children"},
                        "tree node");
    NodeSpec spec;
    if (!is_root) {
      if (nj.contains("arrivals")) {
        reject_unknown_keys(nj.at("arrivals"), {"A", "B"}, "arrivals");
        if (nj.at("arrivals").contains("A"))
          spec.event.side_a = nj.at("arrivals").at("A").get<std::vector<AgentId>>();
        if (nj.at("arrivals").contains("B"))
          spec.event.side_b = nj.at("arrivals").at("B").get<std::vector<AgentId>>();
      }
      spec.prob = nj.contains("prob") ? rational_from_json(nj.at("prob"), "prob") : Rational{1};
    }
    if (nj.contains("children"))
      for (const auto& c : nj.at("children")) spec.children.push_back(parse_node(c, false));
    return spec;
  };
  NodeSpec root = parse_node(j.at("tree"), true);
  return make_economy(j.at("horizon").get<int>(), std::move(table), std::move(roster), root.children);
}

inline Json violations_to_json(const ValidationResult& res) {
  Json out = Json::array();
  for (const auto& v : res.violations) out.push_back(Json{{"node", v.path}, {"message", v.message}});
  return out;
}

inline Json block_witness_to_json(const BlockWitness& w, const Economy& e) {
  Json out;
  out["kind"] = w.kind == BlockWitness::Kind::PairBlock ? "pair-block" : "ir-violation";
  out["agents"] = w.second ? Json::array({w.first, *w.second}) : Json::array({w.first});
  if (w.node >= 0) out["node"] = e.node_path(w.node);
  return out;
}

inline Json ds_witness_to_json(const DSWitness& w, const Economy& e) {
  Json out;
  switch (w.condition) {
    case DSWitness::Condition::PairBlock: out["condition"] = "pair-block"; break;
    case DSWitness::Condition::WaitingA: out["condition"] = "waiting-A"; break;
    case DSWitness::Condition::WaitingB: out["condition"] = "waiting-B"; break;
  }
  out["node"] = w.node_path;
  if (w.pair) out["pair"] = Json::array({w.pair->first, w.pair->second});
  if (w.agent) {
    out["agent"] = *w.agent;
    out["matching_payoff"] = rational_to_json(w.matching_payoff);
    out["every_conjecture_beats_matching"] = true;
    if (w.conjectures_empty) {
      out["conjectures_empty"] = true;
    } else {
      out["worst_conjecture_payoff"] = rational_to_json(w.guarantee_payoff);
      if (w.worst_conjecture) out["worst_conjecture"] = matching_to_json(*w.worst_conjecture, e);
    }
  }
  return out;
}

inline Json delay_check_to_json(const DelayCheck& dc, const Economy& e) {
  Json out;
  switch (dc.status) {
    case DelayCheck::Status::WitnessFound: out["status"] = "witness-found"; break;
    case DelayCheck::Status::NotPairwiseStable: out["status"] = "not-pairwise-stable"; break;
    case DelayCheck::Status::NotIndividuallyRational: out["status"] = "not-individually-rational"; break;
    case DelayCheck::Status::NotExchangeable: out["status"] = "not-exchangeable"; break;
    case DelayCheck::Status::MatchingStable: out["status"] = "dynamically-stable-for-waiting"; break;
    case DelayCheck::Status::NoArrivingAgentFailure: out["status"] = "no-arriving-agent-failure"; break;
    case DelayCheck::Status::NoFullSupport: out["status"] = "no-full-support"; break;
    case DelayCheck::Status::NoPositiveGain: out["status"] = "no-positive-gain"; break;
  }
  if (dc.witness) {
    out["witness"] = Json{{"period", dc.witness->period},
                          {"node", e.node_path(dc.witness->node)},
                          {"agent", dc.witness->agent},
                          {"gain", rational_to_json(dc.witness->gain)}};
  }
  if (dc.pair_block) out["pair_block"] = ds_witness_to_json(*dc.pair_block, e);
  return out;
}

}  // namespace dynstab
