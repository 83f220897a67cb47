#pragma once

#include "dynstab/matching.hpp"

namespace dynstab {

/// A bundled economy plus the named matchings discussed alongside it.
struct Fixture {
  std::string name;
  Economy economy;
  std::map<std::string, Matching> matchings;
};

namespace fixture_detail {

inline void set_u(CharacteristicTable& t, const std::string& a, const std::string& b, long long val) {
  t.u[{a, b}] = Rational(val);
}
inline void set_v(CharacteristicTable& t, const std::string& a, const std::string& b, long long val) {
  t.v[{a, b}] = Rational(val);
}

inline Matching chain_matching(const Economy& e,
                               const std::vector<std::vector<std::pair<AgentId, AgentId>>>& new_pairs) {
  Matching m = Matching::empty_for(e);
  NodeId cur = e.root();
  PeriodMatching pm;
  for (const auto& stage : new_pairs) {
    if (e.node(cur).children.size() != 1)
      throw std::invalid_argument("chain_matching requires a deterministic economy");
    cur = e.node(cur).children[0];
    for (const auto& [a, b] : stage) add_pair(pm, a, b);
    m.at(cur) = pm;
  }
  return m;
}

/// Nine mathematicians, two periods, one realization: three side-A agents and
/// two side-B agents arrive first, two more side-B agents arrive later.
inline Fixture example1() {
  constexpr AgentId erdos = 1, kuhn = 2, gale = 3;
  constexpr AgentId renyi = 11, shapley = 12, tucker = 13, nash = 14;

  CharacteristicTable t;
  t.side_a = {"erdos", "kuhn", "gale"};
  t.side_b = {"renyi", "shapley", "tucker", "nash"};
  set_u(t, "erdos", "renyi", 3);
  set_u(t, "erdos", "shapley", -1);
  set_u(t, "erdos", "tucker", 10);
  set_u(t, "erdos", "nash", 1);
  set_u(t, "kuhn", "renyi", -1);
  set_u(t, "kuhn", "shapley", 2);
  set_u(t, "kuhn", "tucker", 10);
  set_u(t, "kuhn", "nash", 3);
  set_u(t, "gale", "renyi", -1);
  set_u(t, "gale", "shapley", 3);
  set_u(t, "gale", "tucker", 2);
  set_u(t, "gale", "nash", -1);
  set_v(t, "erdos", "renyi", 1);
  set_v(t, "kuhn", "renyi", -1);
  set_v(t, "gale", "renyi", -1);
  set_v(t, "erdos", "shapley", -1);
  set_v(t, "kuhn", "shapley", 2);
  set_v(t, "gale", "shapley", 1);
  set_v(t, "erdos", "tucker", 2);
  set_v(t, "kuhn", "tucker", 1);
  set_v(t, "gale", "tucker", 3);
  set_v(t, "erdos", "nash", 1);
  set_v(t, "kuhn", "nash", 2);
  set_v(t, "gale", "nash", -1);
  for (const auto& c : t.side_a) t.delta[c] = Rational(1, 2);
  for (const auto& c : t.side_b) t.delta[c] = Rational(1, 2);

  std::map<AgentId, Agent> roster = {
      {erdos, {erdos, Side::A, "erdos"}},     {kuhn, {kuhn, Side::A, "kuhn"}},
      {gale, {gale, Side::A, "gale"}},        {renyi, {renyi, Side::B, "renyi"}},
      {shapley, {shapley, Side::B, "shapley"}}, {tucker, {tucker, Side::B, "tucker"}},
      {nash, {nash, Side::B, "nash"}},
  };

  Fixture f;
  f.name = "example1";
  f.economy = make_chain_economy(t, roster,
                                 {ArrivalEvent{{erdos, kuhn, gale}, {renyi, shapley}},
                                  ArrivalEvent{{}, {tucker, nash}}});
  const Economy& e = f.economy;
  f.matchings["mL"] = chain_matching(e, {{{erdos, renyi}, {gale, shapley}}, {{kuhn, tucker}}});
  f.matchings["mC"] = chain_matching(e, {{{erdos, renyi}}, {{kuhn, shapley}, {gale, tucker}}});
  f.matchings["mR"] = chain_matching(e, {{{gale, shapley}}, {{erdos, tucker}, {kuhn, nash}}});
  f.matchings["mbarL"] = chain_matching(e, {{{erdos, renyi}, {kuhn, shapley}}, {{gale, tucker}}});
  f.matchings["mbarE1"] = chain_matching(e, {{{gale, shapley}}, {{kuhn, nash}, {erdos, tucker}}});
  f.matchings["mbarE2"] = chain_matching(e, {{{kuhn, shapley}}, {{gale, tucker}, {erdos, renyi}}});
  f.matchings["mbarE3"] = chain_matching(e, {{{gale, shapley}}, {{kuhn, tucker}, {erdos, renyi}}});
  f.matchings["mbarE4"] = chain_matching(e, {{{gale, shapley}, {kuhn, renyi}}, {{erdos, tucker}}});
  return f;
}

/// Two-cohort admissions variant: one seat in period 1, two in period 2, and
/// a late-arriving applicant.
inline Fixture college() {
  constexpr AgentId kuhn = 1, gale = 2, erdos = 3;
  constexpr AgentId shapley = 11, tucker = 12, nash = 13;

  CharacteristicTable t;
  t.side_a = {"kuhn", "gale", "erdos"};
  t.side_b = {"shapley", "tucker", "nash"};
  set_u(t, "kuhn", "shapley", 2);
  set_u(t, "kuhn", "tucker", 10);
  set_u(t, "kuhn", "nash", 3);
  set_u(t, "gale", "shapley", 3);
  set_u(t, "gale", "tucker", 2);
  set_u(t, "gale", "nash", -1);
  set_u(t, "erdos", "shapley", -1);
  set_u(t, "erdos", "tucker", -1);
  set_u(t, "erdos", "nash", 1);
  set_v(t, "kuhn", "shapley", 2);
  set_v(t, "gale", "shapley", 1);
  set_v(t, "erdos", "shapley", -1);
  set_v(t, "kuhn", "tucker", 1);
  set_v(t, "gale", "tucker", 2);
  set_v(t, "erdos", "tucker", -1);
  set_v(t, "kuhn", "nash", 2);
  set_v(t, "gale", "nash", -1);
  set_v(t, "erdos", "nash", 1);
  for (const auto& c : t.side_a) t.delta[c] = Rational(1, 2);
  for (const auto& c : t.side_b) t.delta[c] = Rational(1, 2);

  std::map<AgentId, Agent> roster = {
      {kuhn, {kuhn, Side::A, "kuhn"}},          {gale, {gale, Side::A, "gale"}},
      {erdos, {erdos, Side::A, "erdos"}},       {shapley, {shapley, Side::B, "shapley"}},
      {tucker, {tucker, Side::B, "tucker"}},    {nash, {nash, Side::B, "nash"}},
  };

  Fixture f;
  f.name = "college";
  f.economy = make_chain_economy(t, roster,
                                 {ArrivalEvent{{kuhn, gale}, {shapley}},
                                  ArrivalEvent{{erdos}, {tucker, nash}}});
  const Economy& e = f.economy;
  f.matchings["mADA"] = chain_matching(e, {{{gale, shapley}}, {{kuhn, tucker}, {erdos, nash}}});
  f.matchings["mBDA"] = chain_matching(e, {{{kuhn, shapley}}, {{gale, tucker}, {erdos, nash}}});
  return f;
}

/// Two-period economy on which the set of unmatched agents differs across
/// dynamically stable matchings.
inline Fixture lonewolf() {
  constexpr AgentId a11 = 1, a12 = 2, a21 = 3, a22 = 4;
  constexpr AgentId b11 = 11, b21 = 12, b22 = 13;

  CharacteristicTable t;
  t.side_a = {"a11", "a12", "a21", "a22"};
  t.side_b = {"b11", "b21", "b22"};
  set_u(t, "a11", "b11", 2);
  set_u(t, "a11", "b21", 10);
  set_u(t, "a11", "b22", 3);
  set_u(t, "a12", "b11", 1);
  set_u(t, "a12", "b21", -1);
  set_u(t, "a12", "b22", -1);
  set_u(t, "a21", "b11", -1);
  set_u(t, "a21", "b21", 1);
  set_u(t, "a21", "b22", -1);
  set_u(t, "a22", "b11", -1);
  set_u(t, "a22", "b21", 1);
  set_u(t, "a22", "b22", 2);
  set_v(t, "a11", "b11", 2);
  set_v(t, "a12", "b11", 1);
  set_v(t, "a21", "b11", -1);
  set_v(t, "a22", "b11", -1);
  set_v(t, "a11", "b21", 2);
  set_v(t, "a12", "b21", -1);
  set_v(t, "a21", "b21", 1);
  set_v(t, "a22", "b21", 3);
  set_v(t, "a11", "b22", 2);
  set_v(t, "a12", "b22", -1);
  set_v(t, "a21", "b22", -1);
  set_v(t, "a22", "b22", 1);
  for (const auto& c : t.side_a) t.delta[c] = Rational(1, 2);
  for (const auto& c : t.side_b) t.delta[c] = Rational(1, 2);

  std::map<AgentId, Agent> roster = {
      {a11, {a11, Side::A, "a11"}}, {a12, {a12, Side::A, "a12"}}, {a21, {a21, Side::A, "a21"}},
      {a22, {a22, Side::A, "a22"}}, {b11, {b11, Side::B, "b11"}}, {b21, {b21, Side::B, "b21"}},
      {b22, {b22, Side::B, "b22"}},
  };

  Fixture f;
  f.name = "lonewolf";
  f.economy = make_chain_economy(t, roster,
                                 {ArrivalEvent{{a11, a12}, {b11}}, ArrivalEvent{{a21, a22}, {b21, b22}}});
  const Economy& e = f.economy;
  f.matchings["mL"] = chain_matching(e, {{{a11, b11}}, {{a21, b21}, {a22, b22}}});
  f.matchings["mR"] = chain_matching(e, {{{a12, b11}}, {{a11, b21}, {a22, b22}}});
  f.matchings["mbarL"] = chain_matching(e, {{{a12, b11}}, {{a11, b22}, {a22, b21}}});
  f.matchings["mbarR"] = chain_matching(e, {{}, {{a11, b21}, {a22, b22}, {a12, b11}}});
  return f;
}

}  // namespace fixture_detail

inline Fixture load_fixture(const std::string& name) {
  if (name == "example1") return fixture_detail::example1();
  if (name == "college") return fixture_detail::college();
  if (name == "lonewolf") return fixture_detail::lonewolf();
  throw std::invalid_argument("unknown fixture '" + name + "'");
}

inline std::vector<std::string> fixture_names() { return {"college", "example1", "lonewolf"}; }

}  // namespace dynstab
