// Command-line front end: parse economies and matchings, dispatch solver
// commands, emit deterministic JSON reports.
//
// Exit codes: 0 stable/success, 1 unstable or witness found, 2 input error,
// 3 resource limit exceeded.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

#include "dynstab/construct.hpp"
#include "dynstab/game.hpp"
#include "dynstab/io.hpp"

namespace {

using namespace dynstab;

constexpr int kExitStable = 0;
constexpr int kExitWitness = 1;
constexpr int kExitInput = 2;
constexpr int kExitResource = 3;

struct GlobalOptions {
  std::uint64_t limit = kDefaultEnumerationLimit;
  int threads = 1;
  bool no_timing = false;
};

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaError("malformed JSON in '" + path + "': " + ex.what());
  }
  return j;
}

Economy load_economy(const std::string& path) {
  Economy e = parse_economy(load_json(path));
  ValidationResult res = validate_economy(e);
  if (!res.ok()) {
    std::string msg = "invalid economy '" + path + "':";
    for (const auto& v : res.violations) msg += " [" + v.path + "] " + v.message + ";";
    throw SchemaError(msg);
  }
  return e;
}

Matching load_matching(const std::string& path, const Economy& e) {
  Matching m = parse_matching(load_json(path), e);
  ValidationResult res = validate_matching(m, e);
  if (!res.ok()) {
    std::string msg = "invalid matching '" + path + "':";
    for (const auto& v : res.violations) msg += " [" + v.path + "] " + v.message + ";";
    throw SchemaError(msg);
  }
  return m;
}

class Reporter {
 public:
  Reporter(const GlobalOptions& opts, const std::string& command) : opts_(opts) {
    start_ = std::chrono::steady_clock::now();
    report_["command"] = command;
  }

  Json& body() { return report_; }

  int finish(int exit_code, const SolveContext* ctx = nullptr) {
    if (ctx) {
      report_["stats"] = Json{{"matchings_enumerated", ctx->stats.matchings_enumerated},
                              {"cache_hits", ctx->stats.cache_hits},
                              {"cache_misses", ctx->stats.cache_misses}};
    }
    report_["threads"] = opts_.threads;
    if (!opts_.no_timing) {
      auto elapsed = std::chrono::steady_clock::now() - start_;
      report_["timing_ms"] =
          std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    }
    std::cout << report_.dump(2) << "\n";
    return exit_code;
  }

 private:
  const GlobalOptions& opts_;
  Json report_;
  std::chrono::steady_clock::time_point start_;
};

int cmd_validate(const GlobalOptions& opts, const std::string& economy_path,
                 const std::string& matching_path) {
  Reporter rep(opts, "validate");
  Economy e = parse_economy(load_json(economy_path));
  ValidationResult res = validate_economy(e);
  rep.body()["economy_violations"] = violations_to_json(res);
  bool ok = res.ok();
  if (ok && !matching_path.empty()) {
    Matching m = parse_matching(load_json(matching_path), e);
    ValidationResult mres = validate_matching(m, e);
    rep.body()["matching_violations"] = violations_to_json(mres);
    ok = mres.ok();
  }
  rep.body()["verdict"] = ok ? "ok" : "invalid";
  return rep.finish(ok ? kExitStable : kExitWitness);
}

int cmd_enumerate(const GlobalOptions& opts, const std::string& economy_path, bool universal) {
  Reporter rep(opts, universal ? "diag-universal-blocking" : "enumerate");
  Economy e = load_economy(economy_path);
  SolveContext ctx;
  ctx.enumeration_limit = opts.limit;
  std::vector<Matching> set =
      universal ? universal_blocking_set(e, ctx) : dynamically_stable_set(e, ctx);
  Json arr = Json::array();
  for (const auto& m : set) arr.push_back(matching_to_json(m, e));
  rep.body()["count"] = set.size();
  rep.body()["matchings"] = std::move(arr);
  rep.body()["verdict"] = universal ? "diagnostic" : "enumerated";
  return rep.finish(kExitStable, &ctx);
}

int cmd_check(const GlobalOptions& opts, const std::string& economy_path,
              const std::string& matching_path) {
  Reporter rep(opts, "check");
  Economy e = load_economy(economy_path);
  Matching m = load_matching(matching_path, e);
  SolveContext ctx;
  ctx.enumeration_limit = opts.limit;
  DSVerdict v = is_dynamically_stable(m, e, ctx);
  rep.body()["verdict"] = v.stable ? "stable" : "unstable";
  if (v.witness) rep.body()["witness"] = ds_witness_to_json(*v.witness, e);
  return rep.finish(v.stable ? kExitStable : kExitWitness, &ctx);
}

int cmd_check_static(const GlobalOptions& opts, const std::string& economy_path,
                     const std::string& matching_path) {
  Reporter rep(opts, "check-static");
  Economy e = load_economy(economy_path);
  Matching m = load_matching(matching_path, e);
  // period-by-period static stability among the agents available at each
  // node, plus individual rationality at the leaves
  Json nodes = Json::array();
  bool all_ok = true;
  for (NodeId n = 1; n < e.node_count(); ++n) {
    AvailableAgents avail = available_agents(e, m, n);
    StaticCheck sc = static_stable(e, m.at(n), avail.side_a, avail.side_b, n);
    Json entry;
    entry["node"] = e.node_path(n);
    entry["stable"] = sc.stable;
    if (sc.witness) entry["witness"] = block_witness_to_json(*sc.witness, e);
    nodes.push_back(std::move(entry));
    all_ok = all_ok && sc.stable;
  }
  auto [ir_ok, ir_witness] = is_individually_rational(m, e);
  rep.body()["individually_rational"] = ir_ok;
  if (ir_witness) rep.body()["ir_witness"] = block_witness_to_json(*ir_witness, e);
  all_ok = all_ok && ir_ok;
  rep.body()["nodes"] = std::move(nodes);
  rep.body()["verdict"] = all_ok ? "stable" : "unstable";
  return rep.finish(all_ok ? kExitStable : kExitWitness);
}

int cmd_construct(const GlobalOptions& opts, const std::string& economy_path) {
  Reporter rep(opts, "construct");
  Economy e = load_economy(economy_path);
  SolveContext ctx;
  ctx.enumeration_limit = opts.limit;
  Matching m = construct_stable_matching(e, ctx);
  rep.body()["matching"] = matching_to_json(m, e);
  rep.body()["verdict"] = "constructed";
  return rep.finish(kExitStable, &ctx);
}

int cmd_dynamic_da(const GlobalOptions& opts, const std::string& economy_path, const std::string& proposer) {
  Reporter rep(opts, "dynamic-da");
  Economy e = load_economy(economy_path);
  Matching m = dynamic_deferred_acceptance(e, proposer == "B" ? Side::B : Side::A);
  rep.body()["proposer"] = proposer;
  rep.body()["matching"] = matching_to_json(m, e);
  rep.body()["verdict"] = "computed";
  return rep.finish(kExitStable);
}

int cmd_game(const GlobalOptions& opts, const std::string& economy_path, const std::string& variant,
             const std::string& mechanism) {
  Reporter rep(opts, "game");
  Economy e = load_economy(economy_path);
  GameSpec g = make_game(variant == "gamma2" ? GameVariant::Gamma2 : GameVariant::Gamma1, e,
                         mechanism == "da-b" ? Side::B : Side::A);
  g.strategy_limit = opts.limit;
  SolveContext ctx;
  ctx.enumeration_limit = opts.limit;
  EquilibriumStabilityReport r = verify_equilibrium_stability(g, ctx);
  rep.body()["variant"] = variant;
  rep.body()["mechanism"] = mechanism;
  rep.body()["equilibrium_count"] = r.equilibrium_count;
  Json outcomes = Json::array();
  for (const auto& m : r.outcomes) outcomes.push_back(matching_to_json(m, e));
  rep.body()["outcomes"] = std::move(outcomes);
  rep.body()["all_outcomes_stable"] = r.ok;
  if (r.counterexample) rep.body()["counterexample"] = matching_to_json(*r.counterexample, e);
  rep.body()["verdict"] = r.ok ? "stable" : "unstable";
  return rep.finish(r.ok ? kExitStable : kExitWitness, &ctx);
}

int cmd_delay_check(const GlobalOptions& opts, const std::string& matching_path,
                    const std::string& economy_path) {
  Reporter rep(opts, "delay-check");
  Economy e = load_economy(economy_path);
  Matching m = load_matching(matching_path, e);
  SolveContext ctx;
  ctx.enumeration_limit = opts.limit;
  DelayCheck dc = delay_incentive_witness(m, e, ctx);
  rep.body()["result"] = delay_check_to_json(dc, e);
  rep.body()["verdict"] = dc.status == DelayCheck::Status::WitnessFound ? "witness" : "no-witness";
  return rep.finish(dc.status == DelayCheck::Status::WitnessFound ? kExitWitness : kExitStable, &ctx);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solver for finite-horizon two-sided dynamic matching markets"};
  app.require_subcommand(1);

  GlobalOptions opts;
  app.add_option("--limit", opts.limit, "Enumeration cap on candidate matchings")
      ->envname("DYNSTAB_LIMIT");
  app.add_option("--threads", opts.threads, "Worker parallelism cap")->check(CLI::PositiveNumber);
  app.add_flag("--no-timing", opts.no_timing, "Omit the timing field from reports");

  std::string economy_path, matching_path, proposer = "A", variant = "gamma1", mechanism = "da-a";
  bool universal = false;

  CLI::App* validate = app.add_subcommand("validate", "Validate an economy (and optionally a matching)");
  validate->add_option("economy", economy_path)->required();
  validate->add_option("matching", matching_path);

  CLI::App* enumerate_cmd = app.add_subcommand("enumerate", "List all dynamically stable matchings");
  enumerate_cmd->add_option("economy", economy_path)->required();
  enumerate_cmd->add_flag("--universal-blocking", universal,
                          "Diagnostic: the all-conjectures-worse blocking rule");

  CLI::App* check = app.add_subcommand("check", "Check a matching for dynamic stability");
  check->add_option("economy", economy_path)->required();
  check->add_option("matching", matching_path)->required();

  CLI::App* check_static = app.add_subcommand("check-static", "Per-period static stability checks");
  check_static->add_option("economy", economy_path)->required();
  check_static->add_option("matching", matching_path)->required();

  CLI::App* construct = app.add_subcommand("construct", "Run the constructive existence algorithm");
  construct->add_option("economy", economy_path)->required();

  CLI::App* dynamic_da = app.add_subcommand("dynamic-da", "One-shot cross-cohort deferred acceptance");
  dynamic_da->add_option("economy", economy_path)->required();
  dynamic_da->add_option("--proposer", proposer)->check(CLI::IsMember({"A", "B"}));

  CLI::App* game = app.add_subcommand("game", "Equilibria of the sequential spot-mechanism game");
  game->add_option("economy", economy_path)->required();
  game->add_option("--variant", variant)->check(CLI::IsMember({"gamma1", "gamma2"}));
  game->add_option("--mechanism", mechanism)->check(CLI::IsMember({"da-a", "da-b"}));

  CLI::App* delay = app.add_subcommand("delay-check", "Search for a profitable arrival delay");
  delay->add_option("matching", matching_path)->required();
  delay->add_option("economy", economy_path)->required();

  CLI::App* diag = app.add_subcommand("diag-universal-blocking",
                                      "Stable set under the all-conjectures-worse blocking rule");
  diag->add_option("economy", economy_path)->required();

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex) == 0 ? 0 : kExitInput;
  }

  try {
    if (validate->parsed()) return cmd_validate(opts, economy_path, matching_path);
    if (enumerate_cmd->parsed()) return cmd_enumerate(opts, economy_path, universal);
    if (check->parsed()) return cmd_check(opts, economy_path, matching_path);
    if (check_static->parsed()) return cmd_check_static(opts, economy_path, matching_path);
    if (construct->parsed()) return cmd_construct(opts, economy_path);
    if (dynamic_da->parsed()) return cmd_dynamic_da(opts, economy_path, proposer);
    if (game->parsed()) return cmd_game(opts, economy_path, variant, mechanism);
    if (delay->parsed()) return cmd_delay_check(opts, matching_path, economy_path);
    if (diag->parsed()) return cmd_enumerate(opts, economy_path, true);
  } catch (const EconomyTooLarge& ex) {
    std::cout << Json{{"error", ex.what()}}.dump(2) << "\n";
    return kExitResource;
  } catch (const GameTooLarge& ex) {
    std::cout << Json{{"error", ex.what()}}.dump(2) << "\n";
    return kExitResource;
  } catch (const SchemaError& ex) {
    std::cout << Json{{"error", ex.what()}}.dump(2) << "\n";
    return kExitInput;
  } catch (const std::exception& ex) {
    std::cout << Json{{"error", ex.what()}}.dump(2) << "\n";
    return kExitInput;
  }
  return kExitInput;
}
