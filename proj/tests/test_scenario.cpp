#include <doctest.h>

#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "netsub/calendar.hpp"
#include "netsub/scenario.hpp"

using namespace netsub;

namespace {

ScenarioConfig small_config(const std::string& dir) {
    ScenarioConfig c;
    c.seed = 5;
    c.population = 60;
    c.horizon = 12;
    c.initial_share = 0.1;
    c.graph.mean_degree = 4.0;
    c.program.month = 6;
    c.program.recipients = 6;
    c.program.window = 2;
    c.replications = 2;
    c.map.rules = {"implemented"};
    c.output_dir = dir;
    return c;
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto d = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(d);
    return d;
}

json read_json(const std::filesystem::path& p) { return json::parse(read_file(p)); }

}  // namespace

TEST_CASE("config defaults, round trip and unknown keys") {
    const ScenarioConfig d = config_from_json(json::object());
    CHECK(d.population == 1000);
    CHECK(d.horizon == 53);
    CHECK(d.rules == std::vector<std::string>{"implemented"});
    const json j = config_to_json(d);
    CHECK(config_to_json(config_from_json(j)) == j);
    CHECK_THROWS_AS(config_from_json(json{{"popluation", 10}}), InvalidArgument);
    json bad = j;
    bad["program"]["recipients"] = 5000;
    CHECK_THROWS_AS(config_from_json(bad), InvalidArgument);
    bad = j;
    bad["rules"] = {"no-such-rule"};
    CHECK_THROWS_AS(config_from_json(bad), InvalidArgument);
}

TEST_CASE("world generation is deterministic per seed") {
    ScenarioConfig c = small_config("unused");
    const World a = generate_world(c, 9), b = generate_world(c, 9), other = generate_world(c, 10);
    CHECK(environment_to_json(a.env) == environment_to_json(b.env));
    CHECK(a.recipients == b.recipients);
    CHECK(environment_to_json(a.env) != environment_to_json(other.env));
    CHECK(a.recipients.size() == 6);
    CHECK(a.initial_adopters.size() == 6);
    for (AgentId r : a.recipients) {
        CHECK(a.env.fixed_date(r) >= 6);
        CHECK(a.env.fixed_date(r) <= 7);
    }
    const Environment free = analysis_environment(a);
    for (AgentId r : a.recipients) CHECK_FALSE(free.is_fixed(r));
    for (AgentId s : a.initial_adopters) CHECK(free.fixed_date(s) == 1);
}

TEST_CASE("zero mean degree gives an edgeless graph") {
    ScenarioConfig c = small_config("unused");
    c.graph.mean_degree = 0.0;
    CHECK(generate_network(c, 1).graph().link_count() == 0);
}

TEST_CASE("recipient homophily raises the recipient share of recipient contacts") {
    ScenarioConfig c = small_config("unused");
    c.population = 2000;
    c.program.recipients = 200;
    c.graph.mean_degree = 10.0;
    c.graph.recipient_homophily = 0.5;
    const World w = generate_world(c, 3);
    std::vector<std::uint8_t> mask(c.population, 0);
    for (AgentId r : w.recipients) mask[r] = 1;
    const ContactGraph& g = w.env.graph();
    double to_rec = 0, total = 0;
    for (std::size_t l = 0; l < g.link_count(); ++l)
        if (mask[g.caller(l)]) {
            total += 1;
            to_rec += mask[g.callee(l)];
        }
    REQUIRE(total > 0);
    CHECK(to_rec / total > 2.0 * 200.0 / 2000.0);
}

TEST_CASE("call records carry the expected duration on average") {
    fixture::Game s;
    s.agents = 2;
    s.horizon = 240;
    s.links = {{0, 1, ShockDistribution::lognormal(2.5, 0.5)}};
    s.sites = {{0.0, 0.0, true}, {100.0, 0.0, true}};
    const Environment env = fixture::build(s);
    const AdoptionProfile p(2, 1);
    const CdrOutput out = simulate_cdr(p, env, 4);
    std::map<std::int64_t, double> monthly;
    for (const TransactionRecord& r : out.records)
        if (r.caller == 0 && r.callee == 1) monthly[month_key(r.t)] += r.duration;
    double sum = 0, ss = 0;
    const double T = 240.0;
    for (Month t = 1; t <= 240; ++t) {
        const double v = monthly.count(month_key(2005, 1) + t - 1) ? monthly[month_key(2005, 1) + t - 1] : 0.0;
        sum += v;
        ss += v * v;
    }
    const double mean = sum / T, se = std::sqrt((ss / T - mean * mean) / T);
    CHECK(std::abs(mean - env.link_duration(0, 1)) <= 3.0 * se);
    CHECK(out.records.size() > 240);
    CHECK(std::is_sorted(out.records.begin(), out.records.end(), record_less));

    // Without adopters only the distributor accounts appear.
    const CdrOutput none = simulate_cdr(AdoptionProfile(2), env, 4);
    for (const TransactionRecord& r : none.records) CHECK(r.caller >= 2);
    CHECK(none.truth.model_calls == 0);
    CHECK_THROWS_AS(simulate_cdr(AdoptionProfile(3), env, 4), InvalidArgument);
}

TEST_CASE("point-mass links produce exact monthly totals") {
    fixture::Game s;
    s.agents = 2;
    s.horizon = 6;
    s.links = {fixture::point(0, 1, 10.0)};
    s.sites = {{0.0, 0.0, false}, {100.0, 0.0, false}};
    const Environment env = fixture::build(s);
    AdoptionProfile p(2);
    p[0] = 2;
    p[1] = 3;
    const CdrOutput out = simulate_cdr(p, env, 1);
    std::map<std::int64_t, double> monthly;
    for (const TransactionRecord& r : out.records)
        if (r.caller == 0 && r.callee == 1) monthly[month_key(r.t)] += r.duration;
    CHECK(monthly.size() == 4);
    for (const auto& [k, v] : monthly) {
        CHECK(k >= month_key(2005, 3));
        CHECK(v == doctest::Approx(8.0));
    }
}

TEST_CASE("planted forensics are recovered") {
    ScenarioConfig c = small_config("unused");
    c.population = 3000;
    c.program.recipients = 100;
    c.graph.mean_degree = 4.0;
    const World w = generate_world(c, 2);
    const Environment& env = w.env;
    const SolveResult obs = solve_equilibrium(env.initial_profile(kNever), env);
    c.cdr.middlemen = 10;
    c.cdr.decoys = 10;
    const CdrOutput out = simulate_cdr(obs.profile, env, 8, cdr_options(c, w.recipients));
    CHECK(out.truth.recipients.size() == 100);
    const auto found = identify_subsidy_recipients(out.records, out.catalog, c.cdr.subsidized_model,
                                                   out.program_window);
    CHECK(found == out.truth.recipients);
    const auto lineages = build_handset_lineages(out.records, &out.catalog, c.cdr.subsidized_model);
    const auto subs = subsidized_handsets(out.records, out.catalog, c.cdr.subsidized_model, out.program_window);
    const auto mm = detect_middlemen(lineages, subs);
    CHECK(mm.middlemen == out.truth.middlemen);
    CHECK(mm.transferred == out.truth.transferred);
}

TEST_CASE("a full small run writes a manifest and reproduces byte for byte") {
    const auto dir = temp_dir("netsub_test_run_a");
    ScenarioConfig c = small_config(dir.string());
    c.rules = {"standard"};
    c.cdr.enabled = true;
    const ScenarioResult r = run_scenario(c);
    CHECK(r.rules.size() == 17);
    for (const RuleResult& rr : r.rules) CHECK(rr.accounting_ok);
    const json m = read_json(dir / "manifest.json");
    CHECK(m["status"] == "complete");
    const json summary = read_json(dir / "summary.json");
    CHECK(summary["serialization_consistent"] == true);
    CHECK(summary["rules"] == 17);
    bool has_rule_table = false;
    for (const json& f : m["files"]) {
        CHECK(sha256_file(dir / f["path"].get<std::string>()) == f["sha256"]);
        has_rule_table |= f["path"] == "rule_comparison.csv";
    }
    CHECK(has_rule_table);

    const auto dir2 = temp_dir("netsub_test_run_b");
    c.output_dir = dir2.string();
    run_scenario(c);
    const json m2 = read_json(dir2 / "manifest.json");
    REQUIRE(m2["files"].size() == m["files"].size());
    for (std::size_t k = 0; k < m["files"].size(); ++k) {
        CHECK(m2["files"][k]["path"] == m["files"][k]["path"]);
        if (m["files"][k]["path"] != "config.json") CHECK(m2["files"][k]["sha256"] == m["files"][k]["sha256"]);
    }
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("a failing run leaves error.json and a partial manifest") {
    const auto dir = temp_dir("netsub_test_run_err");
    ScenarioConfig c = small_config(dir.string());
    c.cdr.enabled = true;
    c.cdr.middlemen = 1000;
    CHECK_THROWS(run_scenario(c));
    CHECK(std::filesystem::exists(dir / "error.json"));
    CHECK(read_json(dir / "manifest.json")["status"] == "partial");
    std::filesystem::remove_all(dir);
}
