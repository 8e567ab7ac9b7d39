#include <doctest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "netsub/policy.hpp"

using namespace netsub;
using fixture::point;

namespace {

// Star on agents 0..4 (hub 0) plus a separate pair 5-6. Agent 7 is isolated.
Environment star(std::vector<Month> fixed) {
    fixture::Game s;
    s.agents = 8;
    s.horizon = 4;
    for (AgentId b = 1; b <= 4; ++b) {
        s.links.push_back(point(0, b, 10.0 + b));
        s.links.push_back(point(b, 0, 10.0));
    }
    s.links.push_back(point(5, 6, 12.0));
    s.links.push_back(point(6, 5, 12.0));
    s.fixed = std::move(fixed);
    for (AgentId a = 0; a < 8; ++a) s.sites.push_back({100.0 * a, 0.0, a % 2 == 0});
    return fixture::build(s);
}

AdoptionProfile profile(std::vector<Month> t) {
    AdoptionProfile p;
    p.tau = std::move(t);
    return p;
}

}  // namespace

TEST_CASE("eligibility excludes implemented recipients, early adopters and never-adopters") {
    const Environment env = star({});
    const AdoptionProfile base = profile({1, 2, 3, 4, kNever, 2, 3, 2});
    TargetingRule r = TargetingRule::random(RuleVariant::Random, 10, 2);
    CHECK(eligible_nodes(env, base, r, {}) == std::vector<AgentId>{1, 2, 3, 5, 6, 7});
    CHECK(eligible_nodes(env, base, r, {2, 7}) == std::vector<AgentId>{1, 3, 5, 6});
    r = TargetingRule::random(RuleVariant::RandomRural, 10, 2);
    CHECK(eligible_nodes(env, base, r, {}) == std::vector<AgentId>{2, 6});
    r = TargetingRule::random(RuleVariant::RandomUrban, 10, 2);
    CHECK(eligible_nodes(env, base, r, {}) == std::vector<AgentId>{1, 3, 5, 7});
    CHECK_THROWS(eligible_nodes(env, AdoptionProfile(3), r, {}));
}

TEST_CASE("priority by degree picks the hub and reports the shortfall") {
    const Environment env = star({});
    const AdoptionProfile base(8, 2);
    const auto hi = allocate(TargetingRule::priority(PriorityMetric::Degree, Direction::High, 1, 1), env,
                             base, {}, 0);
    CHECK(hi.recipients == std::vector<AgentId>{0});
    CHECK(hi.eligible == 8);
    const auto lo = allocate(TargetingRule::priority(PriorityMetric::Degree, Direction::Low, 1, 1), env,
                             base, {}, 0);
    CHECK(lo.recipients == std::vector<AgentId>{7});
    const auto all = allocate(TargetingRule::priority(PriorityMetric::Degree, Direction::High, 20, 1),
                              env, base, {}, 0);
    CHECK(all.recipients.size() == 8);
    CHECK(all.shortfall == 12);
}

TEST_CASE("priority by adopted contacts counts contacts adopting before the program") {
    const Environment env = star({});
    // Program month 3: agents 1, 2 adopted earlier; 0 has two adopted contacts.
    const AdoptionProfile base = profile({3, 1, 1, 3, 4, 3, 3, 4});
    const auto r = allocate(TargetingRule::priority(PriorityMetric::AdoptedContacts, Direction::High, 1, 3),
                            env, base, {}, 0);
    CHECK(r.recipients == std::vector<AgentId>{0});
    const auto f = allocate(TargetingRule::priority(PriorityMetric::AdoptedFraction, Direction::High, 2, 3),
                            env, base, {}, 0);
    CHECK(f.recipients == std::vector<AgentId>{0, 3});
}

TEST_CASE("random allocation is deterministic per seed and draws without replacement") {
    const Environment env = star({});
    const AdoptionProfile base(8, 2);
    const auto rule = TargetingRule::random(RuleVariant::Random, 4, 1);
    const auto a = allocate(rule, env, base, {}, 99);
    const auto b = allocate(rule, env, base, {}, 99);
    CHECK(a.recipients == b.recipients);
    CHECK(a.recipients.size() == 4);
    CHECK(std::set<AgentId>(a.recipients.begin(), a.recipients.end()).size() == 4);
    std::set<std::vector<AgentId>> seen;
    for (std::uint64_t s = 0; s < 30; ++s) seen.insert(allocate(rule, env, base, {}, s).recipients);
    CHECK(seen.size() > 5);
}

TEST_CASE("super-cluster grows connected components before restarting") {
    const Environment env = star({});
    const AdoptionProfile base(8, 2);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto r = allocate(TargetingRule::random(RuleVariant::SuperCluster, 5, 1), env, base, {}, seed);
        REQUIRE(r.recipients.size() == 5);
        // Components are {0..4}, {5, 6} and {7}: at most one is taken partially.
        const std::set<AgentId> s(r.recipients.begin(), r.recipients.end());
        int partial = 0;
        for (const std::vector<AgentId>& comp : {std::vector<AgentId>{0, 1, 2, 3, 4}, {5, 6}, {7}}) {
            std::size_t in = 0;
            for (AgentId a : comp) in += s.count(a);
            if (in > 0 && in < comp.size()) ++partial;
        }
        CHECK(partial <= 1);
    }
}

TEST_CASE("voucher givers hand one voucher each to their strongest eligible tie") {
    const Environment env = star({});
    // Early cohort = month 1 adopters: agents 1 and 2, both tied only to hub 0.
    const AdoptionProfile base = profile({3, 1, 1, 3, 3, 3, 3, 3});
    const auto r = allocate(TargetingRule::voucher(Cohort::Early, GeoFilter::Any, 5, 3), env, base, {}, 0);
    // Agent 1 takes agent 0; agent 2 has no one left.
    CHECK(r.recipients == std::vector<AgentId>{0});
    CHECK(r.shortfall == 4);

    // Hub gives: strongest tie is agent 4 (shock 14).
    const AdoptionProfile hub = profile({1, 3, 3, 3, 3, 3, 3, 3});
    const auto h = allocate(TargetingRule::voucher(Cohort::Early, GeoFilter::Any, 5, 3), env, hub, {}, 0);
    CHECK(h.recipients == std::vector<AgentId>{4});
    const auto urban =
        allocate(TargetingRule::voucher(Cohort::Early, GeoFilter::Urban, 5, 3), env, hub, {}, 0);
    CHECK(urban.recipients == std::vector<AgentId>{3});
    // Recent cohort = adopters in the month before the program.
    const AdoptionProfile recent = profile({2, 3, 3, 3, 3, 2, 3, 3});
    const auto rc = allocate(TargetingRule::voucher(Cohort::Recent, GeoFilter::Any, 5, 3), env, recent, {}, 0);
    CHECK(rc.recipients == std::vector<AgentId>{4, 6});
}

TEST_CASE("tie strength sums expected durations both ways from the later adoption") {
    const Environment env = star({});
    const AdoptionProfile p = profile({1, 3, 1, 1, 1, 1, 1, 1});
    const double d01 = env.link_duration(std::size_t(env.graph().find_link(0, 1)), 3);
    const double d10 = env.link_duration(std::size_t(env.graph().find_link(1, 0)), 3);
    CHECK(tie_strength(0, 1, p, env) == doctest::Approx(2.0 * (d01 + d10)));
    CHECK(tie_strength(1, 0, p, env) == tie_strength(0, 1, p, env));
    CHECK(tie_strength(0, 5, p, env) == 0.0);
    AdoptionProfile never = p;
    never[1] = kNever;
    CHECK(tie_strength(0, 1, never, env) == 0.0);
}

TEST_CASE("implemented rule returns the implemented recipients") {
    const Environment env = star({});
    const auto r = allocate(TargetingRule::implemented(10, 1), env, AdoptionProfile(8, 2), {6, 3}, 0);
    CHECK(r.recipients == std::vector<AgentId>{3, 6});
    CHECK(r.eligible == 2);
    CHECK(r.shortfall == 8);
    CHECK_THROWS_AS(allocate(TargetingRule::implemented(10, 1), env, AdoptionProfile(8, 2), {9}, 0),
                    UnknownAgent);
}

TEST_CASE("applying and removing a program") {
    const Environment env = star({});
    SubsidyProgram prog;
    prog.recipients = {1, 3};
    prog.discount = 5.0;
    const Environment on = apply_program(env, prog);
    CHECK(on.adoption_discount(1) == 5.0);
    CHECK(on.adoption_discount(2) == 0.0);
    const Environment off = remove_program(on, prog);
    for (AgentId a = 0; a < 8; ++a) CHECK(off.adoption_discount(a) == env.adoption_discount(a));
    // Lifetime utility of a recipient rises by delta^tau times the discount.
    const AdoptionProfile p(8, 2);
    CHECK(lifetime_utility(1, 2, p, on) - lifetime_utility(1, 2, p, env) ==
          doctest::Approx(env.discount_factor(2) * 5.0));
    CHECK(lifetime_utility(2, 2, p, on) == lifetime_utility(2, 2, p, env));

    prog.discount = 0.0;
    const Environment same = apply_program(env, prog);
    for (AgentId a = 0; a < 8; ++a) CHECK(same.adoption_discount(a) == 0.0);
}

TEST_CASE("program validation") {
    SubsidyProgram p;
    CHECK(p.derived_discount() == doctest::Approx(18.95));
    p.recipients = {1, 1};
    CHECK_THROWS_AS(p.validate(5), InvalidArgument);
    p.recipients = {9};
    CHECK_THROWS_AS(p.validate(5), UnknownAgent);
    p.recipients = {};
    p.discount = -1.0;
    CHECK_THROWS_AS(p.validate(5), InvalidArgument);
    p.discount = 30.0;
    CHECK_THROWS_AS(p.validate(5), InvalidArgument);
    TargetingRule r;
    r.budget = 0;
    CHECK_THROWS_AS(r.validate(), InvalidArgument);
    r.budget = 1;
    r.subsidy_month = 0;
    CHECK_THROWS_AS(r.validate(), InvalidArgument);
}

TEST_CASE("rule names round-trip and the standard set has 17 rules") {
    const auto rules = standard_rules(100, 3);
    CHECK(rules.size() == 17);
    std::set<std::string> names;
    for (const auto& r : rules) {
        names.insert(r.name);
        const TargetingRule back = parse_rule(r.name, 100, 3);
        CHECK(back.variant == r.variant);
        CHECK(default_rule_name(back) == r.name);
        CHECK(back.budget == 100);
        CHECK(back.subsidy_month == 3);
    }
    CHECK(names.size() == 17);
    CHECK_THROWS_AS(parse_rule("nonsense", 1, 1), InvalidArgument);
}

TEST_CASE("impact decomposition identities on random games") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 25; ++k) {
        const Environment env = fixture::random_game(rng, 6, 4);
        SubsidyProgram prog;
        for (AgentId a = 0; a < env.agent_count(); ++a)
            if (u(rng) < 0.4) prog.recipients.push_back(a);
        prog.discount = 10.0 * u(rng);
        prog.full_price = 100.0;
        const Environment on = apply_program(env, prog);
        const SolveResult eq = solve_equilibrium(on.initial_profile(), on);
        const ImpactTable t = decompose_impact(on, prog, eq.profile);
        const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a)); };
        CHECK(close(t.proximal.all.net_welfare + t.ripple.all.net_welfare, t.total.all.net_welfare));
        CHECK(close(t.total.recipients.net_welfare + t.total.nonrecipients.net_welfare,
                    t.total.all.net_welfare));
        CHECK(close(t.total.all.net_welfare, t.total.all.firm_revenue + t.total.all.consumer_surplus +
                                                 t.total.all.government_revenue));
        // Only recipients move in the proximal step.
        CHECK(t.proximal.nonrecipients.mean_adoption_time == 0.0);
        for (AgentId a = 0; a < env.agent_count(); ++a)
            if (!std::binary_search(prog.recipients.begin(), prog.recipients.end(), a))
                CHECK(t.proximal_profile[a] == eq.profile[a]);
    }
}

TEST_CASE("a zero discount has zero impact") {
    std::mt19937_64 rng(5);
    const Environment env = fixture::random_game(rng, 5, 3);
    SubsidyProgram prog;
    prog.recipients = {0, 1};
    prog.discount = 0.0;
    const SolveResult eq = solve_equilibrium(env.initial_profile(), env);
    const ImpactTable t = decompose_impact(env, prog, eq.profile);
    CHECK(t.total.all.net_welfare == doctest::Approx(0.0));
    CHECK(t.total.all.mean_adoption_time == 0.0);
    CHECK(t.without_profile == eq.profile);
}
