#include <doctest.h>

#include <omp.h>

#include <random>

#include "fixtures.hpp"
#include "netsub/equilibrium.hpp"
#include "oracles.hpp"

using namespace netsub;
using fixture::point;

TEST_CASE("lifetime utility matches the direct sum") {
    fixture::Game s;
    s.agents = 2;
    s.horizon = 3;
    s.links = {point(0, 1, 10.0)};
    s.params.delta = 0.9;
    s.eta = {0.5, 0.0};
    s.discount = {2.0, 0.0};
    const Environment env = fixture::build(s);
    AdoptionProfile p(2);
    p[1] = 2;
    // Link value is 3.2 per month once agent 1 is on (month 2 onward).
    for (Month tau = 1; tau <= 3; ++tau) {
        double want = 0.0;
        for (Month t = tau; t <= 3; ++t) want += std::pow(0.9, t) * ((t >= 2 ? 3.2 : 0.0) + 0.5);
        want -= std::pow(0.9, tau) * (10.0 - 2.0);
        CHECK(lifetime_utility(0, tau, p, env) == doctest::Approx(want).epsilon(1e-12));
        CHECK(lifetime_utility(0, tau, p, env) == doctest::Approx(oracle::naive_lifetime_utility(0, tau, p.tau, env, 2.0)));
    }
    CHECK(lifetime_utility(0, kNever, p, env) == 0.0);
    // Overriding the subsidy.
    CHECK(lifetime_utility(0, 1, p, env, 0.0) == doctest::Approx(lifetime_utility(0, 1, p, env) - 0.9 * 2.0));
}

TEST_CASE("best response picks the earliest strict maximum and Never only when all are negative") {
    fixture::Game s;
    s.agents = 1;
    s.horizon = 3;
    s.handset_price = {10.0, 10.0, 10.0};
    s.eta = {1.0};
    const Environment flat = fixture::build(s);
    AdoptionProfile p(1);
    // delta = 1: U(tau) = (4 - tau) * 1 - 10 < 0 for every month.
    CHECK(best_response(0, p, flat) == kNever);

    s.eta = {5.0};
    // U(1) = 5, U(2) = 0, U(3) = -5.
    CHECK(best_response(0, p, fixture::build(s)) == 1);

    // U(1) == U(2) = 2 > U(3) = 1: tie goes to the earlier month.
    s.eta = {1.0};
    s.handset_price = {1.0, 0.0, 0.0};
    CHECK(best_response(0, p, fixture::build(s)) == 1);

    // U(1) = 0 exactly still adopts (not strictly negative).
    s.eta = {2.5};
    s.handset_price = {7.5, 7.5, 7.5};
    CHECK(best_response(0, p, fixture::build(s)) == 1);
}

TEST_CASE("solver refuses moved fixed agents and bad profiles") {
    fixture::Game s;
    s.fixed = {2, kFree};
    const Environment env = fixture::build(s);
    CHECK_THROWS_AS(solve_equilibrium(AdoptionProfile(2), env), InvalidArgument);
    CHECK_THROWS_AS(solve_equilibrium(AdoptionProfile(3), env), InvalidArgument);
    AdoptionProfile p = env.initial_profile();
    CHECK(p[0] == 2);
    p[1] = 7;
    CHECK_THROWS_AS(solve_equilibrium(p, env), InvalidArgument);
    CHECK_THROWS_AS(best_response(5, env.initial_profile(), env), UnknownAgent);
}

TEST_CASE("two-agent coordination: both equilibria are reachable") {
    fixture::Game s;
    s.agents = 2;
    s.horizon = 1;
    s.links = {point(0, 1, 10.0), point(1, 0, 10.0)};
    s.handset_price = {3.0};
    const Environment env = fixture::build(s);
    // Alone the handset is not worth it (U = -3); together it is (3.2 - 3).
    CHECK(solve_equilibrium(AdoptionProfile(2), env).profile == AdoptionProfile(2));
    AdoptionProfile on(2, 1);
    CHECK(solve_equilibrium(on, env).profile == on);
}

TEST_CASE("solutions are Nash: brute-force enumeration on small games") {
    std::mt19937_64 rng(42);
    int checked = 0;
    for (int inst = 0; inst < 40; ++inst) {
        const Environment env = fixture::random_game(rng, 5, 3, 0.15);
        const auto nash = oracle::all_nash(env);
        for (SweepMode mode : {SweepMode::GaussSeidel, SweepMode::Jacobi}) {
            SolveOptions o;
            o.mode = mode;
            const SolveResult r = solve_equilibrium(env.initial_profile(), env, o);
            if (!r.converged) continue;
            ++checked;
            CHECK(std::find(nash.begin(), nash.end(), r.profile.tau) != nash.end());
            CHECK(verify_nash(r.profile, env).empty());
        }
    }
    CHECK(checked > 40);
}

TEST_CASE("verify_nash reports a profitable deviation") {
    fixture::Game s;
    s.agents = 1;
    s.horizon = 2;
    s.eta = {20.0};
    const Environment env = fixture::build(s);
    AdoptionProfile p(1);
    const auto v = verify_nash(p, env);
    REQUIRE(v.size() == 1);
    CHECK(v[0].better == 1);
    CHECK(v[0].gain > 0.0);
}

TEST_CASE("solve is independent of sweep order and thread count") {
    std::mt19937_64 rng(8);
    const Environment env = fixture::random_game(rng, 6, 4);
    const SolveResult a = solve_equilibrium(env.initial_profile(), env);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(3);
    const SolveResult b = solve_equilibrium(env.initial_profile(), env);
    omp_set_num_threads(saved);
    CHECK(a.profile == b.profile);
    CHECK(a.rounds == b.rounds);
}

TEST_CASE("subsidy never delays a best response") {
    std::mt19937_64 rng(17);
    for (int k = 0; k < 60; ++k) {
        const Environment env = fixture::random_game(rng, 5, 4);
        const SolveResult r = solve_equilibrium(env.initial_profile(), env);
        for (AgentId a = 0; a < env.agent_count(); ++a) {
            std::vector<double> disc(env.adoption_discounts().begin(), env.adoption_discounts().end());
            disc[a] += 5.0;
            const Month before = best_response(a, r.profile, env);
            const Month after = best_response(a, r.profile, env.with_discounts(disc));
            CHECK(after <= before);
        }
    }
}

TEST_CASE("eta bounds: every eta inside them reproduces the observed month") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 30; ++k) {
        const Environment env = fixture::random_game(rng, 6, 4, 0.2);
        const SolveResult r = solve_equilibrium(env.initial_profile(), env);
        const EtaBounds b = estimate_eta_bounds(r.profile, env);
        for (AgentId a = 0; a < env.agent_count(); ++a) {
            if (env.is_fixed(a)) continue;
            REQUIRE_FALSE(b.infeasible[a]);
            CHECK(b.lo[a] <= b.hi[a]);
            CHECK(env.eta(a) >= b.lo[a] - 1e-9);
            CHECK(env.eta(a) <= b.hi[a] + 1e-9);
            std::vector<double> eta(env.etas().begin(), env.etas().end());
            for (int s = 0; s < 20; ++s) {
                eta[a] = b.lo[a] + (b.hi[a] - b.lo[a]) * (0.001 + 0.998 * u(rng));
                CHECK(best_response(a, r.profile, env.with_eta(eta)) == r.profile[a]);
            }
        }
    }
}

TEST_CASE("eta bounds: hand example") {
    fixture::Game s;
    s.agents = 1;
    s.horizon = 3;
    s.handset_price = {10.0, 10.0, 10.0};
    const Environment env = fixture::build(s);
    // delta = 1, no links: U(tau) = (4 - tau) eta - 10. Observed month 2.
    AdoptionProfile p(1);
    p[0] = 2;
    const EtaBounds b = estimate_eta_bounds(p, env);
    // Month 2 beats Never: 2 eta >= 10, so eta >= 5. Month 2 strictly beats
    // month 1 only if 2 eta > 3 eta, i.e. eta < 0: infeasible, held at the midpoint.
    CHECK(b.infeasible[0] == 1);
    CHECK(b.lo[0] == doctest::Approx(2.5));
    CHECK(b.hi[0] == doctest::Approx(2.5));
    CHECK(b.infeasible_agents == std::vector<AgentId>{0});

    p[0] = kNever;
    const EtaBounds n = estimate_eta_bounds(p, env);
    CHECK(n.hi[0] == doctest::Approx(10.0 / 3.0));
    CHECK(n.lo[0] == doctest::Approx(-1000.0));
}

TEST_CASE("comparable upper bounds") {
    EtaBounds b;
    b.lo = {0.0, 1.0, 0.0, 0.0};
    b.hi = {10.0, 11.0, 4.0, 6.0};
    b.hi_comp = b.hi;
    b.crossed.assign(4, 0);
    b.infeasible.assign(4, 0);
    const std::vector<AgentId> rec{0, 1}, comp{2, 3};
    const EtaBounds c = comparable_upper_bounds(b, rec, comp);
    // mean_R lo = 0.5, mean_R hi = 10.5, mean_C hi = 5 -> a = 0.55.
    CHECK(c.weight == doctest::Approx(0.55));
    CHECK((c.hi_comp[0] + c.hi_comp[1]) / 2.0 == doctest::Approx(5.0));
    CHECK(c.hi_comp[2] == 4.0);
    CHECK(c.crossed_count() == 0);
    // Comparison group above the recipients: the recipients keep their bounds.
    const EtaBounds d = comparable_upper_bounds(b, comp, rec);
    CHECK(d.weight == 0.0);
    CHECK(d.hi_comp == d.hi);
    // Extrapolating past the lower bound crosses.
    EtaBounds e = b;
    e.lo = {0.0, 1.0, -10.0, -10.0};
    e.hi = {10.0, 11.0, -5.0, -5.0};
    const EtaBounds f = comparable_upper_bounds(e, rec, comp);
    CHECK(f.weight > 1.0);
    CHECK(f.crossed_count() == 2);
    CHECK_THROWS(comparable_upper_bounds(b, {}, comp));
}

TEST_CASE("bound environments reproduce the observed profile") {
    std::mt19937_64 rng(33);
    for (int k = 0; k < 30; ++k) {
        const Environment env = fixture::random_game(rng, 6, 4, 0.2);
        const SolveResult r = solve_equilibrium(env.initial_profile(), env);
        const EtaBounds b = estimate_eta_bounds(r.profile, env);
        for (EtaMode m : {EtaMode::Lower, EtaMode::Upper}) {
            const Environment e = bound_environment(env, b, m, r.profile);
            CHECK(verify_nash(r.profile, e).empty());
            CHECK(solve_equilibrium(r.profile, e).profile == r.profile);
        }
    }
}
