#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "netsub/equilibrium.hpp"
#include "netsub/welfare.hpp"

using namespace netsub;
using fixture::point;

namespace {

Environment two_agents(double discount = 2.0) {
    fixture::Game s;
    s.agents = 2;
    s.horizon = 2;
    s.links = {point(0, 1, 10.0)};  // 8 seconds, surplus 3.2 at price 0.1
    s.params.delta = 0.9;
    s.eta = {0.5, -1.0};
    s.discount = {discount, 0.0};
    s.sites = {{500.0, 500.0, true}, {1500.0, 500.0, false}};
    return fixture::build(s);
}

}  // namespace

TEST_CASE("hand-computed welfare components") {
    const Environment env = two_agents();
    AdoptionProfile p(2, 1);
    const TaxConfig tax{0.02, 0.1};
    const AgentWelfare w = evaluate_welfare(p, env, tax);
    const double disc_sum = 0.9 + 0.81;
    CHECK(w.call_surplus[0] == doctest::Approx(3.2 * disc_sum));
    CHECK(w.call_surplus[1] == 0.0);
    CHECK(w.firm_revenue[0] == doctest::Approx(0.1 * 8.0 * disc_sum));
    CHECK(w.firm_revenue[1] == 0.0);
    const double pay0 = 0.9 * (10.0 - 2.0), pay1 = 0.9 * 10.0;
    CHECK(w.consumer_surplus[0] == doctest::Approx(3.2 * disc_sum - pay0));
    CHECK(w.consumer_surplus[1] == doctest::Approx(-pay1));
    CHECK(w.consumer_surplus_with_eta[0] == doctest::Approx(3.2 * disc_sum - pay0 + 0.5 * disc_sum));
    CHECK(w.consumer_surplus_with_eta[1] == doctest::Approx(-pay1 - disc_sum));
    CHECK(w.government_call[0] == doctest::Approx(0.02 * w.firm_revenue[0]));
    CHECK(w.government_handset[0] == doctest::Approx(0.1 * pay0 - 0.9 * 2.0));
    CHECK(w.government_handset[1] == doctest::Approx(0.1 * pay1));
    CHECK(w.subsidy_outlay[0] == doctest::Approx(1.8));
    CHECK(w.subsidy_outlay[1] == 0.0);
    for (std::size_t a = 0; a < 2; ++a)
        CHECK(w.net_welfare(a) == doctest::Approx(w.firm_revenue[a] + w.consumer_surplus[a] + w.government(a)));

    CHECK(consumer_surplus(p, env, false) == w.consumer_surplus);
    CHECK(consumer_surplus(p, env, true) == w.consumer_surplus_with_eta);
    CHECK(firm_revenue(p, env) == w.firm_revenue);
    const auto gov = government_revenue(p, env, tax);
    CHECK(gov.call == w.government_call);
    CHECK(gov.handset == w.government_handset);
}

TEST_CASE("welfare counts only subscribed months and subscribed contacts") {
    const Environment env = two_agents(0.0);
    AdoptionProfile p(2);
    p[0] = 1;
    p[1] = 2;
    const AgentWelfare w = evaluate_welfare(p, env);
    CHECK(w.call_surplus[0] == doctest::Approx(0.81 * 3.2));
    CHECK(w.firm_revenue[0] == doctest::Approx(0.81 * 0.8));
    p[1] = kNever;
    const AgentWelfare n = evaluate_welfare(p, env);
    CHECK(n.call_surplus[0] == 0.0);
    CHECK(n.consumer_surplus[1] == 0.0);
    CHECK(n.consumer_surplus_with_eta[1] == 0.0);
    CHECK(n.government_handset[1] == 0.0);
}

TEST_CASE("single period with no discounting reduces to one-month definitions") {
    fixture::Game s;
    s.agents = 2;
    s.horizon = 1;
    s.links = {point(0, 1, 10.0), point(1, 0, 10.0)};
    const Environment env = fixture::build(s);
    const AgentWelfare w = evaluate_welfare(AdoptionProfile(2, 1), env, {0.1, 0.0});
    CHECK(w.call_surplus[0] == doctest::Approx(3.2));
    CHECK(w.firm_revenue[0] == doctest::Approx(0.8));
    CHECK(w.consumer_surplus[0] == doctest::Approx(3.2 - 10.0));
    CHECK(w.government_call[0] == doctest::Approx(0.08));
}

TEST_CASE("subsidy-only handset component is minus the discounted outlay") {
    const Environment env = two_agents(2.0);
    AdoptionProfile p(2, 2);
    const AgentWelfare w = evaluate_welfare(p, env, {0.02, 0.0});
    CHECK(w.government_handset[0] + w.government_handset[1] == doctest::Approx(-0.81 * 2.0));
}

TEST_CASE("summaries and differences") {
    const Environment env = two_agents();
    AdoptionProfile p(2);
    p[0] = 1;
    const AgentWelfare w = evaluate_welfare(p, env);
    const auto mask = std::vector<std::uint8_t>{1, 0};
    const GroupOutcomes g = summarize(p, w, mask, env.horizon());
    CHECK(g.all.count == 2);
    CHECK(g.recipients.count == 1);
    CHECK(g.all.mean_adoption_time == doctest::Approx((1.0 + 3.0) / 2.0));
    CHECK(g.recipients.mean_adoption_time == 1.0);
    CHECK(g.nonrecipients.mean_adoption_time == 3.0);
    CHECK(g.all.net_welfare == doctest::Approx(g.recipients.net_welfare + g.nonrecipients.net_welfare));
    CHECK(g.all.net_welfare ==
          doctest::Approx(g.all.firm_revenue + g.all.consumer_surplus + g.all.government_revenue));
    CHECK(g.all.subsidy_outlay == doctest::Approx(0.9 * 2.0));

    const GroupOutcomes z = g - g;
    CHECK(z.all.net_welfare == 0.0);
    CHECK(z.all.mean_adoption_time == 0.0);
    CHECK(z.all.count == 2);
    CHECK_THROWS(summarize(p, w, std::vector<std::uint8_t>{1}, env.horizon()));
}

TEST_CASE("reports pair the lower and upper tables") {
    const Environment env = two_agents();
    AdoptionProfile with(2, 1), without(2);
    without[1] = 1;
    const auto mask = std::vector<std::uint8_t>{1, 0};
    ImpactTable lo;
    lo.with_subsidy = summarize(with, evaluate_welfare(with, env), mask, 2);
    const GroupOutcomes none = summarize(without, evaluate_welfare(without, env.with_discounts({0.0, 0.0})), mask, 2);
    lo.total = lo.with_subsidy - none;
    lo.proximal = lo.total;
    lo.ripple = lo.total - lo.proximal;
    ImpactTable hi = lo;
    hi.held_fixed = 3;
    const WelfareReport r = build_report(lo, hi);
    CHECK(r.total.all.net_welfare.lower == lo.total.all.net_welfare);
    CHECK(r.total.all.net_welfare.upper == lo.total.all.net_welfare);
    CHECK(r.subsidy_cost.lower == doctest::Approx(1.8));
    CHECK(r.social_return.lower == doctest::Approx(lo.total.all.net_welfare / 1.8));
    CHECK(r.held_fixed_upper == 3);

    ImpactTable zero;
    const WelfareReport zr = build_report(zero, zero);
    CHECK(std::isnan(zr.social_return.lower));
}

TEST_CASE("surplus maps place agents in cells") {
    const Environment env = two_agents();
    const AgentWelfare base = evaluate_welfare(AdoptionProfile(2), env);
    const AgentWelfare cf = evaluate_welfare(AdoptionProfile(2, 1), env);
    const CellGrid grid{0.0, 0.0, 1000.0, 2, 1};
    CHECK(grid.cell_of(500, 500) == 0);
    CHECK(grid.cell_of(1500, 500) == 1);
    CHECK(grid.cell_of(2500, 500) == -1);
    CHECK(grid.cell_of(-1, 500) == -1);
    const SurplusMap m = surplus_map(base, cf, env, grid);
    CHECK(m.baseline[0] == 0.0);
    CHECK(m.difference(0) == doctest::Approx(cf.call_surplus[0]));
    CHECK(m.difference(1) == 0.0);
    CHECK(m.unlocated_agents == 0);

    const CellGrid small{0.0, 0.0, 1000.0, 1, 1};
    const SurplusMap s = surplus_map(base, cf, env, small);
    CHECK(s.unlocated_agents == 1);
}
