#pragma once

// Small hand-built environments shared by the tests.

#include <memory>
#include <random>
#include <vector>

#include "netsub/environment.hpp"

namespace fixture {

using namespace netsub;

struct Game {
    std::size_t agents = 2;
    Month horizon = 3;
    std::vector<Link> links;
    std::vector<double> call_price;     // default 0.1 every month
    std::vector<double> handset_price;  // default 10 every month
    std::vector<double> eta;
    std::vector<double> discount;
    std::vector<Month> fixed;
    std::vector<AgentSite> sites;
    std::vector<double> coverage;
    UtilityParams params{2.0, 1.0, 1.0, 0.0, 1.0};
    bool continuation = false;
};

inline Environment build(Game s) {
    EnvironmentData d;
    d.params = s.params;
    d.horizon = s.horizon;
    d.call_price = s.call_price.empty() ? std::vector<double>(std::size_t(s.horizon), 0.1) : s.call_price;
    d.handset_price =
        s.handset_price.empty() ? std::vector<double>(std::size_t(s.horizon), 10.0) : s.handset_price;
    d.eta = s.eta;
    d.discount = s.discount;
    d.fixed_dates = s.fixed;
    d.sites = s.sites;
    d.coverage = s.coverage;
    d.continuation = s.continuation;
    auto g = std::make_shared<const ContactGraph>(ContactGraph::build(s.agents, std::move(s.links)));
    return Environment(std::move(g), std::move(d));
}

inline Link point(AgentId i, AgentId j, double eps) { return {i, j, ShockDistribution::point_mass(eps)}; }

/// Random small game: up to `max_agents` agents, horizon up to `max_t`,
/// dense-ish random links, declining handset prices and random eta.
inline Environment random_game(std::mt19937_64& rng, std::size_t max_agents, Month max_t,
                               double fixed_share = 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Game s;
    s.agents = 2 + std::size_t(u(rng) * double(max_agents - 1));
    s.agents = std::min(s.agents, max_agents);
    s.horizon = 1 + Month(u(rng) * double(max_t));
    s.horizon = std::min(s.horizon, max_t);
    s.params = UtilityParams{1.5 + u(rng), 1.0, 1.0 + 2.0 * u(rng), 0.0, 0.85 + 0.15 * u(rng)};
    for (AgentId i = 0; i < s.agents; ++i)
        for (AgentId j = 0; j < s.agents; ++j)
            if (i != j && u(rng) < 0.6) {
                if (u(rng) < 0.5)
                    s.links.push_back(point(i, j, 5.0 + 20.0 * u(rng)));
                else
                    s.links.push_back({i, j, ShockDistribution::lognormal(1.5 + u(rng), 0.3 + 0.5 * u(rng))});
            }
    s.call_price.clear();
    s.handset_price.clear();
    double h = 20.0 + 30.0 * u(rng);
    for (Month t = 1; t <= s.horizon; ++t) {
        s.call_price.push_back(0.05 + 0.1 * u(rng));
        s.handset_price.push_back(h);
        h *= 0.6 + 0.4 * u(rng);
    }
    s.eta.resize(s.agents);
    for (double& e : s.eta) e = -4.0 + 8.0 * u(rng);
    s.fixed.assign(s.agents, kFree);
    for (AgentId a = 0; a < s.agents; ++a)
        if (u(rng) < fixed_share) s.fixed[a] = 1;
    return build(std::move(s));
}

}  // namespace fixture
