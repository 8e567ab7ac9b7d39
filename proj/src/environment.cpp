#include "netsub/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace netsub {

ContactGraph ContactGraph::build(std::size_t agents, std::vector<Link> links) {
    for (const Link& l : links) {
        if (l.caller >= agents || l.callee >= agents)
            throw UnknownAgent(std::max(l.caller, l.callee));
        if (l.caller == l.callee)
            throw InvalidArgument("self link on agent " + std::to_string(l.caller));
    }
    std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) {
        return a.caller != b.caller ? a.caller < b.caller : a.callee < b.callee;
    });
    for (std::size_t k = 1; k < links.size(); ++k)
        if (links[k].caller == links[k - 1].caller && links[k].callee == links[k - 1].callee)
            throw InvalidArgument("duplicate link " + std::to_string(links[k].caller) + "->" +
                                  std::to_string(links[k].callee));

    ContactGraph g;
    const std::size_t m = links.size();
    g.out_offsets_.assign(agents + 1, 0);
    g.caller_.resize(m);
    g.callee_.resize(m);
    g.shocks_.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        g.caller_[k] = links[k].caller;
        g.callee_[k] = links[k].callee;
        g.shocks_.push_back(links[k].shocks);
        ++g.out_offsets_[links[k].caller + 1];
    }
    std::partial_sum(g.out_offsets_.begin(), g.out_offsets_.end(), g.out_offsets_.begin());

    g.in_offsets_.assign(agents + 1, 0);
    for (AgentId c : g.callee_) ++g.in_offsets_[c + 1];
    std::partial_sum(g.in_offsets_.begin(), g.in_offsets_.end(), g.in_offsets_.begin());
    g.in_links_.resize(m);
    {
        std::vector<std::size_t> fill(g.in_offsets_.begin(), g.in_offsets_.end() - 1);
        for (std::size_t k = 0; k < m; ++k)
            g.in_links_[fill[g.callee_[k]]++] = static_cast<std::uint32_t>(k);
    }

    // Undirected neighbour lists: merge of sorted out-callees and in-callers.
    g.nbr_offsets_.assign(agents + 1, 0);
    std::vector<AgentId> scratch;
    for (AgentId a = 0; a < agents; ++a) {
        scratch.clear();
        for (std::size_t k = g.out_offsets_[a]; k < g.out_offsets_[a + 1]; ++k)
            scratch.push_back(g.callee_[k]);
        for (std::size_t k = g.in_offsets_[a]; k < g.in_offsets_[a + 1]; ++k)
            scratch.push_back(g.caller_[g.in_links_[k]]);
        std::sort(scratch.begin(), scratch.end());
        scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
        g.nbr_.insert(g.nbr_.end(), scratch.begin(), scratch.end());
        g.nbr_offsets_[a + 1] = g.nbr_.size();
    }
    return g;
}

long ContactGraph::find_link(AgentId caller, AgentId callee) const {
    if (caller >= agent_count()) return -1;
    auto first = callee_.begin() + static_cast<long>(out_offsets_[caller]);
    auto last = callee_.begin() + static_cast<long>(out_offsets_[caller + 1]);
    auto it = std::lower_bound(first, last, callee);
    if (it == last || *it != callee) return -1;
    return it - callee_.begin();
}

Environment::Environment(std::shared_ptr<const ContactGraph> graph, EnvironmentData data) {
    if (!graph) throw InvalidArgument("environment needs a contact graph");
    data.params.validate();
    const Month T = data.horizon;
    if (T < 1) throw InvalidArgument("horizon must be >= 1");
    const std::size_t n = graph->agent_count();
    if (data.call_price.size() != std::size_t(T) || data.handset_price.size() != std::size_t(T))
        throw InvalidArgument("price series must have one value per month");
    for (std::size_t t = 0; t < std::size_t(T); ++t)
        if (!std::isfinite(data.call_price[t]) || !std::isfinite(data.handset_price[t]))
            throw InvalidArgument("price series must be finite");
    if (!data.coverage.empty()) {
        if (data.coverage.size() != n * std::size_t(T))
            throw InvalidArgument("coverage table must be agents x horizon");
        for (double v : data.coverage)
            if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("coverage must lie in [0,1]");
    }

    auto fill = [n](std::vector<double>& v, const char* name) {
        if (v.empty()) v.assign(n, 0.0);
        if (v.size() != n) throw InvalidArgument(std::string(name) + " needs one value per agent");
    };
    fill(data.eta, "eta");
    fill(data.discount, "discount");
    if (data.fixed_dates.empty()) data.fixed_dates.assign(n, kFree);
    bool has_sites = !data.sites.empty();
    if (!has_sites) data.sites.assign(n, AgentSite{});
    if (data.sites.size() != n) throw InvalidArgument("sites need one entry per agent");

    auto shared = std::make_shared<Shared>();
    shared->graph = std::move(graph);
    shared->params = data.params;
    shared->horizon = T;
    shared->call_price = std::move(data.call_price);
    shared->handset_price = std::move(data.handset_price);
    shared->coverage = std::move(data.coverage);
    shared->sites = std::move(data.sites);
    shared->has_sites = has_sites;
    shared->continuation = data.continuation;

    const double delta = shared->params.delta;
    shared->delta_pow.resize(std::size_t(T) + 2);
    shared->delta_pow[0] = 1.0;
    for (std::size_t t = 1; t < shared->delta_pow.size(); ++t)
        shared->delta_pow[t] = shared->delta_pow[t - 1] * delta;
    if (shared->continuation && delta < 1.0)
        shared->continuation_weight = shared->delta_pow[std::size_t(T) + 1] / (1.0 - delta);

    // Precompute expected surplus and duration for every link-month.
    const ContactGraph& g = *shared->graph;
    const double beta_cov = shared->params.beta_coverage;
    const auto [pmin, pmax] =
        std::minmax_element(shared->call_price.begin(), shared->call_price.end());
    const LinkValueEngine engine =
        LinkValueEngine::for_shocks(shared->params, g.all_shocks(), *pmin + std::min(0.0, beta_cov),
                                    *pmax + std::max(0.0, beta_cov));
    const std::size_t m = g.link_count();
    shared->link_utility.resize(m * std::size_t(T));
    shared->link_duration.resize(m * std::size_t(T));
    const Shared& s = *shared;
#pragma omp parallel for schedule(static, 1024)
    for (std::size_t l = 0; l < m; ++l) {
        const AgentId i = g.caller(l), j = g.callee(l);
        for (Month t = 1; t <= T; ++t) {
            const double phi_i = s.coverage.empty() ? 1.0 : s.coverage[i * std::size_t(T) + (t - 1)];
            const double phi_j = s.coverage.empty() ? 1.0 : s.coverage[j * std::size_t(T) + (t - 1)];
            const double cost = CallCost::make(s.call_price[t - 1], beta_cov, phi_i, phi_j).total();
            const LinkExpectation v = engine.evaluate(g.shocks(l), cost);
            shared->link_utility[l * std::size_t(T) + (t - 1)] = v.utility;
            shared->link_duration[l * std::size_t(T) + (t - 1)] = v.duration;
        }
    }

    shared_ = std::move(shared);
    eta_ = std::move(data.eta);
    discount_ = std::move(data.discount);
    fixed_ = std::move(data.fixed_dates);
    validate_agent_vectors();
}

void Environment::validate_agent_vectors() const {
    const std::size_t n = shared_->graph->agent_count();
    if (eta_.size() != n || discount_.size() != n || fixed_.size() != n)
        throw InvalidArgument("per-agent vectors must have one entry per agent");
    for (std::size_t a = 0; a < n; ++a) {
        if (!std::isfinite(eta_[a]) || !std::isfinite(discount_[a]))
            throw InvalidArgument("eta and discount must be finite");
        if (fixed_[a] != kFree && (fixed_[a] < 1 || fixed_[a] > horizon()))
            throw InvalidArgument("fixed adoption date outside [1, horizon] for agent " +
                                  std::to_string(a));
    }
}

Environment Environment::with_eta(std::vector<double> eta) const {
    Environment e = *this;
    e.eta_ = std::move(eta);
    e.validate_agent_vectors();
    return e;
}

Environment Environment::with_discounts(std::vector<double> discount) const {
    Environment e = *this;
    e.discount_ = std::move(discount);
    e.validate_agent_vectors();
    return e;
}

Environment Environment::with_fixed_dates(std::vector<Month> fixed) const {
    Environment e = *this;
    e.fixed_ = std::move(fixed);
    e.validate_agent_vectors();
    return e;
}

AdoptionProfile Environment::initial_profile(Month fill) const {
    AdoptionProfile p(agent_count(), fill);
    for (AgentId a = 0; a < agent_count(); ++a)
        if (is_fixed(a)) p[a] = fixed_[a];
    return p;
}

EnvironmentData Environment::to_data() const {
    EnvironmentData d;
    d.params = shared_->params;
    d.horizon = shared_->horizon;
    d.call_price = shared_->call_price;
    d.handset_price = shared_->handset_price;
    d.coverage = shared_->coverage;
    d.eta = eta_;
    d.discount = discount_;
    d.fixed_dates = fixed_;
    if (shared_->has_sites) d.sites = shared_->sites;
    d.continuation = shared_->continuation;
    return d;
}

double monthly_utility(AgentId agent, const std::unordered_set<AgentId>& adopters, Month month,
                       const Environment& env) {
    env.check_agent(agent);
    if (month < 1 || month > env.horizon()) throw InvalidArgument("month outside horizon");
    const ContactGraph& g = env.graph();
    double total = 0.0;
    for (std::size_t l = g.out_begin(agent); l < g.out_end(agent); ++l)
        if (adopters.count(g.callee(l))) total += env.link_utility(l, month);
    return total + env.eta(agent);
}

}  // namespace netsub
