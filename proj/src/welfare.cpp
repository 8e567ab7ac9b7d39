#include "netsub/welfare.hpp"

#include <cmath>
#include <string>

namespace netsub {

void TaxConfig::validate() const {
    if (!(call_rate >= 0.0) || !(handset_rate >= 0.0) || !std::isfinite(call_rate) ||
        !std::isfinite(handset_rate))
        throw InvalidArgument("tax rates must be finite and >= 0");
}

AgentWelfare evaluate_welfare(const AdoptionProfile& profile, const Environment& env,
                              const TaxConfig& taxes) {
    taxes.validate();
    const std::size_t n = env.agent_count();
    if (profile.size() != n) throw InvalidArgument("profile size does not match environment");
    const ContactGraph& g = env.graph();
    const Month T = env.horizon();

    for (Month tau : profile.tau)
        if (adopted(tau) && (tau < 1 || tau > T))
            throw InvalidArgument("adoption month outside horizon");

    AgentWelfare w;
    for (auto* v : {&w.call_surplus, &w.consumer_surplus, &w.consumer_surplus_with_eta,
                    &w.firm_revenue, &w.government_call, &w.government_handset,
                    &w.subsidy_outlay})
        v->assign(n, 0.0);

#pragma omp parallel for schedule(dynamic, 256)
    for (std::size_t a = 0; a < n; ++a) {
        const Month tau = profile.tau[a];
        if (!adopted(tau)) continue;
        double surplus = 0.0, revenue = 0.0, eta_part = 0.0;
        for (Month t = tau; t <= T; ++t) {
            double u = 0.0, r = 0.0;
            const double p = env.call_price(t);
            for (std::size_t l = g.out_begin(AgentId(a)); l < g.out_end(AgentId(a)); ++l) {
                if (profile.tau[g.callee(l)] > t) continue;
                u += env.link_utility(l, t);
                r += p * env.link_duration(l, t);
            }
            const double d = env.discount_factor(t);
            surplus += d * u;
            revenue += d * r;
            eta_part += d * env.eta(AgentId(a));
        }
        const double dt = env.discount_factor(tau);
        const double disc = env.adoption_discount(AgentId(a));
        const double payment = dt * (env.handset_price(tau) - disc);
        const double outlay = dt * disc;
        w.call_surplus[a] = surplus;
        w.consumer_surplus[a] = surplus - payment;
        w.consumer_surplus_with_eta[a] = surplus - payment + eta_part;
        w.firm_revenue[a] = revenue;
        w.government_call[a] = taxes.call_rate * revenue;
        w.government_handset[a] = taxes.handset_rate * payment - outlay;
        w.subsidy_outlay[a] = outlay;
    }
    return w;
}

std::vector<double> consumer_surplus(const AdoptionProfile& profile, const Environment& env,
                                     bool include_eta) {
    AgentWelfare w = evaluate_welfare(profile, env, {});
    return include_eta ? std::move(w.consumer_surplus_with_eta) : std::move(w.consumer_surplus);
}

std::vector<double> firm_revenue(const AdoptionProfile& profile, const Environment& env) {
    return evaluate_welfare(profile, env, {}).firm_revenue;
}

GovernmentRevenue government_revenue(const AdoptionProfile& profile, const Environment& env,
                                     const TaxConfig& taxes) {
    AgentWelfare w = evaluate_welfare(profile, env, taxes);
    return {std::move(w.government_call), std::move(w.government_handset)};
}

Outcomes Outcomes::operator-(const Outcomes& o) const {
    Outcomes d;
    d.count = count;
    d.mean_adoption_time = mean_adoption_time - o.mean_adoption_time;
    d.firm_revenue = firm_revenue - o.firm_revenue;
    d.consumer_surplus = consumer_surplus - o.consumer_surplus;
    d.consumer_surplus_with_eta = consumer_surplus_with_eta - o.consumer_surplus_with_eta;
    d.government_revenue = government_revenue - o.government_revenue;
    d.government_handset_revenue = government_handset_revenue - o.government_handset_revenue;
    d.subsidy_outlay = subsidy_outlay - o.subsidy_outlay;
    // Recomputed rather than differenced so the identity holds in every cell.
    d.net_welfare = d.firm_revenue + d.consumer_surplus + d.government_revenue;
    return d;
}

GroupOutcomes GroupOutcomes::operator-(const GroupOutcomes& o) const {
    return {all - o.all, recipients - o.recipients, nonrecipients - o.nonrecipients};
}

namespace {

struct Accumulator {
    std::size_t count = 0;
    double time = 0.0, firm = 0.0, cs = 0.0, cs_eta = 0.0, gov = 0.0, gov_handset = 0.0,
           outlay = 0.0;

    void add(const Accumulator& o) {
        count += o.count;
        time += o.time;
        firm += o.firm;
        cs += o.cs;
        cs_eta += o.cs_eta;
        gov += o.gov;
        gov_handset += o.gov_handset;
        outlay += o.outlay;
    }

    Outcomes finish() const {
        Outcomes out;
        out.count = count;
        out.mean_adoption_time = count ? time / double(count) : 0.0;
        out.firm_revenue = firm;
        out.consumer_surplus = cs;
        out.consumer_surplus_with_eta = cs_eta;
        out.government_revenue = gov;
        out.government_handset_revenue = gov_handset;
        out.subsidy_outlay = outlay;
        out.net_welfare = firm + cs + gov;
        return out;
    }
};

}  // namespace

GroupOutcomes summarize(const AdoptionProfile& profile, const AgentWelfare& welfare,
                        std::span<const std::uint8_t> is_recipient, Month horizon) {
    const std::size_t n = profile.size();
    if (welfare.size() != n || is_recipient.size() != n)
        throw InvalidArgument("summarize: profile, welfare and recipient flags differ in size");
    // Sequential, in agent order, so totals do not depend on the thread count.
    Accumulator acc[2];
    for (std::size_t a = 0; a < n; ++a) {
        Accumulator& g = acc[is_recipient[a] ? 1 : 0];
        const Month tau = profile.tau[a];
        ++g.count;
        g.time += adopted(tau) ? double(tau) : double(horizon) + 1.0;
        g.firm += welfare.firm_revenue[a];
        g.cs += welfare.consumer_surplus[a];
        g.cs_eta += welfare.consumer_surplus_with_eta[a];
        g.gov += welfare.government(a);
        g.gov_handset += welfare.government_handset[a];
        g.outlay += welfare.subsidy_outlay[a];
    }
    GroupOutcomes out;
    out.nonrecipients = acc[0].finish();
    out.recipients = acc[1].finish();
    Accumulator all = acc[0];
    all.add(acc[1]);
    out.all = all.finish();
    return out;
}

namespace {

OutcomeBounds pair_up(const Outcomes& lo, const Outcomes& hi) {
    OutcomeBounds b;
    b.mean_adoption_time = {lo.mean_adoption_time, hi.mean_adoption_time};
    b.firm_revenue = {lo.firm_revenue, hi.firm_revenue};
    b.consumer_surplus = {lo.consumer_surplus, hi.consumer_surplus};
    b.consumer_surplus_with_eta = {lo.consumer_surplus_with_eta, hi.consumer_surplus_with_eta};
    b.government_revenue = {lo.government_revenue, hi.government_revenue};
    b.government_handset_revenue = {lo.government_handset_revenue, hi.government_handset_revenue};
    b.net_welfare = {lo.net_welfare, hi.net_welfare};
    return b;
}

GroupBounds pair_up(const GroupOutcomes& lo, const GroupOutcomes& hi) {
    return {pair_up(lo.all, hi.all), pair_up(lo.recipients, hi.recipients),
            pair_up(lo.nonrecipients, hi.nonrecipients)};
}

double rate_of_return(double gain, double cost) {
    return cost != 0.0 ? gain / cost : std::nan("");
}

}  // namespace

WelfareReport build_report(const ImpactTable& lower, const ImpactTable& upper) {
    WelfareReport r;
    r.with_subsidy = pair_up(lower.with_subsidy, upper.with_subsidy);
    r.total = pair_up(lower.total, upper.total);
    r.proximal = pair_up(lower.proximal, upper.proximal);
    r.ripple = pair_up(lower.ripple, upper.ripple);
    r.subsidy_cost = {lower.with_subsidy.all.subsidy_outlay, upper.with_subsidy.all.subsidy_outlay};
    r.social_return = {rate_of_return(lower.total.all.net_welfare, r.subsidy_cost.lower),
                       rate_of_return(upper.total.all.net_welfare, r.subsidy_cost.upper)};
    r.held_fixed_lower = lower.held_fixed;
    r.held_fixed_upper = upper.held_fixed;
    r.converged = lower.converged && upper.converged;
    return r;
}

long CellGrid::cell_of(double x, double y) const {
    if (!std::isfinite(x) || !std::isfinite(y)) return -1;
    const double cx = std::floor((x - x0) / cell_size);
    const double cy = std::floor((y - y0) / cell_size);
    if (cx < 0 || cy < 0 || cx >= nx || cy >= ny) return -1;
    return long(cy) * nx + long(cx);
}

SurplusMap surplus_map(const AgentWelfare& baseline, const AgentWelfare& counterfactual,
                       const Environment& env, const CellGrid& grid) {
    const std::size_t n = env.agent_count();
    if (baseline.size() != n || counterfactual.size() != n)
        throw InvalidArgument("surplus_map: welfare vectors do not match environment");
    if (!(grid.cell_size > 0.0) || grid.nx < 1 || grid.ny < 1)
        throw InvalidArgument("surplus_map: invalid cell grid");
    SurplusMap m;
    m.grid = grid;
    m.baseline.assign(grid.cells(), 0.0);
    m.counterfactual.assign(grid.cells(), 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        const long c = env.has_sites() ? grid.cell_of(env.site(AgentId(a)).x, env.site(AgentId(a)).y)
                                       : -1;
        if (c < 0) {
            m.unlocated_baseline += baseline.call_surplus[a];
            m.unlocated_counterfactual += counterfactual.call_surplus[a];
            ++m.unlocated_agents;
        } else {
            m.baseline[std::size_t(c)] += baseline.call_surplus[a];
            m.counterfactual[std::size_t(c)] += counterfactual.call_surplus[a];
        }
    }
    return m;
}

}  // namespace netsub
