#include "netsub/policy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <unordered_set>

namespace netsub {

void SubsidyProgram::validate(std::size_t agents) const {
    if (!std::isfinite(discount) || discount < 0.0)
        throw InvalidArgument("subsidy discount must be finite and >= 0");
    if (discount > full_price) throw InvalidArgument("subsidy discount exceeds full handset price");
    if (payments < 0 || repayment < 0.0) throw InvalidArgument("repayment terms must be >= 0");
    std::vector<AgentId> r = recipients;
    std::sort(r.begin(), r.end());
    if (std::adjacent_find(r.begin(), r.end()) != r.end())
        throw InvalidArgument("duplicate subsidy recipient");
    if (!r.empty() && r.back() >= agents) throw UnknownAgent(r.back());
}

void TargetingRule::validate() const {
    if (budget == 0) throw InvalidArgument("targeting budget must be > 0");
    if (subsidy_month < 1) throw InvalidArgument("subsidy month must be >= 1");
}

GeoFilter TargetingRule::effective_geo() const {
    switch (variant) {
        case RuleVariant::RandomRural: return GeoFilter::Rural;
        case RuleVariant::RandomUrban: return GeoFilter::Urban;
        case RuleVariant::Voucher: return geo;
        default: return GeoFilter::Any;
    }
}

TargetingRule TargetingRule::implemented(std::size_t budget, Month month) {
    TargetingRule r;
    r.variant = RuleVariant::Implemented;
    r.budget = budget;
    r.subsidy_month = month;
    r.name = default_rule_name(r);
    return r;
}

TargetingRule TargetingRule::priority(PriorityMetric m, Direction d, std::size_t budget,
                                      Month month) {
    TargetingRule r;
    r.variant = RuleVariant::Priority;
    r.metric = m;
    r.direction = d;
    r.budget = budget;
    r.subsidy_month = month;
    r.name = default_rule_name(r);
    return r;
}

TargetingRule TargetingRule::random(RuleVariant v, std::size_t budget, Month month) {
    TargetingRule r;
    r.variant = v;
    r.budget = budget;
    r.subsidy_month = month;
    if (!r.is_random()) throw InvalidArgument("not a random rule variant");
    r.name = default_rule_name(r);
    return r;
}

TargetingRule TargetingRule::voucher(Cohort c, GeoFilter g, std::size_t budget, Month month) {
    TargetingRule r;
    r.variant = RuleVariant::Voucher;
    r.cohort = c;
    r.geo = g;
    r.budget = budget;
    r.subsidy_month = month;
    r.name = default_rule_name(r);
    return r;
}

std::string default_rule_name(const TargetingRule& r) {
    switch (r.variant) {
        case RuleVariant::Implemented: return "implemented";
        case RuleVariant::Priority: {
            const char* m = r.metric == PriorityMetric::Degree            ? "degree"
                            : r.metric == PriorityMetric::AdoptedContacts ? "adopted-contacts"
                                                                          : "adopted-fraction";
            return std::string("priority-") + m + (r.direction == Direction::High ? "-high" : "-low");
        }
        case RuleVariant::Random: return "random";
        case RuleVariant::RandomRural: return "random-rural";
        case RuleVariant::RandomUrban: return "random-urban";
        case RuleVariant::SuperCluster: return "super-cluster";
        case RuleVariant::Voucher: {
            std::string s = r.cohort == Cohort::Early ? "voucher-early" : "voucher-recent";
            if (r.geo == GeoFilter::Rural) s += "-rural";
            if (r.geo == GeoFilter::Urban) s += "-urban";
            return s;
        }
    }
    return "unknown";
}

TargetingRule parse_rule(const std::string& name, std::size_t budget, Month month) {
    for (const TargetingRule& r : standard_rules(budget, month))
        if (r.name == name) return r;
    throw InvalidArgument("unknown targeting rule: " + name);
}

std::vector<TargetingRule> standard_rules(std::size_t budget, Month month) {
    std::vector<TargetingRule> rules;
    rules.push_back(TargetingRule::implemented(budget, month));
    for (PriorityMetric m :
         {PriorityMetric::Degree, PriorityMetric::AdoptedContacts, PriorityMetric::AdoptedFraction})
        for (Direction d : {Direction::High, Direction::Low})
            rules.push_back(TargetingRule::priority(m, d, budget, month));
    for (RuleVariant v : {RuleVariant::Random, RuleVariant::RandomRural, RuleVariant::RandomUrban,
                          RuleVariant::SuperCluster})
        rules.push_back(TargetingRule::random(v, budget, month));
    for (Cohort c : {Cohort::Early, Cohort::Recent})
        for (GeoFilter g : {GeoFilter::Any, GeoFilter::Rural, GeoFilter::Urban})
            rules.push_back(TargetingRule::voucher(c, g, budget, month));
    return rules;
}

std::vector<AgentId> eligible_nodes(const Environment& env, const AdoptionProfile& baseline,
                                    const TargetingRule& rule,
                                    const std::vector<AgentId>& implemented_recipients) {
    rule.validate();
    const std::size_t n = env.agent_count();
    if (baseline.size() != n) throw InvalidArgument("baseline size does not match environment");
    const std::vector<std::uint8_t> implemented = recipient_mask(n, implemented_recipients);
    const GeoFilter geo = rule.effective_geo();
    std::vector<AgentId> out;
    for (AgentId a = 0; a < n; ++a) {
        const Month tau = baseline[a];
        if (implemented[a] || !adopted(tau) || tau < rule.subsidy_month) continue;
        if (geo == GeoFilter::Rural && !env.site(a).rural) continue;
        if (geo == GeoFilter::Urban && env.site(a).rural) continue;
        out.push_back(a);
    }
    return out;
}

double tie_strength(AgentId a, AgentId b, const AdoptionProfile& profile, const Environment& env) {
    if (!adopted(profile[a]) || !adopted(profile[b])) return 0.0;
    const Month from = std::max(profile[a], profile[b]);
    const ContactGraph& g = env.graph();
    double total = 0.0;
    for (long l : {g.find_link(a, b), g.find_link(b, a)}) {
        if (l < 0) continue;
        for (Month t = from; t <= env.horizon(); ++t) total += env.link_duration(std::size_t(l), t);
    }
    return total;
}

namespace {

std::vector<AgentId> allocate_priority(const TargetingRule& rule, const Environment& env,
                                       const AdoptionProfile& baseline,
                                       std::vector<AgentId> pool) {
    const ContactGraph& g = env.graph();
    std::vector<double> metric(env.agent_count(), 0.0);
    for (AgentId a : pool) {
        const auto nb = g.neighbors(a);
        double adopted_before = 0.0;
        for (AgentId b : nb)
            if (baseline[b] < rule.subsidy_month) adopted_before += 1.0;
        switch (rule.metric) {
            case PriorityMetric::Degree: metric[a] = double(nb.size()); break;
            case PriorityMetric::AdoptedContacts: metric[a] = adopted_before; break;
            case PriorityMetric::AdoptedFraction:
                metric[a] = nb.empty() ? 0.0 : adopted_before / double(nb.size());
                break;
        }
    }
    const bool high = rule.direction == Direction::High;
    std::stable_sort(pool.begin(), pool.end(), [&](AgentId x, AgentId y) {
        return high ? metric[x] > metric[y] : metric[x] < metric[y];
    });
    if (pool.size() > rule.budget) pool.resize(rule.budget);
    return pool;
}

std::vector<AgentId> allocate_random(const TargetingRule& rule, std::vector<AgentId> pool,
                                     std::mt19937_64& rng) {
    const std::size_t k = std::min(rule.budget, pool.size());
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    return pool;
}

// Breadth-first over eligible nodes from a random start; when a component is
// exhausted before the budget, restart from another random unselected node.
std::vector<AgentId> allocate_cluster(const TargetingRule& rule, const Environment& env,
                                      const std::vector<AgentId>& pool, std::mt19937_64& rng) {
    const ContactGraph& g = env.graph();
    std::vector<std::uint8_t> eligible(env.agent_count(), 0), taken(env.agent_count(), 0);
    for (AgentId a : pool) eligible[a] = 1;
    std::vector<AgentId> remaining = pool;
    std::vector<AgentId> out;
    const std::size_t k = std::min(rule.budget, pool.size());
    while (out.size() < k) {
        std::erase_if(remaining, [&](AgentId a) { return taken[a] != 0; });
        std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
        const AgentId start = remaining[pick(rng)];
        std::deque<AgentId> frontier{start};
        taken[start] = 1;
        while (!frontier.empty() && out.size() < k) {
            const AgentId a = frontier.front();
            frontier.pop_front();
            out.push_back(a);
            for (AgentId b : g.neighbors(a))
                if (eligible[b] && !taken[b]) {
                    taken[b] = 1;
                    frontier.push_back(b);
                }
        }
    }
    return out;
}

std::vector<AgentId> allocate_voucher(const TargetingRule& rule, const Environment& env,
                                      const AdoptionProfile& baseline,
                                      const std::vector<AgentId>& pool) {
    const ContactGraph& g = env.graph();
    const Month cohort_month = rule.cohort == Cohort::Early ? 1 : rule.subsidy_month - 1;
    std::vector<std::uint8_t> eligible(env.agent_count(), 0), taken(env.agent_count(), 0);
    for (AgentId a : pool) eligible[a] = 1;
    std::vector<AgentId> out;
    std::vector<std::pair<double, AgentId>> cands;
    for (AgentId giver = 0; giver < env.agent_count() && out.size() < rule.budget; ++giver) {
        if (baseline[giver] != cohort_month) continue;
        cands.clear();
        for (AgentId b : g.neighbors(giver))
            if (eligible[b] && !taken[b]) cands.emplace_back(tie_strength(giver, b, baseline, env), b);
        if (cands.empty()) continue;
        const auto best = std::min_element(cands.begin(), cands.end(), [](auto& x, auto& y) {
            return x.first != y.first ? x.first > y.first : x.second < y.second;
        });
        taken[best->second] = 1;
        out.push_back(best->second);
    }
    return out;
}

}  // namespace

Allocation allocate(const TargetingRule& rule, const Environment& env,
                    const AdoptionProfile& baseline,
                    const std::vector<AgentId>& implemented_recipients, std::uint64_t seed) {
    rule.validate();
    Allocation out;
    if (rule.variant == RuleVariant::Implemented) {
        out.recipients = implemented_recipients;
        for (AgentId a : out.recipients) env.check_agent(a);
        if (out.recipients.size() > rule.budget) out.recipients.resize(rule.budget);
        out.eligible = implemented_recipients.size();
    } else {
        std::vector<AgentId> pool = eligible_nodes(env, baseline, rule, implemented_recipients);
        out.eligible = pool.size();
        std::mt19937_64 rng(seed);
        switch (rule.variant) {
            case RuleVariant::Priority:
                out.recipients = allocate_priority(rule, env, baseline, std::move(pool));
                break;
            case RuleVariant::Random:
            case RuleVariant::RandomRural:
            case RuleVariant::RandomUrban:
                out.recipients = allocate_random(rule, std::move(pool), rng);
                break;
            case RuleVariant::SuperCluster:
                out.recipients = allocate_cluster(rule, env, pool, rng);
                break;
            case RuleVariant::Voucher:
                out.recipients = allocate_voucher(rule, env, baseline, pool);
                break;
            case RuleVariant::Implemented: break;
        }
    }
    std::sort(out.recipients.begin(), out.recipients.end());
    out.shortfall = rule.budget > out.recipients.size() ? rule.budget - out.recipients.size() : 0;
    return out;
}

std::vector<std::uint8_t> recipient_mask(std::size_t agents, const std::vector<AgentId>& recipients) {
    std::vector<std::uint8_t> mask(agents, 0);
    for (AgentId a : recipients) {
        if (a >= agents) throw UnknownAgent(a);
        mask[a] = 1;
    }
    return mask;
}

namespace {

Environment shift_discounts(const Environment& env, const SubsidyProgram& program, double sign) {
    program.validate(env.agent_count());
    if (program.recipients.empty() || program.discount == 0.0) return env;
    auto d = env.adoption_discounts();
    std::vector<double> disc(d.begin(), d.end());
    for (AgentId a : program.recipients) disc[a] += sign * program.discount;
    return env.with_discounts(std::move(disc));
}

}  // namespace

Environment apply_program(const Environment& env, const SubsidyProgram& program) {
    return shift_discounts(env, program, 1.0);
}

Environment remove_program(const Environment& env, const SubsidyProgram& program) {
    return shift_discounts(env, program, -1.0);
}

ImpactTable decompose_impact(const Environment& env, const SubsidyProgram& program,
                             const AdoptionProfile& baseline, const TaxConfig& taxes,
                             const SolveOptions& solve) {
    const std::size_t n = env.agent_count();
    if (baseline.size() != n) throw InvalidArgument("baseline size does not match environment");
    const std::vector<std::uint8_t> mask = recipient_mask(n, program.recipients);
    const Environment without = remove_program(env, program);

    ImpactTable t;
    t.with_profile = baseline;
    t.proximal_profile = baseline;
    for (AgentId r : program.recipients)
        if (!without.is_fixed(r)) t.proximal_profile[r] = best_response(r, baseline, without);

    SolveResult full = solve_equilibrium(t.proximal_profile, without, solve);
    t.without_profile = std::move(full.profile);
    t.converged = full.converged;
    t.rounds = full.rounds;

    const Month T = env.horizon();
    const GroupOutcomes with = summarize(baseline, evaluate_welfare(baseline, env, taxes), mask, T);
    const GroupOutcomes prox =
        summarize(t.proximal_profile, evaluate_welfare(t.proximal_profile, without, taxes), mask, T);
    const GroupOutcomes none =
        summarize(t.without_profile, evaluate_welfare(t.without_profile, without, taxes), mask, T);
    t.with_subsidy = with;
    t.proximal = with - prox;
    t.total = with - none;
    t.ripple = t.total - t.proximal;
    return t;
}

}  // namespace netsub
