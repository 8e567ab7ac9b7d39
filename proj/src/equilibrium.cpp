#include "netsub/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <omp.h>

namespace netsub {

namespace {

// Month flow of call utility (eta excluded) for t = 1..T, stored at [t-1].
void call_flows(AgentId agent, const AdoptionProfile& contacts, const Environment& env,
                std::vector<double>& flow) {
    const Month T = env.horizon();
    flow.assign(std::size_t(T), 0.0);
    const ContactGraph& g = env.graph();
    for (std::size_t l = g.out_begin(agent); l < g.out_end(agent); ++l) {
        const Month tj = contacts[g.callee(l)];
        if (!adopted(tj) || tj > T) continue;
        for (Month t = std::max<Month>(tj, 1); t <= T; ++t) flow[t - 1] += env.link_utility(l, t);
    }
}

void fill_curve(AgentId agent, const std::vector<double>& flow, const Environment& env,
                double discount, UtilityCurve& curve) {
    const Month T = env.horizon();
    curve.base.resize(std::size_t(T));
    curve.eta_weight.resize(std::size_t(T));
    double stream = env.continuation_weight() * flow[T - 1];
    double weight = env.continuation_weight();
    for (Month tau = T; tau >= 1; --tau) {
        const double d = env.discount_factor(tau);
        stream += d * flow[tau - 1];
        weight += d;
        curve.base[tau - 1] = stream - d * (env.handset_price(tau) - discount);
        curve.eta_weight[tau - 1] = weight;
    }
    (void)agent;
}

struct Choice {
    Month tau;
    double value;
};

Choice best_choice(const UtilityCurve& curve, double eta) {
    Choice best{kNever, -std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < curve.base.size(); ++k) {
        const double u = curve.base[k] + eta * curve.eta_weight[k];
        if (u > best.value) best = {Month(k + 1), u};
    }
    if (best.value < 0.0) best = {kNever, 0.0};
    return best;
}

struct Scratch {
    std::vector<double> flow;
    UtilityCurve curve;
};

Month respond(AgentId a, const AdoptionProfile& p, const Environment& env, Scratch& s) {
    call_flows(a, p, env, s.flow);
    fill_curve(a, s.flow, env, env.adoption_discount(a), s.curve);
    return best_choice(s.curve, env.eta(a)).tau;
}

void check_profile(const AdoptionProfile& p, const Environment& env) {
    if (p.size() != env.agent_count())
        throw InvalidArgument("profile size does not match the environment");
    for (AgentId a = 0; a < p.size(); ++a) {
        const Month t = p[a];
        if (adopted(t) && (t < 1 || t > env.horizon()))
            throw InvalidArgument("adoption month outside horizon for agent " + std::to_string(a));
    }
}

}  // namespace

UtilityCurve adoption_curve(AgentId agent, const AdoptionProfile& contacts, const Environment& env,
                            std::optional<double> subsidy) {
    env.check_agent(agent);
    check_profile(contacts, env);
    std::vector<double> flow;
    call_flows(agent, contacts, env, flow);
    UtilityCurve curve;
    fill_curve(agent, flow, env, subsidy.value_or(env.adoption_discount(agent)), curve);
    return curve;
}

double lifetime_utility(AgentId agent, Month tau, const AdoptionProfile& contacts,
                        const Environment& env, std::optional<double> subsidy) {
    env.check_agent(agent);
    if (!adopted(tau)) return 0.0;
    if (tau < 1 || tau > env.horizon()) throw InvalidArgument("adoption month outside horizon");
    return adoption_curve(agent, contacts, env, subsidy).at(tau, env.eta(agent));
}

Month best_response(AgentId agent, const AdoptionProfile& profile, const Environment& env) {
    env.check_agent(agent);
    check_profile(profile, env);
    Scratch s;
    return respond(agent, profile, env, s);
}

SolveResult solve_equilibrium(const AdoptionProfile& initial, const Environment& env,
                              const SolveOptions& opts) {
    check_profile(initial, env);
    const std::size_t n = env.agent_count();
    for (AgentId a = 0; a < n; ++a)
        if (env.is_fixed(a) && initial[a] != env.fixed_date(a))
            throw InvalidArgument("initial profile moves fixed agent " + std::to_string(a));

    std::vector<AgentId> order(n);
    std::iota(order.begin(), order.end(), AgentId{0});
    if (opts.order_seed) {
        std::mt19937_64 rng(*opts.order_seed);
        std::shuffle(order.begin(), order.end(), rng);
    }

    SolveResult res;
    res.profile = initial;
    AdoptionProfile& prof = res.profile;
    const ContactGraph& g = env.graph();
    std::vector<std::uint8_t> dirty(n, 1);
    auto touch = [&](AgentId moved) {
        for (std::uint32_t l : g.in_links(moved)) dirty[g.caller(l)] = 1;
    };

    if (opts.mode == SweepMode::GaussSeidel) {
        Scratch s;
        for (int round = 1; round <= opts.max_rounds; ++round) {
            std::size_t changed = 0;
            for (AgentId a : order) {
                if (env.is_fixed(a) || !dirty[a]) continue;
                dirty[a] = 0;
                const Month br = respond(a, prof, env, s);
                if (br != prof[a]) {
                    prof[a] = br;
                    ++changed;
                    touch(a);
                }
            }
            res.rounds = round;
            res.updates += changed;
            if (changed == 0) {
                res.converged = true;
                break;
            }
        }
        return res;
    }

    // Jacobi: everybody answers the round-start profile.
    std::vector<Month> next(n);
    for (int round = 1; round <= opts.max_rounds; ++round) {
#pragma omp parallel
        {
            Scratch s;
#pragma omp for schedule(dynamic, 256)
            for (std::size_t k = 0; k < n; ++k) {
                const AgentId a = order[k];
                next[a] = (env.is_fixed(a) || !dirty[a]) ? prof[a] : respond(a, prof, env, s);
            }
        }
        std::fill(dirty.begin(), dirty.end(), 0);
        std::size_t changed = 0;
        for (AgentId a : order) {
            if (next[a] != prof[a]) {
                prof[a] = next[a];
                ++changed;
                touch(a);
            }
        }
        res.rounds = round;
        res.updates += changed;
        if (changed == 0) {
            res.converged = true;
            break;
        }
    }
    return res;
}

std::vector<NashViolation> verify_nash(const AdoptionProfile& profile, const Environment& env,
                                       double tolerance) {
    check_profile(profile, env);
    const std::size_t n = env.agent_count();
    std::vector<NashViolation> found(n, NashViolation{0, 0, 0, 0.0});
    std::vector<std::uint8_t> bad(n, 0);
#pragma omp parallel
    {
        Scratch s;
#pragma omp for schedule(dynamic, 256)
        for (std::size_t k = 0; k < n; ++k) {
            const AgentId a = AgentId(k);
            if (env.is_fixed(a)) continue;
            call_flows(a, profile, env, s.flow);
            fill_curve(a, s.flow, env, env.adoption_discount(a), s.curve);
            const double eta = env.eta(a);
            const Choice best = best_choice(s.curve, eta);
            const double cur = s.curve.at(profile[a], eta);
            // Never is worth 0 even when the best month is negative.
            const double best_value = std::max(best.value, 0.0);
            if (best_value - cur > tolerance) {
                const Month better = best.value >= 0.0 ? best.tau : kNever;
                found[k] = {a, profile[a], better, best_value - cur};
                bad[k] = 1;
            }
        }
    }
    std::vector<NashViolation> out;
    for (std::size_t k = 0; k < n; ++k)
        if (bad[k]) out.push_back(found[k]);
    return out;
}

std::size_t EtaBounds::crossed_count() const {
    return static_cast<std::size_t>(std::count(crossed.begin(), crossed.end(), 1));
}

EtaBounds estimate_eta_bounds(const AdoptionProfile& observed, const Environment& env,
                              const EtaBoundOptions& opts) {
    check_profile(observed, env);
    if (!(opts.cap > 0.0)) throw InvalidArgument("eta cap must be > 0");
    const std::size_t n = env.agent_count();
    const Month T = env.horizon();
    EtaBounds b;
    b.lo.assign(n, -opts.cap);
    b.hi.assign(n, opts.cap);
    b.crossed.assign(n, 0);
    b.infeasible.assign(n, 0);

    const bool extend = opts.recipient_extension_months > 0 && env.continuation() &&
                        env.params().delta < 1.0;
    const double delta = env.params().delta;

#pragma omp parallel
    {
        Scratch s;
#pragma omp for schedule(dynamic, 256)
        for (std::size_t k = 0; k < n; ++k) {
            const AgentId a = AgentId(k);
            call_flows(a, observed, env, s.flow);
            fill_curve(a, s.flow, env, env.adoption_discount(a), s.curve);
            const UtilityCurve& c = s.curve;
            const Month obs = observed[a];
            constexpr double inf = std::numeric_limits<double>::infinity();
            double lo = -inf, hi = inf;
            if (!adopted(obs)) {
                // Every month must be strictly negative.
                for (Month t = 1; t <= T; ++t) hi = std::min(hi, -c.base[t - 1] / c.eta_weight[t - 1]);
            } else {
                const double b0 = c.base[obs - 1], w0 = c.eta_weight[obs - 1];
                // Never (0, 0) and later months give lower bounds.
                lo = std::max(lo, -b0 / w0);
                for (Month t = obs + 1; t <= T; ++t)
                    lo = std::max(lo, (c.base[t - 1] - b0) / (w0 - c.eta_weight[t - 1]));
                // Earlier months win ties, so these are strict upper bounds.
                for (Month t = 1; t < obs; ++t)
                    hi = std::min(hi, (b0 - c.base[t - 1]) / (c.eta_weight[t - 1] - w0));
                if (extend && env.adoption_discount(a) > 0.0) {
                    const double tail = s.flow[T - 1] / (1.0 - delta);
                    for (Month t = T + 1; t <= obs + opts.recipient_extension_months; ++t) {
                        const double dt = std::pow(delta, t);
                        const double base = dt * (tail - env.handset_price(T));
                        const double w = dt / (1.0 - delta);
                        lo = std::max(lo, (base - b0) / (w0 - w));
                    }
                }
            }
            const bool feasible = lo < hi;
            lo = std::clamp(lo, -opts.cap, opts.cap);
            hi = std::clamp(hi, -opts.cap, opts.cap);
            if (!feasible) {
                b.infeasible[k] = 1;
                lo = hi = 0.5 * (lo + hi);
            }
            b.lo[k] = lo;
            b.hi[k] = hi;
        }
    }
    for (AgentId a = 0; a < n; ++a)
        if (b.infeasible[a]) b.infeasible_agents.push_back(a);
    b.hi_comp = b.hi;
    return b;
}

EtaBounds comparable_upper_bounds(EtaBounds bounds, std::span<const AgentId> recipients,
                                  std::span<const AgentId> comparison) {
    if (recipients.empty() || comparison.empty())
        throw InvalidArgument("comparable bounds need nonempty recipient and comparison groups");
    auto mean = [&](std::span<const AgentId> set, const std::vector<double>& v) {
        double s = 0.0;
        for (AgentId a : set) {
            if (a >= v.size()) throw UnknownAgent(a);
            s += v[a];
        }
        return s / static_cast<double>(set.size());
    };
    const double r_lo = mean(recipients, bounds.lo);
    const double r_hi = mean(recipients, bounds.hi);
    const double c_hi = mean(comparison, bounds.hi);
    const double denom = r_lo - r_hi;
    if (std::abs(denom) <= 1e-12 * std::max(1.0, std::abs(r_hi)))
        throw Error("comparable upper bound weight undefined: recipient bounds coincide on average");
    // A negative weight would lift recipients above their standard upper bound.
    const double a = std::max(0.0, (c_hi - r_hi) / denom);

    bounds.hi_comp = bounds.hi;
    for (AgentId i : recipients) bounds.hi_comp[i] = a * bounds.lo[i] + (1.0 - a) * bounds.hi[i];
    for (std::size_t i = 0; i < bounds.size(); ++i)
        bounds.crossed[i] = bounds.lo[i] > bounds.hi_comp[i] ? 1 : 0;
    bounds.weight = a;
    return bounds;
}

const char* to_string(EtaMode mode) { return mode == EtaMode::Lower ? "lower" : "upper"; }

Environment bound_environment(const Environment& env, const EtaBounds& bounds, EtaMode mode,
                              const AdoptionProfile& baseline, double margin) {
    const std::size_t n = env.agent_count();
    if (bounds.size() != n || baseline.size() != n)
        throw InvalidArgument("bounds and baseline must match the environment");
    std::vector<double> eta(n);
    std::vector<Month> fixed(env.fixed_dates().begin(), env.fixed_dates().end());
    for (AgentId a = 0; a < n; ++a) {
        const double lo = bounds.lo[a];
        const double hi = mode == EtaMode::Lower ? bounds.hi[a] : bounds.hi_comp[a];
        if (mode == EtaMode::Lower)
            eta[a] = hi - lo > 2.0 * margin ? lo + margin : 0.5 * (lo + hi);
        else
            eta[a] = hi - lo > 2.0 * margin ? hi - margin : 0.5 * (lo + hi);
        const bool hold = bounds.crossed[a] || bounds.infeasible[a];
        if (hold && !env.is_fixed(a)) {
            if (adopted(baseline[a])) {
                fixed[a] = baseline[a];
            } else {
                // A fixed Never is not representable; pin eta below every month instead.
                eta[a] = std::min(eta[a], lo);
            }
        }
    }
    return env.with_eta(std::move(eta)).with_fixed_dates(std::move(fixed));
}

}  // namespace netsub
