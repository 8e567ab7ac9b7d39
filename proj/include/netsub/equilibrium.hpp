#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "netsub/environment.hpp"

namespace netsub {

/// Lifetime utility of each adoption month as an affine function of eta:
/// U(tau) = base[tau-1] + eta * eta_weight[tau-1]. Never is always 0.
struct UtilityCurve {
    std::vector<double> base;
    std::vector<double> eta_weight;

    double at(Month tau, double eta) const {
        return adopted(tau) ? base[tau - 1] + eta * eta_weight[tau - 1] : 0.0;
    }
};

/// `subsidy` overrides the environment's per-agent adoption discount.
UtilityCurve adoption_curve(AgentId agent, const AdoptionProfile& contacts, const Environment& env,
                            std::optional<double> subsidy = std::nullopt);

double lifetime_utility(AgentId agent, Month tau, const AdoptionProfile& contacts,
                        const Environment& env, std::optional<double> subsidy = std::nullopt);

/// Earliest utility-maximizing month; Never only when every month is < 0.
Month best_response(AgentId agent, const AdoptionProfile& profile, const Environment& env);

enum class SweepMode { GaussSeidel, Jacobi };

struct SolveOptions {
    int max_rounds = 500;
    SweepMode mode = SweepMode::GaussSeidel;
    /// Agents are visited by id unless a seed for a shuffled order is given.
    std::optional<std::uint64_t> order_seed;
};

struct SolveResult {
    AdoptionProfile profile;
    int rounds = 0;
    bool converged = false;
    std::size_t updates = 0;
};

/// Iterated best response. A round re-evaluates every free agent whose
/// contacts moved since its last evaluation (the others would return their
/// current date); the solve has converged once a round changes nothing.
SolveResult solve_equilibrium(const AdoptionProfile& initial, const Environment& env,
                              const SolveOptions& opts = {});

struct NashViolation {
    AgentId agent;
    Month current;
    Month better;
    double gain;
};

std::vector<NashViolation> verify_nash(const AdoptionProfile& profile, const Environment& env,
                                       double tolerance = 1e-9);

struct EtaBounds {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<double> hi_comp;
    std::vector<std::uint8_t> crossed;
    std::vector<std::uint8_t> infeasible;
    std::vector<AgentId> infeasible_agents;
    /// Weight used for the comparable upper bounds (0 until they are computed).
    double weight = 0.0;

    std::size_t size() const { return lo.size(); }
    std::size_t crossed_count() const;
};

struct EtaBoundOptions {
    /// Bounds are capped to [-cap, cap] dollars/month.
    double cap = 1000.0;
    /// Adds "taking the subsidy beat buying at any point in the next N months"
    /// constraints for discounted agents. Only meaningful beyond the horizon,
    /// so it requires the continuation value to be enabled.
    int recipient_extension_months = 0;
};

/// Revealed-preference bounds: the observed date beats every later date
/// (lower bounds on eta) and strictly beats every earlier one (upper bounds).
EtaBounds estimate_eta_bounds(const AdoptionProfile& observed, const Environment& env,
                              const EtaBoundOptions& opts = {});

/// For recipients, hi_comp = a*lo + (1-a)*hi with one scalar a chosen so the
/// recipients' mean hi_comp equals the comparison group's mean hi.
EtaBounds comparable_upper_bounds(EtaBounds bounds, std::span<const AgentId> recipients,
                                  std::span<const AgentId> comparison);

enum class EtaMode { Lower, Upper };

const char* to_string(EtaMode mode);

/// Environment whose eta is the lower bound (Lower) or the comparable upper
/// bound (Upper), nudged `margin` inside the interval so the observed date is
/// not tied with a neighbour. Crossed and infeasible agents are held at
/// their baseline dates.
Environment bound_environment(const Environment& env, const EtaBounds& bounds, EtaMode mode,
                              const AdoptionProfile& baseline, double margin = 1e-6);

}  // namespace netsub
