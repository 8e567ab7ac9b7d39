#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "netsub/environment.hpp"

namespace netsub {

struct TaxConfig {
    double call_rate = 0.02;    // share of operator call revenue
    double handset_rate = 0.0;  // share of handset payments
    void validate() const;
};

/// Per-agent discounted welfare components over months 1..horizon.
struct AgentWelfare {
    std::vector<double> call_surplus;               // sum delta^t Eu_ij, eta and handset excluded
    std::vector<double> consumer_surplus;           // call surplus - delta^tau * effective handset price
    std::vector<double> consumer_surplus_with_eta;  // consumer surplus + sum delta^t eta
    std::vector<double> firm_revenue;               // sum delta^t p_t E[d]
    std::vector<double> government_call;            // call_rate * firm revenue
    std::vector<double> government_handset;         // handset tax - subsidy outlay
    std::vector<double> subsidy_outlay;             // delta^tau * discount for adopters

    std::size_t size() const { return call_surplus.size(); }
    double government(std::size_t a) const { return government_call[a] + government_handset[a]; }
    double net_welfare(std::size_t a) const {
        return firm_revenue[a] + consumer_surplus[a] + government(a);
    }
};

AgentWelfare evaluate_welfare(const AdoptionProfile& profile, const Environment& env,
                              const TaxConfig& taxes = {});

std::vector<double> consumer_surplus(const AdoptionProfile& profile, const Environment& env,
                                     bool include_eta);
std::vector<double> firm_revenue(const AdoptionProfile& profile, const Environment& env);

struct GovernmentRevenue {
    std::vector<double> call;
    std::vector<double> handset;
};
GovernmentRevenue government_revenue(const AdoptionProfile& profile, const Environment& env,
                                     const TaxConfig& taxes);

struct Outcomes {
    std::size_t count = 0;
    double mean_adoption_time = 0.0;  // Never counted as horizon + 1
    double firm_revenue = 0.0;
    double consumer_surplus = 0.0;
    double consumer_surplus_with_eta = 0.0;
    double government_revenue = 0.0;
    double government_handset_revenue = 0.0;
    double net_welfare = 0.0;
    double subsidy_outlay = 0.0;

    Outcomes operator-(const Outcomes& o) const;
};

struct GroupOutcomes {
    Outcomes all;
    Outcomes recipients;
    Outcomes nonrecipients;

    GroupOutcomes operator-(const GroupOutcomes& o) const;
};

/// `is_recipient` has one flag per agent.
GroupOutcomes summarize(const AdoptionProfile& profile, const AgentWelfare& welfare,
                        std::span<const std::uint8_t> is_recipient, Month horizon);

/// Baseline-with-subsidy outcomes and the impact decomposition
/// (impact = with subsidy minus without).
struct ImpactTable {
    GroupOutcomes with_subsidy;
    GroupOutcomes proximal;
    GroupOutcomes ripple;
    GroupOutcomes total;
    AdoptionProfile with_profile;
    AdoptionProfile proximal_profile;
    AdoptionProfile without_profile;
    bool converged = true;
    int rounds = 0;
    std::size_t held_fixed = 0;
};

struct BoundPair {
    double lower = 0.0;
    double upper = 0.0;
};

struct OutcomeBounds {
    BoundPair mean_adoption_time;
    BoundPair firm_revenue;
    BoundPair consumer_surplus;
    BoundPair consumer_surplus_with_eta;
    BoundPair government_revenue;
    BoundPair government_handset_revenue;
    BoundPair net_welfare;
};

struct GroupBounds {
    OutcomeBounds all;
    OutcomeBounds recipients;
    OutcomeBounds nonrecipients;
};

struct WelfareReport {
    GroupBounds with_subsidy;
    GroupBounds total;
    GroupBounds proximal;
    GroupBounds ripple;
    BoundPair subsidy_cost;   // net present cost of the discounts paid
    BoundPair social_return;  // total net welfare impact / subsidy cost
    std::size_t held_fixed_lower = 0;
    std::size_t held_fixed_upper = 0;
    bool converged = true;
};

WelfareReport build_report(const ImpactTable& lower, const ImpactTable& upper);

/// Regular grid of map cells in the local metric frame.
struct CellGrid {
    double x0 = 0.0;
    double y0 = 0.0;
    double cell_size = 1000.0;
    int nx = 1;
    int ny = 1;

    std::size_t cells() const { return std::size_t(nx) * std::size_t(ny); }
    /// Cell index or -1 when off the grid.
    long cell_of(double x, double y) const;
};

struct SurplusMap {
    CellGrid grid;
    std::vector<double> baseline;
    std::vector<double> counterfactual;
    double unlocated_baseline = 0.0;
    double unlocated_counterfactual = 0.0;
    std::size_t unlocated_agents = 0;

    double difference(std::size_t cell) const { return counterfactual[cell] - baseline[cell]; }
};

/// Each agent's call surplus (eta and handset excluded) placed in its cell.
SurplusMap surplus_map(const AgentWelfare& baseline, const AgentWelfare& counterfactual,
                       const Environment& env, const CellGrid& grid);

}  // namespace netsub
