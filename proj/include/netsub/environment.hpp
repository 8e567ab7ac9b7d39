#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <unordered_set>
#include <vector>

#include "netsub/model.hpp"
#include "netsub/types.hpp"

namespace netsub {

/// Directed contact graph in CSR form. Links are sorted by (caller, callee);
/// a link's index is its position in that order.
class ContactGraph {
public:
    ContactGraph() = default;
    /// Validates (no self links, no duplicate ordered pairs, endpoints in range).
    static ContactGraph build(std::size_t agents, std::vector<Link> links);

    std::size_t agent_count() const { return out_offsets_.empty() ? 0 : out_offsets_.size() - 1; }
    std::size_t link_count() const { return callee_.size(); }

    AgentId caller(std::size_t link) const { return caller_[link]; }
    AgentId callee(std::size_t link) const { return callee_[link]; }
    const ShockDistribution& shocks(std::size_t link) const { return shocks_[link]; }
    std::span<const ShockDistribution> all_shocks() const { return shocks_; }

    /// Link indices [begin, end) with the given caller.
    std::size_t out_begin(AgentId a) const { return out_offsets_[a]; }
    std::size_t out_end(AgentId a) const { return out_offsets_[a + 1]; }
    /// Indices of links whose callee is `a`.
    std::span<const std::uint32_t> in_links(AgentId a) const {
        return {in_links_.data() + in_offsets_[a], in_links_.data() + in_offsets_[a + 1]};
    }
    /// Undirected neighbours (callers or callees), sorted ascending.
    std::span<const AgentId> neighbors(AgentId a) const {
        return {nbr_.data() + nbr_offsets_[a], nbr_.data() + nbr_offsets_[a + 1]};
    }
    /// Link index for caller->callee, or -1.
    long find_link(AgentId caller, AgentId callee) const;

private:
    std::vector<std::size_t> out_offsets_;
    std::vector<AgentId> caller_;
    std::vector<AgentId> callee_;
    std::vector<ShockDistribution> shocks_;
    std::vector<std::size_t> in_offsets_;
    std::vector<std::uint32_t> in_links_;
    std::vector<std::size_t> nbr_offsets_;
    std::vector<AgentId> nbr_;
};

struct AgentSite {
    double x = 0.0;  // meters east of the layout origin
    double y = 0.0;  // meters north of the layout origin
    bool rural = false;
};

/// Everything needed to assemble an Environment. Per-agent vectors may be
/// left empty to take the defaults noted.
struct EnvironmentData {
    UtilityParams params;
    Month horizon = 1;
    std::vector<double> call_price;     // dollars/second, months 1..horizon
    std::vector<double> handset_price;  // dollars, months 1..horizon
    std::vector<double> coverage;       // agent-major [agent * horizon + t-1]; empty = 1.0
    std::vector<double> eta;            // dollars/month; empty = 0
    std::vector<double> discount;       // adoption discount, dollars; empty = 0
    std::vector<Month> fixed_dates;     // kFree or a month in [1, horizon]; empty = all free
    std::vector<AgentSite> sites;       // empty = origin, urban
    /// Adds delta^(T+1)/(1-delta) times the last month's flow to lifetime utility.
    bool continuation = false;
};

/// Strategy profile: one adoption month (or kNever) per agent.
struct AdoptionProfile {
    std::vector<Month> tau;

    AdoptionProfile() = default;
    explicit AdoptionProfile(std::size_t n, Month fill = kNever) : tau(n, fill) {}
    std::size_t size() const { return tau.size(); }
    Month operator[](AgentId a) const { return tau[a]; }
    Month& operator[](AgentId a) { return tau[a]; }
    bool operator==(const AdoptionProfile&) const = default;
};

/// The immutable state the equilibrium solver consumes. Heavy parts (graph,
/// series, coverage, precomputed link values) are shared between copies; the
/// per-agent vectors (eta, discounts, fixed dates) are owned, so counterfactual
/// variants are cheap to derive.
class Environment {
public:
    Environment(std::shared_ptr<const ContactGraph> graph, EnvironmentData data);

    std::size_t agent_count() const { return eta_.size(); }
    Month horizon() const { return shared_->horizon; }
    const UtilityParams& params() const { return shared_->params; }
    const ContactGraph& graph() const { return *shared_->graph; }
    std::shared_ptr<const ContactGraph> graph_ptr() const { return shared_->graph; }
    bool continuation() const { return shared_->continuation; }

    double call_price(Month t) const { return shared_->call_price[t - 1]; }
    double handset_price(Month t) const { return shared_->handset_price[t - 1]; }
    double coverage(AgentId a, Month t) const {
        return shared_->coverage.empty() ? 1.0
                                         : shared_->coverage[a * std::size_t(horizon()) + (t - 1)];
    }
    /// delta^t for t in [0, horizon + 1].
    double discount_factor(Month t) const { return shared_->delta_pow[t]; }
    /// Multiplier of the last month's flow standing in for months after the horizon.
    double continuation_weight() const { return shared_->continuation_weight; }

    double eta(AgentId a) const { return eta_[a]; }
    double adoption_discount(AgentId a) const { return discount_[a]; }
    Month fixed_date(AgentId a) const { return fixed_[a]; }
    bool is_fixed(AgentId a) const { return fixed_[a] != kFree; }
    const AgentSite& site(AgentId a) const { return shared_->sites[a]; }
    bool has_sites() const { return shared_->has_sites; }

    std::span<const double> etas() const { return eta_; }
    std::span<const double> adoption_discounts() const { return discount_; }
    std::span<const Month> fixed_dates() const { return fixed_; }

    /// Expected surplus / duration of link l in month t under this environment.
    double link_utility(std::size_t link, Month t) const {
        return shared_->link_utility[link * std::size_t(horizon()) + (t - 1)];
    }
    double link_duration(std::size_t link, Month t) const {
        return shared_->link_duration[link * std::size_t(horizon()) + (t - 1)];
    }

    void check_agent(std::uint64_t a) const {
        if (a >= agent_count()) throw UnknownAgent(a);
    }

    Environment with_eta(std::vector<double> eta) const;
    Environment with_discounts(std::vector<double> discount) const;
    Environment with_fixed_dates(std::vector<Month> fixed) const;

    /// Profile with S_0 at their dates and everybody else at `fill`.
    AdoptionProfile initial_profile(Month fill = kNever) const;

    /// Reassembles the data this environment was built from.
    EnvironmentData to_data() const;

private:
    struct Shared {
        std::shared_ptr<const ContactGraph> graph;
        UtilityParams params;
        Month horizon = 1;
        std::vector<double> call_price;
        std::vector<double> handset_price;
        std::vector<double> coverage;
        std::vector<AgentSite> sites;
        bool has_sites = false;
        bool continuation = false;
        std::vector<double> delta_pow;
        double continuation_weight = 0.0;
        std::vector<double> link_utility;
        std::vector<double> link_duration;
    };

    Environment() = default;
    void validate_agent_vectors() const;

    std::shared_ptr<const Shared> shared_;
    std::vector<double> eta_;
    std::vector<double> discount_;
    std::vector<Month> fixed_;
};

/// Eu_it: expected utility of agent i in month t when the given set subscribes.
double monthly_utility(AgentId agent, const std::unordered_set<AgentId>& adopters, Month month,
                       const Environment& env);

}  // namespace netsub
