#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "netsub/equilibrium.hpp"
#include "netsub/welfare.hpp"

namespace netsub {

struct SubsidyProgram {
    std::vector<AgentId> recipients;
    double discount = 18.94;
    Month month = 1;
    double full_price = 28.0;
    double repayment = 1.81;  // dollars/month
    int payments = 5;

    /// full price less the repayments made.
    double derived_discount() const { return full_price - payments * repayment; }
    void validate(std::size_t agents) const;
};

enum class RuleVariant { Implemented, Priority, Random, RandomRural, RandomUrban, SuperCluster, Voucher };
enum class PriorityMetric { Degree, AdoptedContacts, AdoptedFraction };
enum class Direction { High, Low };
enum class Cohort { Early, Recent };
enum class GeoFilter { Any, Rural, Urban };

struct TargetingRule {
    std::string name;
    RuleVariant variant = RuleVariant::Implemented;
    PriorityMetric metric = PriorityMetric::Degree;  // Priority only
    Direction direction = Direction::High;           // Priority only
    Cohort cohort = Cohort::Early;                   // Voucher only
    GeoFilter geo = GeoFilter::Any;                  // Voucher only; Random* imply theirs
    std::size_t budget = 41225;
    Month subsidy_month = 1;

    void validate() const;
    bool is_random() const {
        return variant == RuleVariant::Random || variant == RuleVariant::RandomRural ||
               variant == RuleVariant::RandomUrban || variant == RuleVariant::SuperCluster;
    }
    GeoFilter effective_geo() const;

    static TargetingRule implemented(std::size_t budget, Month month);
    static TargetingRule priority(PriorityMetric m, Direction d, std::size_t budget, Month month);
    static TargetingRule random(RuleVariant v, std::size_t budget, Month month);
    static TargetingRule voucher(Cohort c, GeoFilter g, std::size_t budget, Month month);
};

std::string default_rule_name(const TargetingRule& rule);
/// Parses the names produced by default_rule_name.
TargetingRule parse_rule(const std::string& name, std::size_t budget, Month month);
/// The 17 rules of the full comparison: implemented, 6 priority, 4 random, 6 voucher.
std::vector<TargetingRule> standard_rules(std::size_t budget, Month month);

/// Agents with baseline adoption in [month, horizon] who were not implemented
/// recipients, intersected with the rule's rural/urban filter. Sorted by id.
std::vector<AgentId> eligible_nodes(const Environment& env, const AdoptionProfile& baseline,
                                    const TargetingRule& rule,
                                    const std::vector<AgentId>& implemented_recipients);

struct Allocation {
    std::vector<AgentId> recipients;  // sorted by id
    std::size_t eligible = 0;
    std::size_t shortfall = 0;        // budget - recipients when the pool runs dry
};

/// For the implemented rule the implemented recipients are returned as given.
Allocation allocate(const TargetingRule& rule, const Environment& env,
                    const AdoptionProfile& baseline,
                    const std::vector<AgentId>& implemented_recipients, std::uint64_t seed);

/// Expected total call duration between a and b in both directions from the
/// month both have adopted through the horizon.
double tie_strength(AgentId a, AgentId b, const AdoptionProfile& profile, const Environment& env);

/// Adds the discount to each recipient's adoption discount.
Environment apply_program(const Environment& env, const SubsidyProgram& program);
/// Inverse of apply_program.
Environment remove_program(const Environment& env, const SubsidyProgram& program);

/// `env` has the program in place and `baseline` is its equilibrium.
ImpactTable decompose_impact(const Environment& env, const SubsidyProgram& program,
                             const AdoptionProfile& baseline, const TaxConfig& taxes = {},
                             const SolveOptions& solve = {});

std::vector<std::uint8_t> recipient_mask(std::size_t agents, const std::vector<AgentId>& recipients);

}  // namespace netsub
