#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "netsub/coverage.hpp"
#include "netsub/io.hpp"
#include "netsub/policy.hpp"
#include "netsub/trace.hpp"

namespace netsub {

struct LayoutConfig {
    double width_km = 100.0;
    double height_km = 100.0;
    int cities = 3;
    double city_radius_km = 6.0;
    double urban_share = 0.5;  // share of agents placed inside cities
};

struct GraphConfig {
    double mean_degree = 8.0;        // directed links per agent
    double distance_scale_km = 8.0;  // mean contact distance for local links
    double long_range = 0.1;         // share of uniformly random targets
    double triadic_closure = 0.3;    // share of friend-of-friend targets
    double reciprocity = 0.6;        // probability a link is returned
    double recipient_homophily = 0.1;  // share of a recipient's links drawn among recipients
};

struct ShockConfig {
    double location_mean = 6.0;  // mean of ln(eps) across links
    double location_sd = 0.8;
    double scale = 1.0;          // common sd of ln(eps)
};

struct UtilityConfig {
    double gamma = 2.0;
    double alpha = 20.0;
    double beta_cost = 100.0;
    double beta_coverage = 0.0;
    double annual_discount = 0.9;
    bool continuation = false;
};

struct PriceConfig {
    double call_start = 0.006;  // dollars/second
    double call_end = 0.001;
    double handset_start = 80.0;
    double handset_end = 15.0;
};

struct CoverageConfig {
    bool enabled = false;
    double cell_m = 2000.0;
    int hills = 12;
    double relief_m = 250.0;
    double hill_width_km = 6.0;
    int towers = 25;
    double antenna_m = 30.0;
    double receiver_m = 1.5;
    double radius_m = 5000.0;
};

struct EtaConfig {
    double mean = -6.0;  // dollars/month
    double sd = 6.0;
};

struct ProgramConfig {
    Month month = 37;
    std::size_t recipients = 60;
    double discount = 18.94;
    double full_price = 28.0;
    double repayment = 1.81;
    int payments = 5;
    double rural_share = 0.75;  // share of recipients drawn from the rural pool
    int window = 4;             // months from `month` counted as program-period adoption
};

struct BoundsConfig {
    double cap = 1000.0;
    int recipient_extension_months = 0;
    double margin = 1e-6;
};

struct SolverConfig {
    int max_rounds = 500;
    SweepMode mode = SweepMode::GaussSeidel;
};

struct MapConfig {
    double cell_km = 5.0;
    std::vector<std::string> rules{"implemented", "voucher-early-urban", "voucher-early-rural"};
};

struct CdrConfig {
    bool enabled = false;
    int start_year = 2005;
    int start_month = 1;
    int utc_offset = 0;
    std::size_t middlemen = 0;
    std::size_t handsets_per_middleman = 2;
    std::size_t decoys = 0;
    double tower_spacing_km = 5.0;
    double origin_lat = -2.8;
    double origin_lon = 28.9;
    ModelId standard_model = 1;
    ModelId subsidized_model = 113;
    int max_calls = 5;
};

struct ScenarioConfig {
    int schema_version = 1;
    std::uint64_t seed = 1;
    std::size_t population = 1000;
    Month horizon = 53;
    double initial_share = 0.05;  // adopters fixed at month 1
    LayoutConfig layout;
    GraphConfig graph;
    ShockConfig shocks;
    UtilityConfig utility;
    PriceConfig prices;
    CoverageConfig coverage;
    EtaConfig eta;
    ProgramConfig program;
    /// Rule names (see default_rule_name) or "standard" for all 17.
    std::vector<std::string> rules{"implemented"};
    /// Budget for alternative rules; 0 = the implemented recipient count.
    std::size_t rule_budget = 0;
    int replications = 10;
    TaxConfig taxes;
    BoundsConfig bounds;
    SolverConfig solver;
    MapConfig map;
    CdrConfig cdr;
    std::string output_dir = "out";

    void validate() const;
};

ScenarioConfig config_from_json(const json& j);
json config_to_json(const ScenarioConfig& c);
ScenarioConfig load_config(const std::filesystem::path& path);

/// `env` is the generating truth: S_0 fixed at month 1 and recipients fixed at
/// their distribution month inside the program window.
struct World {
    Environment env;
    std::vector<AgentId> recipients;
    std::vector<AgentId> initial_adopters;
    std::vector<CoverageTower> towers;
};

/// The truth with recipients free to re-optimize; only S_0 stays fixed.
Environment analysis_environment(const World& w);

World generate_world(const ScenarioConfig& cfg, std::uint64_t seed);
Environment generate_network(const ScenarioConfig& cfg, std::uint64_t seed);

struct CdrOptions {
    int start_year = 2005;
    int start_month = 1;
    int utc_offset = 0;
    ModelId standard_model = 1;
    ModelId subsidized_model = 113;
    std::vector<AgentId> recipients;  // program recipients; those adopting in the window get the model
    Month program_month = 1;
    int window = 4;
    std::size_t middlemen = 0;
    std::size_t handsets_per_middleman = 2;
    std::size_t decoys = 0;
    double tower_spacing = 5000.0;  // meters
    double origin_lat = -2.8;
    double origin_lon = 28.9;
    int max_calls = 5;
};

struct CdrTruth {
    std::set<AccountId> recipients;
    std::set<AccountId> middlemen;
    std::set<HandsetId> transferred;
    std::map<AccountId, std::int64_t> adoption_month;  // month keys of model agents
    std::size_t model_edges = 0;  // directed agent pairs with at least one call
    std::size_t model_calls = 0;
};

struct CdrOutput {
    std::vector<TransactionRecord> records;  // canonical order
    std::unordered_map<HandsetId, ModelId> catalog;
    std::vector<Tower> towers;
    AccountId service_account = 0;  // callee of activation records
    std::vector<AccountId> distributors;
    CdrTruth truth;
    MonthWindow program_window;
};

/// Account and handset ids: agent a is account a using handset a + 1.
CdrOutput simulate_cdr(const AdoptionProfile& profile, const Environment& env, std::uint64_t seed,
                       const CdrOptions& opts = {});

CdrOptions cdr_options(const ScenarioConfig& cfg, const std::vector<AgentId>& recipients);

struct RuleResult {
    TargetingRule rule;
    std::vector<Allocation> allocations;  // one per replication
    std::vector<ImpactTable> lower;
    std::vector<ImpactTable> upper;
    WelfareReport report;    // mean over replications
    WelfareReport sd;        // standard deviation over replications (zero for one)
    bool accounting_ok = true;
};

struct ScenarioResult {
    World world;
    AdoptionProfile observed;
    EtaBounds bounds;
    AdoptionProfile baseline_lower;
    AdoptionProfile baseline_upper;
    WelfareReport implemented;
    std::vector<RuleResult> rules;
    json summary;
    std::vector<std::string> files;
};

/// True iff every cell satisfies net = firm + consumer + government and the
/// recipient and nonrecipient cells add up to the all-group cell.
bool accounting_holds(const WelfareReport& r, double rel_tol = 1e-9);
bool accounting_holds(const ImpactTable& t, double rel_tol = 1e-9);

/// Runs the full pipeline and writes every output under cfg.output_dir.
/// On failure writes error.json and a manifest marked partial, then rethrows.
ScenarioResult run_scenario(const ScenarioConfig& cfg);
int run_scenario_file(const std::filesystem::path& config_path,
                      const std::optional<std::filesystem::path>& out_override = {});

}  // namespace netsub
