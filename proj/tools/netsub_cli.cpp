// netsub command line: synthetic scenarios, equilibrium solves, policy
// evaluation and trace analytics.

#include <CLI11.hpp>
#include <omp.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "netsub/calendar.hpp"
#include "netsub/scenario.hpp"

using namespace netsub;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 0;
    std::string eta_mode = "both";
};

ScenarioConfig load(const Globals& g) {
    ScenarioConfig cfg = g.config.empty() ? ScenarioConfig{} : load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (!g.out.empty()) cfg.output_dir = g.out;
    cfg.validate();
    return cfg;
}

fs::path out_dir(const Globals& g, const char* fallback = "out") {
    fs::path p = g.out.empty() ? fs::path(fallback) : fs::path(g.out);
    fs::create_directories(p);
    return p;
}

std::vector<EtaMode> modes(const Globals& g) {
    if (g.eta_mode == "lower") return {EtaMode::Lower};
    if (g.eta_mode == "upper") return {EtaMode::Upper};
    return {EtaMode::Lower, EtaMode::Upper};
}

template <class F>
void save(const fs::path& p, F&& f) {
    std::ostringstream s;
    f(s);
    write_file(p, s.str());
}

void write_ids(const fs::path& p, const char* header, const std::vector<AgentId>& ids) {
    save(p, [&](std::ostream& s) {
        s << header << '\n';
        for (AgentId a : ids) s << a << '\n';
    });
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

MonthWindow parse_window(const std::string& first, int months) {
    int y = 0, m = 0;
    if (std::sscanf(first.c_str(), "%d-%d", &y, &m) != 2 || m < 1 || m > 12)
        throw InvalidArgument("window start must be YYYY-MM");
    if (months < 1) throw InvalidArgument("window length must be >= 1");
    const std::int64_t k = month_key(y, m);
    return {k, k + months - 1};
}

std::vector<CoverageTower> read_coverage_towers(std::istream& in) {
    std::vector<CoverageTower> towers;
    std::string line;
    std::getline(in, line);
    const auto head = split_csv(line);
    if (head.size() < 3 || head[0] != "id") throw IoError("tower file needs header id,lat,lon[,antenna,month]");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        CoverageTower t;
        t.id = std::stoull(f.at(0));
        t.lat = std::stod(f.at(1));
        t.lon = std::stod(f.at(2));
        if (f.size() > 3 && !f[3].empty()) t.antenna_height = std::stod(f[3]);
        if (f.size() > 4 && !f[4].empty()) t.activation_month = std::stoi(f[4]);
        towers.push_back(t);
    }
    return towers;
}

json impact_json(const ImpactTable& t) {
    return {{"with_subsidy", group_outcomes_to_json(t.with_subsidy)},
            {"proximal", group_outcomes_to_json(t.proximal)},
            {"ripple", group_outcomes_to_json(t.ripple)},
            {"total", group_outcomes_to_json(t.total)},
            {"converged", t.converged},
            {"rounds", t.rounds},
            {"held_fixed", t.held_fixed}};
}

int cmd_generate(const Globals& g) {
    const ScenarioConfig cfg = load(g);
    const World w = generate_world(cfg, cfg.seed);
    const fs::path dir = out_dir(g, cfg.output_dir.c_str());
    write_file(dir / "environment.json", environment_to_json(w.env).dump() + "\n");
    write_ids(dir / "recipients.csv", "agent", w.recipients);
    write_ids(dir / "initial_adopters.csv", "agent", w.initial_adopters);
    std::cout << "agents " << w.env.agent_count() << " links " << w.env.graph().link_count() << '\n';
    return 0;
}

int cmd_solve(const Globals& g, const std::string& env_path, const std::string& init_path,
              const std::string& observed_path, int max_rounds, double margin) {
    Environment env = env_path.empty() ? generate_world(load(g), load(g).seed).env
                                       : environment_from_json(json::parse(read_file(env_path)));
    const fs::path dir = out_dir(g);
    SolveOptions opts;
    opts.max_rounds = max_rounds;
    if (observed_path.empty()) {
        AdoptionProfile init = env.initial_profile(kNever);
        if (!init_path.empty()) {
            auto in = open_in(init_path);
            init = read_profile_csv(in);
        }
        const SolveResult r = solve_equilibrium(init, env, opts);
        save(dir / "profile.csv", [&](std::ostream& s) { write_profile_csv(s, r.profile); });
        std::cout << "rounds " << r.rounds << " converged " << r.converged << '\n';
        return r.converged ? 0 : 2;
    }
    auto in = open_in(observed_path);
    const AdoptionProfile observed = read_profile_csv(in);
    const EtaBounds b = estimate_eta_bounds(observed, env);
    save(dir / "eta_bounds.csv", [&](std::ostream& s) { write_bounds_csv(s, b); });
    bool ok = true;
    for (EtaMode m : modes(g)) {
        const Environment e = bound_environment(env, b, m, observed, margin);
        const SolveResult r = solve_equilibrium(observed, e, opts);
        save(dir / (std::string("profile_") + to_string(m) + ".csv"),
             [&](std::ostream& s) { write_profile_csv(s, r.profile); });
        std::cout << to_string(m) << " rounds " << r.rounds << " converged " << r.converged << '\n';
        ok = ok && r.converged;
    }
    std::cout << "crossed " << b.crossed_count() << " infeasible " << b.infeasible_agents.size() << '\n';
    return ok ? 0 : 2;
}

int cmd_allocate(const Globals& g, const std::vector<std::string>& rules, std::size_t budget) {
    const ScenarioConfig cfg = load(g);
    const World w = generate_world(cfg, cfg.seed);
    const SolveResult obs = solve_equilibrium(w.env.initial_profile(kNever), w.env);
    const fs::path dir = out_dir(g);
    const std::size_t b = budget ? budget : (cfg.rule_budget ? cfg.rule_budget : w.recipients.size());
    std::vector<std::string> names = rules.empty() ? cfg.rules : rules;
    if (names.size() == 1 && names[0] == "standard") {
        names.clear();
        for (const auto& r : standard_rules(b, cfg.program.month)) names.push_back(r.name);
    }
    for (const std::string& name : names) {
        const TargetingRule rule = parse_rule(name, b, cfg.program.month);
        const Allocation a = allocate(rule, w.env, obs.profile, w.recipients, cfg.seed);
        write_ids(dir / ("allocation_" + name + ".csv"), "agent", a.recipients);
        std::cout << name << " allocated " << a.recipients.size() << " eligible " << a.eligible
                  << " shortfall " << a.shortfall << '\n';
    }
    return 0;
}

int cmd_impact(const Globals& g, const std::string& rule) {
    ScenarioConfig cfg = load(g);
    cfg.rules = {rule};
    cfg.map.rules.clear();
    cfg.cdr.enabled = false;
    const ScenarioResult r = run_scenario(cfg);
    const RuleResult& rr = r.rules.front();
    json doc = json::object();
    for (EtaMode m : modes(g)) {
        json reps = json::array();
        for (const ImpactTable& t : m == EtaMode::Lower ? rr.lower : rr.upper) reps.push_back(impact_json(t));
        doc[to_string(m)] = reps;
    }
    doc["rule"] = rr.rule.name;
    doc["accounting_ok"] = rr.accounting_ok;
    write_file(fs::path(cfg.output_dir) / "impact.json", doc.dump(2) + "\n");
    std::cout << report_to_json(rr.report)["total"]["all"]["net_welfare"].dump() << '\n';
    return rr.accounting_ok ? 0 : 3;
}

int cmd_report(const Globals& g) {
    ScenarioConfig cfg = load(g);
    const ScenarioResult r = run_scenario(cfg);
    write_report_csv(std::cout, r.implemented);
    return 0;
}

int cmd_trace_stats(const Globals& g, const std::string& records_path, const std::string& towers_path,
                    const std::string& catalog_path, ModelId model, const std::string& window_start,
                    int window_months, int utc_offset) {
    auto rin = open_in(records_path);
    const auto records = read_records_csv(rin);
    std::unordered_map<TowerId, Tower> towers;
    if (!towers_path.empty()) {
        auto tin = open_in(towers_path);
        towers = read_towers_csv(tin);
    }
    const fs::path dir = out_dir(g);
    CalendarConfig cal;
    cal.utc_offset = utc_offset;
    json doc;
    const auto any = [](AccountId) { return true; };
    doc["all"] = edge_statistics_to_json(edge_statistics(records, any, any, towers, cal));
    if (!catalog_path.empty()) {
        if (window_start.empty()) throw InvalidArgument("--window-start is required with --catalog");
        auto cin = open_in(catalog_path);
        const auto catalog = read_catalog_csv(cin);
        const MonthWindow w = parse_window(window_start, window_months);
        const auto recipients = identify_subsidy_recipients(records, catalog, model, w, utc_offset);
        const auto subs = subsidized_handsets(records, catalog, model, w, utc_offset);
        const auto mm = detect_middlemen(build_handset_lineages(records, &catalog, model), subs);
        const auto is_r = [&](AccountId a) { return recipients.count(a) > 0; };
        const auto not_r = [&](AccountId a) { return recipients.count(a) == 0; };
        doc["recipient_to_recipient"] = edge_statistics_to_json(edge_statistics(records, is_r, is_r, towers, cal));
        doc["recipient_to_other"] = edge_statistics_to_json(edge_statistics(records, is_r, not_r, towers, cal));
        doc["other_to_recipient"] = edge_statistics_to_json(edge_statistics(records, not_r, is_r, towers, cal));
        doc["other_to_other"] = edge_statistics_to_json(edge_statistics(records, not_r, not_r, towers, cal));
        const auto profiles = account_usage_profile(records, towers, recipients, w.first, utc_offset);
        doc["profile_recipients"] =
            profile_summary_to_json(summarize_profiles(profiles, [](const AccountProfile& p) { return p.recipient; }));
        doc["profile_others"] =
            profile_summary_to_json(summarize_profiles(profiles, [](const AccountProfile& p) { return !p.recipient; }));
        doc["recipients"] = recipients;
        doc["middlemen"] = mm.middlemen;
        doc["transferred_handsets"] = mm.transferred;
    }
    write_file(dir / "trace_stats.json", doc.dump(2) + "\n");
    std::cout << doc["all"].dump() << '\n';
    return 0;
}

int cmd_coverage(const Globals& g, const std::string& dem_path, const std::string& towers_path, int month,
                 const std::string& locations_path, double radius, double receiver) {
    auto din = open_in(dem_path);
    const ElevationGrid grid = read_elevation_ascii(din);
    auto tin = open_in(towers_path);
    const auto towers = read_coverage_towers(tin);
    const CoverageRaster map = tower_coverage_map(grid, towers, month, receiver);
    const fs::path dir = out_dir(g);
    save(dir / "coverage.asc", [&](std::ostream& s) { write_coverage_ascii(s, map); });
    std::cout << "covered " << map.covered_count() << " of " << map.covered.size() << '\n';
    if (locations_path.empty()) return 0;
    // id,lat,lon[,weight]; rows sharing an id form one agent.
    auto lin = open_in(locations_path);
    std::map<std::string, std::vector<WeightedLocation>> agents;
    std::string line;
    std::getline(lin, line);
    while (std::getline(lin, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        WeightedLocation w;
        grid.to_local(std::stod(f.at(1)), std::stod(f.at(2)), w.x, w.y);
        if (f.size() > 3 && !f[3].empty()) w.weight = std::stod(f[3]);
        agents[f[0]].push_back(w);
    }
    save(dir / "phi.csv", [&](std::ostream& s) {
        s << "id,phi,off_grid\n";
        for (const auto& [id, locs] : agents) {
            const AgentCoverage c = agent_coverage(locs, map, radius);
            s << id << ',' << c.phi << ',' << c.off_grid << '\n';
        }
    });
    return 0;
}

int cmd_simulate_cdr(const Globals& g) {
    const ScenarioConfig cfg = load(g);
    const World w = generate_world(cfg, cfg.seed);
    const SolveResult obs = solve_equilibrium(w.env.initial_profile(kNever), w.env);
    const CdrOutput cdr = simulate_cdr(obs.profile, w.env, cfg.seed + 17, cdr_options(cfg, w.recipients));
    const fs::path dir = out_dir(g, cfg.output_dir.c_str());
    save(dir / "records.csv", [&](std::ostream& s) { write_records_csv(s, cdr.records); });
    save(dir / "towers.csv", [&](std::ostream& s) { write_towers_csv(s, cdr.towers); });
    save(dir / "handsets.csv", [&](std::ostream& s) { write_catalog_csv(s, cdr.catalog); });
    const json truth = {{"recipients", cdr.truth.recipients},
                        {"middlemen", cdr.truth.middlemen},
                        {"transferred_handsets", cdr.truth.transferred},
                        {"program_window", {month_label(cdr.program_window.first), month_label(cdr.program_window.last)}}};
    write_file(dir / "cdr_truth.json", truth.dump(2) + "\n");
    std::cout << "records " << cdr.records.size() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Network subsidy adoption model"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config, "scenario config JSON");
    auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--threads", g.threads, "worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    app.add_option("--eta-mode", g.eta_mode, "bound mode")->check(CLI::IsMember({"lower", "upper", "both"}));

    auto* gen = app.add_subcommand("generate", "write a synthetic environment");

    std::string env_path, init_path, observed_path;
    int max_rounds = 500;
    double margin = 1e-6;
    auto* solve = app.add_subcommand("solve", "solve for an equilibrium profile");
    solve->add_option("--env", env_path, "environment JSON (default: generate from config)");
    solve->add_option("--init", init_path, "starting profile CSV");
    solve->add_option("--observed", observed_path, "observed profile: estimate bounds and solve per mode");
    solve->add_option("--max-rounds", max_rounds);
    solve->add_option("--margin", margin);

    std::vector<std::string> rules;
    std::size_t budget = 0;
    auto* alloc = app.add_subcommand("allocate", "allocate subsidies under targeting rules");
    alloc->add_option("--rule", rules, "rule names, or 'standard'");
    alloc->add_option("--budget", budget, "number of subsidies (default: implemented count)");

    std::string rule = "implemented";
    auto* impact = app.add_subcommand("impact", "decompose the impact of one rule");
    impact->add_option("--rule", rule);

    auto* report = app.add_subcommand("report", "run the configured rules and print the implemented report");
    auto* run = app.add_subcommand("run", "full pipeline with outputs and manifest");

    std::string records_path, towers_path, catalog_path, window_start;
    ModelId model = 113;
    int window_months = 4, utc_offset = 0;
    auto* trace = app.add_subcommand("trace-stats", "edge and account statistics from records");
    trace->add_option("--records", records_path)->required();
    trace->add_option("--towers", towers_path);
    trace->add_option("--catalog", catalog_path, "handset,model CSV");
    trace->add_option("--model", model, "subsidized model id");
    trace->add_option("--window-start", window_start, "YYYY-MM");
    trace->add_option("--window-months", window_months);
    trace->add_option("--utc-offset", utc_offset, "seconds");

    std::string dem_path, locations_path;
    int month = 1;
    double radius = 5000.0, receiver = 1.5;
    auto* cov = app.add_subcommand("coverage", "coverage raster and agent coverage shares");
    cov->add_option("--dem", dem_path, "ESRI ASCII elevation grid")->required();
    cov->add_option("--towers", towers_path, "id,lat,lon[,antenna,month] CSV")->required();
    cov->add_option("--month", month);
    cov->add_option("--locations", locations_path, "id,lat,lon[,weight] CSV");
    cov->add_option("--radius", radius);
    cov->add_option("--receiver", receiver);

    auto* cdr = app.add_subcommand("simulate-cdr", "synthetic transaction records for a scenario");

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) g.seed = seed;
    if (g.threads > 0) omp_set_num_threads(g.threads);

    try {
        if (*gen) return cmd_generate(g);
        if (*solve) return cmd_solve(g, env_path, init_path, observed_path, max_rounds, margin);
        if (*alloc) return cmd_allocate(g, rules, budget);
        if (*impact) return cmd_impact(g, rule);
        if (*report) return cmd_report(g);
        if (*run) {
            if (g.config.empty()) throw InvalidArgument("run requires --config");
            ScenarioConfig cfg = load(g);
            run_scenario(cfg);
            std::cout << "outputs in " << cfg.output_dir << '\n';
            return 0;
        }
        if (*trace)
            return cmd_trace_stats(g, records_path, towers_path, catalog_path, model, window_start, window_months,
                                   utc_offset);
        if (*cov) return cmd_coverage(g, dem_path, towers_path, month, locations_path, radius, receiver);
        if (*cdr) return cmd_simulate_cdr(g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
