#include "netsub/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "netsub/calendar.hpp"

namespace netsub {

// ---------------------------------------------------------------- config

void ScenarioConfig::validate() const {
    if (schema_version != 1) throw InvalidArgument("unsupported config schema_version");
    if (population < 2) throw InvalidArgument("population must be >= 2");
    if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
    if (initial_share < 0.0 || initial_share > 1.0) throw InvalidArgument("initial_share must lie in [0,1]");
    if (layout.width_km <= 0 || layout.height_km <= 0) throw InvalidArgument("layout extent must be > 0");
    if (layout.cities < 0) throw InvalidArgument("layout.cities must be >= 0");
    if (layout.urban_share < 0 || layout.urban_share > 1) throw InvalidArgument("urban_share must lie in [0,1]");
    if (graph.mean_degree < 0) throw InvalidArgument("graph.mean_degree must be >= 0");
    if (graph.mean_degree > double(population - 1))
        throw InvalidArgument("graph.mean_degree exceeds population - 1");
    for (double p : {graph.long_range, graph.triadic_closure, graph.reciprocity, graph.recipient_homophily})
        if (p < 0 || p > 1) throw InvalidArgument("graph probabilities must lie in [0,1]");
    if (!(graph.distance_scale_km > 0)) throw InvalidArgument("graph.distance_scale_km must be > 0");
    if (!(shocks.scale > 0) || shocks.location_sd < 0) throw InvalidArgument("invalid shock config");
    if (!(utility.annual_discount > 0 && utility.annual_discount <= 1))
        throw InvalidArgument("annual_discount must lie in (0,1]");
    if (program.month < 1 || program.month > horizon)
        throw InvalidArgument("program.month outside the horizon");
    if (program.window < 1) throw InvalidArgument("program.window must be >= 1");
    if (program.recipients > population) throw InvalidArgument("more recipients than agents");
    if (double(program.recipients) + std::ceil(initial_share * double(population)) > double(population))
        throw InvalidArgument("recipients and initial adopters exceed the population");
    if (replications < 1) throw InvalidArgument("replications must be >= 1");
    if (coverage.enabled && (!(coverage.cell_m > 0) || !(coverage.radius_m > 0) || coverage.towers < 0))
        throw InvalidArgument("invalid coverage config");
    if (!(map.cell_km > 0)) throw InvalidArgument("map.cell_km must be > 0");
    taxes.validate();
    UtilityParams p{utility.gamma, utility.alpha, utility.beta_cost, utility.beta_coverage,
                    monthly_discount(utility.annual_discount)};
    p.validate();
    for (const std::string& r : rules)
        if (r != "standard") parse_rule(r, 1, program.month);
}

namespace {

template <class T>
void take(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

const char* mode_name(SweepMode m) { return m == SweepMode::Jacobi ? "jacobi" : "gauss-seidel"; }

}  // namespace

ScenarioConfig config_from_json(const json& j) {
    static const std::set<std::string> known{
        "schema_version", "seed",   "population", "horizon", "initial_share", "layout",
        "graph",          "shocks", "utility",    "prices",  "coverage",      "eta",
        "program",        "rules",  "rule_budget", "replications", "taxes",   "bounds",
        "solver",         "map",    "cdr",        "output_dir"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw InvalidArgument("unknown config key " + it.key());
    ScenarioConfig c;
    take(j, "schema_version", c.schema_version);
    take(j, "seed", c.seed);
    take(j, "population", c.population);
    take(j, "horizon", c.horizon);
    take(j, "initial_share", c.initial_share);
    if (j.contains("layout")) {
        const json& s = j["layout"];
        take(s, "width_km", c.layout.width_km);
        take(s, "height_km", c.layout.height_km);
        take(s, "cities", c.layout.cities);
        take(s, "city_radius_km", c.layout.city_radius_km);
        take(s, "urban_share", c.layout.urban_share);
    }
    if (j.contains("graph")) {
        const json& s = j["graph"];
        take(s, "mean_degree", c.graph.mean_degree);
        take(s, "distance_scale_km", c.graph.distance_scale_km);
        take(s, "long_range", c.graph.long_range);
        take(s, "triadic_closure", c.graph.triadic_closure);
        take(s, "reciprocity", c.graph.reciprocity);
        take(s, "recipient_homophily", c.graph.recipient_homophily);
    }
    if (j.contains("shocks")) {
        const json& s = j["shocks"];
        take(s, "location_mean", c.shocks.location_mean);
        take(s, "location_sd", c.shocks.location_sd);
        take(s, "scale", c.shocks.scale);
    }
    if (j.contains("utility")) {
        const json& s = j["utility"];
        take(s, "gamma", c.utility.gamma);
        take(s, "alpha", c.utility.alpha);
        take(s, "beta_cost", c.utility.beta_cost);
        take(s, "beta_coverage", c.utility.beta_coverage);
        take(s, "annual_discount", c.utility.annual_discount);
        take(s, "continuation", c.utility.continuation);
    }
    if (j.contains("prices")) {
        const json& s = j["prices"];
        take(s, "call_start", c.prices.call_start);
        take(s, "call_end", c.prices.call_end);
        take(s, "handset_start", c.prices.handset_start);
        take(s, "handset_end", c.prices.handset_end);
    }
    if (j.contains("coverage")) {
        const json& s = j["coverage"];
        take(s, "enabled", c.coverage.enabled);
        take(s, "cell_m", c.coverage.cell_m);
        take(s, "hills", c.coverage.hills);
        take(s, "relief_m", c.coverage.relief_m);
        take(s, "hill_width_km", c.coverage.hill_width_km);
        take(s, "towers", c.coverage.towers);
        take(s, "antenna_m", c.coverage.antenna_m);
        take(s, "receiver_m", c.coverage.receiver_m);
        take(s, "radius_m", c.coverage.radius_m);
    }
    if (j.contains("eta")) {
        take(j["eta"], "mean", c.eta.mean);
        take(j["eta"], "sd", c.eta.sd);
    }
    if (j.contains("program")) {
        const json& s = j["program"];
        take(s, "month", c.program.month);
        take(s, "recipients", c.program.recipients);
        take(s, "discount", c.program.discount);
        take(s, "full_price", c.program.full_price);
        take(s, "repayment", c.program.repayment);
        take(s, "payments", c.program.payments);
        take(s, "rural_share", c.program.rural_share);
        take(s, "window", c.program.window);
        if (s.value("derive_discount", false))
            c.program.discount =
                std::round((c.program.full_price - c.program.payments * c.program.repayment) * 100.0) /
                100.0;
    }
    take(j, "rules", c.rules);
    take(j, "rule_budget", c.rule_budget);
    take(j, "replications", c.replications);
    if (j.contains("taxes")) {
        take(j["taxes"], "call_rate", c.taxes.call_rate);
        take(j["taxes"], "handset_rate", c.taxes.handset_rate);
    }
    if (j.contains("bounds")) {
        take(j["bounds"], "cap", c.bounds.cap);
        take(j["bounds"], "recipient_extension_months", c.bounds.recipient_extension_months);
        take(j["bounds"], "margin", c.bounds.margin);
    }
    if (j.contains("solver")) {
        take(j["solver"], "max_rounds", c.solver.max_rounds);
        const std::string m = j["solver"].value("mode", std::string(mode_name(c.solver.mode)));
        if (m == "jacobi") c.solver.mode = SweepMode::Jacobi;
        else if (m == "gauss-seidel") c.solver.mode = SweepMode::GaussSeidel;
        else throw InvalidArgument("unknown solver mode " + m);
    }
    if (j.contains("map")) {
        take(j["map"], "cell_km", c.map.cell_km);
        take(j["map"], "rules", c.map.rules);
    }
    if (j.contains("cdr")) {
        const json& s = j["cdr"];
        take(s, "enabled", c.cdr.enabled);
        take(s, "start_year", c.cdr.start_year);
        take(s, "start_month", c.cdr.start_month);
        take(s, "utc_offset", c.cdr.utc_offset);
        take(s, "middlemen", c.cdr.middlemen);
        take(s, "handsets_per_middleman", c.cdr.handsets_per_middleman);
        take(s, "decoys", c.cdr.decoys);
        take(s, "tower_spacing_km", c.cdr.tower_spacing_km);
        take(s, "origin_lat", c.cdr.origin_lat);
        take(s, "origin_lon", c.cdr.origin_lon);
        take(s, "standard_model", c.cdr.standard_model);
        take(s, "subsidized_model", c.cdr.subsidized_model);
        take(s, "max_calls", c.cdr.max_calls);
    }
    take(j, "output_dir", c.output_dir);
    c.validate();
    return c;
}

json config_to_json(const ScenarioConfig& c) {
    return {
        {"schema_version", c.schema_version},
        {"seed", c.seed},
        {"population", c.population},
        {"horizon", c.horizon},
        {"initial_share", c.initial_share},
        {"layout",
         {{"width_km", c.layout.width_km},
          {"height_km", c.layout.height_km},
          {"cities", c.layout.cities},
          {"city_radius_km", c.layout.city_radius_km},
          {"urban_share", c.layout.urban_share}}},
        {"graph",
         {{"mean_degree", c.graph.mean_degree},
          {"distance_scale_km", c.graph.distance_scale_km},
          {"long_range", c.graph.long_range},
          {"triadic_closure", c.graph.triadic_closure},
          {"reciprocity", c.graph.reciprocity},
          {"recipient_homophily", c.graph.recipient_homophily}}},
        {"shocks",
         {{"location_mean", c.shocks.location_mean},
          {"location_sd", c.shocks.location_sd},
          {"scale", c.shocks.scale}}},
        {"utility",
         {{"gamma", c.utility.gamma},
          {"alpha", c.utility.alpha},
          {"beta_cost", c.utility.beta_cost},
          {"beta_coverage", c.utility.beta_coverage},
          {"annual_discount", c.utility.annual_discount},
          {"continuation", c.utility.continuation}}},
        {"prices",
         {{"call_start", c.prices.call_start},
          {"call_end", c.prices.call_end},
          {"handset_start", c.prices.handset_start},
          {"handset_end", c.prices.handset_end}}},
        {"coverage",
         {{"enabled", c.coverage.enabled},
          {"cell_m", c.coverage.cell_m},
          {"hills", c.coverage.hills},
          {"relief_m", c.coverage.relief_m},
          {"hill_width_km", c.coverage.hill_width_km},
          {"towers", c.coverage.towers},
          {"antenna_m", c.coverage.antenna_m},
          {"receiver_m", c.coverage.receiver_m},
          {"radius_m", c.coverage.radius_m}}},
        {"eta", {{"mean", c.eta.mean}, {"sd", c.eta.sd}}},
        {"program",
         {{"month", c.program.month},
          {"recipients", c.program.recipients},
          {"discount", c.program.discount},
          {"full_price", c.program.full_price},
          {"repayment", c.program.repayment},
          {"payments", c.program.payments},
          {"rural_share", c.program.rural_share},
          {"window", c.program.window}}},
        {"rules", c.rules},
        {"rule_budget", c.rule_budget},
        {"replications", c.replications},
        {"taxes", {{"call_rate", c.taxes.call_rate}, {"handset_rate", c.taxes.handset_rate}}},
        {"bounds",
         {{"cap", c.bounds.cap},
          {"recipient_extension_months", c.bounds.recipient_extension_months},
          {"margin", c.bounds.margin}}},
        {"solver", {{"max_rounds", c.solver.max_rounds}, {"mode", mode_name(c.solver.mode)}}},
        {"map", {{"cell_km", c.map.cell_km}, {"rules", c.map.rules}}},
        {"cdr",
         {{"enabled", c.cdr.enabled},
          {"start_year", c.cdr.start_year},
          {"start_month", c.cdr.start_month},
          {"utc_offset", c.cdr.utc_offset},
          {"middlemen", c.cdr.middlemen},
          {"handsets_per_middleman", c.cdr.handsets_per_middleman},
          {"decoys", c.cdr.decoys},
          {"tower_spacing_km", c.cdr.tower_spacing_km},
          {"origin_lat", c.cdr.origin_lat},
          {"origin_lon", c.cdr.origin_lon},
          {"standard_model", c.cdr.standard_model},
          {"subsidized_model", c.cdr.subsidized_model},
          {"max_calls", c.cdr.max_calls}}},
        {"output_dir", c.output_dir},
    };
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------- generation

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
    std::seed_seq ss{std::uint32_t(seed), std::uint32_t(seed >> 32), tag};
    return std::mt19937_64(ss);
}

double uniform(std::mt19937_64& rng, double a = 0.0, double b = 1.0) {
    return std::uniform_real_distribution<double>(a, b)(rng);
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<double> linear_series(double a, double b, Month T) {
    std::vector<double> v(static_cast<std::size_t>(T));
    for (Month t = 1; t <= T; ++t) v[std::size_t(t - 1)] = T == 1 ? a : a + (b - a) * double(t - 1) / double(T - 1);
    return v;
}

// Buckets of agents on a square grid for distance-decayed target sampling.
struct SpatialIndex {
    double cell;
    int nx, ny;
    std::vector<std::vector<AgentId>> buckets;

    SpatialIndex(const std::vector<AgentSite>& sites, double w, double h, double c)
        : cell(c), nx(std::max(1, int(std::ceil(w / c)))), ny(std::max(1, int(std::ceil(h / c)))),
          buckets(std::size_t(nx) * ny) {
        for (AgentId a = 0; a < sites.size(); ++a) buckets[index(sites[a].x, sites[a].y)].push_back(a);
    }
    std::size_t index(double x, double y) const {
        const int cx = std::clamp(int(x / cell), 0, nx - 1), cy = std::clamp(int(y / cell), 0, ny - 1);
        return std::size_t(cy) * nx + cx;
    }
};

std::vector<Link> generate_links(const ScenarioConfig& cfg, const std::vector<AgentSite>& sites,
                                 const std::vector<std::uint8_t>& is_recipient,
                                 const std::vector<AgentId>& recipients, std::uint64_t seed) {
    const std::size_t n = sites.size();
    const GraphConfig& g = cfg.graph;
    std::vector<std::vector<AgentId>> out(n);
    if (g.mean_degree == 0.0) return {};
    auto rng = stream(seed, 3);
    const double w = cfg.layout.width_km * 1000, h = cfg.layout.height_km * 1000;
    const double scale = g.distance_scale_km * 1000;
    const SpatialIndex index(sites, w, h, scale);
    std::poisson_distribution<int> degree(g.mean_degree / (1.0 + g.reciprocity));
    std::exponential_distribution<double> dist(1.0 / scale);

    auto has = [&](AgentId i, AgentId j) {
        return std::find(out[i].begin(), out[i].end(), j) != out[i].end();
    };
    auto draw_target = [&](AgentId i) -> AgentId {
        const double u = uniform(rng);
        if (is_recipient[i] && recipients.size() > 1 && uniform(rng) < g.recipient_homophily)
            return recipients[pick(rng, recipients.size())];
        if (u < g.triadic_closure && !out[i].empty()) {
            const AgentId k = out[i][pick(rng, out[i].size())];
            if (!out[k].empty()) return out[k][pick(rng, out[k].size())];
        }
        if (u < g.triadic_closure + g.long_range) return AgentId(pick(rng, n));
        for (int attempt = 0; attempt < 20; ++attempt) {
            const double r = dist(rng), th = uniform(rng, 0.0, 2.0 * 3.14159265358979323846);
            const double x = sites[i].x + r * std::cos(th), y = sites[i].y + r * std::sin(th);
            if (x < 0 || y < 0 || x > w || y > h) continue;
            const auto& b = index.buckets[index.index(x, y)];
            if (!b.empty()) return b[pick(rng, b.size())];
        }
        return AgentId(pick(rng, n));
    };

    for (AgentId i = 0; i < n; ++i) {
        const int k = std::min<int>(degree(rng), int(n) - 1);
        for (int e = 0; e < k; ++e)
            for (int attempt = 0; attempt < 20; ++attempt) {
                const AgentId j = draw_target(i);
                if (j == i || has(i, j)) continue;
                out[i].push_back(j);
                break;
            }
    }
    for (AgentId i = 0; i < n; ++i)
        for (std::size_t e = 0; e < out[i].size(); ++e) {
            const AgentId j = out[i][e];
            if (!has(j, i) && uniform(rng) < g.reciprocity) out[j].push_back(i);
        }

    std::normal_distribution<double> loc(cfg.shocks.location_mean, cfg.shocks.location_sd);
    std::vector<Link> links;
    for (AgentId i = 0; i < n; ++i) {
        std::sort(out[i].begin(), out[i].end());
        for (AgentId j : out[i])
            links.push_back({i, j, ShockDistribution::lognormal(loc(rng), cfg.shocks.scale)});
    }
    return links;
}

struct Terrain {
    ElevationGrid grid;
    std::vector<CoverageTower> towers;
};

Terrain generate_terrain(const ScenarioConfig& cfg, const std::vector<std::pair<double, double>>& cities,
                         std::uint64_t seed) {
    auto rng = stream(seed, 4);
    const CoverageConfig& c = cfg.coverage;
    const double w = cfg.layout.width_km * 1000, h = cfg.layout.height_km * 1000;
    Terrain t;
    t.grid = ElevationGrid(std::max(1, int(std::ceil(h / c.cell_m))), std::max(1, int(std::ceil(w / c.cell_m))),
                           c.cell_m, 0.0);
    t.grid.origin_lat = cfg.cdr.origin_lat;
    t.grid.origin_lon = cfg.cdr.origin_lon;
    const double width = c.hill_width_km * 1000;
    for (int k = 0; k < c.hills; ++k) {
        const double hx = uniform(rng, 0, w), hy = uniform(rng, 0, h), amp = uniform(rng, 0.3, 1.0) * c.relief_m;
        for (int r = 0; r < t.grid.rows; ++r)
            for (int col = 0; col < t.grid.cols; ++col) {
                const double dx = t.grid.cell_center_x(col) - hx, dy = t.grid.cell_center_y(r) - hy;
                t.grid.at(r, col) += amp * std::exp(-(dx * dx + dy * dy) / (2 * width * width));
            }
    }
    auto add_tower = [&](double x, double y, int month) {
        CoverageTower tw;
        tw.id = t.towers.size() + 1;
        t.grid.to_geo(std::clamp(x, 0.0, t.grid.width()), std::clamp(y, 0.0, t.grid.extent_north()),
                      tw.lat, tw.lon);
        tw.antenna_height = c.antenna_m;
        tw.activation_month = month;
        t.towers.push_back(tw);
    };
    for (const auto& [x, y] : cities) add_tower(x, y, 1);
    for (int k = int(cities.size()); k < c.towers; ++k)
        add_tower(uniform(rng, 0, w), uniform(rng, 0, h),
                  int(std::uniform_int_distribution<int>(1, cfg.horizon)(rng)));
    return t;
}

}  // namespace

World generate_world(const ScenarioConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t n = cfg.population;
    const LayoutConfig& L = cfg.layout;
    const double w = L.width_km * 1000, h = L.height_km * 1000, rad = L.city_radius_km * 1000;

    // Layout.
    auto rng = stream(seed, 1);
    std::vector<std::pair<double, double>> cities;
    for (int c = 0; c < L.cities; ++c)
        cities.emplace_back(uniform(rng, 0.15 * w, 0.85 * w), uniform(rng, 0.15 * h, 0.85 * h));
    std::vector<AgentSite> sites(n);
    std::normal_distribution<double> spread(0.0, rad / 2.0);
    for (AgentSite& s : sites) {
        if (!cities.empty() && uniform(rng) < L.urban_share) {
            const auto& c = cities[pick(rng, cities.size())];
            s.x = std::clamp(c.first + spread(rng), 0.0, w);
            s.y = std::clamp(c.second + spread(rng), 0.0, h);
        } else {
            s.x = uniform(rng, 0, w);
            s.y = uniform(rng, 0, h);
        }
        s.rural = true;
        for (const auto& c : cities)
            if (std::hypot(s.x - c.first, s.y - c.second) <= rad) s.rural = false;
    }

    // Planted recipients (rural-leaning) and initial adopters.
    auto prng = stream(seed, 2);
    std::vector<AgentId> rural, urban;
    for (AgentId a = 0; a < n; ++a) (sites[a].rural ? rural : urban).push_back(a);
    std::shuffle(rural.begin(), rural.end(), prng);
    std::shuffle(urban.begin(), urban.end(), prng);
    const std::size_t R = cfg.program.recipients;
    std::size_t from_rural = std::min(rural.size(), std::size_t(std::llround(cfg.program.rural_share * double(R))));
    if (R - from_rural > urban.size()) from_rural = R - urban.size();
    std::vector<AgentId> recipients(rural.begin(), rural.begin() + long(from_rural));
    recipients.insert(recipients.end(), urban.begin(), urban.begin() + long(R - from_rural));
    std::sort(recipients.begin(), recipients.end());
    std::vector<std::uint8_t> is_recipient(n, 0);
    for (AgentId a : recipients) is_recipient[a] = 1;

    std::vector<AgentId> others;
    for (AgentId a = 0; a < n; ++a)
        if (!is_recipient[a]) others.push_back(a);
    std::shuffle(others.begin(), others.end(), prng);
    const std::size_t s0 = std::size_t(std::ceil(cfg.initial_share * double(n)));
    std::vector<AgentId> initial(others.begin(), others.begin() + long(std::min(s0, others.size())));
    std::sort(initial.begin(), initial.end());

    std::vector<Link> links = generate_links(cfg, sites, is_recipient, recipients, seed);
    auto graph = std::make_shared<const ContactGraph>(ContactGraph::build(n, std::move(links)));

    EnvironmentData d;
    d.params = UtilityParams{cfg.utility.gamma, cfg.utility.alpha, cfg.utility.beta_cost,
                             cfg.utility.beta_coverage, monthly_discount(cfg.utility.annual_discount)};
    d.horizon = cfg.horizon;
    d.continuation = cfg.utility.continuation;
    d.call_price = linear_series(cfg.prices.call_start, cfg.prices.call_end, cfg.horizon);
    d.handset_price = linear_series(cfg.prices.handset_start, cfg.prices.handset_end, cfg.horizon);
    d.sites = sites;

    std::vector<CoverageTower> towers;
    if (cfg.coverage.enabled) {
        Terrain t = generate_terrain(cfg, cities, seed);
        towers = t.towers;
        const auto maps = monthly_coverage(t.grid, t.towers, cfg.horizon, cfg.coverage.receiver_m);
        d.coverage.resize(n * std::size_t(cfg.horizon));
        for (AgentId a = 0; a < n; ++a) {
            const auto cells = disk_cells(t.grid.rows, t.grid.cols, t.grid.cell_size, sites[a].x,
                                          sites[a].y, cfg.coverage.radius_m);
            for (Month m = 1; m <= cfg.horizon; ++m) {
                std::size_t hit = 0;
                for (std::uint32_t k : cells) hit += maps[std::size_t(m - 1)].covered[k];
                d.coverage[a * std::size_t(cfg.horizon) + std::size_t(m - 1)] =
                    cells.empty() ? 0.0 : double(hit) / double(cells.size());
            }
        }
    }

    auto erng = stream(seed, 5);
    std::normal_distribution<double> eta(cfg.eta.mean, cfg.eta.sd);
    d.eta.resize(n);
    for (double& e : d.eta) e = eta(erng);
    d.discount.assign(n, 0.0);
    for (AgentId a : recipients) d.discount[a] = cfg.program.discount;
    d.fixed_dates.assign(n, kFree);
    for (AgentId a : initial) d.fixed_dates[a] = 1;
    const Month last = std::min(cfg.horizon, cfg.program.month + cfg.program.window - 1);
    std::uniform_int_distribution<Month> handout(cfg.program.month, last);
    for (AgentId a : recipients) d.fixed_dates[a] = handout(erng);

    return World{Environment(std::move(graph), std::move(d)), std::move(recipients), std::move(initial),
                 std::move(towers)};
}

Environment analysis_environment(const World& w) {
    std::vector<Month> fixed(w.env.fixed_dates().begin(), w.env.fixed_dates().end());
    for (AgentId a : w.recipients) fixed[a] = kFree;
    return w.env.with_fixed_dates(std::move(fixed));
}

Environment generate_network(const ScenarioConfig& cfg, std::uint64_t seed) {
    return generate_world(cfg, seed).env;
}

// ---------------------------------------------------------------- CDR simulation

CdrOptions cdr_options(const ScenarioConfig& cfg, const std::vector<AgentId>& recipients) {
    CdrOptions o;
    o.start_year = cfg.cdr.start_year;
    o.start_month = cfg.cdr.start_month;
    o.utc_offset = cfg.cdr.utc_offset;
    o.standard_model = cfg.cdr.standard_model;
    o.subsidized_model = cfg.cdr.subsidized_model;
    o.recipients = recipients;
    o.program_month = cfg.program.month;
    o.window = cfg.program.window;
    o.middlemen = cfg.cdr.middlemen;
    o.handsets_per_middleman = cfg.cdr.handsets_per_middleman;
    o.decoys = cfg.cdr.decoys;
    o.tower_spacing = cfg.cdr.tower_spacing_km * 1000;
    o.origin_lat = cfg.cdr.origin_lat;
    o.origin_lon = cfg.cdr.origin_lon;
    o.max_calls = cfg.cdr.max_calls;
    return o;
}

CdrOutput simulate_cdr(const AdoptionProfile& profile, const Environment& env, std::uint64_t seed,
                       const CdrOptions& opts) {
    const std::size_t n = env.agent_count();
    if (profile.size() != n) throw InvalidArgument("profile size does not match environment");
    if (opts.max_calls < 1) throw InvalidArgument("max_calls must be >= 1");
    if (!(opts.tower_spacing > 0)) throw InvalidArgument("tower spacing must be > 0");
    const Month T = env.horizon();
    const ContactGraph& g = env.graph();
    auto rng = stream(seed, 11);

    CdrOutput out;
    out.service_account = n;
    for (int k = 0; k < 3; ++k) out.distributors.push_back(n + 1 + AccountId(k));

    const std::int64_t key0 = month_key(opts.start_year, opts.start_month);
    auto month_start = [&](Month t) {
        const std::int64_t key = key0 + t - 1;
        return epoch_seconds(int(key / 12), int(key % 12) + 1, 1) - opts.utc_offset;
    };
    auto in_month = [&](Month t, int from_day) {
        const std::int64_t a = month_start(t) + std::int64_t(from_day - 1) * 86400;
        const std::int64_t b = month_start(t + 1);
        return std::uniform_int_distribution<std::int64_t>(a, b - 1)(rng);
    };
    auto on_day = [&](Month t, int day) {
        const std::int64_t a = month_start(t) + std::int64_t(day - 1) * 86400;
        return std::uniform_int_distribution<std::int64_t>(a, a + 86399)(rng);
    };

    // Towers on a square grid over the agents' sites.
    double max_x = 0, max_y = 0;
    for (AgentId a = 0; a < n; ++a) {
        max_x = std::max(max_x, env.site(a).x);
        max_y = std::max(max_y, env.site(a).y);
    }
    const int tcols = std::max(1, int(std::floor(max_x / opts.tower_spacing)) + 1);
    const int trows = std::max(1, int(std::floor(max_y / opts.tower_spacing)) + 1);
    std::vector<TowerId> tower_of(n);
    std::vector<std::pair<int, int>> rural_count(std::size_t(tcols) * trows, {0, 0});
    for (AgentId a = 0; a < n; ++a) {
        const int c = std::min(tcols - 1, int(env.site(a).x / opts.tower_spacing));
        const int r = std::min(trows - 1, int(env.site(a).y / opts.tower_spacing));
        const std::size_t k = std::size_t(r) * tcols + c;
        tower_of[a] = TowerId(k + 1);
        (env.site(a).rural ? rural_count[k].first : rural_count[k].second)++;
    }
    ElevationGrid frame(1, 1, 1.0);
    frame.origin_lat = opts.origin_lat;
    frame.origin_lon = opts.origin_lon;
    for (int r = 0; r < trows; ++r)
        for (int c = 0; c < tcols; ++c) {
            const std::size_t k = std::size_t(r) * tcols + c;
            Tower t;
            t.id = TowerId(k + 1);
            frame.to_geo((c + 0.5) * opts.tower_spacing, (r + 0.5) * opts.tower_spacing, t.lat, t.lon);
            t.rural = rural_count[k].first >= rural_count[k].second;
            out.towers.push_back(t);
        }
    const TowerId service_tower = out.towers.front().id;

    // Roles.
    const Month w_first = opts.program_month, w_last = opts.program_month + opts.window - 1;
    out.program_window = {key0 + w_first - 1, key0 + w_last - 1};
    std::vector<std::uint8_t> planted(n, 0);
    for (AgentId a : opts.recipients) {
        env.check_agent(a);
        if (adopted(profile[a]) && profile[a] >= w_first && profile[a] <= w_last) {
            planted[a] = 1;
            out.truth.recipients.insert(a);
        }
    }
    std::vector<AgentId> established;
    for (AgentId a = 0; a < n; ++a)
        if (adopted(profile[a]) && profile[a] < w_first && !planted[a]) established.push_back(a);
    std::shuffle(established.begin(), established.end(), rng);
    const std::size_t need = opts.middlemen * opts.handsets_per_middleman;
    if (opts.middlemen > 0 && opts.handsets_per_middleman == 0)
        throw InvalidArgument("handsets_per_middleman must be >= 1");
    if (opts.middlemen + opts.decoys > established.size())
        throw InvalidArgument("not enough early adopters for the planted middlemen and decoys");
    std::vector<AgentId> chain_recipients(out.truth.recipients.begin(), out.truth.recipients.end());
    if (need > chain_recipients.size())
        throw InvalidArgument("not enough in-window recipients for the planted middlemen");
    std::shuffle(chain_recipients.begin(), chain_recipients.end(), rng);
    chain_recipients.resize(need);
    std::vector<AgentId> middlemen(established.begin(), established.begin() + long(opts.middlemen));
    std::vector<AgentId> decoys(established.begin() + long(opts.middlemen),
                                established.begin() + long(opts.middlemen + opts.decoys));
    std::vector<long> chain_of(n, -1);
    for (std::size_t k = 0; k < chain_recipients.size(); ++k) chain_of[chain_recipients[k]] = long(k);

    for (AgentId a = 0; a < n; ++a) {
        if (!adopted(profile[a])) continue;
        out.catalog[HandsetId(a) + 1] = planted[a] ? opts.subsidized_model : opts.standard_model;
        out.truth.adoption_month[a] = key0 + profile[a] - 1;
    }
    for (AgentId a : decoys) out.catalog[HandsetId(a) + 1] = opts.subsidized_model;
    for (std::size_t k = 0; k < out.distributors.size(); ++k)
        out.catalog[HandsetId(n) + 1 + k] = opts.standard_model;

    auto& rec = out.records;
    auto emit = [&](std::int64_t t, HandsetId h, AccountId i, AccountId j, TowerId li, TowerId lj,
                    double d) { rec.push_back({t, h, i, j, li, lj, d}); };
    std::uniform_real_distribution<double> short_call(1.0, 30.0);

    // Activation records (the distributor's for chain recipients) plus the
    // recipient's own first record.
    for (AgentId a = 0; a < n; ++a) {
        const Month tau = profile[a];
        if (!adopted(tau)) continue;
        const HandsetId h = HandsetId(a) + 1;
        if (chain_of[a] >= 0) {
            const AccountId x = out.distributors[std::size_t(chain_of[a]) % out.distributors.size()];
            emit(on_day(tau, 1), h, x, out.service_account, service_tower, service_tower, short_call(rng));
            emit(on_day(tau, 3), h, a, out.service_account, tower_of[a], service_tower, short_call(rng));
        } else {
            emit(on_day(tau, 1), h, a, out.service_account, tower_of[a], service_tower, short_call(rng));
        }
    }

    // Calls on model links.
    const UtilityParams& params = env.params();
    std::set<std::pair<AgentId, AgentId>> edges;
    std::vector<double> cuts;
    for (std::size_t l = 0; l < g.link_count(); ++l) {
        const AgentId i = g.caller(l), j = g.callee(l);
        if (!adopted(profile[i]) || !adopted(profile[j])) continue;
        const Month from = std::max(profile[i], profile[j]);
        for (Month t = from; t <= T; ++t) {
            const double eps = g.shocks(l).sample(rng);
            const double cost = CallCost::make(env.call_price(t), params.beta_coverage,
                                               env.coverage(i, t), env.coverage(j, t)).total();
            const double d = optimal_duration(eps, cost, params);
            if (!(d > 0.0)) continue;
            const int calls = std::uniform_int_distribution<int>(1, opts.max_calls)(rng);
            cuts.assign(1, 0.0);
            for (int k = 1; k < calls; ++k) cuts.push_back(uniform(rng));
            std::sort(cuts.begin(), cuts.end());
            cuts.push_back(1.0);
            double used = 0.0;
            const int first_day = t == profile[i] ? 4 : 1;
            for (int k = 0; k < calls; ++k) {
                const double piece = k + 1 == calls ? d - used : d * (cuts[k + 1] - cuts[k]);
                used += piece;
                emit(in_month(t, first_day), HandsetId(i) + 1, i, j, tower_of[i], tower_of[j],
                     std::max(0.0, piece));
            }
            edges.insert({i, j});
            out.truth.model_calls += std::size_t(calls);
        }
    }
    out.truth.model_edges = edges.size();

    // Middlemen hold each chain handset between the distributor and the recipient.
    std::vector<std::size_t> own(n, 0);
    for (const auto& r : rec)
        if (r.caller < n && r.h == HandsetId(r.caller) + 1) ++own[r.caller];
    for (std::size_t m = 0; m < middlemen.size(); ++m) {
        const AgentId mid = middlemen[m];
        out.truth.middlemen.insert(mid);
        for (std::size_t k = 0; k < opts.handsets_per_middleman; ++k) {
            const AgentId r = chain_recipients[m * opts.handsets_per_middleman + k];
            const HandsetId h = HandsetId(r) + 1;
            out.truth.transferred.insert(h);
            const std::size_t cap = std::max<std::size_t>(1, std::min<std::size_t>(20, own[mid]));
            const std::size_t count = std::uniform_int_distribution<std::size_t>(1, cap)(rng);
            for (std::size_t c = 0; c < count; ++c)
                emit(on_day(profile[r], 2), h, mid, out.service_account, tower_of[mid], service_tower,
                     short_call(rng));
        }
    }

    // Distributors' own handsets see steady use so they stay their mode handsets.
    for (std::size_t k = 0; k < out.distributors.size(); ++k)
        for (Month t = 1; t <= T; ++t)
            emit(in_month(t, 1), HandsetId(n) + 1 + k, out.distributors[k], out.service_account,
                 service_tower, service_tower, short_call(rng));

    std::sort(rec.begin(), rec.end(), record_less);
    return out;
}

// ---------------------------------------------------------------- pipeline

namespace {

bool close(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

bool outcomes_add_up(const Outcomes& all, const Outcomes& r, const Outcomes& nr, double tol) {
    for (const Outcomes* o : {&all, &r, &nr})
        if (!close(o->net_welfare, o->firm_revenue + o->consumer_surplus + o->government_revenue, tol))
            return false;
    return close(all.firm_revenue, r.firm_revenue + nr.firm_revenue, tol) &&
           close(all.consumer_surplus, r.consumer_surplus + nr.consumer_surplus, tol) &&
           close(all.consumer_surplus_with_eta, r.consumer_surplus_with_eta + nr.consumer_surplus_with_eta, tol) &&
           close(all.government_revenue, r.government_revenue + nr.government_revenue, tol) &&
           close(all.government_handset_revenue,
                 r.government_handset_revenue + nr.government_handset_revenue, tol) &&
           close(all.net_welfare, r.net_welfare + nr.net_welfare, tol);
}

bool bounds_add_up(const GroupBounds& g, double tol) {
    auto side = [&](bool upper) {
        auto pick_side = [&](const OutcomeBounds& o) {
            Outcomes x;
            auto v = [&](const BoundPair& b) { return upper ? b.upper : b.lower; };
            x.firm_revenue = v(o.firm_revenue);
            x.consumer_surplus = v(o.consumer_surplus);
            x.consumer_surplus_with_eta = v(o.consumer_surplus_with_eta);
            x.government_revenue = v(o.government_revenue);
            x.government_handset_revenue = v(o.government_handset_revenue);
            x.net_welfare = v(o.net_welfare);
            return x;
        };
        return outcomes_add_up(pick_side(g.all), pick_side(g.recipients), pick_side(g.nonrecipients), tol);
    };
    return side(false) && side(true);
}

// Every scalar cell of a report, in a fixed order.
std::vector<double*> report_cells(WelfareReport& r) {
    std::vector<double*> v;
    auto pair = [&](BoundPair& b) {
        v.push_back(&b.lower);
        v.push_back(&b.upper);
    };
    auto outcome = [&](OutcomeBounds& o) {
        pair(o.mean_adoption_time);
        pair(o.firm_revenue);
        pair(o.consumer_surplus);
        pair(o.consumer_surplus_with_eta);
        pair(o.government_revenue);
        pair(o.government_handset_revenue);
        pair(o.net_welfare);
    };
    for (GroupBounds* g : {&r.with_subsidy, &r.total, &r.proximal, &r.ripple}) {
        outcome(g->all);
        outcome(g->recipients);
        outcome(g->nonrecipients);
    }
    pair(r.subsidy_cost);
    pair(r.social_return);
    return v;
}

void mean_and_sd(const std::vector<WelfareReport>& reps, WelfareReport& mean, WelfareReport& sd) {
    mean = reps.front();
    sd = reps.front();
    auto m = report_cells(mean), s = report_cells(sd);
    std::vector<std::vector<double*>> cells;
    std::vector<WelfareReport> copies = reps;
    for (auto& c : copies) cells.push_back(report_cells(c));
    const double k = double(reps.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        double sum = 0.0;
        for (auto& c : cells) sum += *c[i];
        const double mu = sum / k;
        double ss = 0.0;
        for (auto& c : cells) ss += (*c[i] - mu) * (*c[i] - mu);
        *m[i] = mu;
        *s[i] = reps.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    }
    for (const auto& r : reps) mean.converged = mean.converged && r.converged;
    // Net welfare of the mean is recomputed so the identity holds exactly per cell.
    for (GroupBounds* g : {&mean.with_subsidy, &mean.total, &mean.proximal, &mean.ripple})
        for (OutcomeBounds* o : {&g->all, &g->recipients, &g->nonrecipients}) {
            o->net_welfare.lower = o->firm_revenue.lower + o->consumer_surplus.lower + o->government_revenue.lower;
            o->net_welfare.upper = o->firm_revenue.upper + o->consumer_surplus.upper + o->government_revenue.upper;
        }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct OutputSet {
    std::filesystem::path dir;
    std::vector<std::string> files;

    void put(const std::string& name, const std::string& content) {
        write_file(dir / name, content);
        files.push_back(name);
    }
    template <class F>
    void put_stream(const std::string& name, F&& f) {
        std::ostringstream s;
        f(s);
        put(name, s.str());
    }

    void manifest(const std::string& status) const {
        json list = json::array();
        for (const std::string& f : files)
            list.push_back({{"path", f},
                            {"sha256", sha256_file(dir / f)},
                            {"bytes", std::filesystem::file_size(dir / f)}});
        json m = {{"status", status}, {"files", list}};
        write_file(dir / "manifest.json", m.dump(2) + "\n");
    }
};

void write_rule_comparison(std::ostream& out, const std::vector<RuleResult>& rules) {
    out << "rule,stat,replications,allocated,shortfall";
    for (const char* c : {"net_welfare", "firm_revenue", "consumer_surplus", "consumer_surplus_with_eta",
                          "government_revenue", "government_handset_revenue", "social_return"})
        out << ',' << c << "_lower," << c << "_upper";
    out << ",converged,accounting_ok\n";
    for (const RuleResult& r : rules) {
        const bool rep = r.allocations.size() > 1;
        for (int pass = 0; pass < (rep ? 2 : 1); ++pass) {
            const WelfareReport& w = pass == 0 ? r.report : r.sd;
            const OutcomeBounds& o = w.total.all;
            double allocated = 0, shortfall = 0;
            for (const Allocation& a : r.allocations) {
                allocated += double(a.recipients.size());
                shortfall += double(a.shortfall);
            }
            allocated /= double(r.allocations.size());
            shortfall /= double(r.allocations.size());
            out << r.rule.name << ',' << (rep ? (pass == 0 ? "mean" : "sd") : "value") << ','
                << r.allocations.size() << ',' << fmt(allocated) << ',' << fmt(shortfall);
            for (const BoundPair* b : {&o.net_welfare, &o.firm_revenue, &o.consumer_surplus,
                                       &o.consumer_surplus_with_eta, &o.government_revenue,
                                       &o.government_handset_revenue, &w.social_return})
                out << ',' << fmt(b->lower) << ',' << fmt(b->upper);
            out << ',' << (r.report.converged ? 1 : 0) << ',' << (r.accounting_ok ? 1 : 0) << '\n';
        }
    }
}

}  // namespace

bool accounting_holds(const WelfareReport& r, double tol) {
    for (const GroupBounds* g : {&r.with_subsidy, &r.total, &r.proximal, &r.ripple})
        if (!bounds_add_up(*g, tol)) return false;
    return true;
}

bool accounting_holds(const ImpactTable& t, double tol) {
    for (const GroupOutcomes* g : {&t.with_subsidy, &t.proximal, &t.ripple, &t.total}) {
        if (!outcomes_add_up(g->all, g->recipients, g->nonrecipients, tol)) return false;
        const double n = double(g->all.count);
        if (n > 0 && !close(g->all.mean_adoption_time * n,
                            g->recipients.mean_adoption_time * double(g->recipients.count) +
                                g->nonrecipients.mean_adoption_time * double(g->nonrecipients.count),
                            tol))
            return false;
    }
    for (auto [p, r, tt] : {std::tuple{&t.proximal.all, &t.ripple.all, &t.total.all},
                            std::tuple{&t.proximal.recipients, &t.ripple.recipients, &t.total.recipients},
                            std::tuple{&t.proximal.nonrecipients, &t.ripple.nonrecipients,
                                       &t.total.nonrecipients}})
        for (auto f : {&Outcomes::firm_revenue, &Outcomes::consumer_surplus, &Outcomes::government_revenue,
                       &Outcomes::net_welfare, &Outcomes::mean_adoption_time})
            if (!close(p->*f + r->*f, tt->*f, tol)) return false;
    return true;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    OutputSet out{cfg.output_dir, {}};
    std::filesystem::create_directories(out.dir);
    std::filesystem::remove(out.dir / "error.json");
    std::string stage = "generate";
    try {
        out.put("config.json", config_to_json(cfg).dump(2) + "\n");
        World world = generate_world(cfg, cfg.seed);
        const Environment env = analysis_environment(world);
        const std::size_t n = env.agent_count();
        const SolveOptions solve{cfg.solver.max_rounds, cfg.solver.mode, std::nullopt};
        out.put("environment.json", environment_to_json(world.env).dump() + "\n");

        stage = "observed";
        const SolveResult obs = solve_equilibrium(world.env.initial_profile(kNever), world.env, solve);
        if (!obs.converged) throw Error("observed equilibrium did not converge");
        const AdoptionProfile& observed = obs.profile;
        out.put_stream("observed_profile.csv", [&](std::ostream& s) { write_profile_csv(s, observed); });

        stage = "bounds";
        EtaBoundOptions bopts;
        bopts.cap = cfg.bounds.cap;
        bopts.recipient_extension_months = cfg.bounds.recipient_extension_months;
        EtaBounds bounds = estimate_eta_bounds(observed, env, bopts);
        const Month w_first = cfg.program.month, w_last = cfg.program.month + cfg.program.window - 1;
        std::vector<AgentId> rec_adopted, comparison;
        const auto is_rec = recipient_mask(n, world.recipients);
        for (AgentId a = 0; a < n; ++a) {
            if (env.is_fixed(a) || !adopted(observed[a])) continue;
            if (is_rec[a]) rec_adopted.push_back(a);
            else if (observed[a] >= w_first && observed[a] <= w_last) comparison.push_back(a);
        }
        std::string comparable_note = "ok";
        try {
            bounds = comparable_upper_bounds(bounds, rec_adopted, comparison);
        } catch (const std::exception& e) {
            comparable_note = e.what();
            bounds.hi_comp = bounds.hi;
        }
        out.put_stream("eta_bounds.csv", [&](std::ostream& s) { write_bounds_csv(s, bounds); });

        stage = "baseline";
        struct ModeState {
            Environment env;
            AdoptionProfile baseline;
            std::size_t held = 0;
            std::size_t moved = 0;
            bool converged = true;
        };
        auto make_mode = [&](EtaMode mode) {
            Environment e = bound_environment(env, bounds, mode, observed, cfg.bounds.margin);
            std::size_t held = 0;
            for (AgentId a = 0; a < n; ++a) held += (e.is_fixed(a) && !env.is_fixed(a)) ? 1 : 0;
            SolveResult r = solve_equilibrium(observed, e, solve);
            std::size_t moved = 0;
            for (AgentId a = 0; a < n; ++a) moved += r.profile[a] != observed[a] ? 1 : 0;
            return ModeState{std::move(e), std::move(r.profile), held, moved, r.converged};
        };
        ModeState lower = make_mode(EtaMode::Lower);
        ModeState upper = make_mode(EtaMode::Upper);
        out.put_stream("profile_lower.csv", [&](std::ostream& s) { write_profile_csv(s, lower.baseline); });
        out.put_stream("profile_upper.csv", [&](std::ostream& s) { write_profile_csv(s, upper.baseline); });

        stage = "rules";
        SubsidyProgram implemented;
        implemented.recipients = world.recipients;
        implemented.discount = cfg.program.discount;
        implemented.month = cfg.program.month;
        implemented.full_price = cfg.program.full_price;
        implemented.repayment = cfg.program.repayment;
        implemented.payments = cfg.program.payments;

        struct NoSubsidy {
            Environment env;
            AdoptionProfile profile;
        };
        auto strip = [&](const ModeState& m) {
            Environment e = remove_program(m.env, implemented);
            SolveResult r = solve_equilibrium(m.baseline, e, solve);
            return NoSubsidy{std::move(e), std::move(r.profile)};
        };
        const NoSubsidy none_lower = strip(lower), none_upper = strip(upper);

        std::vector<std::string> names;
        for (const std::string& r : cfg.rules) {
            if (r == "standard") {
                for (const TargetingRule& s : standard_rules(1, cfg.program.month)) names.push_back(s.name);
            } else {
                names.push_back(r);
            }
        }
        const std::size_t budget = cfg.rule_budget ? cfg.rule_budget : std::max<std::size_t>(1, world.recipients.size());

        std::vector<RuleResult> results;
        const CellGrid grid{0.0, 0.0, cfg.map.cell_km * 1000,
                            std::max(1, int(std::ceil(cfg.layout.width_km / cfg.map.cell_km))),
                            std::max(1, int(std::ceil(cfg.layout.height_km / cfg.map.cell_km)))};
        std::optional<AgentWelfare> implemented_welfare;
        const MapGeo geo{cfg.cdr.origin_lat, cfg.cdr.origin_lon};
        const std::set<std::string> map_rules(cfg.map.rules.begin(), cfg.map.rules.end());

        for (const std::string& name : names) {
            RuleResult rr;
            rr.rule = parse_rule(name, budget, cfg.program.month);
            const int reps = rr.rule.is_random() ? cfg.replications : 1;
            std::vector<WelfareReport> reports;
            for (int rep = 0; rep < reps; ++rep) {
                const std::uint64_t rule_seed = cfg.seed * 1000003ULL + std::uint64_t(rep) * 7919ULL +
                                                std::hash<std::string>{}(name) % 100003ULL;
                Allocation alloc = allocate(rr.rule, env, observed, world.recipients, rule_seed);
                SubsidyProgram program = implemented;
                program.recipients = alloc.recipients;
                auto evaluate = [&](const ModeState& m, const NoSubsidy& none) {
                    if (rr.rule.variant == RuleVariant::Implemented) {
                        ImpactTable t = decompose_impact(m.env, implemented, m.baseline, cfg.taxes, solve);
                        t.held_fixed = m.held;
                        return std::pair{std::move(t), m.env};
                    }
                    Environment e = apply_program(none.env, program);
                    SolveResult with = solve_equilibrium(none.profile, e, solve);
                    ImpactTable t = decompose_impact(e, program, with.profile, cfg.taxes, solve);
                    t.converged = t.converged && with.converged;
                    t.held_fixed = m.held;
                    return std::pair{std::move(t), std::move(e)};
                };
                auto [lo, lo_env] = evaluate(lower, none_lower);
                auto [hi, hi_env] = evaluate(upper, none_upper);
                rr.accounting_ok = rr.accounting_ok && accounting_holds(lo) && accounting_holds(hi);
                reports.push_back(build_report(lo, hi));

                if (rep == 0 && map_rules.count(name)) {
                    const AgentWelfare with_w = evaluate_welfare(lo.with_profile, lo_env, cfg.taxes);
                    SurplusMap m;
                    if (rr.rule.variant == RuleVariant::Implemented) {
                        implemented_welfare = with_w;
                        m = surplus_map(evaluate_welfare(lo.without_profile, remove_program(lo_env, implemented),
                                                         cfg.taxes),
                                        with_w, lo_env, grid);
                    } else {
                        const AgentWelfare base =
                            implemented_welfare
                                ? *implemented_welfare
                                : evaluate_welfare(lower.baseline, lower.env, cfg.taxes);
                        m = surplus_map(base, with_w, lo_env, grid);
                    }
                    out.put_stream("map_" + name + ".geojson", [&](std::ostream& s) { write_map_geojson(s, m, geo); });
                    out.put_stream("map_" + name + ".csv", [&](std::ostream& s) { write_map_csv(s, m); });
                }
                rr.allocations.push_back(std::move(alloc));
                rr.lower.push_back(std::move(lo));
                rr.upper.push_back(std::move(hi));
            }
            mean_and_sd(reports, rr.report, rr.sd);
            rr.accounting_ok = rr.accounting_ok && accounting_holds(rr.report);
            results.push_back(std::move(rr));
        }

        stage = "reports";
        const RuleResult* impl = nullptr;
        for (const RuleResult& r : results)
            if (r.rule.variant == RuleVariant::Implemented) impl = &r;
        WelfareReport impact_report;
        if (impl) {
            impact_report = impl->report;
            out.put_stream("impact_report.csv", [&](std::ostream& s) { write_report_csv(s, impact_report); });
            out.put("impact_report.json", report_to_json(impact_report).dump(2) + "\n");
        }
        out.put_stream("rule_comparison.csv", [&](std::ostream& s) { write_rule_comparison(s, results); });
        json rules_json = json::array();
        for (const RuleResult& r : results)
            rules_json.push_back({{"rule", r.rule.name},
                                  {"replications", r.allocations.size()},
                                  {"mean", report_to_json(r.report)},
                                  {"sd", report_to_json(r.sd)},
                                  {"accounting_ok", r.accounting_ok}});
        out.put("rule_comparison.json", rules_json.dump(2) + "\n");

        stage = "consistency";
        const Environment reread = environment_from_json(json::parse(read_file(out.dir / "environment.json")));
        const SolveResult again = solve_equilibrium(reread.initial_profile(kNever), reread, solve);
        const AgentWelfare w1 = evaluate_welfare(observed, world.env, cfg.taxes);
        const AgentWelfare w2 = evaluate_welfare(again.profile, reread, cfg.taxes);
        const bool consistent = again.profile == observed && w1.consumer_surplus == w2.consumer_surplus &&
                                w1.firm_revenue == w2.firm_revenue;

        json forensics = nullptr;
        if (cfg.cdr.enabled) {
            stage = "cdr";
            const CdrOutput cdr = simulate_cdr(observed, env, cfg.seed + 17, cdr_options(cfg, world.recipients));
            out.put_stream("records.csv", [&](std::ostream& s) { write_records_csv(s, cdr.records); });
            out.put_stream("towers.csv", [&](std::ostream& s) { write_towers_csv(s, cdr.towers); });
            out.put_stream("handsets.csv", [&](std::ostream& s) { write_catalog_csv(s, cdr.catalog); });
            const auto found = identify_subsidy_recipients(cdr.records, cdr.catalog, cfg.cdr.subsidized_model,
                                                           cdr.program_window, cfg.cdr.utc_offset);
            const auto lineages = build_handset_lineages(cdr.records, &cdr.catalog, cfg.cdr.subsidized_model);
            const auto subs = subsidized_handsets(cdr.records, cdr.catalog, cfg.cdr.subsidized_model,
                                                  cdr.program_window, cfg.cdr.utc_offset);
            const auto mm = detect_middlemen(lineages, subs);
            forensics = {{"planted_recipients", cdr.truth.recipients.size()},
                         {"recovered_recipients", found.size()},
                         {"recipients_exact", found == cdr.truth.recipients},
                         {"planted_middlemen", cdr.truth.middlemen.size()},
                         {"recovered_middlemen", mm.middlemen.size()},
                         {"middlemen_exact", mm.middlemen == cdr.truth.middlemen},
                         {"records", cdr.records.size()}};
            out.put("cdr_truth.json",
                    json({{"recipients", cdr.truth.recipients},
                          {"middlemen", cdr.truth.middlemen},
                          {"transferred_handsets", cdr.truth.transferred},
                          {"model_edges", cdr.truth.model_edges},
                          {"model_calls", cdr.truth.model_calls}})
                            .dump(2) +
                        "\n");
        }

        std::size_t adopters = 0;
        for (Month t : observed.tau) adopters += adopted(t) ? 1 : 0;
        json summary = {{"agents", n},
                        {"links", env.graph().link_count()},
                        {"horizon", env.horizon()},
                        {"recipients", world.recipients.size()},
                        {"initial_adopters", world.initial_adopters.size()},
                        {"adopters", adopters},
                        {"observed_rounds", obs.rounds},
                        {"crossed", bounds.crossed_count()},
                        {"infeasible", bounds.infeasible_agents.size()},
                        {"comparable_weight", bounds.weight},
                        {"comparable_status", comparable_note},
                        {"comparison_group", comparison.size()},
                        {"held_fixed", {{"lower", lower.held}, {"upper", upper.held}}},
                        {"baseline_moved", {{"lower", lower.moved}, {"upper", upper.moved}}},
                        {"rule_budget", budget},
                        {"rules", results.size()},
                        {"serialization_consistent", consistent},
                        {"forensics", forensics}};
        out.put("summary.json", summary.dump(2) + "\n");
        out.manifest("complete");

        ScenarioResult res{std::move(world), observed, std::move(bounds), lower.baseline, upper.baseline,
                           impact_report, std::move(results), summary, out.files};
        return res;
    } catch (const std::exception& e) {
        json err = {{"stage", stage}, {"message", e.what()}};
        write_file(out.dir / "error.json", err.dump(2) + "\n");
        out.files.push_back("error.json");
        out.manifest("partial");
        throw;
    }
}

int run_scenario_file(const std::filesystem::path& config_path,
                      const std::optional<std::filesystem::path>& out_override) {
    try {
        ScenarioConfig cfg = load_config(config_path);
        if (out_override) cfg.output_dir = out_override->string();
        run_scenario(cfg);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace netsub
