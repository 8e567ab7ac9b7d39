#include "netsub/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "netsub/calendar.hpp"

namespace netsub {

json shock_to_json(const ShockDistribution& s) {
    if (const auto* ln = s.as_lognormal())
        return {{"family", "lognormal"}, {"location", ln->location}, {"scale", ln->scale}};
    return {{"family", "point_mass"}, {"value", s.as_point_mass()->value}};
}

ShockDistribution shock_from_json(const json& j) {
    const std::string f = j.at("family").get<std::string>();
    if (f == "lognormal")
        return ShockDistribution::lognormal(j.at("location").get<double>(), j.at("scale").get<double>());
    if (f == "point_mass") return ShockDistribution::point_mass(j.at("value").get<double>());
    throw InvalidArgument("unknown shock family " + f);
}

json environment_to_json(const Environment& env) {
    const EnvironmentData d = env.to_data();
    const ContactGraph& g = env.graph();
    json j;
    j["format"] = "netsub-environment";
    j["version"] = 1;
    j["agents"] = env.agent_count();
    j["params"] = {{"gamma", d.params.gamma},
                   {"alpha", d.params.alpha},
                   {"beta_cost", d.params.beta_cost},
                   {"beta_coverage", d.params.beta_coverage},
                   {"delta", d.params.delta}};
    j["horizon"] = d.horizon;
    j["continuation"] = d.continuation;
    j["call_price"] = d.call_price;
    j["handset_price"] = d.handset_price;
    j["coverage"] = d.coverage;
    j["eta"] = d.eta;
    j["discount"] = d.discount;
    j["fixed_dates"] = d.fixed_dates;
    if (!d.sites.empty()) {
        std::vector<double> x, y;
        std::vector<int> rural;
        for (const AgentSite& s : d.sites) {
            x.push_back(s.x);
            y.push_back(s.y);
            rural.push_back(s.rural ? 1 : 0);
        }
        j["sites"] = {{"x", x}, {"y", y}, {"rural", rural}};
    }
    std::vector<AgentId> caller, callee;
    json shocks = json::array();
    for (std::size_t l = 0; l < g.link_count(); ++l) {
        caller.push_back(g.caller(l));
        callee.push_back(g.callee(l));
        shocks.push_back(shock_to_json(g.shocks(l)));
    }
    j["links"] = {{"caller", caller}, {"callee", callee}, {"shocks", shocks}};
    return j;
}

Environment environment_from_json(const json& j) {
    if (j.value("format", "") != "netsub-environment")
        throw InvalidArgument("not a netsub environment document");
    if (j.value("version", 0) != 1) throw InvalidArgument("unsupported environment version");
    const std::size_t n = j.at("agents").get<std::size_t>();
    EnvironmentData d;
    const json& p = j.at("params");
    d.params.gamma = p.at("gamma").get<double>();
    d.params.alpha = p.at("alpha").get<double>();
    d.params.beta_cost = p.at("beta_cost").get<double>();
    d.params.beta_coverage = p.at("beta_coverage").get<double>();
    d.params.delta = p.at("delta").get<double>();
    d.horizon = j.at("horizon").get<Month>();
    d.continuation = j.value("continuation", false);
    d.call_price = j.at("call_price").get<std::vector<double>>();
    d.handset_price = j.at("handset_price").get<std::vector<double>>();
    d.coverage = j.value("coverage", std::vector<double>{});
    d.eta = j.value("eta", std::vector<double>{});
    d.discount = j.value("discount", std::vector<double>{});
    d.fixed_dates = j.value("fixed_dates", std::vector<Month>{});
    if (j.contains("sites")) {
        const auto x = j["sites"].at("x").get<std::vector<double>>();
        const auto y = j["sites"].at("y").get<std::vector<double>>();
        const auto r = j["sites"].at("rural").get<std::vector<int>>();
        if (x.size() != y.size() || x.size() != r.size())
            throw InvalidArgument("site columns differ in length");
        for (std::size_t k = 0; k < x.size(); ++k) d.sites.push_back({x[k], y[k], r[k] != 0});
    }
    const json& links = j.at("links");
    const auto caller = links.at("caller").get<std::vector<AgentId>>();
    const auto callee = links.at("callee").get<std::vector<AgentId>>();
    const json& shocks = links.at("shocks");
    if (caller.size() != callee.size() || caller.size() != shocks.size())
        throw InvalidArgument("link columns differ in length");
    std::vector<Link> ls;
    ls.reserve(caller.size());
    for (std::size_t k = 0; k < caller.size(); ++k)
        ls.push_back({caller[k], callee[k], shock_from_json(shocks[k])});
    auto graph = std::make_shared<const ContactGraph>(ContactGraph::build(n, std::move(ls)));
    return Environment(std::move(graph), std::move(d));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool next_row(std::istream& in, std::vector<std::string>& row) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        row = split_csv(line);
        return true;
    }
    return false;
}

std::unordered_map<std::string, std::size_t> header_index(std::istream& in,
                                                        std::initializer_list<const char*> need) {
    std::vector<std::string> h;
    if (!next_row(in, h)) throw InvalidArgument("CSV is empty");
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t k = 0; k < h.size(); ++k) idx[h[k]] = k;
    for (const char* c : need)
        if (!idx.count(c)) throw InvalidArgument(std::string("CSV lacks column ") + c);
    return idx;
}

}  // namespace

void write_profile_csv(std::ostream& out, const AdoptionProfile& p) {
    out << "agent,tau\n";
    for (AgentId a = 0; a < p.size(); ++a)
        out << a << ',' << (adopted(p[a]) ? std::to_string(p[a]) : std::string("never")) << '\n';
}

AdoptionProfile read_profile_csv(std::istream& in) {
    auto idx = header_index(in, {"agent", "tau"});
    std::vector<std::pair<AgentId, Month>> rows;
    std::vector<std::string> r;
    while (next_row(in, r)) {
        const AgentId a = AgentId(std::stoul(r.at(idx["agent"])));
        const std::string& t = r.at(idx["tau"]);
        rows.emplace_back(a, t == "never" ? kNever : Month(std::stol(t)));
    }
    AdoptionProfile p(rows.size(), kNever);
    for (auto [a, t] : rows) {
        if (a >= rows.size()) throw UnknownAgent(a);
        p[a] = t;
    }
    return p;
}

void write_bounds_csv(std::ostream& out, const EtaBounds& b) {
    out << "agent,eta_lo,eta_hi,eta_hi_comparable,crossed,infeasible\n";
    for (std::size_t a = 0; a < b.size(); ++a)
        out << a << ',' << fmt(b.lo[a]) << ',' << fmt(b.hi[a]) << ',' << fmt(b.hi_comp[a]) << ','
            << int(b.crossed[a]) << ',' << int(b.infeasible[a]) << '\n';
}

void write_records_csv(std::ostream& out, const std::vector<TransactionRecord>& records) {
    out << "t,h,i,j,l_i,l_j,d\n";
    for (const auto& r : records)
        out << r.t << ',' << r.h << ',' << r.caller << ',' << r.callee << ',' << r.caller_tower << ','
            << r.callee_tower << ',' << fmt(r.duration) << '\n';
}

std::vector<TransactionRecord> read_records_csv(std::istream& in) {
    auto idx = header_index(in, {"t", "h", "i", "j", "l_i", "l_j", "d"});
    std::vector<TransactionRecord> out;
    std::vector<std::string> r;
    while (next_row(in, r)) {
        TransactionRecord rec;
        rec.t = parse_timestamp(r.at(idx["t"]));
        rec.h = std::stoull(r.at(idx["h"]));
        rec.caller = std::stoull(r.at(idx["i"]));
        rec.callee = std::stoull(r.at(idx["j"]));
        rec.caller_tower = std::stoull(r.at(idx["l_i"]));
        rec.callee_tower = std::stoull(r.at(idx["l_j"]));
        rec.duration = std::stod(r.at(idx["d"]));
        rec.validate();
        out.push_back(rec);
    }
    return out;
}

void write_towers_csv(std::ostream& out, const std::vector<Tower>& towers) {
    out << "id,lat,lon,rural\n";
    for (const Tower& t : towers)
        out << t.id << ',' << fmt(t.lat) << ',' << fmt(t.lon) << ',' << (t.rural ? 1 : 0) << '\n';
}

std::unordered_map<TowerId, Tower> read_towers_csv(std::istream& in) {
    auto idx = header_index(in, {"id", "lat", "lon", "rural"});
    std::unordered_map<TowerId, Tower> out;
    std::vector<std::string> r;
    while (next_row(in, r)) {
        Tower t;
        t.id = std::stoull(r.at(idx["id"]));
        t.lat = std::stod(r.at(idx["lat"]));
        t.lon = std::stod(r.at(idx["lon"]));
        const std::string& ru = r.at(idx["rural"]);
        t.rural = ru == "1" || ru == "true";
        if (!out.emplace(t.id, t).second)
            throw InvalidArgument("duplicate tower id " + std::to_string(t.id));
    }
    return out;
}

void write_catalog_csv(std::ostream& out, const std::unordered_map<HandsetId, ModelId>& catalog) {
    std::vector<std::pair<HandsetId, ModelId>> rows(catalog.begin(), catalog.end());
    std::sort(rows.begin(), rows.end());
    out << "h,model\n";
    for (auto [h, m] : rows) out << h << ',' << m << '\n';
}

std::unordered_map<HandsetId, ModelId> read_catalog_csv(std::istream& in) {
    auto idx = header_index(in, {"h", "model"});
    std::unordered_map<HandsetId, ModelId> out;
    std::vector<std::string> r;
    while (next_row(in, r)) out[std::stoull(r.at(idx["h"]))] = std::stoull(r.at(idx["model"]));
    return out;
}

json outcomes_to_json(const Outcomes& o) {
    return {{"count", o.count},
            {"mean_adoption_time", o.mean_adoption_time},
            {"firm_revenue", o.firm_revenue},
            {"consumer_surplus", o.consumer_surplus},
            {"consumer_surplus_with_eta", o.consumer_surplus_with_eta},
            {"government_revenue", o.government_revenue},
            {"government_handset_revenue", o.government_handset_revenue},
            {"net_welfare", o.net_welfare},
            {"subsidy_outlay", o.subsidy_outlay}};
}

json group_outcomes_to_json(const GroupOutcomes& g) {
    return {{"all", outcomes_to_json(g.all)},
            {"recipients", outcomes_to_json(g.recipients)},
            {"nonrecipients", outcomes_to_json(g.nonrecipients)}};
}

namespace {

json pair_json(const BoundPair& b) { return json::array({b.lower, b.upper}); }

json outcome_bounds_json(const OutcomeBounds& o) {
    return {{"mean_adoption_time", pair_json(o.mean_adoption_time)},
            {"firm_revenue", pair_json(o.firm_revenue)},
            {"consumer_surplus", pair_json(o.consumer_surplus)},
            {"consumer_surplus_with_eta", pair_json(o.consumer_surplus_with_eta)},
            {"government_revenue", pair_json(o.government_revenue)},
            {"government_handset_revenue", pair_json(o.government_handset_revenue)},
            {"net_welfare", pair_json(o.net_welfare)}};
}

json group_bounds_json(const GroupBounds& g) {
    return {{"all", outcome_bounds_json(g.all)},
            {"recipients", outcome_bounds_json(g.recipients)},
            {"nonrecipients", outcome_bounds_json(g.nonrecipients)}};
}

}  // namespace

json report_to_json(const WelfareReport& r) {
    return {{"with_subsidy", group_bounds_json(r.with_subsidy)},
            {"proximal", group_bounds_json(r.proximal)},
            {"ripple", group_bounds_json(r.ripple)},
            {"total", group_bounds_json(r.total)},
            {"subsidy_cost", pair_json(r.subsidy_cost)},
            {"social_return", pair_json(r.social_return)},
            {"held_fixed", json::array({r.held_fixed_lower, r.held_fixed_upper})},
            {"converged", r.converged}};
}

void write_report_csv(std::ostream& out, const WelfareReport& r) {
    out << "row,group,outcome,lower,upper\n";
    const std::pair<const char*, const GroupBounds*> rows[] = {{"with_subsidy", &r.with_subsidy},
                                                               {"proximal", &r.proximal},
                                                               {"ripple", &r.ripple},
                                                               {"total", &r.total}};
    for (auto [name, gb] : rows) {
        const std::pair<const char*, const OutcomeBounds*> groups[] = {
            {"all", &gb->all}, {"recipients", &gb->recipients}, {"nonrecipients", &gb->nonrecipients}};
        for (auto [gname, ob] : groups) {
            const std::pair<const char*, const BoundPair*> cells[] = {
                {"mean_adoption_time", &ob->mean_adoption_time},
                {"firm_revenue", &ob->firm_revenue},
                {"consumer_surplus", &ob->consumer_surplus},
                {"consumer_surplus_with_eta", &ob->consumer_surplus_with_eta},
                {"government_revenue", &ob->government_revenue},
                {"government_handset_revenue", &ob->government_handset_revenue},
                {"net_welfare", &ob->net_welfare}};
            for (auto [oname, b] : cells)
                out << name << ',' << gname << ',' << oname << ',' << fmt(b->lower) << ','
                    << fmt(b->upper) << '\n';
        }
    }
    out << "summary,all,subsidy_cost," << fmt(r.subsidy_cost.lower) << ',' << fmt(r.subsidy_cost.upper)
        << '\n';
    out << "summary,all,social_return," << fmt(r.social_return.lower) << ','
        << fmt(r.social_return.upper) << '\n';
}

json edge_statistics_to_json(const EdgeStatistics& s) {
    return {{"nodes", s.nodes},
            {"edges", s.edges},
            {"months_with_data", s.months_with_data},
            {"calls_per_month", s.calls_per_month},
            {"duration_per_month", s.duration_per_month},
            {"distance_km", s.distance_km},
            {"distance_edges", s.distance_edges},
            {"unknown_tower_edges", s.unknown_tower_edges},
            {"any_workday", s.any_workday},
            {"any_weekend", s.any_weekend},
            {"any_late_night", s.any_late_night},
            {"any_holiday", s.any_holiday},
            {"only_workday", s.only_workday},
            {"all_under_30s", s.all_under_30s},
            {"all_under_1min", s.all_under_1min}};
}

json profile_summary_to_json(const ProfileSummary& s) {
    return {{"count", s.count},
            {"rural_mean", s.rural_mean},
            {"rural_sd", s.rural_sd},
            {"calls_mean", s.calls_mean},
            {"calls_median", s.calls_median},
            {"calls_sd", s.calls_sd},
            {"minutes_mean", s.minutes_mean},
            {"minutes_sd", s.minutes_sd},
            {"late_fraction_mean", s.late_fraction_mean},
            {"degree_mean", s.degree_mean},
            {"degree_sd", s.degree_sd},
            {"clustering_mean", s.clustering_mean},
            {"clustering_sd", s.clustering_sd}};
}

void write_map_geojson(std::ostream& out, const SurplusMap& m, const MapGeo& geo) {
    constexpr double R = 6371008.8;
    const double rad = 3.14159265358979323846 / 180.0;
    auto lat_of = [&](double y) { return geo.origin_lat + y / (rad * R); };
    auto lon_of = [&](double x) {
        return geo.origin_lon + x / (rad * R * std::cos(geo.origin_lat * rad));
    };
    json features = json::array();
    const CellGrid& g = m.grid;
    for (int r = 0; r < g.ny; ++r)
        for (int c = 0; c < g.nx; ++c) {
            const std::size_t k = std::size_t(r) * g.nx + c;
            const double x0 = g.x0 + c * g.cell_size, x1 = x0 + g.cell_size;
            const double y0 = g.y0 + r * g.cell_size, y1 = y0 + g.cell_size;
            json ring = json::array({json::array({lon_of(x0), lat_of(y0)}),
                                     json::array({lon_of(x1), lat_of(y0)}),
                                     json::array({lon_of(x1), lat_of(y1)}),
                                     json::array({lon_of(x0), lat_of(y1)}),
                                     json::array({lon_of(x0), lat_of(y0)})});
            features.push_back({{"type", "Feature"},
                                {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                                {"properties",
                                 {{"cell", k},
                                  {"baseline", m.baseline[k]},
                                  {"counterfactual", m.counterfactual[k]},
                                  {"diff", m.difference(k)}}}});
        }
    json doc = {{"type", "FeatureCollection"},
                {"features", features},
                {"unlocated",
                 {{"agents", m.unlocated_agents},
                  {"baseline", m.unlocated_baseline},
                  {"counterfactual", m.unlocated_counterfactual}}}};
    out << doc.dump() << '\n';
}

void write_map_csv(std::ostream& out, const SurplusMap& m) {
    out << "cell,col,row,x0,y0,baseline,counterfactual,diff\n";
    const CellGrid& g = m.grid;
    for (int r = 0; r < g.ny; ++r)
        for (int c = 0; c < g.nx; ++c) {
            const std::size_t k = std::size_t(r) * g.nx + c;
            out << k << ',' << c << ',' << r << ',' << fmt(g.x0 + c * g.cell_size) << ','
                << fmt(g.y0 + r * g.cell_size) << ',' << fmt(m.baseline[k]) << ','
                << fmt(m.counterfactual[k]) << ',' << fmt(m.difference(k)) << '\n';
        }
    out << "unlocated,,,,," << fmt(m.unlocated_baseline) << ',' << fmt(m.unlocated_counterfactual)
        << ',' << fmt(m.unlocated_counterfactual - m.unlocated_baseline) << '\n';
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    std::ostringstream s;
    for (unsigned int k = 0; k < len; ++k) s << std::hex << std::setw(2) << std::setfill('0') << int(md[k]);
    return s.str();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace netsub
