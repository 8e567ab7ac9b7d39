#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "netsub/environment.hpp"
#include "netsub/equilibrium.hpp"
#include "netsub/trace.hpp"
#include "netsub/welfare.hpp"

namespace netsub {

using json = nlohmann::json;

json shock_to_json(const ShockDistribution& s);
ShockDistribution shock_from_json(const json& j);

/// Columnar document: parameters, series, per-agent vectors and the link list.
json environment_to_json(const Environment& env);
Environment environment_from_json(const json& j);

void write_profile_csv(std::ostream& out, const AdoptionProfile& p);
AdoptionProfile read_profile_csv(std::istream& in);

void write_bounds_csv(std::ostream& out, const EtaBounds& b);

void write_records_csv(std::ostream& out, const std::vector<TransactionRecord>& records);
/// Header t,h,i,j,l_i,l_j,d; t may be epoch seconds or ISO-8601.
std::vector<TransactionRecord> read_records_csv(std::istream& in);

void write_towers_csv(std::ostream& out, const std::vector<Tower>& towers);
std::unordered_map<TowerId, Tower> read_towers_csv(std::istream& in);

void write_catalog_csv(std::ostream& out, const std::unordered_map<HandsetId, ModelId>& catalog);
std::unordered_map<HandsetId, ModelId> read_catalog_csv(std::istream& in);

json outcomes_to_json(const Outcomes& o);
json group_outcomes_to_json(const GroupOutcomes& g);
json report_to_json(const WelfareReport& r);
json edge_statistics_to_json(const EdgeStatistics& s);
json profile_summary_to_json(const ProfileSummary& s);

/// Rows (with subsidy, proximal, ripple, total) x groups, lower/upper columns.
void write_report_csv(std::ostream& out, const WelfareReport& r);

struct MapGeo {
    double origin_lat = 0.0;
    double origin_lon = 0.0;
};
void write_map_geojson(std::ostream& out, const SurplusMap& m, const MapGeo& geo);
void write_map_csv(std::ostream& out, const SurplusMap& m);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// Splits one CSV line on commas (no quoting).
std::vector<std::string> split_csv(const std::string& line);

}  // namespace netsub
