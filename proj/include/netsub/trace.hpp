#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "netsub/types.hpp"

namespace netsub {

using AccountId = std::uint64_t;
using HandsetId = std::uint64_t;
using TowerId = std::uint64_t;
using ModelId = std::uint64_t;

struct TransactionRecord {
    std::int64_t t = 0;  // UTC epoch seconds
    HandsetId h = 0;
    AccountId caller = 0;
    AccountId callee = 0;
    TowerId caller_tower = 0;
    TowerId callee_tower = 0;
    double duration = 0.0;  // seconds

    void validate() const;
    bool operator==(const TransactionRecord&) const = default;
};

/// Canonical order: t, handset, caller, callee, towers, duration.
bool record_less(const TransactionRecord& a, const TransactionRecord& b);

struct LineageSegment {
    AccountId account = 0;
    std::int64_t first_t = 0;
    std::int64_t last_t = 0;
    std::size_t count = 0;
};

struct HandsetLineage {
    HandsetId handset = 0;
    std::vector<LineageSegment> segments;
    std::optional<ModelId> model;
    bool subsidized = false;

    std::size_t transactions() const;
};

struct LineageSet {
    std::vector<HandsetLineage> lineages;  // sorted by handset id
    std::size_t duplicates_removed = 0;
    std::size_t records = 0;               // after deduplication
};

/// `catalog` maps handsets to models; handsets of `subsidized_model` are flagged.
LineageSet build_handset_lineages(std::vector<TransactionRecord> records,
                                  const std::unordered_map<HandsetId, ModelId>* catalog = nullptr,
                                  std::optional<ModelId> subsidized_model = std::nullopt);

struct Activation {
    std::int64_t t = 0;
    AccountId account = 0;
    TowerId tower = 0;
};

std::map<HandsetId, Activation> detect_activations(const std::vector<TransactionRecord>& records);

/// Inclusive range of month keys (see month_key).
struct MonthWindow {
    std::int64_t first = 0;
    std::int64_t last = 0;
    bool contains(std::int64_t key) const { return key >= first && key <= last; }
};

/// Mode handset per account by caller transaction count, ties to the earliest
/// first use, then the lowest handset id.
std::map<AccountId, HandsetId> mode_handsets(const std::vector<TransactionRecord>& records);

std::set<AccountId> identify_subsidy_recipients(
    const std::vector<TransactionRecord>& records,
    const std::unordered_map<HandsetId, ModelId>& catalog, ModelId model, MonthWindow window,
    int utc_offset = 0);

/// Handsets of `model` whose activation falls in `window`.
std::set<HandsetId> subsidized_handsets(const std::vector<TransactionRecord>& records,
                                        const std::unordered_map<HandsetId, ModelId>& catalog,
                                        ModelId model, MonthWindow window, int utc_offset = 0);

struct MiddlemanResult {
    std::set<AccountId> middlemen;
    std::set<HandsetId> transferred;
};

MiddlemanResult detect_middlemen(const LineageSet& lineages, const std::set<HandsetId>& subsidized,
                                 std::size_t max_transactions = 20, std::size_t min_handsets = 2);

struct Tower {
    TowerId id = 0;
    double lat = 0.0;
    double lon = 0.0;
    bool rural = false;
};

struct CalendarConfig {
    int utc_offset = 0;  // seconds added to UTC to get local time
    int workday_start = 8;
    int workday_end = 17;    // exclusive hour
    int late_night_start = 23;
    int late_night_end = 5;  // exclusive hour
    std::set<std::int64_t> holidays;  // local dates as epoch_seconds(y, m, d) / 86400
    std::optional<std::int64_t> since;  // only records with t >= since

    bool workday(std::int64_t t) const;
    bool late_night(std::int64_t t) const;
    bool weekend(std::int64_t t) const;
    bool holiday(std::int64_t t) const;
};

struct EdgeStatistics {
    std::size_t nodes = 0;
    std::size_t edges = 0;
    std::size_t months_with_data = 0;
    double calls_per_month = 0.0;
    double duration_per_month = 0.0;  // seconds
    double distance_km = 0.0;
    std::size_t distance_edges = 0;
    std::size_t unknown_tower_edges = 0;
    double any_workday = 0.0;
    double any_weekend = 0.0;
    double any_late_night = 0.0;
    double any_holiday = 0.0;
    double only_workday = 0.0;
    double all_under_30s = 0.0;
    double all_under_1min = 0.0;
};

using AccountFilter = std::function<bool(AccountId)>;

/// Mode tower per account over records where it is caller (caller tower) or
/// callee (callee tower); ties to the earliest use, then the lowest id.
std::map<AccountId, TowerId> mode_towers(const std::vector<TransactionRecord>& records);

EdgeStatistics edge_statistics(const std::vector<TransactionRecord>& records,
                               const AccountFilter& source, const AccountFilter& target,
                               const std::unordered_map<TowerId, Tower>& towers,
                               const CalendarConfig& calendar = {});

struct AccountProfile {
    AccountId account = 0;
    std::optional<TowerId> mode_tower;
    bool rural = false;
    std::int64_t adoption_month = 0;  // month key
    double calls_per_month = 0.0;
    double minutes_per_month = 0.0;
    std::size_t degree = 0;
    double clustering = 0.0;
    double late_fraction = 0.0;  // outgoing duration share to accounts adopting at or after `late_from`
    bool recipient = false;
};

/// Profiles for every account appearing in the records, sorted by id.
std::vector<AccountProfile> account_usage_profile(const std::vector<TransactionRecord>& records,
                                                  const std::unordered_map<TowerId, Tower>& towers,
                                                  const std::set<AccountId>& recipients,
                                                  std::int64_t late_from, int utc_offset = 0);

struct ProfileSummary {
    std::size_t count = 0;
    double rural_mean = 0.0, rural_sd = 0.0;
    double calls_mean = 0.0, calls_median = 0.0, calls_sd = 0.0;
    double minutes_mean = 0.0, minutes_sd = 0.0;
    double late_fraction_mean = 0.0;
    double degree_mean = 0.0, degree_sd = 0.0;
    double clustering_mean = 0.0, clustering_sd = 0.0;
};

ProfileSummary summarize_profiles(const std::vector<AccountProfile>& profiles,
                                  const std::function<bool(const AccountProfile&)>& group);

/// index_t = sum_m q_mt p_mt / sum_m q_mt; months without activations are
/// nullopt. Keys are month keys; the result covers [first, last] of `quantities`.
std::map<std::int64_t, std::optional<double>> handset_price_index(
    const std::map<std::pair<ModelId, std::int64_t>, double>& quantities,
    const std::map<std::pair<ModelId, std::int64_t>, double>& prices);

}  // namespace netsub
