#include "netsub/trace.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "netsub/calendar.hpp"

namespace netsub {

void TransactionRecord::validate() const {
    if (caller == callee) throw InvalidArgument("record caller equals callee: " + std::to_string(caller));
    if (!(duration >= 0.0) || !std::isfinite(duration))
        throw InvalidArgument("record duration must be finite and >= 0");
}

bool record_less(const TransactionRecord& a, const TransactionRecord& b) {
    return std::tie(a.t, a.h, a.caller, a.callee, a.caller_tower, a.callee_tower, a.duration) <
           std::tie(b.t, b.h, b.caller, b.callee, b.caller_tower, b.callee_tower, b.duration);
}

std::size_t HandsetLineage::transactions() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.count;
    return n;
}

LineageSet build_handset_lineages(std::vector<TransactionRecord> records,
                                  const std::unordered_map<HandsetId, ModelId>* catalog,
                                  std::optional<ModelId> subsidized_model) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        if (a.h != b.h) return a.h < b.h;
        return record_less(a, b);
    });
    LineageSet out;
    const TransactionRecord* prev = nullptr;
    for (const TransactionRecord& r : records) {
        if (prev && prev->h == r.h && prev->t == r.t && prev->caller == r.caller) {
            ++out.duplicates_removed;
            continue;
        }
        if (!prev || prev->h != r.h) {
            HandsetLineage l;
            l.handset = r.h;
            if (catalog) {
                auto it = catalog->find(r.h);
                if (it != catalog->end()) {
                    l.model = it->second;
                    l.subsidized = subsidized_model && it->second == *subsidized_model;
                }
            }
            out.lineages.push_back(std::move(l));
        }
        auto& segs = out.lineages.back().segments;
        if (segs.empty() || segs.back().account != r.caller) segs.push_back({r.caller, r.t, r.t, 0});
        segs.back().last_t = r.t;
        ++segs.back().count;
        ++out.records;
        prev = &r;
    }
    return out;
}

std::map<HandsetId, Activation> detect_activations(const std::vector<TransactionRecord>& records) {
    std::map<HandsetId, const TransactionRecord*> first;
    for (const TransactionRecord& r : records) {
        auto [it, inserted] = first.try_emplace(r.h, &r);
        if (!inserted && record_less(r, *it->second)) it->second = &r;
    }
    std::map<HandsetId, Activation> out;
    for (auto& [h, r] : first) out.emplace(h, Activation{r->t, r->caller, r->caller_tower});
    return out;
}

namespace {

struct UseCount {
    std::size_t count = 0;
    std::int64_t first_t = 0;
};

// Picks the key with the highest count, then earliest first use, then lowest id.
template <class Map>
auto pick_mode(const Map& uses) {
    auto best = uses.begin();
    for (auto it = uses.begin(); it != uses.end(); ++it) {
        const UseCount& a = it->second;
        const UseCount& b = best->second;
        if (a.count > b.count || (a.count == b.count && a.first_t < b.first_t)) best = it;
    }
    return best->first;
}

void count_use(std::map<std::uint64_t, UseCount>& m, std::uint64_t key, std::int64_t t) {
    auto [it, inserted] = m.try_emplace(key, UseCount{0, t});
    ++it->second.count;
    it->second.first_t = std::min(it->second.first_t, t);
}

}  // namespace

std::map<AccountId, HandsetId> mode_handsets(const std::vector<TransactionRecord>& records) {
    std::map<AccountId, std::map<HandsetId, UseCount>> uses;
    for (const TransactionRecord& r : records) count_use(uses[r.caller], r.h, r.t);
    std::map<AccountId, HandsetId> out;
    for (auto& [a, m] : uses) out.emplace(a, pick_mode(m));
    return out;
}

std::set<HandsetId> subsidized_handsets(const std::vector<TransactionRecord>& records,
                                        const std::unordered_map<HandsetId, ModelId>& catalog,
                                        ModelId model, MonthWindow window, int utc_offset) {
    std::set<HandsetId> out;
    for (const auto& [h, act] : detect_activations(records)) {
        auto it = catalog.find(h);
        if (it != catalog.end() && it->second == model &&
            window.contains(month_key(act.t, utc_offset)))
            out.insert(h);
    }
    return out;
}

std::set<AccountId> identify_subsidy_recipients(
    const std::vector<TransactionRecord>& records,
    const std::unordered_map<HandsetId, ModelId>& catalog, ModelId model, MonthWindow window,
    int utc_offset) {
    if (window.first > window.last) throw InvalidArgument("month window is reversed");
    const std::set<HandsetId> subs = subsidized_handsets(records, catalog, model, window, utc_offset);
    std::set<AccountId> out;
    for (const auto& [a, h] : mode_handsets(records))
        if (subs.count(h)) out.insert(a);
    return out;
}

MiddlemanResult detect_middlemen(const LineageSet& lineages, const std::set<HandsetId>& subsidized,
                                 std::size_t max_transactions, std::size_t min_handsets) {
    std::map<AccountId, std::set<HandsetId>> interior;
    for (const HandsetLineage& l : lineages.lineages) {
        if (!subsidized.count(l.handset)) continue;
        const auto& s = l.segments;
        for (std::size_t k = 1; k + 1 < s.size(); ++k) {
            if (s[k].count > max_transactions) continue;
            if (s[k - 1].account == s[k].account || s[k + 1].account == s[k].account) continue;
            interior[s[k].account].insert(l.handset);
        }
    }
    MiddlemanResult out;
    for (auto& [a, hs] : interior) {
        if (hs.size() < min_handsets) continue;
        out.middlemen.insert(a);
        out.transferred.insert(hs.begin(), hs.end());
    }
    return out;
}

bool CalendarConfig::workday(std::int64_t t) const {
    const CivilTime c = civil_time(t, utc_offset);
    return !c.weekend() && c.hour >= workday_start && c.hour < workday_end;
}

bool CalendarConfig::late_night(std::int64_t t) const {
    const int h = civil_time(t, utc_offset).hour;
    return late_night_start > late_night_end ? (h >= late_night_start || h < late_night_end)
                                             : (h >= late_night_start && h < late_night_end);
}

bool CalendarConfig::weekend(std::int64_t t) const { return civil_time(t, utc_offset).weekend(); }

bool CalendarConfig::holiday(std::int64_t t) const {
    const std::int64_t local = t + utc_offset;
    std::int64_t day = local / 86400;
    if (local % 86400 < 0) --day;
    return holidays.count(day) > 0;
}

std::map<AccountId, TowerId> mode_towers(const std::vector<TransactionRecord>& records) {
    std::map<AccountId, std::map<TowerId, UseCount>> uses;
    for (const TransactionRecord& r : records) {
        count_use(uses[r.caller], r.caller_tower, r.t);
        count_use(uses[r.callee], r.callee_tower, r.t);
    }
    std::map<AccountId, TowerId> out;
    for (auto& [a, m] : uses) out.emplace(a, pick_mode(m));
    return out;
}

EdgeStatistics edge_statistics(const std::vector<TransactionRecord>& records,
                               const AccountFilter& source, const AccountFilter& target,
                               const std::unordered_map<TowerId, Tower>& towers,
                               const CalendarConfig& calendar) {
    struct Acc {
        std::size_t calls = 0;
        double duration = 0.0;
        bool any_workday = false, any_weekend = false, any_late = false, any_holiday = false;
        bool only_workday = true, all_30 = true, all_60 = true;
    };
    std::set<std::int64_t> months;
    std::map<std::pair<AccountId, AccountId>, Acc> edges;
    for (const TransactionRecord& r : records) {
        if (calendar.since && r.t < *calendar.since) continue;
        months.insert(month_key(r.t, calendar.utc_offset));
        if (!source(r.caller) || !target(r.callee)) continue;
        Acc& e = edges[{r.caller, r.callee}];
        ++e.calls;
        e.duration += r.duration;
        const bool wd = calendar.workday(r.t);
        e.any_workday |= wd;
        e.only_workday &= wd;
        e.any_weekend |= calendar.weekend(r.t);
        e.any_late |= calendar.late_night(r.t);
        e.any_holiday |= calendar.holiday(r.t);
        e.all_30 &= r.duration < 30.0;
        e.all_60 &= r.duration < 60.0;
    }

    EdgeStatistics s;
    s.edges = edges.size();
    s.months_with_data = months.size();
    if (edges.empty()) return s;
    const std::map<AccountId, TowerId> home = mode_towers(records);
    const double months_n = double(months.size());
    std::set<AccountId> nodes;
    double dist = 0.0;
    for (const auto& [key, e] : edges) {
        nodes.insert(key.first);
        s.calls_per_month += double(e.calls) / months_n;
        s.duration_per_month += e.duration / months_n;
        s.any_workday += e.any_workday;
        s.any_weekend += e.any_weekend;
        s.any_late_night += e.any_late;
        s.any_holiday += e.any_holiday;
        s.only_workday += e.only_workday;
        s.all_under_30s += e.all_30;
        s.all_under_1min += e.all_60;
        const auto ti = towers.find(home.at(key.first));
        const auto tj = towers.find(home.at(key.second));
        if (ti == towers.end() || tj == towers.end()) {
            ++s.unknown_tower_edges;
            continue;
        }
        dist += haversine_km(ti->second.lat, ti->second.lon, tj->second.lat, tj->second.lon);
        ++s.distance_edges;
    }
    const double m = double(edges.size());
    for (double* v : {&s.calls_per_month, &s.duration_per_month, &s.any_workday, &s.any_weekend,
                      &s.any_late_night, &s.any_holiday, &s.only_workday, &s.all_under_30s,
                      &s.all_under_1min})
        *v /= m;
    s.distance_km = s.distance_edges ? dist / double(s.distance_edges) : 0.0;
    s.nodes = nodes.size();
    return s;
}

std::vector<AccountProfile> account_usage_profile(const std::vector<TransactionRecord>& records,
                                                  const std::unordered_map<TowerId, Tower>& towers,
                                                  const std::set<AccountId>& recipients,
                                                  std::int64_t late_from, int utc_offset) {
    // Dense indices for accounts.
    std::vector<AccountId> ids;
    for (const auto& r : records) {
        ids.push_back(r.caller);
        ids.push_back(r.callee);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    const std::size_t n = ids.size();
    auto index = [&](AccountId a) {
        return std::size_t(std::lower_bound(ids.begin(), ids.end(), a) - ids.begin());
    };

    const auto activations = detect_activations(records);
    const auto home = mode_towers(records);
    std::set<std::int64_t> months;
    std::vector<std::map<HandsetId, std::int64_t>> first_use(n);
    std::vector<std::int64_t> first_seen(n, INT64_MAX);
    std::vector<std::vector<std::uint32_t>> adj(n);
    std::vector<std::size_t> calls(n, 0);
    std::vector<double> seconds(n, 0.0);
    for (const auto& r : records) {
        months.insert(month_key(r.t, utc_offset));
        const std::size_t i = index(r.caller), j = index(r.callee);
        auto [it, ins] = first_use[i].try_emplace(r.h, r.t);
        if (!ins) it->second = std::min(it->second, r.t);
        first_seen[i] = std::min(first_seen[i], r.t);
        first_seen[j] = std::min(first_seen[j], r.t);
        adj[i].push_back(std::uint32_t(j));
        adj[j].push_back(std::uint32_t(i));
        ++calls[i];
        seconds[i] += r.duration;
    }
    for (auto& a : adj) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }

    std::vector<AccountProfile> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        AccountProfile& p = out[i];
        p.account = ids[i];
        if (auto it = home.find(ids[i]); it != home.end()) {
            p.mode_tower = it->second;
            if (auto tw = towers.find(it->second); tw != towers.end()) p.rural = tw->second.rural;
        }
        std::int64_t adopt_t = first_seen[i];
        if (!first_use[i].empty()) {
            // First handset by first use, ties to the lowest id.
            auto best = first_use[i].begin();
            for (auto it = first_use[i].begin(); it != first_use[i].end(); ++it)
                if (it->second < best->second) best = it;
            adopt_t = activations.at(best->first).t;
        }
        p.adoption_month = month_key(adopt_t, utc_offset);
        p.recipient = recipients.count(ids[i]) > 0;
        p.degree = adj[i].size();
    }

    std::vector<double> late(n, 0.0);
    for (const auto& r : records) {
        const std::size_t i = index(r.caller), j = index(r.callee);
        if (out[j].adoption_month >= late_from) late[i] += r.duration;
    }

    for (std::size_t i = 0; i < n; ++i) {
        AccountProfile& p = out[i];
        const double active = double(std::distance(months.lower_bound(p.adoption_month), months.end()));
        if (active > 0) {
            p.calls_per_month = double(calls[i]) / active;
            p.minutes_per_month = seconds[i] / 60.0 / active;
        }
        p.late_fraction = seconds[i] > 0.0 ? late[i] / seconds[i] : 0.0;
        const auto& nb = adj[i];
        if (nb.size() >= 2) {
            std::size_t links = 0;
            for (std::size_t a = 0; a < nb.size(); ++a)
                for (std::size_t b = a + 1; b < nb.size(); ++b)
                    if (std::binary_search(adj[nb[a]].begin(), adj[nb[a]].end(), nb[b])) ++links;
            const double pairs = double(nb.size()) * double(nb.size() - 1) / 2.0;
            p.clustering = double(links) / pairs;
        }
    }
    return out;
}

namespace {

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
    mean = sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= double(v.size());
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / double(v.size() - 1));
}

}  // namespace

ProfileSummary summarize_profiles(const std::vector<AccountProfile>& profiles,
                                  const std::function<bool(const AccountProfile&)>& group) {
    std::vector<double> rural, calls, minutes, late, degree, clustering;
    for (const AccountProfile& p : profiles) {
        if (!group(p)) continue;
        rural.push_back(p.rural ? 1.0 : 0.0);
        calls.push_back(p.calls_per_month);
        minutes.push_back(p.minutes_per_month);
        late.push_back(p.late_fraction);
        degree.push_back(double(p.degree));
        clustering.push_back(p.clustering);
    }
    ProfileSummary s;
    s.count = rural.size();
    double unused = 0.0;
    mean_sd(rural, s.rural_mean, s.rural_sd);
    mean_sd(calls, s.calls_mean, s.calls_sd);
    mean_sd(minutes, s.minutes_mean, s.minutes_sd);
    mean_sd(late, s.late_fraction_mean, unused);
    mean_sd(degree, s.degree_mean, s.degree_sd);
    mean_sd(clustering, s.clustering_mean, s.clustering_sd);
    if (!calls.empty()) {
        std::sort(calls.begin(), calls.end());
        const std::size_t k = calls.size();
        s.calls_median = k % 2 ? calls[k / 2] : 0.5 * (calls[k / 2 - 1] + calls[k / 2]);
    }
    return s;
}

std::map<std::int64_t, std::optional<double>> handset_price_index(
    const std::map<std::pair<ModelId, std::int64_t>, double>& quantities,
    const std::map<std::pair<ModelId, std::int64_t>, double>& prices) {
    std::map<std::int64_t, std::pair<double, double>> acc;  // month -> (sum qp, sum q)
    for (const auto& [key, q] : quantities) {
        if (q < 0.0) throw InvalidArgument("negative activation quantity");
        auto& a = acc[key.second];
        if (q == 0.0) continue;
        auto p = prices.find(key);
        if (p == prices.end())
            throw InvalidArgument("no price for model " + std::to_string(key.first) + " in month " +
                                  month_label(key.second));
        a.first += q * p->second;
        a.second += q;
    }
    std::map<std::int64_t, std::optional<double>> out;
    if (acc.empty()) return out;
    for (std::int64_t m = acc.begin()->first; m <= acc.rbegin()->first; ++m) {
        auto it = acc.find(m);
        if (it == acc.end() || it->second.second == 0.0)
            out[m] = std::nullopt;
        else
            out[m] = it->second.first / it->second.second;
    }
    return out;
}

}  // namespace netsub
