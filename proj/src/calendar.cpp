#include "netsub/calendar.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "netsub/types.hpp"

namespace netsub {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

CivilTime civil_time(std::int64_t t, int utc_offset) {
    using namespace std::chrono;
    const std::int64_t local = t + utc_offset;
    const std::int64_t days = floor_div(local, 86400);
    const std::int64_t secs = local - days * 86400;
    const sys_days d{std::chrono::days{days}};
    const year_month_day ymd{d};
    CivilTime c;
    c.year = int(ymd.year());
    c.month = int(unsigned(ymd.month()));
    c.day = int(unsigned(ymd.day()));
    c.hour = int(secs / 3600);
    c.weekday = int(weekday{d}.c_encoding());
    return c;
}

std::int64_t month_key(std::int64_t t, int utc_offset) {
    const CivilTime c = civil_time(t, utc_offset);
    return month_key(c.year, c.month);
}

std::int64_t month_key(int year, int month) { return std::int64_t(year) * 12 + (month - 1); }

std::string month_label(std::int64_t key) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04lld-%02lld", static_cast<long long>(floor_div(key, 12)),
                  static_cast<long long>(key - floor_div(key, 12) * 12 + 1));
    return buf;
}

std::int64_t epoch_seconds(int year, int month, int day, int hour, int minute, int second) {
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{unsigned(month)},
                             std::chrono::day{unsigned(day)}};
    if (!ymd.ok()) throw InvalidArgument("invalid civil date");
    const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
    return days * 86400 + hour * 3600 + minute * 60 + second;
}

std::int64_t parse_timestamp(const std::string& text) {
    if (text.empty()) throw InvalidArgument("empty timestamp");
    std::size_t pos = 0;
    bool digits_only = true;
    for (std::size_t k = (text[0] == '-' ? 1 : 0); k < text.size(); ++k)
        if (text[k] < '0' || text[k] > '9') digits_only = false;
    if (digits_only) {
        const long long v = std::stoll(text, &pos);
        return v;
    }
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, n = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &n) != 3)
        throw InvalidArgument("unparseable timestamp: " + text);
    std::size_t k = std::size_t(n);
    if (k < text.size() && (text[k] == 'T' || text[k] == ' ')) {
        int m = 0;
        if (std::sscanf(text.c_str() + k + 1, "%2d:%2d:%2d%n", &h, &mi, &s, &m) != 3)
            throw InvalidArgument("unparseable timestamp: " + text);
        k += 1 + std::size_t(m);
        if (k < text.size() && text[k] == '.') {
            ++k;
            while (k < text.size() && text[k] >= '0' && text[k] <= '9') ++k;
        }
    }
    int offset = 0;
    if (k < text.size()) {
        if (text[k] == 'Z' && k + 1 == text.size()) {
            ++k;
        } else if (text[k] == '+' || text[k] == '-') {
            int oh = 0, om = 0, m = 0;
            if (std::sscanf(text.c_str() + k + 1, "%2d:%2d%n", &oh, &om, &m) != 2)
                throw InvalidArgument("unparseable timestamp offset: " + text);
            offset = (text[k] == '-' ? -1 : 1) * (oh * 3600 + om * 60);
            k += 1 + std::size_t(m);
        }
    }
    if (k != text.size()) throw InvalidArgument("trailing characters in timestamp: " + text);
    return epoch_seconds(y, mo, d, h, mi, s) - offset;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    constexpr double R = 6371.0088;
    constexpr double rad = std::numbers::pi / 180.0;
    const double dlat = (lat2 - lat1) * rad, dlon = (lon2 - lon1) * rad;
    const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dlon / 2) *
                         std::sin(dlon / 2);
    return 2.0 * R * std::asin(std::min(1.0, std::sqrt(a)));
}

}  // namespace netsub
