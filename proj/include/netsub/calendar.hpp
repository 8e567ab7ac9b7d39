#pragma once

#include <cstdint>
#include <string>

namespace netsub {

struct CivilTime {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;
    int hour = 0;
    int weekday = 4;  // 0 = Sunday

    bool weekend() const { return weekday == 0 || weekday == 6; }
};

/// Local civil time of a UTC epoch second, shifted by `utc_offset` seconds.
CivilTime civil_time(std::int64_t t, int utc_offset = 0);

/// year * 12 + (month - 1); consecutive months differ by one.
std::int64_t month_key(std::int64_t t, int utc_offset = 0);
std::int64_t month_key(int year, int month);
std::string month_label(std::int64_t key);  // "YYYY-MM"

/// UTC epoch seconds of 00:00 on the given civil date.
std::int64_t epoch_seconds(int year, int month, int day, int hour = 0, int minute = 0,
                           int second = 0);

/// Epoch seconds ("1199145600") or ISO-8601 ("2008-01-01T00:00:00Z",
/// "2008-01-01 00:00:00", "2008-01-01T02:00:00+02:00", "2008-01-01").
std::int64_t parse_timestamp(const std::string& text);

double haversine_km(double lat1, double lon1, double lat2, double lon2);

}  // namespace netsub
