#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace cotrap {

/// One granularity row of a proportion table: count, total, percentage.
struct RatioRow {
    std::string granularity;
    std::int64_t with_count = 0;
    std::int64_t total = 0;
    std::int64_t ratio_hundredths = 0; // percentage in hundredths, half-up
};

RatioRow make_ratio_row(std::string granularity, std::int64_t with_count, std::int64_t total);

struct RatioReport {
    std::string value_column = "with_co"; // CSV header for the count column
    std::vector<RatioRow> rows;

    std::string to_csv() const;
    nlohmann::json to_json() const;
    std::string to_markdown(const std::string& count_heading) const;
};

} // namespace cotrap
