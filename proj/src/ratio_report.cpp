#include "cotrap/ratio_report.hpp"

#include "cotrap/error.hpp"
#include "cotrap/text.hpp"

#include <nlohmann/json.hpp>

namespace cotrap {

RatioRow make_ratio_row(std::string granularity, std::int64_t with_count, std::int64_t total) {
    if (total <= 0)
        throw Error("zero total at granularity '" + granularity + "'");
    RatioRow row;
    row.granularity = std::move(granularity);
    row.with_count = with_count;
    row.total = total;
    row.ratio_hundredths = ratio_pct_hundredths(with_count, total);
    return row;
}

std::string RatioReport::to_csv() const {
    std::string out = "granularity," + value_column + ",total,ratio_pct\n";
    for (const RatioRow& row : rows) {
        out += row.granularity + "," + std::to_string(row.with_count) + "," +
               std::to_string(row.total) + "," + format_hundredths(row.ratio_hundredths) + "\n";
    }
    return out;
}

nlohmann::json RatioReport::to_json() const {
    nlohmann::json obj = nlohmann::json::object();
    for (const RatioRow& row : rows) {
        obj[row.granularity] = {{value_column, row.with_count},
                                {"total", row.total},
                                {"ratio_pct", hundredths_to_double(row.ratio_hundredths)}};
    }
    return obj;
}

std::string RatioReport::to_markdown(const std::string& count_heading) const {
    std::string out = "| Granularity | " + count_heading + " | Total | Ratio(%) |\n";
    out += "|---|---|---|---|\n";
    for (const RatioRow& row : rows) {
        out += "| " + row.granularity + " | " + std::to_string(row.with_count) + " | " +
               std::to_string(row.total) + " | " + format_hundredths(row.ratio_hundredths) +
               " |\n";
    }
    return out;
}

} // namespace cotrap
