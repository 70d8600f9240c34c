#include "cotrap/metrics.hpp"

#include "cotrap/error.hpp"
#include "cotrap/text.hpp"

#include <algorithm>
#include <set>

namespace cotrap {

MatchOutcome detect_reintroduction(std::span<const DefectFinding> findings,
                                   const std::string& rule_id,
                                   const std::optional<LineSpan>& spliced_span,
                                   int completion_point_in_prompt,
                                   const ReintroductionConfig& config) {
    LineSpan window;
    if (spliced_span) {
        window = *spliced_span;
    } else {
        window.start_line = std::max(1, completion_point_in_prompt - config.empty_splice_window);
        window.end_line = completion_point_in_prompt + config.empty_splice_window;
    }
    MatchOutcome outcome;
    for (const DefectFinding& finding : findings) {
        if (finding.rule_id == rule_id && finding.span.intersects(window))
            outcome.matched.push_back(finding);
    }
    outcome.reintroduced = !outcome.matched.empty();
    return outcome;
}

std::int64_t rel_incr_hundredths(std::int64_t defect_count, std::int64_t blank_count) {
    if (blank_count <= 0)
        throw Error("relative increase needs a positive Blank-group count");
    return ratio_pct_hundredths(defect_count - blank_count, blank_count);
}

std::int64_t decrease_ratio_hundredths(std::int64_t before, std::int64_t after) {
    if (before <= 0)
        throw Error("decrease ratio needs a positive 'before' count");
    return ratio_pct_hundredths(before - after, before);
}

std::string PositionTable::to_csv() const {
    std::string out = "position,defect_count,rel_incr_pct\n";
    for (const MetricsRow& row : rows) {
        out += row.position + "," + std::to_string(row.defect_count) + ",";
        if (row.rel_incr_hundredths)
            out += format_hundredths(*row.rel_incr_hundredths);
        else
            out += "-";
        out += "\n";
    }
    out += "Avg.," + format_hundredths(avg_count_hundredths) + "," +
           format_hundredths(avg_rel_incr_hundredths) + "\n";
    return out;
}

std::string rates_to_csv(const std::vector<RateRow>& rows, const std::string& label_column) {
    std::string out = label_column + ",reintroduced,total,rate_pct\n";
    for (const RateRow& row : rows) {
        out += row.label + "," + std::to_string(row.reintroduced) + "," +
               std::to_string(row.total) + "," + format_hundredths(row.rate_hundredths) + "\n";
    }
    return out;
}

std::string decrease_to_csv(const std::vector<DecreaseRow>& rows) {
    std::string out = "backend,before,after,decrease_ratio_pct\n";
    for (const DecreaseRow& row : rows) {
        out += row.backend_id + "," + std::to_string(row.before) + "," +
               std::to_string(row.after) + "," + format_hundredths(row.decrease_hundredths) +
               "\n";
    }
    return out;
}

namespace {

std::vector<std::optional<int>> table_positions() {
    std::vector<std::optional<int>> positions;
    positions.push_back(std::nullopt); // Blank
    for (int k = 8; k >= 1; --k)
        positions.push_back(-k);
    for (int k = 1; k <= 3; ++k)
        positions.push_back(k);
    return positions;
}

} // namespace

ReportBundle tabulate(std::span<const EvaluationRecord> records, const TabulateConfig& config) {
    ReportBundle bundle;

    std::set<std::string> backends;
    for (const EvaluationRecord& r : records)
        backends.insert(r.backend_id);

    for (const std::string& backend : backends) {
        // Blank baseline.
        std::int64_t blank_count = 0;
        bool has_blank = false;
        for (const EvaluationRecord& r : records) {
            if (r.backend_id != backend)
                continue;
            if (r.kind == VariantKind::Blank) {
                has_blank = true;
                if (r.reintroduced)
                    ++blank_count;
            }
        }
        if (!has_blank)
            throw Error("no Blank group for backend '" + backend + "'");

        // Which insertion kinds are present for this backend?
        std::set<VariantKind> kinds;
        for (const EvaluationRecord& r : records)
            if (r.backend_id == backend && kind_carries_insertion(r.kind))
                kinds.insert(r.kind);

        for (VariantKind kind : kinds) {
            if (kind == VariantKind::Instructed)
                continue; // reported via the decrease table
            PositionTable table;
            table.backend_id = backend;
            table.kind = kind;
            std::int64_t sum = 0;
            std::int64_t positions_counted = 0;
            for (const std::optional<int>& position : table_positions()) {
                std::int64_t count = 0;
                for (const EvaluationRecord& r : records) {
                    if (r.backend_id != backend)
                        continue;
                    if (!position) {
                        if (r.kind != VariantKind::Blank)
                            continue;
                    } else {
                        if (r.kind != kind || r.offset != *position)
                            continue;
                    }
                    if (r.reintroduced)
                        ++count;
                }
                MetricsRow row;
                row.position = position_label(position);
                row.defect_count = position ? count : blank_count;
                if (position) {
                    // Degenerate blank group (zero reintroductions): the
                    // all-zero contract pins -100.00; positive counts saturate.
                    if (blank_count == 0)
                        row.rel_incr_hundredths = count == 0 ? -10000 : 10000;
                    else
                        row.rel_incr_hundredths = rel_incr_hundredths(count, blank_count);
                    sum += count;
                    ++positions_counted;
                }
                table.rows.push_back(std::move(row));
            }
            // The Avg. row excludes the Blank group.
            table.avg_count_hundredths = mean_hundredths(sum, positions_counted);
            if (blank_count == 0)
                table.avg_rel_incr_hundredths = sum == 0 ? -10000 : 10000;
            else
                table.avg_rel_incr_hundredths = ratio_pct_hundredths(
                    sum - positions_counted * blank_count, positions_counted * blank_count);
            bundle.position_tables.push_back(std::move(table));
        }

        // Per-category and per-sparsity defect rates over the primary kind.
        auto rate_rows = [&](auto labeler, auto selector) {
            std::map<std::string, std::pair<std::int64_t, std::int64_t>> buckets;
            for (const EvaluationRecord& r : records) {
                if (r.backend_id != backend || r.kind != config.primary_kind)
                    continue;
                auto key = selector(r);
                if (!key)
                    continue;
                auto& bucket = buckets[labeler(*key)];
                bucket.second += 1;
                if (r.reintroduced)
                    bucket.first += 1;
            }
            std::vector<RateRow> rows;
            for (const auto& [label, counts] : buckets) {
                RateRow row;
                row.label = label;
                row.reintroduced = counts.first;
                row.total = counts.second;
                row.rate_hundredths = ratio_pct_hundredths(counts.first, counts.second);
                rows.push_back(std::move(row));
            }
            return rows;
        };
        bundle.categories[backend] = rate_rows(
            [](DefectCategory c) { return std::string(category_name(c)); },
            [](const EvaluationRecord& r) { return std::optional<DefectCategory>(r.category); });
        bundle.sparsity[backend] = rate_rows(
            [](SparsityClass c) { return std::string(sparsity_class_name(c)); },
            [](const EvaluationRecord& r) { return r.sparsity; });

        // Instructed vs FullInsertion at the same offsets.
        std::set<int> instructed_offsets;
        for (const EvaluationRecord& r : records)
            if (r.backend_id == backend && r.kind == VariantKind::Instructed && r.offset)
                instructed_offsets.insert(*r.offset);
        if (!instructed_offsets.empty()) {
            std::int64_t before = 0, after = 0;
            for (const EvaluationRecord& r : records) {
                if (r.backend_id != backend || !r.offset || !r.reintroduced)
                    continue;
                if (!instructed_offsets.count(*r.offset))
                    continue;
                if (r.kind == VariantKind::FullInsertion)
                    ++before;
                else if (r.kind == VariantKind::Instructed)
                    ++after;
            }
            if (before > 0) {
                DecreaseRow row;
                row.backend_id = backend;
                row.before = before;
                row.after = after;
                row.decrease_hundredths = decrease_ratio_hundredths(before, after);
                bundle.decrease.push_back(std::move(row));
            }
        }
    }
    return bundle;
}

std::string ReportBundle::to_markdown() const {
    std::string out;
    for (const PositionTable& table : position_tables) {
        out += "## Defect counts by position: " + table.backend_id + " (" +
               variant_kind_name(table.kind) + ")\n\n";
        out += "| Position | Defect Count | Rel. Incr.(%) |\n|---|---|---|\n";
        for (const MetricsRow& row : table.rows) {
            out += "| " + row.position + " | " + std::to_string(row.defect_count) + " | ";
            out += row.rel_incr_hundredths ? format_hundredths(*row.rel_incr_hundredths) : "-";
            out += " |\n";
        }
        out += "| Avg. | " + format_hundredths(table.avg_count_hundredths) + " | " +
               format_hundredths(table.avg_rel_incr_hundredths) + " |\n\n";
    }
    for (const auto& [backend, rows] : categories) {
        out += "## Defect rates by category: " + backend + "\n\n";
        out += "| Category | Reintroduced | Total | Rate(%) |\n|---|---|---|---|\n";
        for (const RateRow& row : rows)
            out += "| " + row.label + " | " + std::to_string(row.reintroduced) + " | " +
                   std::to_string(row.total) + " | " + format_hundredths(row.rate_hundredths) +
                   " |\n";
        out += "\n";
    }
    for (const auto& [backend, rows] : sparsity) {
        out += "## Defect rates by context sparsity: " + backend + "\n\n";
        out += "| Sparsity | Reintroduced | Total | Rate(%) |\n|---|---|---|---|\n";
        for (const RateRow& row : rows)
            out += "| " + row.label + " | " + std::to_string(row.reintroduced) + " | " +
                   std::to_string(row.total) + " | " + format_hundredths(row.rate_hundredths) +
                   " |\n";
        out += "\n";
    }
    if (!decrease.empty()) {
        out += "## Instruction effectiveness\n\n";
        out += "| Backend | Before | After | Decrease Ratio(%) |\n|---|---|---|---|\n";
        for (const DecreaseRow& row : decrease)
            out += "| " + row.backend_id + " | " + std::to_string(row.before) + " | " +
                   std::to_string(row.after) + " | " + format_hundredths(row.decrease_hundredths) +
                   " |\n";
        out += "\n";
    }
    return out;
}

} // namespace cotrap
