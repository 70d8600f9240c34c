#pragma once

#include "cotrap/defect_adapter.hpp"
#include "cotrap/generation.hpp"
#include "cotrap/prompt_forge.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cotrap {

struct ReintroductionConfig {
    int empty_splice_window = 3; // +/- lines around the completion point
};

struct MatchOutcome {
    bool reintroduced = false;
    std::vector<DefectFinding> matched;
};

/// A finding reintroduces the sample's defect when its rule id matches and
/// its span intersects the spliced region. For empty splices the window is
/// +/- empty_splice_window lines around the completion point.
MatchOutcome detect_reintroduction(std::span<const DefectFinding> findings,
                                   const std::string& rule_id,
                                   const std::optional<LineSpan>& spliced_span,
                                   int completion_point_in_prompt,
                                   const ReintroductionConfig& config = {});

/// ((count - blank) / blank) * 100, in hundredths, half-up. blank must be > 0.
std::int64_t rel_incr_hundredths(std::int64_t defect_count, std::int64_t blank_count);
/// ((before - after) / before) * 100, in hundredths, half-up. before > 0.
std::int64_t decrease_ratio_hundredths(std::int64_t before, std::int64_t after);

struct EvaluationRecord {
    std::string sample_id;
    VariantKind kind = VariantKind::Blank;
    std::optional<int> offset;
    std::string backend_id;
    bool reintroduced = false;
    std::vector<DefectFinding> matched_findings;
    std::optional<SparsityClass> sparsity;
    DefectCategory category = DefectCategory::Defect;
};

struct MetricsRow {
    std::string position; // Blank, Above8line..Above1line, Below1line..Below3line
    std::int64_t defect_count = 0;
    std::optional<std::int64_t> rel_incr_hundredths; // absent for Blank
};

struct PositionTable {
    std::string backend_id;
    VariantKind kind = VariantKind::FullInsertion;
    std::vector<MetricsRow> rows;           // Blank first, then the 11 positions
    std::int64_t avg_count_hundredths = 0;  // mean defect count over non-Blank rows
    std::int64_t avg_rel_incr_hundredths = 0;

    std::string to_csv() const; // position,defect_count,rel_incr_pct
};

struct RateRow {
    std::string label;
    std::int64_t reintroduced = 0;
    std::int64_t total = 0;
    std::int64_t rate_hundredths = 0;
};

struct DecreaseRow {
    std::string backend_id;
    std::int64_t before = 0;
    std::int64_t after = 0;
    std::int64_t decrease_hundredths = 0;
};

struct ReportBundle {
    std::vector<PositionTable> position_tables;            // per backend x insertion kind
    std::map<std::string, std::vector<RateRow>> categories; // backend -> category rates
    std::map<std::string, std::vector<RateRow>> sparsity;   // backend -> sparsity rates
    std::vector<DecreaseRow> decrease;                      // Instructed vs FullInsertion

    std::string to_markdown() const;
};

struct TabulateConfig {
    /// Kind whose per-position table is the headline table for each backend.
    VariantKind primary_kind = VariantKind::FullInsertion;
};

/// Aggregates evaluation records into the report bundle. Every backend being
/// tabulated must have a Blank group. The Avg. row excludes Blank.
ReportBundle tabulate(std::span<const EvaluationRecord> records,
                      const TabulateConfig& config = {});

std::string rates_to_csv(const std::vector<RateRow>& rows, const std::string& label_column);
std::string decrease_to_csv(const std::vector<DecreaseRow>& rows);

} // namespace cotrap
