#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "equirec/model.hpp"

namespace equirec {

inline constexpr double kDefaultDeltaP = 0.1;
inline constexpr std::size_t kDefaultMinActiveUsers = 10;

// Slack when comparing a variation against delta_p.
inline constexpr double kVariationTolerance = 1e-9;

struct AuditConfig {
    ProtectedVariable variable = ProtectedVariable::Gender;
    double delta_p = kDefaultDeltaP;
    std::size_t n_sample = kDefaultMinActiveUsers;
    std::vector<NodeKind> categories;  // empty = every target kind

    /// Throws ConfigError unless delta_p in (0,1) and n_sample >= 1.
    void check() const;
    std::vector<NodeKind> resolved_categories() const;
};

struct GroupCell {
    std::string group;
    NodeKind category = NodeKind::Book;
    double precision = 0.0;
    std::size_t n_active_users = 0;
    std::size_t n_positive = 0;
    std::size_t n_negative = 0;
};

struct ExcludedCell {
    std::string group;
    NodeKind category = NodeKind::Book;
    std::size_t n_active_users = 0;
};

using GroupPrecision = std::variant<GroupCell, ExcludedCell>;

using GroupPair = std::pair<std::string, std::string>;

struct AuditFlag {
    NodeKind category = NodeKind::Book;
    GroupPair group_pair;
    double variation = 0.0;
};

enum class CategoryStatus { Fair, Flagged, Vacuous };
std::string_view to_string(CategoryStatus status);

struct CategorySummary {
    NodeKind category = NodeKind::Book;
    CategoryStatus status = CategoryStatus::Vacuous;
    std::size_t n_gated_groups = 0;
    std::optional<double> max_variation;  // over all gated pairs
};

struct TargetCount {
    NodeId target_id;
    std::size_t count = 0;
};

struct GroupReactionRanking {
    std::string group;
    std::vector<TargetCount> negative;  // by count desc, then id
    std::vector<TargetCount> positive;
};

struct UniqueReaction {
    NodeId target_id;
    std::string group;
    std::size_t count = 0;
};

struct ReasoningComparison {
    NodeId target_id;
    // Distinct reasoning paths without the leading student node; an empty
    // path stands for a collaborative (matrix) suggestion.
    std::map<std::string, std::vector<std::vector<NodeId>>> paths;
    bool identical = false;
};

struct DrilldownReport {
    NodeKind category = NodeKind::Book;
    GroupPair group_pair;
    std::vector<GroupReactionRanking> top_reactions_by_rank;
    std::vector<UniqueReaction> unique_negatives;
    std::vector<UniqueReaction> unique_positives;
    std::vector<ReasoningComparison> reasoning_comparison;
};

struct AuditReport {
    AuditConfig config;
    std::vector<GroupCell> cells;
    std::vector<AuditFlag> flags;
    std::vector<ExcludedCell> excluded;
    std::vector<CategorySummary> categories;
    std::vector<std::string> warnings;
    std::vector<DrilldownReport> drilldowns;
};

/// Precision of one group within one category over its active users (group
/// members with at least one reaction on a suggestion of the category), or
/// the exclusion when fewer than n_sample are active.
GroupPrecision group_precision(const Dataset& dataset, std::span<const Suggestion> suggestions,
                               ProtectedVariable variable, std::string_view group, NodeKind category,
                               std::size_t n_sample = kDefaultMinActiveUsers);

/// Compares every unordered pair of gated groups per category and drills
/// into each pair whose precision gap exceeds delta_p.
AuditReport run_audit(const Dataset& dataset, std::span<const Suggestion> suggestions, const AuditConfig& config);

/// Throws NoReactions when neither group reacted in the category.
DrilldownReport drilldown(const Dataset& dataset, std::span<const Suggestion> suggestions,
                          ProtectedVariable variable, NodeKind category, const GroupPair& group_pair);

nlohmann::ordered_json audit_to_json(const AuditReport& report);
std::string audit_to_markdown(std::span<const AuditReport> reports);

}  // namespace equirec
