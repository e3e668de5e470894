#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "equirec/model.hpp"

namespace equirec {

/// Fraction of `targets` suggested at least once. Throws EmptyTargetSet.
double coverage(std::span<const Suggestion> suggestions, std::span<const NodeId> targets);

struct ReactionCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t reacted() const { return positives + negatives; }
};

/// Latest-reaction polarity of each distinct suggested (student, target) pair
/// that has one. Shared by the metrics and the fairness audit.
ReactionCounts count_reactions(std::span<const Suggestion> suggestions, const ReactionIndex& reactions);

/// positives / reacted over the suggested pairs; nullopt when none reacted.
std::optional<double> precision(std::span<const Suggestion> suggestions, const ReactionIndex& reactions);

struct RankedList {
    NodeId student_id;
    std::vector<NodeId> targets;  // delivery order
};

/// Per-student lists in log order, first occurrence of each target kept.
std::vector<RankedList> ranked_lists(std::span<const Suggestion> suggestions);

/// Mean AP over students with at least one reacted item (within the cutoff).
std::optional<double> mean_average_precision(std::span<const RankedList> lists, const ReactionIndex& reactions,
                                             std::optional<std::size_t> cutoff = std::nullopt);

/// 1 - mean pairwise Jaccard of the students' target sets; needs >= 2 lists.
std::optional<double> personalization_rate(std::span<const RankedList> lists);

struct MetricReport {
    std::optional<NodeKind> category;  // nullopt = All
    std::optional<GradeBand> grade_band;
    double coverage = 0.0;
    std::optional<double> precision;
    std::optional<double> map;
    std::optional<double> personalization;
    std::size_t n_suggestions = 0;
    std::size_t n_reacted = 0;
    std::size_t n_users = 0;
};

/// One report per (category or All) x (grade band or All) cell that has any
/// suggestion, All first, then declaration order.
std::vector<MetricReport> metric_sweep(const Dataset& dataset, std::span<const Suggestion> suggestions);

nlohmann::ordered_json metrics_to_json(std::span<const MetricReport> reports);
std::string format_metric_table(std::span<const MetricReport> reports);

}  // namespace equirec
