#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "equirec/collab.hpp"
#include "equirec/content.hpp"
#include "equirec/hybrid.hpp"
#include "equirec/model.hpp"

namespace equirec {

// Smallest weight that survives the 6-decimal edges.csv format.
inline constexpr double kMinEdgeWeight = 1e-6;

struct RecommendOptions {
    int radius = kDefaultRadius;
    std::size_t top_k = 10;
    std::uint64_t seed = 0;
    std::size_t max_iter = 200;
    double rel_tol = 1e-4;
    std::optional<std::size_t> rank;  // default min(16, m, n)
    std::size_t jobs = 1;             // worker threads for per-student work
};

struct RecommendRound {
    std::vector<Suggestion> suggestions;  // grouped by student, rank order within
    ReactionMatrix matrix;
    std::optional<FactorPair> factors;  // absent when no reactions exist yet
};

/// Content and collaborative candidates per student, merged and truncated
/// to top_k. `depth` overrides how many merged items are kept (for
/// re-ranking below the cut).
RecommendRound recommend(const Dataset& dataset, std::span<const NodeId> students, const RecommendOptions& options,
                         std::optional<std::size_t> depth = std::nullopt);

/// Appends suggestions to the log and adds a Suggested edge for each pair
/// that has no edge yet (weight = confidence, floored at kMinEdgeWeight).
void record_suggestions(Dataset& dataset, std::span<const Suggestion> suggestions);

/// Regroups a flat suggestion list into per-student candidate lists.
std::vector<CandidateList> group_by_student(std::span<const Suggestion> suggestions);

}  // namespace equirec
