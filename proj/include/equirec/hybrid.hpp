#pragma once

#include <span>
#include <string>
#include <vector>

#include "equirec/model.hpp"

namespace equirec {

/// Bonus added to targets selected by both recommenders; normalized
/// single-source scores never exceed 1, so dual picks always lead.
inline constexpr double kBothSourceBonus = 1.0;

/// Min-max normalizes each source, fuses shared targets into one Both entry
/// (content reasoning and confidence kept), sorts and truncates.
/// Throws StudentMismatch if the lists are not all for one student.
std::vector<Suggestion> merge_rerank(std::span<const Suggestion> content, std::span<const Suggestion> collab,
                                     std::size_t k_final);

/// One student's full ranked candidate list; the first `k` items are the
/// delivered top-k, the rest sit below the cut.
struct CandidateList {
    NodeId student_id;
    std::vector<Suggestion> items;
};

struct RerankSwap {
    NodeId student_id;
    NodeId removed_target;  // in-category item pushed below the cut
    NodeId added_target;    // out-of-category item promoted into the top-k
    double score_loss = 0.0;
};

struct RerankResult {
    std::vector<CandidateList> lists;
    double gap_before = 0.0;
    double gap_after = 0.0;
    bool feasible = true;  // false when swaps ran out above max_gap
    std::vector<RerankSwap> swaps;
};

/// Largest difference between groups of `variable` in the mean number of
/// `category` items per student within the top-k. 0 with fewer than two groups.
/// Throws MissingProfile.
double exposure_gap(std::span<const CandidateList> lists, std::size_t k, const Dataset& dataset,
                    ProtectedVariable variable, NodeKind category);

/// Greedy swap heuristic: while the exposure gap exceeds max_gap, demote the
/// lowest-scored in-category item of the over-exposed group in favour of the
/// best out-of-category item below the cut, choosing the cheapest swap.
RerankResult fairness_rerank(std::span<const CandidateList> lists, std::size_t k, const Dataset& dataset,
                             ProtectedVariable variable, NodeKind category, double max_gap);

}  // namespace equirec
