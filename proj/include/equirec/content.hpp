#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string_view>
#include <vector>

#include "equirec/model.hpp"

namespace equirec {

inline constexpr int kDefaultRadius = 3;
inline constexpr std::size_t kMaxShortestPathCount = 1000;
inline constexpr double kCostTieTolerance = 1e-9;

/// Induced subgraph around one student. Node indices follow sorted id order,
/// so comparing index sequences is comparing id sequences.
struct Neighborhood {
    struct Arc {
        std::uint32_t to;
        double weight;
    };

    NodeId center;
    std::uint32_t center_index = 0;
    std::vector<NodeId> ids;
    std::vector<NodeKind> kinds;
    std::vector<std::vector<Arc>> adjacency;  // each list sorted by `to`
    std::vector<bool> blocked;                // targets that may not be suggested again

    std::size_t node_count() const { return ids.size(); }
    std::size_t edge_count() const;
    bool contains(std::string_view id) const;
};

struct PathResult {
    NodeId target_id;
    std::vector<NodeId> best_path;
    double path_weight = 0.0;  // product of edge weights along best_path
    double min_cost = 0.0;     // sum of -ln(weight) along best_path
    std::size_t n_shortest_simple_paths = 0;
    bool count_truncated = false;  // count hit the enumeration cap
    double score = 0.0;            // path_weight * n_shortest_simple_paths
};

struct RankOptions {
    std::size_t max_path_count = kMaxShortestPathCount;
    double tie_tolerance = kCostTieTolerance;
    // Work limit for the single-pass enumeration before falling back to
    // per-target searches.
    std::size_t enumeration_budget = 200'000;
};

/// Adjacency and per-student history of a dataset, built once and shared by
/// every neighborhood extraction. Read-only after construction.
class ContentIndex {
public:
    explicit ContentIndex(const Dataset& dataset);

    /// Nodes within `radius` hops of the student. Rejected edges and other
    /// students are never traversed. Throws UnknownStudent.
    Neighborhood extract(std::string_view student_id, int radius) const;

private:
    struct Arc {
        std::uint32_t to;
        double weight;
        EdgeKind kind;
    };

    std::uint32_t index_of(std::string_view id) const;

    const Dataset* dataset_;
    std::vector<std::vector<Arc>> adjacency_;
    std::map<NodeId, std::set<NodeId>, std::less<>> suggested_;
    std::map<NodeId, std::set<NodeId>, std::less<>> rejected_;
};

Neighborhood extract_neighborhood(const Dataset& dataset, std::string_view student_id, int radius);

/// Candidate targets ordered by score, then path weight, then id.
std::vector<PathResult> rank_targets(const Neighborhood& subgraph, std::string_view student_id,
                                     const RankOptions& options = {});

std::vector<Suggestion> to_content_suggestions(std::span<const PathResult> ranked, std::string_view student_id,
                                               std::size_t k, Timestamp ts);

std::vector<Suggestion> content_recommend(const Dataset& dataset, std::string_view student_id, int radius,
                                          std::size_t k, Timestamp ts);

}  // namespace equirec
