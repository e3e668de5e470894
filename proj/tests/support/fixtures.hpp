#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "equirec/content.hpp"
#include "equirec/hybrid.hpp"
#include "equirec/model.hpp"

namespace equirec::testing {

/// Checked-in fixture directory (tests/data).
std::filesystem::path data_dir();

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "equirec");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Recursively compares two directory trees byte for byte. Returns an empty
/// string when equal, else a description of the first difference.
std::string diff_trees(const std::filesystem::path& a, const std::filesystem::path& b);

EntityNode node(NodeId id, NodeKind kind);
EntityNode student(NodeId id, GradeBand band = GradeBand::High);
ProtectedProfile profile(NodeId id, Gender gender, int race = 1, ParentStatus parents = ParentStatus::MotherAndFather,
                         bool immigrant = false);

/// The worked example graph: one student, two interests, an aptitude and
/// six targets, one of them rejected.
Dataset worked_example_dataset();

/// Two equal-cost routes to one Book against a single stronger route to a
/// Video: scores 2 * 0.64 = 1.28 and 0.9.
Dataset diamond_dataset();

/// Seeded random graph with at most `max_nodes` nodes: one centre student,
/// sometimes a second student, mixed kinds, weights drawn from a small set so
/// that equal-cost paths are common, and a little history (rejections,
/// earlier suggestions, reactions).
Dataset random_graph(std::uint64_t seed, std::size_t max_nodes = 12);
inline const NodeId kRandomCenter = "s-center";

struct OracleResult {
    NodeId target_id;
    std::vector<NodeId> best_path;  // lexicographically smallest optimal path
    double path_weight = 0.0;
    double min_cost = 0.0;
    std::size_t n_optimal = 0;
};

/// Exhaustive simple-path enumeration straight from the dataset: traversal
/// rules and reachability within `radius` hops are re-derived here, not taken
/// from the library. Sorted by target id.
std::vector<OracleResult> brute_force_paths(const Dataset& dataset, const NodeId& center, int radius,
                                            double tolerance = 1e-9);

/// Reaction log realising the seven flagged cells of the reference audit
/// table: one cohort per category (10 students per cell, 10 reactions each)
/// with only the stratifying attributes varying inside a cohort.
Dataset flagged_audit_dataset();

struct ExpectedFlag {
    ProtectedVariable variable;
    NodeKind category;
    double variation;
};
std::vector<ExpectedFlag> flagged_audit_cells();

/// Students sharing one profile inside a category cohort. Each member reacts
/// `per_student` times unless `reactions` lists per-member counts; the
/// cell's positives are dealt round-robin over members with room left.
struct CohortCell {
    ProtectedProfile profile;
    std::size_t students = 10;
    std::size_t positives = 0;
    std::vector<std::size_t> reactions;
};
void add_category_cohort(Dataset& dataset, const std::string& prefix, NodeKind category,
                         const std::vector<CohortCell>& cells, std::size_t per_student = 10);

/// Three users, ten Books: u1 gets [A,B,C] with A and C liked, u2 gets [B,D]
/// with B disliked and D liked, u3 gets [B] without reacting.
Dataset metrics_dataset();

/// Four students, two per gender, k = 2, four candidates each. Both F lists
/// carry two Volunteering items in the top-2, the M lists none.
struct RerankFixture {
    Dataset dataset;
    std::vector<CandidateList> lists;
    std::size_t k = 2;
};
RerankFixture rerank_fixture();

}  // namespace equirec::testing
