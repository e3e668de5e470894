#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "equirec/error.hpp"

namespace equirec {

using NodeId = std::string;
using Timestamp = std::int64_t;

enum class NodeKind {
    Student,
    Interest,
    Aptitude,
    Book,
    Video,
    Course,
    Activity,
    Extracurricular,
    Certification,
    Volunteering,
    Major,
};

enum class GradeBand { Elementary, Middle, High };

enum class EdgeKind { SimilarTo, SubsetOf, AppliesTo, Exhibits, Accepted, Rejected, Suggested };

enum class Polarity { Positive, Negative };

enum class SuggestionSource { Content, Collab, Both };

enum class Gender { F, M };

enum class ParentStatus { MotherOnly, FatherOnly, MotherAndFather, Other };

std::string_view to_string(NodeKind kind);
std::string_view to_string(GradeBand band);
std::string_view to_string(EdgeKind kind);
std::string_view to_string(Polarity polarity);
std::string_view to_string(SuggestionSource source);
std::string_view to_string(Gender gender);
std::string_view to_string(ParentStatus status);

std::optional<NodeKind> parse_node_kind(std::string_view text);
std::optional<GradeBand> parse_grade_band(std::string_view text);
std::optional<EdgeKind> parse_edge_kind(std::string_view text);
std::optional<Polarity> parse_polarity(std::string_view text);
std::optional<SuggestionSource> parse_source(std::string_view text);
std::optional<Gender> parse_gender(std::string_view text);
std::optional<ParentStatus> parse_parent_status(std::string_view text);

/// Recommendable resource kinds, in declaration order.
std::span<const NodeKind> target_kinds();
std::span<const GradeBand> grade_bands();

constexpr bool is_target_kind(NodeKind kind) {
    return kind != NodeKind::Student && kind != NodeKind::Interest && kind != NodeKind::Aptitude;
}

struct EntityNode {
    NodeId id;
    NodeKind kind = NodeKind::Interest;
    std::string label;
    std::optional<GradeBand> grade_band;  // present iff kind == Student

    bool operator==(const EntityNode&) const = default;
};

/// Undirected weighted edge stored with src < dst.
struct GraphEdge {
    NodeId src;
    NodeId dst;
    EdgeKind kind = EdgeKind::SimilarTo;
    double weight = 1.0;

    bool operator==(const GraphEdge&) const = default;
};

/// Builds an edge with endpoints in canonical (lexicographic) order.
GraphEdge make_edge(NodeId a, NodeId b, EdgeKind kind, double weight);

struct Reaction {
    NodeId student_id;
    NodeId target_id;
    Polarity polarity = Polarity::Positive;
    Timestamp ts = 0;

    bool operator==(const Reaction&) const = default;
};

struct Suggestion {
    NodeId student_id;
    NodeId target_id;
    SuggestionSource source = SuggestionSource::Content;
    double confidence = 1.0;
    std::vector<NodeId> reasoning;
    double score = 0.0;
    Timestamp ts = 0;

    bool operator==(const Suggestion&) const = default;
};

struct ProtectedProfile {
    NodeId student_id;
    Gender gender = Gender::F;
    int race_code = 1;  // opaque code 1..5
    ParentStatus has_parents = ParentStatus::Other;
    bool is_homeless = false;
    bool is_migrant = false;
    bool is_immigrant = false;
    bool is_foster = false;
    bool is_gifted = false;

    bool operator==(const ProtectedProfile&) const = default;
};

/// Nodes, edges and profiles are kept sorted by key; the two logs keep
/// append order.
struct Dataset {
    std::vector<EntityNode> nodes;
    std::vector<GraphEdge> edges;
    std::vector<ProtectedProfile> profiles;
    std::vector<Reaction> reactions;
    std::vector<Suggestion> suggestions;

    bool operator==(const Dataset&) const = default;

    const EntityNode* find_node(std::string_view id) const;
    const ProtectedProfile* find_profile(std::string_view student_id) const;
    GraphEdge* find_edge(std::string_view a, std::string_view b);
    const GraphEdge* find_edge(std::string_view a, std::string_view b) const;

    /// Inserts or replaces the edge for the same unordered pair, keeping order.
    void upsert_edge(GraphEdge edge);

    /// One past the largest timestamp in either log (0 for empty logs).
    Timestamp next_timestamp() const;

    std::vector<NodeId> student_ids() const;
};

/// Restores sorted order of nodes, edges and profiles.
void normalize(Dataset& dataset);

/// Throws IntegrityError on dangling references, out-of-range weights,
/// duplicates, self-loops or grade-band misuse.
void validate(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Protected attributes

enum class ProtectedVariable {
    Gender,
    RaceCode,
    HasParents,
    IsHomeless,
    IsMigrant,
    IsImmigrant,
    IsFoster,
    IsGifted,
};

std::span<const ProtectedVariable> protected_variables();
std::string_view to_string(ProtectedVariable variable);

/// Accepts the display name ("IsImmigrant") or snake case ("is_immigrant"),
/// case-insensitively. Throws UnknownVariable.
ProtectedVariable parse_protected_variable(std::string_view text);

/// Group labels of a variable, in canonical order ("F","M"; "1".."5"; ...).
std::vector<std::string> group_labels(ProtectedVariable variable);
std::string group_of(const ProtectedProfile& profile, ProtectedVariable variable);

// ---------------------------------------------------------------------------
// Reaction log lookups

struct PairKey {
    NodeId student_id;
    NodeId target_id;
    auto operator<=>(const PairKey&) const = default;
};

/// Latest reaction per (student, target); later log entries win on equal ts.
class ReactionIndex {
public:
    ReactionIndex() = default;
    explicit ReactionIndex(std::span<const Reaction> reactions);

    std::optional<Polarity> latest(std::string_view student, std::string_view target) const;
    const std::map<PairKey, Reaction>& entries() const { return latest_; }

private:
    std::map<PairKey, Reaction> latest_;
};

}  // namespace equirec
