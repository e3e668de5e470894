#include "equirec/model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include <fmt/format.h>

namespace equirec {

namespace {

template <typename Enum, std::size_t N>
using NameTable = std::array<std::pair<Enum, std::string_view>, N>;

constexpr NameTable<ErrorCode, 18> kErrorNames{{
    {ErrorCode::MissingFile, "MissingFile"},
    {ErrorCode::SchemaError, "SchemaError"},
    {ErrorCode::IntegrityError, "IntegrityError"},
    {ErrorCode::IoError, "IoError"},
    {ErrorCode::DimensionMismatch, "DimensionMismatch"},
    {ErrorCode::ZeroVector, "ZeroVector"},
    {ErrorCode::MissingEmbedding, "MissingEmbedding"},
    {ErrorCode::UnknownSuggestion, "UnknownSuggestion"},
    {ErrorCode::UnknownStudent, "UnknownStudent"},
    {ErrorCode::RankTooLarge, "RankTooLarge"},
    {ErrorCode::StudentMismatch, "StudentMismatch"},
    {ErrorCode::MissingProfile, "MissingProfile"},
    {ErrorCode::UnknownVariable, "UnknownVariable"},
    {ErrorCode::UnknownGroup, "UnknownGroup"},
    {ErrorCode::EmptyTargetSet, "EmptyTargetSet"},
    {ErrorCode::NoReactions, "NoReactions"},
    {ErrorCode::ConfigError, "ConfigError"},
    {ErrorCode::GapInfeasible, "GapInfeasible"},
}};

constexpr NameTable<NodeKind, 11> kNodeKindNames{{
    {NodeKind::Student, "Student"},
    {NodeKind::Interest, "Interest"},
    {NodeKind::Aptitude, "Aptitude"},
    {NodeKind::Book, "Book"},
    {NodeKind::Video, "Video"},
    {NodeKind::Course, "Course"},
    {NodeKind::Activity, "Activity"},
    {NodeKind::Extracurricular, "Extracurricular"},
    {NodeKind::Certification, "Certification"},
    {NodeKind::Volunteering, "Volunteering"},
    {NodeKind::Major, "Major"},
}};

constexpr NameTable<GradeBand, 3> kGradeNames{{
    {GradeBand::Elementary, "Elementary"},
    {GradeBand::Middle, "Middle"},
    {GradeBand::High, "High"},
}};

constexpr NameTable<EdgeKind, 7> kEdgeKindNames{{
    {EdgeKind::SimilarTo, "SimilarTo"},
    {EdgeKind::SubsetOf, "SubsetOf"},
    {EdgeKind::AppliesTo, "AppliesTo"},
    {EdgeKind::Exhibits, "Exhibits"},
    {EdgeKind::Accepted, "Accepted"},
    {EdgeKind::Rejected, "Rejected"},
    {EdgeKind::Suggested, "Suggested"},
}};

constexpr NameTable<Polarity, 2> kPolarityNames{{
    {Polarity::Positive, "Positive"},
    {Polarity::Negative, "Negative"},
}};

constexpr NameTable<SuggestionSource, 3> kSourceNames{{
    {SuggestionSource::Content, "Content"},
    {SuggestionSource::Collab, "Collab"},
    {SuggestionSource::Both, "Both"},
}};

constexpr NameTable<Gender, 2> kGenderNames{{{Gender::F, "F"}, {Gender::M, "M"}}};

constexpr NameTable<ParentStatus, 4> kParentNames{{
    {ParentStatus::MotherOnly, "MotherOnly"},
    {ParentStatus::FatherOnly, "FatherOnly"},
    {ParentStatus::MotherAndFather, "MotherAndFather"},
    {ParentStatus::Other, "Other"},
}};

constexpr NameTable<ProtectedVariable, 8> kVariableNames{{
    {ProtectedVariable::Gender, "Gender"},
    {ProtectedVariable::RaceCode, "RaceCode"},
    {ProtectedVariable::HasParents, "HasParents"},
    {ProtectedVariable::IsHomeless, "IsHomeless"},
    {ProtectedVariable::IsMigrant, "IsMigrant"},
    {ProtectedVariable::IsImmigrant, "IsImmigrant"},
    {ProtectedVariable::IsFoster, "IsFoster"},
    {ProtectedVariable::IsGifted, "IsGifted"},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(const NameTable<Enum, N>& table, Enum value) {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "?";
}

template <typename Enum, std::size_t N>
std::optional<Enum> value_of(const NameTable<Enum, N>& table, std::string_view text) {
    for (const auto& [e, name] : table) {
        if (name == text) return e;
    }
    return std::nullopt;
}

constexpr std::array<NodeKind, 8> kTargetKinds{
    NodeKind::Book,          NodeKind::Video,         NodeKind::Course,       NodeKind::Activity,
    NodeKind::Extracurricular, NodeKind::Certification, NodeKind::Volunteering, NodeKind::Major,
};

constexpr std::array<GradeBand, 3> kGradeBands{GradeBand::Elementary, GradeBand::Middle, GradeBand::High};

constexpr std::array<ProtectedVariable, 8> kVariables{
    ProtectedVariable::Gender,      ProtectedVariable::RaceCode,  ProtectedVariable::HasParents,
    ProtectedVariable::IsHomeless,  ProtectedVariable::IsMigrant, ProtectedVariable::IsImmigrant,
    ProtectedVariable::IsFoster,    ProtectedVariable::IsGifted,
};

// Lowercase with underscores removed: "is_immigrant" and "IsImmigrant" collapse.
std::string fold(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (c == '_' || c == '-' || c == ' ') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

std::string_view bool_label(bool value) { return value ? "true" : "false"; }

}  // namespace

std::string_view to_string(ErrorCode code) { return name_of(kErrorNames, code); }
std::string_view to_string(NodeKind kind) { return name_of(kNodeKindNames, kind); }
std::string_view to_string(GradeBand band) { return name_of(kGradeNames, band); }
std::string_view to_string(EdgeKind kind) { return name_of(kEdgeKindNames, kind); }
std::string_view to_string(Polarity polarity) { return name_of(kPolarityNames, polarity); }
std::string_view to_string(SuggestionSource source) { return name_of(kSourceNames, source); }
std::string_view to_string(Gender gender) { return name_of(kGenderNames, gender); }
std::string_view to_string(ParentStatus status) { return name_of(kParentNames, status); }
std::string_view to_string(ProtectedVariable variable) { return name_of(kVariableNames, variable); }

std::optional<NodeKind> parse_node_kind(std::string_view text) { return value_of(kNodeKindNames, text); }
std::optional<GradeBand> parse_grade_band(std::string_view text) { return value_of(kGradeNames, text); }
std::optional<EdgeKind> parse_edge_kind(std::string_view text) { return value_of(kEdgeKindNames, text); }
std::optional<Polarity> parse_polarity(std::string_view text) { return value_of(kPolarityNames, text); }
std::optional<SuggestionSource> parse_source(std::string_view text) { return value_of(kSourceNames, text); }
std::optional<Gender> parse_gender(std::string_view text) { return value_of(kGenderNames, text); }
std::optional<ParentStatus> parse_parent_status(std::string_view text) { return value_of(kParentNames, text); }

std::span<const NodeKind> target_kinds() { return kTargetKinds; }
std::span<const GradeBand> grade_bands() { return kGradeBands; }
std::span<const ProtectedVariable> protected_variables() { return kVariables; }

ProtectedVariable parse_protected_variable(std::string_view text) {
    const std::string folded = fold(text);
    for (const auto& [variable, name] : kVariableNames) {
        if (fold(name) == folded) return variable;
    }
    if (folded == "race") return ProtectedVariable::RaceCode;
    throw Error(ErrorCode::UnknownVariable, fmt::format("'{}' is not a protected variable", text));
}

std::vector<std::string> group_labels(ProtectedVariable variable) {
    switch (variable) {
        case ProtectedVariable::Gender:
            return {"F", "M"};
        case ProtectedVariable::RaceCode:
            return {"1", "2", "3", "4", "5"};
        case ProtectedVariable::HasParents:
            return {"MotherOnly", "FatherOnly", "MotherAndFather", "Other"};
        default:
            return {"false", "true"};
    }
}

std::string group_of(const ProtectedProfile& p, ProtectedVariable variable) {
    switch (variable) {
        case ProtectedVariable::Gender: return std::string(to_string(p.gender));
        case ProtectedVariable::RaceCode: return std::to_string(p.race_code);
        case ProtectedVariable::HasParents: return std::string(to_string(p.has_parents));
        case ProtectedVariable::IsHomeless: return std::string(bool_label(p.is_homeless));
        case ProtectedVariable::IsMigrant: return std::string(bool_label(p.is_migrant));
        case ProtectedVariable::IsImmigrant: return std::string(bool_label(p.is_immigrant));
        case ProtectedVariable::IsFoster: return std::string(bool_label(p.is_foster));
        case ProtectedVariable::IsGifted: return std::string(bool_label(p.is_gifted));
    }
    return {};
}

GraphEdge make_edge(NodeId a, NodeId b, EdgeKind kind, double weight) {
    if (b < a) std::swap(a, b);
    return GraphEdge{std::move(a), std::move(b), kind, weight};
}

// ---------------------------------------------------------------------------
// Dataset

namespace {

bool edge_less(const GraphEdge& x, const GraphEdge& y) {
    return std::tie(x.src, x.dst) < std::tie(y.src, y.dst);
}

}  // namespace

const EntityNode* Dataset::find_node(std::string_view id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const EntityNode& n, std::string_view key) { return n.id < key; });
    return (it != nodes.end() && it->id == id) ? &*it : nullptr;
}

const ProtectedProfile* Dataset::find_profile(std::string_view student_id) const {
    auto it = std::lower_bound(profiles.begin(), profiles.end(), student_id,
                               [](const ProtectedProfile& p, std::string_view key) { return p.student_id < key; });
    return (it != profiles.end() && it->student_id == student_id) ? &*it : nullptr;
}

const GraphEdge* Dataset::find_edge(std::string_view a, std::string_view b) const {
    if (b < a) std::swap(a, b);
    auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{a, b},
                               [](const GraphEdge& e, const std::pair<std::string_view, std::string_view>& key) {
                                   return std::pair<std::string_view, std::string_view>{e.src, e.dst} < key;
                               });
    return (it != edges.end() && it->src == a && it->dst == b) ? &*it : nullptr;
}

GraphEdge* Dataset::find_edge(std::string_view a, std::string_view b) {
    return const_cast<GraphEdge*>(std::as_const(*this).find_edge(a, b));
}

void Dataset::upsert_edge(GraphEdge edge) {
    if (edge.dst < edge.src) std::swap(edge.src, edge.dst);
    auto it = std::lower_bound(edges.begin(), edges.end(), edge, edge_less);
    if (it != edges.end() && it->src == edge.src && it->dst == edge.dst) {
        *it = std::move(edge);
    } else {
        edges.insert(it, std::move(edge));
    }
}

Timestamp Dataset::next_timestamp() const {
    Timestamp latest = -1;
    for (const auto& r : reactions) latest = std::max(latest, r.ts);
    for (const auto& s : suggestions) latest = std::max(latest, s.ts);
    return latest + 1;
}

std::vector<NodeId> Dataset::student_ids() const {
    std::vector<NodeId> ids;
    for (const auto& n : nodes) {
        if (n.kind == NodeKind::Student) ids.push_back(n.id);
    }
    return ids;
}

void normalize(Dataset& dataset) {
    std::stable_sort(dataset.nodes.begin(), dataset.nodes.end(),
                     [](const EntityNode& a, const EntityNode& b) { return a.id < b.id; });
    for (auto& e : dataset.edges) {
        if (e.dst < e.src) std::swap(e.src, e.dst);
    }
    std::stable_sort(dataset.edges.begin(), dataset.edges.end(), edge_less);
    std::stable_sort(dataset.profiles.begin(), dataset.profiles.end(),
                     [](const ProtectedProfile& a, const ProtectedProfile& b) { return a.student_id < b.student_id; });
}

void validate(const Dataset& d) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::IntegrityError, msg); };

    for (std::size_t i = 0; i < d.nodes.size(); ++i) {
        const auto& n = d.nodes[i];
        if (i > 0 && d.nodes[i - 1].id == n.id) fail(fmt::format("duplicate node id '{}'", n.id));
        if ((n.kind == NodeKind::Student) != n.grade_band.has_value()) {
            fail(fmt::format("node '{}': grade_band must be set exactly for students", n.id));
        }
    }
    for (std::size_t i = 0; i < d.edges.size(); ++i) {
        const auto& e = d.edges[i];
        if (e.src == e.dst) fail(fmt::format("self-loop on '{}'", e.src));
        if (!(e.weight > 0.0 && e.weight <= 1.0)) {
            fail(fmt::format("edge {}-{} weight {} outside (0,1]", e.src, e.dst, e.weight));
        }
        if (!d.find_node(e.src) || !d.find_node(e.dst)) {
            fail(fmt::format("edge {}-{} references an unknown node", e.src, e.dst));
        }
        if (i > 0 && d.edges[i - 1].src == e.src && d.edges[i - 1].dst == e.dst) {
            fail(fmt::format("duplicate edge {}-{}", e.src, e.dst));
        }
    }
    auto require_student = [&](std::string_view id, std::string_view what) {
        const auto* n = d.find_node(id);
        if (!n || n->kind != NodeKind::Student) fail(fmt::format("{}: '{}' is not a student node", what, id));
    };
    auto require_target = [&](std::string_view id, std::string_view what) {
        const auto* n = d.find_node(id);
        if (!n || !is_target_kind(n->kind)) fail(fmt::format("{}: '{}' is not a target node", what, id));
    };
    for (std::size_t i = 0; i < d.profiles.size(); ++i) {
        const auto& p = d.profiles[i];
        require_student(p.student_id, "profile");
        if (i > 0 && d.profiles[i - 1].student_id == p.student_id) {
            fail(fmt::format("duplicate profile for '{}'", p.student_id));
        }
        if (p.race_code < 1 || p.race_code > 5) fail(fmt::format("profile '{}': race_code out of 1-5", p.student_id));
    }
    for (const auto& r : d.reactions) {
        require_student(r.student_id, "reaction");
        require_target(r.target_id, "reaction");
    }
    for (const auto& s : d.suggestions) {
        require_student(s.student_id, "suggestion");
        require_target(s.target_id, "suggestion");
        if (!(s.confidence > 0.0 && s.confidence <= 1.0)) {
            fail(fmt::format("suggestion {}->{}: confidence {} outside (0,1]", s.student_id, s.target_id, s.confidence));
        }
        if (s.source != SuggestionSource::Collab) {
            if (s.reasoning.empty() || s.reasoning.front() != s.student_id || s.reasoning.back() != s.target_id) {
                fail(fmt::format("suggestion {}->{}: reasoning must run from student to target", s.student_id,
                                 s.target_id));
            }
        }
        for (const auto& id : s.reasoning) {
            if (!d.find_node(id)) fail(fmt::format("suggestion {}->{}: unknown node '{}' in reasoning", s.student_id,
                                                   s.target_id, id));
        }
    }
}

ReactionIndex::ReactionIndex(std::span<const Reaction> reactions) {
    for (const auto& r : reactions) {
        PairKey key{r.student_id, r.target_id};
        auto it = latest_.find(key);
        if (it == latest_.end()) {
            latest_.emplace(std::move(key), r);
        } else if (r.ts >= it->second.ts) {
            it->second = r;
        }
    }
}

std::optional<Polarity> ReactionIndex::latest(std::string_view student, std::string_view target) const {
    auto it = latest_.find(PairKey{NodeId(student), NodeId(target)});
    if (it == latest_.end()) return std::nullopt;
    return it->second.polarity;
}

}  // namespace equirec
