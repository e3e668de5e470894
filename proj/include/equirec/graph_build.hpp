#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "equirec/model.hpp"

namespace equirec {

inline constexpr double kDefaultTau = 0.35;
inline constexpr double kDefaultFeedbackDelta = 0.05;

/// Node id -> embedding vector; every vector shares one dimension.
class EmbeddingTable {
public:
    /// Throws DimensionMismatch or ZeroVector on an invalid entry.
    void add(NodeId id, std::vector<double> vector);

    const std::vector<double>* find(std::string_view id) const;
    std::size_t dimension() const { return dim_; }
    std::size_t size() const { return entries_.size(); }
    const std::map<NodeId, std::vector<double>, std::less<>>& entries() const { return entries_; }

private:
    std::map<NodeId, std::vector<double>, std::less<>> entries_;
    std::size_t dim_ = 0;
};

/// Reads embeddings.jsonl (`{"id": ..., "vector": [...]}` per line).
EmbeddingTable load_embeddings(const std::filesystem::path& file);
std::string embeddings_jsonl(const EmbeddingTable& table);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// SimilarTo edges for every unordered pair of non-student nodes whose cosine
/// similarity is at least tau. Output is sorted canonically.
std::vector<GraphEdge> build_static_edges(const EmbeddingTable& embeddings, std::span<const EntityNode> nodes,
                                          double tau = kDefaultTau);

/// Replaces the dataset's SimilarTo edges with `static_edges`. Pairs that
/// already carry a curated edge of another kind keep it.
void replace_static_edges(Dataset& dataset, std::span<const GraphEdge> static_edges);

/// Applies one reaction to the student's dynamic edges and appends it to the
/// reaction log. Returns the edges that changed. Throws UnknownSuggestion when
/// no suggestion for the pair was logged.
std::vector<GraphEdge> apply_feedback_to_dynamic_edges(Dataset& dataset, const Reaction& reaction,
                                                       double delta = kDefaultFeedbackDelta);

}  // namespace equirec
