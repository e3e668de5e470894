#include "equirec/graph_build.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

#include "equirec/dataset_io.hpp"

namespace equirec {

void EmbeddingTable::add(NodeId id, std::vector<double> vector) {
    if (vector.empty()) throw Error(ErrorCode::DimensionMismatch, fmt::format("embedding '{}' is empty", id));
    if (dim_ != 0 && vector.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("embedding '{}' has dimension {}, expected {}", id, vector.size(), dim_));
    }
    if (std::all_of(vector.begin(), vector.end(), [](double x) { return x == 0.0; })) {
        throw Error(ErrorCode::ZeroVector, fmt::format("embedding '{}' is all zeros", id));
    }
    dim_ = vector.size();
    entries_.insert_or_assign(std::move(id), std::move(vector));
}

const std::vector<double>* EmbeddingTable::find(std::string_view id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
}

EmbeddingTable load_embeddings(const std::filesystem::path& file) {
    EmbeddingTable table;
    std::istringstream in(read_text_file(file));
    std::string line;
    std::size_t number = 0;
    const std::string name = file.filename().string();
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            auto value = nlohmann::json::parse(line);
            table.add(value.at("id").get<std::string>(), value.at("vector").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::SchemaError, fmt::format("{} row {}: {}", name, number, e.what()));
        } catch (const Error& e) {
            throw Error(e.code(), fmt::format("{} row {}: {}", name, number, e.what()));
        }
    }
    return table;
}

std::string embeddings_jsonl(const EmbeddingTable& table) {
    std::string out;
    for (const auto& [id, vector] : table.entries()) {
        nlohmann::ordered_json j;
        j["id"] = id;
        j["vector"] = vector;
        out += j.dump();
        out += '\n';
    }
    return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw Error(ErrorCode::DimensionMismatch, fmt::format("vectors of size {} and {}", u.size(), v.size()));
    }
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
    return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<GraphEdge> build_static_edges(const EmbeddingTable& embeddings, std::span<const EntityNode> nodes,
                                          double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorCode::ConfigError, fmt::format("tau {} outside (0,1)", tau));

    // Vectors in node id order.
    std::vector<std::pair<const EntityNode*, const std::vector<double>*>> items;
    for (const auto& node : nodes) {
        if (node.kind == NodeKind::Student) continue;
        const auto* vector = embeddings.find(node.id);
        if (!vector) throw Error(ErrorCode::MissingEmbedding, fmt::format("no embedding for '{}'", node.id));
        items.emplace_back(&node, vector);
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first->id < b.first->id; });

    std::vector<GraphEdge> edges;
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = i + 1; j < items.size(); ++j) {
            const double s = cosine_similarity(*items[i].second, *items[j].second);
            if (s >= tau) edges.push_back(GraphEdge{items[i].first->id, items[j].first->id, EdgeKind::SimilarTo, s});
        }
    }
    return edges;
}

void replace_static_edges(Dataset& dataset, std::span<const GraphEdge> static_edges) {
    std::erase_if(dataset.edges, [](const GraphEdge& e) { return e.kind == EdgeKind::SimilarTo; });
    for (const auto& e : static_edges) {
        if (!dataset.find_edge(e.src, e.dst)) dataset.upsert_edge(e);
    }
}

std::vector<GraphEdge> apply_feedback_to_dynamic_edges(Dataset& dataset, const Reaction& reaction, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::ConfigError, fmt::format("delta {} outside (0,1)", delta));

    const Suggestion* suggestion = nullptr;
    for (const auto& s : dataset.suggestions) {
        if (s.student_id == reaction.student_id && s.target_id == reaction.target_id) suggestion = &s;
    }
    if (!suggestion) {
        throw Error(ErrorCode::UnknownSuggestion,
                    fmt::format("no suggestion of '{}' to '{}' was logged", reaction.target_id, reaction.student_id));
    }

    std::vector<GraphEdge> changed;
    const GraphEdge* existing = dataset.find_edge(reaction.student_id, reaction.target_id);
    if (reaction.polarity == Polarity::Positive) {
        const double weight = std::min(1.0, suggestion->confidence + delta);
        changed.push_back(make_edge(reaction.student_id, reaction.target_id, EdgeKind::Accepted, weight));

        std::set<NodeId> reinforced;
        for (const auto& id : suggestion->reasoning) {
            const auto* node = dataset.find_node(id);
            if (!node || (node->kind != NodeKind::Interest && node->kind != NodeKind::Aptitude)) continue;
            if (!reinforced.insert(id).second) continue;
            if (const auto* edge = dataset.find_edge(reaction.student_id, id)) {
                GraphEdge updated = *edge;
                updated.weight = std::min(1.0, updated.weight + delta);
                changed.push_back(std::move(updated));
            }
        }
    } else {
        const double weight = existing ? existing->weight : suggestion->confidence;
        changed.push_back(make_edge(reaction.student_id, reaction.target_id, EdgeKind::Rejected, weight));
    }

    for (const auto& e : changed) dataset.upsert_edge(e);
    dataset.reactions.push_back(reaction);
    return changed;
}

}  // namespace equirec
