#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "equirec/graph_build.hpp"
#include "equirec/model.hpp"

namespace equirec {

struct CohortConfig {
    std::size_t n_students = 200;
    std::size_t n_interests = 12;
    std::size_t n_aptitudes = 6;
    std::map<NodeKind, std::size_t> targets_per_category;  // missing kinds get 16
    std::size_t embedding_dim = 16;
    // Variable -> group label -> probability. Missing variables use defaults.
    std::map<ProtectedVariable, std::map<std::string, double>> marginals;
    double reaction_rate = 1.0;
    double base_positive_rate = 0.7;
    std::uint64_t seed = 1;

    // Simulated recommendation round.
    std::size_t suggestions_per_category = 8;
    int radius = 3;
    double tau = kDefaultTau;

    /// Fills defaults for missing categories and variables, then checks
    /// ranges and that each marginal sums to 1 (+-1e-9). Throws ConfigError.
    CohortConfig resolved() const;
};

CohortConfig cohort_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const CohortConfig& config);

struct Cohort {
    Dataset dataset;
    EmbeddingTable embeddings;
};

/// Deterministic synthetic district: profiled students linked to 1-4
/// interests/aptitudes, targets clustered around them in embedding space, one
/// content recommendation round and simulated reactions to it. Reactions are
/// logged but not yet folded into the dynamic edges.
Cohort generate_cohort(const CohortConfig& config);

/// Writes the dataset files, embeddings.jsonl and cohort.json (resolved config).
void write_cohort(const Cohort& cohort, const CohortConfig& config, const std::filesystem::path& root);

struct BiasInjection {
    ProtectedVariable variable = ProtectedVariable::Gender;
    std::string group;
    NodeKind category = NodeKind::Volunteering;
    double gap = 0.0;
    double base_positive_rate = 0.7;
    std::uint64_t seed = 0;
    std::size_t min_support = 1;  // reactions required from the group and from the rest
};

/// Redraws the polarity of every reaction on `category` targets: members of
/// the group turn positive with probability base - gap, everyone else with
/// probability base. Reactions on other categories are kept verbatim.
/// Throws UnknownGroup, MissingProfile or GapInfeasible.
Dataset inject_bias(const Dataset& dataset, const BiasInjection& injection);

}  // namespace equirec
