#include "equirec/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <set>

#include <fmt/format.h>

#include "equirec/content.hpp"
#include "equirec/dataset_io.hpp"
#include "equirec/pipeline.hpp"
#include "equirec/rng.hpp"

namespace equirec {

namespace {

constexpr std::size_t kDefaultTargetsPerCategory = 16;
constexpr int kEmbeddingAttempts = 50;

std::map<std::string, double> default_marginal(ProtectedVariable variable) {
    switch (variable) {
        case ProtectedVariable::Gender: return {{"F", 0.5}, {"M", 0.5}};
        case ProtectedVariable::RaceCode: return {{"1", 0.2}, {"2", 0.2}, {"3", 0.2}, {"4", 0.2}, {"5", 0.2}};
        case ProtectedVariable::HasParents:
            return {{"MotherOnly", 0.3}, {"FatherOnly", 0.1}, {"MotherAndFather", 0.5}, {"Other", 0.1}};
        case ProtectedVariable::IsHomeless: return {{"false", 0.95}, {"true", 0.05}};
        case ProtectedVariable::IsMigrant: return {{"false", 0.9}, {"true", 0.1}};
        case ProtectedVariable::IsImmigrant: return {{"false", 0.85}, {"true", 0.15}};
        case ProtectedVariable::IsFoster: return {{"false", 0.95}, {"true", 0.05}};
        case ProtectedVariable::IsGifted: return {{"false", 0.85}, {"true", 0.15}};
    }
    return {};
}

std::string lower(std::string_view text) {
    std::string out(text);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string sample_group(Rng& rng, ProtectedVariable variable, const std::map<std::string, double>& marginal) {
    const auto labels = group_labels(variable);
    const double u = rng.uniform();
    double cumulative = 0.0;
    for (const auto& label : labels) {
        auto it = marginal.find(label);
        if (it == marginal.end()) continue;
        cumulative += it->second;
        if (u < cumulative) return label;
    }
    // Rounding slack: fall back to the last label with mass.
    for (auto it = labels.rbegin(); it != labels.rend(); ++it) {
        auto m = marginal.find(*it);
        if (m != marginal.end() && m->second > 0.0) return *it;
    }
    return labels.back();
}

ProtectedProfile sample_profile(Rng& rng, const NodeId& id, const CohortConfig& c) {
    auto draw = [&](ProtectedVariable v) { return sample_group(rng, v, c.marginals.at(v)); };
    ProtectedProfile p;
    p.student_id = id;
    p.gender = *parse_gender(draw(ProtectedVariable::Gender));
    p.race_code = std::stoi(draw(ProtectedVariable::RaceCode));
    p.has_parents = *parse_parent_status(draw(ProtectedVariable::HasParents));
    p.is_homeless = draw(ProtectedVariable::IsHomeless) == "true";
    p.is_migrant = draw(ProtectedVariable::IsMigrant) == "true";
    p.is_immigrant = draw(ProtectedVariable::IsImmigrant) == "true";
    p.is_foster = draw(ProtectedVariable::IsFoster) == "true";
    p.is_gifted = draw(ProtectedVariable::IsGifted) == "true";
    return p;
}

std::vector<double> unit_gaussian(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

bool static_graph_connected(const std::vector<EntityNode>& nodes, const std::vector<GraphEdge>& edges) {
    std::map<std::string_view, std::vector<std::string_view>> adjacency;
    std::size_t count = 0;
    for (const auto& n : nodes) {
        if (n.kind == NodeKind::Student) continue;
        adjacency[n.id];
        ++count;
    }
    if (count <= 1) return true;
    for (const auto& e : edges) {
        adjacency[e.src].push_back(e.dst);
        adjacency[e.dst].push_back(e.src);
    }
    std::set<std::string_view> seen{adjacency.begin()->first};
    std::deque<std::string_view> queue{adjacency.begin()->first};
    while (!queue.empty()) {
        auto u = queue.front();
        queue.pop_front();
        for (auto v : adjacency[u]) {
            if (seen.insert(v).second) queue.push_back(v);
        }
    }
    return seen.size() == count;
}

// Interests and aptitudes are cluster centres sharing a common direction;
// each target sits near one centre.
EmbeddingTable plant_embeddings(Rng& rng, const std::vector<const EntityNode*>& centres,
                                const std::vector<const EntityNode*>& targets, std::size_t dim) {
    EmbeddingTable table;
    const auto shared = unit_gaussian(rng, dim);
    std::vector<std::vector<double>> centre_vectors;
    for (const auto* c : centres) {
        auto own = unit_gaussian(rng, dim);
        std::vector<double> v(dim);
        for (std::size_t i = 0; i < dim; ++i) v[i] = std::sqrt(0.45) * shared[i] + std::sqrt(0.55) * own[i];
        centre_vectors.push_back(v);
        table.add(c->id, std::move(v));
    }
    const double sigma = 0.6 / std::sqrt(static_cast<double>(dim));
    for (std::size_t t = 0; t < targets.size(); ++t) {
        std::vector<double> v(dim);
        if (centre_vectors.empty()) {
            v = unit_gaussian(rng, dim);
        } else {
            const auto& centre = centre_vectors[t % centre_vectors.size()];
            for (std::size_t i = 0; i < dim; ++i) v[i] = centre[i] + sigma * rng.normal();
        }
        table.add(targets[t]->id, std::move(v));
    }
    return table;
}

}  // namespace

CohortConfig CohortConfig::resolved() const {
    CohortConfig c = *this;
    for (auto kind : target_kinds()) c.targets_per_category.try_emplace(kind, kDefaultTargetsPerCategory);
    for (const auto& [kind, n] : c.targets_per_category) {
        if (!is_target_kind(kind)) throw Error(ErrorCode::ConfigError, fmt::format("{} is not a target kind", to_string(kind)));
    }
    for (auto variable : protected_variables()) {
        c.marginals.try_emplace(variable, default_marginal(variable));
        const auto labels = group_labels(variable);
        double sum = 0.0;
        for (const auto& [label, p] : c.marginals.at(variable)) {
            if (std::find(labels.begin(), labels.end(), label) == labels.end()) {
                throw Error(ErrorCode::ConfigError, fmt::format("'{}' is not a group of {}", label, to_string(variable)));
            }
            if (p < 0.0) throw Error(ErrorCode::ConfigError, fmt::format("negative probability for {}", label));
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw Error(ErrorCode::ConfigError, fmt::format("{} marginal sums to {}", to_string(variable), sum));
        }
    }
    if (c.embedding_dim < 1) throw Error(ErrorCode::ConfigError, "embedding_dim must be >= 1");
    if (!(c.reaction_rate > 0.0 && c.reaction_rate <= 1.0)) throw Error(ErrorCode::ConfigError, "reaction_rate outside (0,1]");
    if (!(c.base_positive_rate > 0.0 && c.base_positive_rate < 1.0)) {
        throw Error(ErrorCode::ConfigError, "base_positive_rate outside (0,1)");
    }
    if (!(c.tau > 0.0 && c.tau < 1.0)) throw Error(ErrorCode::ConfigError, "tau outside (0,1)");
    if (c.radius < 0) throw Error(ErrorCode::ConfigError, "radius must be non-negative");
    if (c.n_students > 0 && c.n_interests + c.n_aptitudes == 0) {
        throw Error(ErrorCode::ConfigError, "students need at least one interest or aptitude");
    }
    return c;
}

CohortConfig cohort_config_from_json(const nlohmann::json& j) {
    CohortConfig c;
    try {
        c.n_students = j.value("n_students", c.n_students);
        c.n_interests = j.value("n_interests", c.n_interests);
        c.n_aptitudes = j.value("n_aptitudes", c.n_aptitudes);
        c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
        c.reaction_rate = j.value("reaction_rate", c.reaction_rate);
        c.base_positive_rate = j.value("base_positive_rate", c.base_positive_rate);
        c.seed = j.value("seed", c.seed);
        c.suggestions_per_category = j.value("suggestions_per_category", c.suggestions_per_category);
        c.radius = j.value("radius", c.radius);
        c.tau = j.value("tau", c.tau);
        if (j.contains("targets_per_category")) {
            for (const auto& [name, n] : j.at("targets_per_category").items()) {
                auto kind = parse_node_kind(name);
                if (!kind) throw Error(ErrorCode::ConfigError, fmt::format("unknown category '{}'", name));
                c.targets_per_category[*kind] = n.get<std::size_t>();
            }
        }
        if (j.contains("marginals")) {
            for (const auto& [name, groups] : j.at("marginals").items()) {
                auto& m = c.marginals[parse_protected_variable(name)];
                for (const auto& [label, p] : groups.items()) m[label] = p.get<double>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    }
    return c;
}

nlohmann::ordered_json to_json(const CohortConfig& c) {
    nlohmann::ordered_json j;
    j["n_students"] = c.n_students;
    j["n_interests"] = c.n_interests;
    j["n_aptitudes"] = c.n_aptitudes;
    nlohmann::ordered_json targets;
    for (const auto& [kind, n] : c.targets_per_category) targets[std::string(to_string(kind))] = n;
    j["targets_per_category"] = targets;
    j["embedding_dim"] = c.embedding_dim;
    nlohmann::ordered_json marginals;
    for (const auto& [variable, groups] : c.marginals) {
        nlohmann::ordered_json g;
        for (const auto& [label, p] : groups) g[label] = p;
        marginals[std::string(to_string(variable))] = g;
    }
    j["marginals"] = marginals;
    j["reaction_rate"] = c.reaction_rate;
    j["base_positive_rate"] = c.base_positive_rate;
    j["seed"] = c.seed;
    j["suggestions_per_category"] = c.suggestions_per_category;
    j["radius"] = c.radius;
    j["tau"] = c.tau;
    return j;
}

Cohort generate_cohort(const CohortConfig& config) {
    const CohortConfig c = config.resolved();
    Rng rng(c.seed);
    Cohort cohort;
    Dataset& d = cohort.dataset;

    for (std::size_t i = 0; i < c.n_interests; ++i) {
        d.nodes.push_back(EntityNode{fmt::format("interest-{:03}", i), NodeKind::Interest, fmt::format("Interest {}", i), {}});
    }
    for (std::size_t i = 0; i < c.n_aptitudes; ++i) {
        d.nodes.push_back(EntityNode{fmt::format("aptitude-{:03}", i), NodeKind::Aptitude, fmt::format("Aptitude {}", i), {}});
    }
    for (auto kind : target_kinds()) {
        for (std::size_t i = 0; i < c.targets_per_category.at(kind); ++i) {
            d.nodes.push_back(EntityNode{fmt::format("{}-{:03}", lower(to_string(kind)), i), kind,
                                         fmt::format("{} {}", to_string(kind), i), {}});
        }
    }
    for (std::size_t i = 0; i < c.n_students; ++i) {
        const auto id = fmt::format("student-{:04}", i);
        const auto band = grade_bands()[rng.below(grade_bands().size())];
        d.nodes.push_back(EntityNode{id, NodeKind::Student, fmt::format("Student {}", i), band});
        d.profiles.push_back(sample_profile(rng, id, c));
    }
    normalize(d);

    std::vector<const EntityNode*> centres, targets;
    for (const auto& n : d.nodes) {
        if (n.kind == NodeKind::Interest || n.kind == NodeKind::Aptitude) centres.push_back(&n);
        if (is_target_kind(n.kind)) targets.push_back(&n);
    }
    std::vector<GraphEdge> static_edges;
    bool connected = false;
    for (int attempt = 0; attempt < kEmbeddingAttempts && !connected; ++attempt) {
        cohort.embeddings = plant_embeddings(rng, centres, targets, c.embedding_dim);
        static_edges = build_static_edges(cohort.embeddings, d.nodes, c.tau);
        connected = static_graph_connected(d.nodes, static_edges);
    }
    if (!connected) {
        throw Error(ErrorCode::ConfigError, fmt::format("no connected static graph at tau {} after {} attempts", c.tau,
                                                        kEmbeddingAttempts));
    }
    d.edges = static_edges;

    for (const auto& student : d.student_ids()) {
        const std::size_t links = std::min<std::size_t>(1 + rng.below(4), centres.size());
        std::set<std::size_t> picked;
        while (picked.size() < links) picked.insert(rng.below(centres.size()));
        for (auto idx : picked) {
            const auto* node = centres[idx];
            const auto kind = node->kind == NodeKind::Interest ? EdgeKind::Accepted : EdgeKind::Exhibits;
            d.upsert_edge(make_edge(student, node->id, kind, rng.uniform(0.3, 1.0)));
        }
    }

    // One content round with a per-category quota, then simulated reactions.
    std::vector<Suggestion> round;
    {
        const ContentIndex index(d);
        for (const auto& student : d.student_ids()) {
            const auto ranked = rank_targets(index.extract(student, c.radius), student);
            std::map<NodeKind, std::size_t> taken;
            std::vector<PathResult> chosen;
            for (const auto& r : ranked) {
                const auto kind = d.find_node(r.target_id)->kind;
                if (taken[kind] >= c.suggestions_per_category) continue;
                ++taken[kind];
                chosen.push_back(r);
            }
            auto suggestions = to_content_suggestions(chosen, student, chosen.size(), 0);
            round.insert(round.end(), suggestions.begin(), suggestions.end());
        }
    }
    record_suggestions(d, round);
    for (const auto& s : round) {
        if (!rng.bernoulli(c.reaction_rate)) continue;
        const auto polarity = rng.bernoulli(c.base_positive_rate) ? Polarity::Positive : Polarity::Negative;
        d.reactions.push_back(Reaction{s.student_id, s.target_id, polarity, 1});
    }
    validate(d);
    return cohort;
}

void write_cohort(const Cohort& cohort, const CohortConfig& config, const std::filesystem::path& root) {
    save_dataset(cohort.dataset, root);
    write_file_atomic(root / "embeddings.jsonl", embeddings_jsonl(cohort.embeddings));
    write_file_atomic(root / "cohort.json", to_json(config.resolved()).dump(2) + "\n");
}

Dataset inject_bias(const Dataset& dataset, const BiasInjection& injection) {
    const auto labels = group_labels(injection.variable);
    if (std::find(labels.begin(), labels.end(), injection.group) == labels.end()) {
        throw Error(ErrorCode::UnknownGroup,
                    fmt::format("'{}' is not a group of {}", injection.group, to_string(injection.variable)));
    }
    if (!(injection.gap >= 0.0 && injection.gap < injection.base_positive_rate) || injection.base_positive_rate >= 1.0) {
        throw Error(ErrorCode::GapInfeasible, fmt::format("gap {} must lie in [0, {})", injection.gap,
                                                          injection.base_positive_rate));
    }

    std::vector<std::optional<bool>> membership(dataset.reactions.size());
    std::size_t in_group = 0, outside = 0;
    for (std::size_t i = 0; i < dataset.reactions.size(); ++i) {
        const auto& r = dataset.reactions[i];
        const auto* target = dataset.find_node(r.target_id);
        if (!target || target->kind != injection.category) continue;
        const auto* profile = dataset.find_profile(r.student_id);
        if (!profile) throw Error(ErrorCode::MissingProfile, fmt::format("no profile for '{}'", r.student_id));
        const bool member = group_of(*profile, injection.variable) == injection.group;
        membership[i] = member;
        ++(member ? in_group : outside);
    }
    if (in_group < injection.min_support || outside < injection.min_support) {
        throw Error(ErrorCode::GapInfeasible,
                    fmt::format("{} {} has {} reactions on {} (rest: {}); need {}", to_string(injection.variable),
                                injection.group, in_group, to_string(injection.category), outside,
                                injection.min_support));
    }

    Dataset out = dataset;
    Rng rng(injection.seed);
    for (std::size_t i = 0; i < out.reactions.size(); ++i) {
        if (!membership[i]) continue;
        const double p = *membership[i] ? injection.base_positive_rate - injection.gap : injection.base_positive_rate;
        out.reactions[i].polarity = rng.bernoulli(p) ? Polarity::Positive : Polarity::Negative;
    }
    return out;
}

}  // namespace equirec
