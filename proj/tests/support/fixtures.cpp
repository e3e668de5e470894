#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

#include "equirec/pipeline.hpp"
#include "equirec/rng.hpp"

namespace equirec::testing {

namespace fs = std::filesystem;

fs::path data_dir() { return fs::path(EQUIREC_TEST_DATA_DIR); }

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() / fmt::format("{}-{}-{}", tag, ::getpid(), counter++);
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

namespace {

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::set<fs::path> relative_files(const fs::path& root) {
    std::set<fs::path> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) out.insert(fs::relative(entry.path(), root));
    }
    return out;
}

}  // namespace

std::string diff_trees(const fs::path& a, const fs::path& b) {
    const auto fa = relative_files(a);
    const auto fb = relative_files(b);
    if (fa != fb) {
        std::vector<fs::path> only;
        std::set_symmetric_difference(fa.begin(), fa.end(), fb.begin(), fb.end(), std::back_inserter(only));
        return fmt::format("file sets differ at '{}'", only.front().string());
    }
    for (const auto& rel : fa) {
        if (slurp(a / rel) != slurp(b / rel)) return fmt::format("'{}' differs", rel.string());
    }
    return {};
}

EntityNode node(NodeId id, NodeKind kind) {
    auto label = id;
    return EntityNode{std::move(id), kind, std::move(label), std::nullopt};
}

EntityNode student(NodeId id, GradeBand band) {
    auto label = id;
    return EntityNode{std::move(id), NodeKind::Student, std::move(label), band};
}

ProtectedProfile profile(NodeId id, Gender gender, int race, ParentStatus parents, bool immigrant) {
    ProtectedProfile p;
    p.student_id = std::move(id);
    p.gender = gender;
    p.race_code = race;
    p.has_parents = parents;
    p.is_immigrant = immigrant;
    return p;
}

Dataset worked_example_dataset() {
    Dataset d;
    d.nodes = {student("Student"),
               node("InterestA", NodeKind::Interest),
               node("InterestB", NodeKind::Interest),
               node("Aptitude", NodeKind::Aptitude),
               node("Activity", NodeKind::Activity),
               node("Book", NodeKind::Book),
               node("Major", NodeKind::Major),
               node("Video", NodeKind::Video),
               node("Volunteering", NodeKind::Volunteering),
               node("Certification", NodeKind::Certification)};
    d.edges = {make_edge("Student", "InterestA", EdgeKind::Accepted, 1.0),
               make_edge("Student", "Activity", EdgeKind::Rejected, 0.6),
               make_edge("Student", "Aptitude", EdgeKind::Exhibits, 0.7),
               make_edge("InterestA", "Volunteering", EdgeKind::AppliesTo, 0.6),
               make_edge("InterestA", "InterestB", EdgeKind::SubsetOf, 1.0),
               make_edge("InterestB", "Video", EdgeKind::SimilarTo, 0.55),
               make_edge("InterestA", "Major", EdgeKind::SimilarTo, 0.75),
               make_edge("InterestB", "Book", EdgeKind::SimilarTo, 0.85),
               make_edge("Aptitude", "Certification", EdgeKind::SimilarTo, 0.8)};
    normalize(d);
    validate(d);
    return d;
}

Dataset diamond_dataset() {
    Dataset d;
    d.nodes = {student("S"),
               node("I1", NodeKind::Interest),
               node("I2", NodeKind::Interest),
               node("I3", NodeKind::Interest),
               node("T", NodeKind::Book),
               node("R", NodeKind::Video)};
    d.edges = {make_edge("S", "I1", EdgeKind::Accepted, 0.8), make_edge("I1", "T", EdgeKind::SimilarTo, 0.8),
               make_edge("S", "I2", EdgeKind::Accepted, 0.8), make_edge("I2", "T", EdgeKind::SimilarTo, 0.8),
               make_edge("S", "I3", EdgeKind::Accepted, 1.0), make_edge("I3", "R", EdgeKind::SimilarTo, 0.9)};
    normalize(d);
    validate(d);
    return d;
}

Dataset random_graph(std::uint64_t seed, std::size_t max_nodes) {
    static constexpr double kWeights[] = {1.0, 0.9, 0.8, 0.64, 0.5, 0.25};
    static constexpr NodeKind kKinds[] = {NodeKind::Interest,  NodeKind::Interest,      NodeKind::Aptitude,
                                          NodeKind::Book,      NodeKind::Video,         NodeKind::Course,
                                          NodeKind::Activity,  NodeKind::Extracurricular, NodeKind::Certification,
                                          NodeKind::Volunteering, NodeKind::Major};
    Rng rng(seed);
    Dataset d;
    const std::size_t n = 3 + rng.below(max_nodes - 2);
    d.nodes.push_back(student(kRandomCenter));
    const bool second_student = rng.bernoulli(0.3);
    if (second_student) d.nodes.push_back(student("s-other"));
    while (d.nodes.size() < n) {
        const auto kind = kKinds[rng.below(std::size(kKinds))];
        d.nodes.push_back(node(fmt::format("n{:02}", d.nodes.size()), kind));
    }

    const double density = rng.uniform(0.2, 0.55);
    for (std::size_t i = 0; i < d.nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < d.nodes.size(); ++j) {
            if (!rng.bernoulli(density)) continue;
            const auto& a = d.nodes[i];
            const auto& b = d.nodes[j];
            const bool sa = a.kind == NodeKind::Student, sb = b.kind == NodeKind::Student;
            if (sa && sb) continue;
            const double w = kWeights[rng.below(std::size(kWeights))];
            EdgeKind kind = EdgeKind::SimilarTo;
            if (sa || sb) {
                const auto other = sa ? b.kind : a.kind;
                const double u = rng.uniform();
                if (other == NodeKind::Aptitude) {
                    kind = u < 0.85 ? EdgeKind::Exhibits : EdgeKind::Rejected;
                } else if (other == NodeKind::Interest) {
                    kind = u < 0.85 ? EdgeKind::Accepted : EdgeKind::Rejected;
                } else {
                    kind = u < 0.4 ? EdgeKind::Suggested : u < 0.7 ? EdgeKind::Accepted : EdgeKind::Rejected;
                }
            } else if (rng.bernoulli(0.2)) {
                kind = EdgeKind::SubsetOf;
            }
            d.edges.push_back(make_edge(a.id, b.id, kind, w));
        }
    }

    std::vector<NodeId> targets;
    for (const auto& nd : d.nodes) {
        if (is_target_kind(nd.kind)) targets.push_back(nd.id);
    }
    if (!targets.empty()) {
        if (rng.bernoulli(0.3)) {
            const auto& t = targets[rng.below(targets.size())];
            d.suggestions.push_back(Suggestion{kRandomCenter, t, SuggestionSource::Collab, 0.5, {}, 0.5, 0});
        }
        if (rng.bernoulli(0.3)) {
            const auto& t = targets[rng.below(targets.size())];
            d.reactions.push_back(Reaction{kRandomCenter, t, Polarity::Negative, 1});
        }
        if (second_student && rng.bernoulli(0.5)) {
            const auto& t = targets[rng.below(targets.size())];
            d.reactions.push_back(Reaction{"s-other", t, Polarity::Negative, 1});
        }
    }
    normalize(d);
    validate(d);
    return d;
}

std::vector<OracleResult> brute_force_paths(const Dataset& d, const NodeId& center, int radius, double tolerance) {
    std::map<NodeId, NodeKind> kind;
    for (const auto& n : d.nodes) kind[n.id] = n.kind;

    std::map<NodeId, std::vector<std::pair<NodeId, double>>> adj;
    std::set<NodeId> blocked;
    for (const auto& e : d.edges) {
        const bool touches_center = e.src == center || e.dst == center;
        if (touches_center && (e.kind == EdgeKind::Accepted || e.kind == EdgeKind::Rejected ||
                               e.kind == EdgeKind::Suggested)) {
            blocked.insert(e.src == center ? e.dst : e.src);
        }
        if (e.kind == EdgeKind::Rejected) continue;
        if ((kind[e.src] == NodeKind::Student && e.src != center) ||
            (kind[e.dst] == NodeKind::Student && e.dst != center)) {
            continue;
        }
        adj[e.src].emplace_back(e.dst, e.weight);
        adj[e.dst].emplace_back(e.src, e.weight);
    }
    for (const auto& s : d.suggestions) {
        if (s.student_id == center) blocked.insert(s.target_id);
    }
    for (const auto& r : d.reactions) {
        if (r.student_id == center && r.polarity == Polarity::Negative) blocked.insert(r.target_id);
    }

    // Hop distances bound the node set; paths inside it may be longer.
    std::map<NodeId, int> hops{{center, 0}};
    std::deque<NodeId> queue{center};
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        if (hops[u] >= radius) continue;
        for (const auto& [v, w] : adj[u]) {
            if (hops.emplace(v, hops[u] + 1).second) queue.push_back(v);
        }
    }

    struct Best {
        double cost = INFINITY;
        std::vector<std::vector<NodeId>> paths;
        std::vector<double> costs;
    };
    std::map<NodeId, Best> all;
    std::vector<NodeId> path{center};
    std::set<NodeId> on_path{center};
    std::vector<double> weights;
    auto dfs = [&](auto&& self, const NodeId& u, double cost) -> void {
        if (u != center) {
            auto& b = all[u];
            b.paths.push_back(path);
            b.costs.push_back(cost);
            b.cost = std::min(b.cost, cost);
        }
        for (const auto& [v, w] : adj[u]) {
            if (!hops.contains(v) || on_path.contains(v)) continue;
            path.push_back(v);
            on_path.insert(v);
            self(self, v, cost - std::log(w));
            on_path.erase(v);
            path.pop_back();
        }
    };
    dfs(dfs, center, 0.0);

    std::vector<OracleResult> out;
    for (auto& [id, b] : all) {
        if (!is_target_kind(kind[id]) || blocked.contains(id)) continue;
        OracleResult r;
        r.target_id = id;
        r.min_cost = b.cost;
        for (std::size_t i = 0; i < b.paths.size(); ++i) {
            if (b.costs[i] > b.cost + tolerance) continue;
            ++r.n_optimal;
            if (r.best_path.empty() || b.paths[i] < r.best_path) r.best_path = b.paths[i];
        }
        r.path_weight = 1.0;
        for (std::size_t i = 1; i < r.best_path.size(); ++i) {
            for (const auto& [v, w] : adj[r.best_path[i - 1]]) {
                if (v == r.best_path[i]) r.path_weight *= w;
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

void add_category_cohort(Dataset& d, const std::string& prefix, NodeKind category, const std::vector<CohortCell>& cells,
                         std::size_t per_student) {
    const NodeId interest = prefix + "-interest";
    d.nodes.push_back(node(interest, NodeKind::Interest));
    std::vector<NodeId> targets;
    for (std::size_t t = 0; t < per_student; ++t) {
        targets.push_back(fmt::format("{}-target-{:02}", prefix, t));
        d.nodes.push_back(node(targets.back(), category));
        d.edges.push_back(make_edge(interest, targets.back(), EdgeKind::SimilarTo, 0.9));
    }

    std::vector<Suggestion> suggestions;
    std::size_t serial = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        std::vector<std::size_t> counts = cell.reactions;
        if (counts.empty()) counts.assign(cell.students, per_student);
        std::vector<std::size_t> positives(counts.size(), 0);
        for (std::size_t dealt = 0, s = 0; dealt < cell.positives; s = (s + 1) % counts.size()) {
            if (positives[s] < counts[s]) {
                ++positives[s];
                ++dealt;
            }
        }
        for (std::size_t s = 0; s < counts.size(); ++s) {
            const NodeId id = fmt::format("{}-c{}-s{:02}", prefix, c, s);
            d.nodes.push_back(student(id));
            auto p = cell.profile;
            p.student_id = id;
            d.profiles.push_back(p);
            d.edges.push_back(make_edge(id, interest, EdgeKind::Accepted, 1.0));
            for (std::size_t t = 0; t < counts[s]; ++t) {
                const auto& target = targets[(t + serial) % per_student];
                suggestions.push_back(
                    Suggestion{id, target, SuggestionSource::Content, 0.9, {id, interest, target}, 0.9, 0});
                d.reactions.push_back(
                    Reaction{id, target, t < positives[s] ? Polarity::Positive : Polarity::Negative, 1});
            }
            ++serial;
        }
    }
    normalize(d);
    record_suggestions(d, suggestions);
}

Dataset flagged_audit_dataset() {
    using P = ParentStatus;
    Dataset d;
    // Volunteering: Gender x HasParents.
    add_category_cohort(d, "vol", NodeKind::Volunteering,
                        {{profile("", Gender::M, 3, P::MotherOnly), 10, 50},
                         {profile("", Gender::M, 3, P::MotherAndFather), 10, 64},
                         {profile("", Gender::F, 3, P::MotherOnly), 10, 69},
                         {profile("", Gender::F, 3, P::MotherAndFather), 10, 83}});
    // Extracurricular: race codes 1 and 2.
    add_category_cohort(d, "ext", NodeKind::Extracurricular,
                        {{profile("", Gender::F, 1, P::MotherAndFather), 10, 70},
                         {profile("", Gender::F, 2, P::MotherAndFather), 10, 58}});
    // Video: race x immigrant status.
    add_category_cohort(d, "vid", NodeKind::Video,
                        {{profile("", Gender::M, 2, P::Other, false), 10, 50},
                         {profile("", Gender::M, 1, P::Other, false), 10, 69},
                         {profile("", Gender::M, 2, P::Other, true), 10, 65},
                         {profile("", Gender::M, 1, P::Other, true), 10, 84}});
    add_category_cohort(d, "cert", NodeKind::Certification,
                        {{profile("", Gender::F, 4, P::MotherAndFather), 10, 70},
                         {profile("", Gender::F, 4, P::MotherOnly), 10, 52}});
    add_category_cohort(d, "book", NodeKind::Book,
                        {{profile("", Gender::M, 5, P::MotherAndFather), 10, 70},
                         {profile("", Gender::M, 5, P::MotherOnly), 10, 54}});
    normalize(d);
    validate(d);
    return d;
}

std::vector<ExpectedFlag> flagged_audit_cells() {
    return {{ProtectedVariable::Gender, NodeKind::Volunteering, 0.19},
            {ProtectedVariable::RaceCode, NodeKind::Extracurricular, 0.12},
            {ProtectedVariable::RaceCode, NodeKind::Video, 0.19},
            {ProtectedVariable::IsImmigrant, NodeKind::Video, 0.15},
            {ProtectedVariable::HasParents, NodeKind::Volunteering, 0.14},
            {ProtectedVariable::HasParents, NodeKind::Certification, 0.18},
            {ProtectedVariable::HasParents, NodeKind::Book, 0.16}};
}

Dataset metrics_dataset() {
    Dataset d;
    d.nodes = {student("u1", GradeBand::Elementary), student("u2", GradeBand::Middle), student("u3", GradeBand::High),
               node("interest", NodeKind::Interest)};
    for (char c = 'A'; c <= 'J'; ++c) {
        const NodeId id(1, c);
        d.nodes.push_back(node(id, NodeKind::Book));
        d.edges.push_back(make_edge("interest", id, EdgeKind::SimilarTo, 0.5));
    }
    for (const char* u : {"u1", "u2", "u3"}) d.edges.push_back(make_edge(u, "interest", EdgeKind::Accepted, 1.0));
    normalize(d);
    auto s = [](const char* u, const char* t) {
        return Suggestion{u, t, SuggestionSource::Content, 0.5, {u, "interest", t}, 0.5, 0};
    };
    const std::vector<Suggestion> log = {s("u1", "A"), s("u1", "B"), s("u1", "C"), s("u2", "B"), s("u2", "D"),
                                         s("u3", "B")};
    record_suggestions(d, log);
    d.reactions = {{"u1", "A", Polarity::Positive, 1},
                   {"u1", "C", Polarity::Positive, 1},
                   {"u2", "B", Polarity::Negative, 1},
                   {"u2", "D", Polarity::Positive, 1}};
    validate(d);
    return d;
}

RerankFixture rerank_fixture() {
    RerankFixture f;
    auto& d = f.dataset;
    d.nodes = {node("vol-1", NodeKind::Volunteering), node("vol-2", NodeKind::Volunteering),
               node("book-1", NodeKind::Book), node("book-2", NodeKind::Book), node("major-1", NodeKind::Major),
               node("course-1", NodeKind::Course)};
    const std::vector<std::pair<NodeId, Gender>> students = {
        {"f1", Gender::F}, {"f2", Gender::F}, {"m1", Gender::M}, {"m2", Gender::M}};
    for (const auto& [id, g] : students) {
        d.nodes.push_back(student(id));
        d.profiles.push_back(profile(id, g));
    }
    normalize(d);

    auto item = [](const NodeId& s, const NodeId& t, double score) {
        return Suggestion{s, t, SuggestionSource::Collab, 0.5, {}, score, 0};
    };
    f.lists = {
        {"f1", {item("f1", "vol-1", 0.9), item("f1", "vol-2", 0.8), item("f1", "book-1", 0.7), item("f1", "major-1", 0.4)}},
        {"f2", {item("f2", "vol-2", 0.95), item("f2", "vol-1", 0.6), item("f2", "book-2", 0.55), item("f2", "course-1", 0.5)}},
        {"m1", {item("m1", "book-1", 0.9), item("m1", "major-1", 0.8), item("m1", "vol-1", 0.3), item("m1", "course-1", 0.2)}},
        {"m2", {item("m2", "course-1", 0.7), item("m2", "book-2", 0.6), item("m2", "vol-2", 0.5), item("m2", "book-1", 0.1)}},
    };
    return f;
}

}  // namespace equirec::testing
