#include "equirec/content.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>

#include <fmt/format.h>

namespace equirec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

double edge_cost(double weight) { return -std::log(weight); }

std::vector<double> dijkstra(const Neighborhood& g) {
    std::vector<double> dist(g.node_count(), kInf);
    using Item = std::pair<double, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[g.center_index] = 0.0;
    queue.emplace(0.0, g.center_index);
    while (!queue.empty()) {
        auto [d, u] = queue.top();
        queue.pop();
        if (d > dist[u]) continue;
        for (const auto& arc : g.adjacency[u]) {
            const double candidate = d + edge_cost(arc.weight);
            if (candidate < dist[arc.to]) {
                dist[arc.to] = candidate;
                queue.emplace(candidate, arc.to);
            }
        }
    }
    return dist;
}

// Enumerates simple paths from the center whose every prefix is min-cost
// (within tolerance).
class TightPathEnumerator {
public:
    TightPathEnumerator(const Neighborhood& g, const std::vector<double>& dist, const RankOptions& options)
        : g_(g), dist_(dist), options_(options), on_path_(g.node_count(), false) {}

    // Single pass counting every node at once. Returns false if the work
    // budget ran out; counts are then unusable.
    bool count_all(std::vector<std::size_t>& counts, std::vector<std::vector<std::uint32_t>>& best) {
        counts.assign(g_.node_count(), 0);
        best.assign(g_.node_count(), {});
        states_ = 0;
        path_.clear();
        return visit_all(g_.center_index, 0.0, counts, best);
    }

    // Per-target search restricted to nodes that can still reach the target
    // over tight arcs; stops at the cap.
    std::size_t count_one(std::uint32_t target, std::vector<std::uint32_t>& best) {
        can_reach_ = reverse_tight_reachability(target);
        target_ = target;
        found_ = 0;
        best.clear();
        best_ = &best;
        path_.clear();
        visit_one(g_.center_index, 0.0);
        return found_;
    }

private:
    bool tight(std::uint32_t v, double cost) const { return cost <= dist_[v] + options_.tie_tolerance; }

    bool visit_all(std::uint32_t u, double cost, std::vector<std::size_t>& counts,
                   std::vector<std::vector<std::uint32_t>>& best) {
        if (++states_ > options_.enumeration_budget) return false;
        on_path_[u] = true;
        path_.push_back(u);
        if (u != g_.center_index) {
            if (counts[u] == 0) best[u] = path_;
            if (counts[u] < options_.max_path_count) ++counts[u];
        }
        bool ok = true;
        for (const auto& arc : g_.adjacency[u]) {
            if (on_path_[arc.to]) continue;
            const double next = cost + edge_cost(arc.weight);
            if (!tight(arc.to, next)) continue;
            if (!visit_all(arc.to, next, counts, best)) {
                ok = false;
                break;
            }
        }
        path_.pop_back();
        on_path_[u] = false;
        return ok;
    }

    void visit_one(std::uint32_t u, double cost) {
        path_.push_back(u);
        if (u == target_) {
            if (found_ == 0) *best_ = path_;
            ++found_;
            path_.pop_back();
            return;
        }
        on_path_[u] = true;
        for (const auto& arc : g_.adjacency[u]) {
            if (found_ >= options_.max_path_count) break;
            if (on_path_[arc.to] || !can_reach_[arc.to]) continue;
            const double next = cost + edge_cost(arc.weight);
            if (tight(arc.to, next)) visit_one(arc.to, next);
        }
        on_path_[u] = false;
        path_.pop_back();
    }

    std::vector<bool> reverse_tight_reachability(std::uint32_t target) const {
        std::vector<bool> seen(g_.node_count(), false);
        std::deque<std::uint32_t> queue{target};
        seen[target] = true;
        while (!queue.empty()) {
            const auto v = queue.front();
            queue.pop_front();
            // Undirected storage: arc v->u doubles as u->v.
            for (const auto& arc : g_.adjacency[v]) {
                const auto u = arc.to;
                if (seen[u] || dist_[u] == kInf) continue;
                if (tight(v, dist_[u] + edge_cost(arc.weight))) {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        return seen;
    }

    const Neighborhood& g_;
    const std::vector<double>& dist_;
    const RankOptions& options_;
    std::vector<bool> on_path_;
    std::vector<std::uint32_t> path_;
    std::size_t states_ = 0;

    std::vector<bool> can_reach_;
    std::uint32_t target_ = kNone;
    std::size_t found_ = 0;
    std::vector<std::uint32_t>* best_ = nullptr;
};

}  // namespace

std::size_t Neighborhood::edge_count() const {
    std::size_t arcs = 0;
    for (const auto& list : adjacency) arcs += list.size();
    return arcs / 2;
}

bool Neighborhood::contains(std::string_view id) const { return std::binary_search(ids.begin(), ids.end(), id); }

ContentIndex::ContentIndex(const Dataset& dataset) : dataset_(&dataset), adjacency_(dataset.nodes.size()) {
    for (const auto& e : dataset.edges) {
        const auto a = index_of(e.src);
        const auto b = index_of(e.dst);
        adjacency_[a].push_back(Arc{b, e.weight, e.kind});
        adjacency_[b].push_back(Arc{a, e.weight, e.kind});
    }
    for (auto& list : adjacency_) {
        std::sort(list.begin(), list.end(), [](const Arc& x, const Arc& y) { return x.to < y.to; });
    }
    for (const auto& s : dataset.suggestions) suggested_[s.student_id].insert(s.target_id);
    for (const auto& r : dataset.reactions) {
        if (r.polarity == Polarity::Negative) rejected_[r.student_id].insert(r.target_id);
    }
}

std::uint32_t ContentIndex::index_of(std::string_view id) const {
    const auto& nodes = dataset_->nodes;
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const EntityNode& n, std::string_view key) { return n.id < key; });
    if (it == nodes.end() || it->id != id) return kNone;
    return static_cast<std::uint32_t>(it - nodes.begin());
}

Neighborhood ContentIndex::extract(std::string_view student_id, int radius) const {
    const auto start = index_of(student_id);
    const auto& nodes = dataset_->nodes;
    if (start == kNone || nodes[start].kind != NodeKind::Student) {
        throw Error(ErrorCode::UnknownStudent, fmt::format("no student '{}'", student_id));
    }
    auto traversable = [&](const Arc& arc) {
        return arc.kind != EdgeKind::Rejected && nodes[arc.to].kind != NodeKind::Student;
    };

    std::vector<int> hops(nodes.size(), -1);
    std::vector<std::uint32_t> members{start};
    hops[start] = 0;
    for (std::size_t head = 0; head < members.size(); ++head) {
        const auto u = members[head];
        if (hops[u] >= radius) continue;
        for (const auto& arc : adjacency_[u]) {
            if (!traversable(arc) || hops[arc.to] >= 0) continue;
            hops[arc.to] = hops[u] + 1;
            members.push_back(arc.to);
        }
    }
    std::sort(members.begin(), members.end());

    std::vector<std::uint32_t> local(nodes.size(), kNone);
    Neighborhood g;
    g.center = std::string(student_id);
    for (std::uint32_t i = 0; i < members.size(); ++i) {
        local[members[i]] = i;
        g.ids.push_back(nodes[members[i]].id);
        g.kinds.push_back(nodes[members[i]].kind);
    }
    g.center_index = local[start];
    g.adjacency.resize(members.size());
    g.blocked.assign(members.size(), false);
    for (std::uint32_t i = 0; i < members.size(); ++i) {
        for (const auto& arc : adjacency_[members[i]]) {
            if (arc.kind == EdgeKind::Rejected || local[arc.to] == kNone) continue;
            g.adjacency[i].push_back(Neighborhood::Arc{local[arc.to], arc.weight});
        }
    }

    for (const auto& arc : adjacency_[start]) {
        const bool decided =
            arc.kind == EdgeKind::Accepted || arc.kind == EdgeKind::Rejected || arc.kind == EdgeKind::Suggested;
        if (decided && local[arc.to] != kNone) g.blocked[local[arc.to]] = true;
    }
    for (const auto* history : {&suggested_, &rejected_}) {
        auto it = history->find(student_id);
        if (it == history->end()) continue;
        for (const auto& target : it->second) {
            const auto idx = index_of(target);
            if (idx != kNone && local[idx] != kNone) g.blocked[local[idx]] = true;
        }
    }
    return g;
}

Neighborhood extract_neighborhood(const Dataset& dataset, std::string_view student_id, int radius) {
    return ContentIndex(dataset).extract(student_id, radius);
}

std::vector<PathResult> rank_targets(const Neighborhood& g, std::string_view student_id, const RankOptions& options) {
    if (g.center != student_id) {
        throw Error(ErrorCode::UnknownStudent, fmt::format("neighborhood is centered on '{}', not '{}'", g.center, student_id));
    }
    const auto dist = dijkstra(g);

    auto is_candidate = [&](std::uint32_t v) {
        return v != g.center_index && is_target_kind(g.kinds[v]) && !g.blocked[v] && dist[v] < kInf;
    };

    TightPathEnumerator enumerator(g, dist, options);
    std::vector<std::size_t> counts;
    std::vector<std::vector<std::uint32_t>> best;
    if (!enumerator.count_all(counts, best)) {
        counts.assign(g.node_count(), 0);
        best.assign(g.node_count(), {});
        for (std::uint32_t v = 0; v < g.node_count(); ++v) {
            if (is_candidate(v)) counts[v] = enumerator.count_one(v, best[v]);
        }
    }

    std::vector<PathResult> results;
    for (std::uint32_t v = 0; v < g.node_count(); ++v) {
        if (!is_candidate(v) || counts[v] == 0) continue;
        PathResult r;
        r.target_id = g.ids[v];
        r.min_cost = dist[v];
        r.path_weight = 1.0;
        for (std::size_t i = 0; i < best[v].size(); ++i) {
            r.best_path.push_back(g.ids[best[v][i]]);
            if (i == 0) continue;
            for (const auto& arc : g.adjacency[best[v][i - 1]]) {
                if (arc.to == best[v][i]) {
                    r.path_weight *= arc.weight;
                    break;
                }
            }
        }
        r.n_shortest_simple_paths = std::min(counts[v], options.max_path_count);
        r.count_truncated = counts[v] >= options.max_path_count;
        r.score = r.path_weight * static_cast<double>(r.n_shortest_simple_paths);
        results.push_back(std::move(r));
    }
    std::sort(results.begin(), results.end(), [](const PathResult& a, const PathResult& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.path_weight != b.path_weight) return a.path_weight > b.path_weight;
        return a.target_id < b.target_id;
    });
    return results;
}

std::vector<Suggestion> to_content_suggestions(std::span<const PathResult> ranked, std::string_view student_id,
                                               std::size_t k, Timestamp ts) {
    std::vector<Suggestion> out;
    for (const auto& r : ranked.first(std::min(k, ranked.size()))) {
        Suggestion s;
        s.student_id = std::string(student_id);
        s.target_id = r.target_id;
        s.source = SuggestionSource::Content;
        s.confidence = std::clamp(r.path_weight, std::numeric_limits<double>::min(), 1.0);
        s.reasoning = r.best_path;
        s.score = r.score;
        s.ts = ts;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Suggestion> content_recommend(const Dataset& dataset, std::string_view student_id, int radius,
                                          std::size_t k, Timestamp ts) {
    const auto subgraph = extract_neighborhood(dataset, student_id, radius);
    const auto ranked = rank_targets(subgraph, student_id);
    return to_content_suggestions(ranked, student_id, k, ts);
}

}  // namespace equirec
