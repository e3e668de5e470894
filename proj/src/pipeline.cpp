#include "equirec/pipeline.hpp"

#include <algorithm>
#include <iterator>
#include <map>
#include <set>
#include <thread>
#include <tuple>

namespace equirec {

RecommendRound recommend(const Dataset& dataset, std::span<const NodeId> students, const RecommendOptions& options,
                         std::optional<std::size_t> depth) {
    RecommendRound round;
    round.matrix = build_reaction_matrix(dataset.reactions);
    if (!round.matrix.row_index.empty()) {
        NmfOptions nmf;
        nmf.rank = options.rank.value_or(default_rank(round.matrix));
        nmf.seed = options.seed;
        nmf.max_iter = options.max_iter;
        nmf.rel_tol = options.rel_tol;
        round.factors = nmf_factorize(round.matrix, nmf);
    }

    const ContentIndex index(dataset);
    const Timestamp ts = dataset.next_timestamp();
    const std::size_t keep = depth.value_or(options.top_k);

    // One result slot per student, in input order.
    std::vector<std::vector<Suggestion>> per_student(students.size());
    auto work = [&](std::size_t i) {
        const auto& id = students[i];
        const auto subgraph = index.extract(id, options.radius);
        const auto content = to_content_suggestions(rank_targets(subgraph, id), id, keep, ts);
        std::vector<Suggestion> collab;
        if (round.factors) collab = collab_recommend(dataset, *round.factors, round.matrix, id, keep, ts);
        per_student[i] = merge_rerank(content, collab, keep);
    };

    const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, students.size()));
    if (jobs == 1) {
        for (std::size_t i = 0; i < students.size(); ++i) work(i);
    } else {
        std::vector<std::exception_ptr> errors(jobs);
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < students.size(); i += jobs) work(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : workers) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    for (auto& list : per_student) {
        round.suggestions.insert(round.suggestions.end(), std::make_move_iterator(list.begin()),
                                 std::make_move_iterator(list.end()));
    }
    return round;
}

void record_suggestions(Dataset& dataset, std::span<const Suggestion> suggestions) {
    std::vector<GraphEdge> fresh;
    std::set<std::pair<std::string_view, std::string_view>> pending;
    for (const auto& s : suggestions) {
        if (!dataset.find_edge(s.student_id, s.target_id) && pending.emplace(s.student_id, s.target_id).second) {
            fresh.push_back(
                make_edge(s.student_id, s.target_id, EdgeKind::Suggested, std::max(s.confidence, kMinEdgeWeight)));
        }
    }
    if (!fresh.empty()) {
        dataset.edges.insert(dataset.edges.end(), std::make_move_iterator(fresh.begin()),
                             std::make_move_iterator(fresh.end()));
        std::sort(dataset.edges.begin(), dataset.edges.end(),
                  [](const GraphEdge& x, const GraphEdge& y) { return std::tie(x.src, x.dst) < std::tie(y.src, y.dst); });
    }
    dataset.suggestions.insert(dataset.suggestions.end(), suggestions.begin(), suggestions.end());
}

std::vector<CandidateList> group_by_student(std::span<const Suggestion> suggestions) {
    std::vector<CandidateList> out;
    std::map<NodeId, std::size_t> slot;
    for (const auto& s : suggestions) {
        auto [it, inserted] = slot.emplace(s.student_id, out.size());
        if (inserted) out.push_back(CandidateList{s.student_id, {}});
        out[it->second].items.push_back(s);
    }
    return out;
}

}  // namespace equirec
