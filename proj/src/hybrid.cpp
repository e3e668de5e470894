#include "equirec/hybrid.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include <fmt/format.h>

namespace equirec {

namespace {

int source_rank(SuggestionSource s) {
    switch (s) {
        case SuggestionSource::Both: return 0;
        case SuggestionSource::Content: return 1;
        case SuggestionSource::Collab: return 2;
    }
    return 3;
}

std::vector<double> min_max(std::span<const Suggestion> list) {
    std::vector<double> out(list.size(), 1.0);
    if (list.size() < 2) return out;
    auto [lo, hi] = std::minmax_element(list.begin(), list.end(),
                                        [](const Suggestion& a, const Suggestion& b) { return a.score < b.score; });
    const double span = hi->score - lo->score;
    if (span <= 0.0) return out;
    for (std::size_t i = 0; i < list.size(); ++i) out[i] = (list[i].score - lo->score) / span;
    return out;
}

bool in_category(const Dataset& dataset, const Suggestion& s, NodeKind category) {
    const auto* node = dataset.find_node(s.target_id);
    return node && node->kind == category;
}

struct GroupExposure {
    std::map<std::string, std::pair<double, std::size_t>> totals;  // group -> (sum of counts, students)

    std::optional<std::pair<std::string, std::string>> widest_pair(double& gap) const {
        gap = 0.0;
        std::optional<std::pair<std::string, std::string>> pair;
        for (auto a = totals.begin(); a != totals.end(); ++a) {
            for (auto b = std::next(a); b != totals.end(); ++b) {
                const double ma = a->second.first / static_cast<double>(a->second.second);
                const double mb = b->second.first / static_cast<double>(b->second.second);
                const double d = std::abs(ma - mb);
                if (!pair || d > gap) {
                    gap = d;
                    // First member is the over-exposed group.
                    pair = ma >= mb ? std::pair{a->first, b->first} : std::pair{b->first, a->first};
                }
            }
        }
        return pair;
    }
};

GroupExposure measure(std::span<const CandidateList> lists, std::size_t k, const Dataset& dataset,
                      ProtectedVariable variable, NodeKind category) {
    GroupExposure exposure;
    for (const auto& list : lists) {
        const auto* profile = dataset.find_profile(list.student_id);
        if (!profile) throw Error(ErrorCode::MissingProfile, fmt::format("no profile for '{}'", list.student_id));
        const std::size_t cut = std::min(k, list.items.size());
        const auto count = std::count_if(list.items.begin(), list.items.begin() + static_cast<std::ptrdiff_t>(cut),
                                         [&](const Suggestion& s) { return in_category(dataset, s, category); });
        auto& [sum, students] = exposure.totals[group_of(*profile, variable)];
        sum += static_cast<double>(count);
        ++students;
    }
    return exposure;
}

}  // namespace

std::vector<Suggestion> merge_rerank(std::span<const Suggestion> content, std::span<const Suggestion> collab,
                                     std::size_t k_final) {
    std::optional<NodeId> student;
    for (const auto* list : {&content, &collab}) {
        for (const auto& s : *list) {
            if (!student) student = s.student_id;
            if (s.student_id != *student) {
                throw Error(ErrorCode::StudentMismatch,
                            fmt::format("suggestions for '{}' and '{}' cannot be merged", *student, s.student_id));
            }
        }
    }

    const auto content_norm = min_max(content);
    const auto collab_norm = min_max(collab);
    std::map<NodeId, std::size_t> collab_pos;
    for (std::size_t i = 0; i < collab.size(); ++i) collab_pos.emplace(collab[i].target_id, i);

    std::vector<Suggestion> merged;
    std::vector<bool> collab_used(collab.size(), false);
    for (std::size_t i = 0; i < content.size(); ++i) {
        Suggestion s = content[i];
        if (auto it = collab_pos.find(s.target_id); it != collab_pos.end()) {
            s.source = SuggestionSource::Both;
            s.score = kBothSourceBonus + (content_norm[i] + collab_norm[it->second]) / 2.0;
            collab_used[it->second] = true;
        } else {
            s.score = content_norm[i];
        }
        merged.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < collab.size(); ++i) {
        if (collab_used[i]) continue;
        Suggestion s = collab[i];
        s.score = collab_norm[i];
        merged.push_back(std::move(s));
    }

    std::sort(merged.begin(), merged.end(), [](const Suggestion& a, const Suggestion& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.source != b.source) return source_rank(a.source) < source_rank(b.source);
        return a.target_id < b.target_id;
    });
    if (merged.size() > k_final) merged.resize(k_final);
    return merged;
}

double exposure_gap(std::span<const CandidateList> lists, std::size_t k, const Dataset& dataset,
                    ProtectedVariable variable, NodeKind category) {
    double gap = 0.0;
    measure(lists, k, dataset, variable, category).widest_pair(gap);
    return gap;
}

RerankResult fairness_rerank(std::span<const CandidateList> lists, std::size_t k, const Dataset& dataset,
                             ProtectedVariable variable, NodeKind category, double max_gap) {
    RerankResult result;
    result.lists.assign(lists.begin(), lists.end());
    result.gap_before = exposure_gap(result.lists, k, dataset, variable, category);
    result.gap_after = result.gap_before;

    auto by_score = [](const Suggestion& a, const Suggestion& b) { return a.score > b.score; };

    while (result.gap_after > max_gap) {
        double gap = 0.0;
        const auto pair = measure(result.lists, k, dataset, variable, category).widest_pair(gap);
        if (!pair) break;
        const std::string& over = pair->first;

        struct Candidate {
            std::size_t list;
            std::size_t demote;
            std::size_t promote;
            double loss;
        };
        std::optional<Candidate> choice;
        for (std::size_t li = 0; li < result.lists.size(); ++li) {
            const auto& list = result.lists[li];
            if (group_of(*dataset.find_profile(list.student_id), variable) != over) continue;
            const std::size_t cut = std::min(k, list.items.size());
            std::optional<std::size_t> demote, promote;
            for (std::size_t i = 0; i < cut; ++i) {
                if (!in_category(dataset, list.items[i], category)) continue;
                if (!demote || list.items[i].score <= list.items[*demote].score) demote = i;
            }
            for (std::size_t i = cut; i < list.items.size(); ++i) {
                if (in_category(dataset, list.items[i], category)) continue;
                if (!promote || list.items[i].score > list.items[*promote].score) promote = i;
            }
            if (!demote || !promote) continue;
            const double loss = list.items[*demote].score - list.items[*promote].score;
            if (!choice || loss < choice->loss) choice = Candidate{li, *demote, *promote, loss};
        }
        if (!choice) {
            result.feasible = false;
            break;
        }

        auto& list = result.lists[choice->list];
        result.swaps.push_back(RerankSwap{list.student_id, list.items[choice->demote].target_id,
                                          list.items[choice->promote].target_id, choice->loss});
        std::swap(list.items[choice->demote], list.items[choice->promote]);
        const auto cut = static_cast<std::ptrdiff_t>(std::min(k, list.items.size()));
        std::stable_sort(list.items.begin(), list.items.begin() + cut, by_score);
        std::stable_sort(list.items.begin() + cut, list.items.end(), by_score);

        result.gap_after = exposure_gap(result.lists, k, dataset, variable, category);
    }
    return result;
}

}  // namespace equirec
