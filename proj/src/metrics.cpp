#include "equirec/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

namespace equirec {

double coverage(std::span<const Suggestion> suggestions, std::span<const NodeId> targets) {
    if (targets.empty()) throw Error(ErrorCode::EmptyTargetSet, "coverage needs at least one target");
    const std::set<std::string_view> scope(targets.begin(), targets.end());
    std::set<std::string_view> hit;
    for (const auto& s : suggestions) {
        if (scope.contains(s.target_id)) hit.insert(s.target_id);
    }
    return static_cast<double>(hit.size()) / static_cast<double>(scope.size());
}

ReactionCounts count_reactions(std::span<const Suggestion> suggestions, const ReactionIndex& reactions) {
    ReactionCounts counts;
    std::set<std::pair<std::string_view, std::string_view>> seen;
    for (const auto& s : suggestions) {
        if (!seen.emplace(s.student_id, s.target_id).second) continue;
        const auto polarity = reactions.latest(s.student_id, s.target_id);
        if (!polarity) continue;
        if (*polarity == Polarity::Positive) {
            ++counts.positives;
        } else {
            ++counts.negatives;
        }
    }
    return counts;
}

std::optional<double> precision(std::span<const Suggestion> suggestions, const ReactionIndex& reactions) {
    const auto counts = count_reactions(suggestions, reactions);
    if (counts.reacted() == 0) return std::nullopt;
    return static_cast<double>(counts.positives) / static_cast<double>(counts.reacted());
}

std::vector<RankedList> ranked_lists(std::span<const Suggestion> suggestions) {
    std::map<NodeId, RankedList> by_student;
    std::map<NodeId, std::set<NodeId>> seen;
    for (const auto& s : suggestions) {
        auto& list = by_student[s.student_id];
        list.student_id = s.student_id;
        if (seen[s.student_id].insert(s.target_id).second) list.targets.push_back(s.target_id);
    }
    std::vector<RankedList> out;
    for (auto& [id, list] : by_student) out.push_back(std::move(list));
    return out;
}

std::optional<double> mean_average_precision(std::span<const RankedList> lists, const ReactionIndex& reactions,
                                             std::optional<std::size_t> cutoff) {
    double sum = 0.0;
    std::size_t users = 0;
    for (const auto& list : lists) {
        const std::size_t depth = cutoff ? std::min(*cutoff, list.targets.size()) : list.targets.size();
        bool any_reacted = false;
        std::size_t relevant = 0;
        double precision_sum = 0.0;
        for (std::size_t i = 0; i < depth; ++i) {
            const auto polarity = reactions.latest(list.student_id, list.targets[i]);
            if (!polarity) continue;
            any_reacted = true;
            if (*polarity == Polarity::Positive) {
                ++relevant;
                precision_sum += static_cast<double>(relevant) / static_cast<double>(i + 1);
            }
        }
        if (!any_reacted) continue;
        ++users;
        sum += relevant ? precision_sum / static_cast<double>(relevant) : 0.0;
    }
    if (users == 0) return std::nullopt;
    return sum / static_cast<double>(users);
}

std::optional<double> personalization_rate(std::span<const RankedList> lists) {
    if (lists.size() < 2) return std::nullopt;
    std::vector<std::set<std::string_view>> sets;
    for (const auto& l : lists) sets.emplace_back(l.targets.begin(), l.targets.end());
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            std::size_t common = 0;
            for (const auto& t : sets[i]) common += sets[j].count(t);
            const std::size_t unite = sets[i].size() + sets[j].size() - common;
            total += unite ? static_cast<double>(common) / static_cast<double>(unite) : 1.0;
            ++pairs;
        }
    }
    return 1.0 - total / static_cast<double>(pairs);
}

std::vector<MetricReport> metric_sweep(const Dataset& dataset, std::span<const Suggestion> suggestions) {
    const ReactionIndex reactions(dataset.reactions);

    std::vector<std::optional<NodeKind>> categories{std::nullopt};
    for (auto kind : target_kinds()) categories.emplace_back(kind);
    std::vector<std::optional<GradeBand>> bands{std::nullopt};
    for (auto band : grade_bands()) bands.emplace_back(band);

    std::vector<MetricReport> reports;
    for (const auto& category : categories) {
        std::vector<NodeId> targets;
        for (const auto& n : dataset.nodes) {
            if (is_target_kind(n.kind) && (!category || n.kind == *category)) targets.push_back(n.id);
        }
        for (const auto& band : bands) {
            std::vector<Suggestion> scoped;
            for (const auto& s : suggestions) {
                const auto* target = dataset.find_node(s.target_id);
                const auto* student = dataset.find_node(s.student_id);
                if (!target || !student) continue;
                if (category && target->kind != *category) continue;
                if (band && student->grade_band != band) continue;
                scoped.push_back(s);
            }
            if (scoped.empty()) continue;

            const auto lists = ranked_lists(scoped);
            MetricReport r;
            r.category = category;
            r.grade_band = band;
            r.coverage = coverage(scoped, targets);
            r.precision = precision(scoped, reactions);
            r.map = mean_average_precision(lists, reactions);
            r.personalization = personalization_rate(lists);
            r.n_suggestions = scoped.size();
            r.n_reacted = count_reactions(scoped, reactions).reacted();
            r.n_users = lists.size();
            reports.push_back(std::move(r));
        }
    }
    return reports;
}

namespace {

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string("undef"); }

}  // namespace

nlohmann::ordered_json metrics_to_json(std::span<const MetricReport> reports) {
    auto out = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["scope"] = {{"category", r.category ? std::string(to_string(*r.category)) : "All"},
                      {"grade_band", r.grade_band ? std::string(to_string(*r.grade_band)) : "All"}};
        j["coverage"] = r.coverage;
        j["precision"] = optional_number(r.precision);
        j["map"] = optional_number(r.map);
        j["personalization"] = optional_number(r.personalization);
        j["n_suggestions"] = r.n_suggestions;
        j["n_reacted"] = r.n_reacted;
        j["n_users"] = r.n_users;
        out.push_back(std::move(j));
    }
    return out;
}

std::string format_metric_table(std::span<const MetricReport> reports) {
    std::string out = fmt::format("{:<16} {:<10} {:>8} {:>9} {:>8} {:>8} {:>6} {:>7} {:>6}\n", "category", "grade",
                                  "coverage", "precision", "map", "personal", "sugg", "reacted", "users");
    for (const auto& r : reports) {
        out += fmt::format("{:<16} {:<10} {:>8.4f} {:>9} {:>8} {:>8} {:>6} {:>7} {:>6}\n",
                           r.category ? to_string(*r.category) : "All", r.grade_band ? to_string(*r.grade_band) : "All",
                           r.coverage, cell(r.precision), cell(r.map), cell(r.personalization), r.n_suggestions,
                           r.n_reacted, r.n_users);
    }
    return out;
}

}  // namespace equirec
