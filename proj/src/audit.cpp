#include "equirec/audit.hpp"

#include <algorithm>
#include <array>
#include <set>

#include <fmt/format.h>

#include "equirec/metrics.hpp"

namespace equirec {

namespace {

struct ReactedPair {
    const Suggestion* suggestion;
    std::string group;
    Polarity polarity;
};

// Distinct suggested pairs of one category carrying a latest reaction,
// labelled with the student's group.
std::vector<ReactedPair> reacted_pairs(const Dataset& dataset, std::span<const Suggestion> suggestions,
                                       const ReactionIndex& reactions, ProtectedVariable variable, NodeKind category) {
    std::vector<ReactedPair> out;
    std::set<std::pair<std::string_view, std::string_view>> seen;
    for (const auto& s : suggestions) {
        const auto* target = dataset.find_node(s.target_id);
        if (!target || target->kind != category) continue;
        if (!seen.emplace(s.student_id, s.target_id).second) continue;
        const auto polarity = reactions.latest(s.student_id, s.target_id);
        if (!polarity) continue;
        const auto* profile = dataset.find_profile(s.student_id);
        if (!profile) throw Error(ErrorCode::MissingProfile, fmt::format("no profile for reacting student '{}'", s.student_id));
        out.push_back(ReactedPair{&s, group_of(*profile, variable), *polarity});
    }
    return out;
}

GroupPrecision cell_for(std::span<const ReactedPair> pairs, std::string_view group, NodeKind category,
                        std::span<const Suggestion> suggestions_of_group, const ReactionIndex& reactions,
                        std::size_t n_sample) {
    std::set<std::string_view> active;
    for (const auto& p : pairs) {
        if (p.group == group) active.insert(p.suggestion->student_id);
    }
    if (active.size() < n_sample) return ExcludedCell{std::string(group), category, active.size()};
    // Same precision routine as the evaluation metrics.
    const auto counts = count_reactions(suggestions_of_group, reactions);
    GroupCell cell;
    cell.group = std::string(group);
    cell.category = category;
    cell.n_active_users = active.size();
    cell.n_positive = counts.positives;
    cell.n_negative = counts.negatives;
    cell.precision = static_cast<double>(counts.positives) / static_cast<double>(counts.reacted());
    return cell;
}

std::vector<Suggestion> suggestions_of(std::span<const ReactedPair> pairs, std::string_view group) {
    std::vector<Suggestion> out;
    for (const auto& p : pairs) {
        if (p.group == group) out.push_back(*p.suggestion);
    }
    return out;
}

void require_group(ProtectedVariable variable, std::string_view group) {
    const auto labels = group_labels(variable);
    if (std::find(labels.begin(), labels.end(), group) == labels.end()) {
        throw Error(ErrorCode::UnknownGroup, fmt::format("'{}' is not a group of {}", group, to_string(variable)));
    }
}

std::vector<TargetCount> ranked_counts(const std::map<NodeId, std::size_t>& counts) {
    std::vector<TargetCount> out;
    for (const auto& [target, n] : counts) {
        if (n > 0) out.push_back(TargetCount{target, n});
    }
    std::stable_sort(out.begin(), out.end(), [](const TargetCount& a, const TargetCount& b) { return a.count > b.count; });
    return out;
}

}  // namespace

std::string_view to_string(CategoryStatus status) {
    switch (status) {
        case CategoryStatus::Fair: return "fair";
        case CategoryStatus::Flagged: return "flagged";
        case CategoryStatus::Vacuous: return "fair_by_vacuity";
    }
    return "?";
}

void AuditConfig::check() const {
    if (!(delta_p > 0.0 && delta_p < 1.0)) throw Error(ErrorCode::ConfigError, fmt::format("delta_p {} outside (0,1)", delta_p));
    if (n_sample < 1) throw Error(ErrorCode::ConfigError, "n_sample must be at least 1");
    for (auto kind : categories) {
        if (!is_target_kind(kind)) throw Error(ErrorCode::ConfigError, fmt::format("{} is not a target category", to_string(kind)));
    }
}

std::vector<NodeKind> AuditConfig::resolved_categories() const {
    if (!categories.empty()) return categories;
    return {target_kinds().begin(), target_kinds().end()};
}

GroupPrecision group_precision(const Dataset& dataset, std::span<const Suggestion> suggestions,
                               ProtectedVariable variable, std::string_view group, NodeKind category,
                               std::size_t n_sample) {
    require_group(variable, group);
    const ReactionIndex reactions(dataset.reactions);
    const auto pairs = reacted_pairs(dataset, suggestions, reactions, variable, category);
    return cell_for(pairs, group, category, suggestions_of(pairs, group), reactions, n_sample);
}

AuditReport run_audit(const Dataset& dataset, std::span<const Suggestion> suggestions, const AuditConfig& config) {
    config.check();
    AuditReport report;
    report.config = config;
    report.config.categories = config.resolved_categories();

    const ReactionIndex reactions(dataset.reactions);
    const auto labels = group_labels(config.variable);

    for (const auto category : report.config.categories) {
        const auto pairs = reacted_pairs(dataset, suggestions, reactions, config.variable, category);
        std::vector<GroupCell> gated;
        for (const auto& group : labels) {
            auto result = cell_for(pairs, group, category, suggestions_of(pairs, group), reactions, config.n_sample);
            if (auto* cell = std::get_if<GroupCell>(&result)) {
                gated.push_back(*cell);
            } else {
                report.excluded.push_back(std::get<ExcludedCell>(result));
            }
        }

        CategorySummary summary;
        summary.category = category;
        summary.n_gated_groups = gated.size();
        std::vector<AuditFlag> flags;
        for (std::size_t a = 0; a < gated.size(); ++a) {
            for (std::size_t b = a + 1; b < gated.size(); ++b) {
                const double variation = std::abs(gated[a].precision - gated[b].precision);
                summary.max_variation = std::max(summary.max_variation.value_or(0.0), variation);
                if (variation - config.delta_p > kVariationTolerance) {
                    flags.push_back(AuditFlag{category, {gated[a].group, gated[b].group}, variation});
                }
            }
        }
        if (gated.size() < 2) {
            summary.status = CategoryStatus::Vacuous;
            report.warnings.push_back(fmt::format("{} / {}: {} group(s) reach {} active users; no comparison possible",
                                                  to_string(config.variable), to_string(category), gated.size(),
                                                  config.n_sample));
        } else {
            summary.status = flags.empty() ? CategoryStatus::Fair : CategoryStatus::Flagged;
        }

        report.cells.insert(report.cells.end(), gated.begin(), gated.end());
        for (const auto& flag : flags) {
            report.drilldowns.push_back(drilldown(dataset, suggestions, config.variable, category, flag.group_pair));
        }
        report.flags.insert(report.flags.end(), flags.begin(), flags.end());
        report.categories.push_back(summary);
    }
    return report;
}

DrilldownReport drilldown(const Dataset& dataset, std::span<const Suggestion> suggestions, ProtectedVariable variable,
                          NodeKind category, const GroupPair& group_pair) {
    require_group(variable, group_pair.first);
    require_group(variable, group_pair.second);
    const ReactionIndex reactions(dataset.reactions);
    const auto pairs = reacted_pairs(dataset, suggestions, reactions, variable, category);
    const std::array<std::string, 2> groups{group_pair.first, group_pair.second};

    std::array<std::map<NodeId, std::size_t>, 2> negative, positive;
    bool any = false;
    for (const auto& p : pairs) {
        for (std::size_t g = 0; g < 2; ++g) {
            if (p.group != groups[g]) continue;
            any = true;
            auto& bucket = p.polarity == Polarity::Negative ? negative[g] : positive[g];
            ++bucket[p.suggestion->target_id];
            // Both maps share keys; absent counts read as zero.
            negative[1 - g].try_emplace(p.suggestion->target_id, 0);
            positive[1 - g].try_emplace(p.suggestion->target_id, 0);
            negative[g].try_emplace(p.suggestion->target_id, 0);
            positive[g].try_emplace(p.suggestion->target_id, 0);
        }
    }
    if (!any) {
        throw Error(ErrorCode::NoReactions, fmt::format("no reactions from {} or {} on {}", groups[0], groups[1],
                                                        to_string(category)));
    }

    DrilldownReport report;
    report.category = category;
    report.group_pair = group_pair;
    for (std::size_t g = 0; g < 2; ++g) {
        report.top_reactions_by_rank.push_back(
            GroupReactionRanking{groups[g], ranked_counts(negative[g]), ranked_counts(positive[g])});
    }

    auto unique = [&](const std::array<std::map<NodeId, std::size_t>, 2>& counts) {
        std::vector<UniqueReaction> out;
        for (const auto& [target, n0] : counts[0]) {
            const std::size_t n1 = counts[1].at(target);
            if (n0 > 0 && n1 == 0) out.push_back(UniqueReaction{target, groups[0], n0});
            if (n1 > 0 && n0 == 0) out.push_back(UniqueReaction{target, groups[1], n1});
        }
        return out;
    };
    report.unique_negatives = unique(negative);
    report.unique_positives = unique(positive);

    std::map<std::string_view, std::string> group_by_student;
    for (const auto& p : pairs) group_by_student.emplace(p.suggestion->student_id, p.group);

    for (const auto& [target, n0] : negative[0]) {
        if (n0 == 0 && negative[1].at(target) == 0) continue;
        ReasoningComparison cmp;
        cmp.target_id = target;
        std::array<std::set<std::vector<NodeId>>, 2> paths;
        for (const auto& s : suggestions) {
            if (s.target_id != target) continue;
            const auto* profile = dataset.find_profile(s.student_id);
            if (!profile) continue;
            const auto group = group_of(*profile, variable);
            for (std::size_t g = 0; g < 2; ++g) {
                if (group != groups[g]) continue;
                std::vector<NodeId> tail;
                if (!s.reasoning.empty()) tail.assign(s.reasoning.begin() + 1, s.reasoning.end());
                paths[g].insert(std::move(tail));
            }
        }
        for (std::size_t g = 0; g < 2; ++g) cmp.paths[groups[g]].assign(paths[g].begin(), paths[g].end());
        cmp.identical = paths[0] == paths[1];
        report.reasoning_comparison.push_back(std::move(cmp));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using ojson = nlohmann::ordered_json;

ojson pair_json(const GroupPair& p) { return ojson::array({p.first, p.second}); }

ojson counts_json(const std::vector<TargetCount>& counts) {
    auto out = ojson::array();
    for (const auto& c : counts) out.push_back({{"target_id", c.target_id}, {"count", c.count}});
    return out;
}

ojson unique_json(const std::vector<UniqueReaction>& items) {
    auto out = ojson::array();
    for (const auto& u : items) out.push_back({{"target_id", u.target_id}, {"group", u.group}, {"count", u.count}});
    return out;
}

std::string pair_label(const GroupPair& p) { return fmt::format("({},{})", p.first, p.second); }

std::string path_label(const std::vector<NodeId>& path) {
    if (path.empty()) return "(collaborative filtering)";
    return fmt::format("{}", fmt::join(path, " -> "));
}

}  // namespace

ojson audit_to_json(const AuditReport& r) {
    ojson j;
    ojson config;
    config["variable"] = to_string(r.config.variable);
    config["delta_p"] = r.config.delta_p;
    config["n_sample"] = r.config.n_sample;
    auto categories = ojson::array();
    for (auto c : r.config.categories) categories.push_back(to_string(c));
    config["categories"] = categories;
    j["config"] = config;
    j["metadata"] = {{"comparison_scope", "all_pairs"},
                     {"active_user", "group member with >= 1 reaction in the category"},
                     {"variation_tolerance", kVariationTolerance}};

    auto cells = ojson::array();
    for (const auto& c : r.cells) {
        cells.push_back({{"group", c.group},
                         {"category", to_string(c.category)},
                         {"precision", c.precision},
                         {"n_active_users", c.n_active_users},
                         {"n_positive", c.n_positive},
                         {"n_negative", c.n_negative}});
    }
    j["cells"] = cells;

    auto flags = ojson::array();
    for (const auto& f : r.flags) {
        flags.push_back({{"category", to_string(f.category)}, {"group_pair", pair_json(f.group_pair)}, {"variation", f.variation}});
    }
    j["flags"] = flags;

    auto excluded = ojson::array();
    for (const auto& e : r.excluded) {
        excluded.push_back({{"group", e.group}, {"category", to_string(e.category)}, {"n_active_users", e.n_active_users}});
    }
    j["excluded"] = excluded;

    auto summaries = ojson::array();
    for (const auto& s : r.categories) {
        summaries.push_back({{"category", to_string(s.category)},
                             {"status", to_string(s.status)},
                             {"n_gated_groups", s.n_gated_groups},
                             {"max_variation", s.max_variation ? ojson(*s.max_variation) : ojson(nullptr)}});
    }
    j["category_summaries"] = summaries;
    j["warnings"] = r.warnings;

    auto drilldowns = ojson::array();
    for (const auto& d : r.drilldowns) {
        ojson dj;
        dj["category"] = to_string(d.category);
        dj["group_pair"] = pair_json(d.group_pair);
        auto ranks = ojson::array();
        for (const auto& g : d.top_reactions_by_rank) {
            ranks.push_back({{"group", g.group}, {"negative", counts_json(g.negative)}, {"positive", counts_json(g.positive)}});
        }
        dj["top_reactions_by_rank"] = ranks;
        dj["unique_negatives"] = unique_json(d.unique_negatives);
        dj["unique_positives"] = unique_json(d.unique_positives);
        auto reasoning = ojson::array();
        for (const auto& c : d.reasoning_comparison) {
            ojson paths;
            for (const auto& [group, list] : c.paths) paths[group] = list;
            reasoning.push_back({{"target_id", c.target_id}, {"paths", paths}, {"identical", c.identical}});
        }
        dj["reasoning_comparison"] = reasoning;
        drilldowns.push_back(std::move(dj));
    }
    j["drilldowns"] = drilldowns;
    return j;
}

std::string audit_to_markdown(std::span<const AuditReport> reports) {
    std::string out = "# Fairness audit\n";
    for (const auto& r : reports) {
        out += fmt::format("\n## {}\n\n", to_string(r.config.variable));
        out += fmt::format("delta_p = {:.2f}, minimum active users per group = {}, all group pairs compared.\n\n",
                           r.config.delta_p, r.config.n_sample);

        out += "### Flagged\n\n";
        if (r.flags.empty()) {
            out += "No target category exceeds the tolerance.\n";
        } else {
            out += "| Target | Groups | Variation |\n|---|---|---|\n";
            for (const auto& f : r.flags) {
                out += fmt::format("| {} | {} | {:.2f} |\n", to_string(f.category), pair_label(f.group_pair), f.variation);
            }
        }

        out += "\n### Categories\n\n| Target | Status | Gated groups | Max variation |\n|---|---|---|---|\n";
        for (const auto& s : r.categories) {
            out += fmt::format("| {} | {} | {} | {} |\n", to_string(s.category), to_string(s.status), s.n_gated_groups,
                               s.max_variation ? fmt::format("{:.2f}", *s.max_variation) : std::string("-"));
        }

        out += "\n### Precision by group\n\n";
        if (r.cells.empty()) {
            out += "No group passes the activity gate.\n";
        } else {
            out += "| Target | Group | Precision | Active users | Positive | Negative |\n|---|---|---|---|---|---|\n";
            for (const auto& c : r.cells) {
                out += fmt::format("| {} | {} | {:.4f} | {} | {} | {} |\n", to_string(c.category), c.group, c.precision,
                                   c.n_active_users, c.n_positive, c.n_negative);
            }
        }

        std::vector<std::string> partial;
        for (const auto& e : r.excluded) {
            if (e.n_active_users > 0) partial.push_back(fmt::format("{}/{} ({})", to_string(e.category), e.group, e.n_active_users));
        }
        if (!partial.empty()) {
            out += fmt::format("\nBelow the activity gate: {}.\n", fmt::join(partial, ", "));
        }
        for (const auto& w : r.warnings) out += fmt::format("\n> {}\n", w);

        for (const auto& d : r.drilldowns) {
            out += fmt::format("\n### Drill-down: {} {}\n\n", to_string(d.category), pair_label(d.group_pair));
            out += "#### Ranks of top negative and positive reactions\n\n";
            for (const auto& g : d.top_reactions_by_rank) {
                out += fmt::format("- {} negative:", g.group);
                if (g.negative.empty()) out += " none";
                for (const auto& c : g.negative) out += fmt::format(" {} ({}),", c.target_id, c.count);
                if (!g.negative.empty()) out.pop_back();
                out += fmt::format("\n- {} positive:", g.group);
                if (g.positive.empty()) out += " none";
                for (const auto& c : g.positive) out += fmt::format(" {} ({}),", c.target_id, c.count);
                if (!g.positive.empty()) out.pop_back();
                out += "\n";
            }
            out += "\n#### Unique negative and positive reactions\n\n";
            if (d.unique_negatives.empty()) out += "- No target has negative reactions from only one group.\n";
            for (const auto& u : d.unique_negatives) {
                out += fmt::format("- {}: negative only from {} ({})\n", u.target_id, u.group, u.count);
            }
            if (d.unique_positives.empty()) out += "- No target has positive reactions from only one group.\n";
            for (const auto& u : d.unique_positives) {
                out += fmt::format("- {}: positive only from {} ({})\n", u.target_id, u.group, u.count);
            }
            out += "\n#### Reasoning behind suggestions with negative reactions\n\n";
            if (d.reasoning_comparison.empty()) out += "- No negative reactions.\n";
            for (const auto& c : d.reasoning_comparison) {
                out += fmt::format("- {}: {}\n", c.target_id, c.identical ? "paths identical across groups" : "paths differ");
                for (const auto& [group, paths] : c.paths) {
                    for (const auto& p : paths) out += fmt::format("  - {}: {}\n", group, path_label(p));
                    if (paths.empty()) out += fmt::format("  - {}: no suggestion logged\n", group);
                }
            }
        }
    }
    return out;
}

}  // namespace equirec
