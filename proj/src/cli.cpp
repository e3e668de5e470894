#include "equirec/cli.hpp"

#include <cstdlib>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "equirec/audit.hpp"
#include "equirec/dataset_io.hpp"
#include "equirec/graph_build.hpp"
#include "equirec/metrics.hpp"
#include "equirec/pipeline.hpp"
#include "equirec/synth.hpp"

namespace equirec::cli {

namespace {

using ojson = nlohmann::ordered_json;

std::uint64_t seed_fallback() {
    const char* env = std::getenv("EQUIREC_SEED");
    if (!env || !*env) return 0;
    try {
        std::size_t used = 0;
        const auto value = std::stoull(env, &used);
        if (used == std::string_view(env).size()) return value;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::ConfigError, fmt::format("EQUIREC_SEED '{}' is not an unsigned integer", env));
}

NodeKind parse_category(const std::string& text) {
    const auto kind = parse_node_kind(text);
    if (!kind || !is_target_kind(*kind)) {
        throw Error(ErrorCode::ConfigError, fmt::format("'{}' is not a target category", text));
    }
    return *kind;
}

void echo(std::ostream& out, const std::string& command, ojson config) {
    ojson j;
    j["command"] = command;
    j["config"] = std::move(config);
    out << j.dump() << '\n';
}

std::string format_reasoning(const std::vector<NodeId>& path) {
    return path.empty() ? std::string("-") : fmt::format("{}", fmt::join(path, " > "));
}

void print_suggestions(std::ostream& out, std::span<const Suggestion> suggestions) {
    std::size_t w_student = 7, w_target = 6;
    for (const auto& s : suggestions) {
        w_student = std::max(w_student, s.student_id.size());
        w_target = std::max(w_target, s.target_id.size());
    }
    out << fmt::format("{:<{}}  {:>4}  {:<{}}  {:<7}  {:>10}  {}\n", "student", w_student, "rank", "target", w_target,
                       "source", "confidence", "reasoning");
    std::string current;
    std::size_t rank = 0;
    for (const auto& s : suggestions) {
        rank = s.student_id == current ? rank + 1 : 1;
        current = s.student_id;
        out << fmt::format("{:<{}}  {:>4}  {:<{}}  {:<7}  {:>10.6f}  {}\n", s.student_id, w_student, rank, s.target_id,
                           w_target, to_string(s.source), s.confidence, format_reasoning(s.reasoning));
    }
}

struct BuildGraphArgs {
    std::string data, embeddings;
    double tau = kDefaultTau;
};

void run_build_graph(const BuildGraphArgs& a, std::ostream& out) {
    echo(out, "build-graph", {{"data", a.data}, {"embeddings", a.embeddings}, {"tau", a.tau}});
    Dataset dataset = load_dataset(a.data);
    const auto table = load_embeddings(a.embeddings);
    const auto edges = build_static_edges(table, dataset.nodes, a.tau);
    replace_static_edges(dataset, edges);
    validate(dataset);
    save_edges(dataset, a.data);
    out << fmt::format("static edges: {} (tau {})\n", edges.size(), a.tau);
}

struct RecommendArgs {
    std::string data;
    std::vector<std::string> students;
    bool all = false;
    RecommendOptions options;
    std::optional<std::uint64_t> seed;
};

void run_recommend(RecommendArgs a, std::ostream& out) {
    a.options.seed = a.seed.value_or(seed_fallback());
    Dataset dataset = load_dataset(a.data);
    std::vector<NodeId> students = a.students;
    if (a.all || students.empty()) students = dataset.student_ids();

    ojson config{{"data", a.data}};
    config["students"] = a.all || a.students.empty() ? ojson("all") : ojson(a.students);
    config["radius"] = a.options.radius;
    config["top_k"] = a.options.top_k;
    config["seed"] = a.options.seed;
    config["max_iter"] = a.options.max_iter;
    config["rel_tol"] = a.options.rel_tol;
    config["rank"] = a.options.rank ? ojson(*a.options.rank) : ojson("default");
    config["jobs"] = a.options.jobs;
    config["both_source_bonus"] = kBothSourceBonus;
    echo(out, "recommend", config);

    for (const auto& id : students) {
        const auto* node = dataset.find_node(id);
        if (!node || node->kind != NodeKind::Student) {
            throw Error(ErrorCode::UnknownStudent, fmt::format("no student '{}'", id));
        }
    }
    const auto round = recommend(dataset, students, a.options);
    save_outputs(dataset, round.suggestions, a.data);
    record_suggestions(dataset, round.suggestions);
    save_edges(dataset, a.data);
    if (round.factors) {
        write_file_atomic(fs::path(a.data) / "factors.json", factors_to_json(*round.factors, round.matrix).dump(2) + "\n");
    }
    print_suggestions(out, round.suggestions);
}

struct IngestArgs {
    std::string data, file;
    double delta = kDefaultFeedbackDelta;
};

void run_ingest(const IngestArgs& a, std::ostream& out) {
    echo(out, "ingest-reactions", {{"data", a.data}, {"file", a.file}, {"delta", a.delta}});
    Dataset dataset = load_dataset(a.data);
    const auto batch = read_reactions(a.file);
    std::size_t changed = 0;
    for (const auto& r : batch) changed += apply_feedback_to_dynamic_edges(dataset, r, a.delta).size();
    validate(dataset);
    save_edges(dataset, a.data);
    save_reactions(dataset, a.data);
    out << fmt::format("reactions ingested: {}, edges updated: {}\n", batch.size(), changed);
}

struct EvaluateArgs {
    std::string data, out_file;
};

void run_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const fs::path target = a.out_file.empty() ? fs::path(a.data) / "metrics.json" : fs::path(a.out_file);
    echo(out, "evaluate", {{"data", a.data}, {"out", target.string()}});
    const Dataset dataset = load_dataset(a.data);
    const auto reports = metric_sweep(dataset, dataset.suggestions);
    write_file_atomic(target, metrics_to_json(reports).dump(2) + "\n");
    out << format_metric_table(reports);
}

struct AuditArgs {
    std::string data, variable = "all", out_dir;
    double delta_p = kDefaultDeltaP;
    std::size_t min_active = kDefaultMinActiveUsers;
    std::vector<std::string> categories;
};

void run_audit_command(const AuditArgs& a, std::ostream& out) {
    const fs::path dir = a.out_dir.empty() ? fs::path(a.data) : fs::path(a.out_dir);
    echo(out, "audit",
         {{"data", a.data},
          {"variable", a.variable},
          {"delta_p", a.delta_p},
          {"min_active", a.min_active},
          {"categories", a.categories.empty() ? ojson("all") : ojson(a.categories)},
          {"out", dir.string()}});

    std::vector<ProtectedVariable> variables;
    if (a.variable == "all") {
        variables.assign(protected_variables().begin(), protected_variables().end());
    } else {
        variables.push_back(parse_protected_variable(a.variable));
    }
    AuditConfig config;
    config.delta_p = a.delta_p;
    config.n_sample = a.min_active;
    for (const auto& c : a.categories) config.categories.push_back(parse_category(c));
    config.check();

    const Dataset dataset = load_dataset(a.data);
    std::vector<AuditReport> reports;
    for (auto v : variables) {
        config.variable = v;
        reports.push_back(run_audit(dataset, dataset.suggestions, config));
    }
    ojson json;
    if (a.variable == "all") {
        json = ojson::array();
        for (const auto& r : reports) json.push_back(audit_to_json(r));
    } else {
        json = audit_to_json(reports.front());
    }
    fs::create_directories(dir);
    write_file_atomic(dir / "audit_report.json", json.dump(2) + "\n");
    write_file_atomic(dir / "audit_report.md", audit_to_markdown(reports));

    std::size_t flags = 0;
    for (const auto& r : reports) {
        flags += r.flags.size();
        for (const auto& f : r.flags) {
            out << fmt::format("flag: {} {} ({},{}) {:.4f}\n", to_string(r.config.variable), to_string(f.category),
                               f.group_pair.first, f.group_pair.second, f.variation);
        }
        for (const auto& w : r.warnings) out << "warning: " << w << '\n';
    }
    out << fmt::format("flagged cells: {}\n", flags);
}

struct SynthArgs {
    std::string config_file, out_dir;
    std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a, std::ostream& out) {
    CohortConfig config;
    bool seed_in_file = false;
    if (!a.config_file.empty()) {
        const auto text = read_text_file(a.config_file);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", a.config_file, e.what()));
        }
        config = cohort_config_from_json(j);
        seed_in_file = j.contains("seed");
    }
    if (a.seed) {
        config.seed = *a.seed;
    } else if (!seed_in_file && std::getenv("EQUIREC_SEED")) {
        config.seed = seed_fallback();
    }
    config = config.resolved();
    echo(out, "synth", {{"config", a.config_file.empty() ? ojson(nullptr) : ojson(a.config_file)},
                        {"out", a.out_dir},
                        {"cohort", to_json(config)}});
    const auto cohort = generate_cohort(config);
    fs::create_directories(a.out_dir);
    write_cohort(cohort, config, a.out_dir);
    out << fmt::format("students: {}, nodes: {}, edges: {}, suggestions: {}, reactions: {}\n",
                       cohort.dataset.student_ids().size(), cohort.dataset.nodes.size(), cohort.dataset.edges.size(),
                       cohort.dataset.suggestions.size(), cohort.dataset.reactions.size());
}

struct InjectArgs {
    std::string data, variable, group, category;
    double gap = 0.0;
    std::optional<double> base_rate;
    std::optional<std::uint64_t> seed;
    std::size_t min_support = 1;
};

double pooled_precision(const Dataset& dataset, NodeKind category) {
    std::size_t positive = 0, total = 0;
    for (const auto& [key, reaction] : ReactionIndex(dataset.reactions).entries()) {
        const auto* node = dataset.find_node(key.target_id);
        if (!node || node->kind != category) continue;
        ++total;
        if (reaction.polarity == Polarity::Positive) ++positive;
    }
    if (total == 0) throw Error(ErrorCode::GapInfeasible, fmt::format("no reactions on {}", to_string(category)));
    return static_cast<double>(positive) / static_cast<double>(total);
}

void run_inject(const InjectArgs& a, std::ostream& out) {
    Dataset dataset = load_dataset(a.data);
    BiasInjection injection;
    injection.variable = parse_protected_variable(a.variable);
    injection.group = a.group;
    injection.category = parse_category(a.category);
    injection.gap = a.gap;
    injection.seed = a.seed.value_or(seed_fallback());
    injection.min_support = a.min_support;

    std::string base_source = "flag";
    if (a.base_rate) {
        injection.base_positive_rate = *a.base_rate;
    } else if (const auto cohort_file = fs::path(a.data) / "cohort.json"; fs::exists(cohort_file)) {
        try {
            injection.base_positive_rate = cohort_config_from_json(nlohmann::json::parse(read_text_file(cohort_file)))
                                               .resolved()
                                               .base_positive_rate;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", cohort_file.string(), e.what()));
        }
        base_source = "cohort.json";
    } else {
        injection.base_positive_rate = pooled_precision(dataset, injection.category);
        base_source = "pooled";
    }
    echo(out, "inject-bias",
         {{"data", a.data},
          {"variable", to_string(injection.variable)},
          {"group", injection.group},
          {"category", to_string(injection.category)},
          {"gap", injection.gap},
          {"base_positive_rate", injection.base_positive_rate},
          {"base_rate_source", base_source},
          {"seed", injection.seed},
          {"min_support", injection.min_support}});

    dataset = inject_bias(dataset, injection);
    save_reactions(dataset, a.data);
    out << fmt::format("reactions redrawn on {}\n", to_string(injection.category));
}

struct MitigateArgs {
    std::string data, variable, category, out_dir;
    double max_gap = 0.5;
    RecommendOptions options;
    std::optional<std::uint64_t> seed;
    std::size_t depth_factor = 3;
};

void run_mitigate(MitigateArgs a, std::ostream& out) {
    a.options.seed = a.seed.value_or(seed_fallback());
    const fs::path dir = a.out_dir.empty() ? fs::path(a.data) : fs::path(a.out_dir);
    const auto variable = parse_protected_variable(a.variable);
    const auto category = parse_category(a.category);
    const std::size_t depth = a.options.top_k * std::max<std::size_t>(1, a.depth_factor);
    echo(out, "mitigate-rerank",
         {{"data", a.data},
          {"variable", to_string(variable)},
          {"category", to_string(category)},
          {"max_gap", a.max_gap},
          {"top_k", a.options.top_k},
          {"candidate_depth", depth},
          {"radius", a.options.radius},
          {"seed", a.options.seed},
          {"jobs", a.options.jobs},
          {"out", dir.string()}});
    if (a.max_gap < 0.0) throw Error(ErrorCode::ConfigError, "max-gap must be non-negative");

    const Dataset dataset = load_dataset(a.data);
    const auto students = dataset.student_ids();
    const auto round = recommend(dataset, students, a.options, depth);
    const auto lists = group_by_student(round.suggestions);
    const auto result = fairness_rerank(lists, a.options.top_k, dataset, variable, category, a.max_gap);

    std::vector<Suggestion> delivered;
    for (const auto& list : result.lists) {
        const auto cut = std::min(a.options.top_k, list.items.size());
        delivered.insert(delivered.end(), list.items.begin(), list.items.begin() + static_cast<std::ptrdiff_t>(cut));
    }
    ojson summary;
    summary["variable"] = to_string(variable);
    summary["category"] = to_string(category);
    summary["max_gap"] = a.max_gap;
    summary["gap_before"] = result.gap_before;
    summary["gap_after"] = result.gap_after;
    summary["feasible"] = result.feasible;
    ojson swaps = ojson::array();
    for (const auto& s : result.swaps) {
        swaps.push_back({{"student_id", s.student_id},
                         {"removed_target", s.removed_target},
                         {"added_target", s.added_target},
                         {"score_loss", s.score_loss}});
    }
    summary["swaps"] = swaps;
    fs::create_directories(dir);
    write_file_atomic(dir / "mitigated_suggestions.jsonl", suggestions_jsonl(delivered));
    write_file_atomic(dir / "mitigation.json", summary.dump(2) + "\n");
    out << fmt::format("exposure gap {:.4f} -> {:.4f} ({} swaps{})\n", result.gap_before, result.gap_after,
                       result.swaps.size(), result.feasible ? "" : ", infeasible");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Equitable recommendation and fairness audit toolkit", "equirec"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "equirec 0.1.0");

    BuildGraphArgs build;
    auto* build_cmd = app.add_subcommand("build-graph", "Rebuild static similarity edges from embeddings");
    build_cmd->add_option("--data", build.data, "Dataset directory")->required();
    build_cmd->add_option("--embeddings", build.embeddings, "embeddings.jsonl file")->required();
    build_cmd->add_option("--tau", build.tau, "Similarity threshold in (0,1)")->capture_default_str();

    RecommendArgs rec;
    auto* rec_cmd = app.add_subcommand("recommend", "Generate suggestions and append them to the log");
    rec_cmd->add_option("--data", rec.data, "Dataset directory")->required();
    auto* student_opt = rec_cmd->add_option("--student", rec.students, "Student id (repeatable)");
    rec_cmd->add_flag("--all", rec.all, "Every student (default)")->excludes(student_opt);
    rec_cmd->add_option("--radius", rec.options.radius, "Neighborhood radius in hops")->capture_default_str();
    rec_cmd->add_option("--top-k", rec.options.top_k, "Suggestions per student")->capture_default_str();
    rec_cmd->add_option("--seed", rec.seed, "NMF seed (default EQUIREC_SEED or 0)");
    rec_cmd->add_option("--rank", rec.options.rank, "NMF rank (default min(16, m, n))");
    rec_cmd->add_option("--max-iter", rec.options.max_iter, "NMF iteration cap")->capture_default_str();
    rec_cmd->add_option("--rel-tol", rec.options.rel_tol, "NMF relative improvement stop")->capture_default_str();
    rec_cmd->add_option("--jobs", rec.options.jobs, "Worker threads")->capture_default_str();

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest-reactions", "Fold a batch of reactions into the dynamic edges");
    ingest_cmd->add_option("--data", ingest.data, "Dataset directory")->required();
    ingest_cmd->add_option("--file", ingest.file, "Reactions file (jsonl)")->required();
    ingest_cmd->add_option("--delta", ingest.delta, "Feedback step")->capture_default_str();

    EvaluateArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Compute recommendation metrics");
    eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
    eval_cmd->add_option("--out", eval.out_file, "Output file (default DATA/metrics.json)");

    AuditArgs audit;
    auto* audit_cmd = app.add_subcommand("audit", "Run the fairness audit");
    audit_cmd->add_option("--data", audit.data, "Dataset directory")->required();
    audit_cmd->add_option("--variable", audit.variable, "Protected variable or 'all'")->capture_default_str();
    audit_cmd->add_option("--delta-p", audit.delta_p, "Precision tolerance")->capture_default_str();
    audit_cmd->add_option("--min-active", audit.min_active, "Active users required per group")->capture_default_str();
    audit_cmd->add_option("--category", audit.categories, "Restrict to categories (repeatable)");
    audit_cmd->add_option("--out", audit.out_dir, "Report directory (default DATA)");

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic cohort");
    synth_cmd->add_option("--config", synth.config_file, "Cohort config (json); defaults when omitted");
    synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
    synth_cmd->add_option("--seed", synth.seed, "Override the config seed");

    InjectArgs inject;
    auto* inject_cmd = app.add_subcommand("inject-bias", "Lower one group's positive rate in one category");
    inject_cmd->add_option("--data", inject.data, "Dataset directory")->required();
    inject_cmd->add_option("--variable", inject.variable, "Protected variable")->required();
    inject_cmd->add_option("--group", inject.group, "Group label")->required();
    inject_cmd->add_option("--category", inject.category, "Target category")->required();
    inject_cmd->add_option("--gap", inject.gap, "Precision reduction")->required();
    inject_cmd->add_option("--base-rate", inject.base_rate, "Base positive rate (default cohort.json or pooled)");
    inject_cmd->add_option("--seed", inject.seed, "Redraw seed (default EQUIREC_SEED or 0)");
    inject_cmd->add_option("--min-support", inject.min_support, "Reactions required per side")->capture_default_str();

    MitigateArgs mitigate;
    auto* mitigate_cmd = app.add_subcommand("mitigate-rerank", "Re-rank top-k lists to bound an exposure gap");
    mitigate_cmd->add_option("--data", mitigate.data, "Dataset directory")->required();
    mitigate_cmd->add_option("--variable", mitigate.variable, "Protected variable")->required();
    mitigate_cmd->add_option("--category", mitigate.category, "Target category")->required();
    mitigate_cmd->add_option("--max-gap", mitigate.max_gap, "Exposure gap bound")->capture_default_str();
    mitigate_cmd->add_option("--top-k", mitigate.options.top_k, "Delivered list length")->capture_default_str();
    mitigate_cmd->add_option("--depth-factor", mitigate.depth_factor, "Candidates per list as a multiple of top-k")
        ->capture_default_str();
    mitigate_cmd->add_option("--radius", mitigate.options.radius, "Neighborhood radius")->capture_default_str();
    mitigate_cmd->add_option("--seed", mitigate.seed, "NMF seed (default EQUIREC_SEED or 0)");
    mitigate_cmd->add_option("--jobs", mitigate.options.jobs, "Worker threads")->capture_default_str();
    mitigate_cmd->add_option("--out", mitigate.out_dir, "Output directory (default DATA)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (build_cmd->parsed()) run_build_graph(build, out);
        else if (rec_cmd->parsed()) run_recommend(rec, out);
        else if (ingest_cmd->parsed()) run_ingest(ingest, out);
        else if (eval_cmd->parsed()) run_evaluate(eval, out);
        else if (audit_cmd->parsed()) run_audit_command(audit, out);
        else if (synth_cmd->parsed()) run_synth(synth, out);
        else if (inject_cmd->parsed()) run_inject(inject, out);
        else if (mitigate_cmd->parsed()) run_mitigate(mitigate, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitDataError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: IoError: " << e.what() << '\n';
        return kExitDataError;
    }
    return kExitOk;
}

}  // namespace equirec::cli
