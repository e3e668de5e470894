#include "equirec/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "csv.hpp"

namespace equirec {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

class RowContext {
public:
    RowContext(std::string_view file, std::size_t line) : file_(file), line_(line) {}

    [[noreturn]] void schema(const std::string& msg) const {
        throw Error(ErrorCode::SchemaError, fmt::format("{} row {}: {}", file_, line_, msg));
    }
    [[noreturn]] void integrity(const std::string& msg) const {
        throw Error(ErrorCode::IntegrityError, fmt::format("{} row {}: {}", file_, line_, msg));
    }

private:
    std::string_view file_;
    std::size_t line_;
};

std::vector<csv::Row> read_csv(const fs::path& file, std::string_view name, std::string_view header) {
    auto rows = csv::parse(read_text_file(file), name);
    if (rows.empty() || csv::join(rows.front().fields) != header) {
        throw Error(ErrorCode::SchemaError, fmt::format("{} row 1: expected header '{}'", name, header));
    }
    rows.erase(rows.begin());
    return rows;
}

double parse_double(const RowContext& ctx, const std::string& text, std::string_view column) {
    double value = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty()) ctx.schema(fmt::format("{} '{}' is not a number", column, text));
    return value;
}

bool parse_bool(const RowContext& ctx, const std::string& text, std::string_view column) {
    if (text == "true") return true;
    if (text == "false") return false;
    ctx.schema(fmt::format("{} must be true or false, got '{}'", column, text));
}

void load_nodes(const fs::path& root, Dataset& d) {
    const std::string name(kNodesFile);
    std::set<NodeId> seen;
    for (const auto& row : read_csv(root / name, name, "id,kind,label,grade_band")) {
        RowContext ctx(name, row.line);
        if (row.fields.size() != 4) ctx.schema(fmt::format("expected 4 fields, got {}", row.fields.size()));
        const auto& f = row.fields;
        if (f[0].empty()) ctx.schema("empty id");
        auto kind = parse_node_kind(f[1]);
        if (!kind) ctx.schema(fmt::format("unknown kind '{}'", f[1]));
        EntityNode node{f[0], *kind, f[2], std::nullopt};
        if (!f[3].empty()) {
            node.grade_band = parse_grade_band(f[3]);
            if (!node.grade_band) ctx.schema(fmt::format("unknown grade_band '{}'", f[3]));
        }
        if ((node.kind == NodeKind::Student) != node.grade_band.has_value()) {
            ctx.integrity("grade_band must be set exactly for Student nodes");
        }
        if (!seen.insert(node.id).second) ctx.integrity(fmt::format("duplicate node id '{}'", node.id));
        d.nodes.push_back(std::move(node));
    }
    normalize(d);
}

void load_edges(const fs::path& root, Dataset& d) {
    const std::string name(kEdgesFile);
    std::set<std::pair<NodeId, NodeId>> seen;
    for (const auto& row : read_csv(root / name, name, "src,dst,kind,weight")) {
        RowContext ctx(name, row.line);
        if (row.fields.size() != 4) ctx.schema(fmt::format("expected 4 fields, got {}", row.fields.size()));
        const auto& f = row.fields;
        auto kind = parse_edge_kind(f[2]);
        if (!kind) ctx.schema(fmt::format("unknown edge kind '{}'", f[2]));
        const double weight = parse_double(ctx, f[3], "weight");
        if (!(weight > 0.0 && weight <= 1.0)) ctx.integrity(fmt::format("weight {} outside (0,1]", f[3]));
        if (f[0] == f[1]) ctx.integrity(fmt::format("self-loop on '{}'", f[0]));
        for (const auto& id : {f[0], f[1]}) {
            if (!d.find_node(id)) ctx.integrity(fmt::format("unknown node '{}'", id));
        }
        GraphEdge edge = make_edge(f[0], f[1], *kind, weight);
        if (!seen.emplace(edge.src, edge.dst).second) {
            ctx.integrity(fmt::format("duplicate edge {}-{}", edge.src, edge.dst));
        }
        d.edges.push_back(std::move(edge));
    }
}

void load_profiles(const fs::path& root, Dataset& d) {
    const std::string name(kProfilesFile);
    if (!fs::exists(root / name)) return;
    std::set<NodeId> seen;
    const char* header =
        "student_id,gender,race_code,has_parents,is_homeless,is_migrant,is_immigrant,is_foster,is_gifted";
    for (const auto& row : read_csv(root / name, name, header)) {
        RowContext ctx(name, row.line);
        const auto& f = row.fields;
        if (f.size() != 9) ctx.schema(fmt::format("expected 9 fields, got {}", f.size()));
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (f[i].empty()) ctx.schema(fmt::format("field {} is empty", i + 1));
        }
        ProtectedProfile p;
        p.student_id = f[0];
        auto gender = parse_gender(f[1]);
        if (!gender) ctx.schema(fmt::format("gender must be F or M, got '{}'", f[1]));
        p.gender = *gender;
        p.race_code = static_cast<int>(parse_double(ctx, f[2], "race_code"));
        if (std::to_string(p.race_code) != f[2] || p.race_code < 1 || p.race_code > 5) {
            ctx.integrity(fmt::format("race_code must be an integer 1-5, got '{}'", f[2]));
        }
        auto parents = parse_parent_status(f[3]);
        if (!parents) ctx.schema(fmt::format("unknown has_parents '{}'", f[3]));
        p.has_parents = *parents;
        p.is_homeless = parse_bool(ctx, f[4], "is_homeless");
        p.is_migrant = parse_bool(ctx, f[5], "is_migrant");
        p.is_immigrant = parse_bool(ctx, f[6], "is_immigrant");
        p.is_foster = parse_bool(ctx, f[7], "is_foster");
        p.is_gifted = parse_bool(ctx, f[8], "is_gifted");
        const auto* node = d.find_node(p.student_id);
        if (!node || node->kind != NodeKind::Student) ctx.integrity(fmt::format("'{}' is not a student", p.student_id));
        if (!seen.insert(p.student_id).second) ctx.integrity(fmt::format("duplicate profile '{}'", p.student_id));
        d.profiles.push_back(std::move(p));
    }
}

template <typename Fn>
void for_each_json_line(const fs::path& file, std::string_view name, Fn&& fn) {
    std::istringstream in(read_text_file(file));
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty() || line == "\r") continue;
        RowContext ctx(name, number);
        json value;
        try {
            value = json::parse(line);
        } catch (const json::parse_error& e) {
            ctx.schema(fmt::format("invalid JSON ({})", e.what()));
        }
        if (!value.is_object()) ctx.schema("expected a JSON object");
        try {
            fn(ctx, value);
        } catch (const json::exception& e) {
            ctx.schema(e.what());
        }
    }
}

Reaction reaction_from_json(const RowContext& ctx, const json& v) {
    Reaction r;
    r.student_id = v.at("student_id").get<std::string>();
    r.target_id = v.at("target_id").get<std::string>();
    auto polarity = parse_polarity(v.at("polarity").get<std::string>());
    if (!polarity) ctx.schema("polarity must be Positive or Negative");
    r.polarity = *polarity;
    r.ts = v.at("ts").get<Timestamp>();
    return r;
}

Suggestion suggestion_from_json(const RowContext& ctx, const json& v) {
    Suggestion s;
    s.student_id = v.at("student_id").get<std::string>();
    s.target_id = v.at("target_id").get<std::string>();
    auto source = parse_source(v.at("source").get<std::string>());
    if (!source) ctx.schema("source must be Content, Collab or Both");
    s.source = *source;
    s.confidence = v.at("confidence").get<double>();
    s.reasoning = v.at("reasoning").get<std::vector<std::string>>();
    s.score = v.at("score").get<double>();
    s.ts = v.at("ts").get<Timestamp>();
    return s;
}

void check_student(const Dataset& d, const RowContext& ctx, const NodeId& id) {
    const auto* n = d.find_node(id);
    if (!n || n->kind != NodeKind::Student) ctx.integrity(fmt::format("'{}' is not a student", id));
}

void check_target(const Dataset& d, const RowContext& ctx, const NodeId& id) {
    const auto* n = d.find_node(id);
    if (!n || !is_target_kind(n->kind)) ctx.integrity(fmt::format("'{}' is not a target node", id));
}

void load_reactions(const fs::path& root, Dataset& d) {
    const std::string name(kReactionsFile);
    if (!fs::exists(root / name)) return;
    for_each_json_line(root / name, name, [&](const RowContext& ctx, const json& v) {
        Reaction r = reaction_from_json(ctx, v);
        check_student(d, ctx, r.student_id);
        check_target(d, ctx, r.target_id);
        d.reactions.push_back(std::move(r));
    });
}

void load_suggestions(const fs::path& root, Dataset& d) {
    const std::string name(kSuggestionsFile);
    if (!fs::exists(root / name)) return;
    for_each_json_line(root / name, name, [&](const RowContext& ctx, const json& v) {
        Suggestion s = suggestion_from_json(ctx, v);
        check_student(d, ctx, s.student_id);
        check_target(d, ctx, s.target_id);
        if (!(s.confidence > 0.0 && s.confidence <= 1.0)) ctx.integrity("confidence outside (0,1]");
        if (s.score < 0.0) ctx.integrity("negative score");
        for (const auto& id : s.reasoning) {
            if (!d.find_node(id)) ctx.integrity(fmt::format("unknown node '{}' in reasoning", id));
        }
        if (s.source != SuggestionSource::Collab &&
            (s.reasoning.empty() || s.reasoning.front() != s.student_id || s.reasoning.back() != s.target_id)) {
            ctx.integrity("reasoning must start at the student and end at the target");
        }
        d.suggestions.push_back(std::move(s));
    });
}

}  // namespace

std::string read_text_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingFile, fmt::format("cannot open {}", file.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file_atomic(const fs::path& file, std::string_view content) {
    fs::path tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write {}", tmp.string()));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::IoError, fmt::format("short write to {}", tmp.string()));
    }
    std::error_code ec;
    fs::rename(tmp, file, ec);
    if (ec) throw Error(ErrorCode::IoError, fmt::format("cannot rename {} to {}: {}", tmp.string(), file.string(), ec.message()));
}

Dataset load_dataset(const fs::path& root) {
    for (auto required : {kNodesFile, kEdgesFile}) {
        if (!fs::exists(root / required)) {
            throw Error(ErrorCode::MissingFile, fmt::format("{} not found in {}", required, root.string()));
        }
    }
    Dataset d;
    load_nodes(root, d);
    load_edges(root, d);
    load_profiles(root, d);
    load_reactions(root, d);
    load_suggestions(root, d);
    normalize(d);
    validate(d);
    return d;
}

std::string nodes_csv(const Dataset& d) {
    std::string out = "id,kind,label,grade_band\n";
    for (const auto& n : d.nodes) {
        out += csv::join({n.id, std::string(to_string(n.kind)), n.label,
                          n.grade_band ? std::string(to_string(*n.grade_band)) : std::string()});
        out += '\n';
    }
    return out;
}

std::string edges_csv(const Dataset& d) {
    std::string out = "src,dst,kind,weight\n";
    for (const auto& e : d.edges) {
        out += csv::join({e.src, e.dst, std::string(to_string(e.kind)), fmt::format("{:.6f}", e.weight)});
        out += '\n';
    }
    return out;
}

std::string profiles_csv(const Dataset& d) {
    std::string out =
        "student_id,gender,race_code,has_parents,is_homeless,is_migrant,is_immigrant,is_foster,is_gifted\n";
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    for (const auto& p : d.profiles) {
        out += csv::join({p.student_id, std::string(to_string(p.gender)), std::to_string(p.race_code),
                          std::string(to_string(p.has_parents)), b(p.is_homeless), b(p.is_migrant),
                          b(p.is_immigrant), b(p.is_foster), b(p.is_gifted)});
        out += '\n';
    }
    return out;
}

ordered_json to_json(const Reaction& r) {
    ordered_json j;
    j["student_id"] = r.student_id;
    j["target_id"] = r.target_id;
    j["polarity"] = to_string(r.polarity);
    j["ts"] = r.ts;
    return j;
}

ordered_json to_json(const Suggestion& s) {
    ordered_json j;
    j["student_id"] = s.student_id;
    j["target_id"] = s.target_id;
    j["source"] = to_string(s.source);
    j["confidence"] = s.confidence;
    j["reasoning"] = s.reasoning;
    j["score"] = s.score;
    j["ts"] = s.ts;
    return j;
}

std::string reactions_jsonl(std::span<const Reaction> reactions) {
    std::string out;
    for (const auto& r : reactions) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

std::string suggestions_jsonl(std::span<const Suggestion> suggestions) {
    std::string out;
    for (const auto& s : suggestions) {
        out += to_json(s).dump();
        out += '\n';
    }
    return out;
}

void save_edges(const Dataset& d, const fs::path& root) { write_file_atomic(root / kEdgesFile, edges_csv(d)); }

void save_reactions(const Dataset& d, const fs::path& root) {
    write_file_atomic(root / kReactionsFile, reactions_jsonl(d.reactions));
}

void save_dataset(const Dataset& d, const fs::path& root) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw Error(ErrorCode::IoError, fmt::format("cannot create {}: {}", root.string(), ec.message()));
    write_file_atomic(root / kNodesFile, nodes_csv(d));
    save_edges(d, root);
    write_file_atomic(root / kProfilesFile, profiles_csv(d));
    save_reactions(d, root);
    write_file_atomic(root / kSuggestionsFile, suggestions_jsonl(d.suggestions));
}

void save_outputs(const Dataset& dataset, std::span<const Suggestion> suggestions, const fs::path& root) {
    if (suggestions.empty()) return;
    for (const auto& s : suggestions) {
        const auto* student = dataset.find_node(s.student_id);
        const auto* target = dataset.find_node(s.target_id);
        if (!student || student->kind != NodeKind::Student || !target || !is_target_kind(target->kind)) {
            throw Error(ErrorCode::IntegrityError,
                        fmt::format("suggestion {}->{} does not match the dataset", s.student_id, s.target_id));
        }
    }
    const fs::path file = root / kSuggestionsFile;
    std::string content = fs::exists(file) ? read_text_file(file) : std::string();
    if (!content.empty() && content.back() != '\n') content.push_back('\n');
    content += suggestions_jsonl(suggestions);
    write_file_atomic(file, content);
}

std::vector<Reaction> read_reactions(const fs::path& file) {
    std::vector<Reaction> out;
    const std::string name = file.filename().string();
    for_each_json_line(file, name, [&](const RowContext& ctx, const json& v) { out.push_back(reaction_from_json(ctx, v)); });
    return out;
}

}  // namespace equirec
