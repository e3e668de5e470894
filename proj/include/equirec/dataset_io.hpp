#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "equirec/model.hpp"

namespace equirec {

namespace fs = std::filesystem;

inline constexpr std::string_view kNodesFile = "nodes.csv";
inline constexpr std::string_view kEdgesFile = "edges.csv";
inline constexpr std::string_view kProfilesFile = "profiles.csv";
inline constexpr std::string_view kReactionsFile = "reactions.jsonl";
inline constexpr std::string_view kSuggestionsFile = "suggestions.jsonl";

/// Reads and validates a dataset directory. nodes.csv and edges.csv are
/// required; the rest default to empty. Errors name the file and 1-based line.
Dataset load_dataset(const fs::path& root);

/// Writes every dataset file (full rewrite, each one atomically).
void save_dataset(const Dataset& dataset, const fs::path& root);

/// Appends suggestions to root/suggestions.jsonl in input order. The file is
/// rewritten through a temp file and rename; an empty list leaves it untouched.
/// Throws IntegrityError when a suggestion does not name a student and target.
void save_outputs(const Dataset& dataset, std::span<const Suggestion> suggestions, const fs::path& root);

void save_edges(const Dataset& dataset, const fs::path& root);
void save_reactions(const Dataset& dataset, const fs::path& root);

// Serialized forms, exposed for the CLI and tests.
std::string nodes_csv(const Dataset& dataset);
std::string edges_csv(const Dataset& dataset);
std::string profiles_csv(const Dataset& dataset);
std::string reactions_jsonl(std::span<const Reaction> reactions);
std::string suggestions_jsonl(std::span<const Suggestion> suggestions);

nlohmann::ordered_json to_json(const Reaction& reaction);
nlohmann::ordered_json to_json(const Suggestion& suggestion);

/// Parses a reactions.jsonl-formatted file (used for ingestion batches).
std::vector<Reaction> read_reactions(const fs::path& file);

std::string read_text_file(const fs::path& file);

/// Writes through `<file>.tmp` and renames over the destination.
void write_file_atomic(const fs::path& file, std::string_view content);

}  // namespace equirec
