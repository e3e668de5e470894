#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace equirec {

enum class ErrorCode {
    MissingFile,
    SchemaError,
    IntegrityError,
    IoError,
    DimensionMismatch,
    ZeroVector,
    MissingEmbedding,
    UnknownSuggestion,
    UnknownStudent,
    RankTooLarge,
    StudentMismatch,
    MissingProfile,
    UnknownVariable,
    UnknownGroup,
    EmptyTargetSet,
    NoReactions,
    ConfigError,
    GapInfeasible,
};

std::string_view to_string(ErrorCode code);

// Exception thrown by every library failure; code() tells them apart.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace equirec
