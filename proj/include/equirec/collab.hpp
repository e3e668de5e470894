#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "equirec/model.hpp"

namespace equirec {

/// Students x targets, 1.0 where the latest reaction is positive.
struct ReactionMatrix {
    std::vector<NodeId> row_index;  // sorted student ids
    std::vector<NodeId> col_index;  // sorted target ids
    Eigen::MatrixXd values;

    std::ptrdiff_t row_of(std::string_view student) const;
    std::ptrdiff_t col_of(std::string_view target) const;
};

struct NmfOptions {
    std::size_t rank = 16;  // clamped to min(m, n) by default_rank()
    std::uint64_t seed = 0;
    std::size_t max_iter = 200;
    double rel_tol = 1e-4;
    double epsilon = 1e-12;  // denominator guard
};

struct FactorPair {
    Eigen::MatrixXd W;  // m x k
    Eigen::MatrixXd H;  // k x n
    std::size_t k = 0;
    std::uint64_t seed = 0;
    double final_error = 0.0;  // ||V - WH||_F
    std::size_t iterations_run = 0;
    std::vector<double> error_trace;  // error after each iteration
};

ReactionMatrix build_reaction_matrix(std::span<const Reaction> reactions);

/// min(16, m, n).
std::size_t default_rank(const ReactionMatrix& matrix);

/// Multiplicative-update NMF on the Frobenius objective. Throws RankTooLarge
/// if k exceeds min(m, n) or the matrix is empty.
FactorPair nmf_factorize(const Eigen::MatrixXd& V, const NmfOptions& options);
FactorPair nmf_factorize(const ReactionMatrix& V, const NmfOptions& options);

/// Top k_out unreacted targets by reconstructed weight. Cold-start students
/// (absent from the matrix) get an empty list.
std::vector<Suggestion> collab_recommend(const Dataset& dataset, const FactorPair& factors,
                                         const ReactionMatrix& matrix, std::string_view student_id,
                                         std::size_t k_out, Timestamp ts);

nlohmann::ordered_json factors_to_json(const FactorPair& factors, const ReactionMatrix& matrix);

}  // namespace equirec
