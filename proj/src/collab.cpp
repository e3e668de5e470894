#include "equirec/collab.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "equirec/rng.hpp"

namespace equirec {

namespace {

std::ptrdiff_t position(const std::vector<NodeId>& sorted, std::string_view id) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), id);
    return (it != sorted.end() && *it == id) ? it - sorted.begin() : -1;
}

nlohmann::ordered_json matrix_rows(const Eigen::MatrixXd& m) {
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::ptrdiff_t ReactionMatrix::row_of(std::string_view student) const { return position(row_index, student); }
std::ptrdiff_t ReactionMatrix::col_of(std::string_view target) const { return position(col_index, target); }

ReactionMatrix build_reaction_matrix(std::span<const Reaction> reactions) {
    const ReactionIndex latest(reactions);
    std::set<NodeId> students, targets;
    for (const auto& [key, r] : latest.entries()) {
        students.insert(key.student_id);
        targets.insert(key.target_id);
    }
    ReactionMatrix m;
    m.row_index.assign(students.begin(), students.end());
    m.col_index.assign(targets.begin(), targets.end());
    m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.row_index.size()),
                                     static_cast<Eigen::Index>(m.col_index.size()));
    for (const auto& [key, r] : latest.entries()) {
        if (r.polarity == Polarity::Positive) m.values(m.row_of(key.student_id), m.col_of(key.target_id)) = 1.0;
    }
    return m;
}

std::size_t default_rank(const ReactionMatrix& matrix) {
    return std::min<std::size_t>({16, matrix.row_index.size(), matrix.col_index.size()});
}

FactorPair nmf_factorize(const Eigen::MatrixXd& V, const NmfOptions& options) {
    const auto m = V.rows();
    const auto n = V.cols();
    const auto k = static_cast<Eigen::Index>(options.rank);
    if (m == 0 || n == 0) throw Error(ErrorCode::RankTooLarge, "cannot factorize an empty matrix");
    if (k < 1 || k > std::min(m, n)) {
        throw Error(ErrorCode::RankTooLarge, fmt::format("rank {} exceeds min({}, {})", options.rank, m, n));
    }
    if ((V.array() < 0.0).any()) throw Error(ErrorCode::ConfigError, "matrix has negative entries");

    FactorPair f;
    f.k = options.rank;
    f.seed = options.seed;
    f.W.resize(m, k);
    f.H.resize(k, n);
    Rng rng(options.seed);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < k; ++j) f.W(i, j) = rng.uniform();
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < n; ++j) f.H(i, j) = rng.uniform();

    const double eps = options.epsilon;
    double previous = (V - f.W * f.H).norm();
    f.final_error = previous;
    for (std::size_t it = 0; it < options.max_iter; ++it) {
        const Eigen::MatrixXd WtV = f.W.transpose() * V;
        const Eigen::MatrixXd WtWH = f.W.transpose() * f.W * f.H;
        f.H = f.H.cwiseProduct(WtV.cwiseQuotient((WtWH.array() + eps).matrix()));

        const Eigen::MatrixXd VHt = V * f.H.transpose();
        const Eigen::MatrixXd WHHt = f.W * (f.H * f.H.transpose());
        f.W = f.W.cwiseProduct(VHt.cwiseQuotient((WHHt.array() + eps).matrix()));

        const double error = (V - f.W * f.H).norm();
        f.error_trace.push_back(error);
        f.final_error = error;
        f.iterations_run = it + 1;
        if (error == 0.0 || previous == 0.0) break;
        if ((previous - error) / previous < options.rel_tol) break;
        previous = error;
    }
    return f;
}

FactorPair nmf_factorize(const ReactionMatrix& V, const NmfOptions& options) {
    return nmf_factorize(V.values, options);
}

std::vector<Suggestion> collab_recommend(const Dataset& dataset, const FactorPair& factors,
                                         const ReactionMatrix& matrix, std::string_view student_id,
                                         std::size_t k_out, Timestamp ts) {
    const auto row = matrix.row_of(student_id);
    if (row < 0 || k_out == 0) return {};

    std::set<std::string_view> skip;
    for (const auto& r : dataset.reactions) {
        if (r.student_id == student_id) skip.insert(r.target_id);
    }
    for (const auto& s : dataset.suggestions) {
        if (s.student_id == student_id) skip.insert(s.target_id);
    }
    for (const auto& e : dataset.edges) {
        if (e.kind != EdgeKind::Rejected) continue;
        if (e.src == student_id) skip.insert(e.dst);
        if (e.dst == student_id) skip.insert(e.src);
    }

    const Eigen::RowVectorXd reconstructed = factors.W.row(row) * factors.H;
    const double row_max = reconstructed.size() ? reconstructed.maxCoeff() : 0.0;

    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t j = 0; j < matrix.col_index.size(); ++j) {
        const double value = reconstructed(static_cast<Eigen::Index>(j));
        if (value > 0.0 && !skip.contains(matrix.col_index[j])) candidates.emplace_back(value, j);
    }
    std::sort(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return matrix.col_index[a.second] < matrix.col_index[b.second];
    });
    if (candidates.size() > k_out) candidates.resize(k_out);

    std::vector<Suggestion> out;
    for (const auto& [value, j] : candidates) {
        Suggestion s;
        s.student_id = std::string(student_id);
        s.target_id = matrix.col_index[j];
        s.source = SuggestionSource::Collab;
        s.score = value;
        s.confidence = std::clamp(value / row_max, std::numeric_limits<double>::min(), 1.0);
        s.ts = ts;
        out.push_back(std::move(s));
    }
    return out;
}

nlohmann::ordered_json factors_to_json(const FactorPair& f, const ReactionMatrix& matrix) {
    nlohmann::ordered_json j;
    j["row_index"] = matrix.row_index;
    j["col_index"] = matrix.col_index;
    j["k"] = f.k;
    j["seed"] = f.seed;
    j["iterations_run"] = f.iterations_run;
    j["final_error"] = f.final_error;
    j["W"] = matrix_rows(f.W);
    j["H"] = matrix_rows(f.H);
    return j;
}

}  // namespace equirec
