#include "segtraj/mca.hpp"

#include "segtraj/csv.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <fstream>
#include <json.hpp>

namespace segtraj {

IndicatorMatrix build_indicator(const Panel& panel) {
    if (panel.empty()) throw EmptyPanelError("build_indicator: empty panel");
    const auto active = panel.spec.active_indices();
    const int j_total = panel.spec.total_active_modalities();

    std::vector<int> offset(active.size());
    int acc = 0;
    for (std::size_t a = 0; a < active.size(); ++a) {
        offset[a] = acc;
        acc += panel.spec.variables[static_cast<std::size_t>(active[a])].modality_count;
    }

    IndicatorMatrix ind;
    ind.active_variables = static_cast<int>(active.size());
    ind.entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(panel.records.size()), j_total);
    for (std::size_t r = 0; r < panel.records.size(); ++r) {
        const auto& rec = panel.records[r];
        for (std::size_t a = 0; a < active.size(); ++a)
            ind.entries(static_cast<Eigen::Index>(r), offset[a] + rec.answers[a] - 1) = 1.0;
    }
    return ind;
}

FactorScores mca_fit(const IndicatorMatrix& indicator, std::optional<int> axes) {
    const Eigen::Index n = indicator.n();
    const int q = indicator.active_variables;
    if (n < 2) throw DegenerateInputError("mca_fit: need at least 2 observations");
    if (q < 1) throw DegenerateInputError("mca_fit: indicator has no active variables");

    // Drop structurally empty modality columns.
    const Eigen::VectorXd col_sums = indicator.entries.colwise().sum();
    std::vector<Eigen::Index> kept;
    for (Eigen::Index c = 0; c < col_sums.size(); ++c)
        if (col_sums(c) > 0.0) kept.push_back(c);
    const Eigen::Index j_eff = static_cast<Eigen::Index>(kept.size());

    // Standardized residuals S_ij = (P_ij - r_i c_j) / sqrt(r_i c_j) with
    // P = Z/(nQ), r_i = 1/n, c_j = colsum_j/(nQ). Using Z in {0,1}:
    // S_ij = (Z_ij - colsum_j/n) / sqrt(colsum_j * Q / n) ... assembled
    // column by column below.
    Eigen::MatrixXd s(n, j_eff);
    const double nq = static_cast<double>(n) * q;
    for (Eigen::Index jc = 0; jc < j_eff; ++jc) {
        const Eigen::Index c = kept[static_cast<std::size_t>(jc)];
        const double cj = col_sums(c) / nq;
        const double denom = std::sqrt(cj / static_cast<double>(n));
        s.col(jc) = (indicator.entries.col(c) / nq).array() - cj / static_cast<double>(n);
        s.col(jc) /= denom;
    }

    const double total_inertia = s.squaredNorm();
    if (total_inertia <= 1e-12)
        throw DegenerateInputError("mca_fit: zero total inertia (all observations identical)");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(s, Eigen::ComputeThinU);
    const Eigen::VectorXd sigma = svd.singularValues();

    // Positive spectrum, bounded by J' - Q.
    const Eigen::Index rank_bound = j_eff - q;
    Eigen::Index positive = 0;
    const double tol = sigma.size() ? sigma(0) * 1e-12 : 0.0;
    while (positive < sigma.size() && positive < rank_bound && sigma(positive) > tol) ++positive;

    Eigen::Index k = positive;
    if (axes) {
        if (*axes < 0) throw AxisOutOfRangeError("mca_fit: negative axis count");
        k = std::min<Eigen::Index>(*axes, positive);
    } else {
        const double threshold = 1.0 / q;
        Eigen::Index auto_k = 0;
        while (auto_k < positive && sigma(auto_k) * sigma(auto_k) > threshold) ++auto_k;
        k = auto_k;
    }

    FactorScores scores;
    scores.total_inertia = total_inertia;
    scores.eigenvalues = sigma.head(k).array().square().matrix();
    // Principal row coordinates F = D_r^{-1/2} U Sigma = sqrt(n) U Sigma.
    scores.coordinates = std::sqrt(static_cast<double>(n)) * svd.matrixU().leftCols(k) *
                         sigma.head(k).asDiagonal();

    // Orient each axis so the largest-magnitude coordinate is positive;
    // ties broken by the lowest observation index.
    for (Eigen::Index a = 0; a < k; ++a) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = std::abs(scores.coordinates(i, a));
            if (v > best_abs) {
                best_abs = v;
                best = i;
            }
        }
        if (scores.coordinates(best, a) < 0.0) scores.coordinates.col(a) = -scores.coordinates.col(a);
    }
    return scores;
}

Eigen::MatrixXd project(const FactorScores& scores, int m) {
    if (m < 0 || m > scores.retained())
        throw AxisOutOfRangeError("project: axis count " + std::to_string(m) + " out of range 0.." +
                                  std::to_string(scores.retained()));
    return scores.coordinates.leftCols(m);
}

Eigen::MatrixXd FactorScores::standardized_coordinates() const {
    Eigen::MatrixXd out = coordinates;
    for (Eigen::Index a = 0; a < out.cols(); ++a) {
        const double sd = std::sqrt(eigenvalues(a));
        if (sd > 0.0) out.col(a) /= sd;
    }
    return out;
}

void save_factor_scores(const FactorScores& scores, const std::filesystem::path& json_path,
                        const std::filesystem::path& coords_csv_path) {
    nlohmann::json j;
    j["retained"] = scores.retained();
    j["total_inertia"] = scores.total_inertia;
    j["eigenvalues"] = std::vector<double>(scores.eigenvalues.begin(), scores.eigenvalues.end());
    j["coordinates_csv"] = coords_csv_path.filename().string();
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + json_path.string() + "'");
    out << j.dump(2) << '\n';
    write_matrix_csv(coords_csv_path, scores.coordinates);
}

FactorScores load_factor_scores(const std::filesystem::path& json_path,
                                const std::filesystem::path& coords_csv_path) {
    std::ifstream in(json_path);
    if (!in) throw Error("cannot open '" + json_path.string() + "'");
    nlohmann::json j;
    in >> j;
    FactorScores scores;
    scores.total_inertia = j.at("total_inertia").get<double>();
    const auto eig = j.at("eigenvalues").get<std::vector<double>>();
    scores.eigenvalues =
        Eigen::Map<const Eigen::VectorXd>(eig.data(), static_cast<Eigen::Index>(eig.size()));
    scores.coordinates = read_matrix_csv(coords_csv_path);
    if (scores.coordinates.cols() != scores.eigenvalues.size())
        throw Error("factor scores: coordinate/eigenvalue axis mismatch");
    return scores;
}

} // namespace segtraj
