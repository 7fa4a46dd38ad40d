#pragma once

#include "segtraj/error.hpp"
#include "segtraj/panel.hpp"

#include <Eigen/Dense>
#include <filesystem>
#include <optional>

namespace segtraj {

class EmptyPanelError : public Error {
  public:
    using Error::Error;
};

class DegenerateInputError : public Error {
  public:
    using Error::Error;
};

class AxisOutOfRangeError : public Error {
  public:
    using Error::Error;
};

// Complete disjunctive coding of the active variables: n x J binary matrix,
// one 1 per variable per row, so every row sums to Q.
struct IndicatorMatrix {
    Eigen::MatrixXd entries;
    int active_variables = 0;  // Q

    Eigen::Index n() const { return entries.rows(); }
    Eigen::Index total_modalities() const { return entries.cols(); }  // J
};

IndicatorMatrix build_indicator(const Panel& panel);

// Principal row coordinates of the correspondence analysis of the indicator
// matrix. Column a has mean 0 and variance eigenvalues[a].
struct FactorScores {
    Eigen::MatrixXd coordinates;  // n x K
    Eigen::VectorXd eigenvalues;  // K, non-increasing
    double total_inertia = 0.0;   // sum over all axes, retained or not

    int retained() const { return static_cast<int>(eigenvalues.size()); }

    // Columns rescaled to unit variance (zero-variance columns untouched),
    // for feeding downstream consumers that expect standardized inputs.
    Eigen::MatrixXd standardized_coordinates() const;
};

// Correspondence analysis of the indicator matrix: correspondence table
// P = entries / (n*Q), uniform row masses, column masses = modality
// frequencies, SVD of the standardized residuals. Empty modality columns
// are dropped before factoring. axes == nullopt retains every axis with
// eigenvalue > 1/Q; otherwise the requested count (capped at the positive
// spectrum).
FactorScores mca_fit(const IndicatorMatrix& indicator, std::optional<int> axes = std::nullopt);

// First m coordinate columns (eigenvalue order).
Eigen::MatrixXd project(const FactorScores& scores, int m);

void save_factor_scores(const FactorScores& scores, const std::filesystem::path& json_path,
                        const std::filesystem::path& coords_csv_path);
FactorScores load_factor_scores(const std::filesystem::path& json_path,
                                const std::filesystem::path& coords_csv_path);

} // namespace segtraj
