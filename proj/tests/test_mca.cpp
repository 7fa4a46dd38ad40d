#include "segtraj/mca.hpp"

#include "segtraj/rng.hpp"

#include <doctest.h>
#include <filesystem>

using namespace segtraj;

namespace {

VariableSpec spec_of(const std::vector<int>& modality_counts) {
    VariableSpec spec;
    for (std::size_t i = 0; i < modality_counts.size(); ++i) {
        char id[8];
        std::snprintf(id, sizeof(id), "v%02zu", i + 1);
        spec.variables.push_back({id, id, VariableRole::active, modality_counts[i]});
    }
    return spec;
}

Panel panel_of(const VariableSpec& spec, const std::vector<std::vector<int>>& rows) {
    Panel panel;
    panel.spec = spec;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        PanelRecord rec;
        rec.individual_id = "i" + std::to_string(i + 1);
        rec.year = 1990;
        rec.answers = rows[i];
        panel.records.push_back(std::move(rec));
    }
    panel.first_year = 1990;
    panel.last_year = 1990;
    return panel;
}

Panel random_panel(std::uint64_t seed, int n, const std::vector<int>& modality_counts) {
    const VariableSpec spec = spec_of(modality_counts);
    Rng rng(seed);
    std::vector<std::vector<int>> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<int> row;
        for (int m : modality_counts)
            row.push_back(1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(m))));
        rows.push_back(std::move(row));
    }
    return panel_of(spec, rows);
}

// Eigendecomposition of the small J x J cross-product, as an independent
// check on the SVD route used by mca_fit.
Eigen::VectorXd burt_route_eigenvalues(const IndicatorMatrix& indicator) {
    const Eigen::Index n = indicator.n();
    const Eigen::Index j = indicator.total_modalities();
    const double q = indicator.active_variables;
    Eigen::MatrixXd p = indicator.entries / (static_cast<double>(n) * q);
    Eigen::VectorXd r = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    Eigen::VectorXd c = p.colwise().sum();
    Eigen::MatrixXd s(n, j);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < j; ++b)
            s(a, b) = (p(a, b) - r(a) * c(b)) / std::sqrt(r(a) * c(b));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.transpose() * s);
    return es.eigenvalues().reverse();
}

} // namespace

TEST_SUITE("mca") {

TEST_CASE("indicator matrix is complete disjunctive coding") {
    const VariableSpec spec = spec_of({2, 3});
    const Panel panel = panel_of(spec, {{1, 3}, {2, 1}, {1, 2}});
    const IndicatorMatrix ind = build_indicator(panel);
    CHECK(ind.n() == 3);
    CHECK(ind.total_modalities() == 5);
    CHECK(ind.active_variables == 2);
    for (Eigen::Index i = 0; i < ind.n(); ++i) CHECK(ind.entries.row(i).sum() == 2.0);
    CHECK(ind.entries(0, 0) == 1.0);
    CHECK(ind.entries(0, 4) == 1.0);
    CHECK(ind.entries(1, 1) == 1.0);
    CHECK(ind.entries(1, 2) == 1.0);
    CHECK(ind.entries(2, 3) == 1.0);
}

TEST_CASE("empty panel is rejected") {
    Panel panel;
    panel.spec = spec_of({2, 2});
    CHECK_THROWS_AS(build_indicator(panel), EmptyPanelError);
}

TEST_CASE("two perfectly associated binary variables give one unit axis") {
    // Classic CA fact: with two variables, indicator eigenvalues are
    // (1 + rho)/2 per canonical correlation rho; perfect association puts
    // lambda_1 = 1 and the trivial remainder at 1/2 each side collapses to
    // (1 - 1)/2 = 0.
    const VariableSpec spec = spec_of({2, 2});
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < 8; ++i) rows.push_back(i % 2 == 0 ? std::vector<int>{1, 1}
                                                          : std::vector<int>{2, 2});
    const Panel panel = panel_of(spec, rows);
    const FactorScores scores = mca_fit(build_indicator(panel));
    REQUIRE(scores.retained() >= 1);
    CHECK(scores.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(scores.total_inertia == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("total inertia equals (J' - Q)/Q") {
    const Panel panel = random_panel(11, 400, {4, 5, 3, 4});
    const IndicatorMatrix ind = build_indicator(panel);
    const FactorScores scores = mca_fit(ind, 12);
    CHECK(scores.total_inertia == doctest::Approx((16.0 - 4.0) / 4.0).epsilon(1e-12));
}

TEST_CASE("eigenvalues match an independent Burt-route eigensolver") {
    const Panel panel = random_panel(5, 120, {3, 4, 2});
    const IndicatorMatrix ind = build_indicator(panel);
    const FactorScores scores = mca_fit(ind, 6);  // rank bound J - Q = 6
    const Eigen::VectorXd reference = burt_route_eigenvalues(ind);
    REQUIRE(scores.retained() == 6);
    for (int a = 0; a < scores.retained(); ++a)
        CHECK(scores.eigenvalues(a) == doctest::Approx(reference(a)).epsilon(1e-9));
    double sum = 0.0;
    for (Eigen::Index a = 0; a < reference.size(); ++a)
        sum += std::max(reference(a), 0.0);
    CHECK(scores.total_inertia == doctest::Approx(sum).epsilon(1e-9));
}

TEST_CASE("coordinate columns are centered with variance equal to the eigenvalue") {
    const Panel panel = random_panel(21, 300, {4, 3, 5});
    const FactorScores scores = mca_fit(build_indicator(panel), 5);
    const Eigen::Index n = scores.coordinates.rows();
    for (int a = 0; a < scores.retained(); ++a) {
        const Eigen::VectorXd col = scores.coordinates.col(a);
        CHECK(std::abs(col.mean()) < 1e-10);
        const double var = col.squaredNorm() / static_cast<double>(n);
        CHECK(var == doctest::Approx(scores.eigenvalues(a)).epsilon(1e-9));
    }
    // And the default retention keeps exactly the axes above 1/Q.
    const FactorScores auto_scores = mca_fit(build_indicator(panel));
    for (int a = 0; a < auto_scores.retained(); ++a)
        CHECK(auto_scores.eigenvalues(a) > 1.0 / 3.0);
    if (auto_scores.retained() < scores.retained())
        CHECK(scores.eigenvalues(auto_scores.retained()) <= 1.0 / 3.0);
}

TEST_CASE("standardized coordinates have unit variance") {
    const Panel panel = random_panel(33, 200, {3, 3, 4});
    const FactorScores scores = mca_fit(build_indicator(panel), 4);
    const Eigen::MatrixXd z = scores.standardized_coordinates();
    const Eigen::Index n = z.rows();
    for (Eigen::Index a = 0; a < z.cols(); ++a)
        CHECK(z.col(a).squaredNorm() / static_cast<double>(n) ==
              doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("eigenvalues are non-increasing and axis requests are validated") {
    const Panel panel = random_panel(7, 150, {4, 4, 3});
    const IndicatorMatrix ind = build_indicator(panel);
    const FactorScores scores = mca_fit(ind, 8);  // rank bound J - Q = 8
    for (int a = 1; a < scores.retained(); ++a)
        CHECK(scores.eigenvalues(a) <= scores.eigenvalues(a - 1) + 1e-15);
    CHECK(mca_fit(ind, 0).retained() == 0);
    CHECK_THROWS_AS(mca_fit(ind, -3), AxisOutOfRangeError);
    // Requests beyond the positive spectrum are capped, not an error.
    const FactorScores capped = mca_fit(ind, 500);
    CHECK(capped.retained() <= 8);
}

TEST_CASE("project returns leading columns and validates m") {
    const Panel panel = random_panel(13, 100, {3, 4});
    const FactorScores scores = mca_fit(build_indicator(panel), 4);
    const Eigen::MatrixXd two = project(scores, 2);
    REQUIRE(two.cols() == 2);
    CHECK((two - scores.coordinates.leftCols(2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(project(scores, 0).cols() == 0);
    CHECK_THROWS_AS(project(scores, scores.retained() + 1), AxisOutOfRangeError);
    CHECK_THROWS_AS(project(scores, -1), AxisOutOfRangeError);
}

TEST_CASE("factor scores survive a save/load round trip") {
    const Panel panel = random_panel(3, 80, {3, 3});
    const FactorScores scores = mca_fit(build_indicator(panel), 3);
    const auto dir = std::filesystem::temp_directory_path() / "segtraj_mca_tests";
    std::filesystem::create_directories(dir);
    save_factor_scores(scores, dir / "mca.json", dir / "coords.csv");
    const FactorScores back = load_factor_scores(dir / "mca.json", dir / "coords.csv");
    CHECK(back.total_inertia == scores.total_inertia);
    REQUIRE(back.retained() == scores.retained());
    CHECK((back.eigenvalues - scores.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.coordinates - scores.coordinates).cwiseAbs().maxCoeff() == 0.0);
}

}
