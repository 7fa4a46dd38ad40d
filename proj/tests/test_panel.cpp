#include "segtraj/panel.hpp"

#include "segtraj/csv.hpp"

#include <cmath>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <set>

using namespace segtraj;

namespace {

std::filesystem::path temp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "segtraj_panel_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

// Minimal two-variable spec for hand-written fixtures.
VariableSpec tiny_spec() {
    VariableSpec spec;
    spec.variables = {
        {"a", "a", VariableRole::active, 2},
        {"b", "b", VariableRole::active, 3},
        {"s", "s", VariableRole::supplementary, 2},
        {"x", "x", VariableRole::supplementary, 0},
    };
    return spec;
}

std::filesystem::path write_fixture(const std::string& name, const std::string& body) {
    const auto path = temp_dir() / name;
    std::ofstream out(path, std::ios::binary);
    out << body;
    return path;
}

LatentDynamics tiny_latent(const VariableSpec& spec, int k) {
    Eigen::MatrixXd transition = Eigen::MatrixXd::Constant(k, k, 0.3 / (k - 1));
    transition.diagonal().setConstant(0.7);
    return LatentDynamics::well_separated(spec, k, 0.8, transition,
                                          std::vector<double>(k, 1.0 / k));
}

} // namespace

TEST_SUITE("panel") {

TEST_CASE("default spec matches the survey layout") {
    const VariableSpec spec = default_variable_spec();
    CHECK(spec.active_count() == 22);
    CHECK(spec.total_active_modalities() == 99);
    CHECK(spec.variables.size() == 50);
    CHECK(spec.supplementary_indices().size() == 28);
    int numeric = 0;
    for (const auto& v : spec.variables)
        if (v.role == VariableRole::supplementary && v.is_numeric()) ++numeric;
    CHECK(numeric == 8);
}

TEST_CASE("spec validation rejects broken layouts") {
    VariableSpec spec = tiny_spec();
    spec.variables[0].modality_count = 1;
    CHECK_THROWS_AS(spec.validate(), InvalidSpecError);

    spec = tiny_spec();
    spec.variables[1].id = "a";
    CHECK_THROWS_AS(spec.validate(), InvalidSpecError);
}

TEST_CASE("ingest reads a well-formed file") {
    const auto path = write_fixture("ok.csv", "id,year,a,b,s,x\n"
                                              "i1,1990,1,2,1,0.5\n"
                                              "i1,1991,2,3,2,\n"
                                              "i2,1991,1,1,,1.25\n");
    const Panel panel = ingest_csv(path, tiny_spec());
    REQUIRE(panel.records.size() == 3);
    CHECK(panel.first_year == 1990);
    CHECK(panel.last_year == 1991);
    CHECK(panel.records[0].answers == std::vector<int>{1, 2});
    CHECK(panel.records[1].supplementary[0] == 2.0);
    CHECK(std::isnan(panel.records[1].supplementary[1]));
    CHECK(std::isnan(panel.records[2].supplementary[0]));
    CHECK(panel.records[2].supplementary[1] == 1.25);
}

TEST_CASE("ingest reports missing columns") {
    const auto path = write_fixture("missing.csv", "id,year,a,s,x\ni1,1990,1,1,0\n");
    CHECK_THROWS_AS(ingest_csv(path, tiny_spec()), MissingColumnError);
}

TEST_CASE("ingest reports out-of-range modalities with the data row") {
    const auto path = write_fixture("range.csv", "id,year,a,b,s,x\n"
                                                 "i1,1990,1,3,1,0\n"
                                                 "i1,1991,2,4,1,0\n");
    try {
        ingest_csv(path, tiny_spec());
        FAIL("expected ModalityOutOfRangeError");
    } catch (const ModalityOutOfRangeError& e) {
        CHECK(e.row() == 2);
    }
}

TEST_CASE("ingest rejects duplicate observations") {
    const auto path = write_fixture("dup.csv", "id,year,a,b,s,x\n"
                                               "i1,1990,1,1,1,0\n"
                                               "i1,1990,2,2,1,0\n");
    CHECK_THROWS_AS(ingest_csv(path, tiny_spec()), DuplicateObservationError);
}

TEST_CASE("ingest rejects year gaps per individual") {
    const auto path = write_fixture("gap.csv", "id,year,a,b,s,x\n"
                                               "i1,1990,1,1,1,0\n"
                                               "i1,1992,1,1,1,0\n");
    try {
        ingest_csv(path, tiny_spec());
        FAIL("expected GapInYearsError");
    } catch (const GapInYearsError& e) {
        CHECK(e.individual() == "i1");
    }
}

TEST_CASE("write then ingest round-trips") {
    const VariableSpec spec = tiny_spec();
    Panel panel;
    panel.spec = spec;
    panel.records = {
        {"i1", 1990, {1, 2}, {1.0, 0.5}},
        {"i1", 1991, {2, 3}, {std::nan(""), -2.0}},
    };
    panel.first_year = 1990;
    panel.last_year = 1991;
    const auto path = temp_dir() / "roundtrip.csv";
    write_csv(panel, path);
    const Panel back = ingest_csv(path, spec);
    REQUIRE(back.records.size() == panel.records.size());
    for (std::size_t i = 0; i < back.records.size(); ++i)
        CHECK(back.records[i] == panel.records[i]);
}

TEST_CASE("filter_panel keeps individuals with enough observations") {
    Panel panel;
    panel.spec = tiny_spec();
    panel.records = {
        {"i1", 1990, {1, 1}, {1.0, 0.0}},
        {"i1", 1991, {1, 1}, {1.0, 0.0}},
        {"i2", 1991, {1, 1}, {1.0, 0.0}},
    };
    panel.first_year = 1990;
    panel.last_year = 1991;
    const Panel kept = filter_panel(panel, 2);
    REQUIRE(kept.records.size() == 2);
    CHECK(kept.records[0].individual_id == "i1");
    CHECK(kept.first_year == 1990);
    CHECK(kept.last_year == 1991);
}

TEST_CASE("well_separated builds valid distinct distributions") {
    const VariableSpec spec = default_variable_spec();
    const LatentDynamics latent = tiny_latent(spec, 7);
    latent.validate(spec);
    // Peaks differ between segments on almost every variable.
    int disagreements = 0;
    const auto& s0 = latent.modality_dists[0];
    const auto& s1 = latent.modality_dists[1];
    for (std::size_t v = 0; v < s0.size(); ++v) {
        const auto peak = [](const std::vector<double>& d) {
            return std::distance(d.begin(), std::max_element(d.begin(), d.end()));
        };
        if (peak(s0[v]) != peak(s1[v])) ++disagreements;
    }
    CHECK(disagreements == s0.size());
    // Every modality keeps positive mass.
    for (const auto& per_var : latent.modality_dists)
        for (const auto& dist : per_var)
            for (double p : dist) CHECK(p > 0.0);
}

TEST_CASE("generator is deterministic and respects the window layout") {
    const VariableSpec spec = default_variable_spec();
    const LatentDynamics latent = tiny_latent(spec, 3);
    const SyntheticPanel a = generate_synthetic_panel(99, 200, 1990, 1995, spec, latent);
    const SyntheticPanel b = generate_synthetic_panel(99, 200, 1990, 1995, spec, latent);
    REQUIRE(a.panel.records.size() == 600);
    REQUIRE(a.latent_segments.size() == 600);
    CHECK(a.latent_segments == b.latent_segments);
    for (std::size_t i = 0; i < a.panel.records.size(); ++i)
        CHECK(a.panel.records[i] == b.panel.records[i]);

    // Three consecutive years per individual, inside the configured range.
    for (std::size_t i = 0; i < a.panel.records.size(); i += 3) {
        const int start = a.panel.records[i].year;
        CHECK(start >= 1990);
        CHECK(start + 2 <= 1995);
        CHECK(a.panel.records[i + 1].year == start + 1);
        CHECK(a.panel.records[i + 2].year == start + 2);
        CHECK(a.panel.records[i].individual_id == a.panel.records[i + 2].individual_id);
    }
    a.panel.validate();

    const SyntheticPanel c = generate_synthetic_panel(100, 200, 1990, 1995, spec, latent);
    CHECK(c.latent_segments != a.latent_segments);
}

TEST_CASE("generated answers follow the latent segment distributions") {
    const VariableSpec spec = default_variable_spec();
    const LatentDynamics latent = tiny_latent(spec, 3);
    const SyntheticPanel sp = generate_synthetic_panel(7, 3000, 1990, 1994, spec, latent);

    // For variable v01 (4 modalities, peak at (segment + 0) % 3), check the
    // per-segment empirical peak matches the configured one.
    std::vector<std::vector<long>> counts(3, std::vector<long>(4, 0));
    for (std::size_t r = 0; r < sp.panel.records.size(); ++r)
        ++counts[static_cast<std::size_t>(sp.latent_segments[r] - 1)]
                [static_cast<std::size_t>(sp.panel.records[r].answers[0] - 1)];
    for (int s = 0; s < 3; ++s) {
        const auto peak = std::distance(
            counts[static_cast<std::size_t>(s)].begin(),
            std::max_element(counts[static_cast<std::size_t>(s)].begin(),
                             counts[static_cast<std::size_t>(s)].end()));
        CHECK(peak == s % 3);
    }
}

}
