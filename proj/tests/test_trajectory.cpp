#include "segtraj/trajectory.hpp"

#include "segtraj/rng.hpp"

#include <algorithm>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

using namespace segtraj;

namespace {

std::vector<Trajectory> block(const std::string& prefix, int n, int start_year,
                              const std::vector<int>& states) {
    std::vector<Trajectory> out;
    for (int i = 0; i < n; ++i) out.push_back({prefix + std::to_string(i), start_year, states});
    return out;
}

} // namespace

TEST_SUITE("trajectory") {

TEST_CASE("reorder maps validate and apply") {
    const ReorderMap id = ReorderMap::identity(3);
    CHECK(id.k() == 3);
    CHECK(id.apply(2) == 2);

    ReorderMap swap;
    swap.to_scale = {2, 1, 3};
    swap.validate();
    CHECK(swap.apply(1) == 2);
    CHECK(swap.apply(2) == 1);
    CHECK_THROWS_AS(swap.apply(0), LabelOutOfRangeError);
    CHECK_THROWS_AS(swap.apply(4), LabelOutOfRangeError);

    ReorderMap broken;
    broken.to_scale = {1, 1, 3};
    CHECK_THROWS_AS(broken.validate(), Error);
}

TEST_CASE("encode turns labels into scale positions") {
    ReorderMap swap;
    swap.to_scale = {3, 1, 2};
    const Trajectory traj{"a", 1990, {1, 2, 3, 2}};
    const Eigen::RowVectorXd v = encode(traj, swap);
    REQUIRE(v.size() == 4);
    CHECK(v(0) == 3.0);
    CHECK(v(1) == 1.0);
    CHECK(v(2) == 2.0);
    CHECK(v(3) == 1.0);
}

TEST_CASE("small groups are reported but not trained") {
    // 30 trajectories from state 1, only 3 from state 2.
    auto trajs = block("a", 30, 1990, {1, 1, 2, 2});
    const auto few = block("b", 3, 1990, {2, 2, 2, 2});
    trajs.insert(trajs.end(), few.begin(), few.end());
    const TrajectoryClassModel model =
        classify_trajectories(trajs, ReorderMap::identity(3), 5, 4);
    REQUIRE(model.groups.size() == 3);
    CHECK(model.total == 33);
    CHECK(model.horizon == 4);
    CHECK(model.groups[0].trained);
    CHECK(model.groups[0].size == 30);
    CHECK_FALSE(model.groups[1].trained);
    CHECK(model.groups[1].size == 3);
    CHECK(model.groups[2].size == 0);
    // Trained group: every member of a single repeated shape maps to one
    // unit, so one unit holds all 30.
    const auto& counts = model.groups[0].unit_counts;
    CHECK(std::accumulate(counts.begin(), counts.end(), 0L) == 30);
    CHECK(*std::max_element(counts.begin(), counts.end()) == 30);
}

TEST_CASE("two distinct shapes land on distinct units") {
    auto trajs = block("up", 40, 1990, {1, 1, 2, 3});
    const auto down = block("down", 40, 1990, {1, 3, 3, 1});
    trajs.insert(trajs.end(), down.begin(), down.end());
    const TrajectoryClassModel model =
        classify_trajectories(trajs, ReorderMap::identity(3), 11, 6);
    const TrajectoryGroup& g = model.groups[0];
    REQUIRE(g.trained);
    CHECK(g.size == 80);
    // Exactly two units populated, 40 members each.
    std::vector<long> nonzero;
    for (long c : g.unit_counts)
        if (c > 0) nonzero.push_back(c);
    REQUIRE(nonzero.size() == 2);
    CHECK(nonzero[0] == 40);
    CHECK(nonzero[1] == 40);
}

TEST_CASE("classification ignores input order") {
    Rng rng(3);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 60; ++i) {
        std::vector<int> states;
        int s = 1 + static_cast<int>(rng.uniform_below(2));
        for (int t = 0; t < 5; ++t) {
            states.push_back(s);
            if (rng.uniform01() < 0.3) s = 1 + static_cast<int>(rng.uniform_below(3));
        }
        trajs.push_back({"t" + std::to_string(i), 1990, states});
    }
    auto shuffled = trajs;
    std::reverse(shuffled.begin(), shuffled.end());
    const TrajectoryClassModel a = classify_trajectories(trajs, ReorderMap::identity(3), 21);
    const TrajectoryClassModel b = classify_trajectories(shuffled, ReorderMap::identity(3), 21);
    REQUIRE(a.groups.size() == b.groups.size());
    for (std::size_t s = 0; s < a.groups.size(); ++s) {
        CHECK(a.groups[s].size == b.groups[s].size);
        CHECK(a.groups[s].trained == b.groups[s].trained);
        if (a.groups[s].trained) {
            CHECK((a.groups[s].model.code_vectors - b.groups[s].model.code_vectors)
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
            CHECK(a.groups[s].unit_counts == b.groups[s].unit_counts);
        }
    }
}

TEST_CASE("mixed horizons and bad labels are rejected") {
    std::vector<Trajectory> ragged = {{"a", 1990, {1, 2}}, {"b", 1990, {1, 2, 3}}};
    CHECK_THROWS_AS(classify_trajectories(ragged, ReorderMap::identity(3), 1),
                    HorizonMismatchError);
    std::vector<Trajectory> bad = {{"a", 1990, {1, 9}}};
    CHECK_THROWS_AS(classify_trajectories(bad, ReorderMap::identity(3), 1),
                    LabelOutOfRangeError);
    CHECK_THROWS_AS(classify_trajectories({}, ReorderMap::identity(3), 1), EmptyInputError);
}

TEST_CASE("report shares and frequencies are consistent") {
    auto trajs = block("a", 25, 1990, {1, 2, 2});
    const auto other = block("b", 75, 1990, {2, 2, 1});
    trajs.insert(trajs.end(), other.begin(), other.end());
    const TrajectoryClassModel model =
        classify_trajectories(trajs, ReorderMap::identity(2), 9, 3);
    const ClassReport report = class_report(model);
    CHECK(report.k == 2);
    CHECK(report.horizon == 3);
    CHECK(report.first_year == 1990);
    REQUIRE(report.entries.size() == 2);
    CHECK(report.entries[0].share == doctest::Approx(0.25));
    CHECK(report.entries[1].share == doctest::Approx(0.75));
    double share_sum = 0.0;
    for (const auto& e : report.entries) share_sum += e.share;
    CHECK(share_sum == doctest::Approx(1.0));
    for (const auto& e : report.entries) {
        if (!e.trained) continue;
        double freq_sum = 0.0;
        long count_sum = 0;
        for (double f : e.unit_freqs) freq_sum += f;
        for (long c : e.unit_counts) count_sum += c;
        CHECK(freq_sum == doctest::Approx(1.0));
        CHECK(count_sum == (e.initial_state == 1 ? 25 : 75));
    }
}

TEST_CASE("a report needs at least one trained group") {
    const auto trajs = block("a", 5, 1990, {1, 1});
    const TrajectoryClassModel model =
        classify_trajectories(trajs, ReorderMap::identity(2), 3, 2);
    CHECK_THROWS_AS(class_report(model), UntrainedModelError);
}

TEST_CASE("model survives a save/load round trip") {
    auto trajs = block("a", 20, 1991, {1, 2, 3, 3});
    const auto more = block("b", 15, 1991, {2, 2, 1, 1});
    trajs.insert(trajs.end(), more.begin(), more.end());
    ReorderMap swap;
    swap.to_scale = {2, 1, 3};
    const TrajectoryClassModel model = classify_trajectories(trajs, swap, 13, 5);
    const auto dir = std::filesystem::temp_directory_path() / "segtraj_trajectory_tests";
    std::filesystem::create_directories(dir);
    save_trajectory_model(model, dir / "model.json");
    const TrajectoryClassModel back = load_trajectory_model(dir / "model.json");
    CHECK(back.k == model.k);
    CHECK(back.horizon == model.horizon);
    CHECK(back.units == model.units);
    CHECK(back.first_year == model.first_year);
    CHECK(back.seed == model.seed);
    CHECK(back.total == model.total);
    CHECK(back.reorder.to_scale == model.reorder.to_scale);
    REQUIRE(back.groups.size() == model.groups.size());
    for (std::size_t s = 0; s < model.groups.size(); ++s) {
        CHECK(back.groups[s].size == model.groups[s].size);
        CHECK(back.groups[s].trained == model.groups[s].trained);
        if (model.groups[s].trained) {
            CHECK((back.groups[s].model.code_vectors - model.groups[s].model.code_vectors)
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
            CHECK(back.groups[s].unit_counts == model.groups[s].unit_counts);
        }
    }
}

TEST_CASE("report files are written") {
    auto trajs = block("a", 30, 1990, {1, 2, 2, 3});
    const auto more = block("b", 30, 1990, {3, 2, 2, 1});
    trajs.insert(trajs.end(), more.begin(), more.end());
    const TrajectoryClassModel model =
        classify_trajectories(trajs, ReorderMap::identity(3), 2, 4);
    const ClassReport report = class_report(model);
    const auto dir = std::filesystem::temp_directory_path() / "segtraj_trajectory_tests";
    std::filesystem::create_directories(dir);
    save_class_report(report, dir / "report.json");
    CHECK(std::filesystem::exists(dir / "report.json"));
    write_class_report_svg(report, dir / "report.svg");
    std::ifstream in(dir / "report.svg");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string svg = buf.str();
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
}

}
