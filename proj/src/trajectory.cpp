#include "segtraj/trajectory.hpp"

#include "segtraj/csv.hpp"
#include "segtraj/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <sstream>

namespace segtraj {

int ReorderMap::apply(int raw_label) const {
    if (raw_label < 1 || raw_label > k())
        throw LabelOutOfRangeError("reorder: label " + std::to_string(raw_label) +
                                   " outside 1.." + std::to_string(k()));
    return to_scale[static_cast<std::size_t>(raw_label - 1)];
}

ReorderMap ReorderMap::identity(int k) {
    if (k < 1) throw Error("reorder: k must be positive");
    ReorderMap map;
    map.to_scale.resize(static_cast<std::size_t>(k));
    std::iota(map.to_scale.begin(), map.to_scale.end(), 1);
    return map;
}

void ReorderMap::validate() const {
    const int n = k();
    if (n < 1) throw Error("reorder: empty map");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int pos : to_scale) {
        if (pos < 1 || pos > n || seen[static_cast<std::size_t>(pos - 1)])
            throw Error("reorder: not a bijection on 1.." + std::to_string(n));
        seen[static_cast<std::size_t>(pos - 1)] = true;
    }
}

Eigen::RowVectorXd encode(const Trajectory& trajectory, const ReorderMap& reorder) {
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(trajectory.states.size()));
    for (std::size_t t = 0; t < trajectory.states.size(); ++t)
        v(static_cast<Eigen::Index>(t)) = static_cast<double>(reorder.apply(trajectory.states[t]));
    return v;
}

TrajectoryClassModel classify_trajectories(const std::vector<Trajectory>& trajectories,
                                           const ReorderMap& reorder, std::uint64_t seed,
                                           int units) {
    if (trajectories.empty()) throw EmptyInputError("classify_trajectories: no trajectories");
    reorder.validate();
    if (units < 1) throw Error("classify_trajectories: need at least one unit");

    const std::size_t horizon = trajectories.front().states.size();
    const int first_year = trajectories.front().start_year;
    if (horizon == 0) throw HorizonMismatchError("classify_trajectories: empty trajectory");

    TrajectoryClassModel model;
    model.k = reorder.k();
    model.horizon = static_cast<int>(horizon);
    model.units = units;
    model.first_year = first_year;
    model.seed = seed;
    model.reorder = reorder;
    model.total = static_cast<long>(trajectories.size());
    model.groups.resize(static_cast<std::size_t>(model.k));

    std::vector<std::vector<Eigen::RowVectorXd>> grouped(static_cast<std::size_t>(model.k));
    for (const Trajectory& traj : trajectories) {
        if (traj.states.size() != horizon || traj.start_year != first_year)
            throw HorizonMismatchError("classify_trajectories: trajectories must share horizon");
        const Eigen::RowVectorXd v = encode(traj, reorder);
        const int state = static_cast<int>(v(0));
        grouped[static_cast<std::size_t>(state - 1)].push_back(v);
    }

    for (int s = 1; s <= model.k; ++s) {
        TrajectoryGroup& group = model.groups[static_cast<std::size_t>(s - 1)];
        group.initial_state = s;
        auto& rows = grouped[static_cast<std::size_t>(s - 1)];
        group.size = static_cast<long>(rows.size());
        if (group.size < TrajectoryClassModel::min_group_size) {
            if (group.size > 0)
                std::cerr << "classify: skipping initial state " << s << " (" << group.size
                          << " trajectories < " << TrajectoryClassModel::min_group_size << ")\n";
            continue;
        }

        // Order-independent training: draws address sorted rows.
        std::sort(rows.begin(), rows.end(),
                  [](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
                      return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                                          b.data() + b.size());
                  });
        Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(horizon));
        for (std::size_t r = 0; r < rows.size(); ++r)
            data.row(static_cast<Eigen::Index>(r)) = rows[r];

        const std::uint64_t group_seed = mix64(seed ^ mix64(static_cast<std::uint64_t>(s)));
        SomModel som = som_init(Topology::string(units), data, group_seed);
        group.model = som_train(std::move(som), data);
        group.trained = true;

        group.unit_counts.assign(static_cast<std::size_t>(units), 0);
        for (int unit : assign(group.model, data))
            ++group.unit_counts[static_cast<std::size_t>(unit)];
    }
    return model;
}

ClassReport class_report(const TrajectoryClassModel& model) {
    bool any_trained = false;
    for (const TrajectoryGroup& g : model.groups) any_trained = any_trained || g.trained;
    if (!any_trained) throw UntrainedModelError("class_report: no trained group");

    ClassReport report;
    report.k = model.k;
    report.horizon = model.horizon;
    report.units = model.units;
    report.first_year = model.first_year;
    for (const TrajectoryGroup& g : model.groups) {
        ClassReportEntry e;
        e.initial_state = g.initial_state;
        e.share = model.total > 0
                      ? static_cast<double>(g.size) / static_cast<double>(model.total)
                      : 0.0;
        e.trained = g.trained;
        if (g.trained) {
            e.codes = g.model.code_vectors;
            e.unit_counts = g.unit_counts;
            e.unit_freqs.reserve(g.unit_counts.size());
            for (long c : g.unit_counts)
                e.unit_freqs.push_back(static_cast<double>(c) / static_cast<double>(g.size));
        }
        report.entries.push_back(std::move(e));
    }
    return report;
}

namespace {

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd rows_matrix(const nlohmann::json& rows) {
    const auto r = rows.size();
    if (r == 0) return {};
    const auto c = rows.at(0).size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows.at(i).at(j).get<double>();
    return m;
}

} // namespace

void save_trajectory_model(const TrajectoryClassModel& model,
                           const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["k"] = model.k;
    j["horizon"] = model.horizon;
    j["units"] = model.units;
    j["first_year"] = model.first_year;
    j["seed"] = model.seed;
    j["total"] = model.total;
    j["reorder"] = model.reorder.to_scale;
    auto& groups = j["groups"] = nlohmann::json::array();
    for (const TrajectoryGroup& g : model.groups) {
        nlohmann::json jg;
        jg["initial_state"] = g.initial_state;
        jg["size"] = g.size;
        jg["trained"] = g.trained;
        if (g.trained) {
            jg["codes"] = matrix_rows(g.model.code_vectors);
            jg["unit_counts"] = g.unit_counts;
            jg["schedule"] = {{"iterations", g.model.schedule.iterations},
                              {"rate0", g.model.schedule.rate0},
                              {"rate1", g.model.schedule.rate1},
                              {"radius0", g.model.schedule.radius0},
                              {"radius1", g.model.schedule.radius1}};
            jg["seed"] = g.model.seed;
        }
        groups.push_back(std::move(jg));
    }
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + json_path.string() + "'");
    out << j.dump(2) << '\n';
}

TrajectoryClassModel load_trajectory_model(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw Error("cannot open '" + json_path.string() + "'");
    nlohmann::json j;
    in >> j;

    TrajectoryClassModel model;
    model.k = j.at("k").get<int>();
    model.horizon = j.at("horizon").get<int>();
    model.units = j.at("units").get<int>();
    model.first_year = j.at("first_year").get<int>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.total = j.at("total").get<long>();
    model.reorder.to_scale = j.at("reorder").get<std::vector<int>>();
    for (const auto& jg : j.at("groups")) {
        TrajectoryGroup g;
        g.initial_state = jg.at("initial_state").get<int>();
        g.size = jg.at("size").get<long>();
        g.trained = jg.at("trained").get<bool>();
        if (g.trained) {
            g.model.topology = Topology::string(model.units);
            g.model.dim = model.horizon;
            g.model.code_vectors = rows_matrix(jg.at("codes"));
            g.model.seed = jg.at("seed").get<std::uint64_t>();
            g.model.schedule.iterations = jg.at("schedule").at("iterations").get<long>();
            g.model.schedule.rate0 = jg.at("schedule").at("rate0").get<double>();
            g.model.schedule.rate1 = jg.at("schedule").at("rate1").get<double>();
            g.model.schedule.radius0 = jg.at("schedule").at("radius0").get<double>();
            g.model.schedule.radius1 = jg.at("schedule").at("radius1").get<double>();
            g.unit_counts = jg.at("unit_counts").get<std::vector<long>>();
        }
        model.groups.push_back(std::move(g));
    }
    return model;
}

void save_class_report(const ClassReport& report, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["k"] = report.k;
    j["horizon"] = report.horizon;
    j["units"] = report.units;
    j["first_year"] = report.first_year;
    auto& entries = j["entries"] = nlohmann::json::array();
    for (const ClassReportEntry& e : report.entries) {
        nlohmann::json je;
        je["initial_state"] = e.initial_state;
        je["share"] = e.share;
        je["trained"] = e.trained;
        if (e.trained) {
            je["codes"] = matrix_rows(e.codes);
            je["unit_counts"] = e.unit_counts;
            je["unit_freqs"] = e.unit_freqs;
        }
        entries.push_back(std::move(je));
    }
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + json_path.string() + "'");
    out << j.dump(2) << '\n';
}

namespace {

std::string fixed2(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

std::string fixed1(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", x);
    return buf;
}

} // namespace

void write_class_report_svg(const ClassReport& report, const std::filesystem::path& svg_path) {
    const int panel_w = 430, panel_h = 130, freq_h = 26, margin = 16, label_w = 120;
    const int plot_x = label_w + margin;
    const int plot_w = panel_w - plot_x - margin;
    const int total_w = panel_w;
    const int panel_stride = panel_h + freq_h + margin;
    const int total_h = margin + panel_stride * static_cast<int>(report.entries.size()) + margin;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w << "\" height=\""
        << total_h << "\" viewBox=\"0 0 " << total_w << " " << total_h << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const char* palette[] = {"#1b6ca8", "#cc3311", "#117733", "#b58900", "#7b4fa6",
                             "#0aa6a6", "#d66ba0", "#666666", "#994f00", "#33bbee"};
    const int palette_size = 10;

    int y0 = margin;
    for (const ClassReportEntry& e : report.entries) {
        const int plot_y = y0;
        svg << "<text x=\"" << margin << "\" y=\"" << y0 + 18
            << "\" font-family=\"sans-serif\" font-size=\"13\">start " << e.initial_state
            << "</text>\n";
        svg << "<text x=\"" << margin << "\" y=\"" << y0 + 36
            << "\" font-family=\"sans-serif\" font-size=\"13\">" << fixed1(100.0 * e.share)
            << "%</text>\n";
        svg << "<rect x=\"" << plot_x << "\" y=\"" << plot_y << "\" width=\"" << plot_w
            << "\" height=\"" << panel_h - margin
            << "\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\"/>\n";

        if (!e.trained) {
            svg << "<text x=\"" << plot_x + plot_w / 2 << "\" y=\"" << y0 + panel_h / 2
                << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#888888\" "
                   "text-anchor=\"middle\">too few trajectories</text>\n";
            y0 += panel_stride;
            continue;
        }

        // Scale: x over years, y over positions 1..k with 1 (best) on top.
        const auto x_at = [&](int t) {
            return plot_x + 6 +
                   (plot_w - 12) * (report.horizon > 1
                                        ? static_cast<double>(t) / (report.horizon - 1)
                                        : 0.5);
        };
        const auto y_at = [&](double v) {
            return plot_y + 8 +
                   (panel_h - margin - 16) * (report.k > 1 ? (v - 1.0) / (report.k - 1) : 0.5);
        };

        for (int u = 0; u < static_cast<int>(e.codes.rows()); ++u) {
            svg << "<polyline fill=\"none\" stroke=\"" << palette[u % palette_size]
                << "\" stroke-width=\"1.3\" points=\"";
            for (int t = 0; t < report.horizon; ++t) {
                if (t) svg << ' ';
                svg << fixed2(x_at(t)) << ',' << fixed2(y_at(e.codes(u, t)));
            }
            svg << "\"/>\n";
        }

        svg << "<text x=\"" << plot_x << "\" y=\"" << y0 + panel_h + 14
            << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#444444\">freq ";
        for (std::size_t u = 0; u < e.unit_freqs.size(); ++u) {
            if (u) svg << "  ";
            svg << fixed1(100.0 * e.unit_freqs[u]);
        }
        svg << "</text>\n";
        y0 += panel_stride;
    }
    svg << "</svg>\n";

    std::ofstream out(svg_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + svg_path.string() + "'");
    out << svg.str();
}

} // namespace segtraj
