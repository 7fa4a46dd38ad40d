#include "segtraj/ward.hpp"

#include "segtraj/csv.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>

namespace segtraj {

Dendrogram ward_cluster(const Eigen::MatrixXd& code_vectors, const std::vector<long>& weights) {
    if (static_cast<std::size_t>(code_vectors.rows()) != weights.size())
        throw Error("ward_cluster: weights length != code vector count");

    Dendrogram d;
    d.unit_count = static_cast<int>(code_vectors.rows());
    for (int u = 0; u < d.unit_count; ++u) {
        if (weights[static_cast<std::size_t>(u)] < 0)
            throw Error("ward_cluster: negative weight");
        if (weights[static_cast<std::size_t>(u)] > 0) {
            d.leaf_ids.push_back(u);
            d.leaf_weights.push_back(weights[static_cast<std::size_t>(u)]);
        }
    }
    const int L = d.leaf_count();
    if (L < 2) throw TooFewClustersError("ward_cluster: need at least 2 non-empty units");

    struct Cluster {
        int id;
        double w;
        long size;
    };
    std::vector<Cluster> live;
    live.reserve(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i)
        live.push_back({i, static_cast<double>(d.leaf_weights[static_cast<std::size_t>(i)]),
                        d.leaf_weights[static_cast<std::size_t>(i)]});

    // Pairwise Ward cost, indexed by position in `live`.
    std::vector<std::vector<double>> dist(static_cast<std::size_t>(L),
                                          std::vector<double>(static_cast<std::size_t>(L), 0.0));
    for (int i = 0; i < L; ++i) {
        for (int j = i + 1; j < L; ++j) {
            const double wi = live[static_cast<std::size_t>(i)].w;
            const double wj = live[static_cast<std::size_t>(j)].w;
            const double d2 = (code_vectors.row(d.leaf_ids[static_cast<std::size_t>(i)]) -
                               code_vectors.row(d.leaf_ids[static_cast<std::size_t>(j)]))
                                  .squaredNorm();
            dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                dist[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
                    wi * wj / (wi + wj) * d2;
        }
    }

    d.merges.reserve(static_cast<std::size_t>(L - 1));
    for (int t = 0; t < L - 1; ++t) {
        // Lowest cost; ties to the lowest (min id, max id) pair.
        std::size_t pi = 0, pj = 1;
        double best = std::numeric_limits<double>::infinity();
        int best_lo = 0, best_hi = 0;
        for (std::size_t i = 0; i < live.size(); ++i) {
            for (std::size_t j = i + 1; j < live.size(); ++j) {
                const double c = dist[i][j];
                const int lo = std::min(live[i].id, live[j].id);
                const int hi = std::max(live[i].id, live[j].id);
                if (c < best || (c == best && (lo < best_lo || (lo == best_lo && hi < best_hi)))) {
                    best = c;
                    best_lo = lo;
                    best_hi = hi;
                    pi = i;
                    pj = j;
                }
            }
        }

        const Cluster a = live[pi];
        const Cluster b = live[pj];
        d.merges.push_back({std::min(a.id, b.id), std::max(a.id, b.id), best, a.size + b.size});

        // Lance-Williams update against every other live cluster, writing the
        // merged cluster into position pi and dropping pj.
        const double wi = a.w, wj = b.w;
        for (std::size_t kpos = 0; kpos < live.size(); ++kpos) {
            if (kpos == pi || kpos == pj) continue;
            const double wk = live[kpos].w;
            const double updated =
                ((wi + wk) * dist[pi][kpos] + (wj + wk) * dist[pj][kpos] - wk * best) /
                (wi + wj + wk);
            dist[pi][kpos] = dist[kpos][pi] = updated;
        }
        live[pi] = {L + t, wi + wj, a.size + b.size};
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(pj));
        for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(pj));
        dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(pj));
    }
    return d;
}

Segmentation cut(const Dendrogram& dendrogram, int k) {
    const int L = dendrogram.leaf_count();
    if (k < 1 || k > L)
        throw KOutOfRangeError("cut: k = " + std::to_string(k) + " outside 1.." +
                               std::to_string(L));

    // Replay all but the last k-1 merges over leaf sets keyed by cluster id.
    std::vector<std::vector<int>> members(static_cast<std::size_t>(2 * L - 1));
    std::vector<bool> live(static_cast<std::size_t>(2 * L - 1), false);
    for (int i = 0; i < L; ++i) {
        members[static_cast<std::size_t>(i)] = {i};
        live[static_cast<std::size_t>(i)] = true;
    }
    const int steps = L - k;
    for (int t = 0; t < steps; ++t) {
        const Merge& m = dendrogram.merges[static_cast<std::size_t>(t)];
        auto& into = members[static_cast<std::size_t>(L + t)];
        into = members[static_cast<std::size_t>(m.a)];
        into.insert(into.end(), members[static_cast<std::size_t>(m.b)].begin(),
                    members[static_cast<std::size_t>(m.b)].end());
        live[static_cast<std::size_t>(m.a)] = false;
        live[static_cast<std::size_t>(m.b)] = false;
        live[static_cast<std::size_t>(L + t)] = true;
    }

    struct Group {
        long weight;
        int min_unit;
        std::vector<int> leaves;
    };
    std::vector<Group> groups;
    for (std::size_t id = 0; id < live.size(); ++id) {
        if (!live[id]) continue;
        Group g;
        g.weight = 0;
        g.min_unit = dendrogram.unit_count;
        g.leaves = members[id];
        for (int leaf : g.leaves) {
            g.weight += dendrogram.leaf_weights[static_cast<std::size_t>(leaf)];
            g.min_unit = std::min(g.min_unit, dendrogram.leaf_ids[static_cast<std::size_t>(leaf)]);
        }
        groups.push_back(std::move(g));
    }
    std::sort(groups.begin(), groups.end(), [](const Group& x, const Group& y) {
        if (x.weight != y.weight) return x.weight > y.weight;
        return x.min_unit < y.min_unit;
    });

    Segmentation seg;
    seg.k = k;
    seg.unit_to_segment.assign(static_cast<std::size_t>(dendrogram.unit_count), 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (int leaf : groups[g].leaves)
            seg.unit_to_segment[static_cast<std::size_t>(
                dendrogram.leaf_ids[static_cast<std::size_t>(leaf)])] = static_cast<int>(g) + 1;
    }
    return seg;
}

Segmentation profile_segments(Segmentation segmentation, const Panel& panel,
                              const std::vector<int>& assignments) {
    if (assignments.size() != panel.records.size())
        throw InconsistentAssignmentError("profile_segments: one assignment per record required");

    const auto& vars = panel.spec.variables;
    std::vector<int> cat_vars, num_vars;  // indices into vars
    for (int v = 0; v < static_cast<int>(vars.size()); ++v)
        (vars[static_cast<std::size_t>(v)].is_numeric() ? num_vars : cat_vars).push_back(v);

    const int k = segmentation.k;
    segmentation.profiles.assign(static_cast<std::size_t>(k), SegmentProfile{});
    for (auto& p : segmentation.profiles) {
        p.categorical.resize(cat_vars.size());
        for (std::size_t c = 0; c < cat_vars.size(); ++c)
            p.categorical[c].assign(
                static_cast<std::size_t>(
                    vars[static_cast<std::size_t>(cat_vars[c])].modality_count),
                0.0);
        p.numeric.assign(num_vars.size(), NumericSummary{});
    }

    // First pass: counts and sums.
    std::vector<std::vector<double>> num_sum(static_cast<std::size_t>(k),
                                             std::vector<double>(num_vars.size(), 0.0));
    std::vector<std::vector<double>> num_sumsq = num_sum;
    const auto active = panel.spec.active_indices();
    const auto supp = panel.spec.supplementary_indices();
    std::vector<int> var_to_active(vars.size(), -1), var_to_supp(vars.size(), -1);
    for (std::size_t i = 0; i < active.size(); ++i)
        var_to_active[static_cast<std::size_t>(active[i])] = static_cast<int>(i);
    for (std::size_t i = 0; i < supp.size(); ++i)
        var_to_supp[static_cast<std::size_t>(supp[i])] = static_cast<int>(i);

    for (std::size_t r = 0; r < panel.records.size(); ++r) {
        const int unit = assignments[r];
        if (unit < 0 || unit >= static_cast<int>(segmentation.unit_to_segment.size()))
            throw InconsistentAssignmentError("profile_segments: unit index out of range at record " +
                                              std::to_string(r));
        const int label = segmentation.unit_to_segment[static_cast<std::size_t>(unit)];
        if (label < 1 || label > k)
            throw InconsistentAssignmentError("profile_segments: record " + std::to_string(r) +
                                              " assigned to unlabeled unit " +
                                              std::to_string(unit));
        SegmentProfile& p = segmentation.profiles[static_cast<std::size_t>(label - 1)];
        ++p.member_count;
        const PanelRecord& rec = panel.records[r];
        for (std::size_t c = 0; c < cat_vars.size(); ++c) {
            const int v = cat_vars[c];
            int modality = 0;
            if (var_to_active[static_cast<std::size_t>(v)] >= 0) {
                modality = rec.answers[static_cast<std::size_t>(
                    var_to_active[static_cast<std::size_t>(v)])];
            } else {
                const double raw = rec.supplementary[static_cast<std::size_t>(
                    var_to_supp[static_cast<std::size_t>(v)])];
                if (std::isnan(raw)) continue;  // missing categorical answer
                modality = static_cast<int>(raw);
            }
            if (modality >= 1 &&
                modality <= vars[static_cast<std::size_t>(v)].modality_count)
                p.categorical[c][static_cast<std::size_t>(modality - 1)] += 1.0;
        }
        for (std::size_t c = 0; c < num_vars.size(); ++c) {
            const double x = rec.supplementary[static_cast<std::size_t>(
                var_to_supp[static_cast<std::size_t>(num_vars[c])])];
            if (std::isnan(x)) continue;
            auto& s = p.numeric[c];
            ++s.n;
            num_sum[static_cast<std::size_t>(label - 1)][c] += x;
            num_sumsq[static_cast<std::size_t>(label - 1)][c] += x * x;
        }
    }

    // Second pass: normalize counts to frequencies, finish moments.
    for (int s = 0; s < k; ++s) {
        SegmentProfile& p = segmentation.profiles[static_cast<std::size_t>(s)];
        for (auto& freqs : p.categorical) {
            const double total = std::accumulate(freqs.begin(), freqs.end(), 0.0);
            if (total > 0)
                for (double& f : freqs) f /= total;
        }
        for (std::size_t c = 0; c < p.numeric.size(); ++c) {
            auto& m = p.numeric[c];
            if (m.n > 0) {
                m.mean = num_sum[static_cast<std::size_t>(s)][c] / static_cast<double>(m.n);
                const double var =
                    num_sumsq[static_cast<std::size_t>(s)][c] / static_cast<double>(m.n) -
                    m.mean * m.mean;
                m.sd = var > 0 ? std::sqrt(var) : 0.0;
            }
        }
    }
    return segmentation;
}

double contiguity_score(const Segmentation& segmentation, const Topology& topology) {
    if (topology.unit_count() != static_cast<int>(segmentation.unit_to_segment.size()))
        throw Error("contiguity_score: topology size mismatch");
    if (segmentation.k < 1) throw Error("contiguity_score: empty segmentation");

    int connected = 0;
    for (int s = 1; s <= segmentation.k; ++s) {
        std::vector<int> units;
        for (int u = 0; u < topology.unit_count(); ++u)
            if (segmentation.unit_to_segment[static_cast<std::size_t>(u)] == s) units.push_back(u);
        if (units.empty()) continue;

        // BFS over the 4-neighborhood restricted to this segment.
        std::vector<bool> seen(static_cast<std::size_t>(topology.unit_count()), false);
        std::deque<int> queue{units.front()};
        seen[static_cast<std::size_t>(units.front())] = true;
        int reached = 0;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            ++reached;
            const int row = u / topology.cols, col = u % topology.cols;
            const int drow[] = {-1, 1, 0, 0}, dcol[] = {0, 0, -1, 1};
            for (int n = 0; n < 4; ++n) {
                const int nr = row + drow[n], nc = col + dcol[n];
                if (nr < 0 || nr >= topology.rows || nc < 0 || nc >= topology.cols) continue;
                const int v = nr * topology.cols + nc;
                if (seen[static_cast<std::size_t>(v)] ||
                    segmentation.unit_to_segment[static_cast<std::size_t>(v)] != s)
                    continue;
                seen[static_cast<std::size_t>(v)] = true;
                queue.push_back(v);
            }
        }
        if (reached == static_cast<int>(units.size())) ++connected;
    }
    return static_cast<double>(connected) / static_cast<double>(segmentation.k);
}

int segment_for_unit(const Segmentation& segmentation, const Eigen::MatrixXd& code_vectors,
                     int unit) {
    if (unit < 0 || unit >= static_cast<int>(segmentation.unit_to_segment.size()))
        throw Error("segment_for_unit: unit out of range");
    const int direct = segmentation.unit_to_segment[static_cast<std::size_t>(unit)];
    if (direct > 0) return direct;

    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int u = 0; u < static_cast<int>(segmentation.unit_to_segment.size()); ++u) {
        if (segmentation.unit_to_segment[static_cast<std::size_t>(u)] == 0) continue;
        const double d = (code_vectors.row(u) - code_vectors.row(unit)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = u;
        }
    }
    if (best < 0) throw Error("segment_for_unit: no labeled unit available");
    return segmentation.unit_to_segment[static_cast<std::size_t>(best)];
}

void save_dendrogram(const Dendrogram& dendrogram, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["unit_count"] = dendrogram.unit_count;
    j["leaf_ids"] = dendrogram.leaf_ids;
    j["leaf_weights"] = dendrogram.leaf_weights;
    auto& merges = j["merges"] = nlohmann::json::array();
    for (const Merge& m : dendrogram.merges)
        merges.push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}, {"size", m.new_size}});
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + json_path.string() + "'");
    out << j.dump(2) << '\n';
}

Dendrogram load_dendrogram(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw Error("cannot open '" + json_path.string() + "'");
    nlohmann::json j;
    in >> j;
    Dendrogram d;
    d.unit_count = j.at("unit_count").get<int>();
    d.leaf_ids = j.at("leaf_ids").get<std::vector<int>>();
    d.leaf_weights = j.at("leaf_weights").get<std::vector<long>>();
    for (const auto& m : j.at("merges"))
        d.merges.push_back({m.at("a").get<int>(), m.at("b").get<int>(),
                            m.at("height").get<double>(), m.at("size").get<long>()});
    return d;
}

void save_segmentation(const Segmentation& segmentation, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["k"] = segmentation.k;
    j["unit_to_segment"] = segmentation.unit_to_segment;
    if (!segmentation.profiles.empty()) {
        auto& profiles = j["profiles"] = nlohmann::json::array();
        for (const SegmentProfile& p : segmentation.profiles) {
            nlohmann::json jp;
            jp["member_count"] = p.member_count;
            jp["categorical"] = p.categorical;
            auto& nums = jp["numeric"] = nlohmann::json::array();
            for (const NumericSummary& s : p.numeric)
                nums.push_back({{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}});
            profiles.push_back(std::move(jp));
        }
    }
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + json_path.string() + "'");
    out << j.dump(2) << '\n';
}

Segmentation load_segmentation(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw Error("cannot open '" + json_path.string() + "'");
    nlohmann::json j;
    in >> j;
    Segmentation seg;
    seg.k = j.at("k").get<int>();
    seg.unit_to_segment = j.at("unit_to_segment").get<std::vector<int>>();
    if (j.contains("profiles")) {
        for (const auto& jp : j.at("profiles")) {
            SegmentProfile p;
            p.member_count = jp.at("member_count").get<long>();
            p.categorical = jp.at("categorical").get<std::vector<std::vector<double>>>();
            for (const auto& s : jp.at("numeric"))
                p.numeric.push_back({s.at("mean").get<double>(), s.at("sd").get<double>(),
                                     s.at("n").get<long>()});
            seg.profiles.push_back(std::move(p));
        }
    }
    return seg;
}

void write_profiles(const Segmentation& segmentation, const VariableSpec& spec,
                    const std::filesystem::path& dir) {
    if (segmentation.profiles.empty()) throw Error("write_profiles: segmentation not profiled");
    std::filesystem::create_directories(dir);

    std::size_t cat_pos = 0, num_pos = 0;
    for (const Variable& var : spec.variables) {
        CsvTable table;
        if (!var.is_numeric()) {
            table.header = {"segment"};
            for (int m = 1; m <= var.modality_count; ++m)
                table.header.push_back("m" + std::to_string(m));
            for (int s = 0; s < segmentation.k; ++s) {
                const auto& freqs =
                    segmentation.profiles[static_cast<std::size_t>(s)].categorical[cat_pos];
                std::vector<std::string> row{std::to_string(s + 1)};
                for (double f : freqs) row.push_back(format_double(f));
                table.rows.push_back(std::move(row));
            }
            ++cat_pos;
        } else {
            table.header = {"segment", "mean", "sd", "n"};
            for (int s = 0; s < segmentation.k; ++s) {
                const auto& m =
                    segmentation.profiles[static_cast<std::size_t>(s)].numeric[num_pos];
                table.rows.push_back({std::to_string(s + 1), format_double(m.mean),
                                      format_double(m.sd), std::to_string(m.n)});
            }
            ++num_pos;
        }
        write_csv(dir / ("profile_" + var.id + ".csv"), table);
    }
}

} // namespace segtraj
