#include "segtraj/markov.hpp"

#include "segtraj/csv.hpp"
#include "segtraj/rng.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>

namespace segtraj {

namespace {

constexpr double kRowTol = 1e-9;

void check_stochastic_row(const Eigen::MatrixXd& m, int row, const std::string& what) {
    double sum = 0.0;
    for (int j = 0; j < m.cols(); ++j) {
        const double p = m(row, j);
        if (p < -1e-15 || p > 1.0 + 1e-12)
            throw NonStochasticError(what + ": entry out of [0,1] in row " + std::to_string(row));
        sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTol)
        throw NonStochasticError(what + ": row " + std::to_string(row) + " sums to " +
                                 format_double(sum));
}

} // namespace

bool TransitionTensor::row_defined(int pair, int state) const {
    if (!has_counts()) return true;
    return counts[static_cast<std::size_t>(pair)].row(state).sum() > 0.0;
}

TransitionTensor TransitionTensor::homogeneous(const Eigen::MatrixXd& matrix, int first_year,
                                               int last_year) {
    if (matrix.rows() != matrix.cols() || matrix.rows() < 1)
        throw NonStochasticError("homogeneous tensor: matrix must be square");
    if (last_year <= first_year)
        throw Error("homogeneous tensor: need at least one year pair");
    for (int i = 0; i < matrix.rows(); ++i) check_stochastic_row(matrix, i, "homogeneous tensor");

    TransitionTensor t;
    t.k = static_cast<int>(matrix.rows());
    t.first_year = first_year;
    t.probs.assign(static_cast<std::size_t>(last_year - first_year), matrix);
    return t;
}

TransitionTensor TransitionTensor::smoothed(double alpha) const {
    if (!has_counts()) throw Error("smoothed: tensor carries no counts");
    if (alpha <= 0.0) throw Error("smoothed: alpha must be positive");
    TransitionTensor t;
    t.k = k;
    t.first_year = first_year;
    t.probs.reserve(counts.size());
    t.counts.reserve(counts.size());
    for (const Eigen::MatrixXd& c : counts) {
        Eigen::MatrixXd sm = c.array() + alpha;
        t.counts.push_back(sm);
        for (int i = 0; i < sm.rows(); ++i) sm.row(i) /= sm.row(i).sum();
        t.probs.push_back(sm);
    }
    return t;
}

void TransitionTensor::validate() const {
    if (k < 1) throw Error("tensor: k must be positive");
    if (probs.empty()) throw Error("tensor: no year pairs");
    if (has_counts() && counts.size() != probs.size())
        throw Error("tensor: counts/probs length mismatch");
    for (std::size_t n = 0; n < probs.size(); ++n) {
        if (probs[n].rows() != k || probs[n].cols() != k)
            throw Error("tensor: matrix shape mismatch at pair " + std::to_string(n));
        for (int i = 0; i < k; ++i) {
            if (!row_defined(static_cast<int>(n), i)) {
                if (probs[n].row(i).cwiseAbs().sum() > 0.0)
                    throw Error("tensor: undefined row with nonzero probabilities");
                continue;
            }
            check_stochastic_row(probs[n], i, "tensor pair " + std::to_string(n));
        }
    }
}

TransitionTensor estimate_transitions(const std::vector<SegmentObservation>& observations, int k,
                                      int first_year, int last_year) {
    if (k < 1) throw Error("estimate_transitions: k must be positive");
    if (last_year <= first_year)
        throw Error("estimate_transitions: need at least one year pair");
    const int pairs = last_year - first_year;

    // Index observations by (individual, year).
    std::map<std::pair<std::string, int>, int> state_at;
    for (const SegmentObservation& obs : observations) {
        if (obs.segment < 1 || obs.segment > k)
            throw Error("estimate_transitions: segment " + std::to_string(obs.segment) +
                        " outside 1.." + std::to_string(k));
        state_at[{obs.individual_id, obs.year}] = obs.segment;
    }

    TransitionTensor t;
    t.k = k;
    t.first_year = first_year;
    t.probs.assign(static_cast<std::size_t>(pairs), Eigen::MatrixXd::Zero(k, k));
    t.counts.assign(static_cast<std::size_t>(pairs), Eigen::MatrixXd::Zero(k, k));

    for (const auto& [key, segment] : state_at) {
        const int year = key.second;
        if (year < first_year || year >= last_year) continue;
        const auto next = state_at.find({key.first, year + 1});
        if (next == state_at.end()) continue;
        t.counts[static_cast<std::size_t>(year - first_year)](segment - 1, next->second - 1) +=
            1.0;
    }

    for (int n = 0; n < pairs; ++n) {
        auto& c = t.counts[static_cast<std::size_t>(n)];
        if (c.sum() == 0.0)
            throw NoTransitionsError("estimate_transitions: no transitions observed between " +
                                         std::to_string(first_year + n) + " and " +
                                         std::to_string(first_year + n + 1),
                                     first_year + n);
        auto& p = t.probs[static_cast<std::size_t>(n)];
        for (int i = 0; i < k; ++i) {
            const double row_total = c.row(i).sum();
            if (row_total > 0.0) p.row(i) = c.row(i) / row_total;
        }
    }
    return t;
}

namespace {

HomogeneityResult lr_test(const std::vector<const Eigen::MatrixXd*>& count_layers, int k) {
    int layers_with_data = 0;
    for (const Eigen::MatrixXd* c : count_layers)
        if (c->sum() > 0.0) ++layers_with_data;
    if (layers_with_data < 2)
        throw InsufficientDataError("homogeneity test: need at least 2 observed year pairs");

    Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(k, k);
    for (const Eigen::MatrixXd* c : count_layers) pooled += *c;

    double g = 0.0;
    int df = 0;
    for (int i = 0; i < k; ++i) {
        const double pooled_row = pooled.row(i).sum();
        if (pooled_row == 0.0) continue;
        int observed_layers = 0;  // T_i
        for (const Eigen::MatrixXd* c : count_layers) {
            const double layer_row = c->row(i).sum();
            if (layer_row == 0.0) continue;
            ++observed_layers;
            for (int j = 0; j < k; ++j) {
                const double n_ij = (*c)(i, j);
                if (n_ij == 0.0) continue;
                const double p_layer = n_ij / layer_row;
                const double p_pooled = pooled(i, j) / pooled_row;
                g += 2.0 * n_ij * std::log(p_layer / p_pooled);
            }
        }
        int support = 0;  // m_i
        for (int j = 0; j < k; ++j)
            if (pooled(i, j) > 0.0) ++support;
        df += (observed_layers - 1) * (support - 1);
    }
    if (df < 1)
        throw InsufficientDataError("homogeneity test: zero degrees of freedom");

    HomogeneityResult r;
    r.statistic = std::max(g, 0.0);
    r.df = df;
    boost::math::chi_squared dist(static_cast<double>(df));
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
    return r;
}

} // namespace

HomogeneityResult homogeneity_test(const TransitionTensor& tensor) {
    if (!tensor.has_counts())
        throw InsufficientDataError("homogeneity test: tensor carries no counts");
    std::vector<const Eigen::MatrixXd*> layers;
    layers.reserve(tensor.counts.size());
    for (const Eigen::MatrixXd& c : tensor.counts) layers.push_back(&c);
    return lr_test(layers, tensor.k);
}

std::vector<PairTest> adjacent_pair_tests(const TransitionTensor& tensor) {
    if (!tensor.has_counts())
        throw InsufficientDataError("pair tests: tensor carries no counts");
    std::vector<PairTest> tests;
    for (int n = 0; n + 1 < tensor.pair_count(); ++n) {
        PairTest pt;
        pt.year_a = tensor.first_year + n;
        pt.year_b = tensor.first_year + n + 1;
        pt.result = lr_test({&tensor.counts[static_cast<std::size_t>(n)],
                             &tensor.counts[static_cast<std::size_t>(n + 1)]},
                            tensor.k);
        tests.push_back(pt);
    }
    return tests;
}

SimulationResult simulate(const TransitionTensor& tensor, const std::vector<double>& initial,
                          long n_paths, std::uint64_t seed, SimulateOptions options) {
    tensor.validate();
    if (static_cast<int>(initial.size()) != tensor.k)
        throw Error("simulate: initial distribution size != k");
    double total = 0.0;
    for (double p : initial) {
        if (p < 0.0) throw NonStochasticError("simulate: negative initial probability");
        total += p;
    }
    if (std::abs(total - 1.0) > kRowTol)
        throw NonStochasticError("simulate: initial distribution sums to " +
                                 format_double(total));
    if (n_paths < 1) throw Error("simulate: n_paths must be positive");

    const int pairs = tensor.pair_count();
    SimulationResult result;
    result.trajectories.resize(static_cast<std::size_t>(n_paths));

    char id_buf[24];
    std::vector<double> row(static_cast<std::size_t>(tensor.k));
    for (long p = 0; p < n_paths; ++p) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(p));
        Trajectory& traj = result.trajectories[static_cast<std::size_t>(p)];
        std::snprintf(id_buf, sizeof id_buf, "sim%07ld", p + 1);
        traj.individual_id = id_buf;
        traj.start_year = tensor.first_year;
        traj.states.resize(static_cast<std::size_t>(pairs) + 1);

        int state = static_cast<int>(rng.categorical(initial)) + 1;
        traj.states[0] = state;
        for (int n = 0; n < pairs; ++n) {
            if (!tensor.row_defined(n, state - 1)) {
                if (options.strict)
                    throw UndefinedRowError(
                        "simulate: undefined row for segment " + std::to_string(state) +
                            " between " + std::to_string(tensor.first_year + n) + " and " +
                            std::to_string(tensor.first_year + n + 1),
                        tensor.first_year + n, state);
                ++result.fallback_steps;
            } else {
                const auto& m = tensor.probs[static_cast<std::size_t>(n)];
                for (int j = 0; j < tensor.k; ++j) row[static_cast<std::size_t>(j)] = m(state - 1, j);
                state = static_cast<int>(rng.categorical(row)) + 1;
            }
            traj.states[static_cast<std::size_t>(n) + 1] = state;
        }
    }
    return result;
}

MeanChain mean_chain(const std::vector<Trajectory>& trajectories, int k) {
    if (trajectories.empty()) throw EmptyInputError("mean_chain: no trajectories");
    if (k < 1) throw Error("mean_chain: k must be positive");

    MeanChain chain;
    chain.k = k;
    chain.counts = Eigen::MatrixXd::Zero(k, k);
    for (const Trajectory& traj : trajectories) {
        for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
            const int a = traj.states[t], b = traj.states[t + 1];
            if (a < 1 || a > k || b < 1 || b > k)
                throw Error("mean_chain: state outside 1.." + std::to_string(k));
            chain.counts(a - 1, b - 1) += 1.0;
            ++chain.total_transitions;
        }
    }
    if (chain.total_transitions == 0) throw EmptyInputError("mean_chain: no transitions");

    chain.probs = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        const double row_total = chain.counts.row(i).sum();
        if (row_total == 0.0)
            throw UnvisitedStateError("mean_chain: state " + std::to_string(i + 1) +
                                          " never visited as a source",
                                      i + 1);
        chain.probs.row(i) = chain.counts.row(i) / row_total;
    }
    return chain;
}

namespace {

StationaryDist cesaro_limit(const Eigen::MatrixXd& p) {
    const auto k = p.rows();
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Constant(k, 1.0 / static_cast<double>(k));
    Eigen::RowVectorXd avg = x;
    Eigen::RowVectorXd prev_avg = avg;
    const long max_iter = 2'000'000;
    for (long t = 1; t <= max_iter; ++t) {
        x = x * p;
        prev_avg = avg;
        avg += (x - avg) / static_cast<double>(t + 1);
        if (t % 16 == 0 && (avg - prev_avg).cwiseAbs().maxCoeff() < 1e-12 &&
            (avg * p - avg).cwiseAbs().maxCoeff() < 1e-12)
            break;
    }
    StationaryDist d;
    d.method = "cesaro";
    d.pi = avg.transpose();
    d.pi = d.pi.cwiseMax(0.0);
    d.pi /= d.pi.sum();
    return d;
}

} // namespace

StationaryDist limit_distribution(const Eigen::MatrixXd& probs) {
    if (probs.rows() != probs.cols() || probs.rows() < 1)
        throw NonStochasticError("limit_distribution: matrix must be square");
    const auto k = probs.rows();
    for (int i = 0; i < k; ++i) check_stochastic_row(probs, static_cast<int>(i), "limit_distribution");
    Eigen::MatrixXd p = probs;
    for (int i = 0; i < k; ++i) p.row(i) /= p.row(i).sum();

    // pi (P - I) = 0 subject to sum pi = 1. Uniqueness needs
    // rank(P - I) = k - 1.
    Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(k, k);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    if (lu.rank() < k - 1)
        throw NotUniqueError("limit_distribution: stationary distribution is not unique");

    Eigen::MatrixXd system = a;
    system.row(k - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    rhs(k - 1) = 1.0;
    Eigen::VectorXd pi = system.fullPivLu().solve(rhs);

    const double residual = (pi.transpose() * p - pi.transpose()).cwiseAbs().maxCoeff();
    const double worst_negative = pi.minCoeff();
    if (residual <= 1e-10 && worst_negative >= -1e-10) {
        StationaryDist d;
        d.method = "linear_solve";
        d.pi = pi.cwiseMax(0.0);
        d.pi /= d.pi.sum();
        return d;
    }
    return cesaro_limit(p);
}

StationaryDist limit_distribution(const MeanChain& chain) {
    if (chain.probs.rows() != chain.k || chain.probs.cols() != chain.k)
        throw NonStochasticError("limit_distribution: chain matrix shape mismatch");
    return limit_distribution(chain.probs);
}

Eigen::MatrixXd renormalize_rows(const Eigen::MatrixXd& matrix) {
    Eigen::MatrixXd out = matrix;
    for (int i = 0; i < out.rows(); ++i) {
        double sum = 0.0;
        for (int j = 0; j < out.cols(); ++j) {
            if (out(i, j) < 0.0)
                throw NonStochasticError("renormalize_rows: negative entry in row " +
                                         std::to_string(i));
            sum += out(i, j);
        }
        if (sum <= 0.0)
            throw NonStochasticError("renormalize_rows: row " + std::to_string(i) +
                                     " sums to zero");
        out.row(i) /= sum;
    }
    return out;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
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

void dump_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

nlohmann::json slurp_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    nlohmann::json j;
    in >> j;
    return j;
}

} // namespace

void save_tensor(const TransitionTensor& tensor, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["k"] = tensor.k;
    j["first_year"] = tensor.first_year;
    auto& probs = j["probs"] = nlohmann::json::array();
    for (const auto& m : tensor.probs) probs.push_back(matrix_to_json(m));
    if (tensor.has_counts()) {
        auto& counts = j["counts"] = nlohmann::json::array();
        for (const auto& m : tensor.counts) counts.push_back(matrix_to_json(m));
    }
    dump_json(j, json_path);
}

TransitionTensor load_tensor(const std::filesystem::path& json_path) {
    const nlohmann::json j = slurp_json(json_path);
    TransitionTensor t;
    t.k = j.at("k").get<int>();
    t.first_year = j.at("first_year").get<int>();
    for (const auto& m : j.at("probs")) t.probs.push_back(matrix_from_json(m));
    if (j.contains("counts"))
        for (const auto& m : j.at("counts")) t.counts.push_back(matrix_from_json(m));
    return t;
}

void save_mean_chain(const MeanChain& chain, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["k"] = chain.k;
    j["probs"] = matrix_to_json(chain.probs);
    j["counts"] = matrix_to_json(chain.counts);
    j["total_transitions"] = chain.total_transitions;
    dump_json(j, json_path);
}

MeanChain load_mean_chain(const std::filesystem::path& json_path) {
    const nlohmann::json j = slurp_json(json_path);
    MeanChain chain;
    chain.k = j.at("k").get<int>();
    chain.probs = matrix_from_json(j.at("probs"));
    chain.counts = matrix_from_json(j.at("counts"));
    chain.total_transitions = j.at("total_transitions").get<long>();
    return chain;
}

void save_stationary(const StationaryDist& dist, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["method"] = dist.method;
    auto& pi = j["pi"] = nlohmann::json::array();
    for (int i = 0; i < dist.pi.size(); ++i) pi.push_back(dist.pi(i));
    dump_json(j, json_path);
}

StationaryDist load_stationary(const std::filesystem::path& json_path) {
    const nlohmann::json j = slurp_json(json_path);
    StationaryDist d;
    d.method = j.at("method").get<std::string>();
    const auto& pi = j.at("pi");
    d.pi.resize(static_cast<Eigen::Index>(pi.size()));
    for (std::size_t i = 0; i < pi.size(); ++i)
        d.pi(static_cast<Eigen::Index>(i)) = pi.at(i).get<double>();
    return d;
}

void write_trajectories_csv(const std::vector<Trajectory>& trajectories,
                            const std::filesystem::path& path) {
    if (trajectories.empty()) throw EmptyInputError("write_trajectories_csv: no trajectories");
    const std::size_t horizon = trajectories.front().states.size();
    const int start = trajectories.front().start_year;
    CsvTable table;
    table.header = {"individual_id", "start_year"};
    for (std::size_t t = 0; t < horizon; ++t)
        table.header.push_back("y" + std::to_string(start + static_cast<int>(t)));
    for (const Trajectory& traj : trajectories) {
        if (traj.states.size() != horizon || traj.start_year != start)
            throw Error("write_trajectories_csv: mixed horizons");
        std::vector<std::string> row{traj.individual_id, std::to_string(traj.start_year)};
        for (int s : traj.states) row.push_back(std::to_string(s));
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    if (table.header.size() < 3 || table.header[0] != "individual_id" ||
        table.header[1] != "start_year")
        throw Error("trajectories csv: unexpected header in '" + path.string() + "'");
    std::vector<Trajectory> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw Error("trajectories csv: ragged row in '" + path.string() + "'");
        Trajectory traj;
        traj.individual_id = row[0];
        traj.start_year = static_cast<int>(parse_long(row[1], "start_year"));
        for (std::size_t c = 2; c < row.size(); ++c)
            traj.states.push_back(static_cast<int>(parse_long(row[c], "state")));
        out.push_back(std::move(traj));
    }
    return out;
}

} // namespace segtraj
