#include "segtraj/som.hpp"

#include "segtraj/csv.hpp"
#include "segtraj/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

namespace segtraj {

Topology Topology::grid(int rows, int cols) {
    if (rows < 1 || cols < 1) throw Error("grid topology needs positive dimensions");
    return Topology{Kind::grid, rows, cols};
}

Topology Topology::string(int length) {
    if (length < 1) throw Error("string topology needs positive length");
    return Topology{Kind::string, 1, length};
}

int Topology::lattice_distance(int u, int v) const {
    if (kind == Kind::string) return std::abs(u - v);
    const int ru = u / cols, cu = u % cols;
    const int rv = v / cols, cv = v % cols;
    return std::max(std::abs(ru - rv), std::abs(cu - cv));
}

int Topology::diameter() const {
    if (kind == Kind::string) return cols - 1;
    return std::max(rows - 1, cols - 1);
}

double SomSchedule::rate_at(long t) const {
    if (iterations <= 1) return rate0;
    const double f = static_cast<double>(t) / static_cast<double>(iterations - 1);
    return rate0 + (rate1 - rate0) * f;
}

double SomSchedule::radius_at(long t) const {
    if (iterations <= 1) return radius0;
    const double f = static_cast<double>(t) / static_cast<double>(iterations - 1);
    return radius0 + (radius1 - radius0) * f;
}

SomSchedule default_schedule(const Topology& topology, long n_rows) {
    SomSchedule s;
    s.iterations = 5 * std::max<long>(n_rows, 1);
    s.rate0 = 0.5;
    s.rate1 = 0.01;
    s.radius0 = topology.diameter() / 2.0;
    s.radius1 = 0.0;
    return s;
}

SomModel som_init(const Topology& topology, const Eigen::MatrixXd& data, std::uint64_t seed) {
    if (data.rows() == 0) throw EmptyDataError("som_init: empty data");
    if (data.cols() < 1) throw EmptyDataError("som_init: zero-dimensional data");

    const int units = topology.unit_count();
    SomModel model;
    model.topology = topology;
    model.dim = static_cast<int>(data.cols());
    model.code_vectors.resize(units, data.cols());
    model.schedule = default_schedule(topology, data.rows());
    model.seed = seed;

    Rng rng = Rng::stream(seed, 0);
    const auto n = static_cast<std::uint64_t>(data.rows());
    if (data.rows() >= units) {
        // Partial Fisher-Yates: first `units` entries of a seeded shuffle.
        std::vector<Eigen::Index> pool(static_cast<std::size_t>(data.rows()));
        std::iota(pool.begin(), pool.end(), 0);
        for (int u = 0; u < units; ++u) {
            const auto pick = u + static_cast<Eigen::Index>(rng.uniform_below(n - static_cast<std::uint64_t>(u)));
            std::swap(pool[static_cast<std::size_t>(u)], pool[static_cast<std::size_t>(pick)]);
            model.code_vectors.row(u) = data.row(pool[static_cast<std::size_t>(u)]);
        }
    } else {
        for (int u = 0; u < units; ++u)
            model.code_vectors.row(u) = data.row(static_cast<Eigen::Index>(rng.uniform_below(n)));
    }
    return model;
}

namespace {

int best_unit(const Eigen::MatrixXd& codes, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    int best = 0;
    double best_d = (codes.row(0) - x).squaredNorm();
    for (Eigen::Index u = 1; u < codes.rows(); ++u) {
        const double d = (codes.row(u) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(u);
        }
    }
    return best;
}

} // namespace

int bmu(const SomModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    if (x.size() != model.dim)
        throw DimensionMismatchError("bmu: query dimension " + std::to_string(x.size()) +
                                     " != model dimension " + std::to_string(model.dim));
    return best_unit(model.code_vectors, x);
}

SomModel som_train(SomModel model, const Eigen::MatrixXd& data) {
    if (data.cols() != model.dim)
        throw DimensionMismatchError("som_train: data dimension mismatch");
    if (data.rows() == 0) throw EmptyDataError("som_train: empty data");

    const int units = model.topology.unit_count();
    Rng rng = Rng::stream(model.seed, 1);
    const auto n = static_cast<std::uint64_t>(data.rows());

    for (long t = 0; t < model.schedule.iterations; ++t) {
        const auto row = static_cast<Eigen::Index>(rng.uniform_below(n));
        const int winner = best_unit(model.code_vectors, data.row(row));
        const double rate = model.schedule.rate_at(t);
        const double radius = model.schedule.radius_at(t);

        if (model.schedule.kernel == Kernel::bubble) {
            for (int u = 0; u < units; ++u) {
                if (model.topology.lattice_distance(u, winner) <= radius)
                    model.code_vectors.row(u) += rate * (data.row(row) - model.code_vectors.row(u));
            }
        } else {
            const double sigma = std::max(radius, 0.5);
            const double denom = 2.0 * sigma * sigma;
            for (int u = 0; u < units; ++u) {
                const double d = model.topology.lattice_distance(u, winner);
                const double g = std::exp(-d * d / denom);
                model.code_vectors.row(u) +=
                    rate * g * (data.row(row) - model.code_vectors.row(u));
            }
        }
    }
    return model;
}

std::vector<int> assign(const SomModel& model, const Eigen::MatrixXd& data) {
    if (data.rows() > 0 && data.cols() != model.dim)
        throw DimensionMismatchError("assign: data dimension mismatch");
    std::vector<int> labels(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index r = 0; r < data.rows(); ++r)
        labels[static_cast<std::size_t>(r)] = best_unit(model.code_vectors, data.row(r));
    return labels;
}

double quantization_error(const SomModel& model, const Eigen::MatrixXd& data) {
    if (data.rows() == 0) throw EmptyDataError("quantization_error: empty data");
    if (data.cols() != model.dim)
        throw DimensionMismatchError("quantization_error: data dimension mismatch");
    double total = 0.0;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        const int u = best_unit(model.code_vectors, data.row(r));
        total += (model.code_vectors.row(u) - data.row(r)).norm();
    }
    return total / static_cast<double>(data.rows());
}

double topographic_error(const SomModel& model, const Eigen::MatrixXd& data) {
    if (data.rows() == 0) throw EmptyDataError("topographic_error: empty data");
    if (data.cols() != model.dim)
        throw DimensionMismatchError("topographic_error: data dimension mismatch");
    if (model.topology.unit_count() < 2) return 0.0;

    long bad = 0;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        int first = 0, second = -1;
        double d_first = (model.code_vectors.row(0) - data.row(r)).squaredNorm();
        double d_second = std::numeric_limits<double>::infinity();
        for (Eigen::Index u = 1; u < model.code_vectors.rows(); ++u) {
            const double d = (model.code_vectors.row(u) - data.row(r)).squaredNorm();
            if (d < d_first) {
                second = first;
                d_second = d_first;
                first = static_cast<int>(u);
                d_first = d;
            } else if (d < d_second) {
                second = static_cast<int>(u);
                d_second = d;
            }
        }
        if (model.topology.lattice_distance(first, second) != 1) ++bad;
    }
    return static_cast<double>(bad) / static_cast<double>(data.rows());
}

namespace {

std::string kernel_name(Kernel k) { return k == Kernel::bubble ? "bubble" : "gaussian"; }

Kernel kernel_from(const std::string& name) {
    if (name == "bubble") return Kernel::bubble;
    if (name == "gaussian") return Kernel::gaussian;
    throw Error("unknown kernel '" + name + "'");
}

} // namespace

void save_som(const SomModel& model, const std::filesystem::path& json_path,
              const std::filesystem::path& codes_csv_path) {
    nlohmann::json j;
    j["topology"]["kind"] = model.topology.kind == Topology::Kind::grid ? "grid" : "string";
    j["topology"]["rows"] = model.topology.rows;
    j["topology"]["cols"] = model.topology.cols;
    j["dim"] = model.dim;
    j["seed"] = model.seed;
    j["schedule"]["iterations"] = model.schedule.iterations;
    j["schedule"]["rate0"] = model.schedule.rate0;
    j["schedule"]["rate1"] = model.schedule.rate1;
    j["schedule"]["radius0"] = model.schedule.radius0;
    j["schedule"]["radius1"] = model.schedule.radius1;
    j["schedule"]["kernel"] = kernel_name(model.schedule.kernel);
    j["codes_csv"] = codes_csv_path.filename().string();
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + json_path.string() + "'");
    out << j.dump(2) << '\n';
    write_matrix_csv(codes_csv_path, model.code_vectors);
}

SomModel load_som(const std::filesystem::path& json_path,
                  const std::filesystem::path& codes_csv_path) {
    std::ifstream in(json_path);
    if (!in) throw Error("cannot open '" + json_path.string() + "'");
    nlohmann::json j;
    in >> j;
    SomModel model;
    const std::string kind = j.at("topology").at("kind").get<std::string>();
    const int rows = j.at("topology").at("rows").get<int>();
    const int cols = j.at("topology").at("cols").get<int>();
    model.topology = kind == "grid" ? Topology::grid(rows, cols) : Topology::string(cols);
    model.dim = j.at("dim").get<int>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.schedule.iterations = j.at("schedule").at("iterations").get<long>();
    model.schedule.rate0 = j.at("schedule").at("rate0").get<double>();
    model.schedule.rate1 = j.at("schedule").at("rate1").get<double>();
    model.schedule.radius0 = j.at("schedule").at("radius0").get<double>();
    model.schedule.radius1 = j.at("schedule").at("radius1").get<double>();
    model.schedule.kernel = kernel_from(j.at("schedule").at("kernel").get<std::string>());
    model.code_vectors = read_matrix_csv(codes_csv_path);
    if (model.code_vectors.rows() != model.topology.unit_count() ||
        model.code_vectors.cols() != model.dim)
        throw Error("som model: code vector shape mismatch");
    return model;
}

} // namespace segtraj
