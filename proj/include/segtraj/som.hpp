#pragma once

#include "segtraj/error.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace segtraj {

class EmptyDataError : public Error {
  public:
    using Error::Error;
};

class DimensionMismatchError : public Error {
  public:
    using Error::Error;
};

// Unit lattice: rectangular grid with Chebyshev distance, or a
// one-dimensional string with absolute-difference distance.
struct Topology {
    enum class Kind { grid, string };

    Kind kind = Kind::string;
    int rows = 1;
    int cols = 1;  // string length lives here for Kind::string

    static Topology grid(int rows, int cols);
    static Topology string(int length);

    int unit_count() const { return rows * cols; }
    int lattice_distance(int u, int v) const;
    int diameter() const;  // max lattice distance between any two units

    bool operator==(const Topology&) const = default;
};

enum class Kernel { bubble, gaussian };

// Learning rate and neighborhood radius interpolate linearly from the
// initial to the final value over the run.
struct SomSchedule {
    long iterations = 0;
    double rate0 = 0.5;
    double rate1 = 0.01;
    double radius0 = 0.0;
    double radius1 = 0.0;
    Kernel kernel = Kernel::bubble;

    double rate_at(long t) const;    // t in [0, iterations)
    double radius_at(long t) const;
};

// Conventional defaults: 5 draws per observation, rate 0.5 -> 0.01,
// radius diameter/2 -> 0.
SomSchedule default_schedule(const Topology& topology, long n_rows);

struct SomModel {
    Topology topology;
    int dim = 0;
    Eigen::MatrixXd code_vectors;  // unit_count x dim
    SomSchedule schedule;
    std::uint64_t seed = 0;
};

// Code vectors initialized to a seeded uniform sample of data rows, without
// replacement when the data allows it. The schedule defaults to
// default_schedule(topology, n) and can be overridden before training.
SomModel som_init(const Topology& topology, const Eigen::MatrixXd& data, std::uint64_t seed);

// Best-matching unit: argmin of squared Euclidean distance, ties broken by
// the lowest unit index.
int bmu(const SomModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);

// Online Kohonen training: per step, draw a data row uniformly (seeded),
// move every unit within the current radius of the winner toward it by the
// current rate (bubble kernel; the gaussian option scales the rate by
// exp(-d^2 / 2 sigma^2) instead of cutting off).
SomModel som_train(SomModel model, const Eigen::MatrixXd& data);

std::vector<int> assign(const SomModel& model, const Eigen::MatrixXd& data);

// Mean Euclidean distance from each row to its BMU code vector.
double quantization_error(const SomModel& model, const Eigen::MatrixXd& data);

// Fraction of rows whose first and second BMUs are not lattice neighbors.
// A single-unit map reports 0 by convention.
double topographic_error(const SomModel& model, const Eigen::MatrixXd& data);

void save_som(const SomModel& model, const std::filesystem::path& json_path,
              const std::filesystem::path& codes_csv_path);
SomModel load_som(const std::filesystem::path& json_path,
                  const std::filesystem::path& codes_csv_path);

} // namespace segtraj
