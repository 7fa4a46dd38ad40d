#pragma once

#include "segtraj/error.hpp"
#include "segtraj/markov.hpp"
#include "segtraj/som.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace segtraj {

class LabelOutOfRangeError : public Error {
  public:
    using Error::Error;
};

class HorizonMismatchError : public Error {
  public:
    using Error::Error;
};

class UntrainedModelError : public Error {
  public:
    using Error::Error;
};

// Relabeling of segments onto an ordinal scale, position 1 = best
// situation, k = worst. Identity by default: the segmentation already
// orders labels by decreasing size, which matches that reading.
struct ReorderMap {
    std::vector<int> to_scale;  // to_scale[raw - 1] = scale position, 1-based

    int k() const { return static_cast<int>(to_scale.size()); }
    int apply(int raw_label) const;

    static ReorderMap identity(int k);
    void validate() const;  // bijective on 1..k
};

// Trajectory as a real-valued vector of scale positions.
Eigen::RowVectorXd encode(const Trajectory& trajectory, const ReorderMap& reorder);

// Trajectories are classified per initial state. Groups smaller than
// min_group_size are kept for reporting but not trained.
struct TrajectoryGroup {
    int initial_state = 0;  // scale position 1..k
    long size = 0;
    bool trained = false;
    SomModel model;                // string topology, dim = horizon
    std::vector<long> unit_counts;  // members per unit, sums to size when trained
};

struct TrajectoryClassModel {
    int k = 0;
    int horizon = 0;
    int units = 0;
    int first_year = 0;
    std::uint64_t seed = 0;
    ReorderMap reorder;
    std::vector<TrajectoryGroup> groups;  // one per scale position, index s-1
    long total = 0;                       // trajectories across all groups

    static constexpr long min_group_size = 10;
    static constexpr int default_units = 10;
};

// Groups trajectories by initial scale position and trains one
// string-topology SOM per group on the encoded vectors. Encoded vectors are
// sorted before training, so the result depends only on the multiset of
// trajectories and the seed, not on input order.
TrajectoryClassModel classify_trajectories(const std::vector<Trajectory>& trajectories,
                                           const ReorderMap& reorder, std::uint64_t seed,
                                           int units = TrajectoryClassModel::default_units);

struct ClassReportEntry {
    int initial_state = 0;
    double share = 0.0;  // fraction of all trajectories starting here
    bool trained = false;
    Eigen::MatrixXd codes;           // units x horizon (year-by-year positions)
    std::vector<long> unit_counts;   // members per unit
    std::vector<double> unit_freqs;  // unit_counts / group size
};

struct ClassReport {
    int k = 0;
    int horizon = 0;
    int units = 0;
    int first_year = 0;
    std::vector<ClassReportEntry> entries;
};

// Per initial state: population share at the first year, the trained code
// vectors and per-unit membership frequencies. At least one group must be
// trained.
ClassReport class_report(const TrajectoryClassModel& model);

void save_trajectory_model(const TrajectoryClassModel& model,
                           const std::filesystem::path& json_path);
TrajectoryClassModel load_trajectory_model(const std::filesystem::path& json_path);

void save_class_report(const ClassReport& report, const std::filesystem::path& json_path);

// Small-multiples SVG: one panel per initial state, one polyline per unit,
// shares on the left, unit frequencies under each panel.
void write_class_report_svg(const ClassReport& report, const std::filesystem::path& svg_path);

} // namespace segtraj
