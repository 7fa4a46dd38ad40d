#pragma once

#include "segtraj/error.hpp"
#include "segtraj/panel.hpp"
#include "segtraj/som.hpp"

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

namespace segtraj {

class TooFewClustersError : public Error {
  public:
    using Error::Error;
};

class KOutOfRangeError : public Error {
  public:
    using Error::Error;
};

class InconsistentAssignmentError : public Error {
  public:
    using Error::Error;
};

// One agglomeration step. a and b are cluster ids: leaves take 0..L-1
// (positions in leaf_ids), the cluster created by merge t takes L+t.
// height is the increase in total within-cluster weighted sum of squares.
struct Merge {
    int a = 0;
    int b = 0;
    double height = 0.0;
    long new_size = 0;  // total member weight of the merged cluster
};

struct Dendrogram {
    int unit_count = 0;              // original units, including empty ones
    std::vector<int> leaf_ids;       // unit indices with weight > 0, ascending
    std::vector<long> leaf_weights;  // aligned with leaf_ids
    std::vector<Merge> merges;       // leaf count - 1 entries

    int leaf_count() const { return static_cast<int>(leaf_ids.size()); }
};

struct NumericSummary {
    double mean = 0.0;
    double sd = 0.0;
    long n = 0;  // non-missing observations
};

// Per-segment description: relative modality frequencies for every
// categorical variable (spec order, active then supplementary) and
// mean/sd summaries for numeric supplementary variables.
struct SegmentProfile {
    long member_count = 0;
    std::vector<std::vector<double>> categorical;
    std::vector<NumericSummary> numeric;
};

struct Segmentation {
    std::vector<int> unit_to_segment;  // per unit; 0 = empty unit, unlabeled
    int k = 0;
    std::vector<SegmentProfile> profiles;  // k entries once profiled
};

// Ward minimum-variance agglomeration of weighted code vectors via the
// Lance-Williams recurrence. Units with zero weight are excluded. Ties in
// merge cost go to the lowest (a, b) id pair.
Dendrogram ward_cluster(const Eigen::MatrixXd& code_vectors, const std::vector<long>& weights);

// Undoes the last k-1 merges and labels the resulting clusters 1..k by
// decreasing total member weight (ties by lowest contained unit index).
Segmentation cut(const Dendrogram& dendrogram, int k);

// Fills per-segment profiles from panel records assigned to units.
// assignments[r] is the SOM unit of record r and must carry a segment label.
Segmentation profile_segments(Segmentation segmentation, const Panel& panel,
                              const std::vector<int>& assignments);

// Fraction of segments whose units form a single 4-connected lattice
// component.
double contiguity_score(const Segmentation& segmentation, const Topology& topology);

// Segment lookup with fallback: an unlabeled (empty) unit borrows the
// segment of the nearest labeled unit in code-vector space.
int segment_for_unit(const Segmentation& segmentation, const Eigen::MatrixXd& code_vectors,
                     int unit);

void save_dendrogram(const Dendrogram& dendrogram, const std::filesystem::path& json_path);
Dendrogram load_dendrogram(const std::filesystem::path& json_path);

void save_segmentation(const Segmentation& segmentation, const std::filesystem::path& json_path);
Segmentation load_segmentation(const std::filesystem::path& json_path);

// One CSV per variable (rows = segments, columns = modalities or
// mean/sd/n), written into dir as profile_<variable id>.csv.
void write_profiles(const Segmentation& segmentation, const VariableSpec& spec,
                    const std::filesystem::path& dir);

} // namespace segtraj
