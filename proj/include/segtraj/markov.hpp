#pragma once

#include "segtraj/error.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace segtraj {

class NoTransitionsError : public Error {
  public:
    NoTransitionsError(const std::string& msg, int year) : Error(msg), year_(year) {}
    int year() const { return year_; }

  private:
    int year_;
};

class InsufficientDataError : public Error {
  public:
    using Error::Error;
};

class UndefinedRowError : public Error {
  public:
    UndefinedRowError(const std::string& msg, int year, int state)
        : Error(msg), year_(year), state_(state) {}
    int year() const { return year_; }
    int state() const { return state_; }

  private:
    int year_;
    int state_;
};

class EmptyInputError : public Error {
  public:
    using Error::Error;
};

class UnvisitedStateError : public Error {
  public:
    UnvisitedStateError(const std::string& msg, int state) : Error(msg), state_(state) {}
    int state() const { return state_; }

  private:
    int state_;
};

class NotUniqueError : public Error {
  public:
    using Error::Error;
};

class NonStochasticError : public Error {
  public:
    using Error::Error;
};

// One labeled observation: the segment an individual occupies in a year.
struct SegmentObservation {
    std::string individual_id;
    int year = 0;
    int segment = 0;  // 1..k
};

// Year-dependent transition probabilities p_ij^n for year pairs
// (n, n+1), n = first_year .. first_year + pair_count - 1.
struct TransitionTensor {
    int k = 0;
    int first_year = 0;
    std::vector<Eigen::MatrixXd> probs;   // one k x k matrix per year pair
    std::vector<Eigen::MatrixXd> counts;  // empty when not count-based

    int pair_count() const { return static_cast<int>(probs.size()); }
    int last_year() const { return first_year + pair_count(); }
    bool has_counts() const { return !counts.empty(); }

    // A row is defined when it was observed (or the tensor is synthetic).
    bool row_defined(int pair, int state) const;

    // Same transition matrix for every year pair in [first_year, last_year].
    static TransitionTensor homogeneous(const Eigen::MatrixXd& matrix, int first_year,
                                        int last_year);

    // Add-alpha smoothing of the counts; every row becomes defined.
    TransitionTensor smoothed(double alpha) const;

    void validate() const;
};

// Maximum-likelihood estimation of p_ij^n from consecutive-year pairs of
// the same individual. Rows without observations keep zero probabilities
// and are flagged undefined, not smoothed.
TransitionTensor estimate_transitions(const std::vector<SegmentObservation>& observations, int k,
                                      int first_year, int last_year);

struct HomogeneityResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
};

// Likelihood-ratio test of time-homogeneity: G = 2 sum counts * ln(P[n]/pooled),
// df = sum over rows i of (T_i - 1)(m_i - 1) with T_i = year pairs where row i
// is observed and m_i = columns with pooled support in row i.
HomogeneityResult homogeneity_test(const TransitionTensor& tensor);

struct PairTest {
    int year_a = 0;  // start years of the two adjacent year pairs
    int year_b = 0;
    HomogeneityResult result;
};

// Rupture diagnostics: the homogeneity test restricted to each adjacent
// pair of year-pair matrices.
std::vector<PairTest> adjacent_pair_tests(const TransitionTensor& tensor);

struct Trajectory {
    std::string individual_id;
    int start_year = 0;
    std::vector<int> states;  // segment labels 1..k, one per year
};

struct SimulateOptions {
    bool strict = false;  // error on undefined rows instead of staying put
};

struct SimulationResult {
    std::vector<Trajectory> trajectories;
    long fallback_steps = 0;  // undefined-row steps resolved by staying put
};

// Simulates n_paths trajectories across the tensor's full year span. Path p
// consumes the independent stream (seed, p), so results do not depend on
// evaluation order. Undefined rows keep the path in place unless strict.
SimulationResult simulate(const TransitionTensor& tensor, const std::vector<double>& initial,
                          long n_paths, std::uint64_t seed, SimulateOptions options = {});

struct MeanChain {
    int k = 0;
    Eigen::MatrixXd probs;        // k x k, row-stochastic
    Eigen::MatrixXd counts;       // pooled transition counts
    long total_transitions = 0;
};

// Pools transition counts over all consecutive years of all trajectories
// and row-normalizes. Every state must appear as a source at least once.
MeanChain mean_chain(const std::vector<Trajectory>& trajectories, int k);

struct StationaryDist {
    Eigen::VectorXd pi;
    std::string method;  // "linear_solve" or "cesaro"
};

// Solves pi P = pi, sum pi = 1. Reducible chains with several stationary
// distributions raise NotUnique; an ill-conditioned solve falls back to
// Cesaro-averaged power iteration at tolerance 1e-12.
StationaryDist limit_distribution(const MeanChain& chain);
StationaryDist limit_distribution(const Eigen::MatrixXd& probs);

// Divides each row by its sum (rejects rows summing to zero or negative
// entries); turns a percent matrix into a stochastic one.
Eigen::MatrixXd renormalize_rows(const Eigen::MatrixXd& matrix);

void save_tensor(const TransitionTensor& tensor, const std::filesystem::path& json_path);
TransitionTensor load_tensor(const std::filesystem::path& json_path);

void save_mean_chain(const MeanChain& chain, const std::filesystem::path& json_path);
MeanChain load_mean_chain(const std::filesystem::path& json_path);

void save_stationary(const StationaryDist& dist, const std::filesystem::path& json_path);
StationaryDist load_stationary(const std::filesystem::path& json_path);

// CSV with one row per trajectory: individual_id, start_year, then one
// column per year. All trajectories must share the same horizon.
void write_trajectories_csv(const std::vector<Trajectory>& trajectories,
                            const std::filesystem::path& path);
std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path);

} // namespace segtraj
