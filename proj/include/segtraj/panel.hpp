#pragma once

#include "segtraj/error.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace segtraj {

enum class VariableRole { active, supplementary };

// One survey variable. modality_count == 0 marks a numeric supplementary
// variable; categorical variables use 1-based modality indices.
struct Variable {
    std::string id;
    std::string name;
    VariableRole role = VariableRole::active;
    int modality_count = 0;

    bool is_numeric() const { return modality_count == 0; }
};

class InvalidSpecError : public Error {
  public:
    using Error::Error;
};

struct VariableSpec {
    std::vector<Variable> variables;

    int active_count() const;             // Q
    int total_active_modalities() const;  // J
    std::vector<int> active_indices() const;
    std::vector<int> supplementary_indices() const;

    // Throws InvalidSpecError unless J = sum of active modality counts,
    // J >= Q >= 1 and every active variable has at least 2 modalities.
    void validate() const;
};

// The survey layout used throughout: 22 active categorical variables with
// 99 modalities in total (the last modality of each is the "no answer"
// code), plus 28 supplementary variables (20 categorical, 8 numeric).
VariableSpec default_variable_spec();

// One (individual, year) observation. answers align with the spec's active
// variables in order; supplementary aligns with the supplementary variables
// (categorical values stored as integral doubles, NaN = missing).
struct PanelRecord {
    std::string individual_id;
    int year = 0;
    std::vector<int> answers;
    std::vector<double> supplementary;

    bool operator==(const PanelRecord& other) const;
};

struct Panel {
    VariableSpec spec;
    std::vector<PanelRecord> records;
    int first_year = 0;
    int last_year = -1;

    bool empty() const { return records.empty(); }

    // Checks per-record ranges, consecutive years per individual and
    // absence of duplicate (individual, year) pairs.
    void validate() const;
};

class MissingColumnError : public Error {
  public:
    using Error::Error;
};

class ModalityOutOfRangeError : public Error {
  public:
    ModalityOutOfRangeError(const std::string& msg, std::size_t row) : Error(msg), row_(row) {}
    std::size_t row() const { return row_; }

  private:
    std::size_t row_;
};

class DuplicateObservationError : public Error {
  public:
    DuplicateObservationError(const std::string& msg, std::size_t row) : Error(msg), row_(row) {}
    std::size_t row() const { return row_; }

  private:
    std::size_t row_;
};

class GapInYearsError : public Error {
  public:
    GapInYearsError(const std::string& msg, std::string individual)
        : Error(msg), individual_(std::move(individual)) {}
    const std::string& individual() const { return individual_; }

  private:
    std::string individual_;
};

// Long-format CSV: header "id,year,<variable ids in spec order>". Rows in
// file order become the panel's record order. Row numbers in errors count
// data rows from 1.
Panel ingest_csv(const std::filesystem::path& path, const VariableSpec& spec);
void write_csv(const Panel& panel, const std::filesystem::path& path);

// Keeps only individuals with at least min_consecutive observations.
Panel filter_panel(const Panel& panel, int min_consecutive);

// Latent generating process for synthetic rotating panels: k segments, a
// (possibly year-dependent) segment transition chain and segment-conditional
// modality distributions for categorical variables.
struct LatentDynamics {
    int k = 0;
    std::vector<double> initial;                    // k entries, sums to 1
    std::vector<Eigen::MatrixXd> transitions;       // one k x k matrix per year
                                                    // pair, or a single matrix
                                                    // applied homogeneously
    // modality_dists[s][v] = distribution over the modalities of active
    // variable v conditional on segment s (0-based s and v).
    std::vector<std::vector<std::vector<double>>> modality_dists;
    // Optional: same layout for categorical supplementary variables.
    std::vector<std::vector<std::vector<double>>> supplementary_dists;

    void validate(const VariableSpec& spec) const;

    // Segment-conditional distributions that concentrate peak_mass on one
    // content modality per (segment, variable), cycling the peak across
    // variables so any two segments disagree on most variables. The
    // remaining mass is spread evenly over the other modalities, so every
    // modality (including the trailing "no answer" one) stays reachable.
    static LatentDynamics well_separated(const VariableSpec& spec, int k, double peak_mass,
                                         Eigen::MatrixXd transition,
                                         std::vector<double> initial);
};

struct SyntheticPanel {
    Panel panel;
    std::vector<int> latent_segments;  // per record, 1-based
};

// Each individual gets a uniformly placed 3-year window in
// [first_year, last_year], a latent segment path drawn from the latent
// chain and answers drawn from the segment-conditional distributions.
// Deterministic given the seed.
SyntheticPanel generate_synthetic_panel(std::uint64_t seed, int n_individuals, int first_year,
                                        int last_year, const VariableSpec& spec,
                                        const LatentDynamics& latent);

} // namespace segtraj
