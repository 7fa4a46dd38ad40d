#pragma once

#include "segtraj/error.hpp"
#include "segtraj/toml.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace segtraj {

enum class Stage {
    generate,
    ingest,
    mca,
    som_train,
    segment,
    estimate,
    test_homogeneity,
    simulate,
    mean_chain,
    limit,
    classify,
    report,
};

std::string stage_name(Stage stage);
std::optional<Stage> stage_from_name(const std::string& name);

struct PipelineConfig {
    std::filesystem::path out_dir = "runs/out";
    std::uint64_t seed = 1;
    bool strict = false;

    // Data source: read input_csv when set, otherwise run the generator.
    std::filesystem::path input_csv;
    long individuals = 3000;
    int first_year = 1990;
    int last_year = 1997;

    // Latent generating process for synthetic data.
    int latent_k = 7;
    double peak_mass = 0.85;
    double diagonal = 0.7;

    int mca_axes = 0;  // 0 = automatic eigenvalue rule

    int som_rows = 8;
    int som_cols = 8;
    long som_iterations = 0;  // 0 = five draws per observation

    int k = 7;  // segment count

    long n_paths = 20000;

    int classify_units = 10;

    bool uses_generator() const { return input_csv.empty(); }

    static PipelineConfig from_toml(const toml::Table& table);
    void validate() const;

    // Deterministic key=value rendering, used for the manifest config hash.
    std::string canonical() const;
};

std::uint64_t fnv1a(const void* data, std::size_t size);
std::uint64_t hash_file(const std::filesystem::path& path);

// Runs one stage against the artifacts in config.out_dir and records the
// produced files in manifest.json. Missing prerequisite artifacts raise
// MissingArtifactError naming the stage that should have produced them.
void run_stage(Stage stage, const PipelineConfig& config);

// All stages in order, starting from generate or ingest per the config.
void run_pipeline(const PipelineConfig& config);

} // namespace segtraj
