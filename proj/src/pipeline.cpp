#include "segtraj/pipeline.hpp"

#include "segtraj/csv.hpp"
#include "segtraj/markov.hpp"
#include "segtraj/mca.hpp"
#include "segtraj/panel.hpp"
#include "segtraj/som.hpp"
#include "segtraj/trajectory.hpp"
#include "segtraj/ward.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

namespace segtraj {

namespace {

const std::map<std::string, Stage> kStageNames = {
    {"generate", Stage::generate},
    {"ingest", Stage::ingest},
    {"mca", Stage::mca},
    {"som-train", Stage::som_train},
    {"segment", Stage::segment},
    {"estimate", Stage::estimate},
    {"test-homogeneity", Stage::test_homogeneity},
    {"simulate", Stage::simulate},
    {"mean-chain", Stage::mean_chain},
    {"limit", Stage::limit},
    {"classify", Stage::classify},
    {"report", Stage::report},
};

} // namespace

std::string stage_name(Stage stage) {
    for (const auto& [name, s] : kStageNames)
        if (s == stage) return name;
    return "?";
}

std::optional<Stage> stage_from_name(const std::string& name) {
    const auto it = kStageNames.find(name);
    if (it == kStageNames.end()) return std::nullopt;
    return it->second;
}

PipelineConfig PipelineConfig::from_toml(const toml::Table& table) {
    static const std::set<std::string> known = {
        "run.out_dir",       "run.seed",        "run.strict",       "data.input",
        "data.individuals",  "data.first_year", "data.last_year",   "latent.k",
        "latent.peak_mass",  "latent.diagonal", "mca.axes",         "som.rows",
        "som.cols",          "som.iterations",  "segment.k",        "simulate.paths",
        "classify.units",
    };
    for (const auto& [key, value] : table) {
        (void)value;
        if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }

    PipelineConfig c;
    c.out_dir = toml::get_string(table, "run.out_dir", c.out_dir.string());
    c.seed = static_cast<std::uint64_t>(toml::get_int(table, "run.seed",
                                                      static_cast<long long>(c.seed)));
    c.strict = toml::get_bool(table, "run.strict", c.strict);
    c.input_csv = toml::get_string(table, "data.input", "");
    c.individuals = toml::get_int(table, "data.individuals", c.individuals);
    c.first_year = static_cast<int>(toml::get_int(table, "data.first_year", c.first_year));
    c.last_year = static_cast<int>(toml::get_int(table, "data.last_year", c.last_year));
    c.latent_k = static_cast<int>(toml::get_int(table, "latent.k", c.latent_k));
    c.peak_mass = toml::get_real(table, "latent.peak_mass", c.peak_mass);
    c.diagonal = toml::get_real(table, "latent.diagonal", c.diagonal);
    c.mca_axes = static_cast<int>(toml::get_int(table, "mca.axes", c.mca_axes));
    c.som_rows = static_cast<int>(toml::get_int(table, "som.rows", c.som_rows));
    c.som_cols = static_cast<int>(toml::get_int(table, "som.cols", c.som_cols));
    c.som_iterations = toml::get_int(table, "som.iterations", c.som_iterations);
    c.k = static_cast<int>(toml::get_int(table, "segment.k", c.k));
    c.n_paths = toml::get_int(table, "simulate.paths", c.n_paths);
    c.classify_units = static_cast<int>(toml::get_int(table, "classify.units", c.classify_units));
    c.validate();
    return c;
}

void PipelineConfig::validate() const {
    if (out_dir.empty()) throw ConfigError("run.out_dir must not be empty");
    if (uses_generator()) {
        if (individuals < 1) throw ConfigError("data.individuals must be positive");
        if (last_year < first_year + 2)
            throw ConfigError("generator needs a span of at least 3 years");
        if (latent_k < 2) throw ConfigError("latent.k must be at least 2");
        if (peak_mass <= 0.0 || peak_mass >= 1.0)
            throw ConfigError("latent.peak_mass must lie in (0, 1)");
        if (diagonal < 0.0 || diagonal >= 1.0)
            throw ConfigError("latent.diagonal must lie in [0, 1)");
    }
    if (mca_axes < 0) throw ConfigError("mca.axes must be >= 0");
    if (som_rows < 1 || som_cols < 1) throw ConfigError("som grid must be at least 1x1");
    if (som_iterations < 0) throw ConfigError("som.iterations must be >= 0");
    if (k < 2) throw ConfigError("segment.k must be at least 2");
    if (n_paths < 1) throw ConfigError("simulate.paths must be positive");
    if (classify_units < 1) throw ConfigError("classify.units must be positive");
}

std::string PipelineConfig::canonical() const {
    std::ostringstream out;
    out << "classify.units=" << classify_units << '\n'
        << "data.first_year=" << first_year << '\n'
        << "data.individuals=" << individuals << '\n'
        << "data.input=" << input_csv.string() << '\n'
        << "data.last_year=" << last_year << '\n'
        << "latent.diagonal=" << format_double(diagonal) << '\n'
        << "latent.k=" << latent_k << '\n'
        << "latent.peak_mass=" << format_double(peak_mass) << '\n'
        << "mca.axes=" << mca_axes << '\n'
        << "run.out_dir=" << out_dir.string() << '\n'
        << "run.seed=" << seed << '\n'
        << "run.strict=" << (strict ? "true" : "false") << '\n'
        << "segment.k=" << k << '\n'
        << "simulate.paths=" << n_paths << '\n'
        << "som.cols=" << som_cols << '\n'
        << "som.iterations=" << som_iterations << '\n'
        << "som.rows=" << som_rows << '\n';
    return out.str();
}

std::uint64_t fnv1a(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for hashing");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();
    return fnv1a(bytes.data(), bytes.size());
}

namespace {

std::string hex64(std::uint64_t value) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

// ---- artifact bookkeeping ----

struct Artifacts {
    static constexpr const char* panel = "panel.csv";
    static constexpr const char* latent = "latent.csv";
    static constexpr const char* mca_json = "mca.json";
    static constexpr const char* mca_coords = "mca_coords.csv";
    static constexpr const char* som_json = "som.json";
    static constexpr const char* som_codes = "som_codes.csv";
    static constexpr const char* som_quality = "som_quality.json";
    static constexpr const char* dendrogram = "dendrogram.json";
    static constexpr const char* segmentation = "segmentation.json";
    static constexpr const char* assignments = "assignments.csv";
    static constexpr const char* segments_summary = "segments.json";
    static constexpr const char* tensor = "tensor.json";
    static constexpr const char* homogeneity = "homogeneity.json";
    static constexpr const char* trajectories = "trajectories.csv";
    static constexpr const char* simulate_meta = "simulate.json";
    static constexpr const char* chain = "mean_chain.json";
    static constexpr const char* limit = "limit.json";
    static constexpr const char* model = "trajectory_model.json";
    static constexpr const char* report_json = "report.json";
    static constexpr const char* report_svg = "report.svg";
};

void require_artifact(const std::filesystem::path& path, const std::string& producer) {
    if (!std::filesystem::exists(path)) throw MissingArtifactError(producer);
}

std::string panel_producer(const PipelineConfig& config) {
    return config.uses_generator() ? "generate" : "ingest";
}

void record_stage(const PipelineConfig& config, const std::string& stage,
                  const std::vector<std::string>& files, double seconds) {
    const std::filesystem::path manifest_path = config.out_dir / "manifest.json";
    nlohmann::json manifest;
    if (std::filesystem::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        if (in) {
            try {
                in >> manifest;
            } catch (const nlohmann::json::exception&) {
                manifest = nlohmann::json::object();
            }
        }
    }
    const std::string canon = config.canonical();
    manifest["config_hash"] = hex64(fnv1a(canon.data(), canon.size()));
    manifest["seed"] = config.seed;
    nlohmann::json entry;
    for (const std::string& file : files)
        entry["artifacts"][file] = hex64(hash_file(config.out_dir / file));
    entry["seconds"] = seconds;
    manifest["stages"][stage] = std::move(entry);

    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + manifest_path.string() + "'");
    out << manifest.dump(2) << '\n';
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

// ---- stage bodies; each returns the files it wrote (out_dir-relative) ----

std::vector<std::string> stage_generate(const PipelineConfig& config) {
    if (!config.uses_generator())
        throw ConfigError("stage 'generate' needs a generator config (no data.input)");
    const VariableSpec spec = default_variable_spec();
    Eigen::MatrixXd transition =
        Eigen::MatrixXd::Constant(config.latent_k, config.latent_k,
                                  (1.0 - config.diagonal) / (config.latent_k - 1));
    transition.diagonal().setConstant(config.diagonal);
    const std::vector<double> initial(static_cast<std::size_t>(config.latent_k),
                                      1.0 / config.latent_k);
    const LatentDynamics latent =
        LatentDynamics::well_separated(spec, config.latent_k, config.peak_mass, transition,
                                       initial);
    const SyntheticPanel synthetic = generate_synthetic_panel(
        config.seed, static_cast<int>(config.individuals), config.first_year, config.last_year,
        spec, latent);

    write_csv(synthetic.panel, config.out_dir / Artifacts::panel);
    CsvTable latent_table;
    latent_table.header = {"individual_id", "year", "segment"};
    for (std::size_t r = 0; r < synthetic.panel.records.size(); ++r) {
        const PanelRecord& rec = synthetic.panel.records[r];
        latent_table.rows.push_back({rec.individual_id, std::to_string(rec.year),
                                     std::to_string(synthetic.latent_segments[r])});
    }
    write_csv(config.out_dir / Artifacts::latent, latent_table);
    return {Artifacts::panel, Artifacts::latent};
}

std::vector<std::string> stage_ingest(const PipelineConfig& config) {
    if (config.uses_generator())
        throw ConfigError("stage 'ingest' needs data.input in the config");
    if (!std::filesystem::exists(config.input_csv))
        throw ConfigError("data.input '" + config.input_csv.string() + "' does not exist");
    const Panel panel = ingest_csv(config.input_csv, default_variable_spec());
    write_csv(panel, config.out_dir / Artifacts::panel);
    return {Artifacts::panel};
}

std::vector<std::string> stage_mca(const PipelineConfig& config) {
    require_artifact(config.out_dir / Artifacts::panel, panel_producer(config));
    const Panel panel = ingest_csv(config.out_dir / Artifacts::panel, default_variable_spec());
    const IndicatorMatrix indicator = build_indicator(panel);
    const FactorScores scores =
        mca_fit(indicator, config.mca_axes > 0 ? std::optional<int>(config.mca_axes)
                                               : std::nullopt);
    save_factor_scores(scores, config.out_dir / Artifacts::mca_json,
                       config.out_dir / Artifacts::mca_coords);
    return {Artifacts::mca_json, Artifacts::mca_coords};
}

std::vector<std::string> stage_som(const PipelineConfig& config) {
    require_artifact(config.out_dir / Artifacts::mca_json, "mca");
    require_artifact(config.out_dir / Artifacts::mca_coords, "mca");
    const FactorScores scores = load_factor_scores(config.out_dir / Artifacts::mca_json,
                                                   config.out_dir / Artifacts::mca_coords);
    const Eigen::MatrixXd& data = scores.coordinates;
    SomModel model = som_init(Topology::grid(config.som_rows, config.som_cols), data,
                              config.seed);
    if (config.som_iterations > 0) model.schedule.iterations = config.som_iterations;
    model = som_train(std::move(model), data);
    save_som(model, config.out_dir / Artifacts::som_json, config.out_dir / Artifacts::som_codes);

    nlohmann::json quality;
    quality["quantization_error"] = quantization_error(model, data);
    quality["topographic_error"] = topographic_error(model, data);
    dump_json(quality, config.out_dir / Artifacts::som_quality);
    return {Artifacts::som_json, Artifacts::som_codes, Artifacts::som_quality};
}

std::vector<std::string> stage_segment(const PipelineConfig& config) {
    require_artifact(config.out_dir / Artifacts::som_json, "som-train");
    require_artifact(config.out_dir / Artifacts::som_codes, "som-train");
    require_artifact(config.out_dir / Artifacts::mca_coords, "mca");
    require_artifact(config.out_dir / Artifacts::panel, panel_producer(config));

    const SomModel model =
        load_som(config.out_dir / Artifacts::som_json, config.out_dir / Artifacts::som_codes);
    const Panel panel = ingest_csv(config.out_dir / Artifacts::panel, default_variable_spec());
    const Eigen::MatrixXd coords = read_matrix_csv(config.out_dir / Artifacts::mca_coords);
    if (coords.rows() != static_cast<Eigen::Index>(panel.records.size()))
        throw Error("segment: coordinate row count != panel record count");

    const std::vector<int> units = assign(model, coords);
    std::vector<long> weights(static_cast<std::size_t>(model.topology.unit_count()), 0);
    for (int u : units) ++weights[static_cast<std::size_t>(u)];

    const Dendrogram dendrogram = ward_cluster(model.code_vectors, weights);
    Segmentation segmentation = cut(dendrogram, config.k);
    segmentation = profile_segments(std::move(segmentation), panel, units);

    save_dendrogram(dendrogram, config.out_dir / Artifacts::dendrogram);
    save_segmentation(segmentation, config.out_dir / Artifacts::segmentation);

    CsvTable assignments;
    assignments.header = {"individual_id", "year", "unit", "segment"};
    std::vector<long> segment_sizes(static_cast<std::size_t>(config.k), 0);
    for (std::size_t r = 0; r < panel.records.size(); ++r) {
        const int unit = units[r];
        const int segment = segmentation.unit_to_segment[static_cast<std::size_t>(unit)];
        ++segment_sizes[static_cast<std::size_t>(segment - 1)];
        assignments.rows.push_back({panel.records[r].individual_id,
                                    std::to_string(panel.records[r].year), std::to_string(unit),
                                    std::to_string(segment)});
    }
    write_csv(config.out_dir / Artifacts::assignments, assignments);

    nlohmann::json summary;
    summary["k"] = config.k;
    summary["segment_sizes"] = segment_sizes;
    summary["contiguity"] = contiguity_score(segmentation, model.topology);
    int empty_units = 0;
    for (long w : weights)
        if (w == 0) ++empty_units;
    summary["empty_units"] = empty_units;
    dump_json(summary, config.out_dir / Artifacts::segments_summary);

    std::vector<std::string> files = {Artifacts::dendrogram, Artifacts::segmentation,
                                      Artifacts::assignments, Artifacts::segments_summary};
    write_profiles(segmentation, panel.spec, config.out_dir / "profiles");
    for (const Variable& var : panel.spec.variables)
        files.push_back("profiles/profile_" + var.id + ".csv");
    return files;
}

std::vector<SegmentObservation> load_observations(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    std::vector<SegmentObservation> obs;
    obs.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        if (row.size() != 4) throw Error("assignments: ragged row");
        obs.push_back({row[0], static_cast<int>(parse_long(row[1], "year")),
                       static_cast<int>(parse_long(row[3], "segment"))});
    }
    return obs;
}

std::vector<std::string> stage_estimate(const PipelineConfig& config) {
    require_artifact(config.out_dir / Artifacts::assignments, "segment");
    const std::vector<SegmentObservation> obs =
        load_observations(config.out_dir / Artifacts::assignments);
    if (obs.empty()) throw Error("estimate: no labeled observations");
    int lo = obs.front().year, hi = obs.front().year;
    for (const SegmentObservation& o : obs) {
        lo = std::min(lo, o.year);
        hi = std::max(hi, o.year);
    }
    const TransitionTensor tensor = estimate_transitions(obs, config.k, lo, hi);
    save_tensor(tensor, config.out_dir / Artifacts::tensor);
    return {Artifacts::tensor};
}

std::vector<std::string> stage_test_homogeneity(const PipelineConfig& config) {
    require_artifact(config.out_dir / Artifacts::tensor, "estimate");
    const TransitionTensor tensor = load_tensor(config.out_dir / Artifacts::tensor);
    const HomogeneityResult global = homogeneity_test(tensor);

    nlohmann::json j;
    j["statistic"] = global.statistic;
    j["df"] = global.df;
    j["p_value"] = global.p_value;
    auto& pairs = j["adjacent_pairs"] = nlohmann::json::array();
    for (const PairTest& pt : adjacent_pair_tests(tensor))
        pairs.push_back({{"year_a", pt.year_a},
                         {"year_b", pt.year_b},
                         {"statistic", pt.result.statistic},
                         {"df", pt.result.df},
                         {"p_value", pt.result.p_value}});
    dump_json(j, config.out_dir / Artifacts::homogeneity);
    return {Artifacts::homogeneity};
}

std::vector<std::string> stage_simulate(const PipelineConfig& config) {
    require_artifact(config.out_dir / Artifacts::tensor, "estimate");
    require_artifact(config.out_dir / Artifacts::assignments, "segment");
    const TransitionTensor tensor = load_tensor(config.out_dir / Artifacts::tensor);

    const std::vector<SegmentObservation> obs =
        load_observations(config.out_dir / Artifacts::assignments);
    std::vector<double> initial(static_cast<std::size_t>(tensor.k), 0.0);
    long at_first = 0;
    for (const SegmentObservation& o : obs) {
        if (o.year != tensor.first_year) continue;
        ++at_first;
        initial[static_cast<std::size_t>(o.segment - 1)] += 1.0;
    }
    if (at_first == 0) throw Error("simulate: no observations in the first year");
    for (double& p : initial) p /= static_cast<double>(at_first);

    const SimulationResult result =
        simulate(tensor, initial, config.n_paths, config.seed, {config.strict});
    write_trajectories_csv(result.trajectories, config.out_dir / Artifacts::trajectories);

    nlohmann::json meta;
    meta["n_paths"] = config.n_paths;
    meta["fallback_steps"] = result.fallback_steps;
    meta["initial"] = initial;
    dump_json(meta, config.out_dir / Artifacts::simulate_meta);
    return {Artifacts::trajectories, Artifacts::simulate_meta};
}

std::vector<std::string> stage_mean_chain(const PipelineConfig& config) {
    require_artifact(config.out_dir / Artifacts::trajectories, "simulate");
    const std::vector<Trajectory> trajectories =
        read_trajectories_csv(config.out_dir / Artifacts::trajectories);
    const MeanChain chain = mean_chain(trajectories, config.k);
    save_mean_chain(chain, config.out_dir / Artifacts::chain);
    return {Artifacts::chain};
}

std::vector<std::string> stage_limit(const PipelineConfig& config) {
    require_artifact(config.out_dir / Artifacts::chain, "mean-chain");
    const MeanChain chain = load_mean_chain(config.out_dir / Artifacts::chain);
    const StationaryDist dist = limit_distribution(chain);
    save_stationary(dist, config.out_dir / Artifacts::limit);
    return {Artifacts::limit};
}

std::vector<std::string> stage_classify(const PipelineConfig& config) {
    require_artifact(config.out_dir / Artifacts::trajectories, "simulate");
    const std::vector<Trajectory> trajectories =
        read_trajectories_csv(config.out_dir / Artifacts::trajectories);
    const TrajectoryClassModel model = classify_trajectories(
        trajectories, ReorderMap::identity(config.k), config.seed, config.classify_units);
    save_trajectory_model(model, config.out_dir / Artifacts::model);
    return {Artifacts::model};
}

std::vector<std::string> stage_report(const PipelineConfig& config) {
    require_artifact(config.out_dir / Artifacts::model, "classify");
    const TrajectoryClassModel model = load_trajectory_model(config.out_dir / Artifacts::model);
    const ClassReport report = class_report(model);
    save_class_report(report, config.out_dir / Artifacts::report_json);
    write_class_report_svg(report, config.out_dir / Artifacts::report_svg);

    // Folds the limit distribution into the JSON report when available.
    if (std::filesystem::exists(config.out_dir / Artifacts::limit)) {
        nlohmann::json j = slurp_json(config.out_dir / Artifacts::report_json);
        j["limit"] = slurp_json(config.out_dir / Artifacts::limit);
        dump_json(j, config.out_dir / Artifacts::report_json);
    }
    return {Artifacts::report_json, Artifacts::report_svg};
}

} // namespace

void run_stage(Stage stage, const PipelineConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);

    const auto start = std::chrono::steady_clock::now();
    std::vector<std::string> files;
    switch (stage) {
        case Stage::generate: files = stage_generate(config); break;
        case Stage::ingest: files = stage_ingest(config); break;
        case Stage::mca: files = stage_mca(config); break;
        case Stage::som_train: files = stage_som(config); break;
        case Stage::segment: files = stage_segment(config); break;
        case Stage::estimate: files = stage_estimate(config); break;
        case Stage::test_homogeneity: files = stage_test_homogeneity(config); break;
        case Stage::simulate: files = stage_simulate(config); break;
        case Stage::mean_chain: files = stage_mean_chain(config); break;
        case Stage::limit: files = stage_limit(config); break;
        case Stage::classify: files = stage_classify(config); break;
        case Stage::report: files = stage_report(config); break;
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    record_stage(config, stage_name(stage), files, elapsed.count());
}

void run_pipeline(const PipelineConfig& config) {
    std::vector<Stage> stages{config.uses_generator() ? Stage::generate : Stage::ingest,
                              Stage::mca,
                              Stage::som_train,
                              Stage::segment,
                              Stage::estimate,
                              Stage::test_homogeneity,
                              Stage::simulate,
                              Stage::mean_chain,
                              Stage::limit,
                              Stage::classify,
                              Stage::report};
    for (Stage stage : stages) run_stage(stage, config);
}

} // namespace segtraj
