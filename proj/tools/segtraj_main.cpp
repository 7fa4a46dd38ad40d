#include "segtraj/csv.hpp"
#include "segtraj/markov.hpp"
#include "segtraj/pipeline.hpp"
#include "segtraj/toml.hpp"

#include <CLI11.hpp>
#include <iostream>

namespace {

void print_stationary(const segtraj::StationaryDist& dist) {
    std::cout << "method " << dist.method << '\n';
    for (int i = 0; i < dist.pi.size(); ++i)
        std::cout << i + 1 << ' ' << segtraj::format_double(dist.pi(i)) << '\n';
}

void print_homogeneity(const std::filesystem::path& tensor_path) {
    const segtraj::TransitionTensor tensor = segtraj::load_tensor(tensor_path);
    const segtraj::HomogeneityResult r = segtraj::homogeneity_test(tensor);
    std::cout << "G " << segtraj::format_double(r.statistic) << "\ndf " << r.df << "\np "
              << segtraj::format_double(r.p_value) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Categorical panel segmentation and trajectory pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    std::string matrix_path;
    long long seed = -1;
    bool strict = false;
    app.add_option("--config", config_path, "TOML configuration file");
    app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--out-dir", out_dir, "override the artifact directory");
    app.add_flag("--strict", strict, "fail on undefined transition rows");

    const std::vector<std::pair<std::string, std::string>> stages = {
        {"generate", "synthesize a rotating panel from the latent config"},
        {"ingest", "read and validate the input panel CSV"},
        {"mca", "factor the panel into numeric coordinates"},
        {"som-train", "train the grid map on the coordinates"},
        {"segment", "cluster map units into labeled segments"},
        {"estimate", "estimate year-by-year transition matrices"},
        {"test-homogeneity", "likelihood-ratio test against a homogeneous chain"},
        {"simulate", "simulate trajectories over the full span"},
        {"mean-chain", "pool simulated transitions into one matrix"},
        {"limit", "stationary distribution of the mean chain"},
        {"classify", "per-initial-state trajectory classification"},
        {"report", "render the classification report (JSON + SVG)"},
    };
    for (const auto& [name, description] : stages) app.add_subcommand(name, description);
    app.get_subcommand("limit")->add_option(
        "--matrix", matrix_path, "stand-alone mode: transition matrix CSV (rows renormalized)");
    app.add_subcommand("pipeline", "run every stage in order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const std::string command = app.get_subcommands().front()->get_name();

        // Stand-alone limit needs no config or artifacts.
        if (command == "limit" && !matrix_path.empty()) {
            const Eigen::MatrixXd matrix =
                segtraj::renormalize_rows(segtraj::read_matrix_csv(matrix_path));
            print_stationary(segtraj::limit_distribution(matrix));
            return 0;
        }

        segtraj::PipelineConfig config;
        if (!config_path.empty())
            config = segtraj::PipelineConfig::from_toml(segtraj::toml::parse_file(config_path));
        if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
        if (!out_dir.empty()) config.out_dir = out_dir;
        if (strict) config.strict = true;
        config.validate();

        if (command == "pipeline") {
            segtraj::run_pipeline(config);
            std::cout << "pipeline complete: " << config.out_dir.string() << '\n';
            return 0;
        }

        const auto stage = segtraj::stage_from_name(command);
        if (!stage) throw segtraj::ConfigError("unknown stage '" + command + "'");
        segtraj::run_stage(*stage, config);

        if (*stage == segtraj::Stage::limit)
            print_stationary(segtraj::load_stationary(config.out_dir / "limit.json"));
        else if (*stage == segtraj::Stage::test_homogeneity)
            print_homogeneity(config.out_dir / "tensor.json");
        return 0;
    } catch (const segtraj::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const segtraj::MissingArtifactError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
