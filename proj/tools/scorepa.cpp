// scorepa: data generation, training, sampling, evaluation and the sampler
// benchmark. Exit codes: 0 ok, 2 config, 3 data, 4 numerical, 1 other.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scorepa/config.hpp"
#include "scorepa/error.hpp"
#include "scorepa/pipeline.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
    std::optional<std::string> sampler;
    std::optional<std::size_t> samples;
    std::optional<std::string> out;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "key = value config file");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--steps", f.steps, "sampling steps (N for pc, N + C_F for fpc)");
    cmd->add_option("--sampler", f.sampler, "pc | fpc | fpc-no-decay");
    cmd->add_option("--samples-per-instance", f.samples, "samples per instance (sample: 4, eval: 10)");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--set", f.sets, "extra key=value override (repeatable)");
}

scorepa::ExperimentConfig resolve(const Flags& f, const std::string& command) {
    scorepa::ExperimentConfig cfg = f.config.empty() ? scorepa::ExperimentConfig{} : scorepa::load_config(f.config);
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw scorepa::ConfigError("config", "--set expects key=value, got '" + kv + "'");
        scorepa::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (f.seed) cfg.seed = *f.seed;
    if (f.steps) cfg.steps = *f.steps;
    if (f.sampler) cfg.sampler = scorepa::parse_sampler(*f.sampler);
    if (f.samples) {
        if (command == "eval") cfg.eval_samples = *f.samples;
        else cfg.samples_per_instance = *f.samples;
    }
    if (f.out) cfg.out = *f.out;
    cfg.validate();
    return cfg;
}

int run(const std::string& command, const Flags& f) {
    try {
        const auto cfg = resolve(f, command);
        if (command == "gen-data") {
            scorepa::run_gen_data(cfg);
            std::printf("wrote %s\n", cfg.dataset.string().c_str());
        } else if (command == "train") {
            const auto r = scorepa::run_train(cfg);
            if (!r.epoch_loss.empty()) std::printf("final epoch loss %.6f\n", r.epoch_loss.back());
        } else if (command == "sample") {
            scorepa::run_sample(cfg);
            std::printf("wrote %s\n", (cfg.out / "samples.jsonl").string().c_str());
        } else if (command == "eval") {
            const auto r = scorepa::run_eval(cfg);
            std::cout << r.table(cfg.eval_source == "model" ? std::string(scorepa::sampler_name(cfg.sampler))
                                                            : cfg.eval_source);
        } else if (command == "bench") {
            scorepa::run_bench(cfg);
            std::printf("wrote %s\n", (cfg.out / "bench.csv").string().c_str());
        } else if (command == "export-ply") {
            scorepa::run_export_ply(cfg);
            std::printf("wrote PLY files to %s\n", cfg.out.string().c_str());
        }
        return 0;
    } catch (const scorepa::ConfigError& e) {
        std::fprintf(stderr, "error [%s]: %s\n", e.stage().c_str(), e.what());
        return 2;
    } catch (const scorepa::ParseError& e) {
        std::fprintf(stderr, "error [%s]: %s\n", e.stage().c_str(), e.what());
        return 3;
    } catch (const scorepa::InputError& e) {
        std::fprintf(stderr, "error [%s]: %s\n", e.stage().c_str(), e.what());
        return 3;
    } catch (const scorepa::NumericalError& e) {
        std::fprintf(stderr, "error [%s]: %s\n", e.stage().c_str(), e.what());
        return 4;
    } catch (const scorepa::Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", e.stage().c_str(), e.what());
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", command.c_str(), e.what());
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scorepa: score-based part assembly"};
    app.require_subcommand(1);
    app.set_version_flag("--version", SCOREPA_VERSION);
    Flags flags;
    const char* commands[][2] = {{"gen-data", "generate a synthetic dataset"},
                                 {"train", "train the score network"},
                                 {"sample", "sample pose sets for every instance"},
                                 {"eval", "minimum-matching evaluation"},
                                 {"bench", "step-count sweep over pc, fpc and fpc-no-decay"},
                                 {"export-ply", "render assemblies as PLY"}};
    for (auto& c : commands) add_common(app.add_subcommand(c[0], c[1]), flags);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    return run(app.get_subcommands().front()->get_name(), flags);
}
