#pragma once

// Experiment configuration: "key = value" lines, '#' starts a comment, blank
// lines ignored. Keys are listed in README.md; unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "scorepa/dataset.hpp"
#include "scorepa/metrics.hpp"
#include "scorepa/samplers.hpp"
#include "scorepa/score_net.hpp"
#include "scorepa/trainer.hpp"

namespace scorepa {

struct ExperimentConfig {
    std::uint64_t seed = 0;
    DiffusionSchedule schedule;

    // data
    Category category = Category::table;
    std::size_t instances = 256;
    std::uint64_t data_seed = 1;
    double jitter = 0.0;
    std::filesystem::path dataset = "dataset.jsonl";
    std::filesystem::path eval_dataset;  // empty: use dataset
    std::size_t eval_instances = 0;      // 0: all

    // model and training
    ScoreNetConfig model;
    std::uint64_t init_seed = 7;
    TrainConfig train;
    std::filesystem::path checkpoint = "model.spa";

    // sampling and evaluation
    SamplerKind sampler = SamplerKind::fpc;
    std::size_t steps = 200;  // reported steps: N for pc, N + C_F for fpc
    SamplerConfig sampling;
    std::size_t samples_per_instance = 4;
    std::size_t eval_samples = 10;
    EvalOptions eval;
    std::string eval_source = "model";  // model | gt-oracle | gt-oracle-permuted

    // bench
    std::vector<std::size_t> bench_steps = {100, 150, 200, 250, 300, 350, 400, 450, 500, 550};
    std::string bench_field = "analytic";  // analytic | model
    std::size_t bench_instances = 16;
    std::size_t bench_samples = 10;
    double bench_mode_width = 0.0;

    // export-ply
    std::size_t ply_instance = 0;
    std::filesystem::path samples;  // samples.jsonl to render instead of GT

    std::filesystem::path out = "out";

    /// The text this config was parsed from (empty for defaults).
    std::string source_text;

    /// Throws ConfigError describing the first invalid field.
    void validate() const;
    /// Sampler config with N derived from `steps`.
    SamplerConfig sampler_config() const;
    nlohmann::json to_json() const;
};

/// Applies "key = value" lines on top of `base`. Line numbers appear in errors.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Single assignment, e.g. from a command-line override.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace scorepa
