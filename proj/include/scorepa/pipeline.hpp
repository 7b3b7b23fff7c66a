#pragma once

// The command implementations behind the CLI. Each writes its artifacts into
// cfg.out (datasets and checkpoints to their configured paths) and embeds the
// resolved config and the code version.

#include <string>
#include <vector>

#include <json.hpp>

#include "scorepa/config.hpp"
#include "scorepa/metrics.hpp"
#include "scorepa/trainer.hpp"

namespace scorepa {

/// {"code_version": ..., "config": cfg.to_json()}
nlohmann::json provenance(const ExperimentConfig& cfg);

void run_gen_data(const ExperimentConfig& cfg);
TrainResult run_train(const ExperimentConfig& cfg);
void run_sample(const ExperimentConfig& cfg);
MetricsReport run_eval(const ExperimentConfig& cfg);

struct BenchRow {
    SamplerKind sampler;
    std::size_t steps;
    double scd, pa, ca, qds, wqds;
    double mean_seconds;
    std::size_t field_evals;  // per sample
};
std::vector<BenchRow> run_bench(const ExperimentConfig& cfg);
void run_export_ply(const ExperimentConfig& cfg);

/// Bench "analytic" field for an instance: exact score of the GT pose
/// distribution spread over every relabelling of interchangeable parts,
/// each mode widened by s.
ScoreField interchangeable_gt_field(const AssemblyInstance& inst, double s, const DiffusionSchedule& schedule);
std::vector<PoseSet> interchangeable_gt_modes(const AssemblyInstance& inst);

/// Reads the instances of samples.jsonl grouped by instance id, in file order.
std::vector<std::pair<std::string, std::vector<PoseSet>>> load_samples(const std::filesystem::path& path);

ScoreModel load_model(const std::filesystem::path& checkpoint);

}  // namespace scorepa
