#pragma once

// Denoising score matching. For one instance with N parts and t ~ U(t_min, T):
//     q_t = q_0 + sqrt(lambda) z,   target = -z / sqrt(lambda)
//     loss = lambda |S(q_t, t) - target|^2 / N = |sqrt(lambda) S + z|^2 / N
// Minibatch loss is the mean over its instances; one Adam step per minibatch.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <json.hpp>

#include "scorepa/autodiff.hpp"
#include "scorepa/dataset.hpp"
#include "scorepa/diffusion.hpp"
#include "scorepa/rng.hpp"
#include "scorepa/score_net.hpp"

namespace scorepa {

struct TrainConfig {
    std::size_t epochs = 2000;
    std::size_t batch_size = 16;
    double lr = 1e-4;
    double t_min = 1e-3;
    /// (t, z) draws per instance and step, sharing one part encoding; the
    /// instance loss is their mean.
    std::size_t time_draws = 1;
    std::uint64_t seed = 0;
    DiffusionSchedule schedule;
    /// Checkpoint every K epochs (0: only at the end). Needs out_dir.
    std::size_t checkpoint_every = 0;
    std::filesystem::path out_dir;

    /// Throws ConfigError unless 0 < t_min < T, batch_size >= 1 and time_draws >= 1.
    void validate() const;
    nlohmann::json to_json() const;
};

/// Records S(q, t) for one instance's parts on the tape.
using ScoreFn = std::function<nn::Value(nn::Tape&, const PoseSet& q, double t)>;

/// One instance's loss as a 1 x 1 Value.
nn::Value dsm_loss(nn::Tape& tape, const ScoreFn& score, const DiffusionSchedule& schedule, const PoseSet& q0,
                   double t, NoiseSource& noise);

struct TrainResult {
    std::vector<double> epoch_loss;  // mean minibatch loss per epoch
    std::vector<double> step_loss;   // every minibatch
};

struct TrainHooks {
    std::function<void(std::size_t epoch, double mean_loss)> on_epoch;
    /// Extra JSON merged into checkpoint headers (e.g. the resolved config).
    nlohmann::json header_extra;
};

/// Throws InputError for an empty dataset and NumericalError (naming epoch
/// and batch) when a loss is not finite. With out_dir set, writes
/// loss.csv, epoch checkpoints and model.spa.
TrainResult train(ScoreModel& model, const std::vector<AssemblyInstance>& data, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// meta, when given, is written as leading "# " comment lines.
void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& epoch_loss,
                    const std::vector<std::string>& meta = {});

}  // namespace scorepa
