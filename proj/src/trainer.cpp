#include "scorepa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "scorepa/checkpoint.hpp"
#include "scorepa/error.hpp"

namespace scorepa {

void TrainConfig::validate() const {
    schedule.validate();
    if (batch_size == 0) throw ConfigError("train", "batch_size must be >= 1");
    if (time_draws == 0) throw ConfigError("train", "time_draws must be >= 1");
    if (!(t_min > 0.0 && t_min < schedule.T)) throw ConfigError("train", "t_min must lie in (0, T)");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train", "lr must be positive");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs}, {"batch_size", batch_size}, {"lr", lr},
            {"t_min", t_min},    {"time_draws", time_draws}, {"seed", seed},             {"checkpoint_every", checkpoint_every}};
}

nn::Value dsm_loss(nn::Tape& tape, const ScoreFn& score, const DiffusionSchedule& schedule, const PoseSet& q0,
                   double t, NoiseSource& noise) {
    if (q0.rows() == 0) throw InputError("dsm_loss", "empty pose set");
    Perturbed p = perturb(schedule, q0, t, noise);
    nn::Value s = score(tape, p.qt, t);
    if (!s.data().same_shape(q0))
        throw ContractError("dsm_loss", "score shape does not match the pose set");
    nn::Value r = nn::add_constant(nn::scale(s, schedule.stddev(t)), p.z);
    return nn::scale(nn::square_norm(r), 1.0 / static_cast<double>(q0.rows()));
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& epoch_loss,
                    const std::vector<std::string>& meta) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("train", "cannot write " + path.string());
    for (const auto& m : meta) out << "# " << m << '\n';
    out << "epoch,mean_loss\n";
    char buf[64];
    for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%.17g", epoch_loss[e]);
        out << e + 1 << ',' << buf << '\n';
    }
}

namespace {

void write_checkpoint(const ScoreModel& model, const TrainConfig& cfg, const TrainHooks& hooks, std::size_t epoch,
                      const std::filesystem::path& path) {
    nlohmann::json h = model.header();
    h["train"] = cfg.to_json();
    h["epoch"] = epoch;
    if (!hooks.header_extra.is_null()) h["extra"] = hooks.header_extra;
    save_checkpoint(path, snapshot(model.params(), h.dump()));
}

}  // namespace

TrainResult train(ScoreModel& model, const std::vector<AssemblyInstance>& data, const TrainConfig& config,
                  const TrainHooks& hooks) {
    config.validate();
    if (data.empty()) throw InputError("train", "empty dataset");
    if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);

    NoiseSource rng(config.seed);
    nn::AdamConfig adam;
    adam.lr = config.lr;
    TrainResult result;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
        double epoch_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
            std::vector<std::size_t> batch(order.begin() + b0,
                                           order.begin() + std::min(order.size(), b0 + config.batch_size));
            // Sub-batches of equal part count, in order of N.
            std::stable_sort(batch.begin(), batch.end(), [&](std::size_t a, std::size_t b) {
                return data[a].n_parts() < data[b].n_parts();
            });
            model.params().zero_grads();
            nn::Tape tape;
            std::vector<nn::Value> losses;
            for (std::size_t idx : batch) {
                const AssemblyInstance& inst = data[idx];
                nn::Value feats = model.encode_parts(tape, inst.parts);
                ScoreFn fn = [&](nn::Tape& tp, const PoseSet& q, double tt) {
                    return model.score_from_features(tp, feats, q, tt);
                };
                nn::Value l;
                for (std::size_t d = 0; d < config.time_draws; ++d) {
                    const double t = rng.uniform(config.t_min, config.schedule.T);
                    nn::Value ld = dsm_loss(tape, fn, config.schedule, inst.gt_poses, t, rng);
                    l = d == 0 ? ld : nn::add(l, ld);
                }
                if (config.time_draws > 1) l = nn::scale(l, 1.0 / static_cast<double>(config.time_draws));
                losses.push_back(l);
            }
            nn::Value total = losses.front();
            for (std::size_t i = 1; i < losses.size(); ++i) total = nn::add(total, losses[i]);
            total = nn::scale(total, 1.0 / static_cast<double>(losses.size()));
            const double loss = total.data()[0];
            if (!std::isfinite(loss))
                throw NumericalError("train", "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                                  std::to_string(batches + 1));
            tape.backward(total);
            nn::adam_step(model.params(), adam);
            result.step_loss.push_back(loss);
            epoch_sum += loss;
            ++batches;
        }
        result.epoch_loss.push_back(epoch_sum / static_cast<double>(batches));
        if (hooks.on_epoch) hooks.on_epoch(epoch, result.epoch_loss.back());
        if (!config.out_dir.empty() && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_epoch%05zu.spa", epoch);
            write_checkpoint(model, config, hooks, epoch, config.out_dir / name);
        }
    }
    if (!config.out_dir.empty()) {
        std::vector<std::string> meta = {std::string("scorepa ") + SCOREPA_VERSION};
        if (!hooks.header_extra.is_null()) meta.push_back("config " + hooks.header_extra.dump());
        write_loss_csv(config.out_dir / "loss.csv", result.epoch_loss, meta);
        write_checkpoint(model, config, hooks, config.epochs, config.out_dir / "model.spa");
    }
    return result;
}

}  // namespace scorepa
