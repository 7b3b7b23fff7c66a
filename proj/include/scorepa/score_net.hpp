#pragma once

// Conditional score network S(q, t | parts).
//
//   per-point MLP 3 -> 64 -> 128 -> F, max-pooled per part        (features)
//   [sin 2 pi w t, cos 2 pi w t], w ~ N(0, scale^2) frozen; linear  (time)
//   h0_i = MLP_in(concat(feature_i, q_i, time))
//   h_{k+1,i} = h_k,i + MLP_node(concat(h_k,i, mean_{j != i} MLP_edge(concat(h_k,i, h_k,j))))
//   out_i = MLP_head(h_i)  (6 values, no final activation)
//
// With output_scaling the head predicts the standardized score, so
// S = out / sqrt(lambda(t)). With input_scaling q enters as q / sqrt(1 + lambda(t)).
// With sigma_data = s > 0 the head learns a correction to the exact score of
// N(0, s^2) data: S = -q / (s^2 + lambda) + out * s / sqrt(lambda (s^2 + lambda)),
// and q enters as q / sqrt(s^2 + lambda). This replaces both scalings above.
// Flags and all dimensions are stored in checkpoint headers.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "scorepa/autodiff.hpp"
#include "scorepa/diffusion.hpp"
#include "scorepa/geometry.hpp"

namespace scorepa {

struct ScoreNetConfig {
    std::size_t point_feat_dim = 256;
    std::size_t hidden_dim = 256;
    std::size_t time_embed_dim = 128;
    double fourier_scale = 16.0;
    std::size_t message_rounds = 3;
    bool output_scaling = true;
    bool input_scaling = true;
    /// h_{k+1} = h_k + MLP_node(...) (second node layer linear) instead of
    /// replacing h_k; keeps the deep stack trainable.
    bool residual = true;
    /// 0 disables the Gaussian skip term.
    double sigma_data = 0.0;

    /// Throws ConfigError on zero dims, odd time_embed_dim or scale <= 0.
    void validate() const;
    nlohmann::json to_json() const;
    static ScoreNetConfig from_json(const nlohmann::json& j);
};

/// Bit-identical part clouds are encoded once; `unique` lists one
/// representative index per distinct cloud and `slot[i]` its position there.
struct PartDedup {
    std::vector<std::size_t> unique;
    std::vector<std::size_t> slot;
};
PartDedup dedup_parts(const std::vector<Cloud>& parts);

class ScoreModel {
public:
    ScoreModel(ScoreNetConfig config, DiffusionSchedule schedule, std::uint64_t init_seed);

    const ScoreNetConfig& config() const { return config_; }
    const DiffusionSchedule& schedule() const { return schedule_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    /// N x point_feat_dim; every part must have kPointsPerPart points.
    nn::Value encode_parts(nn::Tape& tape, const std::vector<Cloud>& parts);
    /// Frozen Fourier features (1 x time_embed_dim), before the projection.
    Matrix fourier_features(double t) const;
    /// 1 x hidden_dim.
    nn::Value embed_time(nn::Tape& tape, double t);
    /// Everything after the part encoder; features is N x point_feat_dim.
    nn::Value score_from_features(nn::Tape& tape, const nn::Value& features, const PoseSet& q, double t);
    nn::Value score(nn::Tape& tape, const std::vector<Cloud>& parts, const PoseSet& q, double t);

    /// Inference without a gradient record.
    Matrix encode(const std::vector<Cloud>& parts);
    Matrix score(const Matrix& features, const PoseSet& q, double t);
    Matrix score(const std::vector<Cloud>& parts, const PoseSet& q, double t);

    /// Architecture, schedule and version for checkpoint headers.
    nlohmann::json header() const;
    /// Rebuilds a model from a checkpoint header (parameters not yet restored).
    static ScoreModel from_header(const nlohmann::json& header);

private:
    nn::Value dense(nn::Tape& tape, const std::string& path, const nn::Value& x);
    void add_dense(const std::string& path, std::size_t in, std::size_t out, NoiseSource& rng);

    ScoreNetConfig config_;
    DiffusionSchedule schedule_;
    std::uint64_t init_seed_;
    nn::ParamStore params_;
};

}  // namespace scorepa
