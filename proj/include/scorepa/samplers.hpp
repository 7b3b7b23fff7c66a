#pragma once

// Reverse-time samplers for the VE SDE.
//
// predictor (Euler-Maruyama, g evaluated at the departure time t_prev, h = T/N):
//     q' = q + h sigma^(2 t_prev) S(q, t_prev) [+ sqrt(h sigma^(2 t_prev)) z]
// corrector (Langevin, signal-to-noise step size):
//     g = S(q, t), z ~ N(0, I), eps = 2 (r |z| / |g|)      (printed form)
//                               eps = 2 (r |z| / |g|)^2    (squared form)
//     q' = q + eps g + sqrt(2 eps) * noise_scale * z
//
// pc:  prior; for n = N-1..1: C correctors at (n+1)T/N, noisy predictor to nT/N;
//      noiseless predictor from T/N to 0.
// fpc: the pc loop, then C_F correctors at T/N with noise_scale (1 - i/C_F)^(d/2),
//      then the noiseless predictor. fpc-no-decay is fpc with d = 0.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scorepa/diffusion.hpp"
#include "scorepa/rng.hpp"
#include "scorepa/score_net.hpp"

namespace scorepa {

enum class SamplerKind { pc, fpc, fpc_no_decay };
std::string_view sampler_name(SamplerKind k);
/// Throws ConfigError for unknown names.
SamplerKind parse_sampler(std::string_view name);

struct SamplerConfig {
    std::size_t n_steps = 400;
    std::size_t corrector_steps = 1;
    std::size_t final_corrector_steps = 50;
    double snr = 0.16;
    double decay_exponent = 2.0;
    /// Squared signal-to-noise ratio in eps. See the README for the choice.
    bool squared_snr = true;
    DiffusionSchedule schedule;

    void validate(SamplerKind kind) const;
    /// N + C_F for the fpc family, N for pc.
    std::size_t reported_steps(SamplerKind kind) const;
    nlohmann::json to_json() const;
};

/// Splits a requested total step count between N and C_F the way the
/// benchmark reports it: fpc family uses N = steps - C_F.
SamplerConfig with_total_steps(SamplerConfig base, SamplerKind kind, std::size_t steps);

using ScoreField = std::function<Matrix(const PoseSet& q, double t)>;

struct SamplerStats {
    std::size_t field_evals = 0;
    std::size_t skipped_correctors = 0;
};

PoseSet predictor_step(const ScoreField& field, const PoseSet& q, double t_prev, double t, double step,
                       const DiffusionSchedule& schedule, NoiseSource& noise, bool with_noise,
                       SamplerStats* stats = nullptr);

/// Skips the step (returns q, warns) when the field vanishes.
PoseSet corrector_step(const ScoreField& field, const PoseSet& q, double t, double snr, double noise_scale,
                       NoiseSource& noise, bool squared_snr, SamplerStats* stats = nullptr);

/// (1 - i/C_F)^(d/2)
double decay_noise_scale(std::size_t i, std::size_t final_steps, double d);

PoseSet pc_sample(const ScoreField& field, std::size_t n_parts, const SamplerConfig& config, NoiseSource& noise,
                  SamplerStats* stats = nullptr);
PoseSet fpc_sample(const ScoreField& field, std::size_t n_parts, const SamplerConfig& config, NoiseSource& noise,
                   SamplerStats* stats = nullptr);
PoseSet run_sampler(SamplerKind kind, const ScoreField& field, std::size_t n_parts, const SamplerConfig& config,
                    NoiseSource& noise, SamplerStats* stats = nullptr);

// Closed-form scores of Gaussian-perturbed references.
ScoreField point_mass_field(const PoseSet& q_star, const DiffusionSchedule& schedule);
ScoreField gaussian_field(const PoseSet& mu, double s, const DiffusionSchedule& schedule);
/// Components N(mean_k, s^2 I) with weights (normalized internally).
ScoreField mixture_field(const std::vector<PoseSet>& means, const std::vector<double>& weights, double s,
                         const DiffusionSchedule& schedule);
ScoreField two_mode_mixture_field(const PoseSet& q1, const PoseSet& q2, double weight,
                                  const DiffusionSchedule& schedule);

/// Trained model bound to fixed parts; part features are computed once.
ScoreField bind_model(ScoreModel& model, const std::vector<Cloud>& parts);

/// One JSON-lines record of a sampled pose set.
nlohmann::json sample_record(const std::string& instance_id, std::size_t sample_index, SamplerKind kind,
                             const SamplerConfig& config, const PoseSet& poses, double seconds);

}  // namespace scorepa
