#include "scorepa/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "scorepa/error.hpp"
#include "scorepa/geometry.hpp"
#include "scorepa/log.hpp"

namespace scorepa {

std::string_view sampler_name(SamplerKind k) {
    switch (k) {
        case SamplerKind::pc: return "pc";
        case SamplerKind::fpc: return "fpc";
        case SamplerKind::fpc_no_decay: return "fpc-no-decay";
    }
    return "?";
}

SamplerKind parse_sampler(std::string_view name) {
    if (name == "pc") return SamplerKind::pc;
    if (name == "fpc") return SamplerKind::fpc;
    if (name == "fpc-no-decay") return SamplerKind::fpc_no_decay;
    throw ConfigError("sampler", "unknown sampler '" + std::string(name) + "' (pc, fpc, fpc-no-decay)");
}

void SamplerConfig::validate(SamplerKind kind) const {
    schedule.validate();
    if (n_steps < 2) throw ConfigError("sampler", "n_steps must be >= 2");
    if (kind != SamplerKind::pc && final_corrector_steps < 1)
        throw ConfigError("sampler", "final_corrector_steps must be >= 1 for fpc");
    if (!(snr > 0.0) || !std::isfinite(snr)) throw ConfigError("sampler", "snr must be positive");
    if (!(decay_exponent >= 0.0)) throw ConfigError("sampler", "decay_exponent must be >= 0");
}

std::size_t SamplerConfig::reported_steps(SamplerKind kind) const {
    return kind == SamplerKind::pc ? n_steps : n_steps + final_corrector_steps;
}

nlohmann::json SamplerConfig::to_json() const {
    return {{"n_steps", n_steps},
            {"corrector_steps", corrector_steps},
            {"final_corrector_steps", final_corrector_steps},
            {"snr", snr},
            {"decay_exponent", decay_exponent},
            {"squared_snr", squared_snr},
            {"sigma", schedule.sigma},
            {"T", schedule.T}};
}

SamplerConfig with_total_steps(SamplerConfig base, SamplerKind kind, std::size_t steps) {
    if (kind == SamplerKind::pc) {
        base.n_steps = steps;
    } else {
        if (steps < base.final_corrector_steps + 2)
            throw ConfigError("sampler", std::to_string(steps) + " total steps leave no room for the main loop");
        base.n_steps = steps - base.final_corrector_steps;
    }
    return base;
}

namespace {

Matrix eval(const ScoreField& field, const PoseSet& q, double t, const char* stage, SamplerStats* stats) {
    Matrix g = field(q, t);
    if (stats) ++stats->field_evals;
    if (!g.same_shape(q)) throw ContractError(stage, "score field returned the wrong shape");
    if (!g.all_finite()) {
        std::ostringstream os;
        os << "non-finite score at t=" << t << " (|q|^2=" << squared_norm(q) << ")";
        throw NumericalError(stage, os.str());
    }
    return g;
}

}  // namespace

PoseSet predictor_step(const ScoreField& field, const PoseSet& q, double t_prev, double t, double step,
                       const DiffusionSchedule& schedule, NoiseSource& noise, bool with_noise,
                       SamplerStats* stats) {
    if (!(t_prev > t && t >= 0.0)) throw ContractError("predictor", "requires t_prev > t >= 0");
    const Matrix g = eval(field, q, t_prev, "predictor", stats);
    const double g2h = step * schedule.g2(t_prev);
    PoseSet out = q;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g2h * g[i];
    if (with_noise) {
        const double sd = std::sqrt(g2h);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += sd * noise.normal();
    }
    return out;
}

PoseSet corrector_step(const ScoreField& field, const PoseSet& q, double t, double snr, double noise_scale,
                       NoiseSource& noise, bool squared_snr, SamplerStats* stats) {
    const Matrix g = eval(field, q, t, "corrector", stats);
    const Matrix z = noise.normal_matrix(q.rows(), q.cols());
    const double gn = std::sqrt(squared_norm(g));
    if (!(gn > 0.0)) {
        if (stats) ++stats->skipped_correctors;
        std::ostringstream os;
        os << "corrector skipped at t=" << t << ": score norm is zero";
        warn(os.str());
        return q;
    }
    const double ratio = snr * std::sqrt(squared_norm(z)) / gn;
    const double eps = 2.0 * (squared_snr ? ratio * ratio : ratio);
    const double sd = std::sqrt(2.0 * eps) * noise_scale;
    PoseSet out = q;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += eps * g[i] + sd * z[i];
    return out;
}

double decay_noise_scale(std::size_t i, std::size_t final_steps, double d) {
    const double frac = 1.0 - static_cast<double>(i) / static_cast<double>(final_steps);
    return std::pow(frac, 0.5 * d);
}

namespace {

PoseSet main_loop(const ScoreField& field, std::size_t n_parts, const SamplerConfig& c, NoiseSource& noise,
                  SamplerStats* stats) {
    const double T = c.schedule.T, h = T / static_cast<double>(c.n_steps);
    PoseSet q = prior_sample(c.schedule, n_parts, noise);
    for (std::size_t n = c.n_steps - 1; n >= 1; --n) {
        const double t_prev = static_cast<double>(n + 1) * h;
        const double t = static_cast<double>(n) * h;
        for (std::size_t k = 0; k < c.corrector_steps; ++k)
            q = corrector_step(field, q, t_prev, c.snr, 1.0, noise, c.squared_snr, stats);
        q = predictor_step(field, q, t_prev, t, h, c.schedule, noise, true, stats);
    }
    return q;
}

}  // namespace

PoseSet pc_sample(const ScoreField& field, std::size_t n_parts, const SamplerConfig& config, NoiseSource& noise,
                  SamplerStats* stats) {
    config.validate(SamplerKind::pc);
    const double h = config.schedule.T / static_cast<double>(config.n_steps);
    PoseSet q = main_loop(field, n_parts, config, noise, stats);
    return predictor_step(field, q, h, 0.0, h, config.schedule, noise, false, stats);
}

PoseSet fpc_sample(const ScoreField& field, std::size_t n_parts, const SamplerConfig& config, NoiseSource& noise,
                   SamplerStats* stats) {
    config.validate(SamplerKind::fpc);
    const double h = config.schedule.T / static_cast<double>(config.n_steps);
    PoseSet q = main_loop(field, n_parts, config, noise, stats);
    const std::size_t CF = config.final_corrector_steps;
    for (std::size_t i = 0; i < CF; ++i)
        q = corrector_step(field, q, h, config.snr, decay_noise_scale(i, CF, config.decay_exponent), noise,
                           config.squared_snr, stats);
    return predictor_step(field, q, h, 0.0, h, config.schedule, noise, false, stats);
}

PoseSet run_sampler(SamplerKind kind, const ScoreField& field, std::size_t n_parts, const SamplerConfig& config,
                    NoiseSource& noise, SamplerStats* stats) {
    switch (kind) {
        case SamplerKind::pc: return pc_sample(field, n_parts, config, noise, stats);
        case SamplerKind::fpc: return fpc_sample(field, n_parts, config, noise, stats);
        case SamplerKind::fpc_no_decay: {
            SamplerConfig c = config;
            c.decay_exponent = 0.0;
            return fpc_sample(field, n_parts, c, noise, stats);
        }
    }
    throw ConfigError("sampler", "unknown sampler kind");
}

// ------------------------------------------------------------------ analytic fields

namespace {

void check_rows(const PoseSet& q, const PoseSet& ref, const char* who) {
    if (!q.same_shape(ref)) throw ContractError(who, "pose set shape does not match the reference");
}

}  // namespace

ScoreField point_mass_field(const PoseSet& q_star, const DiffusionSchedule& schedule) {
    return [q_star, schedule](const PoseSet& q, double t) {
        check_rows(q, q_star, "point_mass_field");
        const double lam = schedule.lambda(t);
        Matrix s(q.rows(), q.cols());
        for (std::size_t i = 0; i < q.size(); ++i) s[i] = -(q[i] - q_star[i]) / lam;
        return s;
    };
}

ScoreField gaussian_field(const PoseSet& mu, double sd, const DiffusionSchedule& schedule) {
    return [mu, sd, schedule](const PoseSet& q, double t) {
        check_rows(q, mu, "gaussian_field");
        const double var = sd * sd + schedule.lambda(t);
        Matrix s(q.rows(), q.cols());
        for (std::size_t i = 0; i < q.size(); ++i) s[i] = -(q[i] - mu[i]) / var;
        return s;
    };
}

ScoreField mixture_field(const std::vector<PoseSet>& means, const std::vector<double>& weights, double sd,
                         const DiffusionSchedule& schedule) {
    if (means.empty() || means.size() != weights.size())
        throw ContractError("mixture_field", "need one weight per component");
    std::vector<double> logw;
    for (double w : weights) {
        if (!(w > 0.0)) throw ContractError("mixture_field", "weights must be positive");
        logw.push_back(std::log(w));
    }
    return [means, logw, sd, schedule](const PoseSet& q, double t) {
        const double var = sd * sd + schedule.lambda(t);
        std::vector<double> logr(means.size());
        for (std::size_t k = 0; k < means.size(); ++k) {
            check_rows(q, means[k], "mixture_field");
            double d2 = 0.0;
            for (std::size_t i = 0; i < q.size(); ++i) d2 += (q[i] - means[k][i]) * (q[i] - means[k][i]);
            logr[k] = logw[k] - 0.5 * d2 / var;
        }
        const double top = *std::max_element(logr.begin(), logr.end());
        double z = 0.0;
        for (auto& v : logr) z += (v = std::exp(v - top));
        Matrix s(q.rows(), q.cols());
        for (std::size_t k = 0; k < means.size(); ++k) {
            const double r = logr[k] / z;
            for (std::size_t i = 0; i < q.size(); ++i) s[i] -= r * (q[i] - means[k][i]) / var;
        }
        return s;
    };
}

ScoreField two_mode_mixture_field(const PoseSet& q1, const PoseSet& q2, double weight,
                                  const DiffusionSchedule& schedule) {
    if (!(weight > 0.0 && weight < 1.0)) throw ContractError("two_mode_mixture_field", "weight must be in (0, 1)");
    return mixture_field({q1, q2}, {weight, 1.0 - weight}, 0.0, schedule);
}

ScoreField bind_model(ScoreModel& model, const std::vector<Cloud>& parts) {
    auto features = std::make_shared<const Matrix>(model.encode(parts));
    ScoreModel* m = &model;
    return [m, features](const PoseSet& q, double t) { return m->score(*features, q, t); };
}

nlohmann::json sample_record(const std::string& instance_id, std::size_t sample_index, SamplerKind kind,
                             const SamplerConfig& config, const PoseSet& poses, double seconds) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < poses.rows(); ++i) {
        std::vector<double> r(poses.row(i).begin(), poses.row(i).end());
        rows.push_back(r);
    }
    return {{"instance", instance_id},
            {"sample", sample_index},
            {"sampler", sampler_name(kind)},
            {"steps", config.reported_steps(kind)},
            {"config", config.to_json()},
            {"euler", kEulerConvention},
            {"poses", std::move(rows)},
            {"seconds", seconds}};
}

}  // namespace scorepa
