#include "scorepa/score_net.hpp"

#include <cmath>
#include <numbers>

#include "scorepa/error.hpp"

namespace scorepa {

using nlohmann::json;

void ScoreNetConfig::validate() const {
    if (point_feat_dim == 0 || hidden_dim == 0 || time_embed_dim == 0 || message_rounds == 0)
        throw ConfigError("score_net", "all dimensions and message_rounds must be >= 1");
    if (time_embed_dim % 2 != 0) throw ConfigError("score_net", "time_embed_dim must be even");
    if (!(fourier_scale > 0.0) || !std::isfinite(fourier_scale))
        throw ConfigError("score_net", "fourier_scale must be positive");
    if (!(sigma_data >= 0.0) || !std::isfinite(sigma_data))
        throw ConfigError("score_net", "sigma_data must be >= 0");
}

json ScoreNetConfig::to_json() const {
    return {{"point_feat_dim", point_feat_dim}, {"hidden_dim", hidden_dim},
            {"time_embed_dim", time_embed_dim}, {"fourier_scale", fourier_scale},
            {"message_rounds", message_rounds}, {"output_scaling", output_scaling},
            {"input_scaling", input_scaling}, {"residual", residual},
            {"sigma_data", sigma_data}};
}

ScoreNetConfig ScoreNetConfig::from_json(const json& j) {
    ScoreNetConfig c;
    c.point_feat_dim = j.at("point_feat_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.time_embed_dim = j.at("time_embed_dim").get<std::size_t>();
    c.fourier_scale = j.at("fourier_scale").get<double>();
    c.message_rounds = j.at("message_rounds").get<std::size_t>();
    c.output_scaling = j.at("output_scaling").get<bool>();
    c.input_scaling = j.at("input_scaling").get<bool>();
    c.residual = j.value("residual", false);  // absent in early checkpoints
    c.sigma_data = j.value("sigma_data", 0.0);
    c.validate();
    return c;
}

PartDedup dedup_parts(const std::vector<Cloud>& parts) {
    PartDedup d;
    d.slot.resize(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::size_t s = 0;
        while (s < d.unique.size() && !(parts[d.unique[s]] == parts[i])) ++s;
        if (s == d.unique.size()) d.unique.push_back(i);
        d.slot[i] = s;
    }
    return d;
}

ScoreModel::ScoreModel(ScoreNetConfig config, DiffusionSchedule schedule, std::uint64_t init_seed)
    : config_(config), schedule_(schedule), init_seed_(init_seed) {
    config_.validate();
    schedule_.validate();
    NoiseSource rng(init_seed);
    const std::size_t F = config_.point_feat_dim, H = config_.hidden_dim, D = config_.time_embed_dim;
    add_dense("pointnet/l1", 3, 64, rng);
    add_dense("pointnet/l2", 64, 128, rng);
    add_dense("pointnet/l3", 128, F, rng);
    Matrix w(1, D / 2);
    for (auto& v : w.values()) v = config_.fourier_scale * rng.normal();
    params_.add("time/fourier_w", std::move(w), /*trainable=*/false);
    add_dense("time/proj", D, H, rng);
    add_dense("input/l1", F + kPoseDim + H, H, rng);
    add_dense("input/l2", H, H, rng);
    for (std::size_t k = 0; k < config_.message_rounds; ++k) {
        const std::string r = "round" + std::to_string(k);
        add_dense(r + "/edge/l1", 2 * H, H, rng);
        add_dense(r + "/edge/l2", H, H, rng);
        add_dense(r + "/node/l1", 2 * H, H, rng);
        add_dense(r + "/node/l2", H, H, rng);
    }
    add_dense("head/l1", H, H, rng);
    add_dense("head/l2", H, kPoseDim, rng);
}

void ScoreModel::add_dense(const std::string& path, std::size_t in, std::size_t out, NoiseSource& rng) {
    // He-normal weights for the ReLU layers, zero biases.
    const double sd = std::sqrt(2.0 / static_cast<double>(in));
    Matrix W(in, out);
    for (auto& v : W.values()) v = sd * rng.normal();
    params_.add(path + "/W", std::move(W));
    params_.add(path + "/b", Matrix(1, out));
}

nn::Value ScoreModel::dense(nn::Tape& tape, const std::string& path, const nn::Value& x) {
    return nn::linear(x, tape.param(params_.at(path + "/W")), tape.param(params_.at(path + "/b")));
}

nn::Value ScoreModel::encode_parts(nn::Tape& tape, const std::vector<Cloud>& parts) {
    if (parts.empty()) throw InputError("encode_parts", "no parts");
    for (const auto& p : parts) {
        if (p.rows() != kPointsPerPart || p.cols() != 3)
            throw InputError("encode_parts", "each part needs exactly " + std::to_string(kPointsPerPart) +
                                                 " points, got " + std::to_string(p.rows()));
        if (!p.all_finite()) throw InputError("encode_parts", "part cloud contains non-finite values");
    }
    const PartDedup d = dedup_parts(parts);
    Matrix stacked(d.unique.size() * kPointsPerPart, 3);
    for (std::size_t s = 0; s < d.unique.size(); ++s) {
        const auto& v = parts[d.unique[s]].values();
        std::copy(v.begin(), v.end(), stacked.values().begin() + s * kPointsPerPart * 3);
    }
    nn::Value h = tape.constant(std::move(stacked));
    h = nn::relu(dense(tape, "pointnet/l1", h));
    h = nn::relu(dense(tape, "pointnet/l2", h));
    h = nn::relu(dense(tape, "pointnet/l3", h));
    nn::Value pooled = nn::segment_max_pool(h, kPointsPerPart);
    return nn::gather_rows(pooled, d.slot);
}

Matrix ScoreModel::fourier_features(double t) const {
    const Matrix& w = params_.at("time/fourier_w").value;
    const std::size_t half = w.cols();
    Matrix f(1, 2 * half);
    for (std::size_t i = 0; i < half; ++i) {
        const double a = 2.0 * std::numbers::pi * w[i] * t;
        f[i] = std::sin(a);
        f[half + i] = std::cos(a);
    }
    return f;
}

nn::Value ScoreModel::embed_time(nn::Tape& tape, double t) {
    if (!(t >= 0.0 && t <= schedule_.T)) throw RangeError("embed_time", "t outside [0, T]");
    return dense(tape, "time/proj", tape.constant(fourier_features(t)));
}

nn::Value ScoreModel::score_from_features(nn::Tape& tape, const nn::Value& features, const PoseSet& q, double t) {
    const std::size_t n = q.rows();
    if (features.rows() != n || q.cols() != kPoseDim)
        throw ContractError("score", std::to_string(features.rows()) + " parts but pose set is " +
                                         std::to_string(q.rows()) + "x" + std::to_string(q.cols()));
    if (n == 0) throw ContractError("score", "empty pose set");
    if (!(t > 0.0 && t <= schedule_.T)) throw RangeError("score", "t must lie in (0, T]");
    const double lam = schedule_.lambda(t);

    const double sd2 = config_.sigma_data * config_.sigma_data;
    Matrix qin = q;
    if (sd2 > 0.0 || config_.input_scaling) {
        const double c = 1.0 / std::sqrt((sd2 > 0.0 ? sd2 : 1.0) + lam);
        for (auto& v : qin.values()) v *= c;
    }
    nn::Value temb = embed_time(tape, t);
    nn::Value tb = nn::gather_rows(temb, std::vector<std::size_t>(n, 0));
    nn::Value h = nn::concat({features, tape.constant(std::move(qin)), tb});
    h = nn::relu(dense(tape, "input/l1", h));
    h = nn::relu(dense(tape, "input/l2", h));

    const nn::PairIndex pairs = nn::complete_graph_pairs(n);
    for (std::size_t k = 0; k < config_.message_rounds; ++k) {
        const std::string r = "round" + std::to_string(k);
        nn::Value e = nn::concat({nn::gather_rows(h, pairs.receiver), nn::gather_rows(h, pairs.sender)});
        e = nn::relu(dense(tape, r + "/edge/l1", e));
        e = nn::relu(dense(tape, r + "/edge/l2", e));
        nn::Value agg = nn::neighbor_mean(e, n);
        nn::Value u = nn::relu(dense(tape, r + "/node/l1", nn::concat({h, agg})));
        if (config_.residual)
            h = nn::add(h, dense(tape, r + "/node/l2", u));
        else
            h = nn::relu(dense(tape, r + "/node/l2", u));
    }
    nn::Value out = dense(tape, "head/l2", nn::relu(dense(tape, "head/l1", h)));
    if (sd2 > 0.0) {
        Matrix skip = q;
        for (auto& v : skip.values()) v *= -1.0 / (sd2 + lam);
        return nn::add(nn::scale(out, config_.sigma_data / std::sqrt(lam * (sd2 + lam))),
                       tape.constant(std::move(skip)));
    }
    if (config_.output_scaling) out = nn::scale(out, 1.0 / std::sqrt(lam));
    return out;
}

nn::Value ScoreModel::score(nn::Tape& tape, const std::vector<Cloud>& parts, const PoseSet& q, double t) {
    if (parts.size() != q.rows())
        throw ContractError("score", std::to_string(parts.size()) + " parts but " + std::to_string(q.rows()) +
                                         " pose rows");
    return score_from_features(tape, encode_parts(tape, parts), q, t);
}

Matrix ScoreModel::encode(const std::vector<Cloud>& parts) {
    nn::Tape tape(false);
    return encode_parts(tape, parts).data();
}

Matrix ScoreModel::score(const Matrix& features, const PoseSet& q, double t) {
    nn::Tape tape(false);
    return score_from_features(tape, tape.constant(features), q, t).data();
}

Matrix ScoreModel::score(const std::vector<Cloud>& parts, const PoseSet& q, double t) {
    nn::Tape tape(false);
    return score(tape, parts, q, t).data();
}

json ScoreModel::header() const {
    return {{"kind", "scorepa-score-model"},
            {"version", SCOREPA_VERSION},
            {"init_seed", init_seed_},
            {"architecture", config_.to_json()},
            {"schedule", {{"sigma", schedule_.sigma}, {"T", schedule_.T}}}};
}

ScoreModel ScoreModel::from_header(const json& header) {
    try {
        if (header.at("kind").get<std::string>() != "scorepa-score-model")
            throw ParseError("checkpoint", "header does not describe a score model");
        DiffusionSchedule s;
        s.sigma = header.at("schedule").at("sigma").get<double>();
        s.T = header.at("schedule").at("T").get<double>();
        return ScoreModel(ScoreNetConfig::from_json(header.at("architecture")), s,
                          header.at("init_seed").get<std::uint64_t>());
    } catch (const json::exception& e) {
        throw ParseError("checkpoint", std::string("bad model header: ") + e.what());
    }
}

}  // namespace scorepa
