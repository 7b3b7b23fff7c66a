#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "scorepa/dataset.hpp"
#include "scorepa/error.hpp"
#include "scorepa/score_net.hpp"
#include "scorepa/trainer.hpp"

using namespace scorepa;

namespace {

ScoreNetConfig small_config() {
    ScoreNetConfig c;
    c.point_feat_dim = 16;
    c.hidden_dim = 24;
    c.time_embed_dim = 8;
    c.message_rounds = 2;
    return c;
}

Cloud centred_cloud(std::mt19937_64& g, double sx = 0.2, double sy = 0.1, double sz = 0.05) {
    std::normal_distribution<double> d;
    Cloud c(kPointsPerPart, 3);
    for (std::size_t i = 0; i < c.rows(); ++i) {
        c(i, 0) = sx * d(g);
        c(i, 1) = sy * d(g);
        c(i, 2) = sz * d(g);
    }
    for (int k = 0; k < 3; ++k) {
        double m = 0;
        for (std::size_t i = 0; i < c.rows(); ++i) m += c(i, k);
        m /= c.rows();
        for (std::size_t i = 0; i < c.rows(); ++i) c(i, k) -= m;
    }
    return c;
}

PoseSet rand_poses(std::size_t n, std::mt19937_64& g, double s = 1.0) {
    std::normal_distribution<double> d(0, s);
    PoseSet q(n, 6);
    for (auto& v : q.values()) v = d(g);
    return q;
}

}  // namespace

TEST_CASE("config validation and JSON round trip") {
    ScoreNetConfig c;
    CHECK(c.point_feat_dim == 256);
    CHECK(c.hidden_dim == 256);
    CHECK(c.time_embed_dim == 128);
    CHECK(c.fourier_scale == 16.0);
    CHECK(c.message_rounds == 3);
    auto odd = c;
    odd.time_embed_dim = 7;
    CHECK_THROWS_AS(odd.validate(), ConfigError);
    auto zero = c;
    zero.hidden_dim = 0;
    CHECK_THROWS_AS(zero.validate(), ConfigError);
    auto s = small_config();
    s.input_scaling = false;
    s.sigma_data = 0.3;
    CHECK(ScoreNetConfig::from_json(s.to_json()).to_json() == s.to_json());
}

TEST_CASE("part encoder: point order invariance, identical parts, point count") {
    std::mt19937_64 g(1);
    ScoreModel m(small_config(), {}, 7);
    Cloud a = centred_cloud(g), b = centred_cloud(g, 0.05, 0.3, 0.1);
    Cloud shuffled = a;
    std::vector<std::size_t> perm(a.rows());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (int k = 0; k < 3; ++k) shuffled(i, k) = a(perm[i], k);
    Matrix f = m.encode({a, b, shuffled, a});
    CHECK(f.rows() == 4);
    CHECK(f.cols() == 16);
    for (std::size_t c = 0; c < f.cols(); ++c) {
        CHECK(f(0, c) == f(2, c));
        CHECK(f(0, c) == f(3, c));
    }
    CHECK(m.encode({shuffled}) == m.encode({a}));
    Cloud twice(2 * kPointsPerPart, 3);
    CHECK_THROWS_AS(m.encode({twice}), InputError);
    CHECK_THROWS_AS(m.encode({Cloud(999, 3)}), InputError);
}

TEST_CASE("dedup finds bit-identical clouds") {
    std::mt19937_64 g(2);
    Cloud a = centred_cloud(g), b = centred_cloud(g);
    auto d = dedup_parts({a, b, a, a, b});
    CHECK(d.unique == std::vector<std::size_t>{0, 1});
    CHECK(d.slot == std::vector<std::size_t>{0, 1, 0, 0, 1});
}

TEST_CASE("time embedding") {
    ScoreModel m(small_config(), {}, 7);
    Matrix f0 = m.fourier_features(0.0);
    CHECK(f0.cols() == 8);
    for (int i = 0; i < 4; ++i) {
        CHECK(f0[i] == 0.0);
        CHECK(f0[4 + i] == 1.0);
    }
    CHECK(m.fourier_features(0.3) == m.fourier_features(0.3));
    Matrix a = m.fourier_features(0.1), b = m.fourier_features(0.9);
    double diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    CHECK(diff > 1e-6);
    nn::Tape t(false);
    CHECK(m.embed_time(t, 0.5).cols() == 24);
    CHECK_THROWS_AS(m.embed_time(t, 1.5), RangeError);
}

TEST_CASE("score is permutation equivariant bit for bit") {
    std::mt19937_64 g(3);
    ScoreModel m(small_config(), {}, 11);
    std::vector<Cloud> parts = {centred_cloud(g), centred_cloud(g, 0.1, 0.1, 0.1), centred_cloud(g, 0.3, 0.02, 0.02),
                                centred_cloud(g), centred_cloud(g, 0.05, 0.2, 0.2)};
    PoseSet q = rand_poses(5, g);
    for (double t : {0.01, 0.4, 1.0}) {
        Matrix s = m.score(parts, q, t);
        CHECK(s.rows() == 5);
        CHECK(s.cols() == 6);
        CHECK(s.all_finite());
        std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<Cloud> pp;
            PoseSet qp(5, 6);
            for (std::size_t k = 0; k < 5; ++k) {
                pp.push_back(parts[perm[k]]);
                for (int c = 0; c < 6; ++c) qp(k, c) = q(perm[k], c);
            }
            Matrix sp = m.score(pp, qp, t);
            for (std::size_t k = 0; k < 5; ++k)
                for (int c = 0; c < 6; ++c) REQUIRE(sp(k, c) == s(perm[k], c));
            std::shuffle(perm.begin(), perm.end(), g);
        }
    }
}

TEST_CASE("identical parts with identical poses get identical scores") {
    std::mt19937_64 g(4);
    ScoreModel m(small_config(), {}, 5);
    Cloud leg = centred_cloud(g), top = centred_cloud(g, 0.4, 0.3, 0.02);
    PoseSet q = rand_poses(3, g);
    for (int c = 0; c < 6; ++c) q(2, c) = q(0, c);
    Matrix s = m.score({leg, top, leg}, q, 0.3);
    for (int c = 0; c < 6; ++c) CHECK(s(0, c) == s(2, c));
}

TEST_CASE("single part and shape errors") {
    std::mt19937_64 g(5);
    ScoreModel m(small_config(), {}, 5);
    Cloud a = centred_cloud(g);
    Matrix s = m.score(std::vector<Cloud>{a}, rand_poses(1, g), 0.5);
    CHECK(s.rows() == 1);
    CHECK(s.all_finite());
    CHECK_THROWS_AS(m.score({a, a}, rand_poses(3, g), 0.5), ContractError);
    CHECK_THROWS_AS(m.score(std::vector<Cloud>{a}, rand_poses(1, g), 0.0), RangeError);
}

TEST_CASE("tape and inference paths agree") {
    std::mt19937_64 g(6);
    ScoreModel m(small_config(), {}, 5);
    std::vector<Cloud> parts = {centred_cloud(g), centred_cloud(g)};
    PoseSet q = rand_poses(2, g);
    nn::Tape tape;
    Matrix a = m.score(tape, parts, q, 0.2).data();
    CHECK(a == m.score(parts, q, 0.2));
    CHECK(m.score(m.encode(parts), q, 0.2) == a);
}

TEST_CASE("every trainable parameter receives gradient") {
    std::mt19937_64 g(7);
    ScoreModel m(small_config(), {}, 9);
    m.params().zero_grads();
    NoiseSource noise(1);
    {
        nn::Tape tape;
        std::vector<nn::Value> losses;
        for (int b = 0; b < 4; ++b) {
            std::vector<Cloud> parts;
            for (int k = 0; k < 2 + b; ++k) parts.push_back(centred_cloud(g, 0.1 + 0.05 * k, 0.2, 0.1));
            PoseSet q0 = rand_poses(parts.size(), g, 0.3);
            ScoreFn fn = [&](nn::Tape& t, const PoseSet& q, double tt) { return m.score(t, parts, q, tt); };
            losses.push_back(dsm_loss(tape, fn, m.schedule(), q0, 0.05 + 0.3 * b, noise));
        }
        nn::Value total = losses[0];
        for (std::size_t i = 1; i < losses.size(); ++i) total = nn::add(total, losses[i]);
        tape.backward(total);
    }
    for (const auto& [path, p] : m.params().params()) {
        if (!p.trainable) {
            CHECK(path == "time/fourier_w");
            continue;
        }
        double mx = 0;
        for (double v : p.grad.values()) mx = std::max(mx, std::abs(v));
        INFO(path);
        CHECK(mx > 0.0);
    }
}

TEST_CASE("with sigma_data and a silent head the score is the Gaussian one") {
    std::mt19937_64 g(21);
    auto c = small_config();
    c.sigma_data = 0.2;
    ScoreModel m(c, {}, 5);
    for (const char* p : {"head/l2/W", "head/l2/b"})
        for (auto& v : m.params().at(p).value.values()) v = 0.0;
    const std::vector<Cloud> parts = {centred_cloud(g), centred_cloud(g), centred_cloud(g)};
    const PoseSet q = rand_poses(3, g);
    for (double t : {0.01, 0.3, 1.0}) {
        const Matrix s = m.score(parts, q, t);
        const double lam = m.schedule().lambda(t);
        for (std::size_t i = 0; i < q.values().size(); ++i)
            CHECK(s.values()[i] == doctest::Approx(-q.values()[i] / (0.04 + lam)).epsilon(1e-12));
    }
    // Nonzero head still moves the score.
    ScoreModel fresh(c, {}, 5);
    CHECK(fresh.score(parts, q, 0.3).values() != m.score(parts, q, 0.3).values());
    auto bad = c;
    bad.sigma_data = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("header round trip rebuilds the same architecture") {
    auto c = small_config();
    c.fourier_scale = 3.0;
    DiffusionSchedule s{10.0, 1.0};
    ScoreModel m(c, s, 13);
    ScoreModel r = ScoreModel::from_header(m.header());
    CHECK(r.config().to_json() == m.config().to_json());
    CHECK(r.schedule().sigma == 10.0);
    CHECK(r.params().at("time/fourier_w").value == m.params().at("time/fourier_w").value);
    CHECK(r.params().at("head/l2/W").value == m.params().at("head/l2/W").value);
}

TEST_CASE("trained on a point mass, the score matches the analytic one") {
    std::mt19937_64 g(8);
    const std::vector<Cloud> parts = {centred_cloud(g)};
    const PoseSet qstar(1, 6, std::vector<double>{0.3, -0.2, 0.1, 0.0, 0.0, 0.0});
    ScoreModel m(small_config(), {}, 3);
    // 16 time draws per step share one encoding of the single part.
    nn::AdamConfig adam;
    NoiseSource rng(1);
    const int steps = 2000;
    for (int s = 0; s < steps; ++s) {
        adam.lr = s < steps * 3 / 4 ? 3e-3 : 3e-4;
        m.params().zero_grads();
        nn::Tape tape;
        nn::Value f = m.encode_parts(tape, parts);
        ScoreFn fn = [&](nn::Tape& tp, const PoseSet& q, double t) { return m.score_from_features(tp, f, q, t); };
        nn::Value total;
        for (int b = 0; b < 16; ++b) {
            nn::Value l = dsm_loss(tape, fn, m.schedule(), qstar, rng.uniform(1e-3, 1.0), rng);
            total = b == 0 ? l : nn::add(total, l);
        }
        tape.backward(nn::scale(total, 1.0 / 16));
        nn::adam_step(m.params(), adam);
    }

    const Matrix feats = m.encode(parts);
    NoiseSource noise(99);
    double cos_sum = 0;
    int cnt = 0;
    for (int ti = 1; ti <= 10; ++ti) {
        const double t = 0.1 * ti;
        const double sd = m.schedule().stddev(t);
        for (int r = 0; r < 10; ++r) {
            PoseSet q = qstar;
            for (auto& v : q.values()) v += sd * noise.normal();
            Matrix s = m.score(feats, q, t);
            double dot = 0, ns = 0, na = 0;
            for (int c = 0; c < 6; ++c) {
                const double a = -(q(0, c) - qstar(0, c)) / m.schedule().lambda(t);
                dot += a * s(0, c);
                ns += s(0, c) * s(0, c);
                na += a * a;
            }
            cos_sum += dot / std::sqrt(ns * na);
            ++cnt;
        }
    }
    const double mean_cos = cos_sum / cnt;
    MESSAGE("mean cosine " << mean_cos);
    CHECK(mean_cos > 0.99);
}
