#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "scorepa/autodiff.hpp"
#include "scorepa/error.hpp"

using namespace scorepa;
using namespace scorepa::nn;

namespace {

Tensor randt(std::size_t r, std::size_t c, std::mt19937_64& g, double s = 1.0) {
    std::normal_distribution<double> d(0.0, s);
    Tensor t(r, c);
    for (auto& v : t.values()) v = d(g);
    return t;
}

using LossFn = std::function<Value(Tape&, ParamStore&)>;

double eval(ParamStore& ps, const LossFn& f) {
    Tape tape(false);
    return f(tape, ps).data()[0];
}

// Max relative error of backward against central differences (h = 1e-4).
double grad_check(ParamStore& ps, const LossFn& f) {
    ps.zero_grads();
    {
        Tape tape;
        tape.backward(f(tape, ps));
    }
    double worst = 0;
    const double h = 1e-4;
    for (auto& [path, p] : ps.params()) {
        if (!p.trainable) continue;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double x = p.value[i];
            p.value[i] = x + h;
            const double fp = eval(ps, f);
            p.value[i] = x - h;
            const double fm = eval(ps, f);
            p.value[i] = x;
            const double fd = (fp - fm) / (2 * h);
            const double an = p.grad[i];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-2});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("relu and linear examples") {
    ParamStore ps;
    auto& x = ps.add("x", Tensor(1, 1, -1.0));
    Tape tape;
    Value r = relu(tape.param(x));
    CHECK(r.data()[0] == 0.0);
    tape.backward(square_norm(scale(add(r, tape.param(x)), 1.0)));  // d/dx (0 + x)^2 = 2x
    CHECK(x.grad[0] == doctest::Approx(-2.0));

    ParamStore ps2;
    auto& xi = ps2.add("x", Tensor(1, 2, std::vector<double>{1, 0}));
    auto& W = ps2.add("W", Tensor(2, 2, std::vector<double>{1, 0, 0, 1}));
    auto& b = ps2.add("b", Tensor(1, 2));
    Tape t2;
    Value y = linear(t2.param(xi), t2.param(W), t2.param(b));
    CHECK(y.data() == Tensor(1, 2, std::vector<double>{1, 0}));

    ParamStore ps3;
    auto& neg = ps3.add("x", Tensor(1, 3, std::vector<double>{-1, 2, -3}));
    Tape t3;
    t3.backward(square_norm(relu(t3.param(neg))));
    CHECK(neg.grad == Tensor(1, 3, std::vector<double>{0, 4, 0}));
}

TEST_CASE("max pool routes the cotangent to the argmax only") {
    ParamStore ps;
    auto& x = ps.add("x", Tensor(3, 1, std::vector<double>{1, 3, 2}));
    Tape tape;
    Value m = max_pool_points(tape.param(x));
    CHECK(m.data()[0] == 3.0);
    CHECK(m.rows() == 1);
    // loss = 0.5 m^2, dloss/dm = 3
    tape.backward(scale(square_norm(m), 0.5));
    CHECK(x.grad == Tensor(3, 1, std::vector<double>{0, 3, 0}));
    // finite differences agree
    LossFn f = [](Tape& t, ParamStore& s) { return scale(square_norm(max_pool_points(t.param(s.at("x")))), 0.5); };
    CHECK(grad_check(ps, f) < 1e-6);
}

TEST_CASE("segment max pool and ties") {
    ParamStore ps;
    auto& x = ps.add("x", Tensor(4, 2, std::vector<double>{1, 5, 1, 2, 0, 0, 7, 0}));
    Tape tape;
    Value m = segment_max_pool(tape.param(x), 2);
    CHECK(m.data() == Tensor(2, 2, std::vector<double>{1, 5, 7, 0}));
    tape.backward(square_norm(m));
    // first maximizer wins a tie
    CHECK(x.grad == Tensor(4, 2, std::vector<double>{2, 10, 0, 0, 0, 0, 14, 0}));
    Tape t2;
    CHECK_THROWS_AS(segment_max_pool(t2.param(x), 3), ContractError);
}

TEST_CASE("square_norm gradient and constant loss") {
    ParamStore ps;
    auto& w = ps.add("w", Tensor(1, 2, std::vector<double>{3, 4}));
    auto& u = ps.add("u", Tensor(1, 2, std::vector<double>{1, 1}));
    Tape tape;
    Value l = square_norm(tape.param(w));
    CHECK(l.data()[0] == 25.0);
    tape.backward(l);
    CHECK(w.grad == Tensor(1, 2, std::vector<double>{6, 8}));
    CHECK(u.grad == Tensor(1, 2, std::vector<double>{0, 0}));

    ps.zero_grads();
    Tape t2;
    t2.param(w);
    t2.backward(t2.constant(Tensor(1, 1, 2.0)));
    CHECK(w.grad == Tensor(1, 2, std::vector<double>{0, 0}));
}

TEST_CASE("backward rejects non-scalars and foreign tapes") {
    ParamStore ps;
    auto& w = ps.add("w", Tensor(1, 2, 1.0));
    Tape a, b;
    Value v = a.param(w);
    CHECK_THROWS_AS(a.backward(v), ContractError);
    Value s = square_norm(v);
    CHECK_THROWS_AS(b.backward(s), ContractError);
    CHECK_THROWS_AS(add(a.param(w), b.param(w)), ContractError);
}

TEST_CASE("shape errors name the operation and both shapes") {
    ParamStore ps;
    auto& x = ps.add("x", Tensor(2, 3));
    auto& W = ps.add("W", Tensor(4, 5));
    auto& b = ps.add("b", Tensor(1, 5));
    Tape tape;
    try {
        linear(tape.param(x), tape.param(W), tape.param(b));
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        const std::string m = e.what();
        CHECK(m.find("linear") != std::string::npos);
        CHECK(m.find("2x3") != std::string::npos);
        CHECK(m.find("4x5") != std::string::npos);
    }
    auto& y = ps.add("y", Tensor(3, 3));
    CHECK_THROWS_AS(concat({tape.param(x), tape.param(y)}), ContractError);
    CHECK_THROWS_AS(add(tape.param(x), tape.param(y)), ContractError);
}

TEST_CASE("every primitive passes a finite-difference check") {
    std::mt19937_64 g(21);
    ParamStore ps;
    ps.add("x", randt(5, 4, g));
    ps.add("W1", randt(4, 6, g, 0.5));
    ps.add("b1", randt(1, 6, g, 0.1));
    ps.add("W2", randt(12, 3, g, 0.5));
    ps.add("b2", randt(1, 3, g, 0.1));
    ps.add("c", randt(5, 3, g));
    LossFn f = [](Tape& t, ParamStore& s) {
        Value x = t.param(s.at("x"));
        Value h = relu(linear(x, t.param(s.at("W1")), t.param(s.at("b1"))));
        Value both = concat({sin(h), cos(h)});
        Value y = linear(both, t.param(s.at("W2")), t.param(s.at("b2")));
        Value y2 = add(y, scale(t.param(s.at("c")), -0.7));
        Value pooled = concat({max_pool_points(y2), mean_pool_nodes(y2)});
        Value seg = segment_max_pool(gather_rows(y2, {0, 1, 2, 3}), 2);
        auto pairs = complete_graph_pairs(4);
        Value msg = add(gather_rows(y2, pairs.receiver), scale(gather_rows(y2, pairs.sender), 0.3));
        Value nm = neighbor_mean(msg, 4);
        return add(add(square_norm(pooled), scale(square_norm(seg), 0.5)), square_norm(nm));
    };
    CHECK(grad_check(ps, f) < 1e-4);
}

TEST_CASE("gradient check over random small networks") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 g(100 + seed);
        std::uniform_int_distribution<int> dim(1, 8);
        const int n = dim(g), a = dim(g), b = dim(g);
        ParamStore ps;
        ps.add("x", randt(n, a, g));
        ps.add("W1", randt(a, b, g));
        ps.add("b1", randt(1, b, g));
        ps.add("W2", randt(b, 2, g));
        ps.add("b2", randt(1, 2, g));
        LossFn f = [](Tape& t, ParamStore& s) {
            Value h = relu(linear(t.param(s.at("x")), t.param(s.at("W1")), t.param(s.at("b1"))));
            Value o = linear(h, t.param(s.at("W2")), t.param(s.at("b2")));
            return square_norm(sin(o));
        };
        CHECK(ps.trainable_scalars() <= 1000);
        CHECK(grad_check(ps, f) < 1e-4);
    }
}

TEST_CASE("backward is linear and repeatable") {
    std::mt19937_64 g(8);
    ParamStore ps;
    auto& w = ps.add("w", randt(3, 3, g));
    auto l1 = [&](Tape& t) { return square_norm(sin(t.param(w))); };
    auto l2 = [&](Tape& t) { return square_norm(relu(t.param(w))); };
    auto grads = [&](auto fn) {
        ps.zero_grads();
        Tape t;
        t.backward(fn(t));
        return w.grad;
    };
    const Tensor g1 = grads(l1), g2 = grads(l2);
    const double a = 0.3, b = -1.7;
    const Tensor gc = grads([&](Tape& t) { return add(scale(l1(t), a), scale(l2(t), b)); });
    for (std::size_t i = 0; i < gc.size(); ++i) CHECK(std::abs(gc[i] - (a * g1[i] + b * g2[i])) < 1e-10);
    CHECK(grads(l1) == g1);
}

TEST_CASE("frozen parameters receive no gradient") {
    ParamStore ps;
    auto& w = ps.add("w", Tensor(1, 2, 1.0), false);
    auto& v = ps.add("v", Tensor(1, 2, 1.0));
    Tape t;
    t.backward(square_norm(add(t.param(w), t.param(v))));
    CHECK(w.grad == Tensor(1, 2, 0.0));
    CHECK(v.grad == Tensor(1, 2, 4.0));
    CHECK(ps.trainable_scalars() == 2);
}

TEST_CASE("adam first step and zero gradients") {
    ParamStore ps;
    auto& p = ps.add("p", Tensor(1, 1, 0.0));
    p.grad[0] = 1.0;
    AdamConfig cfg;
    cfg.lr = 1e-3;
    adam_step(ps, cfg);
    // m = 0.1, v = 0.001; mhat = 1, vhat = 1 -> step lr / (1 + eps)
    CHECK(p.value[0] == doctest::Approx(-1e-3 / (1 + 1e-8)).epsilon(1e-12));
    CHECK(ps.step == 1);
    CHECK(ps.first_moment.at("p").same_shape(p.value));
    CHECK(p.grad[0] == 1.0);  // grads untouched

    ParamStore z;
    auto& q = z.add("q", Tensor(2, 2, 0.5));
    adam_step(z, cfg);
    CHECK(q.value == Tensor(2, 2, 0.5));
    CHECK(z.step == 1);
    adam_step(z, cfg);
    CHECK(z.step == 2);
}

TEST_CASE("two adam steps are reproducible") {
    auto run = [] {
        ParamStore ps;
        auto& p = ps.add("p", Tensor(1, 3, std::vector<double>{1, -2, 3}));
        AdamConfig cfg;
        cfg.lr = 0.01;
        for (int k = 0; k < 2; ++k) {
            ps.zero_grads();
            Tape t;
            t.backward(square_norm(t.param(p)));
            adam_step(ps, cfg);
        }
        return p.value;
    };
    CHECK(run() == run());
}

TEST_CASE("neighbor mean is zero for a single node and ordered otherwise") {
    ParamStore ps;
    auto& one = ps.add("one", Tensor(0, 2));
    Tape t;
    Value z = neighbor_mean(t.param(one), 1);
    CHECK(z.data() == Tensor(1, 2, 0.0));
    auto pairs = complete_graph_pairs(3);
    CHECK(pairs.receiver == std::vector<std::size_t>{0, 0, 1, 1, 2, 2});
    CHECK(pairs.sender == std::vector<std::size_t>{1, 2, 0, 2, 0, 1});
    auto& m = ps.add("m", Tensor(6, 1, std::vector<double>{1, 2, 3, 4, 5, 6}));
    Value r = neighbor_mean(t.param(m), 3);
    CHECK(r.data() == Tensor(3, 1, std::vector<double>{1.5, 3.5, 5.5}));
    CHECK_THROWS_AS(neighbor_mean(t.param(m), 2), ContractError);
}
