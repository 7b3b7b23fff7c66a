#include "scorepa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scorepa/error.hpp"
#include "scorepa/simd.hpp"

namespace scorepa::nn {

namespace {

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << t.rows() << "x" << t.cols();
    return os.str();
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw ContractError(op, "shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

Tape& tape_of(const Value& v, const char* op) {
    if (!v.valid()) throw ContractError(op, "invalid Value handle");
    return *v.tape();
}

Tape& same_tape(const Value& a, const Value& b, const char* op) {
    Tape& t = tape_of(a, op);
    if (b.tape() != &t) throw ContractError(op, "operands recorded on different tapes");
    return t;
}

Tensor transpose(const Tensor& m) {
    Tensor t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
    return t;
}

}  // namespace

// ---------------------------------------------------------------- ParamStore

Parameter& ParamStore::add(const std::string& path, Tensor init, bool trainable) {
    if (params_.count(path)) throw ContractError("ParamStore::add", "duplicate parameter " + path);
    Parameter p;
    p.grad = Tensor(init.rows(), init.cols());
    p.value = std::move(init);
    p.trainable = trainable;
    return params_.emplace(path, std::move(p)).first->second;
}

Parameter& ParamStore::at(const std::string& path) {
    auto it = params_.find(path);
    if (it == params_.end()) throw ContractError("ParamStore::at", "unknown parameter " + path);
    return it->second;
}

const Parameter& ParamStore::at(const std::string& path) const {
    auto it = params_.find(path);
    if (it == params_.end()) throw ContractError("ParamStore::at", "unknown parameter " + path);
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [_, p] : params_) p.grad.fill(0.0);
}

std::size_t ParamStore::trainable_scalars() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_)
        if (p.trainable) n += p.value.size();
    return n;
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
    store.step += 1;
    const double t = static_cast<double>(store.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [path, p] : store.params()) {
        if (!p.trainable) continue;
        auto& m = store.first_moment[path];
        auto& v = store.second_moment[path];
        if (!m.same_shape(p.value)) m = Tensor(p.value.rows(), p.value.cols());
        if (!v.same_shape(p.value)) v = Tensor(p.value.rows(), p.value.cols());
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

// ---------------------------------------------------------------- Tape

const Tensor& Value::data() const { return tape_->value(id_); }
const Tensor& Value::grad() const { return tape_->nodes_[id_].grad; }

Value Tape::push(Tensor value, bool requires_grad, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = grad_enabled_ && requires_grad;
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Value(this, nodes_.size() - 1);
}

Value Tape::constant(Tensor t) { return push(std::move(t), false, nullptr); }

Value Tape::param(Parameter& p) {
    // Parameters are read in place; they must not change while recorded.
    Value v = push(Tensor(), p.trainable, nullptr);
    nodes_[v.id_].external = &p.value;
    if (nodes_[v.id_].requires_grad) nodes_[v.id_].param = &p;
    return v;
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    const Tensor& v = value(id);
    if (n.grad.empty() && !v.empty()) n.grad = Tensor(v.rows(), v.cols());
    return n.grad;
}

void Tape::backward(const Value& loss) {
    if (loss.tape_ != this) throw ContractError("backward", "loss was recorded on a different tape");
    const Tensor& lv = value(loss.id_);
    if (lv.rows() != 1 || lv.cols() != 1)
        throw ContractError("backward", "loss must be a 1x1 scalar, got " + shape_str(lv));
    if (!grad_enabled_) throw ContractError("backward", "tape was created with gradients disabled");
    if (nodes_[loss.id_].requires_grad) {
        grad_buffer(loss.id_)[0] = 1.0;
        for (std::size_t i = loss.id_ + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.requires_grad || n.grad.empty()) continue;
            if (n.backward) n.backward(*this, i);
            if (n.param) simd::axpy(n.grad.size(), 1.0, n.grad.data(), n.param->grad.data());
        }
    }
    clear();
}

void Tape::clear() { nodes_.clear(); }

// ---------------------------------------------------------------- primitives

Value linear(const Value& x, const Value& W, const Value& b) {
    Tape& tape = same_tape(x, W, "linear");
    if (b.tape() != &tape) throw ContractError("linear", "operands recorded on different tapes");
    const Tensor& xv = x.data();
    const Tensor& wv = W.data();
    const Tensor& bv = b.data();
    if (xv.cols() != wv.rows()) shape_error("linear", xv, wv);
    if (bv.rows() != 1 || bv.cols() != wv.cols()) shape_error("linear", wv, bv);
    const std::size_t n = xv.rows(), in = xv.cols(), out = wv.cols();
    Tensor y(n, out);
    for (std::size_t r = 0; r < n; ++r) std::copy(bv.data(), bv.data() + out, y.data() + r * out);
    simd::gemm(n, out, in, xv.data(), in, 1, wv.data(), out, y.data(), out);

    const std::size_t xi = x.id(), wi = W.id(), bi = b.id();
    const bool rg = tape.requires_grad(xi) || tape.requires_grad(wi) || tape.requires_grad(bi);
    return tape.push(std::move(y), rg, [xi, wi, bi, n, in, out](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        if (t.requires_grad(xi)) {
            const Tensor wt = transpose(t.value(wi));
            simd::gemm(n, in, out, dy.data(), out, 1, wt.data(), in, t.grad_buffer(xi).data(), in);
        }
        if (t.requires_grad(wi)) {
            // dW(in x out) += x^T dy; A(r, p) = x(p, r).
            simd::gemm(in, out, n, t.value(xi).data(), 1, in, dy.data(), out, t.grad_buffer(wi).data(), out);
        }
        if (t.requires_grad(bi)) {
            Tensor& db = t.grad_buffer(bi);
            for (std::size_t r = 0; r < n; ++r) simd::axpy(out, 1.0, dy.data() + r * out, db.data());
        }
    });
}

namespace {

template <class F, class G>
Value elementwise(const Value& x, const char* op, F forward, G derivative) {
    Tape& tape = tape_of(x, op);
    const Tensor& xv = x.data();
    Tensor y(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = forward(xv[i]);
    const std::size_t xi = x.id();
    return tape.push(std::move(y), tape.requires_grad(xi), [xi, derivative](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        const Tensor& xv = t.value(xi);
        Tensor& dx = t.grad_buffer(xi);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * derivative(xv[i]);
    });
}

}  // namespace

Value relu(const Value& x) {
    return elementwise(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Value sin(const Value& x) {
    return elementwise(
        x, "sin", [](double v) { return std::sin(v); }, [](double v) { return std::cos(v); });
}

Value cos(const Value& x) {
    return elementwise(
        x, "cos", [](double v) { return std::cos(v); }, [](double v) { return -std::sin(v); });
}

Value scale(const Value& x, double c) {
    Tape& tape = tape_of(x, "scale");
    Tensor y = x.data();
    for (auto& v : y.values()) v *= c;
    const std::size_t xi = x.id();
    return tape.push(std::move(y), tape.requires_grad(xi), [xi, c](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        simd::axpy(dy.size(), c, dy.data(), t.grad_buffer(xi).data());
    });
}

Value add(const Value& a, const Value& b) {
    Tape& tape = same_tape(a, b, "add");
    if (!a.data().same_shape(b.data())) shape_error("add", a.data(), b.data());
    Tensor y = a.data();
    simd::axpy(y.size(), 1.0, b.data().data(), y.data());
    const std::size_t ai = a.id(), bi = b.id();
    const bool rg = tape.requires_grad(ai) || tape.requires_grad(bi);
    return tape.push(std::move(y), rg, [ai, bi](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        if (t.requires_grad(ai)) simd::axpy(dy.size(), 1.0, dy.data(), t.grad_buffer(ai).data());
        if (t.requires_grad(bi)) simd::axpy(dy.size(), 1.0, dy.data(), t.grad_buffer(bi).data());
    });
}

Value add_constant(const Value& x, const Tensor& c) {
    Tape& tape = tape_of(x, "add_constant");
    if (!x.data().same_shape(c)) shape_error("add_constant", x.data(), c);
    Tensor y = x.data();
    simd::axpy(y.size(), 1.0, c.data(), y.data());
    const std::size_t xi = x.id();
    return tape.push(std::move(y), tape.requires_grad(xi), [xi](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        simd::axpy(dy.size(), 1.0, dy.data(), t.grad_buffer(xi).data());
    });
}

Value concat(const std::vector<Value>& xs) {
    if (xs.empty()) throw ContractError("concat", "no inputs");
    Tape& tape = tape_of(xs.front(), "concat");
    const std::size_t rows = xs.front().rows();
    std::size_t cols = 0;
    bool rg = false;
    for (const auto& v : xs) {
        if (v.tape() != &tape) throw ContractError("concat", "operands recorded on different tapes");
        if (v.rows() != rows) shape_error("concat", xs.front().data(), v.data());
        cols += v.cols();
        rg = rg || tape.requires_grad(v.id());
    }
    Tensor y(rows, cols);
    std::vector<std::size_t> ids, offsets, widths;
    std::size_t off = 0;
    for (const auto& v : xs) {
        const Tensor& xv = v.data();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(xv.data() + r * xv.cols(), xv.data() + (r + 1) * xv.cols(), y.data() + r * cols + off);
        ids.push_back(v.id());
        offsets.push_back(off);
        widths.push_back(xv.cols());
        off += xv.cols();
    }
    return tape.push(std::move(y), rg, [ids, offsets, widths, rows, cols](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!t.requires_grad(ids[k])) continue;
            Tensor& dx = t.grad_buffer(ids[k]);
            for (std::size_t r = 0; r < rows; ++r)
                simd::axpy(widths[k], 1.0, dy.data() + r * cols + offsets[k], dx.data() + r * widths[k]);
        }
    });
}

Value segment_max_pool(const Value& x, std::size_t segment) {
    Tape& tape = tape_of(x, "segment_max_pool");
    const Tensor& xv = x.data();
    if (segment == 0 || xv.rows() == 0 || xv.rows() % segment != 0)
        throw ContractError("segment_max_pool", "cannot split " + shape_str(xv) + " into blocks of " +
                                                    std::to_string(segment) + " rows");
    const std::size_t cols = xv.cols(), blocks = xv.rows() / segment;
    Tensor y(blocks, cols);
    std::vector<std::size_t> arg(blocks * cols);
    for (std::size_t s = 0; s < blocks; ++s) {
        double* ys = y.data() + s * cols;
        std::size_t* as = arg.data() + s * cols;
        const std::size_t r0 = s * segment;
        for (std::size_t c = 0; c < cols; ++c) {
            ys[c] = xv(r0, c);
            as[c] = r0;
        }
        for (std::size_t r = r0 + 1; r < r0 + segment; ++r) {
            const double* row = xv.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                if (row[c] > ys[c]) {
                    ys[c] = row[c];
                    as[c] = r;
                }
            }
        }
    }
    const std::size_t xi = x.id();
    return tape.push(std::move(y), tape.requires_grad(xi), [xi, arg = std::move(arg), cols](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        Tensor& dx = t.grad_buffer(xi);
        for (std::size_t k = 0; k < arg.size(); ++k) dx(arg[k], k % cols) += dy[k];
    });
}

Value max_pool_points(const Value& x) { return segment_max_pool(x, x.rows()); }

Value mean_pool_nodes(const Value& x) {
    Tape& tape = tape_of(x, "mean_pool_nodes");
    const Tensor& xv = x.data();
    if (xv.rows() == 0) throw ContractError("mean_pool_nodes", "empty node axis");
    const std::size_t rows = xv.rows(), cols = xv.cols();
    Tensor y(1, cols);
    for (std::size_t r = 0; r < rows; ++r) simd::axpy(cols, 1.0, xv.data() + r * cols, y.data());
    for (auto& v : y.values()) v /= static_cast<double>(rows);
    const std::size_t xi = x.id();
    return tape.push(std::move(y), tape.requires_grad(xi), [xi, rows, cols](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        Tensor& dx = t.grad_buffer(xi);
        const double w = 1.0 / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) simd::axpy(cols, w, dy.data(), dx.data() + r * cols);
    });
}

Value gather_rows(const Value& x, const std::vector<std::size_t>& index) {
    Tape& tape = tape_of(x, "gather_rows");
    const Tensor& xv = x.data();
    const std::size_t cols = xv.cols();
    Tensor y(index.size(), cols);
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] >= xv.rows())
            throw ContractError("gather_rows", "row index " + std::to_string(index[r]) + " out of range for " +
                                                   shape_str(xv));
        std::copy(xv.data() + index[r] * cols, xv.data() + (index[r] + 1) * cols, y.data() + r * cols);
    }
    const std::size_t xi = x.id();
    return tape.push(std::move(y), tape.requires_grad(xi), [xi, index, cols](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        Tensor& dx = t.grad_buffer(xi);
        for (std::size_t r = 0; r < index.size(); ++r)
            simd::axpy(cols, 1.0, dy.data() + r * cols, dx.data() + index[r] * cols);
    });
}

Value neighbor_mean(const Value& messages, std::size_t n) {
    Tape& tape = tape_of(messages, "neighbor_mean");
    const Tensor& mv = messages.data();
    if (n == 0) throw ContractError("neighbor_mean", "n must be >= 1");
    const std::size_t deg = n - 1;
    if (mv.rows() != n * deg)
        throw ContractError("neighbor_mean", "expected " + std::to_string(n * deg) + " message rows, got " +
                                                 shape_str(mv));
    const std::size_t cols = mv.cols();
    Tensor y(n, cols);
    if (deg > 0) {
        std::vector<double> buf(deg);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < cols; ++c) {
                for (std::size_t j = 0; j < deg; ++j) buf[j] = mv(i * deg + j, c);
                std::sort(buf.begin(), buf.end());
                double s = 0.0;
                for (double v : buf) s += v;
                y(i, c) = s / static_cast<double>(deg);
            }
        }
    }
    const std::size_t mi = messages.id();
    return tape.push(std::move(y), tape.requires_grad(mi) && deg > 0, [mi, n, deg, cols](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        Tensor& dm = t.grad_buffer(mi);
        const double w = 1.0 / static_cast<double>(deg);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < deg; ++j) simd::axpy(cols, w, dy.data() + i * cols, dm.data() + (i * deg + j) * cols);
    });
}

Value square_norm(const Value& x) {
    Tape& tape = tape_of(x, "square_norm");
    Tensor y(1, 1);
    y[0] = squared_norm(x.data());
    const std::size_t xi = x.id();
    return tape.push(std::move(y), tape.requires_grad(xi), [xi](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        simd::axpy(t.value(xi).size(), 2.0 * g, t.value(xi).data(), t.grad_buffer(xi).data());
    });
}

PairIndex complete_graph_pairs(std::size_t n) {
    PairIndex p;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) {
                p.receiver.push_back(i);
                p.sender.push_back(j);
            }
    return p;
}

}  // namespace scorepa::nn
