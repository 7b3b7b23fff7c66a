#pragma once

// Define-by-run reverse-mode differentiation over dense row-major tensors.
//
// A Tape records every primitive evaluated during one forward pass; Value is a
// cheap handle to one recorded node. backward() walks the record in reverse
// creation order (a valid topological order), deposits cotangents into the
// Parameters that were read through Tape::param, and then clears the record.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "scorepa/matrix.hpp"

namespace scorepa::nn {

using Tensor = Matrix;

struct Parameter {
    Tensor value;
    Tensor grad;
    bool trainable = true;
};

/// Named parameters plus Adam state. std::map keeps a stable, sorted
/// iteration order, which fixes checkpoint layout and update order.
class ParamStore {
public:
    Parameter& add(const std::string& path, Tensor init, bool trainable = true);
    Parameter& at(const std::string& path);
    const Parameter& at(const std::string& path) const;
    bool contains(const std::string& path) const { return params_.count(path) != 0; }

    std::map<std::string, Parameter>& params() { return params_; }
    const std::map<std::string, Parameter>& params() const { return params_; }

    void zero_grads();
    std::size_t trainable_scalars() const;

    // Adam state: moments are created lazily on the first step.
    std::uint64_t step = 0;
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;

private:
    std::map<std::string, Parameter> params_;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update of every trainable parameter. Grads are left in
/// place; callers zero them.
void adam_step(ParamStore& store, const AdamConfig& cfg);

class Tape;

class Value {
public:
    Value() = default;
    const Tensor& data() const;
    const Tensor& grad() const;
    std::size_t rows() const { return data().rows(); }
    std::size_t cols() const { return data().cols(); }
    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    Value constant(Tensor t);
    /// Leaf reading a parameter's current value; its cotangent is added to
    /// p.grad by backward() when p is trainable.
    Value param(Parameter& p);

    /// Requires a 1 x 1 loss recorded on this tape; throws ContractError otherwise.
    void backward(const Value& loss);
    void clear();
    std::size_t size() const { return nodes_.size(); }

    // Building blocks for primitives.
    Value push(Tensor value, bool requires_grad, BackwardFn fn);
    const Tensor& value(std::size_t id) const {
        const Node& n = nodes_[id];
        return n.external ? *n.external : n.value;
    }
    const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Cotangent buffer of node id, allocated (zeroed) on first access.
    Tensor& grad_buffer(std::size_t id);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
        Parameter* param = nullptr;
        const Tensor* external = nullptr;  // parameter read in place
    };
    std::vector<Node> nodes_;
    bool grad_enabled_;

    friend class Value;
};

// Primitives. Shape errors are reported as ContractError naming the operation
// and the offending shapes.

/// x (n x in) * W (in x out) + b (1 x out).
Value linear(const Value& x, const Value& W, const Value& b);
Value relu(const Value& x);
Value sin(const Value& x);
Value cos(const Value& x);
Value scale(const Value& x, double c);
Value add(const Value& a, const Value& b);
Value add_constant(const Value& x, const Tensor& c);
/// Horizontal concatenation of equally tall inputs.
Value concat(const std::vector<Value>& xs);
/// Column-wise max over rows (the point axis); the cotangent flows to the
/// first maximizing row only.
Value max_pool_points(const Value& x);
/// x stacks x.rows() / segment blocks of `segment` rows; returns one max-pooled
/// row per block, in block order.
Value segment_max_pool(const Value& x, std::size_t segment);
/// Column-wise mean over rows (the node axis).
Value mean_pool_nodes(const Value& x);
/// out.row(i) = x.row(index[i]).
Value gather_rows(const Value& x, const std::vector<std::size_t>& index);
/// messages holds n(n-1) rows ordered by receiver i, then sender j != i
/// ascending. Returns n rows, each the mean of that receiver's n-1 messages;
/// zero rows when n == 1. The per-column sum is taken in sorted order, so the
/// result does not depend on how the senders are numbered.
Value neighbor_mean(const Value& messages, std::size_t n);
/// Sum of squares of all entries, as 1 x 1.
Value square_norm(const Value& x);

/// Row-index tables for directed pairs (i, j), i != j, in neighbor_mean order.
struct PairIndex {
    std::vector<std::size_t> receiver;
    std::vector<std::size_t> sender;
};
PairIndex complete_graph_pairs(std::size_t n);

}  // namespace scorepa::nn
