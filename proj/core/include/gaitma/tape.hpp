#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "gaitma/tensor.hpp"

namespace gaitma {

/// Named trainable tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor(value.dims())) {}
};

/// Owns a model's parameters; names are unique, iteration follows
/// registration order (which fixes the initialization and checkpoint order).
class ParameterStore {
public:
    Parameter& add(std::string name, Tensor init);
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;
    Parameter& get(const std::string& name);

    const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
    std::size_t count() const { return params_.size(); }
    std::int64_t scalar_count() const;
    void zero_grads();

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, Parameter*> by_name_;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Tensor& value() const;
    const std::vector<int>& dims() const;
    double scalar() const;
};

/// Reverse-mode tape. Operations append nodes holding the forward value and a
/// closure that routes the node's gradient to its parents. backward() runs the
/// closures in reverse creation order, then adds leaf gradients into any bound
/// Parameters.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int self_id)>;

    Var input(Tensor value, bool requires_grad = false);
    Var param(Parameter& p);
    Var node(Tensor value, std::vector<int> parents, BackwardFn backward);

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

    /// Gradient buffer of a node, allocated as zeros on first access.
    Tensor& grad(int id);
    bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }

    /// Seeds d(root)/d(root) = 1 (root must be scalar-sized), runs the
    /// reverse sweep, then accumulates into bound Parameter::grad buffers.
    void backward(Var root);

    /// Inputs of unbounded-curvature functions (sqrt arguments, pairwise
    /// distances that the backward pass divides by), recorded in execution
    /// order. The gradient checker compares these across its +h/-h passes and
    /// skips a probe when a value shifts by a meaningful fraction of itself;
    /// that is exactly the regime where finite differences lose accuracy.
    const std::vector<double>& kinks() const { return kinks_; }
    void note_kink(double value) { kinks_.push_back(value); }
    /// Smallest recorded kink input; diagnostic only.
    double kink_margin() const {
        double m = std::numeric_limits<double>::infinity();
        for (double v : kinks_) m = std::min(m, v);
        return m;
    }

    /// Hash of every discrete choice made during the forward pass (ReLU sign
    /// patterns, pooling argmax picks, hinge activity). Two forward passes
    /// with the same signature lie on the same smooth piece of the function,
    /// which is what makes a finite-difference probe between them valid.
    std::uint64_t signature() const { return signature_; }
    void sig_mix(std::uint64_t v) {
        signature_ ^= v + 0x9e3779b97f4a7c15ULL + (signature_ << 6) + (signature_ >> 2);
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<int> parents;
        BackwardFn backward;
        bool requires_grad = false;
    };

    std::deque<Node> nodes_;
    std::vector<std::pair<int, Parameter*>> param_bindings_;
    std::vector<double> kinks_;
    std::uint64_t signature_ = 0xcbf29ce484222325ULL;
};

}  // namespace gaitma
