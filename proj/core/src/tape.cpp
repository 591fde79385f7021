#include "gaitma/tape.hpp"

#include "gaitma/errors.hpp"

namespace gaitma {

Parameter& ParameterStore::add(std::string name, Tensor init) {
    if (by_name_.count(name) != 0) {
        throw InvalidArgument("duplicate parameter name: " + name);
    }
    params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
    Parameter* p = params_.back().get();
    by_name_.emplace(p->name, p);
    return *p;
}

Parameter* ParameterStore::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::get(const std::string& name) {
    Parameter* p = find(name);
    if (p == nullptr) throw InvalidArgument("unknown parameter: " + name);
    return *p;
}

std::int64_t ParameterStore::scalar_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

void ParameterStore::zero_grads() {
    for (auto& p : params_) p->grad.fill(0.0);
}

const Tensor& Var::value() const { return tape->value(id); }
const std::vector<int>& Var::dims() const { return tape->value(id).dims(); }

double Var::scalar() const {
    const Tensor& v = tape->value(id);
    if (v.size() != 1) throw InvalidArgument("Var::scalar on tensor of size " + std::to_string(v.size()));
    return v.data()[0];
}

Var Tape::input(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
    Node n;
    n.value = p.value;
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    param_bindings_.emplace_back(id, &p);
    return Var{this, id};
}

Var Tape::node(Tensor value, std::vector<int> parents, BackwardFn backward) {
    if (!value.all_finite()) throw ContractError("op produced a non-finite value");
    Node n;
    n.value = std::move(value);
    for (int pid : parents) {
        if (pid < 0 || pid >= static_cast<int>(nodes_.size())) {
            throw InvalidArgument("tape node parent out of range");
        }
        if (nodes_[static_cast<std::size_t>(pid)].requires_grad) n.requires_grad = true;
    }
    n.parents = std::move(parents);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor(n.value.dims());
    return n.grad;
}

void Tape::backward(Var root) {
    if (root.tape != this) throw InvalidArgument("backward: Var belongs to a different tape");
    if (value(root.id).size() != 1) {
        throw InvalidArgument("backward: root must hold a single scalar, got dims " +
                              dims_to_string(value(root.id).dims()));
    }
    grad(root.id).data()[0] = 1.0;
    for (int id = root.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.empty() || !n.backward) continue;
        if (!n.requires_grad) continue;
        n.backward(*this, id);
    }
    for (auto& [id, p] : param_bindings_) {
        if (id > root.id) continue;
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.empty()) continue;
        double* dst = p->grad.data();
        const double* src = n.grad.data();
        for (std::int64_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
    }
}

}  // namespace gaitma
