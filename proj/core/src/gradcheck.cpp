#include "gaitma/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gaitma/errors.hpp"

namespace gaitma {

namespace {

struct Eval {
    double value;
    std::uint64_t signature;
    std::vector<double> kinks;
};

struct ProbeTarget {
    int tensor;
    std::int64_t element;
};

// A probe is valid only if both displaced passes stay on the same smooth piece
// of the objective. Discrete switches (ReLU signs, pool argmax, hinge
// activity) are caught by the signature hash. Curvature blow-ups (sqrt near
// zero, vanishing pair distances) are caught by comparing the recorded kink
// inputs: the central-difference error of sqrt(v) scales like
// ((v+ - v-)/(2 v))^2 / 8, so a shift small relative to the base value keeps
// the probe well inside tolerance, and a large one means the probe actually
// excites the singularity.
bool same_smooth_piece(const Eval& up, const Eval& dn, std::uint64_t base_sig,
                       const std::vector<double>& base_kinks, double rel_shift) {
    if (up.signature != base_sig || dn.signature != base_sig) return false;
    if (up.kinks.size() != base_kinks.size() || dn.kinks.size() != base_kinks.size()) return false;
    for (std::size_t i = 0; i < base_kinks.size(); ++i) {
        double scale = std::max(std::fabs(base_kinks[i]), 1e-9);
        if (std::fabs(up.kinks[i] - dn.kinks[i]) > rel_shift * scale) return false;
    }
    return true;
}

// Shared probe loop: `read_grad` returns the analytic gradient for a target,
// `eval_at` evaluates the objective with one element displaced by delta.
GradCheckResult run_probes(const std::vector<ProbeTarget>& order, const GradCheckConfig& cfg,
                           std::uint64_t base_sig, const std::vector<double>& base_kinks,
                           const std::function<double(const ProbeTarget&)>& read_grad,
                           const std::function<Eval(const ProbeTarget&, double)>& eval_at) {
    GradCheckResult res;
    for (const ProbeTarget& pt : order) {
        if (cfg.probes > 0 && res.checked >= cfg.probes) break;
        Eval up = eval_at(pt, cfg.step);
        Eval dn = eval_at(pt, -cfg.step);
        if (!same_smooth_piece(up, dn, base_sig, base_kinks, cfg.curvature_rel_shift)) {
            ++res.skipped;
            continue;
        }
        double fd = (up.value - dn.value) / (2.0 * cfg.step);
        double analytic = read_grad(pt);
        double abs_err = std::fabs(fd - analytic);
        bool pass;
        double rel_err = 0.0;
        if (std::fabs(analytic) < cfg.abs_floor) {
            pass = abs_err < cfg.abs_tol;
        } else {
            rel_err = abs_err / std::fabs(analytic);
            pass = rel_err < cfg.rel_tol;
        }
        ++res.checked;
        res.max_abs_err = std::max(res.max_abs_err, abs_err);
        res.max_rel_err = std::max(res.max_rel_err, rel_err);
        if (!pass) {
            ++res.failed;
            if (res.first_failure.empty()) {
                std::ostringstream os;
                os << "tensor " << pt.tensor << " element " << pt.element << ": analytic " << analytic << " vs fd "
                   << fd << " (abs err " << abs_err << ")";
                res.first_failure = os.str();
            }
        }
    }
    return res;
}

std::vector<ProbeTarget> probe_order(const std::vector<std::int64_t>& sizes, const GradCheckConfig& cfg) {
    std::vector<ProbeTarget> order;
    for (std::size_t ti = 0; ti < sizes.size(); ++ti)
        for (std::int64_t e = 0; e < sizes[ti]; ++e) order.push_back({static_cast<int>(ti), e});
    if (cfg.probes > 0) {
        std::mt19937_64 rng(cfg.seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    return order;
}

}  // namespace

GradCheckResult check_gradients(const BuildWithInputs& build, const std::vector<Tensor>& inputs,
                                const GradCheckConfig& cfg) {
    if (inputs.empty()) throw InvalidArgument("check_gradients: no inputs");

    // Analytic pass.
    std::vector<Tensor> analytic;
    std::uint64_t base_sig;
    std::vector<double> base_kinks;
    {
        Tape t;
        std::vector<Var> leaves;
        for (const Tensor& in : inputs) leaves.push_back(t.input(in, true));
        Var loss = build(t, leaves);
        t.backward(loss);
        base_sig = t.signature();
        base_kinks = t.kinks();
        for (const Var& leaf : leaves)
            analytic.push_back(t.has_grad(leaf.id) ? t.grad(leaf.id) : Tensor(leaf.dims()));
    }

    std::vector<Tensor> work = inputs;
    auto eval_at = [&](const ProbeTarget& pt, double delta) {
        Tensor& target = work[static_cast<std::size_t>(pt.tensor)];
        double saved = target[pt.element];
        target[pt.element] = saved + delta;
        Tape t;
        std::vector<Var> leaves;
        for (const Tensor& in : work) leaves.push_back(t.input(in, false));
        Var loss = build(t, leaves);
        target[pt.element] = saved;
        return Eval{loss.value()[0], t.signature(), t.kinks()};
    };
    auto read_grad = [&](const ProbeTarget& pt) {
        return analytic[static_cast<std::size_t>(pt.tensor)][pt.element];
    };

    std::vector<std::int64_t> sizes;
    for (const Tensor& in : inputs) sizes.push_back(in.size());
    return run_probes(probe_order(sizes, cfg), cfg, base_sig, base_kinks, read_grad, eval_at);
}

GradCheckResult check_param_gradients(const BuildWithParams& build, ParameterStore& store,
                                      const GradCheckConfig& cfg) {
    if (store.count() == 0) throw InvalidArgument("check_param_gradients: empty store");

    store.zero_grads();
    std::vector<Tensor> analytic;
    std::uint64_t base_sig;
    std::vector<double> base_kinks;
    {
        Tape t;
        Var loss = build(t);
        t.backward(loss);
        base_sig = t.signature();
        base_kinks = t.kinks();
        for (const auto& p : store.all()) analytic.push_back(p->grad);
    }

    auto eval_at = [&](const ProbeTarget& pt, double delta) {
        Parameter& p = *store.all()[static_cast<std::size_t>(pt.tensor)];
        double saved = p.value[pt.element];
        p.value[pt.element] = saved + delta;
        Tape t;
        Var loss = build(t);
        p.value[pt.element] = saved;
        return Eval{loss.value()[0], t.signature(), t.kinks()};
    };
    auto read_grad = [&](const ProbeTarget& pt) {
        return analytic[static_cast<std::size_t>(pt.tensor)][pt.element];
    };

    std::vector<std::int64_t> sizes;
    for (const auto& p : store.all()) sizes.push_back(p->value.size());
    return run_probes(probe_order(sizes, cfg), cfg, base_sig, base_kinks, read_grad, eval_at);
}

}  // namespace gaitma
