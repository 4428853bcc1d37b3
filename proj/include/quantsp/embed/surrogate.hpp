#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "quantsp/common.hpp"
#include "quantsp/embed/bounds.hpp"
#include "quantsp/milp/model.hpp"
#include "quantsp/problems/problem.hpp"
#include "quantsp/qnn/network.hpp"

namespace quantsp {

enum class TailSide { Right, Left };

// Risk configuration of a surrogate problem. The tail indices receive weight
// lambda/|tail| on top of the 1/K mean weight every quantile carries; unset
// tail_side follows the problem sense (right tail of costs when minimizing,
// left tail of profits when maximizing). Unset delta leaves quantile crossing
// unconstrained.
struct SurrogateSpec {
    double lambda = 0.0;
    std::optional<double> alpha;
    std::optional<double> delta;
    std::optional<TailSide> tail_side;
};

// Indices k whose tau lies in the alpha-tail: tau_k > alpha on the right,
// tau_k < 1 - alpha on the left.
inline std::vector<int> tail_indices(const std::vector<double>& tau, double alpha,
                                     TailSide side) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0,1)");
    std::vector<int> out;
    for (int k = 0; k < int(tau.size()); ++k) {
        if (side == TailSide::Right ? tau[k] > alpha : tau[k] < 1.0 - alpha)
            out.push_back(k);
    }
    if (out.empty() || out.size() == tau.size())
        throw Error("alpha leaves no usable tail on this quantile grid");
    return out;
}

struct ReluEncoding {
    milp::VarRef a;
    std::optional<milp::VarRef> sigma;  // absent when the sign is fixed
};

// Big-M encoding of a = max(0, z). Any feasible assignment satisfies it
// exactly: sigma=1 forces a = z (and z >= 0), sigma=0 forces a = 0 (and
// z <= 0). Neurons whose range never crosses zero need no binary.
inline ReluEncoding encode_relu(milp::MipModel& model, const milp::LinExpr& z,
                                NeuronBounds b, const std::string& name) {
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.lo > b.hi)
        throw InvalidBounds("relu bounds are invalid for " + name);
    if (b.hi <= 0.0) return {model.add_continuous(name, 0.0, 0.0), std::nullopt};
    if (b.lo >= 0.0) {
        auto a = model.add_continuous(name, b.lo, b.hi);
        milp::LinExpr eq = z;
        eq.add(-1.0, a);
        model.add_constraint(eq, milp::Relation::Equal, 0.0, name + "_id");
        return {a, std::nullopt};
    }
    auto a = model.add_continuous(name, 0.0, b.hi);
    auto sigma = model.add_binary(name + "_on");
    milp::LinExpr below = z;
    below.add(-1.0, a);
    model.add_constraint(below, milp::Relation::LessEqual, 0.0, name + "_lb");
    milp::LinExpr above(a);
    above.add(z, -1.0);
    above.add(-b.lo, sigma);
    model.add_constraint(above, milp::Relation::LessEqual, -b.lo, name + "_ub");
    milp::LinExpr gate(a);
    gate.add(-b.hi, sigma);
    model.add_constraint(gate, milp::Relation::LessEqual, 0.0, name + "_gate");
    return {a, sigma};
}

struct EmbeddedSurrogate {
    milp::MipModel model;
    std::vector<milp::VarRef> x;
    std::vector<milp::VarRef> q;  // quantile outputs in original target units
    std::vector<milp::VarRef> sigma;
    ActivationBounds bounds;
    std::vector<int> tail;  // indices into q carrying the risk weight
};

// First-stage feasible set plus the network as constraints. The hidden
// layers are ReLU-encoded; a QNN head binds q_k affinely to the output
// preactivations with optional crossing slack, an IQNN head accumulates
// ReLU increments so its q are nondecreasing by construction. Everything
// downstream sees q in original units: the input scaling and the target
// affine live inside the constraint coefficients.
inline EmbeddedSurrogate build_surrogate(const TwoStageProblem& p,
                                         const QuantileNetwork& net,
                                         const SurrogateSpec& spec) {
    validate_network(net);
    if (net.n_inputs() != int(p.n_first()))
        throw DimensionMismatch("network expects " + std::to_string(net.n_inputs()) +
                                " inputs but problem '" + p.name + "' has " +
                                std::to_string(p.n_first()) + " first-stage variables");
    if (!(spec.lambda >= 0.0) || !std::isfinite(spec.lambda))
        throw Error("lambda must be finite and nonnegative");
    if (spec.lambda > 0.0 && !spec.alpha)
        throw Error("risk-averse surrogate needs an alpha level");
    if (spec.delta && !(*spec.delta >= 0.0))
        throw Error("crossing tolerance must be nonnegative");

    EmbeddedSurrogate es;
    es.x = add_first_stage_vars(es.model, p);
    add_first_stage_constraints(es.model, p, es.x);

    std::vector<std::pair<double, double>> box;
    for (const auto& v : p.first_stage) box.push_back({v.lower, v.upper});
    es.bounds = propagate_bounds(net, box);

    std::vector<milp::LinExpr> act(p.n_first());
    for (std::size_t j = 0; j < p.n_first(); ++j) {
        const auto& s = net.input_scale[j];
        act[j].add(1.0 / s.scale, es.x[j]);
        act[j] += -s.shift / s.scale;
    }

    const int depth = net.n_hidden_layers();
    for (int l = 0; l < depth; ++l) {
        const Layer& layer = net.layers[l];
        std::vector<milp::LinExpr> next(layer.n_out);
        for (int j = 0; j < layer.n_out; ++j) {
            milp::LinExpr z(layer.bias[j]);
            for (int i = 0; i < layer.n_in; ++i) z.add(act[i], layer.w(j, i));
            auto enc = encode_relu(es.model, z, es.bounds.pre[l][j],
                                   "a" + std::to_string(l + 1) + "_" + std::to_string(j));
            if (enc.sigma) es.sigma.push_back(*enc.sigma);
            next[j] = milp::LinExpr(enc.a);
        }
        act = std::move(next);
    }

    const Layer& head = net.layers[depth];
    const auto& head_bounds = es.bounds.pre[depth];
    const double ts = net.target_scale.scale, sh = net.target_scale.shift;
    const int K = net.n_quantiles();
    auto raw_range = [&](NeuronBounds b) {
        double a = ts * b.lo + sh, c = ts * b.hi + sh;
        return std::pair{std::min(a, c), std::max(a, c)};
    };

    std::vector<milp::LinExpr> z_out(K);
    for (int k = 0; k < K; ++k) {
        z_out[k] = milp::LinExpr(head.bias[k]);
        for (int i = 0; i < head.n_in; ++i) z_out[k].add(act[i], head.w(k, i));
    }

    if (net.kind == NetKind::Qnn) {
        for (int k = 0; k < K; ++k) {
            auto [lo, hi] = raw_range(head_bounds[k]);
            es.q.push_back(es.model.add_continuous("q" + std::to_string(k), lo, hi));
            milp::LinExpr bind = z_out[k];
            bind *= ts;
            bind.add(-1.0, es.q[k]);
            es.model.add_constraint(bind, milp::Relation::Equal, -sh);
        }
        if (spec.delta && std::isfinite(*spec.delta)) {
            for (int k = 0; k + 1 < K; ++k) {
                milp::LinExpr cross(es.q[k]);
                cross.add(-1.0, es.q[k + 1]);
                es.model.add_constraint(cross, milp::Relation::LessEqual, *spec.delta,
                                        "cross" + std::to_string(k));
            }
        }
    } else {
        auto [lo0, hi0] = raw_range(head_bounds[0]);
        es.q.push_back(es.model.add_continuous("q0", lo0, hi0));
        milp::LinExpr bind = z_out[0];
        bind *= ts;
        bind.add(-1.0, es.q[0]);
        es.model.add_constraint(bind, milp::Relation::Equal, -sh);
        double lo_acc = lo0, hi_acc = hi0;
        for (int k = 1; k < K; ++k) {
            auto enc = encode_relu(es.model, z_out[k], head_bounds[k],
                                   "dq" + std::to_string(k));
            if (enc.sigma) es.sigma.push_back(*enc.sigma);
            double a_lo = std::max(0.0, head_bounds[k].lo);
            double a_hi = std::max(0.0, head_bounds[k].hi);
            lo_acc += std::min(ts * a_lo, ts * a_hi);
            hi_acc += std::max(ts * a_lo, ts * a_hi);
            es.q.push_back(es.model.add_continuous("q" + std::to_string(k), lo_acc, hi_acc));
            milp::LinExpr inc(es.q[k]);
            inc.add(-1.0, es.q[k - 1]);
            inc.add(-ts, enc.a);
            es.model.add_constraint(inc, milp::Relation::Equal, 0.0);
        }
    }

    milp::LinExpr obj;
    for (std::size_t j = 0; j < p.n_first(); ++j)
        obj.add((1.0 + spec.lambda) * p.first_stage_cost[j], es.x[j]);
    for (int k = 0; k < K; ++k) obj.add(1.0 / K, es.q[k]);
    if (spec.lambda > 0.0) {
        TailSide side = spec.tail_side.value_or(
            p.sense == Sense::Maximize ? TailSide::Left : TailSide::Right);
        es.tail = tail_indices(net.tau, *spec.alpha, side);
        for (int k : es.tail) obj.add(spec.lambda / double(es.tail.size()), es.q[k]);
    }
    es.model.set_objective(obj, p.sense);
    return es;
}

}  // namespace quantsp
