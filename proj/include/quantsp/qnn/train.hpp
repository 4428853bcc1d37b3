#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "quantsp/common.hpp"
#include "quantsp/datagen.hpp"
#include "quantsp/qnn/loss.hpp"
#include "quantsp/qnn/network.hpp"
#include "quantsp/rng.hpp"

namespace quantsp {

struct TrainConfig {
    int batch_size = 128;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";  // adam | adagrad | rmsprop
    double dropout = 0.0;            // hidden-activation drop probability
    int epochs = 300;
    int hidden_width = 64;
    int n_hidden_layers = 1;
    std::uint64_t seed = 1;
    double validation_fraction = 0.2;
    int patience = 30;        // epochs without validation improvement; <= 0 disables
    std::vector<double> tau;  // empty: 50 levels from 0.01 to 0.99
};

inline void validate_train_config(const TrainConfig& c) {
    if (c.batch_size < 1) throw Error("batch size must be positive");
    if (!(c.learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (c.optimizer != "adam" && c.optimizer != "adagrad" && c.optimizer != "rmsprop")
        throw Error("unknown optimizer '" + c.optimizer + "'");
    if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw Error("dropout must lie in [0, 1)");
    if (c.epochs < 1) throw Error("epochs must be positive");
    if (c.hidden_width < 1 || c.n_hidden_layers < 1) throw Error("hidden shape must be positive");
    if (!(c.validation_fraction > 0.0 && c.validation_fraction <= 0.5))
        throw Error("validation fraction must lie in (0, 0.5]");
}

struct TrainReport {
    double final_train_loss = 0.0;       // original target units
    double final_validation_loss = 0.0;  // original target units, best epoch
    int best_epoch = -1;
    int epochs_run = 0;
    std::vector<double> loss_curve;  // per-epoch validation loss, original units
    TrainConfig config;
};

inline std::size_t parameter_count(const QuantileNetwork& net) {
    std::size_t n = 0;
    for (const auto& l : net.layers) n += l.weight.size() + l.bias.size();
    return n;
}

inline std::vector<double> get_parameters(const QuantileNetwork& net) {
    std::vector<double> theta;
    theta.reserve(parameter_count(net));
    for (const auto& l : net.layers) {
        theta.insert(theta.end(), l.weight.begin(), l.weight.end());
        theta.insert(theta.end(), l.bias.begin(), l.bias.end());
    }
    return theta;
}

inline void set_parameters(QuantileNetwork& net, const std::vector<double>& theta) {
    if (theta.size() != parameter_count(net))
        throw DimensionMismatch("parameter vector has wrong length");
    std::size_t at = 0;
    for (auto& l : net.layers) {
        std::copy_n(theta.begin() + at, l.weight.size(), l.weight.begin());
        at += l.weight.size();
        std::copy_n(theta.begin() + at, l.bias.size(), l.bias.begin());
        at += l.bias.size();
    }
}

namespace detail {

struct Grads {
    std::vector<std::vector<double>> dweight, dbias;

    void match(const QuantileNetwork& net) {
        dweight.resize(net.layers.size());
        dbias.resize(net.layers.size());
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            dweight[l].assign(net.layers[l].weight.size(), 0.0);
            dbias[l].assign(net.layers[l].bias.size(), 0.0);
        }
    }
    void zero() {
        for (auto& g : dweight) std::fill(g.begin(), g.end(), 0.0);
        for (auto& g : dbias) std::fill(g.begin(), g.end(), 0.0);
    }
};

struct Buffers {
    std::vector<std::vector<double>> z;     // preactivations per layer
    std::vector<std::vector<double>> a;     // a[l] feeds layer l; a[0] is the input
    std::vector<std::vector<double>> keep;  // inverted-dropout factors per hidden layer
    std::vector<double> pred;               // scaled head outputs
    std::vector<double> dpred;              // dL/dpred
    std::vector<std::vector<double>> delta; // dL/dz per layer

    void match(const QuantileNetwork& net) {
        const std::size_t L = net.layers.size();
        z.resize(L);
        delta.resize(L);
        a.resize(L);
        keep.assign(L, {});
        for (std::size_t l = 0; l < L; ++l) {
            z[l].assign(net.layers[l].n_out, 0.0);
            delta[l].assign(net.layers[l].n_out, 0.0);
            a[l].assign(net.layers[l].n_in, 0.0);
            if (l + 1 < L) keep[l].assign(net.layers[l].n_out, 1.0);
        }
        pred.assign(net.layers.back().n_out, 0.0);
        dpred.assign(net.layers.back().n_out, 0.0);
    }
};

// One sample forward in scaled space. Training mode multiplies hidden
// activations by Bernoulli(1 - dropout) / (1 - dropout), so inference uses
// the weights as stored.
inline void forward_one(const QuantileNetwork& net, const std::vector<double>& x_scaled,
                        Buffers& B, bool train_mode, double dropout, Rng* rng) {
    const int L = int(net.layers.size());
    B.a[0] = x_scaled;
    for (int l = 0; l < L; ++l) {
        const Layer& layer = net.layers[l];
        const auto& in = B.a[l];
        auto& z = B.z[l];
        for (int j = 0; j < layer.n_out; ++j) {
            double s = layer.bias[j];
            const double* wrow = layer.weight.data() + std::size_t(j) * layer.n_in;
            for (int i = 0; i < layer.n_in; ++i) s += wrow[i] * in[i];
            z[j] = s;
        }
        if (l + 1 < L) {
            auto& out = B.a[l + 1];
            auto& keep = B.keep[l];
            for (int j = 0; j < layer.n_out; ++j) {
                double factor = 1.0;
                if (train_mode && dropout > 0.0)
                    factor = rng->bernoulli(dropout) ? 0.0 : 1.0 / (1.0 - dropout);
                keep[j] = factor;
                out[j] = std::max(0.0, z[j]) * factor;
            }
        }
    }
    const auto& zout = B.z[L - 1];
    if (net.kind == NetKind::Qnn) {
        B.pred = zout;
    } else {
        B.pred[0] = zout[0];
        for (std::size_t k = 1; k < zout.size(); ++k)
            B.pred[k] = B.pred[k - 1] + std::max(0.0, zout[k]);
    }
}

// Backprop for the sample most recently run through forward_one; B.dpred must
// hold dL/dpred. Accumulates into G.
inline void backward_one(const QuantileNetwork& net, Buffers& B, Grads& G) {
    const int L = int(net.layers.size());
    {
        auto& d = B.delta[L - 1];
        const auto& zout = B.z[L - 1];
        if (net.kind == NetKind::Qnn) {
            d = B.dpred;
        } else {
            // pred_k = z_0 + sum_{j<=k} relu(z_j): suffix sums flow to each node
            double suffix = 0.0;
            for (int k = int(zout.size()) - 1; k >= 0; --k) {
                suffix += B.dpred[k];
                d[k] = k == 0 ? suffix : (zout[k] > 0.0 ? suffix : 0.0);
            }
        }
    }
    for (int l = L - 1; l >= 0; --l) {
        const Layer& layer = net.layers[l];
        const auto& d = B.delta[l];
        const auto& in = B.a[l];
        auto& dw = G.dweight[l];
        auto& db = G.dbias[l];
        for (int j = 0; j < layer.n_out; ++j) {
            double dj = d[j];
            if (dj == 0.0) continue;
            double* dwrow = dw.data() + std::size_t(j) * layer.n_in;
            for (int i = 0; i < layer.n_in; ++i) dwrow[i] += dj * in[i];
            db[j] += dj;
        }
        if (l == 0) break;
        auto& dprev = B.delta[l - 1];
        const auto& zprev = B.z[l - 1];
        const auto& keep = B.keep[l - 1];
        for (int i = 0; i < layer.n_in; ++i) {
            double s = 0.0;
            for (int j = 0; j < layer.n_out; ++j) s += layer.w(j, i) * d[j];
            dprev[i] = zprev[i] > 0.0 ? s * keep[i] : 0.0;
        }
    }
}

// Per-parameter adaptive step; layout matches get_parameters order.
struct Optimizer {
    std::string method;
    double lr = 1e-3;
    std::int64_t t = 0;
    std::vector<double> m, v;

    Optimizer(const std::string& method_, double lr_, std::size_t n)
        : method(method_), lr(lr_), m(n, 0.0), v(n, 0.0) {}

    void step(QuantileNetwork& net, const Grads& G) {
        ++t;
        constexpr double eps = 1e-8;
        constexpr double beta1 = 0.9, beta2 = 0.999, rho = 0.9;
        const double c1 = 1.0 - std::pow(beta1, double(t));
        const double c2 = 1.0 - std::pow(beta2, double(t));
        std::size_t at = 0;
        auto update = [&](double& w, double g) {
            if (method == "adam") {
                m[at] = beta1 * m[at] + (1.0 - beta1) * g;
                v[at] = beta2 * v[at] + (1.0 - beta2) * g * g;
                w -= lr * (m[at] / c1) / (std::sqrt(v[at] / c2) + eps);
            } else if (method == "adagrad") {
                v[at] += g * g;
                w -= lr * g / (std::sqrt(v[at]) + eps);
            } else {  // rmsprop
                v[at] = rho * v[at] + (1.0 - rho) * g * g;
                w -= lr * g / (std::sqrt(v[at]) + eps);
            }
            ++at;
        };
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            auto& layer = net.layers[l];
            for (std::size_t i = 0; i < layer.weight.size(); ++i)
                update(layer.weight[i], G.dweight[l][i]);
            for (std::size_t i = 0; i < layer.bias.size(); ++i)
                update(layer.bias[i], G.dbias[l][i]);
        }
    }
};

// Mean pinball loss over the indexed rows, scaled space, dropout off.
inline double subset_loss(const QuantileNetwork& net,
                          const std::vector<std::vector<double>>& xs,
                          const std::vector<double>& ys,
                          const std::vector<std::size_t>& idx, Buffers& B) {
    if (idx.empty()) throw Error("loss over an empty subset");
    double sum = 0.0;
    for (std::size_t i : idx) {
        forward_one(net, xs[i], B, false, 0.0, nullptr);
        for (std::size_t k = 0; k < net.tau.size(); ++k)
            sum += pinball_term(ys[i] - B.pred[k], net.tau[k]);
    }
    return sum / (double(idx.size()) * double(net.tau.size()));
}

}  // namespace detail

// Exact pinball-loss gradient for a batch in scaled space with dropout off,
// flattened in get_parameters order. The finite-difference suite checks this.
inline std::pair<double, std::vector<double>> loss_and_gradient(
    const QuantileNetwork& net, const std::vector<std::vector<double>>& xs_scaled,
    const std::vector<double>& ys_scaled) {
    if (xs_scaled.size() != ys_scaled.size() || xs_scaled.empty())
        throw DimensionMismatch("batch inputs and targets must pair up");
    for (const auto& row : xs_scaled)
        if (int(row.size()) != net.n_inputs())
            throw DimensionMismatch("batch row has wrong dimension");
    detail::Buffers B;
    B.match(net);
    detail::Grads G;
    G.match(net);
    const double norm = 1.0 / (double(xs_scaled.size()) * double(net.tau.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < xs_scaled.size(); ++i) {
        detail::forward_one(net, xs_scaled[i], B, false, 0.0, nullptr);
        for (std::size_t k = 0; k < net.tau.size(); ++k) {
            double err = ys_scaled[i] - B.pred[k];
            sum += pinball_term(err, net.tau[k]);
            B.dpred[k] = pinball_term_grad(err, net.tau[k]) * norm;
        }
        detail::backward_one(net, B, G);
    }
    std::vector<double> flat;
    flat.reserve(parameter_count(net));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        flat.insert(flat.end(), G.dweight[l].begin(), G.dweight[l].end());
        flat.insert(flat.end(), G.dbias[l].begin(), G.dbias[l].end());
    }
    return {sum * norm, std::move(flat)};
}

// Fresh network with the requested shape: symmetric uniform fan-in weights,
// zero biases, input scaling from the feature box (binaries untouched).
inline QuantileNetwork init_network(const std::vector<FirstStageVar>& features,
                                    NetKind kind, const TrainConfig& cfg, Rng& rng) {
    QuantileNetwork net;
    net.kind = kind;
    net.tau = cfg.tau.empty() ? default_tau_grid() : cfg.tau;
    validate_tau(net.tau);
    for (const auto& f : features) {
        if (!std::isfinite(f.lower) || !std::isfinite(f.upper))
            throw UnboundedInput("feature '" + f.name + "' needs a finite box for scaling");
        if (f.kind == milp::VarKind::Binary || !(f.upper > f.lower))
            net.input_scale.push_back({0.0, 1.0});
        else
            net.input_scale.push_back({f.lower, f.upper - f.lower});
    }
    std::vector<int> widths;
    widths.push_back(int(features.size()));
    for (int l = 0; l < cfg.n_hidden_layers; ++l) widths.push_back(cfg.hidden_width);
    widths.push_back(int(net.tau.size()));
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer layer;
        layer.n_in = widths[l];
        layer.n_out = widths[l + 1];
        layer.weight.resize(std::size_t(layer.n_in) * layer.n_out);
        layer.bias.assign(layer.n_out, 0.0);
        double bound = 1.0 / std::sqrt(double(layer.n_in));
        for (auto& w : layer.weight) w = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

// Minibatch pinball-loss descent with a held-out validation split, inverted
// dropout, and best-validation-snapshot early stopping. Deterministic for a
// fixed config.
inline std::pair<QuantileNetwork, TrainReport> train(const Dataset& ds, NetKind kind,
                                                     TrainConfig cfg) {
    validate_train_config(cfg);
    if (ds.size() < 2) throw Error("training needs at least two samples");
    const std::size_t n = ds.size();

    Rng rng(cfg.seed);
    QuantileNetwork net = init_network(ds.features, kind, cfg, rng);

    // split
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::size_t n_val = std::clamp<std::size_t>(
        std::size_t(std::lround(double(n) * cfg.validation_fraction)), 1, n - 1);
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

    // target standardization over the training split only
    double mean = 0.0;
    for (std::size_t i : train_idx) mean += ds.samples[i].v;
    mean /= double(train_idx.size());
    double var = 0.0;
    for (std::size_t i : train_idx) {
        double d = ds.samples[i].v - mean;
        var += d * d;
    }
    double sd = std::sqrt(var / double(train_idx.size()));
    net.target_scale = {mean, sd > 1e-12 ? sd : 1.0};

    std::vector<std::vector<double>> xs(n);
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = scale_input(net, ds.samples[i].x);
        ys[i] = (ds.samples[i].v - net.target_scale.shift) / net.target_scale.scale;
    }

    detail::Buffers B;
    B.match(net);
    detail::Grads G;
    G.match(net);
    detail::Optimizer opt(cfg.optimizer, cfg.learning_rate, parameter_count(net));
    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, train_idx.size());
    const double to_original = net.target_scale.scale;

    TrainReport report;
    report.config = cfg;
    double best_val = kInf;
    std::vector<Layer> best_layers = net.layers;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(train_idx);
        for (std::size_t at = 0; at < train_idx.size(); at += batch) {
            std::size_t stop = std::min(at + batch, train_idx.size());
            G.zero();
            const double norm = 1.0 / (double(stop - at) * double(net.tau.size()));
            double batch_loss = 0.0;
            for (std::size_t b = at; b < stop; ++b) {
                std::size_t i = train_idx[b];
                detail::forward_one(net, xs[i], B, true, cfg.dropout, &rng);
                for (std::size_t k = 0; k < net.tau.size(); ++k) {
                    double err = ys[i] - B.pred[k];
                    batch_loss += pinball_term(err, net.tau[k]);
                    B.dpred[k] = pinball_term_grad(err, net.tau[k]) * norm;
                }
                detail::backward_one(net, B, G);
            }
            if (!std::isfinite(batch_loss))
                throw Diverged("non-finite loss at epoch " + std::to_string(epoch));
            opt.step(net, G);
        }

        double val = detail::subset_loss(net, xs, ys, val_idx, B) * to_original;
        if (!std::isfinite(val))
            throw Diverged("non-finite validation loss at epoch " + std::to_string(epoch));
        report.loss_curve.push_back(val);
        report.epochs_run = epoch + 1;
        if (val < best_val) {
            best_val = val;
            best_layers = net.layers;
            report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience && cfg.patience > 0) {
            break;
        }
    }

    net.layers = std::move(best_layers);
    report.final_validation_loss = best_val;
    report.final_train_loss = detail::subset_loss(net, xs, ys, train_idx, B) * to_original;
    validate_network(net);
    return {std::move(net), std::move(report)};
}

}  // namespace quantsp
