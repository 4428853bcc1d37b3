#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "quantsp/common.hpp"

namespace quantsp {

enum class NetKind { Qnn, Iqnn };

inline const char* to_string(NetKind k) { return k == NetKind::Qnn ? "qnn" : "iqnn"; }

inline NetKind net_kind_from_string(const std::string& s) {
    if (s == "qnn") return NetKind::Qnn;
    if (s == "iqnn") return NetKind::Iqnn;
    throw FormatError("unknown network kind '" + s + "'");
}

// raw = scaled * scale + shift
struct AffineScale {
    double shift = 0.0;
    double scale = 1.0;
};

struct Layer {
    int n_in = 0;
    int n_out = 0;
    std::vector<double> weight;  // row-major: weight[j * n_in + i]
    std::vector<double> bias;    // n_out

    double w(int j, int i) const { return weight[std::size_t(j) * n_in + i]; }
    double& w(int j, int i) { return weight[std::size_t(j) * n_in + i]; }
};

// Feed-forward quantile estimator: ReLU hidden layers, then either a plain
// affine head (qnn) or a base output plus ReLU increments accumulated across
// the quantile grid (iqnn), which makes the grid non-crossing by construction.
struct QuantileNetwork {
    NetKind kind = NetKind::Qnn;
    std::vector<Layer> layers;             // hidden layers, then the output layer
    std::vector<double> tau;               // strictly increasing, all in (0, 1)
    std::vector<AffineScale> input_scale;  // scaled_i = (x_i - shift_i) / scale_i
    AffineScale target_scale;              // q = scaled_pred * scale + shift

    int n_inputs() const { return layers.empty() ? 0 : layers.front().n_in; }
    int n_outputs() const { return layers.empty() ? 0 : layers.back().n_out; }
    int n_quantiles() const { return int(tau.size()); }
    int n_hidden_layers() const { return int(layers.size()) - 1; }
};

// n levels equally spaced from 0.01 to 0.99.
inline std::vector<double> default_tau_grid(int n = 50) {
    if (n < 1) throw Error("quantile grid needs at least one level");
    std::vector<double> tau(n);
    if (n == 1) {
        tau[0] = 0.5;
        return tau;
    }
    double step = 0.98 / (n - 1);
    for (int k = 0; k < n; ++k) tau[k] = 0.01 + step * k;
    tau.back() = 0.99;
    return tau;
}

inline void validate_tau(const std::vector<double>& tau) {
    if (tau.empty()) throw FormatError("quantile grid is empty");
    for (std::size_t k = 0; k < tau.size(); ++k) {
        if (!(tau[k] > 0.0 && tau[k] < 1.0))
            throw FormatError("quantile level " + std::to_string(tau[k]) +
                              " outside (0, 1)");
        if (k > 0 && !(tau[k] > tau[k - 1]))
            throw FormatError("quantile grid is not strictly increasing");
    }
}

inline void validate_network(const QuantileNetwork& net) {
    if (net.layers.empty()) throw FormatError("network has no layers");
    validate_tau(net.tau);
    int prev = net.layers.front().n_in;
    for (const auto& l : net.layers) {
        if (l.n_in != prev) throw FormatError("layer dimensions do not chain");
        if (l.n_in < 1 || l.n_out < 1) throw FormatError("empty layer");
        if (l.weight.size() != std::size_t(l.n_in) * l.n_out ||
            l.bias.size() != std::size_t(l.n_out))
            throw FormatError("layer storage does not match its dimensions");
        for (double w : l.weight)
            if (!std::isfinite(w)) throw FormatError("non-finite weight");
        for (double b : l.bias)
            if (!std::isfinite(b)) throw FormatError("non-finite bias");
        prev = l.n_out;
    }
    if (net.layers.back().n_out != net.n_quantiles())
        throw FormatError("output width differs from the quantile grid");
    if (net.input_scale.size() != std::size_t(net.n_inputs()))
        throw FormatError("input scaling does not match the input width");
    for (const auto& s : net.input_scale)
        if (!std::isfinite(s.shift) || !std::isfinite(s.scale) || s.scale == 0.0)
            throw FormatError("bad input scale");
    if (!std::isfinite(net.target_scale.shift) || !std::isfinite(net.target_scale.scale) ||
        net.target_scale.scale == 0.0)
        throw FormatError("bad target scale");
}

inline std::vector<double> scale_input(const QuantileNetwork& net,
                                       const std::vector<double>& x) {
    if (x.size() != net.input_scale.size())
        throw DimensionMismatch("input has wrong dimension");
    std::vector<double> s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        s[i] = (x[i] - net.input_scale[i].shift) / net.input_scale[i].scale;
    return s;
}

// Network output in scaled target units, for an already-scaled input.
inline std::vector<double> forward_scaled(const QuantileNetwork& net,
                                          const std::vector<double>& x_scaled) {
    if (int(x_scaled.size()) != net.n_inputs())
        throw DimensionMismatch("input has wrong dimension");
    std::vector<double> a = x_scaled, z;
    const int L = int(net.layers.size());
    for (int l = 0; l < L; ++l) {
        const Layer& layer = net.layers[l];
        z.assign(layer.n_out, 0.0);
        for (int j = 0; j < layer.n_out; ++j) {
            double s = layer.bias[j];
            for (int i = 0; i < layer.n_in; ++i) s += layer.w(j, i) * a[i];
            z[j] = s;
        }
        if (l + 1 < L) {
            a.resize(z.size());
            for (std::size_t j = 0; j < z.size(); ++j) a[j] = std::max(0.0, z[j]);
        }
    }
    if (net.kind == NetKind::Iqnn)
        for (std::size_t k = 1; k < z.size(); ++k)
            z[k] = z[k - 1] + std::max(0.0, z[k]);
    return z;
}

// Quantile estimates in original target units. The target un-scaling happens
// here and nowhere else.
inline std::vector<double> forward(const QuantileNetwork& net, const std::vector<double>& x) {
    std::vector<double> q = forward_scaled(net, scale_input(net, x));
    for (double& v : q) v = v * net.target_scale.scale + net.target_scale.shift;
    return q;
}

}  // namespace quantsp
