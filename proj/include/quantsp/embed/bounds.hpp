#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "quantsp/common.hpp"
#include "quantsp/qnn/network.hpp"

namespace quantsp {

struct NeuronBounds {
    double lo = 0.0, hi = 0.0;  // valid preactivation range over the input box
};

// pre[l][j] bounds the preactivation of neuron j in layer l; the box is the
// scaled input region the network actually sees.
struct ActivationBounds {
    std::vector<double> input_lo, input_hi;
    std::vector<std::vector<NeuronBounds>> pre;
};

// Interval arithmetic through the network: each neuron's reachable
// preactivation range given a box on the raw inputs. Hidden activations pass
// through the ReLU image [max(0,lo), max(0,hi)]; the output layer is left at
// its preactivation range regardless of kind, which is all the embedding
// needs.
inline ActivationBounds propagate_bounds(
    const QuantileNetwork& net, const std::vector<std::pair<double, double>>& input_box) {
    if (int(input_box.size()) != net.n_inputs())
        throw DimensionMismatch("input box does not match the network inputs");

    ActivationBounds out;
    for (int j = 0; j < net.n_inputs(); ++j) {
        auto [lo, hi] = input_box[j];
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw UnboundedInput("input " + std::to_string(j) + " has an unbounded range");
        if (lo > hi) throw InvalidBounds("input box is empty");
        const auto& s = net.input_scale[j];
        double a = (lo - s.shift) / s.scale, b = (hi - s.shift) / s.scale;
        out.input_lo.push_back(std::min(a, b));
        out.input_hi.push_back(std::max(a, b));
    }

    std::vector<double> act_lo = out.input_lo, act_hi = out.input_hi;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& layer = net.layers[l];
        std::vector<NeuronBounds> row(layer.n_out);
        for (int j = 0; j < layer.n_out; ++j) {
            double lo = layer.bias[j], hi = layer.bias[j];
            for (int i = 0; i < layer.n_in; ++i) {
                double w = layer.w(j, i);
                lo += w * (w >= 0 ? act_lo[i] : act_hi[i]);
                hi += w * (w >= 0 ? act_hi[i] : act_lo[i]);
            }
            row[j] = {lo, hi};
        }
        if (l + 1 < net.layers.size()) {
            act_lo.assign(layer.n_out, 0.0);
            act_hi.assign(layer.n_out, 0.0);
            for (int j = 0; j < layer.n_out; ++j) {
                act_lo[j] = std::max(0.0, row[j].lo);
                act_hi[j] = std::max(0.0, row[j].hi);
            }
        }
        out.pre.push_back(std::move(row));
    }
    return out;
}

}  // namespace quantsp
