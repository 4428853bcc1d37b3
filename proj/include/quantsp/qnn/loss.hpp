#pragma once

#include <vector>

#include "quantsp/common.hpp"

namespace quantsp {

// Asymmetric absolute deviation: err = target - prediction weighted by tau
// above the prediction and by (1 - tau) below it. Minimized in expectation at
// the tau-quantile.
inline double pinball_term(double err, double tau) {
    return err >= 0.0 ? tau * err : (tau - 1.0) * err;
}

// d pinball_term / d prediction (err picks up a minus sign).
inline double pinball_term_grad(double err, double tau) {
    return err >= 0.0 ? -tau : 1.0 - tau;
}

// Mean over samples and quantile levels of pinball_term(y_i - pred_ik, tau_k).
inline double pinball_loss(const std::vector<std::vector<double>>& pred,
                           const std::vector<double>& target,
                           const std::vector<double>& tau) {
    if (pred.size() != target.size())
        throw DimensionMismatch("one target per prediction row required");
    if (pred.empty()) throw DimensionMismatch("pinball loss of an empty batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].size() != tau.size())
            throw DimensionMismatch("prediction row width differs from the tau grid");
        for (std::size_t k = 0; k < tau.size(); ++k)
            sum += pinball_term(target[i] - pred[i][k], tau[k]);
    }
    return sum / (double(pred.size()) * double(tau.size()));
}

}  // namespace quantsp
