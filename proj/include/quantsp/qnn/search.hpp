#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "quantsp/common.hpp"
#include "quantsp/parallel.hpp"
#include "quantsp/qnn/train.hpp"
#include "quantsp/rng.hpp"

namespace quantsp {

struct SearchSpace {
    std::vector<int> batch_sizes = {64, 128, 256, 512};
    double lr_min = 1e-5, lr_max = 1e-1;  // log-uniform
    std::vector<std::string> optimizers = {"adam", "adagrad", "rmsprop"};
    double dropout_max = 0.30;
    std::vector<int> widths = {32, 64, 128, 256};
    int n_hidden_layers = 1;
    int epochs = 300;  // the long protocol uses 2000
    int patience = 30;
    double validation_fraction = 0.2;
    std::vector<double> tau;  // empty: trainer default
};

inline TrainConfig sample_config(const SearchSpace& space, Rng& rng) {
    if (space.batch_sizes.empty() || space.optimizers.empty() || space.widths.empty())
        throw Error("search space has an empty dimension");
    TrainConfig cfg;
    cfg.batch_size = space.batch_sizes[rng.below(space.batch_sizes.size())];
    cfg.learning_rate =
        std::exp(rng.uniform(std::log(space.lr_min), std::log(space.lr_max)));
    cfg.optimizer = space.optimizers[rng.below(space.optimizers.size())];
    cfg.dropout = rng.uniform(0.0, space.dropout_max);
    cfg.hidden_width = space.widths[rng.below(space.widths.size())];
    cfg.n_hidden_layers = space.n_hidden_layers;
    cfg.epochs = space.epochs;
    cfg.patience = space.patience;
    cfg.validation_fraction = space.validation_fraction;
    cfg.tau = space.tau;
    return cfg;
}

struct TrialSummary {
    int index = 0;
    bool ok = false;
    std::string error;
    TrainConfig config;
    double validation_loss = kInf;
};

struct SearchResult {
    QuantileNetwork network;
    TrainReport report;
    std::vector<TrialSummary> trials;
    int best_trial = -1;
};

// Random search: trial t draws its config and training seed from streams
// derived from (seed, t), so results do not depend on worker scheduling. The
// winner is the lowest validation loss, first index on ties. Failed trials
// are recorded and skipped; all trials failing is an error.
inline SearchResult hyperparameter_search(const Dataset& ds, NetKind kind, int n_trials,
                                          std::uint64_t seed, const SearchSpace& space = {},
                                          int workers = 1) {
    if (n_trials < 1) throw Error("search needs at least one trial");
    std::vector<TrialSummary> trials(n_trials);
    std::vector<std::pair<QuantileNetwork, TrainReport>> results(n_trials);
    parallel_for(std::size_t(n_trials), workers, [&](std::size_t t) {
        auto& trial = trials[t];
        trial.index = int(t);
        Rng rng(derive_seed(seed, 2 * t));
        trial.config = sample_config(space, rng);
        trial.config.seed = derive_seed(seed, 2 * t + 1);
        try {
            results[t] = train(ds, kind, trial.config);
            trial.validation_loss = results[t].second.final_validation_loss;
            trial.ok = true;
        } catch (const Error& e) {
            trial.error = e.what();
        }
    });

    SearchResult out;
    out.trials = std::move(trials);
    for (int t = 0; t < n_trials; ++t) {
        const auto& trial = out.trials[t];
        if (!trial.ok) continue;
        if (out.best_trial < 0 ||
            trial.validation_loss < out.trials[out.best_trial].validation_loss)
            out.best_trial = t;
    }
    if (out.best_trial < 0)
        throw AllCandidatesFailed("all " + std::to_string(n_trials) +
                                  " search trials failed; first error: " +
                                  out.trials.front().error);
    out.network = std::move(results[out.best_trial].first);
    out.report = std::move(results[out.best_trial].second);
    return out;
}

}  // namespace quantsp
