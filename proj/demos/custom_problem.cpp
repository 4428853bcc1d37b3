// Plugging a user-defined problem into the toolkit: a two-product newsvendor
// with random demand. Only the pieces of TwoStageProblem matter; everything
// downstream (data generation, training, tolerance selection, embedding,
// exact scenario programs) works unchanged.

#include <cstdio>
#include <string>
#include <vector>

#include "quantsp/datagen.hpp"
#include "quantsp/embed/surrogate.hpp"
#include "quantsp/pipeline.hpp"
#include "quantsp/qnn/train.hpp"
#include "quantsp/saa.hpp"

using namespace quantsp;

// Order x_i up front at cost (3, 5); sell min(x_i, demand_i) at price (8, 12)
// and salvage the rest at 1. Demand is uniform on [20, 80] per product.
TwoStageProblem make_newsvendor() {
    TwoStageProblem p;
    p.name = "newsvendor";
    p.sense = Sense::Minimize;
    p.scenario_dim = 2;
    p.complete_recourse = true;
    p.first_stage = {{"order_0", milp::VarKind::Continuous, 0.0, 100.0},
                     {"order_1", milp::VarKind::Continuous, 0.0, 100.0}};
    p.first_stage_cost = {3.0, 5.0};

    const std::vector<double> price = {8.0, 12.0};
    const double salvage = 1.0;

    p.second_stage = [price, salvage](milp::MipModel& model, const XAccess& x,
                                      const Scenario& sc, const std::string& tag) {
        SecondStageBlock block;
        for (int i = 0; i < 2; ++i) {
            auto sell = model.add_continuous("sell" + tag + "_" + std::to_string(i),
                                             0.0, 100.0);
            auto left = model.add_continuous("left" + tag + "_" + std::to_string(i),
                                             0.0, 100.0);
            block.y_vars.push_back(sell);
            block.y_vars.push_back(left);
            milp::LinExpr split;  // sell + left <= order
            split.add(1.0, sell);
            split.add(1.0, left);
            split.add(x[i], -1.0);
            model.add_constraint(split, milp::Relation::LessEqual, 0.0);
            model.add_constraint(milp::LinExpr(sell), milp::Relation::LessEqual,
                                 sc.xi[i]);
            block.cost.add(-price[i], sell);
            block.cost.add(-salvage, left);
        }
        return block;
    };

    p.sampler = [](int count, std::uint64_t seed) {
        ScenarioSet set;
        set.scenarios.resize(count);
        for (int w = 0; w < count; ++w) {
            Rng rng(derive_seed(seed, w));
            set.scenarios[w].weight = 1.0 / count;
            set.scenarios[w].xi = {rng.uniform(20.0, 80.0), rng.uniform(20.0, 80.0)};
        }
        return set;
    };

    validate_first_stage(p);
    return p;
}

int main() {
    milp::SolveContext ctx;
    const int workers = 4;
    auto p = make_newsvendor();

    Dataset ds = generate(p, 800, 3, workers, ctx);
    TrainConfig cfg;
    cfg.hidden_width = 24;
    cfg.epochs = 120;
    cfg.seed = 4;
    auto net = train(ds, NetKind::Qnn, cfg).first;
    std::printf("trained a free-head network on %zu samples\n", ds.size());

    // pick the crossing tolerance whose surrogate solution scores best
    SurrogateSpec spec;
    using D = std::optional<double>;
    std::vector<D> deltas{D{0.0}, D{5.0}, D{20.0}, D{}};
    auto tuning = p.sampler(50, 17);
    auto sel = select_delta(p, net, spec, deltas, tuning, ctx, workers);
    std::printf("chosen crossing tolerance: %s\n",
                detail::delta_label(sel.chosen_delta).c_str());

    auto eval = p.sampler(2000, 23);
    RiskSpec risk;
    const auto& surrogate_x = sel.candidates[sel.chosen].x;
    auto scored = evaluate_fixed_x(p, surrogate_x, eval, risk, ctx, workers);

    SaaOptions opt;
    opt.workers = workers;
    auto exact = solve_saa(p, p.sampler(200, 31), opt, ctx);
    auto exact_scored = evaluate_fixed_x(p, exact.x, eval, risk, ctx, workers);

    std::printf("surrogate orders (%.2f, %.2f): expected cost %.3f\n",
                surrogate_x[0], surrogate_x[1], scored.total);
    std::printf("scenario-program orders (%.2f, %.2f): expected cost %.3f\n",
                exact.x[0], exact.x[1], exact_scored.total);
    return 0;
}
