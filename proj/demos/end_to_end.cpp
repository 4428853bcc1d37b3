// Full pipeline on the built-in investment problem: generate training data
// from single-scenario solves, fit a non-crossing quantile network, embed it
// as a surrogate program, and compare against the exact scenario program on
// fresh scenarios. A risk sweep then shows the evaluated expectation/tail
// split of each surrogate solution.

#include <cstdio>

#include "quantsp/datagen.hpp"
#include "quantsp/embed/surrogate.hpp"
#include "quantsp/pipeline.hpp"
#include "quantsp/problems/instance_io.hpp"
#include "quantsp/qnn/train.hpp"
#include "quantsp/saa.hpp"

using namespace quantsp;

int main() {
    milp::SolveContext ctx;
    const int workers = 4;
    auto p = problem_from_name("investment");
    std::printf("problem: %s, %zu first-stage variables, %s\n", p.name.c_str(),
                p.n_first(), p.sense == Sense::Maximize ? "maximize" : "minimize");

    Dataset ds = generate(p, 2000, 7, workers, ctx);
    std::printf("dataset: %zu (x, recourse value) rows\n", ds.size());

    TrainConfig cfg;
    cfg.hidden_width = 32;
    cfg.epochs = 250;
    cfg.patience = 40;
    cfg.tau = default_tau_grid(25);
    cfg.seed = 8;
    auto [net, report] = train(ds, NetKind::Iqnn, cfg);
    std::printf("trained iqnn: best epoch %d, validation pinball loss %.4f\n",
                report.best_epoch, report.final_validation_loss);

    auto eval = p.sampler(500, 99);

    auto solve_surrogate = [&](double lambda) {
        SurrogateSpec spec;
        spec.lambda = lambda;
        spec.alpha = 0.9;
        auto es = build_surrogate(p, net, spec);
        auto res = ctx.solve_checked(es.model, "surrogate");
        std::vector<double> x;
        for (auto ref : es.x) x.push_back(res.values[ref.index]);
        return x;
    };

    // risk neutral: surrogate versus the exact scenario program
    auto x0 = solve_surrogate(0.0);
    auto scored0 = evaluate_fixed_x(p, x0, eval, RiskSpec{}, ctx, workers);
    SaaOptions opt;
    opt.workers = workers;
    auto exact = solve_saa(p, p.sampler(121, 42), opt, ctx);
    auto exact_scored = evaluate_fixed_x(p, exact.x, eval, RiskSpec{}, ctx, workers);
    std::printf("risk neutral: surrogate x = (%.3f, %.3f) evaluates to %.4f, "
                "exact x = (%.3f, %.3f) evaluates to %.4f (gap %.2f%%)\n",
                x0[0], x0[1], scored0.total, exact.x[0], exact.x[1],
                exact_scored.total,
                100.0 * (exact_scored.total - scored0.total) / exact_scored.total);

    // risk averse: the same network, heavier weight on the worst 10% tail
    for (double lambda : {0.5, 1.0}) {
        auto x = solve_surrogate(lambda);
        auto scored = evaluate_fixed_x(p, x, eval, RiskSpec{lambda, 0.9}, ctx, workers);
        std::printf("lambda %.1f: surrogate x = (%.3f, %.3f), evaluated "
                    "expectation %.4f, tail cvar %.4f\n",
                    lambda, x[0], x[1], scored.expectation_part, scored.cvar_part);
    }
    return 0;
}
