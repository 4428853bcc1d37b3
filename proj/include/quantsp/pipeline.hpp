#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "quantsp/common.hpp"
#include "quantsp/datagen.hpp"
#include "quantsp/embed/surrogate.hpp"
#include "quantsp/milp/solver.hpp"
#include "quantsp/parallel.hpp"
#include "quantsp/qnn/train.hpp"
#include "quantsp/saa.hpp"

namespace quantsp {

namespace detail {

inline double wall_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

inline std::string delta_label(const std::optional<double>& d) {
    if (!d || !std::isfinite(*d)) return "unconstrained";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", *d);
    return buf;
}

}  // namespace detail

struct DeltaCandidate {
    std::optional<double> delta;  // absent: crossing left unconstrained
    bool ok = false;
    std::string status;
    std::vector<double> x;
    double surrogate_objective = std::numeric_limits<double>::quiet_NaN();
    double evaluation = std::numeric_limits<double>::quiet_NaN();
    double solve_seconds = 0.0;
    std::int64_t nodes = 0;
};

struct DeltaSelectionResult {
    std::vector<DeltaCandidate> candidates;
    int chosen = -1;  // index into candidates
    std::optional<double> chosen_delta;
};

namespace detail {

// One surrogate solve per tolerance plus a fixed-X evaluation on the shared
// scenario set. Failures are recorded, never thrown: the caller decides what
// a dead candidate means.
inline std::vector<DeltaCandidate> run_delta_candidates(
    const TwoStageProblem& p, const QuantileNetwork& net, SurrogateSpec spec,
    const std::vector<std::optional<double>>& deltas, const ScenarioSet& eval_scenarios,
    const milp::SolveContext& ctx, int workers) {
    if (net.kind != NetKind::Qnn)
        throw KindMismatch("tolerance selection applies to networks with a free head");
    RiskSpec risk{spec.lambda, spec.alpha.value_or(0.9)};
    std::vector<DeltaCandidate> out(deltas.size());
    parallel_for(deltas.size(), workers, [&](std::size_t i) {
        DeltaCandidate& c = out[i];
        c.delta = deltas[i];
        try {
            SurrogateSpec s = spec;
            s.delta = deltas[i];
            auto es = build_surrogate(p, net, s);
            auto res = ctx.solve(es.model);
            c.solve_seconds = res.wall_seconds;
            c.nodes = res.nodes;
            if (!res.has_solution()) {
                c.status = to_string(res.status);
                return;
            }
            c.surrogate_objective = res.objective;
            for (auto ref : es.x) c.x.push_back(res.values[ref.index]);
            c.evaluation = evaluate_fixed_x(p, c.x, eval_scenarios, risk, ctx).total;
            c.ok = true;
            c.status = to_string(res.status);
        } catch (const Error& e) {
            c.status = e.what();
        }
    });
    return out;
}

}  // namespace detail

// Prescriptive tolerance selection: every candidate's surrogate solution is
// scored on one shared evaluation scenario set and the best score wins.
// Ties break toward the smaller tolerance (unconstrained counts as largest),
// so the choice does not depend on candidate order.
inline DeltaSelectionResult select_delta(const TwoStageProblem& p,
                                         const QuantileNetwork& net,
                                         const SurrogateSpec& spec,
                                         const std::vector<std::optional<double>>& deltas,
                                         const ScenarioSet& eval_scenarios,
                                         const milp::SolveContext& ctx, int workers = 1) {
    if (deltas.empty()) throw Error("tolerance selection needs at least one candidate");
    DeltaSelectionResult result;
    result.candidates =
        detail::run_delta_candidates(p, net, spec, deltas, eval_scenarios, ctx, workers);

    auto key = [&](const DeltaCandidate& c) {
        double score = p.sense == Sense::Maximize ? -c.evaluation : c.evaluation;
        double tol = c.delta && std::isfinite(*c.delta) ? *c.delta : kInf;
        return std::pair{score, tol};
    };
    for (std::size_t i = 0; i < result.candidates.size(); ++i) {
        const auto& c = result.candidates[i];
        if (!c.ok) continue;
        if (result.chosen < 0 || key(c) < key(result.candidates[result.chosen]))
            result.chosen = int(i);
    }
    if (result.chosen < 0)
        throw AllCandidatesFailed("every tolerance candidate failed to solve");
    result.chosen_delta = result.candidates[result.chosen].delta;
    return result;
}

struct DeltaSensitivityRow {
    std::optional<double> delta;
    bool ok = false;
    std::string status;
    double true_objective = std::numeric_limits<double>::quiet_NaN();
    double scaled_objective = std::numeric_limits<double>::quiet_NaN();  // best row = 1.00
    double solve_seconds = 0.0;
    std::int64_t nodes = 0;
};

// The selection sweep reported as a table: objectives are scaled so the best
// candidate reads exactly 1.00 and everything else >= 1.00.
inline std::vector<DeltaSensitivityRow> delta_sensitivity(
    const TwoStageProblem& p, const QuantileNetwork& net, const SurrogateSpec& spec,
    const std::vector<std::optional<double>>& deltas, const ScenarioSet& eval_scenarios,
    const milp::SolveContext& ctx, int workers = 1) {
    auto cands =
        detail::run_delta_candidates(p, net, spec, deltas, eval_scenarios, ctx, workers);
    const bool maximize = p.sense == Sense::Maximize;
    std::optional<double> best;
    for (const auto& c : cands) {
        if (!c.ok) continue;
        if (!best || (maximize ? c.evaluation > *best : c.evaluation < *best))
            best = c.evaluation;
    }
    if (!best) throw AllCandidatesFailed("every tolerance candidate failed to solve");

    std::vector<DeltaSensitivityRow> rows;
    for (const auto& c : cands) {
        DeltaSensitivityRow r;
        r.delta = c.delta;
        r.ok = c.ok;
        r.status = c.status;
        r.solve_seconds = c.solve_seconds;
        r.nodes = c.nodes;
        if (c.ok) {
            r.true_objective = c.evaluation;
            // ratio against the best row, oriented so worse reads larger
            r.scaled_objective = maximize ? *best / c.evaluation : c.evaluation / *best;
        }
        rows.push_back(r);
    }
    return rows;
}

struct BenchmarkRow {
    std::string problem;
    std::string method;  // "qnn", "iqnn", or "saa"
    double lambda = 0.0;
    double alpha = 0.9;
    int eval_set_size = 0;
    int eval_set_count = 0;
    std::vector<double> x;
    double mean_true_objective = std::numeric_limits<double>::quiet_NaN();
    double std_true_objective = 0.0;
    double mean_expectation_part = std::numeric_limits<double>::quiet_NaN();
    double mean_cvar_part = std::numeric_limits<double>::quiet_NaN();
    double relative_gap_vs_saa = std::numeric_limits<double>::quiet_NaN();
    double build_seconds = 0.0;  // dataset + training for surrogates, model build for saa
    double solve_seconds = 0.0;
};

struct BenchmarkConfig {
    std::vector<std::string> methods = {"qnn", "iqnn", "saa"};
    std::vector<double> lambdas = {0.0};
    double alpha = 0.9;
    int train_samples = 1000;
    int saa_scenarios = 50;
    int eval_set_size = 200;
    int eval_set_count = 10;
    std::vector<std::optional<double>> delta_candidates;  // empty: unconstrained head
    int delta_eval_size = 50;
    TrainConfig train;  // template; its seed field is replaced per kind
    std::uint64_t seed = 1;
    int workers = 1;
};

// Full protocol on one problem: one dataset, one trained network per kind,
// then for every (method, lambda) a first-stage solution evaluated on
// eval_set_count fresh scenario sets. Gaps are signed so that positive means
// worse than the SAA row at the same lambda, whatever the problem sense.
inline std::vector<BenchmarkRow> run_benchmark(const TwoStageProblem& p,
                                               const BenchmarkConfig& cfg,
                                               const milp::SolveContext& ctx) {
    if (cfg.eval_set_count < 1) throw Error("benchmark needs at least one evaluation set");
    bool want_qnn = std::count(cfg.methods.begin(), cfg.methods.end(), "qnn") > 0;
    bool want_iqnn = std::count(cfg.methods.begin(), cfg.methods.end(), "iqnn") > 0;
    bool want_saa = std::count(cfg.methods.begin(), cfg.methods.end(), "saa") > 0;
    for (const auto& m : cfg.methods)
        if (m != "qnn" && m != "iqnn" && m != "saa")
            throw Error("unknown benchmark method '" + m + "'");

    auto saa_scenarios = p.sampler(cfg.saa_scenarios, derive_seed(cfg.seed, 1000));
    std::vector<ScenarioSet> eval_sets;
    for (int e = 0; e < cfg.eval_set_count; ++e)
        eval_sets.push_back(p.sampler(cfg.eval_set_size, derive_seed(cfg.seed, 2000 + e)));
    ScenarioSet delta_eval;
    if (want_qnn && !cfg.delta_candidates.empty())
        delta_eval = p.sampler(cfg.delta_eval_size, derive_seed(cfg.seed, 3000));

    double data_seconds = 0.0;
    Dataset ds;
    if (want_qnn || want_iqnn) {
        double t0 = detail::wall_seconds();
        ds = generate(p, cfg.train_samples, derive_seed(cfg.seed, 1), cfg.workers, ctx);
        data_seconds = detail::wall_seconds() - t0;
    }
    QuantileNetwork qnn_net, iqnn_net;
    double qnn_build = 0.0, iqnn_build = 0.0;
    if (want_qnn) {
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, 2);
        double t0 = detail::wall_seconds();
        qnn_net = train(ds, NetKind::Qnn, tc).first;
        qnn_build = data_seconds + detail::wall_seconds() - t0;
    }
    if (want_iqnn) {
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, 3);
        double t0 = detail::wall_seconds();
        iqnn_net = train(ds, NetKind::Iqnn, tc).first;
        iqnn_build = data_seconds + detail::wall_seconds() - t0;
    }

    std::vector<BenchmarkRow> rows;
    for (double lambda : cfg.lambdas) {
        RiskSpec risk{lambda, cfg.alpha};
        auto evaluate_solution = [&](BenchmarkRow& row) {
            std::vector<double> totals(eval_sets.size());
            double esum = 0.0, csum = 0.0;
            for (std::size_t e = 0; e < eval_sets.size(); ++e) {
                auto t = evaluate_fixed_x(p, row.x, eval_sets[e], risk, ctx, cfg.workers);
                totals[e] = t.total;
                esum += t.expectation_part;
                csum += t.cvar_part;
            }
            double mean = 0.0;
            for (double t : totals) mean += t;
            mean /= double(totals.size());
            double var = 0.0;
            for (double t : totals) var += (t - mean) * (t - mean);
            row.mean_true_objective = mean;
            row.std_true_objective =
                totals.size() > 1 ? std::sqrt(var / double(totals.size() - 1)) : 0.0;
            row.mean_expectation_part = esum / double(totals.size());
            row.mean_cvar_part = csum / double(totals.size());
        };
        auto base_row = [&](const std::string& method) {
            BenchmarkRow row;
            row.problem = p.name;
            row.method = method;
            row.lambda = lambda;
            row.alpha = cfg.alpha;
            row.eval_set_size = cfg.eval_set_size;
            row.eval_set_count = cfg.eval_set_count;
            return row;
        };

        int saa_at = -1;
        for (const auto& method : cfg.methods) {
            BenchmarkRow row = base_row(method);
            if (method == "saa") {
                SaaOptions opt;
                opt.risk = risk;
                opt.workers = cfg.workers;
                auto sol = solve_saa(p, saa_scenarios, opt, ctx);
                row.x = sol.x;
                row.solve_seconds = sol.seconds;
                saa_at = int(rows.size());
            } else {
                const QuantileNetwork& net = method == "qnn" ? qnn_net : iqnn_net;
                row.build_seconds = method == "qnn" ? qnn_build : iqnn_build;
                SurrogateSpec spec;
                spec.lambda = lambda;
                if (lambda > 0.0) spec.alpha = cfg.alpha;
                if (method == "qnn" && !cfg.delta_candidates.empty()) {
                    auto sel = select_delta(p, net, spec, cfg.delta_candidates, delta_eval,
                                            ctx, cfg.workers);
                    const auto& c = sel.candidates[sel.chosen];
                    row.x = c.x;
                    for (const auto& cand : sel.candidates)
                        row.solve_seconds += cand.solve_seconds;
                } else {
                    auto es = build_surrogate(p, net, spec);
                    auto res = ctx.solve_checked(es.model, method + " surrogate");
                    for (auto ref : es.x) row.x.push_back(res.values[ref.index]);
                    row.solve_seconds = res.wall_seconds;
                }
            }
            evaluate_solution(row);
            rows.push_back(std::move(row));
        }

        if (saa_at >= 0) {
            double ref = rows[saa_at].mean_true_objective;
            for (std::size_t i = rows.size() - cfg.methods.size(); i < rows.size(); ++i) {
                double diff = rows[i].mean_true_objective - ref;
                if (p.sense == Sense::Maximize) diff = -diff;
                rows[i].relative_gap_vs_saa = i == std::size_t(saa_at)
                                                  ? 0.0
                                                  : diff / std::abs(ref);
            }
        }
    }
    return rows;
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_benchmark_csv(const std::vector<BenchmarkRow>& rows,
                                const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "problem,method,lambda,alpha,eval_set_size,eval_set_count,"
           "mean_true_objective,std_true_objective,mean_expectation_part,"
           "mean_cvar_part,relative_gap_vs_saa,build_seconds,solve_seconds\n";
    for (const auto& r : rows) {
        out << r.problem << ',' << r.method << ',' << format_double(r.lambda) << ','
            << format_double(r.alpha) << ',' << r.eval_set_size << ','
            << r.eval_set_count << ',' << format_double(r.mean_true_objective) << ','
            << format_double(r.std_true_objective) << ','
            << format_double(r.mean_expectation_part) << ','
            << format_double(r.mean_cvar_part) << ','
            << format_double(r.relative_gap_vs_saa) << ','
            << format_double(r.build_seconds) << ','
            << format_double(r.solve_seconds) << '\n';
    }
    if (!out) throw IoError("failed while writing " + path.string());
}

inline std::string benchmark_markdown(const std::vector<BenchmarkRow>& rows) {
    std::ostringstream out;
    out << "| problem | method | lambda | alpha | mean obj | std | gap vs saa |\n";
    out << "|---|---|---|---|---|---|---|\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "| %s | %s | %g | %g | %.4f | %.4f | ",
                      r.problem.c_str(), r.method.c_str(), r.lambda, r.alpha,
                      r.mean_true_objective, r.std_true_objective);
        out << buf;
        if (std::isnan(r.relative_gap_vs_saa))
            out << "n/a |\n";
        else {
            std::snprintf(buf, sizeof(buf), "%.2f%% |\n", 100.0 * r.relative_gap_vs_saa);
            out << buf;
        }
    }
    return out.str();
}

inline void write_delta_csv(const std::vector<DeltaSensitivityRow>& rows,
                            const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "delta,status,true_objective,scaled_objective,solve_seconds,nodes\n";
    for (const auto& r : rows) {
        out << detail::delta_label(r.delta) << ',' << r.status << ','
            << format_double(r.true_objective) << ','
            << format_double(r.scaled_objective) << ','
            << format_double(r.solve_seconds) << ',' << r.nodes << '\n';
    }
    if (!out) throw IoError("failed while writing " + path.string());
}

inline std::string delta_markdown(const std::vector<DeltaSensitivityRow>& rows) {
    std::ostringstream out;
    out << "| delta | true obj | scaled | solve s | nodes |\n";
    out << "|---|---|---|---|---|\n";
    char buf[96];
    for (const auto& r : rows) {
        if (r.ok) {
            std::snprintf(buf, sizeof(buf), "| %s | %.4f | %.2f | %.3f | %lld |\n",
                          detail::delta_label(r.delta).c_str(), r.true_objective,
                          r.scaled_objective, r.solve_seconds,
                          static_cast<long long>(r.nodes));
        } else {
            std::snprintf(buf, sizeof(buf), "| %s | %s | | | |\n",
                          detail::delta_label(r.delta).c_str(), r.status.c_str());
        }
        out << buf;
    }
    return out.str();
}

}  // namespace quantsp
