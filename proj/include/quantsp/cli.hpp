#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "quantsp/common.hpp"
#include "quantsp/datagen.hpp"
#include "quantsp/embed/surrogate.hpp"
#include "quantsp/milp/solver.hpp"
#include "quantsp/pipeline.hpp"
#include "quantsp/problems/instance_io.hpp"
#include "quantsp/qnn/network_io.hpp"
#include "quantsp/qnn/search.hpp"
#include "quantsp/qnn/train.hpp"
#include "quantsp/saa.hpp"

namespace quantsp::cli {

// Command-line misuse (bad flag values, missing required flags, bad config
// keys); mapped to exit code 2 instead of 1.
struct UsageError : Error {
    using Error::Error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cur = trim(cur);
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    for (const auto& t : out)
        if (t.empty()) throw UsageError("empty element in list '" + s + "'");
    return out;
}

inline double parse_number(const std::string& t) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw UsageError("cannot parse number '" + t + "'");
    }
    if (pos != t.size()) throw UsageError("cannot parse number '" + t + "'");
    return v;
}

inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& t : split_list(s)) out.push_back(parse_number(t));
    return out;
}

// "none", "inf", or "unconstrained" leave the crossing tolerance off.
inline std::optional<double> parse_delta_token(const std::string& raw) {
    std::string t;
    for (char c : trim(raw)) t += char(std::tolower(static_cast<unsigned char>(c)));
    if (t == "none" || t == "inf" || t == "infinity" || t == "unconstrained")
        return std::nullopt;
    double v = parse_number(t);
    if (!(v >= 0.0)) throw UsageError("crossing tolerance must be nonnegative, got '" + raw + "'");
    return v;
}

inline std::vector<std::optional<double>> parse_delta_list(const std::string& s) {
    std::vector<std::optional<double>> out;
    if (trim(s).empty()) return out;
    for (const auto& t : split_list(s)) out.push_back(parse_delta_token(t));
    return out;
}

inline NetKind parse_kind(const std::string& s) {
    if (s == "qnn") return NetKind::Qnn;
    if (s == "iqnn") return NetKind::Iqnn;
    throw UsageError("unknown network kind '" + s + "' (expected qnn or iqnn)");
}

inline std::optional<TailSide> parse_tail_side(const std::string& s) {
    if (s == "auto") return std::nullopt;
    if (s == "right") return TailSide::Right;
    if (s == "left") return TailSide::Left;
    throw UsageError("unknown tail side '" + s + "' (expected auto, right, or left)");
}

inline std::string fmt_vec(const std::vector<double>& v) {
    std::ostringstream s;
    s << '[';
    char buf[40];
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s << ", ";
        std::snprintf(buf, sizeof(buf), "%g", v[i]);
        s << buf;
    }
    s << ']';
    return s.str();
}

inline std::string fmt(double v, const char* spec = "%.10g") {
    char buf[48];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

template <class T>
T coerce(const std::string& key, const nlohmann::json& j) {
    if constexpr (std::is_same_v<T, std::string>) {
        if (j.is_string()) return j.get<std::string>();
        // scalar or array forms are accepted for list-valued keys
        if (j.is_number()) return j.dump();
        if (j.is_array()) {
            std::string out;
            for (const auto& e : j) {
                if (!out.empty()) out += ',';
                out += e.is_string() ? e.get<std::string>() : e.dump();
            }
            return out;
        }
        throw UsageError("config key '" + key + "' must be a string, number, or array");
    } else if constexpr (std::is_same_v<T, double>) {
        if (!j.is_number()) throw UsageError("config key '" + key + "' must be a number");
        return j.get<double>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!j.is_number_integer() && !j.is_number_unsigned())
            throw UsageError("config key '" + key + "' must be an integer");
        if (j.is_number_integer() && j.get<long long>() < 0)
            throw UsageError("config key '" + key + "' must be nonnegative");
        return j.get<std::uint64_t>();
    } else {
        static_assert(std::is_same_v<T, int>);
        if (!j.is_number_integer() && !j.is_number_unsigned())
            throw UsageError("config key '" + key + "' must be an integer");
        return j.get<int>();
    }
}

}  // namespace detail

// Every flag of every subcommand, with its documented default. A JSON config
// file fills any field the command line left untouched.
struct Options {
    std::uint64_t seed = 1;
    int workers = 1;
    std::string solver;  // empty: environment choice or built-in default
    double time_limit = 600.0;
    double gap_tol = 1e-4;
    std::string out_dir = ".";
    std::string config_path;

    std::string problem;
    std::string instance_file;
    int samples = 1000;
    std::string out;
    std::string save_instance_path;

    std::string data;
    std::string kind = "qnn";
    int trials = 1;
    int epochs = 300;
    int batch_size = 128;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    double dropout = 0.0;
    int patience = 30;
    int width = 64;
    int layers = 1;
    int tau_count = 0;  // 0: trainer default grid of 50
    double validation_fraction = 0.2;

    std::string model;
    double lambda = 0.0;
    double alpha = 0.9;
    std::string delta = "none";
    std::string tail_side = "auto";
    std::string x;
    std::string solution;
    std::string scenario_file;
    int scenarios = 1000;
    std::uint64_t eval_seed = 0;
    bool eval_seed_given = false;

    std::string deltas = "0,10,50,100,500,inf";
    int eval_scenarios = 50;

    std::string methods = "qnn,iqnn,saa";
    std::string lambdas = "0";
    std::string alphas = "0.9";
    std::string bench_deltas;  // empty: unconstrained crossing head
    int train_samples = 1000;
    int saa_scenarios = 50;
    int eval_size = 200;
    int eval_count = 10;
    int delta_eval_size = 50;
};

namespace detail {

inline milp::SolveContext make_context(const Options& o) {
    milp::SolveContext ctx;
    if (!o.solver.empty()) ctx.backend = o.solver;
    ctx.limits.time_limit_seconds = o.time_limit;
    ctx.limits.gap_tol = o.gap_tol;
    return ctx;
}

inline TwoStageProblem resolve_problem(const Options& o) {
    if (!o.instance_file.empty()) return load_instance(o.instance_file);
    if (!o.problem.empty()) return problem_from_name(o.problem);
    throw UsageError("specify --problem NAME or --instance-file PATH");
}

inline std::filesystem::path ensure_out_dir(const Options& o) {
    std::filesystem::path dir(o.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + o.out_dir + "': " + ec.message());
    return dir;
}

inline std::filesystem::path out_path(const Options& o, const char* fallback) {
    if (!o.out.empty()) return o.out;
    return ensure_out_dir(o) / fallback;
}

inline std::uint64_t resolved_eval_seed(const Options& o) {
    return o.eval_seed_given ? o.eval_seed : derive_seed(o.seed, 99);
}

inline TrainConfig train_config_from(const Options& o) {
    TrainConfig cfg;
    cfg.batch_size = o.batch_size;
    cfg.learning_rate = o.learning_rate;
    cfg.optimizer = o.optimizer;
    cfg.dropout = o.dropout;
    cfg.epochs = o.epochs;
    cfg.hidden_width = o.width;
    cfg.n_hidden_layers = o.layers;
    cfg.seed = o.seed;
    cfg.validation_fraction = o.validation_fraction;
    cfg.patience = o.patience;
    if (o.tau_count > 0) cfg.tau = default_tau_grid(o.tau_count);
    return cfg;
}

inline SurrogateSpec surrogate_spec_from(const Options& o) {
    SurrogateSpec spec;
    spec.lambda = o.lambda;
    spec.alpha = o.alpha;
    spec.delta = parse_delta_token(o.delta);
    spec.tail_side = parse_tail_side(o.tail_side);
    return spec;
}

inline std::vector<double> resolve_x(const Options& o) {
    if (!o.x.empty() && !o.solution.empty())
        throw UsageError("give either --x or --solution, not both");
    if (!o.x.empty()) return parse_double_list(o.x);
    if (o.solution.empty()) throw UsageError("specify --x V1,V2,... or --solution PATH");
    std::ifstream f(o.solution);
    if (!f) throw IoError("cannot open '" + o.solution + "' for reading");
    nlohmann::json j;
    try {
        f >> j;
        return j.at("x").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("solution file '" + o.solution + "': " + e.what());
    }
}

inline ScenarioSet resolve_scenarios(const Options& o, const TwoStageProblem& p,
                                     std::string& origin) {
    if (!o.scenario_file.empty()) {
        origin = "file " + o.scenario_file;
        ScenarioSet set = load_scenarios(o.scenario_file);
        for (const auto& s : set.scenarios)
            if (s.xi.size() != std::size_t(p.scenario_dim))
                throw DimensionMismatch("scenario has " + std::to_string(s.xi.size()) +
                                        " values but problem '" + p.name + "' expects " +
                                        std::to_string(p.scenario_dim));
        return set;
    }
    std::uint64_t es = resolved_eval_seed(o);
    origin = "sampled, seed " + std::to_string(es);
    return p.sampler(o.scenarios, es);
}

inline int cmd_gen_data(const Options& o, std::ostream& out) {
    auto p = resolve_problem(o);
    if (!o.save_instance_path.empty()) {
        save_instance(p, o.save_instance_path);
        out << "wrote instance to " << o.save_instance_path << "\n";
    }
    auto ctx = make_context(o);
    auto path = out_path(o, "dataset.csv");
    double t0 = quantsp::detail::wall_seconds();
    Dataset ds = generate(p, o.samples, o.seed, o.workers, ctx);
    save_dataset(ds, path);
    double t1 = quantsp::detail::wall_seconds();
    out << "generated " << ds.size() << " rows for " << p.name << " in "
        << fmt(t1 - t0, "%.2f") << " s\n";
    out << "wrote " << path.string() << " and "
        << quantsp::detail::sidecar_path(path).string() << "\n";
    return 0;
}

inline int cmd_train(const Options& o, std::ostream& out) {
    if (o.data.empty()) throw UsageError("--data PATH is required");
    Dataset ds = load_dataset(o.data);
    NetKind kind = parse_kind(o.kind);
    auto path = out_path(o, "model.json");

    QuantileNetwork net;
    TrainReport report;
    double t0 = quantsp::detail::wall_seconds();
    if (o.trials > 1) {
        SearchSpace space;
        space.n_hidden_layers = o.layers;
        space.epochs = o.epochs;
        space.patience = o.patience;
        space.validation_fraction = o.validation_fraction;
        if (o.tau_count > 0) space.tau = default_tau_grid(o.tau_count);
        SearchResult res = hyperparameter_search(ds, kind, o.trials, o.seed, space, o.workers);
        net = std::move(res.network);
        report = res.report;
        out << "search over " << o.trials << " trials, best trial " << res.best_trial
            << ": lr " << fmt(report.config.learning_rate, "%g") << ", batch "
            << report.config.batch_size << ", " << report.config.optimizer << ", width "
            << report.config.hidden_width << ", dropout "
            << fmt(report.config.dropout, "%g") << "\n";
    } else {
        auto [n, r] = train(ds, kind, train_config_from(o));
        net = std::move(n);
        report = std::move(r);
    }
    double t1 = quantsp::detail::wall_seconds();

    save_network(net, path);
    out << "trained " << o.kind << " on " << ds.size() << " samples in "
        << fmt(t1 - t0, "%.2f") << " s\n";
    out << "best epoch " << report.best_epoch << " of " << report.epochs_run
        << ", train loss " << fmt(report.final_train_loss, "%.6g") << ", validation loss "
        << fmt(report.final_validation_loss, "%.6g") << "\n";
    out << "wrote model to " << path.string() << "\n";
    return 0;
}

inline int cmd_solve(const Options& o, std::ostream& out) {
    if (o.model.empty()) throw UsageError("--model PATH is required");
    auto p = resolve_problem(o);
    QuantileNetwork net = load_network(o.model);
    auto spec = surrogate_spec_from(o);
    auto ctx = make_context(o);

    double t0 = quantsp::detail::wall_seconds();
    EmbeddedSurrogate es = build_surrogate(p, net, spec);
    milp::SolveResult r = ctx.solve_checked(es.model, "surrogate solve");
    double t1 = quantsp::detail::wall_seconds();

    std::vector<double> xv;
    for (auto ref : es.x) xv.push_back(r.values[ref.index]);

    out << "problem " << p.name << " (" << to_string(p.sense) << ", " << p.n_first()
        << " first-stage variables)\n";
    out << "model " << o.model << ": " << to_string(net.kind) << ", "
        << net.tau.size() << " quantile levels, " << es.model.num_binary()
        << " binaries in the surrogate\n";
    out << "x = " << fmt_vec(xv) << "\n";
    out << "surrogate objective = " << fmt(r.objective) << "\n";
    out << "status " << to_string(r.status) << ", " << r.nodes << " nodes, "
        << fmt(t1 - t0, "%.3f") << " s\n";

    if (!o.out.empty()) {
        nlohmann::json j{{"schema", 1},
                         {"problem", p.name},
                         {"kind", to_string(net.kind)},
                         {"lambda", o.lambda},
                         {"alpha", o.alpha},
                         {"x", xv},
                         {"surrogate_objective", r.objective},
                         {"status", to_string(r.status)},
                         {"solve_seconds", t1 - t0}};
        j["delta"] = spec.delta ? nlohmann::json(*spec.delta) : nlohmann::json(nullptr);
        std::ofstream f(o.out);
        if (!f) throw IoError("cannot open '" + o.out + "' for writing");
        f << j.dump(2) << "\n";
        out << "wrote solution to " << o.out << "\n";
    }
    return 0;
}

inline int cmd_evaluate(const Options& o, std::ostream& out) {
    auto p = resolve_problem(o);
    std::vector<double> xv = resolve_x(o);
    if (xv.size() != p.n_first())
        throw DimensionMismatch("solution has " + std::to_string(xv.size()) +
                                " values but problem '" + p.name + "' has " +
                                std::to_string(p.n_first()) + " first-stage variables");
    std::string origin;
    ScenarioSet scen = resolve_scenarios(o, p, origin);
    RiskSpec risk{o.lambda, o.alpha};
    auto ctx = make_context(o);

    TrueObjective t = evaluate_fixed_x(p, xv, scen, risk, ctx, o.workers);
    out << "problem " << p.name << " (" << to_string(p.sense) << "), x = " << fmt_vec(xv)
        << "\n";
    out << scen.size() << " scenarios (" << origin << "), lambda " << fmt(o.lambda, "%g")
        << ", alpha " << fmt(o.alpha, "%g") << "\n";
    out << "expectation part = " << fmt(t.expectation_part) << "\n";
    out << "cvar part        = " << fmt(t.cvar_part) << "\n";
    out << "total            = " << fmt(t.total) << "\n";
    return 0;
}

inline int cmd_select_delta(const Options& o, std::ostream& out) {
    if (o.model.empty()) throw UsageError("--model PATH is required");
    auto p = resolve_problem(o);
    QuantileNetwork net = load_network(o.model, NetKind::Qnn);
    auto deltas = parse_delta_list(o.deltas);
    if (deltas.empty()) throw UsageError("--deltas needs at least one candidate");
    auto spec = surrogate_spec_from(o);
    auto ctx = make_context(o);
    ScenarioSet eval = p.sampler(o.eval_scenarios, resolved_eval_seed(o));

    DeltaSelectionResult res = select_delta(p, net, spec, deltas, eval, ctx, o.workers);
    out << "delta        status      surrogate obj   evaluation\n";
    for (const auto& c : res.candidates) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-12s %-10s %15s %12s\n",
                      quantsp::detail::delta_label(c.delta).c_str(), c.status.c_str(),
                      c.ok ? fmt(c.surrogate_objective, "%.6g").c_str() : "",
                      c.ok ? fmt(c.evaluation, "%.6g").c_str() : "");
        out << line;
    }
    const auto& chosen = res.candidates[res.chosen];
    out << "chosen delta = " << quantsp::detail::delta_label(res.chosen_delta)
        << " (evaluation " << fmt(chosen.evaluation, "%.6g") << ")\n";
    out << "x = " << fmt_vec(chosen.x) << "\n";

    if (!o.out.empty()) {
        std::ofstream f(o.out);
        if (!f) throw IoError("cannot open '" + o.out + "' for writing");
        f << "delta,ok,status,surrogate_objective,evaluation,solve_seconds,nodes\n";
        for (const auto& c : res.candidates)
            f << quantsp::detail::delta_label(c.delta) << ',' << (c.ok ? 1 : 0) << ','
              << c.status << ',' << format_double(c.surrogate_objective) << ','
              << format_double(c.evaluation) << ',' << format_double(c.solve_seconds)
              << ',' << c.nodes << '\n';
        out << "wrote candidates to " << o.out << "\n";
    }
    return 0;
}

inline int cmd_delta_sensitivity(const Options& o, std::ostream& out) {
    if (o.model.empty()) throw UsageError("--model PATH is required");
    auto p = resolve_problem(o);
    QuantileNetwork net = load_network(o.model, NetKind::Qnn);
    auto deltas = parse_delta_list(o.deltas);
    if (deltas.empty()) throw UsageError("--deltas needs at least one candidate");
    auto spec = surrogate_spec_from(o);
    auto ctx = make_context(o);
    ScenarioSet eval = p.sampler(o.eval_scenarios, resolved_eval_seed(o));

    auto rows = delta_sensitivity(p, net, spec, deltas, eval, ctx, o.workers);
    auto csv = ensure_out_dir(o) / "delta_sensitivity.csv";
    write_delta_csv(rows, csv);
    out << delta_markdown(rows);
    out << "wrote " << csv.string() << "\n";
    return 0;
}

inline int cmd_benchmark(const Options& o, std::ostream& out) {
    auto p = resolve_problem(o);
    BenchmarkConfig cfg;
    cfg.methods = split_list(o.methods);
    cfg.lambdas = parse_double_list(o.lambdas);
    cfg.train_samples = o.train_samples;
    cfg.saa_scenarios = o.saa_scenarios;
    cfg.eval_set_size = o.eval_size;
    cfg.eval_set_count = o.eval_count;
    cfg.delta_candidates = parse_delta_list(o.bench_deltas);
    cfg.delta_eval_size = o.delta_eval_size;
    cfg.train = train_config_from(o);
    cfg.seed = o.seed;
    cfg.workers = o.workers;

    auto ctx = make_context(o);
    std::vector<BenchmarkRow> rows;
    for (double a : parse_double_list(o.alphas)) {
        cfg.alpha = a;
        auto part = run_benchmark(p, cfg, ctx);
        rows.insert(rows.end(), part.begin(), part.end());
    }

    auto dir = ensure_out_dir(o);
    auto csv = dir / "benchmark.csv";
    auto md = dir / "benchmark.md";
    write_benchmark_csv(rows, csv);
    std::string table = benchmark_markdown(rows);
    std::ofstream f(md);
    if (!f) throw IoError("cannot write " + md.string());
    f << table;
    out << table;
    out << "wrote " << csv.string() << " and " << md.string() << "\n";
    return 0;
}

}  // namespace detail

// Entry point shared by the binary and the in-process tests. Exit codes:
// 0 success, 1 runtime or input failure, 2 command-line or config misuse.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    Options o;
    CLI::App app{"quantile-surrogate toolkit for two-stage stochastic programs"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default(true);

    struct CfgBind {
        const CLI::App* owner;  // nullptr: global flag
        CLI::Option* opt;
        std::function<void(const nlohmann::json&)> apply;
    };
    std::map<std::string, std::vector<CfgBind>> binds;
    std::set<std::string> from_config;
    auto bind = [&binds]<class T>(const CLI::App* owner, CLI::Option* opt,
                                  const std::string& key, T& var) {
        binds[key].push_back(
            {owner, opt, [key, &var](const nlohmann::json& j) { var = detail::coerce<T>(key, j); }});
    };

    bind(nullptr, app.add_option("--seed", o.seed, "master random seed"), "seed", o.seed);
    bind(nullptr, app.add_option("--workers", o.workers, "parallel worker threads")
                      ->check(CLI::PositiveNumber),
         "workers", o.workers);
    bind(nullptr,
         app.add_option("--solver", o.solver,
                        "MILP backend (default: QUANTSP_SOLVER or built-in solver)"),
         "solver", o.solver);
    bind(nullptr, app.add_option("--time-limit", o.time_limit, "solver time limit, seconds")
                      ->check(CLI::PositiveNumber),
         "time_limit", o.time_limit);
    bind(nullptr, app.add_option("--gap-tol", o.gap_tol, "solver relative gap tolerance")
                      ->check(CLI::NonNegativeNumber),
         "gap_tol", o.gap_tol);
    bind(nullptr, app.add_option("--out-dir", o.out_dir, "directory for generated artifacts"),
         "out_dir", o.out_dir);
    app.add_option("--config", o.config_path,
                   "JSON config file; flags given on the command line win");

    auto add_problem_flags = [&](CLI::App* sc) {
        bind(sc, sc->add_option("--problem", o.problem, "named instance, cflp-N-M or investment"),
             "problem", o.problem);
        bind(sc, sc->add_option("--instance-file", o.instance_file, "instance JSON to load"),
             "instance_file", o.instance_file);
    };
    auto add_risk_flags = [&](CLI::App* sc) {
        bind(sc, sc->add_option("--lambda", o.lambda, "risk-aversion weight")
                     ->check(CLI::NonNegativeNumber),
             "lambda", o.lambda);
        bind(sc, sc->add_option("--alpha", o.alpha, "cvar tail level in [0,1)"), "alpha",
             o.alpha);
    };
    auto add_tail_flag = [&](CLI::App* sc) {
        bind(sc,
             sc->add_option("--tail-side", o.tail_side, "risk tail: auto, right, or left")
                 ->check(CLI::IsMember({"auto", "right", "left"})),
             "tail_side", o.tail_side);
    };
    auto add_train_flags = [&](CLI::App* sc, const char* note) {
        std::string n = note;
        bind(sc, sc->add_option("--epochs", o.epochs, "training epochs" + n), "epochs",
             o.epochs);
        bind(sc, sc->add_option("--batch", o.batch_size, "minibatch size" + n), "batch_size",
             o.batch_size);
        bind(sc, sc->add_option("--lr", o.learning_rate, "learning rate" + n), "learning_rate",
             o.learning_rate);
        bind(sc,
             sc->add_option("--optimizer", o.optimizer, "adam, adagrad, or rmsprop" + n)
                 ->check(CLI::IsMember({"adam", "adagrad", "rmsprop"})),
             "optimizer", o.optimizer);
        bind(sc, sc->add_option("--dropout", o.dropout, "hidden dropout probability" + n),
             "dropout", o.dropout);
        bind(sc, sc->add_option("--patience", o.patience, "early-stopping patience, epochs"),
             "patience", o.patience);
        bind(sc, sc->add_option("--width", o.width, "hidden layer width" + n), "width",
             o.width);
        bind(sc, sc->add_option("--layers", o.layers, "hidden layer count"), "layers",
             o.layers);
        bind(sc, sc->add_option("--tau-count", o.tau_count,
                                "quantile level count (0: default grid of 50)"),
             "tau_count", o.tau_count);
        bind(sc,
             sc->add_option("--val-fraction", o.validation_fraction,
                            "validation split fraction"),
             "validation_fraction", o.validation_fraction);
    };
    auto add_eval_seed_flag = [&](CLI::App* sc) {
        auto* opt = sc->add_option("--eval-seed", o.eval_seed,
                                   "seed for evaluation scenarios (default: derived from --seed)");
        bind(sc, opt, "eval_seed", o.eval_seed);
        return opt;
    };

    CLI::App* sc_gen = app.add_subcommand("gen-data", "sample first-stage points and solve "
                                                      "one scenario each to build a dataset");
    add_problem_flags(sc_gen);
    bind(sc_gen, sc_gen->add_option("--samples", o.samples, "dataset rows to generate")
                     ->check(CLI::PositiveNumber),
         "samples", o.samples);
    bind(sc_gen, sc_gen->add_option("--out", o.out, "dataset CSV path (default: OUT_DIR/dataset.csv)"),
         "out", o.out);
    bind(sc_gen,
         sc_gen->add_option("--save-instance", o.save_instance_path,
                            "also write the instance JSON here"),
         "save_instance", o.save_instance_path);

    CLI::App* sc_train = app.add_subcommand("train", "fit a quantile network to a dataset");
    bind(sc_train, sc_train->add_option("--data", o.data, "dataset CSV from gen-data"), "data",
         o.data);
    bind(sc_train,
         sc_train->add_option("--kind", o.kind, "network kind: qnn or iqnn")
             ->check(CLI::IsMember({"qnn", "iqnn"})),
         "kind", o.kind);
    bind(sc_train,
         sc_train->add_option("--trials", o.trials,
                              "random search trials; 1 trains with the flags as given")
             ->check(CLI::PositiveNumber),
         "trials", o.trials);
    add_train_flags(sc_train, " (sampled when --trials > 1)");
    bind(sc_train,
         sc_train->add_option("--out", o.out, "model JSON path (default: OUT_DIR/model.json)"),
         "out", o.out);

    CLI::App* sc_solve = app.add_subcommand("solve", "optimize the surrogate problem for a "
                                                     "trained network");
    bind(sc_solve, sc_solve->add_option("--model", o.model, "trained network JSON"), "model",
         o.model);
    add_problem_flags(sc_solve);
    add_risk_flags(sc_solve);
    bind(sc_solve,
         sc_solve->add_option("--delta", o.delta,
                              "crossing tolerance: a number, or none to leave it off"),
         "delta", o.delta);
    add_tail_flag(sc_solve);
    bind(sc_solve, sc_solve->add_option("--out", o.out, "write the solution JSON here"), "out",
         o.out);

    CLI::App* sc_eval = app.add_subcommand("evaluate", "price a fixed first-stage solution on "
                                                       "a scenario set");
    add_problem_flags(sc_eval);
    bind(sc_eval, sc_eval->add_option("--x", o.x, "first-stage values V1,V2,..."), "x", o.x);
    bind(sc_eval, sc_eval->add_option("--solution", o.solution, "solution JSON from solve --out"),
         "solution", o.solution);
    bind(sc_eval,
         sc_eval->add_option("--scenario-file", o.scenario_file,
                             "scenario JSON; weights are normalized on load"),
         "scenario_file", o.scenario_file);
    bind(sc_eval,
         sc_eval->add_option("--scenarios", o.scenarios,
                             "scenario count to sample when no file is given")
             ->check(CLI::PositiveNumber),
         "scenarios", o.scenarios);
    auto* eval_seed_opt = add_eval_seed_flag(sc_eval);
    add_risk_flags(sc_eval);

    CLI::App* sc_delta = app.add_subcommand("select-delta", "pick the crossing tolerance whose "
                                                            "solution evaluates best");
    bind(sc_delta, sc_delta->add_option("--model", o.model, "trained qnn JSON"), "model",
         o.model);
    add_problem_flags(sc_delta);
    add_risk_flags(sc_delta);
    add_tail_flag(sc_delta);
    bind(sc_delta,
         sc_delta->add_option("--deltas", o.deltas, "candidate tolerances, numbers or inf"),
         "deltas", o.deltas);
    bind(sc_delta,
         sc_delta->add_option("--eval-scenarios", o.eval_scenarios,
                              "shared evaluation scenario count")
             ->check(CLI::PositiveNumber),
         "eval_scenarios", o.eval_scenarios);
    auto* delta_seed_opt = add_eval_seed_flag(sc_delta);
    bind(sc_delta, sc_delta->add_option("--out", o.out, "write the candidate table CSV here"),
         "out", o.out);

    CLI::App* sc_sens = app.add_subcommand("delta-sensitivity", "sweep crossing tolerances and "
                                                                "tabulate scaled objectives");
    bind(sc_sens, sc_sens->add_option("--model", o.model, "trained qnn JSON"), "model", o.model);
    add_problem_flags(sc_sens);
    add_risk_flags(sc_sens);
    add_tail_flag(sc_sens);
    bind(sc_sens,
         sc_sens->add_option("--deltas", o.deltas, "candidate tolerances, numbers or inf"),
         "deltas", o.deltas);
    bind(sc_sens,
         sc_sens->add_option("--eval-scenarios", o.eval_scenarios,
                             "shared evaluation scenario count")
             ->check(CLI::PositiveNumber),
         "eval_scenarios", o.eval_scenarios);
    auto* sens_seed_opt = add_eval_seed_flag(sc_sens);

    CLI::App* sc_bench = app.add_subcommand("benchmark", "train surrogates, solve them and the "
                                                         "exact form, evaluate on fresh sets");
    add_problem_flags(sc_bench);
    bind(sc_bench,
         sc_bench->add_option("--methods", o.methods, "subset of qnn,iqnn,saa"), "methods",
         o.methods);
    bind(sc_bench, sc_bench->add_option("--lambdas", o.lambdas, "risk weights to sweep"),
         "lambdas", o.lambdas);
    bind(sc_bench, sc_bench->add_option("--alphas", o.alphas, "cvar tail levels to sweep"),
         "alphas", o.alphas);
    bind(sc_bench,
         sc_bench->add_option("--train-samples", o.train_samples, "dataset rows for training")
             ->check(CLI::PositiveNumber),
         "train_samples", o.train_samples);
    bind(sc_bench,
         sc_bench->add_option("--saa-scenarios", o.saa_scenarios,
                              "scenario count for the exact extensive form")
             ->check(CLI::PositiveNumber),
         "saa_scenarios", o.saa_scenarios);
    bind(sc_bench,
         sc_bench->add_option("--eval-size", o.eval_size, "scenarios per evaluation set")
             ->check(CLI::PositiveNumber),
         "eval_size", o.eval_size);
    bind(sc_bench,
         sc_bench->add_option("--eval-count", o.eval_count, "fresh evaluation sets")
             ->check(CLI::PositiveNumber),
         "eval_count", o.eval_count);
    bind(sc_bench,
         sc_bench->add_option("--deltas", o.bench_deltas,
                              "qnn crossing tolerance candidates (empty: unconstrained)"),
         "deltas", o.bench_deltas);
    bind(sc_bench,
         sc_bench->add_option("--delta-eval-size", o.delta_eval_size,
                              "scenario count for tolerance selection")
             ->check(CLI::PositiveNumber),
         "delta_eval_size", o.delta_eval_size);
    add_train_flags(sc_bench, "");

    for (auto* sc : app.get_subcommands({})) sc->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!o.config_path.empty()) {
            std::ifstream f(o.config_path);
            if (!f) throw UsageError("cannot open config file '" + o.config_path + "'");
            nlohmann::json j;
            try {
                f >> j;
            } catch (const nlohmann::json::exception& e) {
                throw UsageError("config file '" + o.config_path + "' is not valid json: " +
                                 e.what());
            }
            if (!j.is_object())
                throw UsageError("config file must hold a flat json object");
            const CLI::App* active = app.get_subcommands().front();
            for (const auto& [key, value] : j.items()) {
                auto it = binds.find(key);
                if (it == binds.end()) throw UsageError("unknown config key '" + key + "'");
                const CfgBind* match = nullptr;
                for (const auto& b : it->second)
                    if (b.owner == nullptr || b.owner == active) match = &b;
                if (!match)
                    throw UsageError("config key '" + key + "' does not apply to '" +
                                     active->get_name() + "'");
                if (match->opt->count() == 0) {
                    match->apply(value);
                    from_config.insert(key);
                }
            }
        }
        o.eval_seed_given = eval_seed_opt->count() > 0 || delta_seed_opt->count() > 0 ||
                            sens_seed_opt->count() > 0 || from_config.count("eval_seed") > 0;

        if (app.got_subcommand(sc_gen)) return detail::cmd_gen_data(o, out);
        if (app.got_subcommand(sc_train)) return detail::cmd_train(o, out);
        if (app.got_subcommand(sc_solve)) return detail::cmd_solve(o, out);
        if (app.got_subcommand(sc_eval)) return detail::cmd_evaluate(o, out);
        if (app.got_subcommand(sc_delta)) return detail::cmd_select_delta(o, out);
        if (app.got_subcommand(sc_sens)) return detail::cmd_delta_sensitivity(o, out);
        if (app.got_subcommand(sc_bench)) return detail::cmd_benchmark(o, out);
        err << "error: no command given\n";
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace quantsp::cli
