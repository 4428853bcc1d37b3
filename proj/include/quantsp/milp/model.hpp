#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "quantsp/common.hpp"

namespace quantsp::milp {

enum class VarKind { Continuous, Binary };
enum class Relation { LessEqual, GreaterEqual, Equal };

// Handle into a MipModel. The tag ties a reference to the model (or copies of
// the model) that created it, so cross-model use is caught instead of silently
// indexing into the wrong variable table.
struct VarRef {
    std::int32_t index = -1;
    std::uint32_t tag = 0;
    bool valid() const { return index >= 0; }
};

struct Term {
    double coef;
    VarRef var;
};

// Linear expression: sum of coefficient*variable plus a constant offset.
class LinExpr {
  public:
    LinExpr() = default;
    /* implicit */ LinExpr(double constant) : constant_(constant) {}
    /* implicit */ LinExpr(VarRef v) { terms_.push_back({1.0, v}); }

    LinExpr& add(double coef, VarRef v) {
        terms_.push_back({coef, v});
        return *this;
    }
    LinExpr& add(const LinExpr& other, double scale = 1.0) {
        for (const auto& t : other.terms_) terms_.push_back({scale * t.coef, t.var});
        constant_ += scale * other.constant_;
        return *this;
    }
    LinExpr& operator+=(const LinExpr& other) { return add(other); }
    LinExpr& operator-=(const LinExpr& other) { return add(other, -1.0); }
    LinExpr& operator+=(double c) { constant_ += c; return *this; }
    LinExpr& operator*=(double s) {
        for (auto& t : terms_) t.coef *= s;
        constant_ *= s;
        return *this;
    }

    // Merges duplicate variables and drops zero coefficients.
    void canonicalize() {
        std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
            return a.var.index < b.var.index;
        });
        std::vector<Term> merged;
        merged.reserve(terms_.size());
        for (const auto& t : terms_) {
            if (!merged.empty() && merged.back().var.index == t.var.index)
                merged.back().coef += t.coef;
            else
                merged.push_back(t);
        }
        merged.erase(std::remove_if(merged.begin(), merged.end(),
                                    [](const Term& t) { return t.coef == 0.0; }),
                     merged.end());
        terms_ = std::move(merged);
    }

    const std::vector<Term>& terms() const { return terms_; }
    double constant() const { return constant_; }
    void set_constant(double c) { constant_ = c; }

  private:
    std::vector<Term> terms_;
    double constant_ = 0.0;
};

inline LinExpr operator*(double s, VarRef v) { return LinExpr().add(s, v); }
inline LinExpr operator+(LinExpr a, const LinExpr& b) { a += b; return a; }
inline LinExpr operator-(LinExpr a, const LinExpr& b) { a -= b; return a; }

struct VarData {
    std::string name;
    VarKind kind;
    double lower;
    double upper;
};

struct ConstraintData {
    LinExpr expr;  // canonicalized, constant folded into rhs
    Relation rel;
    double rhs;
    std::string name;
};

enum class SolveStatus { Optimal, FeasibleLimit, Infeasible, Unbounded, Error };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::FeasibleLimit: return "feasible_limit";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        default: return "error";
    }
}

struct SolveResult {
    SolveStatus status = SolveStatus::Error;
    double objective = 0.0;       // in the model's own sense
    std::vector<double> values;   // by variable index; empty unless a solution exists
    double bound = 0.0;           // best proven bound, model sense
    double gap = 0.0;             // relative gap at termination
    double wall_seconds = 0.0;
    std::int64_t nodes = 0;
    std::int64_t simplex_iterations = 0;
    std::string message;

    bool has_solution() const {
        return status == SolveStatus::Optimal || status == SolveStatus::FeasibleLimit;
    }
};

struct SolveLimits {
    double time_limit_seconds = 600.0;
    double gap_tol = 1e-4;
    std::int64_t node_limit = -1;  // <0: unlimited
};

class MipModel {
  public:
    MipModel() : tag_(next_tag()) {}

    VarRef add_var(const std::string& name, VarKind kind, double lower, double upper) {
        if (kind == VarKind::Binary) {
            lower = std::max(lower, 0.0);
            upper = std::min(upper, 1.0);
        }
        if (!(lower <= upper))
            throw InvalidBounds("variable '" + name + "': lower bound " +
                                std::to_string(lower) + " exceeds upper bound " +
                                std::to_string(upper));
        vars_.push_back({name, kind, lower, upper});
        return VarRef{static_cast<std::int32_t>(vars_.size() - 1), tag_};
    }

    VarRef add_continuous(const std::string& name, double lower, double upper) {
        return add_var(name, VarKind::Continuous, lower, upper);
    }
    VarRef add_binary(const std::string& name) {
        return add_var(name, VarKind::Binary, 0.0, 1.0);
    }

    void add_constraint(LinExpr expr, Relation rel, double rhs, std::string name = "") {
        validate(expr);
        expr.canonicalize();
        rhs -= expr.constant();
        expr.set_constant(0.0);
        constraints_.push_back({std::move(expr), rel, rhs, std::move(name)});
    }

    void set_objective(LinExpr expr, Sense sense) {
        validate(expr);
        expr.canonicalize();
        objective_ = std::move(expr);
        sense_ = sense;
    }

    void set_bounds(VarRef v, double lower, double upper) {
        check_ref(v);
        if (!(lower <= upper))
            throw InvalidBounds("set_bounds on '" + vars_[v.index].name +
                                "': lower " + std::to_string(lower) +
                                " exceeds upper " + std::to_string(upper));
        vars_[v.index].lower = lower;
        vars_[v.index].upper = upper;
    }

    void fix(VarRef v, double value) { set_bounds(v, value, value); }

    std::size_t num_vars() const { return vars_.size(); }
    std::size_t num_constraints() const { return constraints_.size(); }
    std::size_t num_binary() const {
        std::size_t k = 0;
        for (const auto& v : vars_)
            if (v.kind == VarKind::Binary && v.lower < v.upper) ++k;
        return k;
    }

    const VarData& var(std::int32_t i) const { return vars_[i]; }
    const VarData& var(VarRef v) const { check_ref(v); return vars_[v.index]; }
    const std::vector<VarData>& vars() const { return vars_; }
    const std::vector<ConstraintData>& constraints() const { return constraints_; }
    const LinExpr& objective() const { return objective_; }
    Sense sense() const { return sense_; }
    std::uint32_t tag() const { return tag_; }

    double eval(const LinExpr& expr, const std::vector<double>& values) const {
        double s = expr.constant();
        for (const auto& t : expr.terms()) s += t.coef * values[t.var.index];
        return s;
    }

    double objective_value(const std::vector<double>& values) const {
        return eval(objective_, values);
    }

    // Max bound/relation violation of a candidate point; 0 means feasible.
    double max_violation(const std::vector<double>& values) const {
        double worst = 0.0;
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            worst = std::max(worst, vars_[i].lower - values[i]);
            worst = std::max(worst, values[i] - vars_[i].upper);
            if (vars_[i].kind == VarKind::Binary)
                worst = std::max(worst, std::abs(values[i] - std::round(values[i])));
        }
        for (const auto& c : constraints_) {
            double lhs = eval(c.expr, values);
            if (c.rel == Relation::LessEqual) worst = std::max(worst, lhs - c.rhs);
            else if (c.rel == Relation::GreaterEqual) worst = std::max(worst, c.rhs - lhs);
            else worst = std::max(worst, std::abs(lhs - c.rhs));
        }
        return worst;
    }

  private:
    void check_ref(VarRef v) const {
        if (!v.valid() || v.tag != tag_ ||
            static_cast<std::size_t>(v.index) >= vars_.size())
            throw UnknownVariable("variable reference does not belong to this model");
    }
    void validate(const LinExpr& expr) const {
        for (const auto& t : expr.terms()) check_ref(t.var);
    }
    static std::uint32_t next_tag() {
        static std::atomic<std::uint32_t> counter{1};
        return counter.fetch_add(1);
    }

    std::uint32_t tag_;
    std::vector<VarData> vars_;
    std::vector<ConstraintData> constraints_;
    LinExpr objective_;
    Sense sense_ = Sense::Minimize;
};

}  // namespace quantsp::milp
