#pragma once

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "quantsp/common.hpp"
#include "quantsp/milp/model.hpp"

namespace quantsp::milp {

// CPLEX LP text format, for eyeballing models with external tools.
inline void write_lp(const MipModel& model, std::ostream& os) {
    auto var_name = [&](std::int32_t i) {
        const std::string& n = model.var(i).name;
        return n.empty() ? "v" + std::to_string(i) : n;
    };
    auto append_terms = [&](std::ostringstream& line, const LinExpr& expr) {
        bool first = true;
        for (const auto& t : expr.terms()) {
            double c = t.coef;
            if (first) {
                line << (c < 0 ? "- " : "");
                first = false;
            } else {
                line << (c < 0 ? " - " : " + ");
            }
            line << std::abs(c) << " " << var_name(t.var.index);
        }
        if (first) line << "0";
    };

    os << (model.sense() == Sense::Minimize ? "Minimize" : "Maximize") << "\n obj: ";
    std::ostringstream obj;
    append_terms(obj, model.objective());
    if (model.objective().constant() != 0.0) {
        double c = model.objective().constant();
        obj << (c < 0 ? " - " : " + ") << std::abs(c) << " one_const";
    }
    os << obj.str() << "\nSubject To\n";
    const auto& cons = model.constraints();
    for (std::size_t r = 0; r < cons.size(); ++r) {
        std::ostringstream line;
        line << " " << (cons[r].name.empty() ? "c" + std::to_string(r) : cons[r].name)
             << ": ";
        append_terms(line, cons[r].expr);
        switch (cons[r].rel) {
            case Relation::LessEqual: line << " <= "; break;
            case Relation::GreaterEqual: line << " >= "; break;
            case Relation::Equal: line << " = "; break;
        }
        line << cons[r].rhs;
        os << line.str() << "\n";
    }
    if (model.objective().constant() != 0.0) os << " fix_one: one_const = 1\n";
    os << "Bounds\n";
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(model.num_vars()); ++i) {
        const auto& v = model.var(i);
        if (v.kind == VarKind::Binary) continue;
        os << " ";
        if (std::isfinite(v.lower)) os << v.lower << " <= ";
        else os << "-inf <= ";
        os << var_name(i);
        if (std::isfinite(v.upper)) os << " <= " << v.upper;
        os << "\n";
    }
    bool any_bin = false;
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(model.num_vars()); ++i)
        if (model.var(i).kind == VarKind::Binary) { any_bin = true; break; }
    if (any_bin) {
        os << "Binary\n";
        for (std::int32_t i = 0; i < static_cast<std::int32_t>(model.num_vars()); ++i)
            if (model.var(i).kind == VarKind::Binary) os << " " << var_name(i) << "\n";
    }
    os << "End\n";
}

inline void write_lp_file(const MipModel& model, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    write_lp(model, f);
}

}  // namespace quantsp::milp
