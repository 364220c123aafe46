#pragma once

#include <string>

#include "json.hpp"

#include "gridfdi/lp.hpp"

namespace gridfdi {

namespace detail {

inline std::string lp_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void append_terms(std::string& out, const std::vector<double>& coeffs,
                         const LinearProgram& lp) {
    bool first = true;
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
        const double a = coeffs[j];
        if (a == 0.0) continue;
        if (first) {
            out += (a < 0 ? "- " : "");
            first = false;
        } else {
            out += (a < 0 ? " - " : " + ");
        }
        out += lp_num(std::abs(a)) + " " + lp.var_name(j);
    }
    if (first) out += "0 " + lp.var_name(0);
}

}  // namespace detail

/// Emits the industry-standard LP text format (readable by CPLEX, Gurobi,
/// HiGHS, glpsol --lp, ...) for cross-checking against external solvers.
inline std::string export_lp(const LinearProgram& lp) {
    using detail::lp_num;
    lp.validate();

    std::string out;
    out += lp.sense == Sense::Min ? "Minimize\n" : "Maximize\n";
    out += " obj: ";
    detail::append_terms(out, lp.objective, lp);
    out += "\nSubject To\n";
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        const auto& r = lp.rows[i];
        out += " " + lp.row_names[i] + ": ";
        detail::append_terms(out, r.coeffs, lp);
        out += r.rel == Rel::Le ? " <= " : r.rel == Rel::Ge ? " >= " : " = ";
        out += lp_num(r.rhs) + "\n";
    }
    out += "Bounds\n";
    for (std::size_t j = 0; j < lp.n_vars(); ++j) {
        const double lo = lp.lower[j], hi = lp.upper[j];
        const std::string& n = lp.var_name(j);
        if (!std::isfinite(lo) && !std::isfinite(hi)) {
            out += " " + n + " free\n";
        } else if (!std::isfinite(hi)) {
            out += " " + n + " >= " + lp_num(lo) + "\n";
        } else if (!std::isfinite(lo)) {
            out += " -inf <= " + n + " <= " + lp_num(hi) + "\n";
        } else {
            out += " " + lp_num(lo) + " <= " + n + " <= " + lp_num(hi) + "\n";
        }
    }
    if (!lp.binaries.empty()) {
        out += "Binary\n";
        for (int b : lp.binaries) out += " " + lp.var_name(b) + "\n";
    }
    out += "End\n";
    return out;
}

/// Raw tableau dump for debugging.
inline nlohmann::json lp_debug_json(const LinearProgram& lp) {
    nlohmann::json j;
    j["sense"] = lp.sense == Sense::Min ? "min" : "max";
    j["objective"] = lp.objective;
    j["objective_constant"] = lp.objective_constant;
    j["vars"] = lp.var_names;
    j["lower"] = lp.lower;
    j["upper"] = lp.upper;
    j["binaries"] = lp.binaries;
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        const auto& r = lp.rows[i];
        rows.push_back({{"name", lp.row_names[i]},
                        {"coeffs", r.coeffs},
                        {"rel", r.rel == Rel::Le ? "<=" : r.rel == Rel::Ge ? ">=" : "="},
                        {"rhs", r.rhs}});
    }
    j["rows"] = rows;
    return j;
}

}  // namespace gridfdi
