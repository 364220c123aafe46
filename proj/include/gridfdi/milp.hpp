#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "gridfdi/lp.hpp"

namespace gridfdi {

struct MilpOptions {
    double gap_tol = 1e-6;
    double int_tol = 1e-6;
    long node_limit = 500000;
    LpOptions lp;
    // Feasible point used as an initial incumbent / cutoff. Ignored if it
    // fails a feasibility re-check.
    std::optional<std::vector<double>> incumbent_hint;
};

namespace detail {

inline bool milp_point_feasible(const LinearProgram& lp, const std::vector<double>& x,
                                const MilpOptions& opt) {
    if (x.size() != lp.n_vars()) return false;
    for (std::size_t j = 0; j < lp.n_vars(); ++j) {
        const double tol = opt.lp.feas_tol * (1.0 + std::abs(x[j]));
        if (x[j] < lp.lower[j] - tol || x[j] > lp.upper[j] + tol) return false;
    }
    for (int b : lp.binaries)
        if (std::abs(x[b] - std::round(x[b])) > opt.int_tol) return false;
    for (const auto& r : lp.rows) {
        const double act = row_activity(r, x);
        const double tol = opt.lp.feas_tol * (1.0 + std::abs(r.rhs));
        if (r.rel == Rel::Le && act > r.rhs + tol) return false;
        if (r.rel == Rel::Ge && act < r.rhs - tol) return false;
        if (r.rel == Rel::Eq && std::abs(act - r.rhs) > tol) return false;
    }
    return true;
}

}  // namespace detail

/// Branch-and-bound over the binary variables. Depth-first, most-fractional
/// branching, rounded child first; deterministic node order, so results are
/// reproducible run to run.
inline SolveResult solve_milp(const LinearProgram& lp, const MilpOptions& opt = {}) {
    lp.validate();
    if (lp.binaries.empty())
        throw std::invalid_argument("solve_milp on a program without integrality restrictions");

    // Work internally in min sense.
    LinearProgram work = lp;
    const double flip = lp.sense == Sense::Max ? -1.0 : 1.0;
    if (lp.sense == Sense::Max) {
        work.sense = Sense::Min;
        for (auto& c : work.objective) c = -c;
        work.objective_constant = -work.objective_constant;
    }

    LpOptions node_opt = opt.lp;
    node_opt.lexicographic = false;

    struct Node {
        std::vector<std::pair<int, int>> fixes;  // (binary var, 0/1)
        double parent_bound;
    };

    SolveResult out;
    out.status = SolveStatus::Infeasible;

    double incumbent_obj = kInf;
    std::vector<double> incumbent_x;
    if (opt.incumbent_hint && detail::milp_point_feasible(lp, *opt.incumbent_hint, opt)) {
        incumbent_x = *opt.incumbent_hint;
        for (int b : lp.binaries) incumbent_x[b] = std::round(incumbent_x[b]);
        incumbent_obj = detail::dot(work.objective, incumbent_x) + work.objective_constant;
    }

    double frontier_bound = kInf;  // min bound over pruned/open nodes
    long nodes = 0;
    bool hit_node_limit = false;

    std::vector<Node> stack;
    stack.push_back({{}, -kInf});

    while (!stack.empty()) {
        Node node = std::move(stack.back());
        stack.pop_back();

        if (nodes >= opt.node_limit) {
            hit_node_limit = true;
            frontier_bound = std::min(frontier_bound, node.parent_bound);
            continue;
        }

        const double cutoff = incumbent_obj - opt.gap_tol * std::max(1.0, std::abs(incumbent_obj));
        if (node.parent_bound >= cutoff && std::isfinite(incumbent_obj)) {
            frontier_bound = std::min(frontier_bound, node.parent_bound);
            continue;
        }

        ++nodes;
        LinearProgram relax = work;
        relax.binaries.clear();
        for (auto [v, bit] : node.fixes)
            relax.lower[v] = relax.upper[v] = static_cast<double>(bit);

        SolveResult r = detail::solve_lp_basic(relax, node_opt);
        out.iterations += r.iterations;
        if (r.status == SolveStatus::Unbounded) {
            // Unbounded relaxation at the root means an unbounded MILP (any
            // unbounded ray keeps binaries fixed); deeper it cannot appear.
            out.status = SolveStatus::Unbounded;
            out.nodes = nodes;
            return out;
        }
        if (r.status == SolveStatus::IterationLimit) throw SolverError("node LP hit iteration limit");
        if (r.status == SolveStatus::Infeasible) continue;

        const double bound = r.objective;
        if (std::isfinite(incumbent_obj) && bound >= cutoff) {
            frontier_bound = std::min(frontier_bound, bound);
            continue;
        }

        // Most fractional binary; ties to the lowest index.
        int branch_var = -1;
        double best_frac = opt.int_tol;
        for (int b : lp.binaries) {
            const double f = std::abs(r.x[b] - std::round(r.x[b]));
            if (f > best_frac) {
                best_frac = f;
                branch_var = b;
            }
        }

        if (branch_var < 0) {
            if (bound < incumbent_obj) {
                incumbent_obj = bound;
                incumbent_x = r.x;
                for (int b : lp.binaries) incumbent_x[b] = std::round(incumbent_x[b]);
            }
            continue;
        }

        const int first = r.x[branch_var] >= 0.5 ? 1 : 0;
        Node far{node.fixes, bound}, near{node.fixes, bound};
        far.fixes.emplace_back(branch_var, 1 - first);
        near.fixes.emplace_back(branch_var, first);
        stack.push_back(std::move(far));
        stack.push_back(std::move(near));  // explored first
    }

    out.nodes = nodes;
    if (!std::isfinite(incumbent_obj)) {
        out.status = hit_node_limit ? SolveStatus::NodeLimit : SolveStatus::Infeasible;
        return out;
    }

    out.status = hit_node_limit ? SolveStatus::NodeLimit : SolveStatus::Optimal;
    out.x = incumbent_x;
    const double bound_internal = std::min(incumbent_obj, frontier_bound);
    out.best_bound = flip * bound_internal;
    out.gap = std::max(0.0, incumbent_obj - bound_internal) /
              std::max(1.0, std::abs(incumbent_obj));
    detail::finish_result(lp, opt.lp, out);
    return out;
}

inline SolveResult solve_milp(const LinearProgram& lp, double gap_tol) {
    MilpOptions opt;
    opt.gap_tol = gap_tol;
    return solve_milp(lp, opt);
}

}  // namespace gridfdi
