#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridfdi/grid.hpp"
#include "gridfdi/lp.hpp"
#include "gridfdi/measurement.hpp"
#include "gridfdi/sensitivity.hpp"

namespace gridfdi {

struct EmsParams {
    double tau = 0.90;            // contingency-case warning threshold
    double tau_base = -1.0;       // base-case threshold; < 0 means "same as tau"
    double kv_floor = 100.0;      // contingency screening voltage, kV
    double shortterm_factor = 1.15;
    double t_lookahead_min = 15.0;  // T_h
    double t_reserve_min = 10.0;    // T_r
    LpOptions lp;

    double base_threshold() const { return tau_base < 0.0 ? tau : tau_base; }
};

struct CriticalBranch {
    int branch = -1;
    double p0 = 0.0;     // pre-SCED flow
    double limit = 0.0;  // active-power limit
    double ratio = 0.0;  // p0 / limit, signed
};

struct CriticalPair {
    int contingency = -1;  // outaged branch index
    int branch = -1;       // monitored branch index
    double pk0 = 0.0;
    double limit = 0.0;
    double ratio = 0.0;
};

/// RTCA output: everything at or above the warning threshold, plus the full
/// flow tables the screening was computed from.
struct SecurityConstraintSet {
    double tau = 0.0;
    double tau_base = 0.0;
    std::vector<CriticalBranch> base_critical;
    std::vector<CriticalPair> ctg_critical;
    std::vector<int> base_violations;  // indices into base_critical with |ratio| > 1
    std::vector<int> ctg_violations;   // indices into ctg_critical with |ratio| > 1

    std::vector<int> contingencies;  // simulated outages (branch indices)
    Vector base_flows;               // all branches
    Matrix ctg_flows;                // contingencies x branches
    ActiveLimits limits;

    bool is_ctg_critical(int k, int m) const {
        for (const auto& p : ctg_critical)
            if (p.contingency == k && p.branch == m) return true;
        return false;
    }
};

/// Simulates every screened single-branch outage with LODF superposition and
/// collects warning/violation branches against the active-power limits
/// (long-term base, short-term contingency).
inline SecurityConstraintSet run_rtca(const GridCase& grid, const Vector& loads,
                                      const Vector& pg, const SensitivitySet& sens,
                                      const EmsParams& params = {}) {
    SecurityConstraintSet scs;
    scs.tau = params.tau;
    scs.tau_base = params.base_threshold();
    scs.limits = active_limits(grid, params.shortterm_factor);

    const InjectionVector inj = injection_vector(grid, pg, loads);
    scs.base_flows = sens.ptdf() * inj;

    const int nbr = static_cast<int>(grid.n_branches());
    for (int m = 0; m < nbr; ++m) {
        if (!grid.branches[m].in_service) continue;
        const double ratio = scs.base_flows(m) / scs.limits.p_max(m);
        if (std::abs(ratio) >= scs.tau_base) {
            scs.base_critical.push_back({m, scs.base_flows(m), scs.limits.p_max(m), ratio});
            if (std::abs(ratio) > 1.0 + 1e-6)
                scs.base_violations.push_back(static_cast<int>(scs.base_critical.size()) - 1);
        }
    }

    for (const auto& ctg_id : contingency_set(grid, params.kv_floor, sens.radial()))
        scs.contingencies.push_back(grid.branch_index(ctg_id));

    scs.ctg_flows = Matrix::Zero(static_cast<int>(scs.contingencies.size()), nbr);
    for (std::size_t kk = 0; kk < scs.contingencies.size(); ++kk) {
        const int k = scs.contingencies[kk];
        Vector fk = scs.base_flows + sens.lodf().col(k) * scs.base_flows(k);
        fk(k) = 0.0;
        scs.ctg_flows.row(kk) = fk;
        for (int m = 0; m < nbr; ++m) {
            if (m == k || !grid.branches[m].in_service) continue;
            const double ratio = fk(m) / scs.limits.pk_max(m);
            if (std::abs(ratio) >= scs.tau) {
                scs.ctg_critical.push_back({k, m, fk(m), scs.limits.pk_max(m), ratio});
                if (std::abs(ratio) > 1.0 + 1e-6)
                    scs.ctg_violations.push_back(static_cast<int>(scs.ctg_critical.size()) - 1);
            }
        }
    }
    return scs;
}

// ---------------------------------------------------------------------------
// Parametric inner problem
//
//   min f'y   s.t.   E y = e0 + Ec c,    G y <= g0 + Gc c
//
// where c is the attack vector over bus angles. The operator solves it with a
// fixed c (zero from its own point of view: the attack is already inside its
// estimated loads and hot-start flows); the attacker embeds the same rows
// symbolically inside the bi-level MILP. One builder, two consumers, so the
// attacker's model of the re-dispatch is the re-dispatch.

struct ParametricLp {
    Vector f;
    Matrix eq, eq_c;
    Vector eq_rhs;
    Matrix ineq, ineq_c;
    Vector ineq_rhs;
    std::vector<std::string> y_names, eq_names, ineq_names;

    int n_y() const { return static_cast<int>(f.size()); }
    int n_eq() const { return static_cast<int>(eq_rhs.size()); }
    int n_ineq() const { return static_cast<int>(ineq_rhs.size()); }
};

/// SCED over y = [P_G; R_G]: generation-plus-reserve cost, loss-scaled
/// balance, hot-start flow constraints on the critical branches and pairs,
/// ramp, reserve, capacity, and the generator-contingency reserve coverage.
inline ParametricLp build_sced_model(const GridCase& grid, const SensitivitySet& sens,
                                     const SecurityConstraintSet& scs, const Vector& prior_pg,
                                     double loads_total, const EmsParams& params = {}) {
    const int ng = static_cast<int>(grid.n_generators());
    const int nb = static_cast<int>(grid.n_buses());
    ParametricLp m;
    m.f.resize(2 * ng);
    for (int g = 0; g < ng; ++g) {
        m.f(g) = grid.generators[g].cost;
        m.f(ng + g) = grid.generators[g].reserve_cost;
        m.y_names.push_back("pg_" + grid.generators[g].id);
    }
    for (int g = 0; g < ng; ++g) m.y_names.push_back("rg_" + grid.generators[g].id);

    // Balance with losses folded in as a uniform load increase.
    m.eq = Matrix::Zero(1, 2 * ng);
    m.eq.block(0, 0, 1, ng).setOnes();
    m.eq_c = Matrix::Zero(1, nb);
    m.eq_rhs = Vector::Constant(1, (1.0 + grid.loss_fraction) * loads_total);
    m.eq_names.push_back("balance");

    std::vector<Eigen::RowVectorXd> rows, rows_c;
    std::vector<double> rhs;
    auto add = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& ac, double b,
                   std::string name) {
        rows.push_back(a);
        rows_c.push_back(ac);
        rhs.push_back(b);
        m.ineq_names.push_back(std::move(name));
    };

    const Eigen::RowVectorXd zc = Eigen::RowVectorXd::Zero(nb);

    // Base-critical branches: P0 + PTDF(G_B(P_G - P_G0) + Hc) within limits.
    for (const auto& cb : scs.base_critical) {
        Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(2 * ng);
        for (int g = 0; g < ng; ++g) a(g) = sens.ptdf()(cb.branch, grid.bus_index(grid.generators[g].bus));
        const Eigen::RowVectorXd fc = sens.branch_b().row(cb.branch);  // PTDF_m * H
        const double base = cb.p0 - a.head(ng).dot(prior_pg);
        const std::string& id = grid.branches[cb.branch].id;
        add(a, -fc, cb.limit - base, "base_hi:" + id);
        add(-a, fc, cb.limit + base, "base_lo:" + id);
    }

    // Contingency-critical pairs: Pk0 + OTDF_k(G_B dP_G + Hc) + LODF*PTDF^k*Hc.
    for (const auto& cp : scs.ctg_critical) {
        const int k = cp.contingency, br = cp.branch;
        const double lodf_mk = sens.lodf()(br, k);
        Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(2 * ng);
        for (int g = 0; g < ng; ++g) {
            const int bus = grid.bus_index(grid.generators[g].bus);
            a(g) = sens.ptdf()(br, bus) + lodf_mk * sens.ptdf()(k, bus);  // OTDF row
        }
        Eigen::RowVectorXd fc =
            sens.branch_b().row(br) + 2.0 * lodf_mk * sens.branch_b().row(k);
        const double base = cp.pk0 - a.head(ng).dot(prior_pg);
        const std::string name =
            grid.branches[br].id + "@" + grid.branches[k].id;
        add(a, -fc, cp.limit - base, "ctg_hi:" + name);
        add(-a, fc, cp.limit + base, "ctg_lo:" + name);
    }

    // Ramp, reserve, capacity, coverage.
    for (int g = 0; g < ng; ++g) {
        const auto& gen = grid.generators[g];
        Eigen::RowVectorXd ep = Eigen::RowVectorXd::Zero(2 * ng);
        ep(g) = 1.0;
        Eigen::RowVectorXd er = Eigen::RowVectorXd::Zero(2 * ng);
        er(ng + g) = 1.0;

        const double span = gen.ramp_rate * params.t_lookahead_min;
        const double up = std::min(prior_pg(g) + span, gen.p_max);
        const double lo = std::max(prior_pg(g) - span, gen.p_min);
        add(ep, zc, up, "ramp_hi:" + gen.id);
        add(-ep, zc, -lo, "ramp_lo:" + gen.id);

        add(er, zc, gen.ramp_rate * params.t_reserve_min, "res_hi:" + gen.id);
        add(-er, zc, 0.0, "res_lo:" + gen.id);

        add(ep + er, zc, gen.p_max, "cap:" + gen.id);

        // sum of all reserves covers this generator's committed output
        Eigen::RowVectorXd cov = Eigen::RowVectorXd::Zero(2 * ng);
        cov(g) = 1.0;
        cov(ng + g) += 1.0;
        for (int g2 = 0; g2 < ng; ++g2) cov(ng + g2) -= 1.0;
        add(cov, zc, 0.0, "cover:" + gen.id);
    }

    m.ineq.resize(static_cast<int>(rows.size()), 2 * ng);
    m.ineq_c.resize(static_cast<int>(rows.size()), nb);
    m.ineq_rhs.resize(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.ineq.row(static_cast<int>(i)) = rows[i];
        m.ineq_c.row(static_cast<int>(i)) = rows_c[i];
        m.ineq_rhs(static_cast<int>(i)) = rhs[i];
    }
    return m;
}

/// DCOPF over y = P_G: plain balance, every in-service line constrained with
/// the false-injection shift, generator limits. The response model attackers
/// without EMS knowledge assume.
inline ParametricLp build_dcopf_model(const GridCase& grid, const SensitivitySet& sens,
                                      const Vector& loads, const ActiveLimits& limits) {
    const int ng = static_cast<int>(grid.n_generators());
    const int nb = static_cast<int>(grid.n_buses());
    ParametricLp m;
    m.f.resize(ng);
    for (int g = 0; g < ng; ++g) {
        m.f(g) = grid.generators[g].cost;
        m.y_names.push_back("pg_" + grid.generators[g].id);
    }

    m.eq = Matrix::Ones(1, ng);
    m.eq_c = Matrix::Zero(1, nb);
    m.eq_rhs = Vector::Constant(1, loads.sum());
    m.eq_names.push_back("balance");

    std::vector<Eigen::RowVectorXd> rows, rows_c;
    std::vector<double> rhs;
    auto add = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& ac, double b,
                   std::string name) {
        rows.push_back(a);
        rows_c.push_back(ac);
        rhs.push_back(b);
        m.ineq_names.push_back(std::move(name));
    };
    const Eigen::RowVectorXd zc = Eigen::RowVectorXd::Zero(nb);

    for (std::size_t mi = 0; mi < grid.n_branches(); ++mi) {
        if (!grid.branches[mi].in_service) continue;
        const int br = static_cast<int>(mi);
        Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(ng);
        for (int g = 0; g < ng; ++g)
            a(g) = sens.ptdf()(br, grid.bus_index(grid.generators[g].bus));
        const double shed = sens.ptdf().row(br).dot(loads);  // PTDF_m * P_D
        const Eigen::RowVectorXd fc = sens.branch_b().row(br);
        const std::string& id = grid.branches[br].id;
        add(a, -fc, limits.p_max(br) + shed, "flow_hi:" + id);
        add(-a, fc, limits.p_max(br) - shed, "flow_lo:" + id);
    }
    for (int g = 0; g < ng; ++g) {
        const auto& gen = grid.generators[g];
        Eigen::RowVectorXd ep = Eigen::RowVectorXd::Zero(ng);
        ep(g) = 1.0;
        add(ep, zc, gen.p_max, "gen_hi:" + gen.id);
        add(-ep, zc, -gen.p_min, "gen_lo:" + gen.id);
    }

    m.ineq.resize(static_cast<int>(rows.size()), ng);
    m.ineq_c.resize(static_cast<int>(rows.size()), nb);
    m.ineq_rhs.resize(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.ineq.row(static_cast<int>(i)) = rows[i];
        m.ineq_c.row(static_cast<int>(i)) = rows_c[i];
        m.ineq_rhs(static_cast<int>(i)) = rhs[i];
    }
    return m;
}

/// Instantiates the parametric problem at a fixed attack vector (zero for the
/// operator's own solves).
inline LinearProgram instantiate(const ParametricLp& m, const Vector& c) {
    LinearProgram lp;
    lp.sense = Sense::Min;
    for (int j = 0; j < m.n_y(); ++j) lp.add_var(m.y_names[j], -kInf, kInf, m.f(j));
    const Vector e = m.eq_rhs + m.eq_c * c;
    const Vector g = m.ineq_rhs + m.ineq_c * c;
    for (int i = 0; i < m.n_eq(); ++i) {
        std::vector<double> coeffs(m.eq.row(i).data(), m.eq.row(i).data() + m.n_y());
        lp.add_row(m.eq_names[i], std::move(coeffs), Rel::Eq, e(i));
    }
    for (int i = 0; i < m.n_ineq(); ++i) {
        Eigen::RowVectorXd row = m.ineq.row(i);
        std::vector<double> coeffs(row.data(), row.data() + m.n_y());
        lp.add_row(m.ineq_names[i], std::move(coeffs), Rel::Le, g(i));
    }
    return lp;
}

struct DispatchSolution {
    SolveStatus status = SolveStatus::Infeasible;
    Vector pg;
    Vector rg;
    double objective = 0.0;
    double served_target = 0.0;  // RHS of the balance row
    std::vector<std::string> binding;
    std::vector<std::pair<std::string, double>> infeasibility;  // row -> violation
    int iterations = 0;
};

namespace detail {

// Elastic relaxation: minimal total constraint violation, reported per row.
inline std::vector<std::pair<std::string, double>> explain_infeasibility(
    const LinearProgram& lp, const LpOptions& opt) {
    LinearProgram relax = lp;
    relax.sense = Sense::Min;
    std::fill(relax.objective.begin(), relax.objective.end(), 0.0);
    std::vector<int> elastic;
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        const int v = relax.add_var("viol_" + lp.row_names[i], 0.0, kInf, 1.0);
        elastic.push_back(v);
        auto& row = relax.rows[i];
        if (row.rel == Rel::Le)
            row.coeffs[v] = -1.0;
        else if (row.rel == Rel::Ge)
            row.coeffs[v] = 1.0;
        else
            row.coeffs[v] = -1.0;  // one-sided is enough to expose the row
    }
    LpOptions relax_opt = opt;
    relax_opt.lexicographic = false;
    SolveResult r = detail::solve_lp_basic(relax, relax_opt);
    std::vector<std::pair<std::string, double>> out;
    if (r.status != SolveStatus::Optimal) return out;
    for (std::size_t i = 0; i < lp.rows.size(); ++i)
        if (r.x[elastic[i]] > 1e-9) out.emplace_back(lp.row_names[i], r.x[elastic[i]]);
    return out;
}

inline DispatchSolution dispatch_from(const LinearProgram& lp, const SolveResult& r, int ng,
                                      bool has_reserve, double served_target) {
    DispatchSolution d;
    d.status = r.status;
    d.served_target = served_target;
    d.iterations = r.iterations;
    if (r.status != SolveStatus::Optimal) return d;
    d.pg = Eigen::Map<const Vector>(r.x.data(), ng);
    d.rg = has_reserve ? Vector(Eigen::Map<const Vector>(r.x.data() + ng, ng))
                       : Vector(Vector::Zero(ng));
    d.objective = r.objective;
    for (int idx : r.binding_rows) d.binding.push_back(lp.row_names[idx]);
    return d;
}

}  // namespace detail

/// DCOPF response (no reserves, every line limited).
inline DispatchSolution solve_dcopf(const GridCase& grid, const Vector& loads,
                                    const SensitivitySet& sens, const Vector& c_shift,
                                    const EmsParams& params = {}) {
    const auto limits = active_limits(grid, params.shortterm_factor);
    const auto model = build_dcopf_model(grid, sens, loads, limits);
    const LinearProgram lp = instantiate(model, c_shift);
    const SolveResult r = solve_lp(lp, params.lp);
    auto d = detail::dispatch_from(lp, r, static_cast<int>(grid.n_generators()), false,
                                   loads.sum());
    if (r.status == SolveStatus::Infeasible)
        d.infeasibility = detail::explain_infeasibility(lp, params.lp);
    return d;
}

/// Full SCED response against an RTCA constraint set. `c_shift` carries the
/// false-injection vector when the caller is the attacker's predictor; the
/// operator passes zero (its measurements already embed the attack).
inline DispatchSolution solve_sced(const GridCase& grid, const Vector& loads,
                                   const SensitivitySet& sens,
                                   const SecurityConstraintSet& scs, const Vector& prior_pg,
                                   const Vector& c_shift, const EmsParams& params = {}) {
    const auto model = build_sced_model(grid, sens, scs, prior_pg, loads.sum(), params);
    const LinearProgram lp = instantiate(model, c_shift);
    const SolveResult r = solve_lp(lp, params.lp);
    auto d = detail::dispatch_from(lp, r, static_cast<int>(grid.n_generators()), true,
                                   (1.0 + grid.loss_fraction) * loads.sum());
    if (r.status == SolveStatus::Infeasible)
        d.infeasibility = detail::explain_infeasibility(lp, params.lp);
    return d;
}

/// Physical generator outputs for a set of dispatch set points: the slack-bus
/// unit balances the true loads, absorbing the SCED loss margin (the DC
/// stand-in for real network losses). Keeps the measured world zero-sum so
/// the operator's load extraction reproduces the true loads.
inline Vector physical_outputs(const GridCase& grid, const Vector& pg_set) {
    const int slack_bus = grid.buses[grid.slack_index()].id;
    int slack_gen = -1;
    for (std::size_t g = 0; g < grid.n_generators(); ++g)
        if (grid.generators[g].bus == slack_bus) {
            slack_gen = static_cast<int>(g);
            break;
        }
    if (slack_gen < 0)
        throw ValidationError("no generator at the slack bus to absorb the loss margin");
    Vector pg = pg_set;
    pg(slack_gen) += grid.total_load() - pg_set.sum();
    return pg;
}

/// One EMS cycle: state estimation, load extraction from the estimated
/// angles and known (telemetered) generator outputs, RTCA, SCED. All
/// intermediates returned.
struct EmsStepResult {
    StateEstimate estimate;
    Vector loads_estimated;
    SecurityConstraintSet scs;
    DispatchSolution dispatch;
};

inline EmsStepResult ems_step(const GridCase& grid, const MeasurementSet& ms,
                              const Vector& prior_pg, const SensitivitySet& sens,
                              const EmsParams& params = {}) {
    EmsStepResult out;
    out.estimate = estimate_state(grid, ms);
    Vector gen_inj = Vector::Zero(grid.n_buses());
    for (std::size_t g = 0; g < grid.n_generators(); ++g)
        gen_inj(grid.bus_index(grid.generators[g].bus)) += prior_pg(g);
    out.loads_estimated = gen_inj - sens.bus_b() * out.estimate.angles;
    out.scs = run_rtca(grid, out.loads_estimated, prior_pg, sens, params);
    out.dispatch = solve_sced(grid, out.loads_estimated, sens, out.scs, prior_pg,
                              Vector::Zero(grid.n_buses()), params);
    return out;
}

}  // namespace gridfdi
