#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gridfdi/ems.hpp"
#include "gridfdi/grid.hpp"
#include "gridfdi/lp.hpp"
#include "gridfdi/measurement.hpp"
#include "gridfdi/milp.hpp"
#include "gridfdi/sensitivity.hpp"

namespace gridfdi {

struct AttackSpec {
    std::string target_branch;                      // l
    std::optional<std::string> target_contingency;  // k_t; absent = base-case objective
    double n1 = 1.0;          // l1 budget on c (radians)
    double load_shift = 0.1;  // L_S, fraction of each bus load
    double sigma = 1e-3;      // l1 penalty, breaks ties toward sparse attacks
    enum class Response { Dcopf, Sced } response = Response::Sced;

    void validate() const {
        if (n1 < 0.0) throw std::invalid_argument("attack budget N1 must be nonnegative");
        if (load_shift <= 0.0 || load_shift > 1.0)
            throw std::invalid_argument("load shift must be in (0, 1]");
        if (sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");
        if (target_branch.empty()) throw std::invalid_argument("target branch required");
    }
};

struct AttackParams {
    EmsParams ems;
    MilpOptions milp;
    double big_m = 1e4;
    double big_m_limit = 1e7;
    double c_zero_tol = 1e-6;
    int rounds = 2;               // sustained measurement rounds in the loop
    std::uint64_t noise_seed = 0; // 0 = noiseless
};

struct AttackResult {
    AttackVector attack;
    double predicted_flow = 0.0;      // physical flow from the predicted dispatch, pu
    double predicted_flow_pct = 0.0;  // vs the target's active-power limit
    double target_limit = 0.0;
    double pre_attack_flow = 0.0;
    DispatchSolution inner_dispatch;  // attacker-predicted re-dispatch
    double milp_gap = 0.0;
    SolveStatus status = SolveStatus::Infeasible;
    long nodes = 0;
    double big_m_used = 0.0;
    int orientation = 1;          // sign of the maximized flow
    bool budget_binding = false;  // (4b) tight at the optimum
    bool uncritical_target_warning = false;
};

namespace detail {

struct TargetRow {
    Eigen::RowVectorXd gen_coeffs;  // over P_G
    double load_const = 0.0;        // row . P_D (true loads)
    double limit = 0.0;
    double pre_flow = 0.0;
};

inline TargetRow make_target_row(const GridCase& grid, const SensitivitySet& sens,
                                 const SecurityConstraintSet& scs, const AttackSpec& spec) {
    TargetRow t;
    const int l = grid.branch_index(spec.target_branch);
    const int ng = static_cast<int>(grid.n_generators());
    const Vector loads = load_vector(grid);
    t.gen_coeffs.resize(ng);
    if (spec.target_contingency) {
        const int k = grid.branch_index(*spec.target_contingency);
        if (sens.radial()[k])
            throw ValidationError("target contingency " + *spec.target_contingency +
                                  " is radial");
        const Matrix& otdf = sens.otdf(k);
        for (int g = 0; g < ng; ++g)
            t.gen_coeffs(g) = otdf(l, grid.bus_index(grid.generators[g].bus));
        t.load_const = otdf.row(l).dot(loads);
        t.limit = scs.limits.pk_max(l);
        for (std::size_t kk = 0; kk < scs.contingencies.size(); ++kk)
            if (scs.contingencies[kk] == k) t.pre_flow = scs.ctg_flows(kk, l);
    } else {
        for (int g = 0; g < ng; ++g)
            t.gen_coeffs(g) = sens.ptdf()(l, grid.bus_index(grid.generators[g].bus));
        t.load_const = sens.ptdf().row(l).dot(loads);
        t.limit = scs.limits.p_max(l);
        t.pre_flow = scs.base_flows(l);
    }
    return t;
}

inline ParametricLp inner_model(const GridCase& grid, const SensitivitySet& sens,
                                const SecurityConstraintSet& scs, const Vector& prior_pg,
                                const AttackSpec& spec, const EmsParams& params) {
    if (spec.response == AttackSpec::Response::Dcopf)
        return build_dcopf_model(grid, sens, load_vector(grid),
                                 active_limits(grid, params.shortterm_factor));
    return build_sced_model(grid, sens, scs, prior_pg, load_vector(grid).sum(), params);
}

}  // namespace detail

/// Single-level MILP for the bi-level attack design: upper-level attack
/// constraints plus the inner re-dispatch LP replaced by its KKT system with
/// big-M complementary slackness (one binary per inner inequality).
/// `orientation` = +-1 selects the sign of the flow being maximized.
inline LinearProgram build_adblp(const GridCase& grid, const SensitivitySet& sens,
                                 const SecurityConstraintSet& scs, const Vector& prior_pg,
                                 const AttackSpec& spec, int orientation = 1,
                                 double big_m = 1e4, const EmsParams& params = {}) {
    spec.validate();
    const auto model = detail::inner_model(grid, sens, scs, prior_pg, spec, params);
    const auto target = detail::make_target_row(grid, sens, scs, spec);
    const int nb = static_cast<int>(grid.n_buses());
    const int ng = static_cast<int>(grid.n_generators());
    const int ny = model.n_y();
    const int ne = model.n_eq();
    const int ni = model.n_ineq();
    const int slack = grid.slack_index();
    const double rho = orientation >= 0 ? 1.0 : -1.0;

    LinearProgram lp;
    lp.sense = Sense::Max;

    // columns: c+ / c- / y / nu / mu / binaries
    std::vector<int> cp(nb), cm(nb), yv(ny), nu(ne), mu(ni), bin(ni);
    for (int i = 0; i < nb; ++i) {
        const double hi = i == slack ? 0.0 : spec.n1;
        cp[i] = lp.add_var("cp_" + std::to_string(grid.buses[i].id), 0.0, hi, -spec.sigma);
        cm[i] = lp.add_var("cm_" + std::to_string(grid.buses[i].id), 0.0, hi, -spec.sigma);
    }
    for (int j = 0; j < ny; ++j) {
        const double obj = j < ng ? rho * target.gen_coeffs(j) : 0.0;
        yv[j] = lp.add_var(model.y_names[j], -kInf, kInf, obj);
    }
    for (int i = 0; i < ne; ++i)
        nu[i] = lp.add_var("nu_" + model.eq_names[i], -kInf, kInf, 0.0);
    for (int i = 0; i < ni; ++i)
        mu[i] = lp.add_var("mu_" + model.ineq_names[i], 0.0, big_m, 0.0);
    for (int i = 0; i < ni; ++i) {
        bin[i] = lp.add_var("z_" + model.ineq_names[i], 0.0, 1.0, 0.0);
        lp.binaries.push_back(bin[i]);
    }
    lp.objective_constant = -rho * target.load_const;

    const std::size_t nv = lp.n_vars();
    auto row = [&]() { return std::vector<double>(nv, 0.0); };

    // (4b) attacker budget
    {
        auto a = row();
        for (int i = 0; i < nb; ++i) a[cp[i]] = a[cm[i]] = 1.0;
        lp.add_row("budget", std::move(a), Rel::Le, spec.n1);
    }
    // (4c) load-shift bounds on Hc, bus by bus
    for (int i = 0; i < nb; ++i) {
        const double cap = spec.load_shift * grid.buses[i].load_p;
        auto hi = row();
        auto lo = row();
        for (int j = 0; j < nb; ++j) {
            const double h = sens.bus_b()(i, j);
            if (h == 0.0) continue;
            hi[cp[j]] = h;
            hi[cm[j]] = -h;
            lo[cp[j]] = -h;
            lo[cm[j]] = h;
        }
        const std::string id = std::to_string(grid.buses[i].id);
        lp.add_row("ls_hi_" + id, std::move(hi), Rel::Le, cap);
        lp.add_row("ls_lo_" + id, std::move(lo), Rel::Le, cap);
    }
    // inner primal feasibility
    for (int i = 0; i < ne; ++i) {
        auto a = row();
        for (int j = 0; j < ny; ++j) a[yv[j]] = model.eq(i, j);
        for (int j = 0; j < nb; ++j) {
            a[cp[j]] = -model.eq_c(i, j);
            a[cm[j]] = model.eq_c(i, j);
        }
        lp.add_row("peq_" + model.eq_names[i], std::move(a), Rel::Eq, model.eq_rhs(i));
    }
    for (int i = 0; i < ni; ++i) {
        auto a = row();
        for (int j = 0; j < ny; ++j) a[yv[j]] = model.ineq(i, j);
        for (int j = 0; j < nb; ++j) {
            a[cp[j]] = -model.ineq_c(i, j);
            a[cm[j]] = model.ineq_c(i, j);
        }
        lp.add_row("pineq_" + model.ineq_names[i], std::move(a), Rel::Le, model.ineq_rhs(i));
    }
    // stationarity: f + E'nu + G'mu = 0
    for (int j = 0; j < ny; ++j) {
        auto a = row();
        for (int i = 0; i < ne; ++i)
            if (model.eq(i, j) != 0.0) a[nu[i]] = model.eq(i, j);
        for (int i = 0; i < ni; ++i)
            if (model.ineq(i, j) != 0.0) a[mu[i]] = model.ineq(i, j);
        lp.add_row("stat_" + model.y_names[j], std::move(a), Rel::Eq, -model.f(j));
    }
    // complementary slackness, big-M on both sides of each inequality
    for (int i = 0; i < ni; ++i) {
        auto a = row();
        a[mu[i]] = 1.0;
        a[bin[i]] = -big_m;
        lp.add_row("cs_mu_" + model.ineq_names[i], std::move(a), Rel::Le, 0.0);

        auto s = row();
        for (int j = 0; j < ny; ++j) s[yv[j]] = -model.ineq(i, j);
        for (int j = 0; j < nb; ++j) {
            s[cp[j]] = model.ineq_c(i, j);
            s[cm[j]] = -model.ineq_c(i, j);
        }
        s[bin[i]] = big_m;
        lp.add_row("cs_slack_" + model.ineq_names[i], std::move(s), Rel::Le,
                   big_m - model.ineq_rhs(i));
    }
    return lp;
}

namespace detail {

// Feasible MILP point from the no-attack solution: c = 0, inner LP solved
// directly, duals mapped through the sign convention, binaries from the
// binding pattern. Used as the branch-and-bound cutoff.
inline std::optional<std::vector<double>> no_attack_incumbent(
    const LinearProgram& milp, const ParametricLp& model, const GridCase& grid,
    const LpOptions& lp_opt) {
    const int nb = static_cast<int>(grid.n_buses());
    LinearProgram inner = instantiate(model, Vector::Zero(nb));
    LpOptions opt = lp_opt;
    opt.lexicographic = false;
    const SolveResult r = solve_lp_basic(inner, opt);
    if (r.status != SolveStatus::Optimal) return std::nullopt;

    std::vector<double> x(milp.n_vars(), 0.0);
    const int ny = model.n_y();
    const int ne = model.n_eq();
    const int ni = model.n_ineq();
    const int base_y = 2 * nb;
    for (int j = 0; j < ny; ++j) x[base_y + j] = r.x[j];
    for (int i = 0; i < ne; ++i) x[base_y + ny + i] = -r.duals[i];
    for (int i = 0; i < ni; ++i) {
        const double m = -r.duals[ne + i];
        x[base_y + ny + ne + i] = std::max(m, 0.0);
        double act = 0.0;
        for (int j = 0; j < ny; ++j) act += model.ineq(i, j) * r.x[j];
        const double slack = model.ineq_rhs(i) - act;
        x[base_y + ny + ne + ni + i] = slack <= 1e-7 ? 1.0 : 0.0;
    }
    return x;
}

}  // namespace detail

/// Solves the attack-design MILP, handling sign orientation, the big-M
/// escalation loop, and the re-substitution check of the predicted flow.
inline AttackResult solve_attack(const GridCase& grid, const SensitivitySet& sens,
                                 const SecurityConstraintSet& scs, const Vector& prior_pg,
                                 const AttackSpec& spec, const AttackParams& params = {}) {
    spec.validate();
    const auto target = detail::make_target_row(grid, sens, scs, spec);

    AttackResult best;
    best.pre_attack_flow = target.pre_flow;
    best.target_limit = target.limit;
    if (spec.target_contingency && spec.response == AttackSpec::Response::Sced) {
        const int l = grid.branch_index(spec.target_branch);
        const int k = grid.branch_index(*spec.target_contingency);
        best.uncritical_target_warning = !scs.is_ctg_critical(k, l);
    }

    // orientation: follow the pre-attack sign; ambiguous near zero -> both
    std::vector<int> orientations;
    const double pre_ratio = target.pre_flow / target.limit;
    if (pre_ratio >= 0.05)
        orientations = {+1};
    else if (pre_ratio <= -0.05)
        orientations = {-1};
    else
        orientations = {+1, -1};

    const auto model = detail::inner_model(grid, sens, scs, prior_pg, spec, params.ems);
    bool have = false;

    for (int rho : orientations) {
        double big_m = params.big_m;
        while (true) {
            LinearProgram milp =
                build_adblp(grid, sens, scs, prior_pg, spec, rho, big_m, params.ems);
            MilpOptions mopt = params.milp;
            mopt.incumbent_hint = detail::no_attack_incumbent(milp, model, grid, mopt.lp);
            const SolveResult r = solve_milp(milp, mopt);
            if (r.status != SolveStatus::Optimal && r.status != SolveStatus::NodeLimit) {
                if (!have) best.status = r.status;
                break;
            }

            const int nb = static_cast<int>(grid.n_buses());
            const int ng = static_cast<int>(grid.n_generators());
            const int ny = model.n_y();
            const int ne = model.n_eq();
            const int ni = model.n_ineq();
            const int base_y = 2 * nb;

            // big-M hygiene: no dual or slack may approach M
            bool dirty = false;
            for (int i = 0; i < ni && !dirty; ++i) {
                const double m = r.x[base_y + ny + ne + i];
                double act = 0.0;
                for (int j = 0; j < ny; ++j) act += model.ineq(i, j) * r.x[base_y + j];
                double cshift = 0.0;
                for (int j = 0; j < nb; ++j)
                    cshift += model.ineq_c(i, j) * (r.x[2 * j] - r.x[2 * j + 1]);
                const double slack = model.ineq_rhs(i) + cshift - act;
                if (m >= 0.99 * big_m || slack >= 0.99 * big_m) dirty = true;
            }
            if (dirty) {
                big_m *= 10.0;
                if (big_m > params.big_m_limit)
                    throw SolverError("big-M validation failed at the escalation limit");
                continue;
            }

            Vector c(nb);
            for (int i = 0; i < nb; ++i) c(i) = r.x[2 * i] - r.x[2 * i + 1];
            Vector pg(ng), rg = Vector::Zero(ng);
            for (int g = 0; g < ng; ++g) pg(g) = r.x[base_y + g];
            if (ny >= 2 * ng)
                for (int g = 0; g < ng; ++g) rg(g) = r.x[base_y + ng + g];

            // (4d)/(4e): physical flow from the predicted dispatch, true loads
            const double flow = target.gen_coeffs.dot(pg) - target.load_const;
            const double resub = rho * flow - spec.sigma * c.cwiseAbs().sum();
            if (std::abs(resub - r.objective) > 1e-6 * (1.0 + std::abs(r.objective)))
                throw SolverError("attack objective fails the re-substitution check");

            if (!have || std::abs(flow) > std::abs(best.predicted_flow)) {
                have = true;
                best.status = r.status;
                best.attack = make_attack_vector(grid, c, params.c_zero_tol);
                best.predicted_flow = flow;
                best.predicted_flow_pct = 100.0 * std::abs(flow) / target.limit;
                best.inner_dispatch.status = SolveStatus::Optimal;
                best.inner_dispatch.pg = pg;
                best.inner_dispatch.rg = rg;
                best.inner_dispatch.objective = model.f.dot(Eigen::Map<const Vector>(
                    r.x.data() + base_y, ny));
                best.milp_gap = r.gap;
                best.nodes += r.nodes;
                best.big_m_used = big_m;
                best.orientation = rho;
                best.budget_binding =
                    std::abs(c.cwiseAbs().sum() - spec.n1) <= 1e-7 * (1.0 + spec.n1);
            }
            break;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Closed-loop attack implementation: attacker reads clean measurements,
// designs c, injects sustained false measurements while the EMS re-dispatches,
// and the physical consequences are evaluated with true loads.

struct LoopRound {
    double j_stat = 0.0;
    bool bdd_alarm = false;
    Vector loads_estimated;
    DispatchSolution dispatch;
    std::size_t n_base_critical = 0;
    std::size_t n_ctg_critical = 0;
};

struct PairFlow {
    int contingency;  // branch index; -1 for the base case
    int branch;
    double cyber_pct;
    double physical_pct;
};

struct LoopReport {
    AttackResult design;
    double pre_attack_flow_pct = 0.0;
    std::vector<LoopRound> rounds;
    double cyber_flow_pct = 0.0;     // operator's view of the target, final round
    double physical_flow_pct = 0.0;  // truth under the final dispatch
    double physical_flow = 0.0;
    std::vector<PairFlow> pair_table;
    bool bdd_alarm_any = false;
    bool sced_infeasible = false;
};

inline LoopReport run_attack_loop(const GridCase& grid, const AttackSpec& spec,
                                  const AttackParams& params = {}) {
    const SensitivitySet sens(grid);
    const Vector true_loads = load_vector(grid);
    const int l = grid.branch_index(spec.target_branch);
    const int kt = spec.target_contingency ? grid.branch_index(*spec.target_contingency) : -1;

    LoopReport report;

    // Round 0: the attacker observes the clean steady state.
    Vector pg_set = p0_vector(grid);
    Vector pg_act = physical_outputs(grid, pg_set);
    auto flow = solve_dc_flow(grid, injection_vector(grid, pg_act, true_loads));
    auto z = measure(grid, flow, params.noise_seed);

    const auto attacker_est = estimate_state(grid, z);
    Vector gen_inj = Vector::Zero(grid.n_buses());
    for (std::size_t g = 0; g < grid.n_generators(); ++g)
        gen_inj(grid.bus_index(grid.generators[g].bus)) += pg_act(g);
    const Vector attacker_loads = gen_inj - sens.bus_b() * attacker_est.angles;
    const auto scs_pre = run_rtca(grid, attacker_loads, pg_act, sens, params.ems);

    report.design = solve_attack(grid, sens, scs_pre, pg_act, spec, params);
    report.pre_attack_flow_pct =
        100.0 * std::abs(report.design.pre_attack_flow) / report.design.target_limit;
    if (report.design.status != SolveStatus::Optimal &&
        report.design.status != SolveStatus::NodeLimit)
        return report;
    const Vector& c = report.design.attack.c;

    // Sustained attack rounds: inject z_bar, let the EMS respond, re-dispatch.
    SecurityConstraintSet scs_cyber;
    for (int round = 0; round < params.rounds; ++round) {
        const auto z_bar = apply_attack(grid, z, c);
        const auto step = ems_step(grid, z_bar, pg_act, sens, params.ems);

        LoopRound audit;
        audit.j_stat = step.estimate.j_stat;
        audit.bdd_alarm = step.estimate.bdd_alarm;
        audit.loads_estimated = step.loads_estimated;
        audit.dispatch = step.dispatch;
        audit.n_base_critical = step.scs.base_critical.size();
        audit.n_ctg_critical = step.scs.ctg_critical.size();
        report.rounds.push_back(audit);
        report.bdd_alarm_any = report.bdd_alarm_any || step.estimate.bdd_alarm;
        scs_cyber = step.scs;

        if (step.dispatch.status != SolveStatus::Optimal) {
            report.sced_infeasible = true;
            return report;
        }
        pg_set = step.dispatch.pg;
        pg_act = physical_outputs(grid, pg_set);
        flow = solve_dc_flow(grid, injection_vector(grid, pg_act, true_loads));
        z = measure(grid, flow, params.noise_seed == 0 ? 0 : params.noise_seed + round + 1);
    }

    // Operator's final view vs. the physical truth under the final dispatch.
    const auto scs_phys = run_rtca(grid, true_loads, pg_act, sens, params.ems);

    auto target_pct = [&](const SecurityConstraintSet& scs) {
        if (kt < 0) return 100.0 * std::abs(scs.base_flows(l)) / scs.limits.p_max(l);
        for (std::size_t kk = 0; kk < scs.contingencies.size(); ++kk)
            if (scs.contingencies[kk] == kt)
                return 100.0 * std::abs(scs.ctg_flows(kk, l)) / scs.limits.pk_max(l);
        return 0.0;
    };
    report.cyber_flow_pct = target_pct(scs_cyber);
    report.physical_flow_pct = target_pct(scs_phys);
    if (kt >= 0) {
        for (std::size_t kk = 0; kk < scs_phys.contingencies.size(); ++kk)
            if (scs_phys.contingencies[kk] == kt) report.physical_flow = scs_phys.ctg_flows(kk, l);
    } else {
        report.physical_flow = scs_phys.base_flows(l);
    }

    for (std::size_t m = 0; m < grid.n_branches(); ++m) {
        if (!grid.branches[m].in_service) continue;
        report.pair_table.push_back(
            {-1, static_cast<int>(m),
             100.0 * std::abs(scs_cyber.base_flows(m)) / scs_cyber.limits.p_max(m),
             100.0 * std::abs(scs_phys.base_flows(m)) / scs_phys.limits.p_max(m)});
    }
    for (std::size_t kk = 0; kk < scs_phys.contingencies.size(); ++kk) {
        const int k = scs_phys.contingencies[kk];
        for (std::size_t m = 0; m < grid.n_branches(); ++m) {
            if (static_cast<int>(m) == k || !grid.branches[m].in_service) continue;
            report.pair_table.push_back(
                {k, static_cast<int>(m),
                 100.0 * std::abs(scs_cyber.ctg_flows(kk, m)) / scs_cyber.limits.pk_max(m),
                 100.0 * std::abs(scs_phys.ctg_flows(kk, m)) / scs_phys.limits.pk_max(m)});
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Exhaustive study over targets, budgets, and load-shift levels.

struct StudyCell {
    bool ok = false;
    std::string error;
    double max_pf_pct = 0.0;
    std::size_t l0 = 0;
    std::size_t subgraph = 0;
};

struct StudyRow {
    std::string target;
    std::string contingency;  // empty for base-case targets
    double load_shift = 0.0;
    std::vector<StudyCell> cells;  // one per N1 grid point
};

struct StudyTable {
    std::vector<double> n1_grid;
    std::vector<StudyRow> rows;
};

struct StudyTarget {
    std::string branch;
    std::optional<std::string> contingency;
};

/// Runs the closed loop for every (target, L_S, N1) cell. Cells are
/// independent; `jobs` > 1 fans them out over threads with results written to
/// fixed slots, so the table is identical regardless of parallelism.
inline StudyTable sweep_study(const GridCase& grid, const std::vector<StudyTarget>& targets,
                              const std::vector<double>& n1_grid,
                              const std::vector<double>& ls_grid,
                              const AttackParams& params = {}, int jobs = 1,
                              AttackSpec::Response response = AttackSpec::Response::Sced) {
    StudyTable table;
    table.n1_grid = n1_grid;
    for (const auto& t : targets)
        for (double ls : ls_grid) {
            StudyRow row;
            row.target = t.branch;
            row.contingency = t.contingency.value_or("");
            row.load_shift = ls;
            row.cells.resize(n1_grid.size());
            table.rows.push_back(std::move(row));
        }

    struct Job {
        std::size_t row, cell;
    };
    std::vector<Job> work;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        for (std::size_t cidx = 0; cidx < n1_grid.size(); ++cidx) work.push_back({r, cidx});

    auto run_cell = [&](const Job& job) {
        StudyRow& row = table.rows[job.row];
        AttackSpec spec;
        spec.target_branch = row.target;
        if (!row.contingency.empty()) spec.target_contingency = row.contingency;
        spec.n1 = table.n1_grid[job.cell];
        spec.load_shift = row.load_shift;
        spec.response = response;
        StudyCell cell;
        try {
            const auto report = run_attack_loop(grid, spec, params);
            if (report.design.status != SolveStatus::Optimal &&
                report.design.status != SolveStatus::NodeLimit) {
                cell.error = std::string("FAIL:design-") + to_string(report.design.status);
            } else if (report.sced_infeasible) {
                cell.error = "FAIL:sced-infeasible";
            } else {
                cell.ok = true;
                cell.max_pf_pct = report.physical_flow_pct;
                const auto metrics = attack_metrics(report.design.attack);
                cell.l0 = metrics.l0;
                cell.subgraph = metrics.subgraph_size;
            }
        } catch (const std::exception& e) {
            cell.error = std::string("FAIL:") + e.what();
        }
        row.cells[job.cell] = std::move(cell);
    };

    if (jobs <= 1) {
        for (const auto& job : work) run_cell(job);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back([&]() {
                for (std::size_t i = next.fetch_add(1); i < work.size(); i = next.fetch_add(1))
                    run_cell(work[i]);
            });
        for (auto& th : pool) th.join();
    }
    return table;
}

}  // namespace gridfdi
