#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridfdi {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Min, Max };
enum class Rel { Le, Eq, Ge };

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit, NodeLimit };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::IterationLimit: return "iteration-limit";
        case SolveStatus::NodeLimit: return "node-limit";
    }
    return "?";
}

/// Thrown when the simplex loses feasibility beyond repair (a bug or a badly
/// conditioned instance, not a property of the model).
class SolverError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LinearProgram {
    struct Row {
        std::vector<double> coeffs;  // dense, length n_vars
        Rel rel = Rel::Le;
        double rhs = 0.0;
    };

    Sense sense = Sense::Min;
    std::vector<double> objective;
    double objective_constant = 0.0;
    std::vector<Row> rows;
    std::vector<double> lower;  // -inf allowed
    std::vector<double> upper;  // +inf allowed
    std::vector<int> binaries;  // indices restricted to {0,1}
    std::vector<std::string> var_names;
    std::vector<std::string> row_names;

    std::size_t n_vars() const { return objective.size(); }
    std::size_t n_rows() const { return rows.size(); }

    int add_var(std::string name, double lo, double hi, double obj_coeff) {
        var_names.push_back(std::move(name));
        lower.push_back(lo);
        upper.push_back(hi);
        objective.push_back(obj_coeff);
        for (auto& r : rows) r.coeffs.push_back(0.0);
        return static_cast<int>(objective.size()) - 1;
    }

    int add_row(std::string name, std::vector<double> coeffs, Rel rel, double rhs) {
        coeffs.resize(n_vars(), 0.0);
        row_names.push_back(std::move(name));
        rows.push_back(Row{std::move(coeffs), rel, rhs});
        return static_cast<int>(rows.size()) - 1;
    }

    const std::string& var_name(std::size_t j) const { return var_names[j]; }

    void validate() const {
        const std::size_t n = n_vars();
        if (lower.size() != n || upper.size() != n)
            throw std::invalid_argument("bound vectors do not match variable count");
        if (var_names.size() != n) throw std::invalid_argument("variable names missing");
        if (row_names.size() != rows.size()) throw std::invalid_argument("row names missing");
        auto finite_or_inf = [](double v) { return !std::isnan(v); };
        for (double c : objective)
            if (!std::isfinite(c)) throw std::invalid_argument("non-finite objective coefficient");
        for (const auto& r : rows) {
            if (r.coeffs.size() != n) throw std::invalid_argument("row width mismatch");
            for (double a : r.coeffs)
                if (!std::isfinite(a)) throw std::invalid_argument("non-finite row coefficient");
            if (!std::isfinite(r.rhs)) throw std::invalid_argument("non-finite rhs");
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (!finite_or_inf(lower[j]) || !finite_or_inf(upper[j]))
                throw std::invalid_argument("NaN bound");
            if (lower[j] > upper[j])
                throw std::invalid_argument("empty bound interval on " + var_names[j]);
        }
        for (int b : binaries) {
            if (b < 0 || static_cast<std::size_t>(b) >= n)
                throw std::invalid_argument("binary index out of range");
            if (lower[b] < 0.0 || upper[b] > 1.0)
                throw std::invalid_argument("binary variable bounds outside [0,1]");
        }
    }
};

struct LpOptions {
    double feas_tol = 1e-7;
    double cs_tol = 1e-6;
    double pivot_tol = 1e-9;
    int iteration_limit = 50000;
    int bland_after = 40;     // consecutive degenerate pivots before Bland's rule
    int refactor_every = 64;  // explicit inverse rebuild cadence
    bool lexicographic = true;
};

struct SolveResult {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> x;
    std::vector<double> duals;          // per row; shadow prices d obj / d rhs
    std::vector<double> reduced_costs;  // per variable
    double objective = 0.0;
    std::vector<int> binding_rows;
    int iterations = 0;

    // MILP fields
    double best_bound = 0.0;
    double gap = 0.0;
    long nodes = 0;

    bool optimal() const { return status == SolveStatus::Optimal; }
};

namespace detail {

// Bounded-variable primal simplex on the equality form
//   min c'y   s.t.  A y = b,  0 <= y <= u   (u may be +inf)
// assembled from the user model by shifting (finite lower), mirroring
// (upper-bounded only) and splitting (free) variables, plus one slack per
// inequality row and phase-1 artificials.
class BoundedSimplex {
public:
    enum VarKind { kShift, kMirror, kSplit };
    struct ColMap {
        VarKind kind;
        int col = -1;
        int col_neg = -1;  // split only
        double offset = 0.0;
    };

    BoundedSimplex(const LinearProgram& lp, const LpOptions& opt) : lp_(lp), opt_(opt) {
        build();
    }

    SolveStatus run() {
        if (!phase1()) return SolveStatus::Infeasible;
        if (status_ == SolveStatus::IterationLimit) return status_;
        return phase2();
    }

    // Primal values of the original variables.
    std::vector<double> extract_x() const {
        std::vector<double> x(lp_.n_vars());
        for (std::size_t j = 0; j < lp_.n_vars(); ++j) {
            const auto& cm = map_[j];
            switch (cm.kind) {
                case kShift: x[j] = val_[cm.col] + cm.offset; break;
                case kMirror: x[j] = cm.offset - val_[cm.col]; break;
                case kSplit: x[j] = val_[cm.col] - val_[cm.col_neg]; break;
            }
        }
        return x;
    }

    // Row duals under the convention c = A'y + z (min form); the caller flips
    // signs for Max problems.
    std::vector<double> extract_duals() const {
        Eigen::VectorXd cb = Eigen::VectorXd::Zero(m_);
        for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
        Eigen::VectorXd y = Binv_.transpose() * cb;
        return std::vector<double>(y.data(), y.data() + m_);
    }

    std::vector<double> extract_reduced_costs(const std::vector<double>& duals) const {
        std::vector<double> z(lp_.n_vars());
        for (std::size_t j = 0; j < lp_.n_vars(); ++j) {
            double zj = lp_.objective[j] * min_scale_;
            for (std::size_t i = 0; i < lp_.rows.size(); ++i)
                zj -= duals[i] * lp_.rows[i].coeffs[j];
            z[j] = zj;
        }
        return z;
    }

    int iterations() const { return iterations_; }
    double min_scale() const { return min_scale_; }

private:
    const LinearProgram& lp_;
    LpOptions opt_;

    int m_ = 0;            // rows
    int n_cols_ = 0;       // structural + slack + artificial
    int n_real_ = 0;       // structural + slack (artificials follow)
    double min_scale_ = 1.0;  // +1 for Min, -1 for Max

    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
    Eigen::VectorXd cost_;   // phase-2 cost over all columns
    std::vector<double> upper_;
    std::vector<ColMap> map_;

    enum ColStatus : char { AtLower, AtUpper, Basic };
    std::vector<char> status_col_;
    std::vector<int> basis_;     // row -> column
    std::vector<double> val_;    // per column
    Eigen::MatrixXd Binv_;

    int iterations_ = 0;
    SolveStatus status_ = SolveStatus::Optimal;

    void build() {
        min_scale_ = lp_.sense == Sense::Min ? 1.0 : -1.0;
        const std::size_t n = lp_.n_vars();
        m_ = static_cast<int>(lp_.rows.size());

        map_.resize(n);
        int col = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double lo = lp_.lower[j], hi = lp_.upper[j];
            if (std::isfinite(lo)) {
                map_[j] = {kShift, col++, -1, lo};
            } else if (std::isfinite(hi)) {
                map_[j] = {kMirror, col++, -1, hi};
            } else {
                map_[j] = {kSplit, col, col + 1, 0.0};
                col += 2;
            }
        }
        const int n_struct = col;
        int n_slack = 0;
        for (const auto& r : lp_.rows)
            if (r.rel != Rel::Eq) ++n_slack;
        n_real_ = n_struct + n_slack;
        n_cols_ = n_real_ + m_;  // one artificial per row, most unused

        A_ = Eigen::MatrixXd::Zero(m_, n_cols_);
        b_ = Eigen::VectorXd::Zero(m_);
        cost_ = Eigen::VectorXd::Zero(n_cols_);
        upper_.assign(n_cols_, kInf);

        for (std::size_t j = 0; j < n; ++j) {
            const auto& cm = map_[j];
            const double cj = lp_.objective[j] * min_scale_;
            if (cm.kind == kShift) {
                cost_[cm.col] = cj;
                if (std::isfinite(lp_.upper[j])) upper_[cm.col] = lp_.upper[j] - lp_.lower[j];
            } else if (cm.kind == kMirror) {
                cost_[cm.col] = -cj;
            } else {
                cost_[cm.col] = cj;
                cost_[cm.col_neg] = -cj;
            }
        }

        int slack = n_struct;
        slack_col_.assign(m_, -1);
        for (int i = 0; i < m_; ++i) {
            const auto& r = lp_.rows[i];
            double rhs = r.rhs;
            for (std::size_t j = 0; j < n; ++j) {
                const double a = r.coeffs[j];
                if (a == 0.0) continue;
                const auto& cm = map_[j];
                if (cm.kind == kShift) {
                    A_(i, cm.col) = a;
                    rhs -= a * cm.offset;
                } else if (cm.kind == kMirror) {
                    A_(i, cm.col) = -a;
                    rhs -= a * cm.offset;
                } else {
                    A_(i, cm.col) = a;
                    A_(i, cm.col_neg) = -a;
                }
            }
            if (r.rel == Rel::Le) {
                A_(i, slack) = 1.0;
                slack_col_[i] = slack++;
            } else if (r.rel == Rel::Ge) {
                A_(i, slack) = -1.0;
                slack_col_[i] = slack++;
            }
            b_[i] = rhs;
        }
    }

    bool phase1() {
        val_.assign(n_cols_, 0.0);
        status_col_.assign(n_cols_, AtLower);
        basis_.assign(m_, -1);
        Binv_ = Eigen::MatrixXd::Identity(m_, m_);

        Eigen::VectorXd cost1 = Eigen::VectorXd::Zero(n_cols_);
        bool need_phase1 = false;
        for (int i = 0; i < m_; ++i) {
            const double r = b_[i];  // all non-artificials start at value 0
            const int s = slack_col_[i];
            const double sgn = s >= 0 ? A_(i, s) : 0.0;
            if (s >= 0 && r * sgn >= 0.0) {
                basis_[i] = s;
                status_col_[s] = Basic;
                val_[s] = r * sgn;  // sgn is +-1
                Binv_(i, i) = 1.0 / sgn;
            } else {
                const int art = n_real_ + i;
                A_(i, art) = r >= 0.0 ? 1.0 : -1.0;
                basis_[i] = art;
                status_col_[art] = Basic;
                val_[art] = std::abs(r);
                cost1[art] = 1.0;
                Binv_(i, i) = A_(i, art);
                need_phase1 = true;
            }
        }

        if (need_phase1) {
            status_ = iterate(cost1, /*phase1=*/true);
            if (status_ == SolveStatus::IterationLimit) return true;  // caller checks status_
            double infeas = 0.0;
            for (int i = 0; i < m_; ++i)
                if (basis_[i] >= n_real_) infeas += val_[basis_[i]];
            if (infeas > opt_.feas_tol * (1.0 + b_.cwiseAbs().maxCoeff())) return false;
            evict_artificials();
        }
        // Artificials can never re-enter.
        for (int a = n_real_; a < n_cols_; ++a)
            if (status_col_[a] != Basic) upper_[a] = 0.0;
        return true;
    }

    // Pivot zero-valued basic artificials onto real columns where possible;
    // rows with no eligible column are redundant and keep a pinned artificial.
    void evict_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < n_real_) continue;
            Eigen::RowVectorXd brow = Binv_.row(i);
            int pivot_col = -1;
            for (int j = 0; j < n_real_; ++j) {
                if (status_col_[j] == Basic) continue;
                const double w = brow.dot(A_.col(j));
                if (std::abs(w) > 1e-8) {
                    pivot_col = j;
                    break;
                }
            }
            if (pivot_col < 0) {
                upper_[basis_[i]] = 0.0;
                continue;
            }
            do_pivot(pivot_col, i, /*t=*/0.0, /*sigma=*/+1.0, Binv_ * A_.col(pivot_col));
        }
    }

    SolveStatus phase2() {
        status_ = iterate(cost_, /*phase1=*/false);
        if (status_ == SolveStatus::Optimal) refactor();
        return status_;
    }

    void refactor() {
        Eigen::MatrixXd B(m_, m_);
        for (int i = 0; i < m_; ++i) B.col(i) = A_.col(basis_[i]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        Binv_ = lu.inverse();
        // Recompute basic values from the nonbasic point.
        Eigen::VectorXd rhs = b_;
        for (int j = 0; j < n_cols_; ++j)
            if (status_col_[j] != Basic && val_[j] != 0.0) rhs -= A_.col(j) * val_[j];
        Eigen::VectorXd xb = Binv_ * rhs;
        for (int i = 0; i < m_; ++i) val_[basis_[i]] = xb[i];
    }

    SolveStatus iterate(const Eigen::VectorXd& c, bool phase1) {
        int degenerate_run = 0;
        bool bland = false;
        int since_refactor = 0;

        while (true) {
            if (++iterations_ > opt_.iteration_limit) return SolveStatus::IterationLimit;

            Eigen::VectorXd cb(m_);
            for (int i = 0; i < m_; ++i) cb[i] = c[basis_[i]];
            Eigen::VectorXd y = Binv_.transpose() * cb;

            // Pricing: AtLower wants d < 0, AtUpper wants d > 0.
            int enter = -1;
            double best_score = opt_.pivot_tol;
            const int scan_limit = phase1 ? n_cols_ : n_real_;
            for (int j = 0; j < scan_limit; ++j) {
                if (status_col_[j] == Basic) continue;
                if (upper_[j] == 0.0) continue;  // pinned
                const double d = c[j] - y.dot(A_.col(j));
                double viol = 0.0;
                if (status_col_[j] == AtLower && d < -opt_.pivot_tol)
                    viol = -d;
                else if (status_col_[j] == AtUpper && d > opt_.pivot_tol)
                    viol = d;
                if (viol <= 0.0) continue;
                if (bland) {
                    enter = j;
                    break;
                }
                if (viol > best_score) {
                    best_score = viol;
                    enter = j;
                }
            }
            if (enter < 0) return SolveStatus::Optimal;

            const double sigma = status_col_[enter] == AtLower ? 1.0 : -1.0;
            Eigen::VectorXd w = Binv_ * A_.col(enter);

            // Ratio test.
            double t = upper_[enter];  // bound-to-bound flip
            int leave_row = -1;
            double leave_pivot = 0.0;
            for (int i = 0; i < m_; ++i) {
                const double wi = sigma * w[i];
                const int bcol = basis_[i];
                double ratio;
                if (wi > opt_.pivot_tol) {
                    ratio = val_[bcol] / wi;  // basic falls to lower (0)
                } else if (wi < -opt_.pivot_tol && std::isfinite(upper_[bcol])) {
                    ratio = (upper_[bcol] - val_[bcol]) / (-wi);  // basic hits upper
                } else {
                    continue;
                }
                if (ratio < -1e-11) ratio = 0.0;
                bool better;
                if (leave_row < 0) {
                    better = ratio < t;
                } else if (bland) {
                    better = ratio < t - 1e-12 ||
                             (ratio <= t + 1e-12 && bcol < basis_[leave_row]);
                } else {
                    better = ratio < t - 1e-12 ||
                             (ratio <= t + 1e-12 && std::abs(w[i]) > std::abs(leave_pivot));
                }
                if (better) {
                    t = std::min(ratio, t);
                    leave_row = i;
                    leave_pivot = w[i];
                }
            }

            if (leave_row < 0 && !std::isfinite(t)) return SolveStatus::Unbounded;

            if (t <= 1e-11) {
                if (!bland && ++degenerate_run > opt_.bland_after) bland = true;
            } else {
                degenerate_run = 0;
            }

            if (leave_row < 0) {
                // Flip between own bounds.
                for (int i = 0; i < m_; ++i) val_[basis_[i]] -= t * sigma * w[i];
                if (status_col_[enter] == AtLower) {
                    val_[enter] = upper_[enter];
                    status_col_[enter] = AtUpper;
                } else {
                    val_[enter] = 0.0;
                    status_col_[enter] = AtLower;
                }
                continue;
            }

            do_pivot(enter, leave_row, t, sigma, w);
            if (++since_refactor >= opt_.refactor_every) {
                refactor();
                since_refactor = 0;
            }
        }
    }

    void do_pivot(int enter, int leave_row, double t, double sigma, const Eigen::VectorXd& w) {
        const int leave_col = basis_[leave_row];
        for (int i = 0; i < m_; ++i) val_[basis_[i]] -= t * sigma * w[i];
        // AtLower starts at 0 moving +t, AtUpper starts at u moving -t.
        val_[enter] = status_col_[enter] == AtLower ? t : upper_[enter] - t;

        const double wl = sigma * w[leave_row];
        if (wl > 0.0 || !std::isfinite(upper_[leave_col])) {
            status_col_[leave_col] = AtLower;
            val_[leave_col] = 0.0;
        } else {
            status_col_[leave_col] = AtUpper;
            val_[leave_col] = upper_[leave_col];
        }
        status_col_[enter] = Basic;
        basis_[leave_row] = enter;

        const double piv = w[leave_row];
        Binv_.row(leave_row) /= piv;
        for (int i = 0; i < m_; ++i) {
            if (i == leave_row) continue;
            const double f = w[i];
            if (f != 0.0) Binv_.row(i) -= f * Binv_.row(leave_row);
        }
    }

    std::vector<int> slack_col_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double row_activity(const LinearProgram::Row& r, const std::vector<double>& x) {
    return dot(r.coeffs, x);
}

inline SolveResult solve_lp_basic(const LinearProgram& lp, const LpOptions& opt);

// Canonical vertex on a non-unique optimal face: sequentially minimize each
// variable subject to optimality of everything already decided.
inline std::vector<double> lexicographic_refine(const LinearProgram& lp, const LpOptions& opt,
                                                const SolveResult& base) {
    LinearProgram sub = lp;
    sub.sense = Sense::Min;
    const double z_internal = base.objective - lp.objective_constant;
    sub.add_row("obj_pin", lp.objective, Rel::Eq, z_internal);

    std::vector<double> v = base.x;
    LpOptions sub_opt = opt;
    sub_opt.lexicographic = false;
    for (std::size_t j = 0; j < lp.n_vars(); ++j) {
        std::vector<double> e(lp.n_vars(), 0.0);
        e[j] = 1.0;
        sub.objective = e;
        sub.objective_constant = 0.0;
        SolveResult r = solve_lp_basic(sub, sub_opt);
        if (r.status == SolveStatus::Optimal)
            v[j] = r.x[j];
        // else: unbounded direction or numerical trouble; keep incumbent value
        sub.lower[j] = sub.upper[j] = v[j];
    }
    return v;
}

inline void finish_result(const LinearProgram& lp, const LpOptions& opt, SolveResult& res) {
    res.objective = dot(lp.objective, res.x) + lp.objective_constant;
    res.binding_rows.clear();
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        const auto& r = lp.rows[i];
        const double act = row_activity(r, res.x);
        if (r.rel == Rel::Eq || std::abs(act - r.rhs) <= opt.feas_tol * (1.0 + std::abs(r.rhs)))
            res.binding_rows.push_back(static_cast<int>(i));
    }
}

inline SolveResult solve_lp_basic(const LinearProgram& lp, const LpOptions& opt) {
    lp.validate();
    if (!lp.binaries.empty())
        throw std::invalid_argument("solve_lp on a program with integrality restrictions");

    SolveResult res;
    BoundedSimplex simplex(lp, opt);
    res.status = simplex.run();
    res.iterations = simplex.iterations();
    if (res.status != SolveStatus::Optimal) return res;

    res.x = simplex.extract_x();
    res.duals = simplex.extract_duals();
    res.reduced_costs = simplex.extract_reduced_costs(res.duals);
    if (lp.sense == Sense::Max) {
        for (auto& d : res.duals) d = -d;
        for (auto& z : res.reduced_costs) z = -z;
    }

    // Feasibility audit; failures here mean the pivoting went numerically bad.
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        const auto& r = lp.rows[i];
        const double act = row_activity(r, res.x);
        const double tol = 10.0 * opt.feas_tol * (1.0 + std::abs(r.rhs));
        const double viol = r.rel == Rel::Le   ? act - r.rhs
                            : r.rel == Rel::Ge ? r.rhs - act
                                               : std::abs(act - r.rhs);
        if (viol > tol)
            throw SolverError("primal residual " + std::to_string(viol) + " on row " +
                              lp.row_names[i]);
    }

    finish_result(lp, opt, res);
    return res;
}

}  // namespace detail

/// Primal simplex over the documented LinearProgram shape. Deterministic: a
/// fixed pivot rule plus (by default) a lexicographic post-pass that makes the
/// returned vertex canonical even on degenerate optimal faces.
inline SolveResult solve_lp(const LinearProgram& lp, const LpOptions& opt = {}) {
    SolveResult res = detail::solve_lp_basic(lp, opt);
    if (res.status != SolveStatus::Optimal || !opt.lexicographic) return res;
    res.x = detail::lexicographic_refine(lp, opt, res);
    detail::finish_result(lp, opt, res);
    return res;
}

/// Dual objective value under the reported duals; equals the primal objective
/// at optimality (strong duality). A nonzero reduced cost is paired with the
/// finite bound its variable sits at.
inline double dual_objective(const LinearProgram& lp, const SolveResult& res) {
    double obj = lp.objective_constant;
    for (std::size_t i = 0; i < lp.rows.size(); ++i) obj += res.duals[i] * lp.rows[i].rhs;
    for (std::size_t j = 0; j < lp.n_vars(); ++j) {
        const double z = res.reduced_costs[j];
        if (z == 0.0) continue;
        const double dlo = std::isfinite(lp.lower[j]) ? res.x[j] - lp.lower[j] : kInf;
        const double dup = std::isfinite(lp.upper[j]) ? lp.upper[j] - res.x[j] : kInf;
        if (dlo <= dup && std::isfinite(dlo))
            obj += z * lp.lower[j];
        else if (std::isfinite(dup))
            obj += z * lp.upper[j];
    }
    return obj;
}

/// Max complementary-slackness violation over rows and bounds.
inline double cs_violation(const LinearProgram& lp, const SolveResult& res) {
    double worst = 0.0;
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        if (lp.rows[i].rel == Rel::Eq) continue;
        const double slack = lp.rows[i].rhs - detail::row_activity(lp.rows[i], res.x);
        worst = std::max(worst, std::abs(res.duals[i] * slack));
    }
    for (std::size_t j = 0; j < lp.n_vars(); ++j) {
        const double z = res.reduced_costs[j];
        if (z == 0.0) continue;
        const double dlo = std::isfinite(lp.lower[j]) ? res.x[j] - lp.lower[j] : kInf;
        const double dup = std::isfinite(lp.upper[j]) ? lp.upper[j] - res.x[j] : kInf;
        const double gap = std::min(dlo, dup);
        if (std::isfinite(gap)) worst = std::max(worst, std::abs(z) * std::abs(gap));
    }
    return worst;
}

}  // namespace gridfdi
