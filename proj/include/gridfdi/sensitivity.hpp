#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "gridfdi/grid.hpp"

namespace gridfdi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Net per-bus real-power injection, G_B * P_G - P_D.
using InjectionVector = Eigen::VectorXd;

struct SusceptanceModel {
    Matrix bus_b;     // n_buses x n_buses, symmetric, zero row sums
    Matrix branch_b;  // n_branches x n_buses; row m maps angles to flow on m
};

/// B matrices over in-service branches. Out-of-service branches contribute
/// nothing and have zero rows in branch_b.
inline SusceptanceModel build_bus_susceptance(const GridCase& grid) {
    const int nb = static_cast<int>(grid.n_buses());
    const int nbr = static_cast<int>(grid.n_branches());
    SusceptanceModel model;
    model.bus_b = Matrix::Zero(nb, nb);
    model.branch_b = Matrix::Zero(nbr, nb);
    for (int m = 0; m < nbr; ++m) {
        const auto& br = grid.branches[m];
        if (!br.in_service) continue;
        const int f = grid.bus_index(br.from_bus);
        const int t = grid.bus_index(br.to_bus);
        const double b = 1.0 / br.reactance;
        model.bus_b(f, f) += b;
        model.bus_b(t, t) += b;
        model.bus_b(f, t) -= b;
        model.bus_b(t, f) -= b;
        model.branch_b(m, f) = b;
        model.branch_b(m, t) = -b;
    }
    return model;
}

struct DcFlowResult {
    Vector flows;   // per branch, positive from->to
    Vector angles;  // per bus, slack pinned to 0
};

namespace detail {

inline Matrix reduced_inverse(const Matrix& bus_b, int slack) {
    const int nb = static_cast<int>(bus_b.rows());
    Matrix red(nb - 1, nb - 1);
    for (int i = 0, ri = 0; i < nb; ++i) {
        if (i == slack) continue;
        for (int j = 0, rj = 0; j < nb; ++j) {
            if (j == slack) continue;
            red(ri, rj) = bus_b(i, j);
            ++rj;
        }
        ++ri;
    }
    Eigen::FullPivLU<Matrix> lu(red);
    if (lu.rank() < nb - 1)
        throw ValidationError("singular susceptance matrix: network is disconnected");
    return lu.inverse();
}

}  // namespace detail

/// DC power flow. The slack bus absorbs any injection imbalance.
inline DcFlowResult solve_dc_flow(const GridCase& grid, const InjectionVector& injections) {
    const auto model = build_bus_susceptance(grid);
    const int nb = static_cast<int>(grid.n_buses());
    const int slack = grid.slack_index();
    const Matrix binv = detail::reduced_inverse(model.bus_b, slack);

    Vector p_red(nb - 1);
    for (int i = 0, r = 0; i < nb; ++i)
        if (i != slack) p_red(r++) = injections(i);

    const Vector theta_red = binv * p_red;
    DcFlowResult out;
    out.angles = Vector::Zero(nb);
    for (int i = 0, r = 0; i < nb; ++i)
        if (i != slack) out.angles(i) = theta_red(r++);
    out.flows = model.branch_b * out.angles;
    return out;
}

/// PTDF entry (m, i): flow change on branch m per unit injected at bus i and
/// withdrawn at the slack. Slack column is identically zero.
inline Matrix compute_ptdf(const GridCase& grid, int slack) {
    const auto model = build_bus_susceptance(grid);
    const int nb = static_cast<int>(grid.n_buses());
    const int nbr = static_cast<int>(grid.n_branches());
    const Matrix binv = detail::reduced_inverse(model.bus_b, slack);

    Matrix ptdf = Matrix::Zero(nbr, nb);
    Matrix bf_red(nbr, nb - 1);
    for (int j = 0, r = 0; j < nb; ++j)
        if (j != slack) bf_red.col(r++) = model.branch_b.col(j);
    const Matrix prod = bf_red * binv;
    for (int j = 0, r = 0; j < nb; ++j)
        if (j != slack) ptdf.col(j) = prod.col(r++);
    return ptdf;
}

struct LodfResult {
    Matrix lodf;               // lodf(m, k); column k meaningless when radial[k]
    std::vector<bool> radial;  // denominator below threshold => bridge
};

/// LODF(m, k): flow change on branch m per unit of pre-outage flow on the
/// outaged branch k. Self entries are -1 by convention. Out-of-service
/// branches are flagged radial so no one simulates their outage.
inline LodfResult compute_lodf(const GridCase& grid, const Matrix& ptdf,
                               double radial_tol = 1e-6) {
    const int nbr = static_cast<int>(grid.n_branches());
    LodfResult out;
    out.lodf = Matrix::Zero(nbr, nbr);
    out.radial.assign(nbr, false);

    for (int k = 0; k < nbr; ++k) {
        const auto& bk = grid.branches[k];
        if (!bk.in_service) {
            out.radial[k] = true;
            continue;
        }
        const int fk = grid.bus_index(bk.from_bus);
        const int tk = grid.bus_index(bk.to_bus);
        const double self = ptdf(k, fk) - ptdf(k, tk);
        const double denom = 1.0 - self;
        if (std::abs(denom) < radial_tol) {
            out.radial[k] = true;
            continue;
        }
        for (int m = 0; m < nbr; ++m) {
            if (m == k) {
                out.lodf(m, k) = -1.0;
                continue;
            }
            out.lodf(m, k) = (ptdf(m, fk) - ptdf(m, tk)) / denom;
        }
    }
    return out;
}

/// Post-contingency sensitivities for outage k:
///   OTDF_k = PTDF + lodf_col_k * ptdf_row_k.
inline Matrix compute_otdf(const Matrix& ptdf, const LodfResult& lodf, int k) {
    if (lodf.radial[k])
        throw ValidationError("OTDF requested for radial branch index " + std::to_string(k));
    return ptdf + lodf.lodf.col(k) * ptdf.row(k);
}

struct ActiveLimits {
    Vector p_max;   // base case, from long-term MVA rating
    Vector pk_max;  // contingency case, from the short-term rating
};

/// Active-power limits backed out of MVA ratings and reactive flows:
///   P_max  = sqrt(S_max^2 - max(|Q_from|, |Q_to|)^2)
///   Pk_max = sqrt((f * S_max)^2 - max(|Qk_from|, |Qk_to|)^2)
/// Contingency-case reactive flows default to the base-case values; pass
/// overrides when better data exists. A reactive flow at or above the rating
/// clamps the limit to a 0.05 pu floor instead of going imaginary.
inline ActiveLimits active_limits(const GridCase& grid, double shortterm_factor = 1.15,
                                  const Vector* q_from_ctg = nullptr,
                                  const Vector* q_to_ctg = nullptr) {
    const int nbr = static_cast<int>(grid.n_branches());
    constexpr double kFloor = 0.05;
    ActiveLimits out;
    out.p_max.resize(nbr);
    out.pk_max.resize(nbr);
    for (int m = 0; m < nbr; ++m) {
        const auto& br = grid.branches[m];
        const double q = std::max(std::abs(br.q_from), std::abs(br.q_to));
        const double s = br.rating_longterm;
        out.p_max(m) = q >= s ? kFloor : std::sqrt(s * s - q * q);

        const double qf = q_from_ctg ? std::abs((*q_from_ctg)(m)) : std::abs(br.q_from);
        const double qt = q_to_ctg ? std::abs((*q_to_ctg)(m)) : std::abs(br.q_to);
        const double qk = std::max(qf, qt);
        const double sk = shortterm_factor * s;
        out.pk_max(m) = qk >= sk ? kFloor : std::sqrt(sk * sk - qk * qk);
    }
    return out;
}

/// Everything the EMS and the attacker need about one topology: PTDF, LODF,
/// radial flags, susceptance matrices, and lazily materialized OTDFs.
/// Immutable after construction; the OTDF cache is internally synchronized.
class SensitivitySet {
public:
    explicit SensitivitySet(const GridCase& grid)
        : slack_(grid.slack_index()),
          model_(build_bus_susceptance(grid)),
          ptdf_(compute_ptdf(grid, slack_)),
          lodf_(compute_lodf(grid, ptdf_)),
          cache_(std::make_shared<OtdfCache>()) {}

    int slack() const { return slack_; }
    const Matrix& ptdf() const { return ptdf_; }
    const Matrix& lodf() const { return lodf_.lodf; }
    const std::vector<bool>& radial() const { return lodf_.radial; }
    const Matrix& bus_b() const { return model_.bus_b; }
    const Matrix& branch_b() const { return model_.branch_b; }

    const Matrix& otdf(int k) const {
        std::lock_guard<std::mutex> lock(cache_->mutex);
        auto it = cache_->otdf.find(k);
        if (it == cache_->otdf.end())
            it = cache_->otdf.emplace(k, compute_otdf(ptdf_, lodf_, k)).first;
        return it->second;
    }

private:
    struct OtdfCache {
        std::mutex mutex;
        std::map<int, Matrix> otdf;
    };

    int slack_;
    SusceptanceModel model_;
    Matrix ptdf_;
    LodfResult lodf_;
    std::shared_ptr<OtdfCache> cache_;
};

/// G_B * P_G - P_D over bus indices.
inline InjectionVector injection_vector(const GridCase& grid, const Vector& pg,
                                        const Vector& loads) {
    InjectionVector inj = -loads;
    for (std::size_t g = 0; g < grid.n_generators(); ++g)
        inj(grid.bus_index(grid.generators[g].bus)) += pg(g);
    return inj;
}

/// Per-bus load vector in case order.
inline Vector load_vector(const GridCase& grid) {
    Vector loads(grid.n_buses());
    for (std::size_t i = 0; i < grid.n_buses(); ++i) loads(i) = grid.buses[i].load_p;
    return loads;
}

/// Pre-dispatch generator outputs in case order.
inline Vector p0_vector(const GridCase& grid) {
    Vector pg(grid.n_generators());
    for (std::size_t g = 0; g < grid.n_generators(); ++g) pg(g) = grid.generators[g].p0;
    return pg;
}

}  // namespace gridfdi
