#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gridfdi/grid.hpp"
#include "gridfdi/sensitivity.hpp"

namespace gridfdi {

/// Rank-deficient measurement set: the WLS problem has no unique solution.
class UnobservableError : public std::runtime_error {
public:
    UnobservableError(int deficiency)
        : std::runtime_error("unobservable measurement set, deficient subspace dimension " +
                             std::to_string(deficiency)),
          deficiency_(deficiency) {}
    int deficiency() const { return deficiency_; }

private:
    int deficiency_;
};

/// Flow measurements at both branch ends plus one injection per bus, in a
/// fixed order: flow:<branch>:from, flow:<branch>:to (in-service branches
/// only), then inj:<bus>.
struct MeasurementSet {
    std::vector<std::string> ids;
    Vector values;
    Vector sigmas;

    std::size_t size() const { return ids.size(); }
};

/// Measurement matrix over bus angles matching the MeasurementSet layout.
inline Matrix measurement_matrix(const GridCase& grid) {
    const auto model = build_bus_susceptance(grid);
    const auto live = grid.in_service_branch_indices();
    const int nb = static_cast<int>(grid.n_buses());
    const int nm = 2 * static_cast<int>(live.size()) + nb;

    Matrix h = Matrix::Zero(nm, nb);
    int r = 0;
    for (int m : live) h.row(r++) = model.branch_b.row(m);
    for (int m : live) h.row(r++) = -model.branch_b.row(m);
    for (int i = 0; i < nb; ++i) h.row(r++) = model.bus_b.row(i);
    return h;
}

inline std::vector<std::string> measurement_ids(const GridCase& grid) {
    std::vector<std::string> ids;
    for (int m : grid.in_service_branch_indices())
        ids.push_back("flow:" + grid.branches[m].id + ":from");
    for (int m : grid.in_service_branch_indices())
        ids.push_back("flow:" + grid.branches[m].id + ":to");
    for (const auto& b : grid.buses) ids.push_back("inj:" + std::to_string(b.id));
    return ids;
}

namespace detail {

// Box-Muller over a fixed-width mt19937_64 stream; avoids the
// implementation-defined std::normal_distribution so measurement draws
// reproduce bit-for-bit.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}
    double next() {
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    double uniform_open() {
        double u;
        do {
            u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        } while (u <= 0.0);
        return u;
    }
    std::mt19937_64 rng_;
};

}  // namespace detail

/// Builds z = H*theta + e for a consistent DC flow solution. Seed 0 means
/// noiseless; any other seed draws reproducible N(0, sigma^2) noise.
inline MeasurementSet measure(const GridCase& grid, const DcFlowResult& flow,
                              std::uint64_t noise_seed, double sigma = 0.01) {
    MeasurementSet ms;
    ms.ids = measurement_ids(grid);
    const Matrix h = measurement_matrix(grid);
    ms.values = h * flow.angles;
    ms.sigmas = Vector::Constant(static_cast<int>(ms.ids.size()), sigma);
    if (noise_seed != 0) {
        detail::GaussianStream g(noise_seed);
        for (int i = 0; i < ms.values.size(); ++i) ms.values(i) += sigma * g.next();
    }
    const int nb = static_cast<int>(grid.n_buses());
    if (static_cast<int>(ms.size()) < 2 * nb - 1)
        throw ValidationError("measurement set below the observability heuristic");
    return ms;
}

/// 99% chi-square quantile via the Wilson-Hilferty transform; the BDD only
/// needs threshold-level accuracy.
inline double chi2_quantile_99(int dof) {
    constexpr double z99 = 2.3263478740408408;
    const double a = 2.0 / (9.0 * dof);
    const double t = 1.0 - a + z99 * std::sqrt(a);
    return dof * t * t * t;
}

struct StateEstimate {
    Vector angles;          // slack pinned to 0
    Vector residuals;       // z - H*theta_hat
    double j_stat = 0.0;    // weighted residual sum of squares
    int dof = 0;
    double bdd_threshold = 0.0;
    bool bdd_alarm = false;
};

namespace detail {

/// WLS core over an arbitrary measurement matrix; the slack column of `h` is
/// excluded from the unknowns and its angle pinned to zero.
inline StateEstimate wls_estimate(const Matrix& h, const Vector& values, const Vector& sigmas,
                                  int slack) {
    const int nb = static_cast<int>(h.cols());
    const int nm = static_cast<int>(h.rows());

    Matrix h_red(nm, nb - 1);
    for (int j = 0, r = 0; j < nb; ++j)
        if (j != slack) h_red.col(r++) = h.col(j);

    const Vector w = sigmas.array().square().inverse();
    const Matrix hw = h_red.transpose() * w.asDiagonal();
    const Matrix gain = hw * h_red;
    Eigen::FullPivLU<Matrix> lu(gain);
    if (lu.rank() < nb - 1) throw UnobservableError(nb - 1 - static_cast<int>(lu.rank()));

    const Vector theta_red = lu.solve(hw * values);
    StateEstimate est;
    est.angles = Vector::Zero(nb);
    for (int j = 0, r = 0; j < nb; ++j)
        if (j != slack) est.angles(j) = theta_red(r++);
    est.residuals = values - h * est.angles;
    est.j_stat = (est.residuals.array().square() * w.array()).sum();
    est.dof = nm - (nb - 1);
    est.bdd_threshold = chi2_quantile_99(est.dof);
    est.bdd_alarm = est.j_stat > est.bdd_threshold;
    return est;
}

}  // namespace detail

/// Weighted least squares over angles with the slack angle fixed at zero,
/// plus the chi-square bad-data check.
inline StateEstimate estimate_state(const GridCase& grid, const MeasurementSet& ms) {
    const Matrix h = measurement_matrix(grid);
    if (h.rows() != static_cast<Eigen::Index>(ms.size()))
        throw std::invalid_argument("measurement set does not match the case layout");
    return detail::wls_estimate(h, ms.values, ms.sigmas, grid.slack_index());
}

/// State perturbation c with its footprint: center buses carry nonzero c,
/// the subgraph adds their neighbors, and touched measurements are the ones
/// whose value the attack changes.
struct AttackVector {
    Vector c;                         // per bus, c[slack] = 0
    std::vector<int> center_buses;    // bus indices
    std::vector<int> subgraph_buses;  // centers plus neighbors
    std::vector<int> touched_measurements;

    double l1() const { return c.cwiseAbs().sum(); }
    std::size_t l0() const { return center_buses.size(); }
};

inline AttackVector make_attack_vector(const GridCase& grid, const Vector& c,
                                       double c_zero_tol = 1e-6) {
    AttackVector av;
    av.c = c;
    const int nb = static_cast<int>(grid.n_buses());
    std::set<int> centers, subgraph;
    for (int i = 0; i < nb; ++i)
        if (std::abs(c(i)) > c_zero_tol) centers.insert(i);
    subgraph = centers;
    for (const auto& br : grid.branches) {
        if (!br.in_service) continue;
        const int f = grid.bus_index(br.from_bus);
        const int t = grid.bus_index(br.to_bus);
        if (centers.count(f)) subgraph.insert(t);
        if (centers.count(t)) subgraph.insert(f);
    }
    av.center_buses.assign(centers.begin(), centers.end());
    av.subgraph_buses.assign(subgraph.begin(), subgraph.end());

    const Matrix h = measurement_matrix(grid);
    const Vector delta = h * c;
    for (int i = 0; i < delta.size(); ++i)
        if (std::abs(delta(i)) > 1e-12) av.touched_measurements.push_back(i);
    return av;
}

/// z_bar = z + H*c: false measurements consistent with the state x + c, so
/// the WLS residual (and the BDD statistic) is untouched for any noise draw.
inline MeasurementSet apply_attack(const GridCase& grid, const MeasurementSet& ms,
                                   const Vector& c) {
    MeasurementSet out = ms;
    out.values = ms.values + measurement_matrix(grid) * c;
    return out;
}

/// Loads the operator will estimate under attack: P_D - H*c with H the bus
/// susceptance matrix. Zero row sums of H preserve the total.
inline Vector false_loads(const GridCase& grid, const Vector& c) {
    const auto model = build_bus_susceptance(grid);
    return load_vector(grid) - model.bus_b * c;
}

struct AttackMetrics {
    double l1 = 0.0;
    std::size_t l0 = 0;
    std::size_t subgraph_size = 0;
    std::size_t touched_count = 0;
};

inline AttackMetrics attack_metrics(const AttackVector& av) {
    return {av.l1(), av.l0(), av.subgraph_buses.size(), av.touched_measurements.size()};
}

}  // namespace gridfdi
