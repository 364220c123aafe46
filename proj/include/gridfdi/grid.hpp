#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gridfdi {

/// Raised when a case file (or converter input) cannot be tokenized.
/// `line` is 1-based within the input text.
class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Raised when a structurally well-formed case violates a model invariant.
class ValidationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// All quantities are per-unit on the case's system base. Case files carry
// MW / MVAr / MVA; the conversion happens at ingest (see case_io.hpp).

struct Bus {
    int id = 0;
    double base_kv = 0.0;
    double load_p = 0.0;  // real load, >= 0
    double load_q = 0.0;
    bool is_slack = false;

    bool operator==(const Bus&) const = default;
};

struct Branch {
    std::string id;
    int from_bus = 0;
    int to_bus = 0;
    double reactance = 0.0;        // per-unit, > 0
    double rating_longterm = 0.0;  // S_max, per-unit MVA
    double q_from = 0.0;           // base-case reactive flow at the from end
    double q_to = 0.0;
    bool in_service = true;

    bool operator==(const Branch&) const = default;
};

struct Generator {
    std::string id;
    int bus = 0;
    double p_min = 0.0;
    double p_max = 0.0;
    double p0 = 0.0;           // pre-dispatch output
    double cost = 0.0;         // linear generation cost
    double reserve_cost = 0.0;
    double ramp_rate = 0.0;    // per-unit per minute

    bool operator==(const Generator&) const = default;
};

/// Static network model plus the operating point it was ingested with.
/// Treated as immutable once validated; everything downstream holds it by
/// const reference.
struct GridCase {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    double system_base = 100.0;   // MVA
    double loss_fraction = 0.02;  // uniform load scaling used by SCED

    bool operator==(const GridCase&) const = default;

    std::size_t n_buses() const { return buses.size(); }
    std::size_t n_branches() const { return branches.size(); }
    std::size_t n_generators() const { return generators.size(); }

    int bus_index(int bus_id) const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == bus_id) return static_cast<int>(i);
        throw ValidationError("unknown bus id " + std::to_string(bus_id));
    }

    int branch_index(std::string_view branch_id) const {
        for (std::size_t i = 0; i < branches.size(); ++i)
            if (branches[i].id == branch_id) return static_cast<int>(i);
        throw ValidationError("unknown branch id " + std::string(branch_id));
    }

    int generator_index(std::string_view gen_id) const {
        for (std::size_t i = 0; i < generators.size(); ++i)
            if (generators[i].id == gen_id) return static_cast<int>(i);
        throw ValidationError("unknown generator id " + std::string(gen_id));
    }

    int slack_index() const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].is_slack) return static_cast<int>(i);
        throw ValidationError("no slack bus");
    }

    double total_load() const {
        double s = 0.0;
        for (const auto& b : buses) s += b.load_p;
        return s;
    }

    double total_p_max() const {
        double s = 0.0;
        for (const auto& g : generators) s += g.p_max;
        return s;
    }

    std::vector<int> in_service_branch_indices() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < branches.size(); ++i)
            if (branches[i].in_service) out.push_back(static_cast<int>(i));
        return out;
    }

    /// Checks every model invariant; throws ValidationError naming the first
    /// violated one.
    void validate() const {
        if (system_base <= 0.0) throw ValidationError("system base must be positive");
        if (buses.empty()) throw ValidationError("case has no buses");

        std::unordered_map<int, int> bus_pos;
        int slack_count = 0;
        for (const auto& b : buses) {
            if (!bus_pos.emplace(b.id, 1).second)
                throw ValidationError("duplicate bus id " + std::to_string(b.id));
            if (b.load_p < 0.0)
                throw ValidationError("negative load at bus " + std::to_string(b.id));
            if (b.is_slack) ++slack_count;
        }
        if (slack_count == 0) throw ValidationError("no slack bus");
        if (slack_count > 1) throw ValidationError("two slack buses");

        std::unordered_map<std::string, int> branch_ids;
        for (const auto& br : branches) {
            if (!branch_ids.emplace(br.id, 1).second)
                throw ValidationError("duplicate branch id " + br.id);
            if (br.from_bus == br.to_bus)
                throw ValidationError("branch " + br.id + " connects a bus to itself");
            if (!bus_pos.count(br.from_bus) || !bus_pos.count(br.to_bus))
                throw ValidationError("unknown endpoint on branch " + br.id);
            if (br.reactance <= 0.0)
                throw ValidationError("non-positive reactance on branch " + br.id);
            if (br.rating_longterm <= 0.0)
                throw ValidationError("non-positive rating on branch " + br.id);
        }

        std::unordered_map<std::string, int> gen_ids;
        for (const auto& g : generators) {
            if (!gen_ids.emplace(g.id, 1).second)
                throw ValidationError("duplicate generator id " + g.id);
            if (!bus_pos.count(g.bus))
                throw ValidationError("generator " + g.id + " at unknown bus " +
                                      std::to_string(g.bus));
            if (g.p_min > g.p0 || g.p0 > g.p_max)
                throw ValidationError("generator " + g.id + " p0 outside [p_min, p_max]");
            if (g.ramp_rate < 0.0)
                throw ValidationError("generator " + g.id + " has negative ramp rate");
            if (g.cost < 0.0)
                throw ValidationError("generator " + g.id + " has negative cost");
        }

        // Connectivity over in-service branches.
        const std::size_t n = buses.size();
        std::vector<std::vector<int>> adj(n);
        std::unordered_map<int, int> idx;
        for (std::size_t i = 0; i < n; ++i) idx[buses[i].id] = static_cast<int>(i);
        for (const auto& br : branches) {
            if (!br.in_service) continue;
            adj[idx[br.from_bus]].push_back(idx[br.to_bus]);
            adj[idx[br.to_bus]].push_back(idx[br.from_bus]);
        }
        std::vector<char> seen(n, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w : adj[v])
                if (!seen[w]) {
                    seen[w] = 1;
                    stack.push_back(w);
                }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!seen[i])
                throw ValidationError("disconnected bus " + std::to_string(buses[i].id));

        const double required = (1.0 + loss_fraction) * total_load();
        if (total_p_max() < required - 1e-12)
            throw ValidationError("total generation capacity below (1+loss)*load");
    }
};

/// Branches RTCA will take out one at a time: in service, not radial, and
/// with both end buses at or above `kv_floor`. `radial` is indexed like
/// `grid.branches` (produced by the sensitivity factory).
inline std::vector<std::string> contingency_set(const GridCase& grid,
                                                double kv_floor,
                                                const std::vector<bool>& radial) {
    std::vector<std::string> out;
    for (std::size_t m = 0; m < grid.branches.size(); ++m) {
        const auto& br = grid.branches[m];
        if (!br.in_service || radial[m]) continue;
        const auto& f = grid.buses[grid.bus_index(br.from_bus)];
        const auto& t = grid.buses[grid.bus_index(br.to_bus)];
        if (f.base_kv >= kv_floor && t.base_kv >= kv_floor) out.push_back(br.id);
    }
    return out;
}

}  // namespace gridfdi
