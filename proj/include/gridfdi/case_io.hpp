#pragma once

#include <charconv>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gridfdi/grid.hpp"

// Case file format (documented in README.md):
//
//   CASE <system_base_mva> <loss_fraction>          (optional, defaults 100 / 0.02)
//   BUS
//   <id> <base_kv> <load_mw> <load_mvar> <slack01>
//   BRANCH
//   <id> <from> <to> <x_pu> <rating_mva> <q_from_mvar> <q_to_mvar> <in_service01>
//   GEN
//   <id> <bus> <pmin_mw> <pmax_mw> <p0_mw> <cost> <reserve_cost> <ramp_mw_per_min>
//
// '#' starts a comment (whole line or trailing). Section order is fixed.

namespace gridfdi {

namespace detail {

inline std::string format_double(double v) {
    // Shortest round-trip representation; re-parsing yields the same bits.
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok, int line) {
    double v{};
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError(line, "expected a number, got '" + std::string(tok) + "'");
    return v;
}

inline long parse_int(std::string_view tok, int line) {
    long v{};
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError(line, "expected an integer, got '" + std::string(tok) + "'");
    return v;
}

inline bool parse_bool01(std::string_view tok, int line) {
    if (tok == "0") return false;
    if (tok == "1") return true;
    throw ParseError(line, "expected 0 or 1, got '" + std::string(tok) + "'");
}

inline std::vector<std::string_view> tokenize(std::string_view line) {
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        if (i >= line.size() || line[i] == '#') break;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r' &&
               line[j] != '#')
            ++j;
        toks.push_back(line.substr(i, j - i));
        i = j;
    }
    return toks;
}

}  // namespace detail

/// Parses the documented tabular case format and validates the result.
inline GridCase parse_case(std::string_view text) {
    using namespace detail;

    GridCase grid;
    grid.buses.clear();

    enum class Section { None, Bus, Branch, Gen };
    Section section = Section::None;
    bool saw_bus = false, saw_branch = false, saw_gen = false;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        auto toks = tokenize(line);
        if (toks.empty()) continue;

        if (toks[0] == "CASE") {
            if (saw_bus || saw_branch || saw_gen)
                throw ParseError(line_no, "CASE line must precede all sections");
            if (toks.size() != 3) throw ParseError(line_no, "CASE expects <base_mva> <loss>");
            grid.system_base = parse_double(toks[1], line_no);
            grid.loss_fraction = parse_double(toks[2], line_no);
            continue;
        }
        if (toks[0] == "BUS" && toks.size() == 1) {
            section = Section::Bus;
            saw_bus = true;
            continue;
        }
        if (toks[0] == "BRANCH" && toks.size() == 1) {
            if (!saw_bus) throw ParseError(line_no, "BRANCH section before BUS");
            section = Section::Branch;
            saw_branch = true;
            continue;
        }
        if (toks[0] == "GEN" && toks.size() == 1) {
            if (!saw_branch) throw ParseError(line_no, "GEN section before BRANCH");
            section = Section::Gen;
            saw_gen = true;
            continue;
        }
        if (toks[0] == "END" && toks.size() == 1) break;

        const double base = grid.system_base;
        switch (section) {
            case Section::None:
                throw ParseError(line_no, "data before any section header");
            case Section::Bus: {
                if (toks.size() != 5)
                    throw ParseError(line_no, "BUS row expects 5 columns, got " +
                                                  std::to_string(toks.size()));
                Bus b;
                b.id = static_cast<int>(parse_int(toks[0], line_no));
                b.base_kv = parse_double(toks[1], line_no);
                b.load_p = parse_double(toks[2], line_no) / base;
                b.load_q = parse_double(toks[3], line_no) / base;
                b.is_slack = parse_bool01(toks[4], line_no);
                grid.buses.push_back(b);
                break;
            }
            case Section::Branch: {
                if (toks.size() != 8)
                    throw ParseError(line_no, "BRANCH row expects 8 columns, got " +
                                                  std::to_string(toks.size()));
                Branch br;
                br.id = std::string(toks[0]);
                br.from_bus = static_cast<int>(parse_int(toks[1], line_no));
                br.to_bus = static_cast<int>(parse_int(toks[2], line_no));
                br.reactance = parse_double(toks[3], line_no);
                br.rating_longterm = parse_double(toks[4], line_no) / base;
                br.q_from = parse_double(toks[5], line_no) / base;
                br.q_to = parse_double(toks[6], line_no) / base;
                br.in_service = parse_bool01(toks[7], line_no);
                grid.branches.push_back(br);
                break;
            }
            case Section::Gen: {
                if (toks.size() != 8)
                    throw ParseError(line_no, "GEN row expects 8 columns, got " +
                                                  std::to_string(toks.size()));
                Generator g;
                g.id = std::string(toks[0]);
                g.bus = static_cast<int>(parse_int(toks[1], line_no));
                g.p_min = parse_double(toks[2], line_no) / base;
                g.p_max = parse_double(toks[3], line_no) / base;
                g.p0 = parse_double(toks[4], line_no) / base;
                g.cost = parse_double(toks[5], line_no);
                g.reserve_cost = parse_double(toks[6], line_no);
                g.ramp_rate = parse_double(toks[7], line_no) / base;
                grid.generators.push_back(g);
                break;
            }
        }
    }

    if (!saw_bus) throw ParseError(line_no, "missing BUS section");
    grid.validate();
    return grid;
}

/// Inverse of parse_case: parse_case(serialize_case(g)) == g field for field.
inline std::string serialize_case(const GridCase& grid) {
    using detail::format_double;
    const double base = grid.system_base;

    std::string out;
    out += "CASE " + format_double(grid.system_base) + " " +
           format_double(grid.loss_fraction) + "\n";
    out += "BUS\n# id base_kv load_mw load_mvar slack\n";
    for (const auto& b : grid.buses) {
        out += std::to_string(b.id) + " " + format_double(b.base_kv) + " " +
               format_double(b.load_p * base) + " " + format_double(b.load_q * base) + " " +
               (b.is_slack ? "1" : "0") + "\n";
    }
    out += "BRANCH\n# id from to x_pu rating_mva q_from_mvar q_to_mvar in_service\n";
    for (const auto& br : grid.branches) {
        out += br.id + " " + std::to_string(br.from_bus) + " " + std::to_string(br.to_bus) +
               " " + format_double(br.reactance) + " " +
               format_double(br.rating_longterm * base) + " " + format_double(br.q_from * base) +
               " " + format_double(br.q_to * base) + " " + (br.in_service ? "1" : "0") + "\n";
    }
    out += "GEN\n# id bus pmin_mw pmax_mw p0_mw cost reserve_cost ramp_mw_per_min\n";
    for (const auto& g : grid.generators) {
        out += g.id + " " + std::to_string(g.bus) + " " + format_double(g.p_min * base) + " " +
               format_double(g.p_max * base) + " " + format_double(g.p0 * base) + " " +
               format_double(g.cost) + " " + format_double(g.reserve_cost) + " " +
               format_double(g.ramp_rate * base) + "\n";
    }
    out += "END\n";
    return out;
}

// ---------------------------------------------------------------------------
// Converter for the common research case format (bus/branch/gen matrices in a
// MATLAB-style script). Column mapping is documented in README.md. Fields the
// source format lacks (reactive branch flows, reserve costs) get documented
// defaults; tune them in the emitted file if needed.

namespace detail {

struct NumericTable {
    std::vector<std::vector<double>> rows;
};

inline std::optional<NumericTable> extract_matrix(std::string_view text, std::string_view name) {
    const std::string key = "mpc." + std::string(name);
    std::size_t at = text.find(key);
    if (at == std::string_view::npos) return std::nullopt;
    std::size_t open = text.find('[', at);
    std::size_t close = text.find(']', open);
    if (open == std::string_view::npos || close == std::string_view::npos) return std::nullopt;
    std::string_view body = text.substr(open + 1, close - open - 1);

    NumericTable mat;
    std::size_t pos = 0;
    while (pos < body.size()) {
        std::size_t eor = body.find_first_of(";\n", pos);
        if (eor == std::string_view::npos) eor = body.size();
        std::string_view row = body.substr(pos, eor - pos);
        pos = eor + 1;
        // strip % comments
        if (auto cm = row.find('%'); cm != std::string_view::npos) row = row.substr(0, cm);
        std::vector<double> vals;
        std::size_t i = 0;
        while (i < row.size()) {
            while (i < row.size() && (std::isspace(static_cast<unsigned char>(row[i])) ||
                                      row[i] == ','))
                ++i;
            if (i >= row.size()) break;
            std::size_t j = i;
            while (j < row.size() && !std::isspace(static_cast<unsigned char>(row[j])) &&
                   row[j] != ',' && row[j] != ';')
                ++j;
            double v{};
            auto res = std::from_chars(row.data() + i, row.data() + j, v);
            if (res.ec != std::errc{})
                throw ParseError(1, "bad numeric token in mpc." + std::string(name));
            vals.push_back(v);
            i = j;
        }
        if (!vals.empty()) mat.rows.push_back(std::move(vals));
    }
    return mat;
}

inline double extract_scalar(std::string_view text, std::string_view name, double fallback) {
    const std::string key = "mpc." + std::string(name);
    std::size_t at = text.find(key);
    if (at == std::string_view::npos) return fallback;
    std::size_t eq = text.find('=', at);
    if (eq == std::string_view::npos) return fallback;
    std::size_t i = eq + 1;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ';' && text[j] != '\n') ++j;
    double v{};
    auto res = std::from_chars(text.data() + i, text.data() + j, v);
    return res.ec == std::errc{} ? v : fallback;
}

}  // namespace detail

/// Converts a bus/branch/gen matrix case script into a GridCase.
/// Unrated branches (rateA == 0) get 10x the system base.
inline GridCase convert_matrix_case(std::string_view text) {
    using namespace detail;

    auto bus = extract_matrix(text, "bus");
    auto branch = extract_matrix(text, "branch");
    auto gen = extract_matrix(text, "gen");
    if (!bus || !branch || !gen)
        throw ParseError(1, "input lacks mpc.bus / mpc.branch / mpc.gen matrices");
    auto gencost = extract_matrix(text, "gencost");

    GridCase grid;
    grid.system_base = extract_scalar(text, "baseMVA", 100.0);
    const double base = grid.system_base;

    for (const auto& r : bus->rows) {
        if (r.size() < 10) throw ParseError(1, "mpc.bus row needs >= 10 columns");
        Bus b;
        b.id = static_cast<int>(r[0]);
        b.is_slack = static_cast<int>(r[1]) == 3;
        b.load_p = r[2] / base;
        b.load_q = r[3] / base;
        b.base_kv = r[9];
        grid.buses.push_back(b);
    }
    int seq = 0;
    for (const auto& r : branch->rows) {
        if (r.size() < 11) throw ParseError(1, "mpc.branch row needs >= 11 columns");
        Branch br;
        ++seq;
        br.id = "ln-" + std::to_string(static_cast<int>(r[0])) + "-" +
                std::to_string(static_cast<int>(r[1])) + "-" + std::to_string(seq);
        br.from_bus = static_cast<int>(r[0]);
        br.to_bus = static_cast<int>(r[1]);
        br.reactance = r[3];
        br.rating_longterm = (r[5] > 0.0 ? r[5] : 10.0 * base) / base;
        br.in_service = static_cast<int>(r[10]) != 0;
        grid.branches.push_back(br);
    }
    seq = 0;
    for (std::size_t gi = 0; gi < gen->rows.size(); ++gi) {
        const auto& r = gen->rows[gi];
        if (r.size() < 10) throw ParseError(1, "mpc.gen row needs >= 10 columns");
        Generator g;
        g.id = "g" + std::to_string(++seq);
        g.bus = static_cast<int>(r[0]);
        g.p0 = r[1] / base;
        g.p_max = r[8] / base;
        g.p_min = r[9] / base;
        double ramp_mw_min = 0.0;
        if (r.size() > 16 && r[16] > 0.0)
            ramp_mw_min = r[16];  // ramp_agc, MW/min
        else if (r.size() > 17 && r[17] > 0.0)
            ramp_mw_min = r[17] / 10.0;  // ramp_10 over 10 minutes
        else
            ramp_mw_min = r[8] / 30.0;  // default: full range in 30 min
        g.ramp_rate = ramp_mw_min / base;
        if (gencost && gi < gencost->rows.size()) {
            const auto& c = gencost->rows[gi];
            // polynomial model: take the linear coefficient
            if (c.size() >= 4 && static_cast<int>(c[0]) == 2) {
                int ncost = static_cast<int>(c[3]);
                if (ncost >= 2 && c.size() >= 4 + static_cast<std::size_t>(ncost))
                    g.cost = c[4 + ncost - 2];
            }
        }
        g.reserve_cost = 0.1 * g.cost;
        grid.generators.push_back(g);
    }

    grid.validate();
    return grid;
}

}  // namespace gridfdi
