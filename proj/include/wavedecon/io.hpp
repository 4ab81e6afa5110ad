#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "estimator.hpp"
#include "simlab.hpp"

namespace wavedecon::io {

/// Round-trip decimal: 17 significant digits.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Shortest decimal that reads back to v; used for labels and keys.
inline std::string shortest(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    for (auto& c : cells) {
        while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
        while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r')) c.remove_suffix(1);
    }
    return cells;
}

/// Reads "W_1,...,W_d,Y" with a header row. d is taken from the header.
inline Dataset read_dataset(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t columns = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        columns = split_csv_line(line).size();
        break;
    }
    if (columns < 2) throw ParseError(line_no, "expected a header with at least two columns (W..., Y)");
    std::vector<double> w, y;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != columns)
            throw ParseError(line_no, "expected " + std::to_string(columns) + " columns, found " +
                                          std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            const auto* end = cells[c].data() + cells[c].size();
            auto [ptr, ec] = std::from_chars(cells[c].data(), end, v);
            if (cells[c].empty() || ec != std::errc{} || ptr != end || !std::isfinite(v))
                throw ParseError(line_no, "column " + std::to_string(c + 1) + ": not a number: '" +
                                              std::string(cells[c]) + "'");
            (c + 1 == columns ? y : w).push_back(v);
        }
    }
    return Dataset(std::move(w), std::move(y), columns - 1);
}

inline Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_dataset(in);
}

inline void write_dataset(std::ostream& out, const Dataset& d) {
    for (std::size_t l = 0; l < d.dim(); ++l) out << "w" << (l + 1) << ",";
    out << "y\n";
    for (std::size_t u = 0; u < d.size(); ++u) {
        for (double v : d.covariate(u)) out << fmt(v) << ",";
        out << fmt(d.response(u)) << "\n";
    }
}

inline constexpr std::string_view kResultsHeader =
    "replication,scenario,design,sigma,x0,j_hat,p_hat,p_oracle,j_oracle,f_hat,m_hat,abs_err_m,abs_err_p,"
    "abs_err_oracle,bandwidth,status,error";

inline std::string quote(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c == '\n' ? ' ' : c;
    }
    return q + "\"";
}

inline void write_results(std::ostream& out, const ResultsTable& t) {
    out << kResultsHeader << "\n";
    for (const auto& r : t.rows) {
        out << r.replication << "," << quote(r.scenario) << "," << quote(r.design) << "," << fmt(r.sigma) << ","
            << fmt(r.x0) << ",";
        if (r.ok)
            out << quote(r.j_hat) << "," << fmt(r.p_hat) << "," << fmt(r.p_oracle) << "," << quote(r.j_oracle) << ","
                << fmt(r.f_hat) << "," << fmt(r.m_hat) << "," << fmt(r.abs_err_m) << "," << fmt(r.abs_err_p) << ","
                << fmt(r.abs_err_oracle) << "," << fmt(r.bandwidth) << ",ok,\n";
        else
            out << ",,,,,,,,,,error," << quote(r.error) << "\n";
    }
}

inline void write_gamma_rows(std::ostream& out, const GammaCurve& c) {
    out << "replication,gamma,j_hat,p_hat,abs_err_p\n";
    for (const auto& r : c.rows)
        out << r.replication << "," << fmt(r.gamma) << "," << quote(r.j_hat) << "," << fmt(r.p_hat) << ","
            << fmt(r.abs_err_p) << "\n";
}

inline void write_gamma_curve(std::ostream& out, const GammaCurve& c) {
    out << "gamma,risk\n";
    for (std::size_t i = 0; i < c.gammas.size(); ++i) out << fmt(c.gammas[i]) << "," << fmt(c.risks[i]) << "\n";
}

}  // namespace wavedecon::io
