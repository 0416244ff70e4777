#pragma once

// CSV ingestion and emission: datasets (NA marks a missing response), draws
// and imputations. Doubles are written with 17 significant digits so every
// value survives a write/read cycle exactly.

#include "robustda/core.hpp"
#include "robustda/missing.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace robustda {

namespace csv {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Strict decimal parse; the whole token must be consumed.
inline double parse_double(std::string_view tok, std::size_t line, std::size_t column) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (tok.empty() || ec != std::errc() || ptr != last)
        throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": '" +
                         std::string(tok) + "' is not a number");
    return v;
}

/// Reads non-empty lines; returns (line number, text) pairs.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in) {
    std::vector<std::pair<std::size_t, std::string>> lines;
    std::string s;
    std::size_t no = 0;
    while (std::getline(in, s)) {
        ++no;
        if (trim(s).empty()) continue;
        lines.emplace_back(no, s);
    }
    return lines;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IngestionError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Datasets.

struct IngestedData {
    Dataset data;
    MissingStructure structure;
};

/// Header y1..yd then x1..xp; the literal token NA (case-sensitive) marks a
/// missing response. Predictors must be complete.
inline IngestedData ingest_csv(std::istream& in) {
    const auto lines = csv::read_lines(in);
    if (lines.empty()) throw ParseError("empty file: a header row is required");
    const auto header = csv::split(lines.front().second);
    Index d = 0;
    while (static_cast<std::size_t>(d) < header.size() && header[static_cast<std::size_t>(d)] == "y" + std::to_string(d + 1))
        ++d;
    const Index p = static_cast<Index>(header.size()) - d;
    for (Index c = d; c < d + p; ++c)
        if (header[static_cast<std::size_t>(c)] != "x" + std::to_string(c - d + 1))
            throw ParseError("line " + std::to_string(lines.front().first) + ": header column " + std::to_string(c + 1) +
                             " is '" + std::string(header[static_cast<std::size_t>(c)]) + "', expected '" +
                             (c == d ? "y" + std::to_string(d + 1) + "' or 'x1" : "x" + std::to_string(c - d + 1)) +
                             "'");
    if (d == 0 || p == 0) throw ParseError("header must name at least one response (y1) and one predictor (x1)");

    const Index n = static_cast<Index>(lines.size() - 1);
    if (n == 0) throw ParseError("no data rows after the header");
    Matrix y = Matrix::Zero(n, d), x(n, p);
    Mask mask = Mask::Constant(n, d, true);
    for (Index i = 0; i < n; ++i) {
        const auto& [no, text] = lines[static_cast<std::size_t>(i + 1)];
        const auto tok = csv::split(text);
        if (static_cast<Index>(tok.size()) != d + p)
            throw ParseError("line " + std::to_string(no) + ": expected " + std::to_string(d + p) + " fields, found " +
                             std::to_string(tok.size()));
        for (Index j = 0; j < d + p; ++j) {
            const auto t = tok[static_cast<std::size_t>(j)];
            if (t == "NA") {
                if (j >= d)
                    throw IngestionError("line " + std::to_string(no) + ": missing value in predictor column x" +
                                         std::to_string(j - d + 1));
                mask(i, j) = false;
                continue;
            }
            const double v = csv::parse_double(t, no, static_cast<std::size_t>(j + 1));
            if (j < d)
                y(i, j) = v;
            else
                x(i, j - d) = v;
        }
        if (!mask.row(i).any()) throw IngestionError("line " + std::to_string(no) + ": every response is NA");
    }
    Dataset data(std::move(y), mask, std::move(x));
    return {data, MissingStructure(mask)};
}

inline IngestedData ingest_csv(const std::string& path) {
    auto in = csv::open_input(path);
    return ingest_csv(in);
}

inline void write_dataset_csv(std::ostream& out, const Dataset& data) {
    for (Index j = 0; j < data.d(); ++j) out << (j ? "," : "") << 'y' << j + 1;
    for (Index j = 0; j < data.p(); ++j) out << ",x" << j + 1;
    out << '\n';
    for (Index i = 0; i < data.n(); ++i) {
        for (Index j = 0; j < data.d(); ++j)
            out << (j ? "," : "") << (data.observed()(i, j) ? csv::format_double(data.y()(i, j)) : "NA");
        for (Index j = 0; j < data.p(); ++j) out << ',' << csv::format_double(data.x()(i, j));
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Draws: iteration, B row-major (B11, B12, ...), Sigma lower triangle
// row-major (S11, S21, S22, ...). Iterations are numbered from burn_in + 1.

inline std::string draws_header(Index p, Index d) {
    std::string h = "iteration";
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < d; ++j) h += ",B" + std::to_string(i + 1) + std::to_string(j + 1);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j <= i; ++j) h += ",S" + std::to_string(i + 1) + std::to_string(j + 1);
    return h;
}

inline void write_draws_csv(std::ostream& out, const ChainOutput& chain) {
    if (chain.states.empty()) throw InvalidArgument("chain has no recorded states");
    const Index p = chain.states.front().beta.rows(), d = chain.states.front().sigma.rows();
    out << draws_header(p, d) << '\n';
    for (std::size_t t = 0; t < chain.states.size(); ++t) {
        const auto& s = chain.states[t];
        out << chain.meta.burn_in + t + 1;
        for (Index i = 0; i < p; ++i)
            for (Index j = 0; j < d; ++j) out << ',' << csv::format_double(s.beta(i, j));
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j <= i; ++j) out << ',' << csv::format_double(s.sigma(i, j));
        out << '\n';
    }
}

struct DrawsTable {
    std::vector<std::size_t> iterations;
    std::vector<RegressionState> states;
};

/// Inverse of write_draws_csv; p and d are recovered from the header.
inline DrawsTable read_draws_csv(std::istream& in) {
    const auto lines = csv::read_lines(in);
    if (lines.empty()) throw ParseError("draws file has no header");
    const auto header = csv::split(lines.front().second);
    Index nb = 0, ns = 0;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (!header[c].empty() && header[c].front() == 'B') ++nb;
        if (!header[c].empty() && header[c].front() == 'S') ++ns;
    }
    Index d = 0;
    while (d * (d + 1) / 2 < ns) ++d;
    if (header.empty() || header.front() != "iteration" || d == 0 || d * (d + 1) / 2 != ns || nb % d != 0)
        throw ParseError("line " + std::to_string(lines.front().first) + ": unrecognized draws header");
    const Index p = nb / d;
    if (csv::split(draws_header(p, d)) != header)
        throw ParseError("line " + std::to_string(lines.front().first) + ": unrecognized draws header");

    DrawsTable table;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto& [no, text] = lines[k];
        const auto tok = csv::split(text);
        if (tok.size() != header.size())
            throw ParseError("line " + std::to_string(no) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(tok.size()));
        table.iterations.push_back(static_cast<std::size_t>(csv::parse_double(tok[0], no, 1)));
        Matrix b(p, d), s(d, d);
        std::size_t c = 1;
        for (Index i = 0; i < p; ++i)
            for (Index j = 0; j < d; ++j, ++c) b(i, j) = csv::parse_double(tok[c], no, c + 1);
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j <= i; ++j, ++c) s(i, j) = s(j, i) = csv::parse_double(tok[c], no, c + 1);
        RegressionState st;
        st.beta = std::move(b);
        st.sigma = std::move(s);
        table.states.push_back(std::move(st));
    }
    return table;
}

/// iteration,row,column,value with 1-based row and column indices.
inline void write_imputations_csv(std::ostream& out, const ChainOutput& chain) {
    out << "iteration,row,column,value\n";
    if (!chain.imputations) return;
    for (std::size_t t = 0; t < chain.imputations->size(); ++t) {
        const Vector& v = (*chain.imputations)[t];
        for (std::size_t k = 0; k < chain.imputed_cells.size(); ++k)
            out << chain.meta.burn_in + t + 1 << ',' << chain.imputed_cells[k].row + 1 << ','
                << chain.imputed_cells[k].col + 1 << ',' << csv::format_double(v(static_cast<Index>(k))) << '\n';
    }
}

}  // namespace robustda
