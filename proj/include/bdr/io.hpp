#pragma once

// Delimited-text ingest and output tables.

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "bdr/errors.hpp"
#include "bdr/model.hpp"

namespace bdr::io {

struct ColumnRoles {
    std::string y;
    std::string w;
    std::string group;  // empty: single group
    std::vector<std::string> covariates;
    char delimiter = ',';
};

struct IngestResult {
    Sample pooled;               // group labels filled when a group column is given
    std::vector<Sample> groups;  // one entry per label present, indexed by label
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
        s.remove_suffix(1);
    }
    return s;
}

inline bool is_missing(std::string_view s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == ".";
}

inline double parse_real(std::string_view s, std::size_t row, const std::string& col) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ValidationError("row " + std::to_string(row) + ", column '" + col +
                              "': cannot parse '" + std::string(s) + "' as a real number");
    }
    return v;
}

}  // namespace detail

/// Reads a header-led delimited file. Rows with a missing entry in any used
/// column are dropped and counted. Row numbers in errors count the header as row 1.
inline IngestResult ingest(std::istream& in, const ColumnRoles& roles) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("input is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = detail::split(line, roles.delimiter);
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t c = 0; c < header.size(); ++c) position[std::string(detail::trim(header[c]))] = c;

    auto locate = [&](const std::string& name) {
        const auto it = position.find(name);
        if (it == position.end()) throw ConfigError("unknown column '" + name + "'");
        return it->second;
    };
    if (roles.y.empty() || roles.w.empty()) throw ConfigError("y and w columns are required");
    std::vector<std::string> used{roles.y, roles.w};
    for (const auto& c : roles.covariates) used.push_back(c);
    const bool grouped = !roles.group.empty();
    if (grouped) used.push_back(roles.group);
    std::vector<std::size_t> cols;
    for (const auto& name : used) cols.push_back(locate(name));

    const std::size_t d = roles.covariates.size() + 1;
    std::vector<double> ys, ws, xs;
    std::vector<int> labels;
    IngestResult res;
    std::size_t row = 1;
    std::vector<double> vals(used.size());
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        ++res.rows_read;
        const auto cells = detail::split(line, roles.delimiter);
        bool missing = false;
        for (std::size_t u = 0; u < used.size() && !missing; ++u) {
            const auto cell = cols[u] < cells.size() ? detail::trim(cells[cols[u]]) : std::string_view{};
            if (detail::is_missing(cell)) {
                missing = true;
            } else {
                vals[u] = detail::parse_real(cell, row, used[u]);
            }
        }
        if (missing) {
            ++res.rows_dropped;
            continue;
        }
        ys.push_back(vals[0]);
        ws.push_back(vals[1]);
        xs.push_back(1.0);
        for (std::size_t c = 0; c + 1 < d; ++c) xs.push_back(vals[2 + c]);
        if (grouped) {
            const double g = vals.back();
            if (g != 0.0 && g != 1.0) {
                throw ValidationError("row " + std::to_string(row) + ", column '" + roles.group +
                                      "': group labels must be 0 or 1");
            }
            labels.push_back(static_cast<int>(g));
        }
    }
    if (ys.empty()) throw ValidationError("no complete rows after dropping missing values");

    const auto n = static_cast<Eigen::Index>(ys.size());
    Sample& s = res.pooled;
    s.y = Eigen::Map<const Vector>(ys.data(), n);
    s.w = Eigen::Map<const Vector>(ws.data(), n);
    s.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        xs.data(), n, static_cast<Eigen::Index>(d));
    s.group = std::move(labels);
    s.covariate_names.push_back("const");
    for (const auto& c : roles.covariates) s.covariate_names.push_back(c);
    if (grouped) {
        for (int g = 0; g < 2; ++g) res.groups.push_back(s.subset(g));
    } else {
        res.groups.push_back(s);
    }
    return res;
}

inline IngestResult ingest(const std::string& path, const ColumnRoles& roles) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open input '" + path + "'");
    return ingest(in, roles);
}

/// Fixed 12-significant-digit formatting; exact=true gives a round-trip form.
inline std::string format_number(double v, bool exact = false) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, exact ? "%.17g" : "%.12g", v);
    return buf;
}

/// Writes a sample in the ingest schema: y, w, covariates (without the
/// intercept) and group when present. Values round-trip exactly.
inline void write_sample(std::ostream& out, const Sample& s) {
    out << "y,w";
    for (std::size_t c = 1; c < s.covariate_names.size(); ++c) out << ',' << s.covariate_names[c];
    if (s.has_groups()) out << ",group";
    out << '\n';
    for (Eigen::Index i = 0; i < s.y.size(); ++i) {
        out << format_number(s.y(i), true) << ',' << format_number(s.w(i), true);
        for (Eigen::Index c = 1; c < s.x.cols(); ++c) out << ',' << format_number(s.x(i, c), true);
        if (s.has_groups()) out << ',' << s.group[static_cast<std::size_t>(i)];
        out << '\n';
    }
}

/// Row-oriented CSV table.
class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    Table& row(std::vector<std::string> cells) {
        if (cells.size() != header_.size()) throw Error("table row width mismatch");
        rows_.push_back(std::move(cells));
        return *this;
    }

    void write(std::ostream& out) const {
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "," : "") << cells[c];
            out << '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot write '" + path + "'");
        write(out);
    }

    [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace bdr::io
