#include "cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include "copert/error.hpp"

namespace copert::cli {

namespace {

std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw error(errc::parse_error, "unterminated quote on line " + std::to_string(line_no));
    out.push_back(std::move(cur));
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

csv_table read_csv(std::istream& in) {
    csv_table t;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto fields = split_record(line, line_no);
        for (auto& f : fields) f = trim(f);
        if (!have_header) {
            std::set<std::string> seen;
            for (const auto& f : fields) {
                if (f.empty()) throw error(errc::parse_error, "empty column name in header");
                if (!seen.insert(f).second) throw error(errc::parse_error, "duplicate column '" + f + "'");
            }
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw error(errc::parse_error, "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                               " fields, header has " + std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    if (!have_header) throw error(errc::parse_error, "input has no header row");
    return t;
}

csv_table read_csv_file(const std::string& path) {
    if (path == "-") return read_csv(std::cin);
    std::ifstream in(path);
    if (!in) throw error(errc::parse_error, "cannot open '" + path + "'");
    return read_csv(in);
}

std::size_t csv_table::column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == name) return c;
    }
    throw error(errc::parse_error, "no column '" + name + "'");
}

std::vector<std::string> csv_table::select(const std::vector<std::string>& patterns) const {
    std::vector<std::string> out;
    for (const auto& p : patterns) {
        if (!p.empty() && p.back() == '*') {
            const std::string prefix = p.substr(0, p.size() - 1);
            std::size_t hits = 0;
            for (const auto& h : header) {
                if (h.rfind(prefix, 0) == 0) {
                    out.push_back(h);
                    ++hits;
                }
            }
            if (hits == 0) throw error(errc::parse_error, "no column matches '" + p + "'");
        } else {
            column(p);
            out.push_back(p);
        }
    }
    std::set<std::string> seen;
    for (const auto& n : out) {
        if (!seen.insert(n).second) throw error(errc::parse_error, "column '" + n + "' selected twice");
    }
    return out;
}

Eigen::VectorXd csv_table::numeric(const std::string& name) const {
    const std::size_t c = column(name);
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::string& f = rows[r][c];
        double x = 0.0;
        const auto res = std::from_chars(f.data(), f.data() + f.size(), x);
        if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(x)) {
            throw error(errc::parse_error,
                        "column '" + name + "' row " + std::to_string(r + 1) + ": '" + f + "' is not a number");
        }
        v[static_cast<Eigen::Index>(r)] = x;
    }
    return v;
}

Eigen::MatrixXd csv_table::numeric(const std::vector<std::string>& names) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t c = 0; c < names.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = numeric(names[c]);
    return m;
}

std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") != std::string::npos) {
            out << '"';
            for (char c : f) {
                if (c == '"') out << '"';
                out << c;
            }
            out << '"';
        } else {
            out << f;
        }
    }
    out << '\n';
}

}  // namespace copert::cli
