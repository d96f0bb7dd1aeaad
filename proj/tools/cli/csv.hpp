#pragma once

#include <Eigen/Dense>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace copert::cli {

struct csv_table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
    // Names matching a list of exact names or prefix globs ("z*").
    std::vector<std::string> select(const std::vector<std::string>& patterns) const;
    Eigen::VectorXd numeric(const std::string& name) const;
    Eigen::MatrixXd numeric(const std::vector<std::string>& names) const;
};

csv_table read_csv(std::istream& in);
csv_table read_csv_file(const std::string& path);

std::string format_real(double x);  // 17 significant digits, round-trip exact
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace copert::cli
