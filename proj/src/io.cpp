#include "rmcov/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "rmcov/error.hpp"

namespace rmcov {

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string location(std::size_t row, std::size_t col, std::string_view column_name) {
    return "row " + std::to_string(row) + ", column " + std::to_string(col) + " (" + std::string(column_name) + ")";
}

} // namespace

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

RepeatedData parse_long_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    // header is the first non-blank line; rows are numbered from 1 as in a text editor
    std::size_t header_row = 0;
    while (header_row < lines.size() && trim(lines[header_row]).empty()) ++header_row;
    if (header_row == lines.size()) throw Error(ErrorCode::EmptyInput, "input has no header row");

    const auto header = split_csv_line(trim(lines[header_row]));
    if (header.size() < 2) {
        throw Error(ErrorCode::ParseError, "header needs subject_id and at least one variable");
    }
    std::vector<std::string> names;
    for (std::size_t c = 1; c < header.size(); ++c) names.emplace_back(trim(header[c]));
    const std::size_t p = names.size();

    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<std::vector<double>>> rows;
    for (std::size_t r = header_row + 1; r < lines.size(); ++r) {
        const std::string_view line = trim(lines[r]);
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        const std::size_t row_no = r + 1;
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::RaggedRow, "row " + std::to_string(row_no) + " has " +
                                                  std::to_string(cells.size()) + " cells, expected " +
                                                  std::to_string(header.size()));
        }
        std::string id(trim(cells[0]));
        if (id.empty()) throw Error(ErrorCode::ParseError, location(row_no, 1, header[0]) + ": empty subject id");
        std::vector<double> values(p);
        for (std::size_t c = 0; c < p; ++c) {
            const std::string_view cell = trim(cells[c + 1]);
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
                throw Error(ErrorCode::ParseError,
                            location(row_no, c + 2, names[c]) + ": cannot parse '" + std::string(cell) + "'");
            }
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::ParseError, location(row_no, c + 2, names[c]) + ": non-finite value");
            }
            values[c] = v;
        }
        auto [it, inserted] = rows.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(std::move(values));
    }
    if (order.empty()) throw Error(ErrorCode::EmptyInput, "input has no data rows");

    std::vector<SubjectBlock> subjects;
    subjects.reserve(order.size());
    for (const auto& id : order) {
        const auto& block = rows.at(id);
        Eigen::MatrixXd obs(static_cast<Eigen::Index>(block.size()), static_cast<Eigen::Index>(p));
        for (std::size_t j = 0; j < block.size(); ++j) {
            for (std::size_t c = 0; c < p; ++c) {
                obs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = block[j][c];
            }
        }
        subjects.push_back({id, std::move(obs)});
    }
    return RepeatedData(std::move(subjects), std::move(names));
}

RepeatedData ingest(const std::string& path, const std::string& format) {
    if (format != "csv") throw Error(ErrorCode::InvalidArgument, "unsupported input format '" + format + "'");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_long_csv(buf.str());
}

void write_long_csv(const RepeatedData& data, std::ostream& out) {
    out << "subject_id";
    for (const auto& n : data.variable_names()) out << ',' << n;
    out << '\n';
    for (const auto& s : data.subjects()) {
        for (Eigen::Index j = 0; j < s.observations.rows(); ++j) {
            out << s.id;
            for (Eigen::Index k = 0; k < s.observations.cols(); ++k) out << ',' << format_double(s.observations(j, k));
            out << '\n';
        }
    }
}

void write_matrix_csv(const SymMatrix& a, const std::vector<std::string>& names, std::ostream& out) {
    if (names.size() != static_cast<std::size_t>(a.dim())) {
        throw Error(ErrorCode::DimensionMismatch, "label count does not match matrix dimension");
    }
    out << "variable";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (Eigen::Index k = 0; k < a.dim(); ++k) {
        out << names[static_cast<std::size_t>(k)];
        for (Eigen::Index l = 0; l < a.dim(); ++l) out << ',' << format_double(a(k, l));
        out << '\n';
    }
}

void write_edge_list(const SymMatrix& a, const std::vector<std::string>& names, std::ostream& out,
                     double zero_tol) {
    if (names.size() != static_cast<std::size_t>(a.dim())) {
        throw Error(ErrorCode::DimensionMismatch, "label count does not match matrix dimension");
    }
    out << "from,to,weight,sign\n";
    for (Eigen::Index k = 0; k < a.dim(); ++k) {
        for (Eigen::Index l = k + 1; l < a.dim(); ++l) {
            const double w = a(k, l);
            if (std::abs(w) <= zero_tol) continue;
            out << names[static_cast<std::size_t>(k)] << ',' << names[static_cast<std::size_t>(l)] << ','
                << format_double(w) << ',' << (w > 0.0 ? "positive" : "negative") << '\n';
        }
    }
}

} // namespace rmcov
