#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "rmcov/model.hpp"

namespace rmcov {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Parses long-format CSV (header `subject_id,v1,...,vp`). Rows are grouped by
/// subject id in order of first appearance. Throws ParseError (with row and
/// column), EmptyInput or RaggedRow.
RepeatedData parse_long_csv(std::string_view text);
RepeatedData ingest(const std::string& path, const std::string& format = "csv");

void write_long_csv(const RepeatedData& data, std::ostream& out);

/// Square matrix with a header row and a leading label column.
void write_matrix_csv(const SymMatrix& a, const std::vector<std::string>& names, std::ostream& out);

/// Upper-triangle nonzero entries as `from,to,weight,sign`.
void write_edge_list(const SymMatrix& a, const std::vector<std::string>& names, std::ostream& out,
                     double zero_tol = 1e-12);

} // namespace rmcov
