#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "calps/data.hpp"

namespace calps {

/// Header plus string cells. Fields may be double-quoted ("" escapes a quote).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws UnknownColumn.
  std::size_t column(const std::string& name) const;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

/// Parses a numeric cell. Empty cells and NA/NaN map to NaN; anything else
/// unparsable throws Parse.
double parse_number(const std::string& cell);

/// Builds a Dataset. With `covariates` empty, every column other than the
/// treatment and outcome columns is used.
Dataset dataset_from_csv(const CsvTable& table, const std::string& treatment_column,
                         const std::optional<std::string>& outcome_column,
                         const std::vector<std::string>& covariates = {});

/// Shortest of %.17g; round-trips every double.
std::string format_double(double x);

std::string csv_escape(const std::string& field);

/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace calps
