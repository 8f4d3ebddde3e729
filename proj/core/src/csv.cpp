#include "calps/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "calps/error.hpp"

namespace calps {

namespace {

std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
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
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) {
    throw Error(ErrorCode::Parse, "unterminated quote on line " + std::to_string(line_no));
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return j;
  }
  throw Error(ErrorCode::UnknownColumn, "column '" + name + "' not found");
}

CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_record(line, line_no);
    for (auto& f : fields) f = trim(f);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + " has " +
                                        std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw Error(ErrorCode::Parse, "CSV input is empty");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return parse_csv(in);
}

double parse_number(const std::string& cell) {
  if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double x = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+' && cell.size() > 1 && begin[1] != '-') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, x);
  if (ec != std::errc{} || ptr != end) throw Error(ErrorCode::Parse, "not a number: '" + cell + "'");
  return x;
}

Dataset dataset_from_csv(const CsvTable& table, const std::string& treatment_column,
                         const std::optional<std::string>& outcome_column,
                         const std::vector<std::string>& covariates) {
  const std::size_t tcol = table.column(treatment_column);
  std::optional<std::size_t> ycol;
  if (outcome_column) ycol = table.column(*outcome_column);
  std::vector<std::size_t> xcols;
  std::vector<std::string> names;
  if (covariates.empty()) {
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j == tcol || (ycol && j == *ycol)) continue;
      xcols.push_back(j);
      names.push_back(table.header[j]);
    }
  } else {
    for (const auto& c : covariates) {
      xcols.push_back(table.column(c));
      names.push_back(c);
    }
  }
  const auto n = static_cast<Index>(table.rows.size());
  Eigen::VectorXd t(n);
  Eigen::MatrixXd x(n, static_cast<Index>(xcols.size()));
  std::optional<Eigen::VectorXd> y;
  if (ycol) y = Eigen::VectorXd(n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    t[i] = parse_number(row[tcol]);
    for (std::size_t k = 0; k < xcols.size(); ++k) {
      x(i, static_cast<Index>(k)) = parse_number(row[xcols[k]]);
    }
    if (ycol) (*y)[i] = parse_number(row[*ycol]);
  }
  return Dataset(std::move(t), std::move(x), std::move(names), std::move(y));
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot rename onto '" + path + "'");
  }
}

}  // namespace calps
