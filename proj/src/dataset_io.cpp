#include "zeroflow/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "zeroflow/errors.hpp"

namespace zf {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::filesystem::path meta_sidecar_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_matrix_csv(const Tensor& values, const std::filesystem::path& path) {
  const std::size_t n = values.rows(), d = values.cols();
  std::string text;
  for (std::size_t j = 0; j < d; ++j) text += (j ? ",x" : "x") + std::to_string(j);
  text += '\n';
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      if (j) text += ',';
      text += format_double(values(r, j));
    }
    text += '\n';
  }
  write_text_file(path, text);
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  write_matrix_csv(data.samples, path);
  write_text_file(meta_sidecar_path(path), data.meta.dump(2) + "\n");
}

CsvTable read_numeric_csv(const std::filesystem::path& path, bool row_labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  for (std::string& h : split_line(line)) table.header.push_back(trim(std::move(h)));
  if (row_labels) {
    if (table.header.empty()) throw DataError(path.string() + ": header has no columns");
    table.header.erase(table.header.begin());
  }
  const std::size_t d = table.header.size();
  if (d == 0) throw DataError(path.string() + ": header has no columns");

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_line(line);
    const std::size_t expected = d + (row_labels ? 1 : 0);
    if (cells.size() != expected) {
      throw DataError(path.string() + ": row " + std::to_string(rows + 1) + " (line " + std::to_string(line_no) +
                      ") has " + std::to_string(cells.size()) + " cells, expected " + std::to_string(expected));
    }
    std::size_t first = 0;
    if (row_labels) {
      table.row_labels.push_back(trim(cells[0]));
      first = 1;
    }
    for (std::size_t c = first; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      const std::size_t col = c - first;
      const std::string where = "row " + std::to_string(rows + 1) + ", column " + std::to_string(col) + " ('" +
                                table.header[col] + "')";
      if (cell.empty()) throw DataError(path.string() + ": missing value at " + where);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw DataError(path.string() + ": non-numeric value '" + cell + "' at " + where);
      }
      if (!std::isfinite(v)) throw DataError(path.string() + ": missing or non-finite value at " + where);
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError(path.string() + ": no data rows");
  table.values = Tensor({rows, d}, std::move(values));
  return table;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  CsvTable table = read_numeric_csv(path);
  Dataset out{std::move(table.values)};
  const auto meta_path = meta_sidecar_path(path);
  if (std::filesystem::exists(meta_path)) {
    try {
      out.meta = nlohmann::json::parse(read_text_file(meta_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(meta_path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace zf
