#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "zeroflow/datagen.hpp"

namespace zf {

/// 17 significant digits, same text as "%.17g".
std::string format_double(double v);

/// Header `x0,...,x{d-1}`, one row per matrix row.
void write_matrix_csv(const Tensor& values, const std::filesystem::path& path);
/// As write_matrix_csv, one row per sample. The meta sidecar goes to
/// `<stem>.meta.json` next to the CSV.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
/// Reads a file written by write_dataset_csv; the sidecar is optional.
Dataset read_dataset_csv(const std::filesystem::path& path);
std::filesystem::path meta_sidecar_path(const std::filesystem::path& csv_path);

/// A numeric table with a header row. Throws DataError naming the row and
/// column of ragged rows, empty cells, NaN or unparsable values. With
/// `row_labels` the first column is taken as a label and skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::string> row_labels;
  Tensor values;
};
CsvTable read_numeric_csv(const std::filesystem::path& path, bool row_labels = false);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace zf
