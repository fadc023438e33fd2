#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace l3d::cli {

struct Column {
  std::string name;
  std::string unit;
};

/// In-memory table written as
///
///   # l3d <command> config_hash=<hex> units: name=unit ...
///   name,name,...
///   rows
///
/// with LF line endings and doubles at 17 significant digits.
class CsvTable {
 public:
  CsvTable(std::string command, std::string config_hash, std::vector<Column> columns);

  CsvTable& cell(double v);
  CsvTable& cell(std::size_t v);
  CsvTable& cell(int v) { return cell(static_cast<std::size_t>(v)); }
  CsvTable& cell(std::string_view v);
  /// Closes the current row; throws InvalidArgument if it has the wrong width.
  void end_row();

  std::size_t n_rows() const { return rows_; }
  std::string str() const;
  /// Throws IoError if the file cannot be written.
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::string hash_;
  std::vector<Column> columns_;
  std::string body_;
  std::vector<std::string> pending_;
  std::size_t rows_ = 0;
};

std::string format_double(double v);

/// A CSV file in the layout above, parsed back.
struct CsvData {
  std::string command;
  std::string config_hash;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws InvalidArgument for an unknown column name.
  std::size_t column_index(std::string_view name) const;
  std::vector<double> numbers(std::string_view name) const;
  std::vector<std::string> strings(std::string_view name) const;
};

/// Throws IoError if the file is missing or malformed.
CsvData read_csv(const std::filesystem::path& path);

/// Writes `text` to `path` atomically enough for our purposes (truncate then
/// write); throws IoError on failure.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace l3d::cli
