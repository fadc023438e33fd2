#include "l3d/cli/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "l3d/error.hpp"

namespace l3d::cli {

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

CsvTable::CsvTable(std::string command, std::string config_hash, std::vector<Column> columns)
    : command_(std::move(command)), hash_(std::move(config_hash)), columns_(std::move(columns)) {
  if (columns_.empty()) throw InvalidArgument("CsvTable: no columns");
}

CsvTable& CsvTable::cell(double v) {
  pending_.push_back(format_double(v));
  return *this;
}

CsvTable& CsvTable::cell(std::size_t v) {
  pending_.push_back(std::to_string(v));
  return *this;
}

CsvTable& CsvTable::cell(std::string_view v) {
  if (v.find_first_of(",\n\"") != std::string_view::npos) {
    throw InvalidArgument("CsvTable: cell contains a separator: " + std::string(v));
  }
  pending_.emplace_back(v);
  return *this;
}

void CsvTable::end_row() {
  if (pending_.size() != columns_.size()) {
    throw InvalidArgument(fmt::format("CsvTable: row has {} cells, expected {}", pending_.size(), columns_.size()));
  }
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    if (i) body_ += ',';
    body_ += pending_[i];
  }
  body_ += '\n';
  pending_.clear();
  ++rows_;
}

std::string CsvTable::str() const {
  std::string out = fmt::format("# l3d {} config_hash={} units:", command_, hash_);
  for (const auto& c : columns_) out += fmt::format(" {}={}", c.name, c.unit);
  out += '\n';
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out += ',';
    out += columns_[i].name;
  }
  out += '\n';
  return out + body_;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text(path, str()); }

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

CsvData read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  CsvData data;
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("# l3d ")) {
    throw IoError(path.string() + ": missing '# l3d' header line");
  }
  std::istringstream meta(line.substr(6));
  std::string token;
  meta >> data.command >> token;
  if (!token.starts_with("config_hash=")) throw IoError(path.string() + ": missing config_hash");
  data.config_hash = token.substr(12);

  if (!std::getline(in, line) || line.empty()) throw IoError(path.string() + ": missing column header");
  data.header = split_line(line);
  for (std::size_t number = 3; std::getline(in, line); ++number) {
    if (line.empty()) continue;
    auto row = split_line(line);
    if (row.size() != data.header.size()) {
      throw IoError(fmt::format("{}:{}: {} fields, expected {}", path.string(), number, row.size(),
                                data.header.size()));
    }
    data.rows.push_back(std::move(row));
  }
  return data;
}

std::size_t CsvData::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InvalidArgument("CSV has no column '" + std::string(name) + "'");
}

std::vector<double> CsvData::numbers(std::string_view name) const {
  const std::size_t c = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    double v = 0.0;
    const auto& s = row[c];
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw IoError("CSV column '" + std::string(name) + "': not a number: " + s);
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> CsvData::strings(std::string_view name) const {
  const std::size_t c = column_index(name);
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[c]);
  return out;
}

}  // namespace l3d::cli
