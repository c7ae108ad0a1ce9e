#include "acil/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace acil {

std::string format_decimal(double value) {
  // Fixed notation needs up to ~17 digits past the leading zeros to round-trip.
  std::array<char, 800> buf{};
  for (int precision = 6; precision <= 340; ++precision) {
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                   std::chars_format::fixed, precision);
    if (ec != std::errc{}) break;
    double back = 0.0;
    std::from_chars(buf.data(), ptr, back);
    if (back == value) return std::string(buf.data(), ptr);
  }
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

void write_results_csv(std::ostream& out, std::span<const MetricsRecord> records) {
  out << kResultsHeader << '\n';
  for (const auto& r : records) {
    out << r.strategy << ',' << r.seed << ',' << r.episode << ',' << format_decimal(r.incremental_accuracy)
        << ',' << format_decimal(r.retention) << ',' << r.annotated_this_episode << ','
        << r.cumulative_annotated << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, std::span<const AggregateRow> rows) {
  out << kAggregateHeader << '\n';
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.episode << ',' << r.num_seeds << ',' << format_decimal(r.accuracy_mean)
        << ',' << format_decimal(r.accuracy_std) << ',' << format_decimal(r.retention_mean) << ','
        << format_decimal(r.retention_std) << ',' << format_decimal(r.annotated_mean) << ','
        << format_decimal(r.annotated_std) << ',' << format_decimal(r.cumulative_mean) << ','
        << format_decimal(r.cumulative_std) << '\n';
  }
}

void write_summary_csv(std::ostream& out, std::span<const AggregateRow> final_rows) {
  out << kSummaryHeader << '\n';
  for (const auto& r : final_rows) {
    out << r.strategy << ',' << r.num_seeds << ',' << format_decimal(r.accuracy_mean) << ','
        << format_decimal(r.accuracy_std) << ',' << format_decimal(r.retention_mean) << ','
        << format_decimal(r.retention_std) << ',' << format_decimal(r.cumulative_mean) << ','
        << format_decimal(r.cumulative_std) << '\n';
  }
}

void write_series_csv(std::ostream& out, std::span<const AggregateRow> rows) {
  out << kSeriesHeader << '\n';
  for (const auto& r : rows) {
    out << r.episode << ',' << r.num_seeds << ',' << format_decimal(r.accuracy_mean) << ','
        << format_decimal(r.accuracy_std) << ',' << format_decimal(r.retention_mean) << ','
        << format_decimal(r.retention_std) << '\n';
  }
}

void write_summary_table(std::ostream& out, std::span<const AggregateRow> final_rows) {
  out << std::left << std::setw(12) << "strategy" << std::setw(8) << "seeds" << std::setw(22)
      << "accuracy" << std::setw(22) << "retention"
      << "annotated (total)\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : final_rows) {
    std::ostringstream acc, ret, ann;
    acc << std::fixed << std::setprecision(4) << r.accuracy_mean << " +/- " << r.accuracy_std;
    ret << std::fixed << std::setprecision(4) << r.retention_mean << " +/- " << r.retention_std;
    ann << std::fixed << std::setprecision(1) << r.cumulative_mean << " +/- " << r.cumulative_std;
    out << std::setw(12) << r.strategy << std::setw(8) << r.num_seeds << std::setw(22) << acc.str()
        << std::setw(22) << ret.str() << ann.str() << '\n';
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

template <typename T>
T parse_field(const std::string& text, const char* column, std::size_t line_no,
              const std::string& source) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw SchemaError(source + ":" + std::to_string(line_no) + ": bad value '" + text +
                          "' in column " + column,
                      column);
  return value;
}

}  // namespace

std::vector<MetricsRecord> read_results_csv(std::istream& in, const std::string& source) {
  static const std::vector<std::string> expected = split_fields(kResultsHeader);
  std::string line;
  if (!std::getline(in, line))
    throw SchemaError(source + ": empty input, expected header '" + std::string(kResultsHeader) + "'",
                      expected.front());
  const auto header = split_fields(line);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= header.size() || header[i] != expected[i])
      throw SchemaError(source + ": missing or misplaced column '" + expected[i] + "'", expected[i]);
  }
  if (header.size() != expected.size())
    throw SchemaError(source + ": unexpected column '" + header[expected.size()] + "'",
                      header[expected.size()]);

  std::vector<MetricsRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_fields(line);
    if (f.size() != expected.size())
      throw SchemaError(source + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(expected.size()) + " fields, got " +
                            std::to_string(f.size()),
                        f.size() < expected.size() ? expected[f.size()] : header.back());
    MetricsRecord r;
    r.strategy = f[0];
    if (r.strategy.empty()) throw SchemaError(source + ": empty strategy", "strategy");
    r.seed = parse_field<std::uint64_t>(f[1], "seed", line_no, source);
    r.episode = parse_field<int>(f[2], "episode", line_no, source);
    r.incremental_accuracy = parse_field<double>(f[3], "incremental_accuracy", line_no, source);
    r.retention = parse_field<double>(f[4], "retention", line_no, source);
    r.annotated_this_episode = parse_field<int>(f[5], "annotated_this_episode", line_no, source);
    r.cumulative_annotated = parse_field<std::int64_t>(f[6], "cumulative_annotated", line_no, source);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<MetricsRecord> read_results_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetMissing("cannot open results file " + path.string());
  return read_results_csv(in, path.string());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace acil
