#ifndef ACIL_CSV_HPP
#define ACIL_CSV_HPP

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "acil/harness.hpp"

namespace acil {

inline constexpr const char* kResultsHeader =
    "strategy,seed,episode,incremental_accuracy,retention,annotated_this_episode,cumulative_annotated";

inline constexpr const char* kAggregateHeader =
    "strategy,episode,num_seeds,incremental_accuracy_mean,incremental_accuracy_std,retention_mean,"
    "retention_std,annotated_this_episode_mean,annotated_this_episode_std,cumulative_annotated_mean,"
    "cumulative_annotated_std";

inline constexpr const char* kSummaryHeader =
    "strategy,num_seeds,final_accuracy_mean,final_accuracy_std,final_retention_mean,"
    "final_retention_std,total_annotated_mean,total_annotated_std";

inline constexpr const char* kSeriesHeader =
    "episode,num_seeds,mean_accuracy,std_accuracy,mean_retention,std_retention";

/// Fixed-point decimal with at least 6 digits after the point and as many more
/// as needed for the text to parse back to exactly `value`.
std::string format_decimal(double value);

void write_results_csv(std::ostream& out, std::span<const MetricsRecord> records);
void write_aggregate_csv(std::ostream& out, std::span<const AggregateRow> rows);
void write_summary_csv(std::ostream& out, std::span<const AggregateRow> final_rows);
void write_series_csv(std::ostream& out, std::span<const AggregateRow> rows_of_one_strategy);

/// Human-readable mean +/- std table of final-episode results.
void write_summary_table(std::ostream& out, std::span<const AggregateRow> final_rows);

/// Parse a results CSV. Throws SchemaError naming the offending column.
std::vector<MetricsRecord> read_results_csv(std::istream& in, const std::string& source_name = "<csv>");
std::vector<MetricsRecord> read_results_file(const std::filesystem::path& path);

/// Write via a temporary file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace acil

#endif  // ACIL_CSV_HPP
