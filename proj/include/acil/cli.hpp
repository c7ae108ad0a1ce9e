#ifndef ACIL_CLI_HPP
#define ACIL_CLI_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "acil/harness.hpp"

namespace acil::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitBadConfig = 2;
inline constexpr int kExitDatasetMissing = 3;
inline constexpr int kExitSchema = 4;

/// Entry point shared by the `acil` binary and the tests. `args` excludes argv[0].
int run_cli(const std::vector<std::string>& args);

/// Output root: explicit flag, else $ACIL_OUTPUT_DIR, else "results".
std::filesystem::path resolve_output_dir(const std::string& flag_value);

/// Per-seed, aggregate and summary files for `records` under `dir`.
void write_run_outputs(const std::filesystem::path& dir, std::span<const MetricsRecord> records,
                       std::span<const SeedFailure> failures);

/// Series files plus summary for previously written results CSVs.
/// Throws SchemaError if an input does not match the results schema or nothing was read.
void write_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& dir);

}  // namespace acil::cli

#endif  // ACIL_CLI_HPP
