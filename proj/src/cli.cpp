#include "acil/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "acil/config.hpp"
#include "acil/csv.hpp"
#include "acil/log.hpp"

namespace acil::cli {

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  bool checkpoints = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "experiment config file (key = value)");
  cmd->add_option("-s,--set", o.overrides, "override a config key, e.g. --set budget=200")
      ->allow_extra_args(false);
  cmd->add_option("-o,--out", o.out, "output directory (default: $ACIL_OUTPUT_DIR or ./results)");
  cmd->add_flag("--checkpoints", o.checkpoints, "save the model after every episode");
}

ExperimentConfig load_config(const CommonOptions& o) {
  ConfigValues file;
  if (!o.config_path.empty()) {
    try {
      file = read_config_file(o.config_path);
    } catch (const DatasetMissing& e) {
      throw ConfigError(e.what(), "--config");
    } catch (const ParseError& e) {
      throw ConfigError(e.what(), "--config");
    }
  }
  ExperimentConfig cfg = build_experiment_config(file, parse_overrides(o.overrides));
  if (cfg.stream.source == StreamSource::File && !std::filesystem::exists(cfg.dataset_path))
    throw DatasetMissing("dataset file not found: " + cfg.dataset_path.string());
  return cfg;
}

std::string to_text(auto&& writer) {
  std::ostringstream s;
  writer(s);
  return s.str();
}

std::vector<Strategy> parse_strategy_list(const std::vector<std::string>& ids) {
  if (ids.empty()) return all_strategies();
  std::vector<Strategy> out;
  for (const auto& id : ids) out.push_back(parse_strategy(id));
  return out;
}

RunResult run_strategies(ExperimentConfig cfg, const std::vector<Strategy>& strategies) {
  RunResult all;
  for (Strategy s : strategies) {
    cfg.strategy = s;
    log::info("running ", strategy_name(s), " budget=", cfg.budget, " seeds=", cfg.num_seeds);
    RunResult r = run_experiment(cfg);
    all.records.insert(all.records.end(), r.records.begin(), r.records.end());
    all.failures.insert(all.failures.end(), r.failures.begin(), r.failures.end());
  }
  return all;
}

int cmd_run(const CommonOptions& o) {
  ExperimentConfig cfg = load_config(o);
  const auto dir = resolve_output_dir(o.out);
  if (o.checkpoints) cfg.checkpoint_dir = dir / "checkpoints";
  const RunResult r = run_experiment(cfg);
  write_file_atomic(dir / "config.txt", render_config(cfg));
  write_run_outputs(dir, r.records, r.failures);
  log::info("wrote ", r.records.size(), " rows to ", (dir / "results.csv").string());
  return r.records.empty() ? kExitFailure : kExitOk;
}

int cmd_sweep(const CommonOptions& o, const std::vector<std::string>& strategy_ids) {
  ExperimentConfig cfg = load_config(o);
  const auto strategies = parse_strategy_list(strategy_ids);
  const auto dir = resolve_output_dir(o.out);
  if (o.checkpoints) cfg.checkpoint_dir = dir / "checkpoints";
  const RunResult r = run_strategies(cfg, strategies);
  write_file_atomic(dir / "config.txt", render_config(cfg));
  write_run_outputs(dir, r.records, r.failures);
  return r.records.empty() ? kExitFailure : kExitOk;
}

int cmd_budget_study(const CommonOptions& o, const std::vector<int>& budgets,
                     const std::vector<std::string>& strategy_ids) {
  ExperimentConfig cfg = load_config(o);
  if (budgets.empty()) throw ConfigError("at least one budget is required", "--budgets");
  for (int k : budgets)
    if (k < 1) throw ConfigError("budget " + std::to_string(k) + " must be >= 1", "budget");
  const auto strategies = parse_strategy_list(strategy_ids);
  const auto dir = resolve_output_dir(o.out);

  std::ostringstream summary;
  summary << "budget,strategy,episode,num_seeds,annotated_this_episode_mean,annotated_this_episode_std,"
             "incremental_accuracy_mean,incremental_accuracy_std\n";
  bool any = false;
  for (int k : budgets) {
    cfg.budget = k;
    const auto sub = dir / ("budget_" + std::to_string(k));
    if (o.checkpoints) cfg.checkpoint_dir = sub / "checkpoints";
    const RunResult r = run_strategies(cfg, strategies);
    write_run_outputs(sub, r.records, r.failures);
    any = any || !r.records.empty();
    for (const auto& row : aggregate(r.records)) {
      summary << k << ',' << row.strategy << ',' << row.episode << ',' << row.num_seeds << ','
              << format_decimal(row.annotated_mean) << ',' << format_decimal(row.annotated_std) << ','
              << format_decimal(row.accuracy_mean) << ',' << format_decimal(row.accuracy_std) << '\n';
    }
  }
  write_file_atomic(dir / "budget_summary.csv", summary.str());
  write_file_atomic(dir / "config.txt", render_config(cfg));
  return any ? kExitOk : kExitFailure;
}

int cmd_convert(const std::string& images, const std::string& labels, const std::string& output,
                int max_per_class) {
  const Dataset data = convert_idx(images, labels, max_per_class);
  write_file_atomic(output, to_text([&](std::ostream& s) { write_dataset(s, data); }));
  log::info("wrote ", data.samples.size(), " records (d=", data.dim, ", classes=", data.num_classes,
            ") to ", output);
  return kExitOk;
}

}  // namespace

std::filesystem::path resolve_output_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("ACIL_OUTPUT_DIR"); env && *env) return env;
  return "results";
}

void write_run_outputs(const std::filesystem::path& dir, std::span<const MetricsRecord> records,
                       std::span<const SeedFailure> failures) {
  const auto rows = aggregate(records);
  const auto final_rows = final_episode_summary(records);
  write_file_atomic(dir / "results.csv", to_text([&](std::ostream& s) { write_results_csv(s, records); }));
  write_file_atomic(dir / "aggregate.csv", to_text([&](std::ostream& s) { write_aggregate_csv(s, rows); }));
  write_file_atomic(dir / "summary.csv",
                    to_text([&](std::ostream& s) { write_summary_csv(s, final_rows); }));
  write_file_atomic(dir / "summary.txt",
                    to_text([&](std::ostream& s) { write_summary_table(s, final_rows); }));
  if (!failures.empty()) {
    std::ostringstream f;
    f << "strategy,seed,epoch,message\n";
    for (const auto& x : failures) f << x.strategy << ',' << x.seed << ',' << x.episode << ",\"" << x.message << "\"\n";
    write_file_atomic(dir / "failures.csv", f.str());
  }
}

void write_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& dir) {
  std::vector<MetricsRecord> records;
  for (const auto& p : inputs) {
    auto r = read_results_file(p);
    records.insert(records.end(), r.begin(), r.end());
  }
  if (records.empty()) throw SchemaError("no result rows in the inputs", "strategy");

  const auto rows = aggregate(records);
  std::map<std::string, std::vector<AggregateRow>> by_strategy;
  for (const auto& r : rows) by_strategy[r.strategy].push_back(r);
  for (const auto& [name, series] : by_strategy)
    write_file_atomic(dir / ("series_" + name + ".csv"),
                      to_text([&](std::ostream& s) { write_series_csv(s, series); }));
  write_file_atomic(dir / "aggregate.csv", to_text([&](std::ostream& s) { write_aggregate_csv(s, rows); }));
  const auto final_rows = final_episode_summary(records);
  write_file_atomic(dir / "summary.txt",
                    to_text([&](std::ostream& s) { write_summary_table(s, final_rows); }));
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Active class-incremental learning simulator", "acil"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, study_opts;
  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run, run_opts);

  std::vector<std::string> sweep_strategies;
  auto* sweep = app.add_subcommand("sweep", "run several strategies on identical streams");
  add_common(sweep, sweep_opts);
  sweep->add_option("--strategies", sweep_strategies, "strategy ids (default: all)")->delimiter(',');

  std::vector<int> budgets;
  std::vector<std::string> study_strategies;
  auto* study = app.add_subcommand("budget-study", "sweep per exemplar budget");
  add_common(study, study_opts);
  study->add_option("--budgets", budgets, "budgets k, e.g. 50,100,250")->delimiter(',')->required();
  study->add_option("--strategies", study_strategies, "strategy ids (default: all)")->delimiter(',');

  std::string images, labels, dataset_out;
  int max_per_class = 0;
  auto* convert = app.add_subcommand("convert-dataset", "convert IDX images/labels to the dataset format");
  convert->add_option("--images", images, "IDX image file")->required();
  convert->add_option("--labels", labels, "IDX label file")->required();
  convert->add_option("--output", dataset_out, "output dataset file")->required();
  convert->add_option("--max-per-class", max_per_class, "keep at most this many samples per class");

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "plot-ready series from results CSVs");
  report->add_option("inputs", report_inputs, "results CSV files");
  report->add_option("-o,--out", report_out, "output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadConfig;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*sweep) return cmd_sweep(sweep_opts, sweep_strategies);
    if (*study) return cmd_budget_study(study_opts, budgets, study_strategies);
    if (*convert) return cmd_convert(images, labels, dataset_out, max_per_class);
    if (*report) {
      std::vector<std::filesystem::path> paths(report_inputs.begin(), report_inputs.end());
      write_report(paths, resolve_output_dir(report_out));
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    log::error("config error (", e.key(), "): ", e.what());
    return kExitBadConfig;
  } catch (const DatasetMissing& e) {
    log::error(e.what());
    return kExitDatasetMissing;
  } catch (const SchemaError& e) {
    log::error("schema error (", e.column(), "): ", e.what());
    return kExitSchema;
  } catch (const ParseError& e) {
    log::error(e.what());
    return kExitDatasetMissing;
  } catch (const std::exception& e) {
    log::error(e.what());
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace acil::cli
