#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace aploc {

/// Exit codes shared by every subcommand (stable contract).
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDegenerate = 4;

struct CliOptions {
  std::string config_path;
  std::string data_path;  // localize only
  std::string out_dir = "out";
  int workers = 0;  // 0 = hardware concurrency
  std::optional<std::uint64_t> seed_override;
};

/// Synthesize one dataset: recording.csv, ground_truth.json, sensors.csv,
/// grid.csv under out_dir.
int cmd_simulate(const CliOptions& opts);

/// Localize a recording with the configured methods: estimates.csv and
/// run_metadata.json under out_dir.
int cmd_localize(const CliOptions& opts);

/// Monte-Carlo sweep: sweep.csv, trials.jsonl, summary.txt under out_dir.
int cmd_benchmark(const CliOptions& opts);

}  // namespace aploc
