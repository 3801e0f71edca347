#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aemu/nn.hpp"
#include "aemu/synthgen.hpp"

namespace aemu {

struct BenchConfig {
  std::size_t n_samples = 100000;
  std::size_t repetitions = 5;
  std::size_t warmup = 1;
  /// Threads for the extra row-parallel emulator row; 0 disables it.
  std::size_t parallel_threads = 0;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Median wall-clock seconds of one timed path, plus the raw repetitions.
struct Timing {
  double median_seconds = 0.0;
  std::vector<double> seconds;
};

struct BenchRow {
  std::string model;
  Timing timing;
  double speedup = 0.0;  // reference median / this median; 1 for the reference row
};

struct BenchResult {
  std::size_t n_samples = 0;
  std::size_t repetitions = 0;
  std::vector<BenchRow> rows;  // rows[0] is the reference

  double reference_seconds() const { return rows.at(0).timing.median_seconds; }
  double emulator_seconds() const { return rows.at(1).timing.median_seconds; }
  double speedup() const { return rows.at(1).speedup; }

  /// Columns: model | time (s) | speed-up, under a non-comparability disclaimer.
  std::string to_table() const;
  nlohmann::json to_json() const;
};

extern const char* const kBenchDisclaimer;

double median(std::vector<double> values);

/// Times each path `warmup` untimed + `repetitions` timed runs with a
/// monotonic clock. Repetitions are interleaved across paths so drift in
/// machine load affects all paths alike.
std::vector<Timing> time_interleaved(const std::vector<std::function<void()>>& paths, std::size_t repetitions,
                                     std::size_t warmup);

/// Builds a BenchResult from named paths; the first path is the reference.
BenchResult compare_runtimes(const std::vector<std::pair<std::string, std::function<void()>>>& paths,
                             const BenchConfig& config);

/// Reference surrogate step versus pipeline apply + forward + invert on the
/// same generated input batch.
BenchResult run_bench(const Network& net, const TransformSpec& spec, const BenchConfig& config,
                      const SurrogateConfig& surrogate = {}, const VariableSchema& schema = builtin_schema());

}  // namespace aemu
