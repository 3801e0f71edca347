#include "aemu/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "aemu/error.hpp"
#include "aemu/eval.hpp"

namespace aemu {

const char* const kBenchDisclaimer =
    "NOTE: the reference is the built-in synthetic surrogate step, not the Fortran M7 module, and all\n"
    "timings are single-machine CPU runs. Neither absolute times nor speed-ups carry over to the real\n"
    "aerosol module or to other hardware. The emulator path includes input transform, network forward\n"
    "and back-transform.\n";

void BenchConfig::validate() const {
  if (n_samples < 1) throw Error(ErrorCode::kInvalidConfig, "bench needs at least 1 sample");
  if (repetitions < 3) throw Error(ErrorCode::kInvalidConfig, "bench needs at least 3 repetitions");
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidInput, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<Timing> time_interleaved(const std::vector<std::function<void()>>& paths, std::size_t repetitions,
                                     std::size_t warmup) {
  using Clock = std::chrono::steady_clock;
  std::vector<Timing> out(paths.size());
  for (std::size_t w = 0; w < warmup; ++w) {
    for (const auto& p : paths) p();
  }
  for (std::size_t r = 0; r < repetitions; ++r) {
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const auto t0 = Clock::now();
      paths[i]();
      const auto t1 = Clock::now();
      // Clamp to one tick so a timing is always > 0.
      const double s = std::max(std::chrono::duration<double>(t1 - t0).count(),
                                std::chrono::duration<double>(Clock::duration(1)).count());
      out[i].seconds.push_back(s);
    }
  }
  for (auto& t : out) t.median_seconds = median(t.seconds);
  return out;
}

BenchResult compare_runtimes(const std::vector<std::pair<std::string, std::function<void()>>>& paths,
                             const BenchConfig& config) {
  config.validate();
  if (paths.size() < 2) throw Error(ErrorCode::kInvalidInput, "need a reference and at least one compared path");
  std::vector<std::function<void()>> fns;
  for (const auto& p : paths) fns.push_back(p.second);
  const auto timings = time_interleaved(fns, config.repetitions, config.warmup);
  BenchResult result;
  result.n_samples = config.n_samples;
  result.repetitions = config.repetitions;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    result.rows.push_back({paths[i].first, timings[i], timings[0].median_seconds / timings[i].median_seconds});
  }
  return result;
}

BenchResult run_bench(const Network& net, const TransformSpec& spec, const BenchConfig& config,
                      const SurrogateConfig& surrogate, const VariableSchema& schema) {
  config.validate();
  check_spec_matches(spec, schema);
  SurrogateConfig sc = surrogate;
  sc.n_samples = config.n_samples;
  sc.seed = config.seed;
  const SampleBatch inputs = generate_inputs(sc, schema);

  // Sink for results so the timed work cannot be optimized away.
  double sink = 0.0;
  auto emulator = [&](std::size_t threads) {
    return [&, threads] {
      const SampleBatch z = predict_standardized(net, spec, inputs, schema, threads);
      const SampleBatch raw = invert_pipeline(z, spec, schema);
      sink += raw.columns[0][0];
    };
  };
  std::vector<std::pair<std::string, std::function<void()>>> paths{
      {"Synthetic M7 reference", [&] { sink += reference_step(inputs, sc, schema).columns[0][0]; }},
      {"Emulator CPU (1 thread)", emulator(1)},
  };
  if (config.parallel_threads > 1) {
    paths.emplace_back("Emulator CPU (" + std::to_string(config.parallel_threads) + " threads)",
                       emulator(config.parallel_threads));
  }
  BenchResult result = compare_runtimes(paths, config);
  if (!std::isfinite(sink)) throw Error(ErrorCode::kNumericalFailure, "benchmark produced non-finite output");
  return result;
}

std::string BenchResult::to_table() const {
  std::string out = kBenchDisclaimer;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "samples: %zu, repetitions: %zu (median reported)\n\n", n_samples, repetitions);
  out += buf;
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.model.size());
  std::snprintf(buf, sizeof(buf), "%-*s %12s %10s\n", static_cast<int>(width), "model", "time (s)", "speed-up");
  out += buf;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    char speed[32];
    if (i == 0) {
      std::snprintf(speed, sizeof(speed), "-");
    } else {
      std::snprintf(speed, sizeof(speed), "%.2f", rows[i].speedup);
    }
    std::snprintf(buf, sizeof(buf), "%-*s %12.4f %10s\n", static_cast<int>(width), rows[i].model.c_str(),
                  rows[i].timing.median_seconds, speed);
    out += buf;
  }
  return out;
}

nlohmann::json BenchResult::to_json() const {
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rows) {
    jrows.push_back({{"model", r.model},
                     {"time_s", r.timing.median_seconds},
                     {"speedup", r.speedup},
                     {"raw_timings_s", r.timing.seconds}});
  }
  return {{"disclaimer", kBenchDisclaimer},
          {"n_samples", n_samples},
          {"repetitions", repetitions},
          {"reference_seconds", reference_seconds()},
          {"emulator_seconds", emulator_seconds()},
          {"speedup", speedup()},
          {"rows", std::move(jrows)}};
}

}  // namespace aemu
