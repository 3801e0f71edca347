#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aemu/nn.hpp"
#include "aemu/pipeline.hpp"
#include "aemu/schema.hpp"

namespace aemu {

/// Sentinel returned by r_squared for a constant truth the prediction misses.
inline constexpr double kUndefinedR2 = -std::numeric_limits<double>::infinity();
inline bool r2_defined(double r2) { return r2 != kUndefinedR2; }

/// 1 - SS_res / SS_tot. Constant truth yields 1 for an exact match and
/// kUndefinedR2 otherwise. Throws on length mismatch or fewer than 2 values.
double r_squared(std::span<const double> pred, std::span<const double> truth);

/// sqrt(mean((pred - truth)^2)) / std_truth.
double nrmse(std::span<const double> pred, std::span<const double> truth, double std_truth);

struct VariableScore {
  std::string name;
  double r2_transformed = 0.0;
  double nrmse = 0.0;
  double r2_raw_tendency = 0.0;
  double r2_full_value = 0.0;
};

struct MassBias {
  std::string species;
  double mean = 0.0;
  double median = 0.0;
  /// Share of rows with positive bias; rows with exactly zero bias count half.
  double fraction_positive = 0.5;
};

struct EvalReport {
  std::vector<VariableScore> per_variable;
  /// Unweighted means over variables whose R2 is defined.
  double mean_r2_transformed = 0.0;
  double mean_nrmse = 0.0;
  double mean_r2_raw_tendency = 0.0;
  double mean_r2_full_value = 0.0;
  std::vector<MassBias> mass_bias;
  std::size_t n_rows = 0;

  std::size_t count_r2_at_least(double threshold) const;
  nlohmann::json to_json() const;
  /// Aligned plain-text table: Variable | R2 | NRMSE | R2 tend | R2 full.
  std::string to_table() const;
};

/// Per-species predicted-minus-true tendency, summed over modes, per row.
std::vector<MassBias> mass_bias(const SampleBatch& pred_tendencies, const SampleBatch& truth_tendencies,
                                const VariableSchema& schema);

/// Scores standardized predictions against raw truth outputs (after-step
/// values). Shared by evaluate() and offline evaluation of saved predictions.
EvalReport evaluate_predictions(const SampleBatch& pred_standardized, const TransformSpec& spec,
                                const SampleBatch& inputs, const SampleBatch& truth_outputs,
                                const VariableSchema& schema);

/// Runs the network on `inputs`, then evaluate_predictions.
EvalReport evaluate(const Network& net, const TransformSpec& spec, const SampleBatch& inputs,
                    const SampleBatch& truth_outputs, const VariableSchema& schema, std::size_t threads = 1);

/// Network predictions on raw inputs, in standardized output space.
SampleBatch predict_standardized(const Network& net, const TransformSpec& spec, const SampleBatch& inputs,
                                 const VariableSchema& schema, std::size_t threads = 1);

struct MassFixResult {
  SampleBatch values;
  std::vector<std::size_t> clamped;  // per column
  std::size_t total_clamped() const;
};

/// Clamps negative masses, concentrations and water to zero.
MassFixResult mass_fix(const SampleBatch& full_values, const VariableSchema& schema = builtin_schema());

struct ScatterOptions {
  std::size_t max_points = 50000;
  std::uint64_t seed = 0;
  bool write_svg = true;
};

struct ScatterFiles {
  std::filesystem::path csv;
  std::filesystem::path svg;  // empty unless written
  std::size_t n_points = 0;
};

/// Sorted row indices of a seeded uniform subsample (all rows if n <= max_points).
std::vector<std::size_t> scatter_subsample(std::size_t n, std::size_t max_points, std::uint64_t seed);

/// Writes <stem>.csv (truth,pred) and optionally <stem>.svg with a y = x line.
ScatterFiles export_scatter(std::span<const double> pred, std::span<const double> truth, std::string_view variable,
                            const std::filesystem::path& stem, const ScatterOptions& options = {});

}  // namespace aemu
