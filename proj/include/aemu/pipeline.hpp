#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aemu/schema.hpp"

namespace aemu {

/// Largest |y| accepted by inverse_signed_log_sqrt: log(sqrt(DBL_MAX)),
/// about 354.89. Above it (exp(|y|) - 1)^2 is not representable.
extern const double kInverseOverflowThreshold;

/// sign(x) * log(sqrt(|x|) + 1). Odd and strictly increasing.
double signed_log_sqrt(double x);
/// sign(y) * (exp(|y|) - 1)^2.
double inverse_signed_log_sqrt(double y);

enum class Space { kRaw, kTransformed, kStandardized };
std::string_view to_string(Space space);

/// Column-major table of one role's variables (all inputs or all outputs).
struct SampleBatch {
  Role role = Role::kInput;
  Space space = Space::kRaw;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  SampleBatch() = default;
  SampleBatch(const VariableSchema& schema, Role role, Space space, std::size_t n_rows);

  std::size_t n_rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t n_cols() const noexcept { return columns.size(); }

  std::vector<double>& column(std::string_view name);
  const std::vector<double>& column(std::string_view name) const;

  /// Rows [first, first + count) as a new batch.
  SampleBatch slice(std::size_t first, std::size_t count) const;

  /// Throws NonFiniteValue (subject = row index) or RowCountMismatch.
  void check_finite_and_rectangular() const;

  bool operator==(const SampleBatch&) const = default;
};

/// Input states paired with the raw outputs one step later.
struct Dataset {
  SampleBatch inputs;
  SampleBatch outputs;
};

struct VariableStats {
  std::string name;
  Role role = Role::kInput;
  double mean = 0.0;
  double std = 1.0;

  bool operator==(const VariableStats&) const = default;
};

/// Per-variable statistics of the signed log-sqrt transformed training data.
struct TransformSpec {
  static constexpr int kVersion = 1;
  static constexpr double kDegenerateStd = 1e-12;

  std::uint64_t schema_hash = 0;
  std::vector<VariableStats> inputs;
  std::vector<VariableStats> outputs;

  const std::vector<VariableStats>& stats(Role role) const {
    return role == Role::kInput ? inputs : outputs;
  }

  nlohmann::json to_json() const;
  static TransformSpec from_json(const nlohmann::json& j);

  bool operator==(const TransformSpec&) const = default;
};

/// Targets for each output: after - before for tendency-form variables,
/// after unchanged for absolute-form ones.
SampleBatch compute_tendencies(const SampleBatch& before, const SampleBatch& after,
                               const VariableSchema& schema);

/// Inverse of compute_tendencies: tendency-form outputs get `before` added back.
SampleBatch reconstruct_full_values(const SampleBatch& before, const SampleBatch& tendencies,
                                    const VariableSchema& schema);

/// Same inputs; outputs replaced by compute_tendencies targets.
Dataset with_tendency_targets(const Dataset& raw, const VariableSchema& schema);

/// Mean and population std of column values in transformed space.
/// `train.outputs` must already hold the tendency targets.
TransformSpec fit_transform_spec(const Dataset& train, const VariableSchema& schema);

SampleBatch to_transformed(const SampleBatch& raw);
SampleBatch from_transformed(const SampleBatch& transformed);
SampleBatch standardize(const SampleBatch& transformed, const TransformSpec& spec, const VariableSchema& schema);
SampleBatch destandardize(const SampleBatch& standardized, const TransformSpec& spec, const VariableSchema& schema);

/// (signed_log_sqrt(x) - mean) / std, per column.
SampleBatch apply_pipeline(const SampleBatch& raw, const TransformSpec& spec, const VariableSchema& schema);
SampleBatch invert_pipeline(const SampleBatch& standardized, const TransformSpec& spec, const VariableSchema& schema);

/// Throws SchemaHashMismatch unless `spec` was fitted against `schema`.
void check_spec_matches(const TransformSpec& spec, const VariableSchema& schema);

}  // namespace aemu
