#include "aemu/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "aemu/error.hpp"

namespace aemu {

const double kInverseOverflowThreshold = std::log(std::sqrt(std::numeric_limits<double>::max()));

double signed_log_sqrt(double x) {
  if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidValue, "signed_log_sqrt of non-finite value");
  // log1p keeps full relative precision for |x| down to the subnormals.
  return std::copysign(std::log1p(std::sqrt(std::fabs(x))), x);
}

double inverse_signed_log_sqrt(double y) {
  if (!std::isfinite(y)) throw Error(ErrorCode::kInvalidValue, "inverse_signed_log_sqrt of non-finite value");
  const double root = std::expm1(std::fabs(y));
  const double mag = root * root;
  if (!std::isfinite(mag)) {
    throw Error(ErrorCode::kOverflowValue,
                "inverse_signed_log_sqrt(" + std::to_string(y) + ") overflows; |y| must not exceed " +
                    std::to_string(kInverseOverflowThreshold));
  }
  return std::copysign(mag, y);
}

std::string_view to_string(Space space) {
  switch (space) {
    case Space::kRaw: return "raw";
    case Space::kTransformed: return "transformed";
    case Space::kStandardized: return "standardized";
  }
  return "?";
}

SampleBatch::SampleBatch(const VariableSchema& schema, Role r, Space s, std::size_t n_rows)
    : role(r), space(s), names(schema.names(r)), columns(names.size(), std::vector<double>(n_rows, 0.0)) {}

std::vector<double>& SampleBatch::column(std::string_view name) {
  return const_cast<std::vector<double>&>(std::as_const(*this).column(name));
}

const std::vector<double>& SampleBatch::column(std::string_view name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw Error(ErrorCode::kMissingColumn, "batch has no column '" + std::string(name) + "'", std::string(name));
  }
  return columns[static_cast<std::size_t>(it - names.begin())];
}

SampleBatch SampleBatch::slice(std::size_t first, std::size_t count) const {
  SampleBatch out;
  out.role = role;
  out.space = space;
  out.names = names;
  out.columns.reserve(columns.size());
  for (const auto& c : columns) {
    const auto begin = c.begin() + static_cast<std::ptrdiff_t>(std::min(first, c.size()));
    const auto end = c.begin() + static_cast<std::ptrdiff_t>(std::min(first + count, c.size()));
    out.columns.emplace_back(begin, end);
  }
  return out;
}

void SampleBatch::check_finite_and_rectangular() const {
  if (names.size() != columns.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "batch has " + std::to_string(names.size()) + " names but " +
                                                   std::to_string(columns.size()) + " columns");
  }
  const std::size_t n = n_rows();
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != n) {
      throw Error(ErrorCode::kRowCountMismatch, "column '" + names[c] + "' has " +
                                                    std::to_string(columns[c].size()) + " rows, expected " +
                                                    std::to_string(n));
    }
  }
  // Report the lowest offending row, scanning row-major.
  std::size_t bad_row = n;
  std::size_t bad_col = 0;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (std::size_t r = 0; r < std::min(n, bad_row); ++r) {
      if (!std::isfinite(columns[c][r])) {
        bad_row = r;
        bad_col = c;
        break;
      }
    }
  }
  if (bad_row < n) {
    throw Error(ErrorCode::kNonFiniteValue,
                "non-finite value in column '" + names[bad_col] + "' at row " + std::to_string(bad_row),
                std::to_string(bad_row));
  }
}

nlohmann::json TransformSpec::to_json() const {
  nlohmann::json stats = nlohmann::json::array();
  for (const auto* group : {&inputs, &outputs}) {
    for (const auto& s : *group) {
      stats.push_back({{"name", s.name}, {"role", to_string(s.role)}, {"mean", s.mean}, {"std", s.std}});
    }
  }
  return {{"version", kVersion}, {"schema_hash", schema_hash}, {"stats", std::move(stats)}};
}

TransformSpec TransformSpec::from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kVersion) {
      throw Error(ErrorCode::kVersionMismatch,
                  "transform spec version " + std::to_string(j.at("version").get<int>()) + " unsupported");
    }
    TransformSpec spec;
    spec.schema_hash = j.at("schema_hash").get<std::uint64_t>();
    for (const auto& s : j.at("stats")) {
      VariableStats v;
      v.name = s.at("name").get<std::string>();
      const auto role = s.at("role").get<std::string>();
      if (role != "input" && role != "output") throw Error(ErrorCode::kInvalidValue, "bad stats role '" + role + "'");
      v.role = role == "input" ? Role::kInput : Role::kOutput;
      v.mean = s.at("mean").get<double>();
      v.std = s.at("std").get<double>();
      (v.role == Role::kInput ? spec.inputs : spec.outputs).push_back(std::move(v));
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidValue, std::string("malformed transform spec: ") + e.what());
  }
}

namespace {

void require_space(const SampleBatch& batch, Space expected, std::string_view op) {
  if (batch.space != expected) {
    throw Error(ErrorCode::kSpaceMismatch, std::string(op) + " expects a " + std::string(to_string(expected)) +
                                               " batch, got " + std::string(to_string(batch.space)));
  }
}

void require_role(const SampleBatch& batch, Role expected, std::string_view op) {
  if (batch.role != expected) {
    throw Error(ErrorCode::kInvalidInput, std::string(op) + " expects an " + std::string(to_string(expected)) +
                                              " batch, got " + std::string(to_string(batch.role)));
  }
}

const std::vector<double>& input_column_for(const SampleBatch& before, const VariableSchema& schema,
                                            const std::string& name) {
  auto pos = schema.input_position(name);
  if (!pos || *pos >= before.columns.size()) {
    throw Error(ErrorCode::kMissingColumn, "tendency variable '" + name + "' has no input column", name);
  }
  return before.columns[*pos];
}

template <typename Fn>
SampleBatch map_columns(const SampleBatch& in, Space out_space, Fn&& fn) {
  SampleBatch out;
  out.role = in.role;
  out.space = out_space;
  out.names = in.names;
  out.columns.resize(in.columns.size());
  for (std::size_t c = 0; c < in.columns.size(); ++c) {
    out.columns[c].resize(in.columns[c].size());
    for (std::size_t r = 0; r < in.columns[c].size(); ++r) out.columns[c][r] = fn(c, in.columns[c][r]);
  }
  return out;
}

const std::vector<VariableStats>& checked_stats(const SampleBatch& batch, const TransformSpec& spec) {
  const auto& stats = spec.stats(batch.role);
  if (stats.size() != batch.columns.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "transform spec has " + std::to_string(stats.size()) + " " +
                                                   std::string(to_string(batch.role)) + " entries, batch has " +
                                                   std::to_string(batch.columns.size()) + " columns");
  }
  for (std::size_t c = 0; c < stats.size(); ++c) {
    if (stats[c].name != batch.names[c]) {
      throw Error(ErrorCode::kSchemaHashMismatch,
                  "transform spec column '" + stats[c].name + "' does not match batch column '" + batch.names[c] + "'",
                  batch.names[c]);
    }
  }
  return stats;
}

}  // namespace

void check_spec_matches(const TransformSpec& spec, const VariableSchema& schema) {
  if (spec.schema_hash != schema.hash()) {
    throw Error(ErrorCode::kSchemaHashMismatch, "transform spec schema hash " + std::to_string(spec.schema_hash) +
                                                    " does not match runtime schema " + std::to_string(schema.hash()));
  }
}

SampleBatch compute_tendencies(const SampleBatch& before, const SampleBatch& after, const VariableSchema& schema) {
  require_space(before, Space::kRaw, "compute_tendencies");
  require_space(after, Space::kRaw, "compute_tendencies");
  require_role(before, Role::kInput, "compute_tendencies");
  require_role(after, Role::kOutput, "compute_tendencies");
  if (before.n_rows() != after.n_rows()) {
    throw Error(ErrorCode::kRowCountMismatch, "before has " + std::to_string(before.n_rows()) +
                                                  " rows, after has " + std::to_string(after.n_rows()));
  }
  SampleBatch out = after;
  for (std::size_t c = 0; c < after.columns.size(); ++c) {
    const auto& def = schema.lookup(after.names[c]);
    if (def.output_form == OutputForm::kAbsolute) continue;
    const auto& prev = input_column_for(before, schema, def.name);
    auto& col = out.columns[c];
    for (std::size_t r = 0; r < col.size(); ++r) col[r] = after.columns[c][r] - prev[r];
  }
  return out;
}

SampleBatch reconstruct_full_values(const SampleBatch& before, const SampleBatch& tendencies,
                                    const VariableSchema& schema) {
  require_space(before, Space::kRaw, "reconstruct_full_values");
  require_space(tendencies, Space::kRaw, "reconstruct_full_values");
  require_role(before, Role::kInput, "reconstruct_full_values");
  require_role(tendencies, Role::kOutput, "reconstruct_full_values");
  if (before.n_rows() != tendencies.n_rows()) {
    throw Error(ErrorCode::kRowCountMismatch, "before has " + std::to_string(before.n_rows()) +
                                                  " rows, tendencies have " + std::to_string(tendencies.n_rows()));
  }
  SampleBatch out = tendencies;
  for (std::size_t c = 0; c < tendencies.columns.size(); ++c) {
    const auto& def = schema.lookup(tendencies.names[c]);
    if (def.output_form == OutputForm::kAbsolute) continue;
    const auto& prev = input_column_for(before, schema, def.name);
    auto& col = out.columns[c];
    for (std::size_t r = 0; r < col.size(); ++r) col[r] = prev[r] + tendencies.columns[c][r];
  }
  return out;
}

Dataset with_tendency_targets(const Dataset& raw, const VariableSchema& schema) {
  return {raw.inputs, compute_tendencies(raw.inputs, raw.outputs, schema)};
}

TransformSpec fit_transform_spec(const Dataset& train, const VariableSchema& schema) {
  require_space(train.inputs, Space::kRaw, "fit_transform_spec");
  require_space(train.outputs, Space::kRaw, "fit_transform_spec");
  if (train.inputs.n_rows() == 0 || train.outputs.n_rows() == 0) {
    throw Error(ErrorCode::kEmptyDataset, "cannot fit transform statistics on an empty batch");
  }
  TransformSpec spec;
  spec.schema_hash = schema.hash();
  for (const auto* batch : {&train.inputs, &train.outputs}) {
    auto& dest = batch->role == Role::kInput ? spec.inputs : spec.outputs;
    dest.clear();
    for (std::size_t c = 0; c < batch->columns.size(); ++c) {
      const auto& col = batch->columns[c];
      const double n = static_cast<double>(col.size());
      // Two-pass, summed in row order so results do not depend on threading.
      double sum = 0.0;
      for (double x : col) sum += signed_log_sqrt(x);
      const double mean = sum / n;
      double sq = 0.0;
      for (double x : col) {
        const double d = signed_log_sqrt(x) - mean;
        sq += d * d;
      }
      double sd = std::sqrt(sq / n);
      if (sd < TransformSpec::kDegenerateStd) sd = 1.0;
      dest.push_back({batch->names[c], batch->role, mean, sd});
    }
  }
  return spec;
}

SampleBatch to_transformed(const SampleBatch& raw) {
  require_space(raw, Space::kRaw, "to_transformed");
  return map_columns(raw, Space::kTransformed, [](std::size_t, double x) { return signed_log_sqrt(x); });
}

SampleBatch from_transformed(const SampleBatch& transformed) {
  require_space(transformed, Space::kTransformed, "from_transformed");
  return map_columns(transformed, Space::kRaw, [](std::size_t, double y) { return inverse_signed_log_sqrt(y); });
}

SampleBatch standardize(const SampleBatch& transformed, const TransformSpec& spec, const VariableSchema& schema) {
  require_space(transformed, Space::kTransformed, "standardize");
  check_spec_matches(spec, schema);
  const auto& stats = checked_stats(transformed, spec);
  return map_columns(transformed, Space::kStandardized,
                     [&](std::size_t c, double y) { return (y - stats[c].mean) / stats[c].std; });
}

SampleBatch destandardize(const SampleBatch& standardized, const TransformSpec& spec, const VariableSchema& schema) {
  require_space(standardized, Space::kStandardized, "destandardize");
  check_spec_matches(spec, schema);
  const auto& stats = checked_stats(standardized, spec);
  return map_columns(standardized, Space::kTransformed,
                     [&](std::size_t c, double z) { return z * stats[c].std + stats[c].mean; });
}

SampleBatch apply_pipeline(const SampleBatch& raw, const TransformSpec& spec, const VariableSchema& schema) {
  require_space(raw, Space::kRaw, "apply_pipeline");
  check_spec_matches(spec, schema);
  const auto& stats = checked_stats(raw, spec);
  return map_columns(raw, Space::kStandardized,
                     [&](std::size_t c, double x) { return (signed_log_sqrt(x) - stats[c].mean) / stats[c].std; });
}

SampleBatch invert_pipeline(const SampleBatch& standardized, const TransformSpec& spec, const VariableSchema& schema) {
  require_space(standardized, Space::kStandardized, "invert_pipeline");
  check_spec_matches(spec, schema);
  const auto& stats = checked_stats(standardized, spec);
  return map_columns(standardized, Space::kRaw, [&](std::size_t c, double z) {
    return inverse_signed_log_sqrt(z * stats[c].std + stats[c].mean);
  });
}

}  // namespace aemu
