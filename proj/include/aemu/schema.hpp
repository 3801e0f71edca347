#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace aemu {

enum class VariableKind { kAtmosphericState, kSpeciesMass, kModeConcentration, kModeWater };
enum class Species { kSO4, kBC, kOC, kDU, kSS, kH2SO4 };
enum class Mode { kNs, kKs, kAs, kCs, kKi, kAi, kCi };
enum class OutputForm { kTendency, kAbsolute };
enum class Role { kInput, kOutput };

std::string_view to_string(VariableKind kind);
std::string_view to_string(Species species);
std::string_view to_string(Mode mode);
std::string_view to_string(OutputForm form);
std::string_view to_string(Role role);

struct VariableDef {
  std::string name;
  std::string unit;
  bool is_input = false;
  bool is_output = false;
  VariableKind kind = VariableKind::kAtmosphericState;
  std::optional<Species> species;
  std::optional<Mode> mode;
  OutputForm output_form = OutputForm::kTendency;

  bool operator==(const VariableDef&) const = default;
};

/// 64-bit FNV-1a over the plain concatenation of `names`.
std::uint64_t fnv1a_names(std::span<const std::string> names);

/// Fixed registry of the emulator's 34 input and 28 output variables.
/// Canonical order is the registry order; inputs and outputs are the
/// subsequences with the corresponding flag set.
class VariableSchema {
 public:
  explicit VariableSchema(std::vector<VariableDef> variables);

  const std::vector<VariableDef>& variables() const noexcept { return variables_; }
  const VariableDef& lookup(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;

  std::size_t count_inputs() const noexcept { return inputs_.size(); }
  std::size_t count_outputs() const noexcept { return outputs_.size(); }

  // Registry views restricted to one role, in canonical order.
  const std::vector<std::size_t>& input_indices() const noexcept { return inputs_; }
  const std::vector<std::size_t>& output_indices() const noexcept { return outputs_; }
  const std::vector<std::string>& input_names() const noexcept { return input_names_; }
  const std::vector<std::string>& output_names() const noexcept { return output_names_; }
  const std::vector<std::string>& names(Role role) const noexcept {
    return role == Role::kInput ? input_names_ : output_names_;
  }
  const VariableDef& input(std::size_t i) const { return variables_[inputs_.at(i)]; }
  const VariableDef& output(std::size_t i) const { return variables_[outputs_.at(i)]; }

  /// Position of `name` among the inputs, if it is one.
  std::optional<std::size_t> input_position(std::string_view name) const;

  /// Hash of one role's column names, as stored in dataset file headers.
  std::uint64_t role_hash(Role role) const { return fnv1a_names(names(role)); }
  /// Hash of input names followed by output names; binds transform stats.
  std::uint64_t hash() const;

  nlohmann::json to_json() const;

  bool operator==(const VariableSchema& other) const { return variables_ == other.variables_; }

 private:
  std::vector<VariableDef> variables_;
  std::vector<std::size_t> inputs_;
  std::vector<std::size_t> outputs_;
  std::vector<std::string> input_names_;
  std::vector<std::string> output_names_;
};

const VariableSchema& builtin_schema();

/// Throws Error{kUnknownColumn | kMissingColumn | kOrderMismatch} naming the
/// first offender unless `header` equals the role's names in schema order.
void validate_columns(const VariableSchema& schema, std::span<const std::string> header, Role role);

}  // namespace aemu
