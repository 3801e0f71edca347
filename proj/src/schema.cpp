#include "aemu/schema.hpp"

#include <algorithm>
#include <set>

#include "aemu/error.hpp"

namespace aemu {

std::string_view to_string(VariableKind kind) {
  switch (kind) {
    case VariableKind::kAtmosphericState: return "atmospheric_state";
    case VariableKind::kSpeciesMass: return "species_mass";
    case VariableKind::kModeConcentration: return "mode_concentration";
    case VariableKind::kModeWater: return "mode_water";
  }
  return "?";
}

std::string_view to_string(Species species) {
  switch (species) {
    case Species::kSO4: return "SO4";
    case Species::kBC: return "BC";
    case Species::kOC: return "OC";
    case Species::kDU: return "DU";
    case Species::kSS: return "SS";
    case Species::kH2SO4: return "H2SO4";
  }
  return "?";
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kNs: return "ns";
    case Mode::kKs: return "ks";
    case Mode::kAs: return "as";
    case Mode::kCs: return "cs";
    case Mode::kKi: return "ki";
    case Mode::kAi: return "ai";
    case Mode::kCi: return "ci";
  }
  return "?";
}

std::string_view to_string(OutputForm form) {
  return form == OutputForm::kTendency ? "tendency" : "absolute";
}

std::string_view to_string(Role role) { return role == Role::kInput ? "input" : "output"; }

std::uint64_t fnv1a_names(std::span<const std::string> names) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& name : names) {
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

VariableDef atmospheric(std::string name, std::string unit) {
  return {std::move(name), std::move(unit), true, false, VariableKind::kAtmosphericState,
          std::nullopt, std::nullopt, OutputForm::kTendency};
}

VariableDef mass(Species s, Mode m, std::string unit, bool output = true) {
  std::string name = std::string(to_string(s)) + " " + std::string(to_string(m)) + " mass";
  return {std::move(name), std::move(unit), true, output, VariableKind::kSpeciesMass,
          s, m, OutputForm::kTendency};
}

VariableDef concentration(Mode m) {
  return {std::string(to_string(m)) + " concentration", "cm⁻³", true, true,
          VariableKind::kModeConcentration, std::nullopt, m, OutputForm::kTendency};
}

VariableDef water(Mode m) {
  return {std::string(to_string(m)) + " water", "kg m⁻³", false, true,
          VariableKind::kModeWater, std::nullopt, m, OutputForm::kAbsolute};
}

std::vector<VariableDef> builtin_variables() {
  const std::string ug = "µg m⁻³";
  const std::string molec = "molec. m⁻³";
  std::vector<VariableDef> v;
  v.push_back(atmospheric("Pressure", "Pa"));
  v.push_back(atmospheric("Temperature", "K"));
  v.push_back(atmospheric("Rel. Humidity", "-"));
  v.push_back(atmospheric("ionization rate", "-"));
  v.push_back(atmospheric("cloud cover", "-"));
  v.push_back(atmospheric("Boundary layer", "-"));
  v.push_back(atmospheric("Forest fraction", "-"));
  v.push_back(atmospheric("H2SO4 prod. rate", "cm⁻³ s⁻¹"));
  v.push_back(mass(Species::kSS, Mode::kAs, ug, false));
  v.push_back(mass(Species::kSS, Mode::kCs, ug, false));

  VariableDef h2so4{"H2SO4 mass", ug, true, true, VariableKind::kSpeciesMass,
                    Species::kH2SO4, std::nullopt, OutputForm::kTendency};
  v.push_back(h2so4);
  for (Mode m : {Mode::kNs, Mode::kKs, Mode::kAs, Mode::kCs}) v.push_back(mass(Species::kSO4, m, molec));
  for (Species s : {Species::kBC, Species::kOC}) {
    for (Mode m : {Mode::kKs, Mode::kAs, Mode::kCs, Mode::kKi}) v.push_back(mass(s, m, ug));
  }
  for (Mode m : {Mode::kAs, Mode::kCs, Mode::kAi, Mode::kCi}) v.push_back(mass(Species::kDU, m, ug));
  for (Mode m : {Mode::kNs, Mode::kKs, Mode::kAs, Mode::kCs, Mode::kKi, Mode::kAi, Mode::kCi}) {
    v.push_back(concentration(m));
  }
  for (Mode m : {Mode::kNs, Mode::kKs, Mode::kAs, Mode::kCs}) v.push_back(water(m));
  return v;
}

}  // namespace

VariableSchema::VariableSchema(std::vector<VariableDef> variables) : variables_(std::move(variables)) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    const auto& def = variables_[i];
    if (!seen.insert(def.name).second) {
      throw Error(ErrorCode::kInvalidConfig, "duplicate variable name '" + def.name + "'", def.name);
    }
    if (def.is_input) {
      inputs_.push_back(i);
      input_names_.push_back(def.name);
    }
    if (def.is_output) {
      outputs_.push_back(i);
      output_names_.push_back(def.name);
    }
  }
}

std::optional<std::size_t> VariableSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == name) return i;
  }
  return std::nullopt;
}

const VariableDef& VariableSchema::lookup(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw Error(ErrorCode::kUnknownColumn, "no variable named '" + std::string(name) + "'", std::string(name));
  return variables_[*idx];
}

std::optional<std::size_t> VariableSchema::input_position(std::string_view name) const {
  auto it = std::find(input_names_.begin(), input_names_.end(), name);
  if (it == input_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - input_names_.begin());
}

std::uint64_t VariableSchema::hash() const {
  std::vector<std::string> all = input_names_;
  all.insert(all.end(), output_names_.begin(), output_names_.end());
  return fnv1a_names(all);
}

nlohmann::json VariableSchema::to_json() const {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& d : variables_) {
    nlohmann::json j{{"name", d.name},
                     {"unit", d.unit},
                     {"is_input", d.is_input},
                     {"is_output", d.is_output},
                     {"kind", to_string(d.kind)},
                     {"output_form", to_string(d.output_form)}};
    j["species"] = d.species ? nlohmann::json(to_string(*d.species)) : nlohmann::json(nullptr);
    j["mode"] = d.mode ? nlohmann::json(to_string(*d.mode)) : nlohmann::json(nullptr);
    vars.push_back(std::move(j));
  }
  return {{"schema_hash", hash()}, {"variables", std::move(vars)}};
}

const VariableSchema& builtin_schema() {
  static const VariableSchema schema(builtin_variables());
  return schema;
}

void validate_columns(const VariableSchema& schema, std::span<const std::string> header, Role role) {
  const auto& expected = schema.names(role);
  const std::set<std::string> expected_set(expected.begin(), expected.end());
  for (const auto& col : header) {
    if (!expected_set.contains(col)) {
      throw Error(ErrorCode::kUnknownColumn,
                  "column '" + col + "' is not a schema " + std::string(to_string(role)), col);
    }
  }
  const std::set<std::string> header_set(header.begin(), header.end());
  for (const auto& name : expected) {
    if (!header_set.contains(name)) {
      throw Error(ErrorCode::kMissingColumn, "missing column '" + name + "'", name);
    }
  }
  // All names known and present; any remaining difference is order or repetition.
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i >= expected.size() || header[i] != expected[i]) {
      throw Error(ErrorCode::kOrderMismatch,
                  "column '" + header[i] + "' at position " + std::to_string(i) + " out of schema order",
                  header[i]);
    }
  }
}

}  // namespace aemu
