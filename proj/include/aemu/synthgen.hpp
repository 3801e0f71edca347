#pragma once

#include <cstdint>

#include <json.hpp>

#include "aemu/pipeline.hpp"
#include "aemu/schema.hpp"

namespace aemu {

/// Model time step of the reference surrogate, seconds.
inline constexpr double kStepSeconds = 450.0;

/// Relative humidity below which nucleation is switched off.
inline constexpr double kNucleationHumidityThreshold = 0.5;

struct ProcessStrengths {
  double nucleation = 1.0;
  double coagulation = 1.0;
  double condensation = 1.0;
  double water_uptake = 1.0;

  bool operator==(const ProcessStrengths&) const = default;
};

struct SurrogateConfig {
  std::uint64_t seed = 42;
  std::size_t n_samples = 100000;
  ProcessStrengths strengths;
  /// Probability that a mode (or the gas-phase H2SO4) is empty for a sample,
  /// which switches off every process acting on it.
  double zero_inflation = 0.35;

  void validate() const;
  nlohmann::json to_json() const;
  static SurrogateConfig from_json(const nlohmann::json& j);

  bool operator==(const SurrogateConfig&) const = default;
};

/// Raw input states (34 columns). Row r depends only on (seed, r).
SampleBatch generate_inputs(const SurrogateConfig& config, const VariableSchema& schema = builtin_schema(),
                            std::size_t threads = 1);

/// Raw outputs (28 columns) one step after `inputs` under the toy processes.
SampleBatch reference_step(const SampleBatch& inputs, const SurrogateConfig& config,
                           const VariableSchema& schema = builtin_schema(), std::size_t threads = 1);

/// generate_inputs followed by reference_step.
Dataset generate_dataset(const SurrogateConfig& config, const VariableSchema& schema = builtin_schema(),
                         std::size_t threads = 1);

}  // namespace aemu
