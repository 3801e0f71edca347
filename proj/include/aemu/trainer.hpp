#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <json.hpp>

#include "aemu/nn.hpp"

namespace aemu {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-9;
  std::size_t batch_size = 4096;
  std::size_t patience = 10;
  std::size_t max_epochs = 200;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Adam first and second moments, shaped like the network parameters.
template <typename T>
struct BasicAdamState {
  BasicGradientSet<T> first_moment;
  BasicGradientSet<T> second_moment;
  std::uint64_t step_count = 0;

  static BasicAdamState zeros_like(const BasicNetwork<T>& net);
};

using AdamState = BasicAdamState<float>;

/// One Adam update with bias correction, then decoupled weight decay
/// theta <- theta - lr * wd * theta. Throws NonFiniteGradient (subject = layer
/// index) before touching any parameter if a gradient entry is not finite.
template <typename T>
void adam_step(BasicNetwork<T>& net, const BasicGradientSet<T>& grads, BasicAdamState<T>& state,
               const TrainConfig& config);

/// Standardized training matrices.
struct TrainingData {
  Matrix<float> inputs;
  Matrix<float> targets;

  std::size_t n_rows() const { return static_cast<std::size_t>(inputs.rows()); }
};

/// Tendency targets from raw before/after data, then the full pipeline.
TrainingData prepare_training_data(const Dataset& raw, const TransformSpec& spec,
                                   const VariableSchema& schema = builtin_schema());

/// Row visiting order per epoch: the identity permutation re-shuffled in place
/// each epoch by one mt19937_64 seeded with `seed`.
class EpochShuffler {
 public:
  EpochShuffler(std::size_t n, std::uint64_t seed);
  const std::vector<std::size_t>& next();

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before any update
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  Network best_net;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  std::size_t epochs_run = 0;
  std::vector<EpochRecord> history;
};

struct TrainHooks {
  /// Replaces the validation pass; receives the current network and epoch.
  std::function<double(const Network&, std::size_t)> validation_loss;
  /// Called after every epoch record, including epoch 0.
  std::function<void(const EpochRecord&)> on_epoch;
  /// Called whenever a new best validation loss is reached.
  std::function<void(const Network&, const EpochRecord&)> on_improvement;
};

/// Shuffled mini-batch Adam with early stopping on validation MSE. An epoch
/// improves when its validation loss is strictly below the best so far;
/// training stops after `patience` consecutive non-improving epochs or at
/// `max_epochs`. Returns the parameters of the best trained epoch (>= 1). Each epoch's
/// train_mse is the row-weighted mean of its mini-batch losses; epoch 0 holds
/// full-pass losses of the initial network.
TrainResult train(Network net, const TrainingData& train_data, const TrainingData& val_data,
                  const TrainConfig& config, const TrainHooks& hooks = {});

/// CSV with header epoch,train_mse,val_mse.
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace aemu
